//! Vision-based path following for a downward-looking quad-rotor.
//!
//! A synthetic camera ([`world`]) feeds the image processing ([`ips`]), which
//! reports the pixel offset of a virtual target point on the path. The
//! [`planner`] integrates that offset into a world-frame waypoint, the
//! [`mission`] state machine sequences take-off, following, marker centring
//! and landing, and [`vehicle`] stands in for the flight controller. [`sim`]
//! ties everything together at two rates.

pub mod error;
pub mod imaging;
pub mod ips;
pub mod mission;
pub mod planner;
pub mod sim;
pub mod vehicle;
pub mod world;

pub use error::{ConfigError, Error, TrackError};
