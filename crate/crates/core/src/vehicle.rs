//! Closed-loop vehicle stand-in: each axis tracks the waypoint as a damped
//! second-order system, with the horizontal speed saturated.

use nalgebra::Vector3;

use crate::error::ConfigError;
use crate::planner::Waypoint;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DroneState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl DroneState {
    pub fn at_rest(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
            velocity: Vector3::zeros(),
        }
    }

    /// Horizontal speed `|(vx, vy)|`.
    pub fn ground_speed(&self) -> f64 {
        self.velocity.x.hypot(self.velocity.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    pub v_max: f64,
    pub dt: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            natural_frequency: 6.0,
            damping_ratio: 0.9,
            v_max: 1.5,
            dt: 5e-3,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.natural_frequency) {
            return Err(ConfigError::invalid(
                "vehicle.natural_frequency",
                "must be > 0",
            ));
        }
        if !positive(self.damping_ratio) {
            return Err(ConfigError::invalid("vehicle.damping_ratio", "must be > 0"));
        }
        if !positive(self.v_max) {
            return Err(ConfigError::invalid("vehicle.v_max", "must be > 0"));
        }
        if !positive(self.dt) {
            return Err(ConfigError::invalid("vehicle.dt", "must be > 0"));
        }
        if self.dt * self.natural_frequency >= 0.5 {
            return Err(ConfigError::invalid(
                "vehicle.dt",
                format!(
                    "dt * natural_frequency = {} must stay below 0.5",
                    self.dt * self.natural_frequency
                ),
            ));
        }
        Ok(())
    }
}

/// Semi-implicit Euler step: velocity first, then the horizontal speed
/// clamp, then position. Altitude is kept non-negative.
pub fn step_vehicle(
    state: &DroneState,
    wp: &Waypoint,
    p: &VehicleParams,
) -> Result<DroneState, ConfigError> {
    p.validate()?;
    let wn = p.natural_frequency;
    let target = Vector3::new(wp.x, wp.y, wp.z);
    let accel =
        (target - state.position) * (wn * wn) - state.velocity * (2.0 * p.damping_ratio * wn);
    let mut velocity = state.velocity + accel * p.dt;

    let ground = velocity.x.hypot(velocity.y);
    if ground > p.v_max {
        let k = p.v_max / ground;
        velocity.x *= k;
        velocity.y *= k;
    }

    let mut position = state.position + velocity * p.dt;
    if position.z < 0.0 {
        position.z = 0.0;
        velocity.z = velocity.z.max(0.0);
    }
    Ok(DroneState { position, velocity })
}
