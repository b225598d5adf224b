//! Waypoint integration from image-plane errors.
//!
//! The planner keeps its own reference `(x, y, z)` and pushes it along the
//! pixel error reported by the image processing: by `alpha` per pixel while
//! a VTP is visible, and by `beta` per pixel while centring over the
//! end-marker. Once the marker is centred the reference drops to the ground.
//! Image rows map to world `x`, image columns to world `y`; the heading is
//! never changed.

use crate::error::ConfigError;
use crate::ips::{IpsConfig, IpsOutput};

/// When the error integration runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyPer {
    /// Every planner tick, re-using the held image output in between frames.
    PpTick,
    /// Once per fresh image-processing output.
    IpsTick,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Following gain, metres per pixel.
    pub alpha: f64,
    /// Marker-centring gain, metres per pixel.
    pub beta: f64,
    /// Flight altitude, metres.
    pub z_h: f64,
    /// Planner period, seconds.
    pub t_pp: f64,
    /// Largest per-axis marker error (pixels) still counted as centred.
    pub centered_tol: f64,
    pub apply_per: ApplyPer,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            alpha: 5e-5,
            beta: 5e-5,
            z_h: 1.0,
            t_pp: 5e-3,
            centered_tol: 1.0,
            apply_per: ApplyPer::PpTick,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.alpha) {
            return Err(ConfigError::invalid("planner.alpha", "must be > 0"));
        }
        if !positive(self.beta) {
            return Err(ConfigError::invalid("planner.beta", "must be > 0"));
        }
        if !positive(self.z_h) {
            return Err(ConfigError::invalid("planner.z_h", "must be > 0"));
        }
        if !positive(self.t_pp) {
            return Err(ConfigError::invalid("planner.t_pp", "must be > 0"));
        }
        if !(self.centered_tol >= 0.0 && self.centered_tol.is_finite()) {
            return Err(ConfigError::invalid("planner.centered_tol", "must be >= 0"));
        }
        Ok(())
    }

    /// Marker error small enough to start the descent.
    pub fn is_centered(&self, ips: &IpsOutput) -> bool {
        ips.flag_marker && ips.e_x.abs() <= self.centered_tol && ips.e_y.abs() <= self.centered_tol
    }
}

/// World-frame position reference for the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One planner update.
///
/// # Panics
///
/// If `prev` or the image errors are not finite.
pub fn plan_step(prev: Waypoint, ips: &IpsOutput, cfg: &PlannerConfig) -> Waypoint {
    assert!(
        prev.is_finite() && ips.e_x.is_finite() && ips.e_y.is_finite(),
        "plan_step on non-finite input: {prev:?} {ips:?}"
    );
    if ips.flag_vtp {
        Waypoint::new(
            prev.x + cfg.alpha * ips.e_x,
            prev.y + cfg.alpha * ips.e_y,
            cfg.z_h,
        )
    } else if ips.flag_marker {
        if cfg.is_centered(ips) {
            Waypoint::new(prev.x, prev.y, 0.0)
        } else {
            Waypoint::new(
                prev.x + cfg.beta * ips.e_x,
                prev.y + cfg.beta * ips.e_y,
                cfg.z_h,
            )
        }
    } else {
        prev
    }
}

/// Waypoint speed when the error magnitude sits on the middle of the ring:
/// `(alpha / t_pp) * (r_min + r_max) / 2`.
pub fn predicted_speed(cfg: &PlannerConfig, ips_cfg: &IpsConfig) -> f64 {
    cfg.alpha / cfg.t_pp * (ips_cfg.r_min + ips_cfg.r_max) / 2.0
}

/// Runs the planner open-loop for `ticks` ticks against a fixed image
/// output and returns every waypoint, starting with `start`.
pub fn integrate_pinned(
    start: Waypoint,
    ips: &IpsOutput,
    cfg: &PlannerConfig,
    ticks: usize,
) -> Vec<Waypoint> {
    let mut out = Vec::with_capacity(ticks + 1);
    out.push(start);
    let mut wp = start;
    for _ in 0..ticks {
        wp = plan_step(wp, ips, cfg);
        out.push(wp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vtp(e_x: f64, e_y: f64) -> IpsOutput {
        IpsOutput {
            e_x,
            e_y,
            flag_vtp: true,
            ..Default::default()
        }
    }

    fn marker(e_x: f64, e_y: f64) -> IpsOutput {
        IpsOutput {
            e_x,
            e_y,
            flag_marker: true,
            ..Default::default()
        }
    }

    #[test]
    fn following_examples() {
        let cfg = PlannerConfig {
            alpha: 0.05,
            ..Default::default()
        };
        let prev = Waypoint::new(0.3, -0.2, 0.4);
        assert_eq!(
            plan_step(prev, &vtp(0.0, 0.0), &cfg),
            Waypoint::new(0.3, -0.2, 1.0)
        );
        let next = plan_step(Waypoint::new(0.0, 0.0, 1.0), &vtp(27.0, 0.0), &cfg);
        assert!((next.x - 1.35).abs() < 1e-12);
        assert_eq!((next.y, next.z), (0.0, 1.0));
    }

    #[test]
    fn marker_examples() {
        let cfg = PlannerConfig {
            beta: 0.018,
            ..Default::default()
        };
        let prev = Waypoint::new(1.0, 2.0, 1.0);
        assert_eq!(
            plan_step(prev, &marker(0.0, 0.0), &cfg),
            Waypoint::new(1.0, 2.0, 0.0)
        );
        let next = plan_step(prev, &marker(2.0, -3.0), &cfg);
        assert!((next.x - 1.036).abs() < 1e-12);
        assert!((next.y - 1.946).abs() < 1e-12);
        assert_eq!(next.z, 1.0);
    }

    #[test]
    fn centered_tolerance() {
        let cfg = PlannerConfig::default();
        assert!(cfg.is_centered(&marker(1.0, -1.0)));
        assert!(!cfg.is_centered(&marker(1.5, 0.0)));
        assert!(!cfg.is_centered(&IpsOutput::default()));
        let exact = PlannerConfig {
            centered_tol: 0.0,
            ..cfg
        };
        assert!(!exact.is_centered(&marker(0.5, 0.0)));
        assert!(exact.is_centered(&marker(0.0, 0.0)));
    }

    #[test]
    fn no_flags_holds() {
        let prev = Waypoint::new(1.0, 2.0, 0.7);
        assert_eq!(
            plan_step(prev, &IpsOutput::default(), &PlannerConfig::default()),
            prev
        );
    }

    #[test]
    #[should_panic]
    fn non_finite_panics() {
        plan_step(
            Waypoint::new(f64::NAN, 0.0, 1.0),
            &vtp(1.0, 1.0),
            &PlannerConfig::default(),
        );
    }

    #[test]
    fn predicted_speed_examples() {
        let ips = IpsConfig::default();
        let cfg = PlannerConfig {
            alpha: 0.05,
            t_pp: 0.005,
            ..Default::default()
        };
        assert!((predicted_speed(&cfg, &ips) - 270.0).abs() < 1e-9);
        let zero = PlannerConfig {
            alpha: 0.0,
            ..cfg.clone()
        };
        assert_eq!(predicted_speed(&zero, &ips), 0.0);
        let double = PlannerConfig {
            alpha: 0.1,
            ..cfg.clone()
        };
        assert!((predicted_speed(&double, &ips) - 2.0 * predicted_speed(&cfg, &ips)).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        assert!(PlannerConfig {
            alpha: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PlannerConfig {
            centered_tol: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn altitude_discipline(
            e_x in -40.0f64..40.0, e_y in -40.0f64..40.0,
            vtp_flag in any::<bool>(), marker_flag in any::<bool>(),
        ) {
            let cfg = PlannerConfig::default();
            let ips = IpsOutput { e_x, e_y, flag_vtp: vtp_flag, flag_marker: marker_flag, theta: None };
            let prev = Waypoint::new(0.5, 0.5, cfg.z_h);
            let next = plan_step(prev, &ips, &cfg);
            if !vtp_flag && cfg.is_centered(&ips) {
                prop_assert_eq!(next.z, 0.0);
            } else {
                prop_assert_eq!(next.z, cfg.z_h);
            }
        }

        #[test]
        fn following_displacement_is_linear(
            e_x in -40.0f64..40.0, e_y in -40.0f64..40.0, alpha in 1e-6f64..0.1,
        ) {
            let cfg = PlannerConfig { alpha, ..Default::default() };
            let next = plan_step(Waypoint::default(), &vtp(e_x, e_y), &cfg);
            prop_assert_eq!((next.x, next.y), (alpha * e_x, alpha * e_y));
        }

        #[test]
        fn larger_alpha_goes_further(
            a1 in 1e-5f64..0.01, factor in 1.01f64..5.0, angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let pin = vtp(27.0 * angle.cos(), 27.0 * angle.sin());
            let dist = |alpha: f64| {
                let cfg = PlannerConfig { alpha, ..Default::default() };
                let wps = integrate_pinned(Waypoint::default(), &pin, &cfg, 200);
                let last = wps.last().unwrap();
                last.x.hypot(last.y)
            };
            prop_assert!(dist(a1 * factor) > dist(a1));
        }
    }
}
