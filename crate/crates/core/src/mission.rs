//! Mission sequencing: take-off, path following, end-marker centring and
//! landing, plus two terminal bookkeeping states.

use std::fmt;

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    TakeOff,
    Following,
    EndMarker,
    Landing,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::TakeOff => "TakeOff",
            Phase::Following => "Following",
            Phase::EndMarker => "EndMarker",
            Phase::Landing => "Landing",
            Phase::Done => "Done",
            Phase::Failed => "Failed",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionState {
    pub phase: Phase,
    /// Time the current phase was entered.
    pub entered_at: f64,
    /// Last time either image flag was raised.
    pub last_progress_at: f64,
}

impl MissionState {
    pub fn start(now: f64) -> Self {
        Self {
            phase: Phase::TakeOff,
            entered_at: now,
            last_progress_at: now,
        }
    }
}

/// Per-tick predicates feeding the transition function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MissionInputs {
    pub hovering: bool,
    pub flag_vtp: bool,
    pub flag_marker: bool,
    pub centered: bool,
    pub landed: bool,
    pub now: f64,
}

/// Thresholds behind the `hovering` and `landed` predicates, and the
/// lost-path timeout.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub hover_tol: f64,
    pub hover_rate_tol: f64,
    pub ground_tol: f64,
    pub lost_timeout: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            hover_tol: 0.02,
            hover_rate_tol: 0.05,
            ground_tol: 0.01,
            lost_timeout: 5.0,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("mission.hover_tol", self.hover_tol),
            ("mission.hover_rate_tol", self.hover_rate_tol),
            ("mission.ground_tol", self.ground_tol),
            ("mission.lost_timeout", self.lost_timeout),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(name, "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn is_hovering(&self, z: f64, vz: f64, z_h: f64) -> bool {
        (z - z_h).abs() <= self.hover_tol && vz.abs() <= self.hover_rate_tol
    }

    pub fn is_landed(&self, z: f64) -> bool {
        z <= self.ground_tol
    }
}

/// Advances the mission by one tick.
///
/// Any non-terminal phase fails once neither image flag has been raised for
/// `lost_timeout` seconds and no transition fires.
///
/// # Panics
///
/// When called on a terminal phase.
pub fn step_mission(
    state: MissionState,
    inputs: &MissionInputs,
    lost_timeout: f64,
) -> MissionState {
    assert!(
        !state.phase.is_terminal(),
        "step_mission called on terminal phase {}",
        state.phase
    );
    let last_progress_at = if inputs.flag_vtp || inputs.flag_marker {
        inputs.now
    } else {
        state.last_progress_at
    };
    let next = match state.phase {
        Phase::TakeOff if inputs.hovering && inputs.flag_vtp => Phase::Following,
        Phase::Following if !inputs.flag_vtp && inputs.flag_marker => Phase::EndMarker,
        Phase::EndMarker if inputs.centered => Phase::Landing,
        Phase::Landing if inputs.landed => Phase::Done,
        _ if inputs.now - last_progress_at >= lost_timeout => Phase::Failed,
        p => p,
    };
    MissionState {
        phase: next,
        entered_at: if next == state.phase {
            state.entered_at
        } else {
            inputs.now
        },
        last_progress_at,
    }
}
