//! Deterministic closed-loop simulation.
//!
//! Every planner tick (`t_pp`) the mission, planner and vehicle advance. Every
//! `t_ips / t_pp`-th tick, starting with tick 0, the camera renders a frame
//! and the image-processing output is refreshed; between refreshes the last
//! output is held.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ConfigError, Error};
use crate::imaging::{write_pgm_binary, write_pgm_gray, write_ppm, Kernel, PixelFrame};
use crate::ips::{self, IpsConfig, IpsOutput, IpsTrace, VtpTrackerState};
use crate::mission::{step_mission, MissionConfig, MissionInputs, MissionState, Phase};
use crate::planner::{plan_step, ApplyPer, PlannerConfig, Waypoint};
use crate::vehicle::{step_vehicle, DroneState, VehicleParams};
use crate::world::{path_distance, render_frame, CameraModel, Point, TrackSpec};

/// The camera never renders from below this altitude (metres).
pub const MIN_CAMERA_ALTITUDE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub ips: IpsConfig,
    pub planner: PlannerConfig,
    pub vehicle: VehicleParams,
    pub camera: CameraModel,
    pub mission: MissionConfig,
    pub track: TrackSpec,
    pub t_ips: f64,
    pub t_pp: f64,
    pub max_time: f64,
}

impl SimConfig {
    /// Defaults for everything but the track. The marker kernel is sized from
    /// the track's path width as seen by the camera.
    pub fn new(track: TrackSpec) -> Self {
        let mut cfg = Self {
            ips: IpsConfig::default(),
            planner: PlannerConfig::default(),
            vehicle: VehicleParams::default(),
            camera: CameraModel::default(),
            mission: MissionConfig::default(),
            track,
            t_ips: 0.2,
            t_pp: 5e-3,
            max_time: 120.0,
        };
        cfg.derive_marker_kernel();
        cfg
    }

    fn derive_marker_kernel(&mut self) {
        self.ips.marker_kernel =
            Kernel::marker_for_path_width(self.track.path_width * self.camera.scale);
    }

    /// Planner ticks per image frame.
    pub fn ips_ratio(&self) -> usize {
        (self.t_ips / self.t_pp).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ips.validate()?;
        self.planner.validate()?;
        self.vehicle.validate()?;
        self.camera.validate()?;
        self.mission.validate()?;
        if !(self.t_pp > 0.0 && self.t_pp.is_finite()) {
            return Err(ConfigError::invalid("sim.t_pp", "must be > 0"));
        }
        let ratio = self.t_ips / self.t_pp;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(ConfigError::invalid(
                "sim.t_ips",
                format!("must be an integer multiple of t_pp, got ratio {ratio}"),
            ));
        }
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return Err(ConfigError::invalid("sim.max_time", "must be > 0"));
        }
        if self.planner.t_pp != self.t_pp || self.vehicle.dt != self.t_pp {
            return Err(ConfigError::invalid(
                "sim.t_pp",
                "planner.t_pp and vehicle.dt must equal sim.t_pp",
            ));
        }
        if self.camera.width != self.ips.width || self.camera.height != self.ips.height {
            return Err(ConfigError::DimensionMismatch {
                got_w: self.camera.width,
                got_h: self.camera.height,
                want_w: self.ips.width,
                want_h: self.ips.height,
            });
        }
        self.track
            .validate()
            .map_err(|e| ConfigError::invalid("track", e.to_string()))
    }

    /// Keys accepted by [`SimConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "ips.gg",
        "ips.gb",
        "ips.k_t",
        "ips.r_min",
        "ips.r_max",
        "ips.fov",
        "ips.path_kernel",
        "ips.marker_kernel",
        "planner.alpha",
        "planner.beta",
        "planner.z_h",
        "planner.centered_tol",
        "planner.apply_per",
        "vehicle.natural_frequency",
        "vehicle.damping_ratio",
        "vehicle.v_max",
        "camera.scale",
        "camera.width",
        "camera.height",
        "camera.reference_altitude",
        "mission.hover_tol",
        "mission.hover_rate_tol",
        "mission.ground_tol",
        "mission.lost_timeout",
        "track.width",
        "track.marker_diameter",
        "sim.t_ips",
        "sim.t_pp",
        "sim.max_time",
    ];

    /// Applies one dotted-key override. `camera.width`/`camera.height` also
    /// set the expected frame size of the image processing; `sim.t_pp` sets
    /// the planner and vehicle periods; `track.width` and `camera.scale`
    /// re-derive the marker kernel. Kernels are given as `square:<side>` or
    /// `disk:<radius>`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        let num = || -> Result<f64, ConfigError> {
            value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad("expected a number"))
        };
        let count = || -> Result<usize, ConfigError> {
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| bad("expected a non-negative integer"))
        };
        let kernel = || -> Result<Kernel, ConfigError> {
            let (kind, size) = value
                .split_once(':')
                .ok_or_else(|| bad("expected square:<n> or disk:<n>"))?;
            let size: usize = size
                .trim()
                .parse()
                .map_err(|_| bad("kernel size must be an integer"))?;
            match kind.trim() {
                "square" => Kernel::square(size),
                "disk" => Kernel::disk(size),
                _ => Err(bad("expected square:<n> or disk:<n>")),
            }
            .map_err(|e| bad(&e.to_string()))
        };

        match key {
            "ips.gg" => self.ips.gg = num()?,
            "ips.gb" => self.ips.gb = num()?,
            "ips.k_t" => self.ips.k_t = num()?,
            "ips.r_min" => self.ips.r_min = num()?,
            "ips.r_max" => self.ips.r_max = num()?,
            "ips.fov" => self.ips.fov = num()?,
            "ips.path_kernel" => self.ips.path_kernel = kernel()?,
            "ips.marker_kernel" => self.ips.marker_kernel = kernel()?,
            "planner.alpha" => self.planner.alpha = num()?,
            "planner.beta" => self.planner.beta = num()?,
            "planner.z_h" => self.planner.z_h = num()?,
            "planner.centered_tol" => self.planner.centered_tol = num()?,
            "planner.apply_per" => {
                self.planner.apply_per = match value.trim() {
                    "pp_tick" => ApplyPer::PpTick,
                    "ips_tick" => ApplyPer::IpsTick,
                    _ => return Err(bad("expected pp_tick or ips_tick")),
                }
            }
            "vehicle.natural_frequency" => self.vehicle.natural_frequency = num()?,
            "vehicle.damping_ratio" => self.vehicle.damping_ratio = num()?,
            "vehicle.v_max" => self.vehicle.v_max = num()?,
            "camera.scale" => {
                self.camera.scale = num()?;
                self.derive_marker_kernel();
            }
            "camera.width" => {
                self.camera.width = count()?;
                self.ips.width = self.camera.width;
            }
            "camera.height" => {
                self.camera.height = count()?;
                self.ips.height = self.camera.height;
            }
            "camera.reference_altitude" => self.camera.reference_altitude = num()?,
            "mission.hover_tol" => self.mission.hover_tol = num()?,
            "mission.hover_rate_tol" => self.mission.hover_rate_tol = num()?,
            "mission.ground_tol" => self.mission.ground_tol = num()?,
            "mission.lost_timeout" => self.mission.lost_timeout = num()?,
            "track.width" => {
                self.track.path_width = num()?;
                self.derive_marker_kernel();
            }
            "track.marker_diameter" => self.track.marker_diameter = num()?,
            "sim.t_ips" => self.t_ips = num()?,
            "sim.t_pp" => {
                let v = num()?;
                self.t_pp = v;
                self.planner.t_pp = v;
                self.vehicle.dt = v;
            }
            "sim.max_time" => self.max_time = num()?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

/// One planner tick: the drone state at `t` and the decisions taken at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub drone: DroneState,
    pub v_d: f64,
    pub waypoint: Waypoint,
    pub ips: IpsOutput,
    pub phase: Phase,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub const HEADER: &'static str =
        "t,x,y,z,vx,vy,vz,v_d,wp_x,wp_y,wp_z,e_x,e_y,flag_vtp,flag_marker,state";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            let (p, v) = (&r.drone.position, &r.drone.velocity);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                p.x,
                p.y,
                p.z,
                v.x,
                v.y,
                v.z,
                r.v_d,
                r.waypoint.x,
                r.waypoint.y,
                r.waypoint.z,
                r.ips.e_x,
                r.ips.e_y,
                u8::from(r.ips.flag_vtp),
                u8::from(r.ips.flag_marker),
                r.phase
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Rows in the given phase.
    pub fn in_phase(&self, phase: Phase) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.phase == phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Done,
    Failed,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    /// Take-off to touchdown (or to termination), seconds.
    pub mission_time: f64,
    /// Mean drone-to-centreline distance over the following phase, metres.
    pub mean_path_error: f64,
    pub max_path_error: f64,
    /// Final ground distance to the marker centre, metres.
    pub landing_offset: f64,
    pub outcome: Outcome,
}

impl RunMetrics {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("outcome", format!("{:?}", self.outcome)),
            ("mission_time", self.mission_time.to_string()),
            ("mean_path_error", self.mean_path_error.to_string()),
            ("max_path_error", self.max_path_error.to_string()),
            ("landing_offset", self.landing_offset.to_string()),
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write per-frame debug images into this directory.
    pub dump_dir: Option<PathBuf>,
}

pub fn run(cfg: &SimConfig) -> Result<(TrajectoryLog, RunMetrics), Error> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, opts: &RunOptions) -> Result<(TrajectoryLog, RunMetrics), Error> {
    cfg.validate()?;
    if let Some(dir) = &opts.dump_dir {
        fs::create_dir_all(dir)?;
    }

    let ratio = cfg.ips_ratio();
    let n_ticks = (cfg.max_time / cfg.t_pp - 1e-9).ceil().max(0.0) as usize;
    let z_h = cfg.planner.z_h;
    let start = cfg.track.start;

    let mut drone = DroneState::at_rest(start.x, start.y, 0.0);
    let hover_point = Waypoint::new(start.x, start.y, z_h);
    let mut waypoint = hover_point;
    let mut mission = MissionState::start(0.0);
    let mut tracker = VtpTrackerState::default();
    let mut held = IpsOutput::default();
    let mut log = TrajectoryLog {
        rows: Vec::with_capacity(n_ticks),
    };

    for k in 0..n_ticks {
        let t = k as f64 * cfg.t_pp;
        let fresh = k % ratio == 0;
        if fresh {
            // No VTP orientation is committed before the path is being followed.
            if mission.phase == Phase::TakeOff {
                tracker.reset();
            }
            let altitude = drone.position.z.max(MIN_CAMERA_ALTITUDE);
            let ground = Point::new(drone.position.x, drone.position.y);
            let frame = render_frame(&cfg.track, ground, altitude, &cfg.camera);
            held = match &opts.dump_dir {
                Some(dir) => {
                    let trace = ips::process_frame_traced(&frame, &mut tracker, &cfg.ips)?;
                    dump_frame(dir, k / ratio, &frame, &trace, &cfg.ips)?;
                    trace.output
                }
                None => ips::process_frame(&frame, &mut tracker, &cfg.ips)?,
            };
        }

        let inputs = MissionInputs {
            hovering: cfg
                .mission
                .is_hovering(drone.position.z, drone.velocity.z, z_h),
            flag_vtp: held.flag_vtp,
            flag_marker: held.flag_marker,
            centered: cfg.planner.is_centered(&held),
            landed: cfg.mission.is_landed(drone.position.z),
            now: t,
        };
        mission = step_mission(mission, &inputs, cfg.mission.lost_timeout);

        waypoint = match mission.phase {
            Phase::TakeOff => hover_point,
            Phase::Following | Phase::EndMarker => {
                if cfg.planner.apply_per == ApplyPer::PpTick || fresh {
                    plan_step(waypoint, &held, &cfg.planner)
                } else {
                    waypoint
                }
            }
            Phase::Landing => Waypoint::new(waypoint.x, waypoint.y, 0.0),
            Phase::Done | Phase::Failed => waypoint,
        };

        log.rows.push(LogRow {
            t,
            drone,
            v_d: drone.ground_speed(),
            waypoint,
            ips: held,
            phase: mission.phase,
        });
        if mission.phase.is_terminal() {
            break;
        }
        drone = step_vehicle(&drone, &waypoint, &cfg.vehicle)?;
    }

    let metrics = compute_metrics(cfg, &log);
    Ok((log, metrics))
}

/// Metrics recomputed from a log.
pub fn compute_metrics(cfg: &SimConfig, log: &TrajectoryLog) -> RunMetrics {
    let errors: Vec<f64> = log
        .in_phase(Phase::Following)
        .map(|r| path_distance(&cfg.track, r.drone.position.xy()))
        .collect();
    let mean_path_error = if errors.is_empty() {
        0.0
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    let max_path_error = errors.iter().copied().fold(0.0, f64::max);
    let last = log.rows.last();
    let outcome = match last.map(|r| r.phase) {
        Some(Phase::Done) => Outcome::Done,
        Some(Phase::Failed) => Outcome::Failed,
        _ => Outcome::Timeout,
    };
    let mission_time = match outcome {
        Outcome::Timeout => cfg.max_time,
        _ => last.map_or(0.0, |r| r.t),
    };
    let landing_offset = last.map_or(f64::NAN, |r| {
        (r.drone.position.xy() - cfg.track.marker_center).norm()
    });
    RunMetrics {
        mission_time,
        mean_path_error,
        max_path_error,
        landing_offset,
        outcome,
    }
}

fn dump_frame(
    dir: &Path,
    index: usize,
    frame: &PixelFrame,
    trace: &IpsTrace,
    cfg: &IpsConfig,
) -> Result<(), Error> {
    let open = |suffix: &str| -> io::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(
            dir.join(format!("frame_{index:05}_{suffix}")),
        )?))
    };
    write_ppm(open("rgb.ppm")?, frame)?;
    write_pgm_gray(open("gray.pgm")?, &trace.gray)?;
    write_pgm_binary(open("binary.pgm")?, &trace.binary)?;
    write_pgm_binary(open("eroded.pgm")?, &trace.eroded)?;

    // Overlay: eroded path white, arc mask blue, masked path green, VTP red.
    let com = cfg.com();
    let mut overlay = PixelFrame::filled(frame.width(), frame.height(), [0, 0, 0])?;
    for row in 0..frame.height() {
        for col in 0..frame.width() {
            let px = if trace.masked.get(row, col) {
                [0, 220, 0]
            } else if trace.eroded.get(row, col) {
                [255, 255, 255]
            } else if ips::arc_mask_contains(row, col, com, trace.mask_theta, cfg) {
                [0, 0, 140]
            } else {
                continue;
            };
            overlay.set(row, col, px);
        }
    }
    let out = trace.output;
    if out.flag_vtp || out.flag_marker {
        let r = (com.x_com + out.e_x).round();
        let c = (com.y_com + out.e_y).round();
        if r >= 0.0 && c >= 0.0 && (r as usize) < frame.height() && (c as usize) < frame.width() {
            overlay.set(r as usize, c as usize, [255, 0, 0]);
        }
    }
    write_ppm(open("mask.ppm")?, &overlay)?;
    Ok(())
}

/// One entry of an alpha sweep.
#[derive(Debug)]
pub struct SweepEntry {
    pub alpha: f64,
    pub result: Result<RunMetrics, Error>,
}

/// Runs one simulation per alpha, in order. Per-run failures are recorded in
/// the entry and do not stop the sweep.
pub fn sweep_alpha(cfg: &SimConfig, alphas: &[f64]) -> Result<Vec<SweepEntry>, ConfigError> {
    sweep_alpha_jobs(cfg, alphas, 1)
}

/// [`sweep_alpha`] on up to `jobs` worker threads. Results keep the input
/// order.
pub fn sweep_alpha_jobs(
    cfg: &SimConfig,
    alphas: &[f64],
    jobs: usize,
) -> Result<Vec<SweepEntry>, ConfigError> {
    if alphas.is_empty() {
        return Err(ConfigError::invalid(
            "alphas",
            "sweep needs at least one value",
        ));
    }
    let one = |alpha: f64| {
        let mut c = cfg.clone();
        c.planner.alpha = alpha;
        SweepEntry {
            alpha,
            result: run(&c).map(|(_, m)| m),
        }
    };
    if jobs <= 1 {
        return Ok(alphas.iter().map(|&a| one(a)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ConfigError::invalid("jobs", e.to_string()))?;
    Ok(pool.install(|| alphas.par_iter().map(|&a| one(a)).collect()))
}
