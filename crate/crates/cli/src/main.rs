use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use vtp_core::sim::{self, Outcome, RunOptions, SimConfig, TrajectoryLog};
use vtp_core::world::{self, Point, TrackSpec};
use vtp_core::{imaging, Error};

const EXIT_OK: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_MISSION_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_CONFIG: u8 = 65;
const EXIT_FILE: u8 = 66;

const DEFAULT_OUT: &str = "vtp-out";

#[derive(Parser)]
#[command(name = "vtp", version, about = "Vision-based path following simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one mission and write the trajectory log and metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also dump every camera frame and processing stage as PPM/PGM.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Fly one mission per following gain and tabulate the metrics.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated following gains (m/px).
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        alpha: Vec<f64>,
        /// Missions flown in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render the camera frame seen from one pose.
    Render {
        #[arg(long)]
        track: PathBuf,
        /// Drone pose `x,y,z` in metres.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        at: Vec<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output image (binary PPM).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a track file.
    Check {
        #[arg(long)]
        track: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    track: PathBuf,
    /// Configuration override, e.g. `planner.alpha=6e-5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: $VTP_OUT or ./vtp-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn file(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_FILE,
            message: format!("{}: {err}", path.display()),
        }
    }

    fn config(err: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: err.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Io(e) => Failure {
                code: EXIT_FILE,
                message: e.to_string(),
            },
            other => Failure::config(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let result = match cli.command {
        Command::Run {
            common,
            dump_frames,
        } => cmd_run(&common, dump_frames),
        Command::Sweep {
            common,
            alpha,
            jobs,
        } => cmd_sweep(&common, &alpha, jobs),
        Command::Render {
            track,
            at,
            overrides,
            out,
        } => cmd_render(&track, &at, &overrides, out),
        Command::Check { track } => cmd_check(&track),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("VTP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn read_track(path: &Path) -> Result<TrackSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::file(path, e))?;
    world::parse_track(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn load_config(track: &Path, overrides: &[String]) -> Result<SimConfig, Failure> {
    let mut cfg = SimConfig::new(read_track(track)?);
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("override `{ov}` is not KEY=VALUE")))?;
        cfg.set(key.trim(), value).map_err(Failure::config)?;
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::file(path, e))
}

fn cmd_run(common: &Common, dump_frames: bool) -> Result<u8, Failure> {
    let cfg = load_config(&common.track, &common.overrides)?;
    let dir = out_dir(&common.out);
    fs::create_dir_all(&dir).map_err(|e| Failure::file(&dir, e))?;
    let opts = RunOptions {
        dump_dir: dump_frames.then(|| dir.join("frames")),
    };
    let (log, metrics) = sim::run_with(&cfg, &opts)?;

    let log_path = dir.join("log.csv");
    write_log(&log_path, &log, &metrics.key_values())?;

    let summary_path = dir.join("metrics.json");
    let json = serde_json::to_string_pretty(&metrics).map_err(Failure::config)?;
    fs::write(&summary_path, json + "\n").map_err(|e| Failure::file(&summary_path, e))?;

    write_sidecar(&dir.join("run.meta"), "run", &common.track)?;

    for (k, v) in metrics.key_values() {
        println!("{k}={v}");
    }
    Ok(match metrics.outcome {
        Outcome::Done => EXIT_OK,
        Outcome::Failed | Outcome::Timeout => EXIT_MISSION_FAILED,
    })
}

fn write_log(path: &Path, log: &TrajectoryLog, footer: &[(&str, String)]) -> Result<(), Failure> {
    let mut w = create(path)?;
    log.write_csv(&mut w).map_err(|e| Failure::file(path, e))?;
    for (k, v) in footer {
        writeln!(w, "# {k}={v}").map_err(|e| Failure::file(path, e))?;
    }
    w.flush().map_err(|e| Failure::file(path, e))
}

/// Run metadata that must not end up in the data files.
fn write_sidecar(path: &Path, command: &str, track: &Path) -> Result<(), Failure> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let args: Vec<String> = std::env::args().collect();
    let text = format!(
        "command={command}\ntrack={}\nunix_time={secs}\nversion={}\nargv={}\n",
        track.display(),
        env!("CARGO_PKG_VERSION"),
        args.join(" ")
    );
    fs::write(path, text).map_err(|e| Failure::file(path, e))
}

fn cmd_sweep(common: &Common, alphas: &[f64], jobs: usize) -> Result<u8, Failure> {
    let cfg = load_config(&common.track, &common.overrides)?;
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Failure::config(format!("alpha {a} must be > 0")));
    }
    let dir = out_dir(&common.out);
    fs::create_dir_all(&dir).map_err(|e| Failure::file(&dir, e))?;
    let entries = sim::sweep_alpha_jobs(&cfg, alphas, jobs.max(1)).map_err(Failure::config)?;

    let path = dir.join("sweep.csv");
    let mut w = create(&path)?;
    let header = "alpha,outcome,mission_time,mean_path_error,max_path_error,landing_offset,error";
    let mut lines = vec![header.to_string()];
    let mut all_done = true;
    for e in &entries {
        let line = match &e.result {
            Ok(m) => {
                all_done &= m.outcome == Outcome::Done;
                format!(
                    "{},{:?},{},{},{},{},",
                    e.alpha,
                    m.outcome,
                    m.mission_time,
                    m.mean_path_error,
                    m.max_path_error,
                    m.landing_offset
                )
            }
            Err(err) => {
                all_done = false;
                format!(
                    "{},Error,,,,,\"{}\"",
                    e.alpha,
                    err.to_string().replace('"', "'")
                )
            }
        };
        lines.push(line);
    }
    for line in &lines {
        writeln!(w, "{line}").map_err(|e| Failure::file(&path, e))?;
        println!("{line}");
    }
    w.flush().map_err(|e| Failure::file(&path, e))?;
    write_sidecar(&dir.join("sweep.meta"), "sweep", &common.track)?;
    Ok(if all_done {
        EXIT_OK
    } else {
        EXIT_MISSION_FAILED
    })
}

fn cmd_render(
    track: &Path,
    at: &[f64],
    overrides: &[String],
    out: Option<PathBuf>,
) -> Result<u8, Failure> {
    let cfg = load_config(track, overrides)?;
    let [x, y, z] = <[f64; 3]>::try_from(at).map_err(|_| Failure {
        code: EXIT_USAGE,
        message: "--at needs x,y,z".into(),
    })?;
    if z.is_nan() || z <= 0.0 {
        return Err(Failure::config("render altitude must be > 0"));
    }
    let path = out.unwrap_or_else(|| out_dir(&None).join("frame.ppm"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::file(parent, e))?;
    }
    let frame = world::render_frame(&cfg.track, Point::new(x, y), z, &cfg.camera);
    let mut w = create(&path)?;
    imaging::write_ppm(&mut w, &frame).map_err(|e| Failure::file(&path, e))?;
    w.flush().map_err(|e| Failure::file(&path, e))?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn cmd_check(track: &Path) -> Result<u8, Failure> {
    let text = fs::read_to_string(track).map_err(|e| Failure::file(track, e))?;
    match world::parse_track(&text) {
        Ok(t) => {
            println!("{}: ok", track.display());
            println!("segments={}", t.segments.len());
            println!("length={:.4}", t.length());
            println!("path_width={}", t.path_width);
            println!("start={},{}", t.start.x, t.start.y);
            println!(
                "marker={},{} diameter={}",
                t.marker_center.x, t.marker_center.y, t.marker_diameter
            );
            Ok(EXIT_OK)
        }
        Err(e) => {
            println!("{}: invalid: {e}", track.display());
            Ok(EXIT_CHECK_FAILED)
        }
    }
}
