//! Track description, the synthetic downward camera, and the distance from
//! a ground point to the path centreline.
//!
//! Track files are line based. `#` starts a comment; each remaining line is
//! one directive with whitespace-separated arguments:
//!
//! ```text
//! width <m>
//! color <r> <g> <b>
//! background <r> <g> <b>
//! start <x> <y>
//! line <x0> <y0> <x1> <y1>
//! arc <cx> <cy> <r> <a0> <a1>
//! marker <x> <y> <diameter>
//! ```
//!
//! Arcs run from angle `a0` to `a1` (radians, either direction). Angles also
//! accept `pi` multiples such as `-pi/2`, `3*pi/4` or `2pi`, which keeps
//! arc endpoints exact enough to meet the neighbouring lines.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::error::{ConfigError, TrackError};
use crate::imaging::{PixelFrame, Rgb};

pub type Point = Vector2<f64>;

/// Largest gap tolerated between consecutive segment endpoints, metres.
pub const JOINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line {
        p0: Point,
        p1: Point,
    },
    Arc {
        center: Point,
        radius: f64,
        a0: f64,
        a1: f64,
    },
}

impl Segment {
    pub fn line(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Segment::Line {
            p0: Point::new(x0, y0),
            p1: Point::new(x1, y1),
        }
    }

    pub fn arc(cx: f64, cy: f64, radius: f64, a0: f64, a1: f64) -> Self {
        Segment::Arc {
            center: Point::new(cx, cy),
            radius,
            a0,
            a1,
        }
    }

    pub fn start(&self) -> Point {
        match *self {
            Segment::Line { p0, .. } => p0,
            Segment::Arc {
                center, radius, a0, ..
            } => center + radius * Point::new(a0.cos(), a0.sin()),
        }
    }

    pub fn end(&self) -> Point {
        match *self {
            Segment::Line { p1, .. } => p1,
            Segment::Arc {
                center, radius, a1, ..
            } => center + radius * Point::new(a1.cos(), a1.sin()),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { p0, p1 } => (p1 - p0).norm(),
            Segment::Arc { radius, a0, a1, .. } => radius * (a1 - a0).abs().min(2.0 * PI),
        }
    }

    /// Distance from `p` to the segment centreline.
    pub fn distance(&self, p: Point) -> f64 {
        match *self {
            Segment::Line { p0, p1 } => {
                let d = p1 - p0;
                let len2 = d.norm_squared();
                if len2 == 0.0 {
                    return (p - p0).norm();
                }
                let t = ((p - p0).dot(&d) / len2).clamp(0.0, 1.0);
                (p - (p0 + d * t)).norm()
            }
            Segment::Arc {
                center,
                radius,
                a0,
                a1,
            } => {
                let sweep = a1 - a0;
                let rel = p - center;
                let inside_sweep = sweep.abs() >= 2.0 * PI || {
                    let phi = rel.y.atan2(rel.x);
                    let t = ((phi - a0) * sweep.signum()).rem_euclid(2.0 * PI);
                    t <= sweep.abs()
                };
                if inside_sweep {
                    (rel.norm() - radius).abs()
                } else {
                    (p - self.start()).norm().min((p - self.end()).norm())
                }
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`; loose for arcs.
    fn bounds(&self) -> (Point, Point) {
        match *self {
            Segment::Line { p0, p1 } => (p0.inf(&p1), p0.sup(&p1)),
            Segment::Arc { center, radius, .. } => {
                let r = Point::new(radius, radius);
                (center - r, center + r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub segments: Vec<Segment>,
    /// Painted path width, metres.
    pub path_width: f64,
    pub marker_center: Point,
    pub marker_diameter: f64,
    pub path_color: Rgb,
    pub background_color: Rgb,
    /// Take-off position on the ground.
    pub start: Point,
}

pub const DEFAULT_PATH_WIDTH: f64 = 0.05;
pub const DEFAULT_PATH_COLOR: Rgb = [255, 0, 0];
pub const DEFAULT_BACKGROUND: Rgb = [40, 120, 50];

impl TrackSpec {
    /// Track with default width, colours and start (the first segment's start).
    pub fn new(
        segments: Vec<Segment>,
        marker_center: Point,
        marker_diameter: f64,
    ) -> Result<Self, TrackError> {
        let start = segments.first().map(Segment::start).unwrap_or_default();
        let track = Self {
            segments,
            path_width: DEFAULT_PATH_WIDTH,
            marker_center,
            marker_diameter,
            path_color: DEFAULT_PATH_COLOR,
            background_color: DEFAULT_BACKGROUND,
            start,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        self.validate_with_lines(None)
    }

    fn validate_with_lines(&self, lines: Option<&[usize]>) -> Result<(), TrackError> {
        if self.segments.is_empty() {
            return Err(TrackError::NoSegments);
        }
        for (i, s) in self.segments.iter().enumerate() {
            let finite = match *s {
                Segment::Line { p0, p1 } => p0.iter().chain(p1.iter()).all(|v| v.is_finite()),
                Segment::Arc {
                    center,
                    radius,
                    a0,
                    a1,
                } => {
                    center.iter().all(|v| v.is_finite())
                        && radius > 0.0
                        && radius.is_finite()
                        && a0.is_finite()
                        && a1.is_finite()
                }
            };
            if !finite {
                return Err(TrackError::Invalid(format!(
                    "segment {} is degenerate",
                    i + 1
                )));
            }
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            let gap = (pair[1].start() - pair[0].end()).norm();
            if gap > JOINT_TOLERANCE {
                return Err(TrackError::Discontinuity {
                    prev: i + 1,
                    next: i + 2,
                    line: lines.map_or(0, |l| l[i + 1]),
                    gap,
                });
            }
        }
        if !(self.path_width > 0.0 && self.path_width.is_finite()) {
            return Err(TrackError::Invalid("path width must be > 0".into()));
        }
        if !(self.marker_diameter > 0.0 && self.marker_diameter.is_finite()) {
            return Err(TrackError::Invalid("marker diameter must be > 0".into()));
        }
        let end = self.segments.last().expect("non-empty").end();
        let gap = (self.marker_center - end).norm();
        if gap.is_nan() || gap > JOINT_TOLERANCE {
            return Err(TrackError::MarkerNotAtEnd { gap });
        }
        if !self.start.iter().all(|v| v.is_finite()) {
            return Err(TrackError::Invalid("start must be finite".into()));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn marker_radius(&self) -> f64 {
        self.marker_diameter / 2.0
    }

    /// Renders the track back into the file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let [r, g, b] = self.path_color;
        let [br, bg, bb] = self.background_color;
        let _ = writeln!(s, "width {}", self.path_width);
        let _ = writeln!(s, "color {r} {g} {b}");
        let _ = writeln!(s, "background {br} {bg} {bb}");
        let _ = writeln!(s, "start {} {}", self.start.x, self.start.y);
        for seg in &self.segments {
            let _ = match *seg {
                Segment::Line { p0, p1 } => writeln!(s, "line {} {} {} {}", p0.x, p0.y, p1.x, p1.y),
                Segment::Arc {
                    center,
                    radius,
                    a0,
                    a1,
                } => {
                    writeln!(s, "arc {} {} {} {} {}", center.x, center.y, radius, a0, a1)
                }
            };
        }
        let _ = writeln!(
            s,
            "marker {} {} {}",
            self.marker_center.x, self.marker_center.y, self.marker_diameter
        );
        s
    }
}

fn syntax(line: usize, message: impl Into<String>) -> TrackError {
    TrackError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, TrackError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line, format!("expected a number, found `{tok}`")))
}

/// A decimal, or `[-][k[*]]pi[/n]`.
fn parse_angle(tok: &str, line: usize) -> Result<f64, TrackError> {
    if let Ok(v) = parse_number(tok, line) {
        return Ok(v);
    }
    let bad = || syntax(line, format!("expected an angle, found `{tok}`"));
    let (sign, rest) = match tok.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, tok.strip_prefix('+').unwrap_or(tok)),
    };
    let pos = rest.find("pi").ok_or_else(bad)?;
    let (head, tail) = (&rest[..pos], &rest[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let factor = if head.is_empty() {
        1.0
    } else {
        head.parse::<f64>().map_err(|_| bad())?
    };
    let divisor = match tail.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if tail.is_empty() => 1.0,
        None => return Err(bad()),
    };
    let v = sign * factor * PI / divisor;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_byte(tok: &str, line: usize) -> Result<u8, TrackError> {
    tok.parse::<u8>().map_err(|_| {
        syntax(
            line,
            format!("expected a colour value 0-255, found `{tok}`"),
        )
    })
}

pub fn parse_track(text: &str) -> Result<TrackSpec, TrackError> {
    let mut segments = Vec::new();
    let mut segment_lines = Vec::new();
    let mut width = DEFAULT_PATH_WIDTH;
    let mut color = DEFAULT_PATH_COLOR;
    let mut background = DEFAULT_BACKGROUND;
    let mut start = None;
    let mut marker: Option<(Point, f64)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let directive = toks.next().expect("non-empty line");
        let args: Vec<&str> = toks.collect();
        let expect = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(syntax(
                    line,
                    format!("`{directive}` takes {n} arguments, found {}", args.len()),
                ))
            }
        };
        match directive {
            "width" => {
                expect(1)?;
                width = parse_number(args[0], line)?;
                if width <= 0.0 {
                    return Err(syntax(line, "width must be > 0"));
                }
            }
            "color" | "background" => {
                expect(3)?;
                let c = [
                    parse_byte(args[0], line)?,
                    parse_byte(args[1], line)?,
                    parse_byte(args[2], line)?,
                ];
                if directive == "color" {
                    color = c;
                } else {
                    background = c;
                }
            }
            "start" => {
                expect(2)?;
                start = Some(Point::new(
                    parse_number(args[0], line)?,
                    parse_number(args[1], line)?,
                ));
            }
            "line" => {
                expect(4)?;
                let v: Vec<f64> = args
                    .iter()
                    .map(|a| parse_number(a, line))
                    .collect::<Result<_, _>>()?;
                segments.push(Segment::line(v[0], v[1], v[2], v[3]));
                segment_lines.push(line);
            }
            "arc" => {
                expect(5)?;
                let cx = parse_number(args[0], line)?;
                let cy = parse_number(args[1], line)?;
                let r = parse_number(args[2], line)?;
                if r <= 0.0 {
                    return Err(syntax(line, "arc radius must be > 0"));
                }
                let a0 = parse_angle(args[3], line)?;
                let a1 = parse_angle(args[4], line)?;
                segments.push(Segment::arc(cx, cy, r, a0, a1));
                segment_lines.push(line);
            }
            "marker" => {
                expect(3)?;
                if marker.is_some() {
                    return Err(syntax(line, "duplicate marker"));
                }
                let p = Point::new(parse_number(args[0], line)?, parse_number(args[1], line)?);
                let d = parse_number(args[2], line)?;
                if d <= 0.0 {
                    return Err(syntax(line, "marker diameter must be > 0"));
                }
                marker = Some((p, d));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    if segments.is_empty() {
        return Err(TrackError::NoSegments);
    }
    let (marker_center, marker_diameter) = marker.ok_or(TrackError::MissingMarker)?;
    let track = TrackSpec {
        start: start.unwrap_or_else(|| segments[0].start()),
        segments,
        path_width: width,
        marker_center,
        marker_diameter,
        path_color: color,
        background_color: background,
    };
    track.validate_with_lines(Some(&segment_lines))?;
    Ok(track)
}

/// Minimum distance from `p` to the union of segment centrelines.
pub fn path_distance(track: &TrackSpec, p: Point) -> f64 {
    track
        .segments
        .iter()
        .map(|s| s.distance(p))
        .fold(f64::INFINITY, f64::min)
}

/// Ground-projecting downward camera. `scale` is the pixel density on the
/// ground when flying at `reference_altitude`; lower flight magnifies.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub scale: f64,
    pub width: usize,
    pub height: usize,
    pub reference_altitude: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            scale: 100.0,
            width: 160,
            height: 120,
            reference_altitude: 1.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(ConfigError::invalid("camera.scale", "must be > 0"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::invalid(
                "camera.width/height",
                "must be at least 1",
            ));
        }
        if !(self.reference_altitude > 0.0 && self.reference_altitude.is_finite()) {
            return Err(ConfigError::invalid(
                "camera.reference_altitude",
                "must be > 0",
            ));
        }
        Ok(())
    }

    /// Pixels per metre on the ground at `altitude`.
    pub fn pixels_per_meter(&self, altitude: f64) -> f64 {
        self.scale * self.reference_altitude / altitude
    }

    /// Ground point seen by pixel `(row, col)`.
    pub fn ground_point(&self, drone_xy: Point, altitude: f64, row: usize, col: usize) -> Point {
        let s = self.pixels_per_meter(altitude);
        drone_xy
            + Point::new(
                (row as f64 - self.height as f64 / 2.0) / s,
                (col as f64 - self.width as f64 / 2.0) / s,
            )
    }
}

/// Renders what the camera sees from `drone_xy` at `altitude` (> 0).
/// Each pixel samples its ground point; no anti-aliasing.
pub fn render_frame(
    track: &TrackSpec,
    drone_xy: Point,
    altitude: f64,
    cam: &CameraModel,
) -> PixelFrame {
    assert!(
        altitude > 0.0,
        "render_frame needs a positive altitude, got {altitude}"
    );
    let s = cam.pixels_per_meter(altitude);
    let half_width = track.path_width / 2.0;
    let marker_r = track.marker_radius();

    // Segments that can touch the footprint at all.
    let (w, h) = (cam.width as f64, cam.height as f64);
    let lo = drone_xy + Point::new(-h / 2.0 / s, -w / 2.0 / s);
    let hi = drone_xy + Point::new(h / 2.0 / s, w / 2.0 / s);
    let margin = Point::new(half_width, half_width);
    let visible: Vec<&Segment> = track
        .segments
        .iter()
        .filter(|seg| {
            let (a, b) = seg.bounds();
            let (a, b) = (a - margin, b + margin);
            a.x <= hi.x && b.x >= lo.x && a.y <= hi.y && b.y >= lo.y
        })
        .collect();

    let mut frame = PixelFrame::filled(cam.width, cam.height, track.background_color)
        .expect("camera dimensions validated");
    for row in 0..cam.height {
        for col in 0..cam.width {
            let p = cam.ground_point(drone_xy, altitude, row, col);
            let on_marker = (p - track.marker_center).norm() <= marker_r;
            if on_marker || visible.iter().any(|seg| seg.distance(p) <= half_width) {
                frame.set(row, col, track.path_color);
            }
        }
    }
    frame
}
