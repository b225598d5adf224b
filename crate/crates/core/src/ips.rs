//! Image processing: extracts the red path from a camera frame, picks the
//! virtual target point (VTP) on an annular arc mask around the frame
//! centre, and falls back to the end-marker when no VTP is visible.

use std::f64::consts::PI;

use crate::error::ConfigError;
use crate::imaging::{binarize, channel_conv, erode, BinaryFrame, GrayFrame, Kernel, PixelFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct IpsConfig {
    /// Expected frame width in pixels.
    pub width: usize,
    /// Expected frame height in pixels.
    pub height: usize,
    /// Green divisor of the intensity conversion.
    pub gg: f64,
    /// Blue divisor of the intensity conversion.
    pub gb: f64,
    /// Binarization threshold.
    pub k_t: f64,
    /// Inner ring radius, pixels.
    pub r_min: f64,
    /// Outer ring radius, pixels.
    pub r_max: f64,
    /// Total angular window around the previous VTP direction, radians.
    pub fov: f64,
    pub path_kernel: Kernel,
    pub marker_kernel: Kernel,
}

impl Default for IpsConfig {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            gg: 2.0,
            gb: 2.0,
            k_t: 150.0,
            r_min: 26.0,
            r_max: 28.0,
            fov: 2.3,
            path_kernel: Kernel::Square { side: 3 },
            marker_kernel: Kernel::Disk { radius: 4 },
        }
    }
}

impl IpsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::invalid(
                "ips.width/height",
                "must be at least 1",
            ));
        }
        if self.gg.is_nan() || self.gg < 1.0 {
            return Err(ConfigError::invalid("ips.gg", "must be >= 1"));
        }
        if self.gb.is_nan() || self.gb < 1.0 {
            return Err(ConfigError::invalid("ips.gb", "must be >= 1"));
        }
        if !self.k_t.is_finite() {
            return Err(ConfigError::invalid("ips.k_t", "must be finite"));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(ConfigError::invalid(
                "ips.r_min/r_max",
                "need 0 < r_min < r_max",
            ));
        }
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI) {
            return Err(ConfigError::invalid("ips.fov", "need 0 < fov <= 2π"));
        }
        self.path_kernel.validate()?;
        self.marker_kernel.validate()
    }

    pub fn com(&self) -> FrameCoM {
        FrameCoM::for_frame(self.width, self.height)
    }
}

/// Reference point of the frame: `(H/2, W/2)` in `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameCoM {
    pub x_com: f64,
    pub y_com: f64,
}

impl FrameCoM {
    pub fn for_frame(width: usize, height: usize) -> Self {
        Self {
            x_com: height as f64 / 2.0,
            y_com: width as f64 / 2.0,
        }
    }
}

/// Orientation of the last accepted VTP; `None` until the first detection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VtpTrackerState {
    pub prev_theta: Option<f64>,
}

impl VtpTrackerState {
    pub fn reset(&mut self) {
        self.prev_theta = None;
    }
}

/// Result of processing one frame. Errors are in pixels, row then column,
/// relative to the frame centre.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IpsOutput {
    pub e_x: f64,
    pub e_y: f64,
    pub flag_vtp: bool,
    pub flag_marker: bool,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vtp {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Shortest angular distance between two directions.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Angle of `(row, col)` seen from the frame centre, measured as
/// `atan2(Δcol, Δrow)`.
pub fn bearing(row: f64, col: f64, com: FrameCoM) -> f64 {
    wrap_angle((col - com.y_com).atan2(row - com.x_com))
}

pub fn arc_mask_contains(
    row: usize,
    col: usize,
    com: FrameCoM,
    prev_theta: Option<f64>,
    cfg: &IpsConfig,
) -> bool {
    let (dr, dc) = (row as f64 - com.x_com, col as f64 - com.y_com);
    let dist = dr.hypot(dc);
    if dist < cfg.r_min || dist > cfg.r_max {
        return false;
    }
    match prev_theta {
        None => true,
        Some(theta) => {
            angular_distance(bearing(row as f64, col as f64, com), theta) <= cfg.fov / 2.0
        }
    }
}

/// Path pixels inside the arc mask. Only the ring's bounding box is scanned.
fn masked_pixels<'a>(
    frame: &'a BinaryFrame,
    com: FrameCoM,
    prev_theta: Option<f64>,
    cfg: &'a IpsConfig,
) -> impl Iterator<Item = (usize, usize)> + 'a {
    let clip = |c: f64, n: usize| (c.max(0.0) as usize).min(n);
    let r0 = clip((com.x_com - cfg.r_max).floor(), frame.height());
    let r1 = clip((com.x_com + cfg.r_max).ceil() + 1.0, frame.height());
    let c0 = clip((com.y_com - cfg.r_max).floor(), frame.width());
    let c1 = clip((com.y_com + cfg.r_max).ceil() + 1.0, frame.width());
    (r0..r1)
        .flat_map(move |r| (c0..c1).map(move |c| (r, c)))
        .filter(move |&(r, c)| frame.get(r, c) && arc_mask_contains(r, c, com, prev_theta, cfg))
}

pub fn detect_track(
    path_frame: &BinaryFrame,
    com: FrameCoM,
    state: &VtpTrackerState,
    cfg: &IpsConfig,
) -> bool {
    masked_pixels(path_frame, com, state.prev_theta, cfg)
        .next()
        .is_some()
}

fn centroid(pixels: impl Iterator<Item = (usize, usize)>) -> Option<(f64, f64)> {
    let (mut sr, mut sc, mut n) = (0usize, 0usize, 0usize);
    for (r, c) in pixels {
        sr += r;
        sc += c;
        n += 1;
    }
    (n > 0).then(|| (sr as f64 / n as f64, sc as f64 / n as f64))
}

/// Centroid of the masked path pixels. Updates the tracker orientation on
/// success; returns `None` when the mask holds no path pixel.
pub fn vtp(
    path_frame: &BinaryFrame,
    com: FrameCoM,
    state: &mut VtpTrackerState,
    cfg: &IpsConfig,
) -> Option<Vtp> {
    let (x, y) = centroid(masked_pixels(path_frame, com, state.prev_theta, cfg))?;
    let theta = bearing(x, y, com);
    state.prev_theta = Some(theta);
    Some(Vtp { x, y, theta })
}

/// True when something survives the marker erosion. Stripes thinner than
/// the marker kernel disappear; the filled marker does not.
pub fn detect_marker(path_frame: &BinaryFrame, cfg: &IpsConfig) -> bool {
    !erode(path_frame, cfg.marker_kernel).is_empty()
}

pub fn cg_marker(path_frame: &BinaryFrame, cfg: &IpsConfig) -> Option<(f64, f64)> {
    centroid(erode(path_frame, cfg.marker_kernel).ones())
}

/// Intermediate stages of one [`process_frame`] call, for debug dumps.
#[derive(Debug, Clone)]
pub struct IpsTrace {
    pub gray: GrayFrame,
    pub binary: BinaryFrame,
    pub eroded: BinaryFrame,
    /// Path pixels that fed the VTP centroid.
    pub masked: BinaryFrame,
    /// Orientation used for the arc mask on this frame.
    pub mask_theta: Option<f64>,
    pub output: IpsOutput,
}

pub fn process_frame(
    frame: &PixelFrame,
    state: &mut VtpTrackerState,
    cfg: &IpsConfig,
) -> Result<IpsOutput, ConfigError> {
    let (_, _, eroded) = stages(frame, cfg)?;
    Ok(select(&eroded, state, cfg))
}

pub fn process_frame_traced(
    frame: &PixelFrame,
    state: &mut VtpTrackerState,
    cfg: &IpsConfig,
) -> Result<IpsTrace, ConfigError> {
    let (gray, binary, eroded) = stages(frame, cfg)?;
    let com = cfg.com();
    let mask_theta = state.prev_theta;
    let mut masked = BinaryFrame::zeros(eroded.width(), eroded.height())?;
    for (r, c) in masked_pixels(&eroded, com, mask_theta, cfg) {
        masked.set(r, c, true);
    }
    let output = select(&eroded, state, cfg);
    Ok(IpsTrace {
        gray,
        binary,
        eroded,
        masked,
        mask_theta,
        output,
    })
}

fn check_frame(frame: &PixelFrame, cfg: &IpsConfig) -> Result<(), ConfigError> {
    if frame.width() != cfg.width || frame.height() != cfg.height {
        return Err(ConfigError::DimensionMismatch {
            got_w: frame.width(),
            got_h: frame.height(),
            want_w: cfg.width,
            want_h: cfg.height,
        });
    }
    Ok(())
}

/// Conversion, thresholding and path erosion.
fn stages(
    frame: &PixelFrame,
    cfg: &IpsConfig,
) -> Result<(GrayFrame, BinaryFrame, BinaryFrame), ConfigError> {
    check_frame(frame, cfg)?;
    let gray = channel_conv(frame, cfg.gg, cfg.gb);
    let binary = binarize(&gray, cfg.k_t);
    let eroded = erode(&binary, cfg.path_kernel);
    Ok((gray, binary, eroded))
}

/// VTP branch first, marker branch only when no VTP is visible.
fn select(eroded: &BinaryFrame, state: &mut VtpTrackerState, cfg: &IpsConfig) -> IpsOutput {
    let com = cfg.com();
    if let Some(v) = vtp(eroded, com, state, cfg) {
        return IpsOutput {
            e_x: v.x - com.x_com,
            e_y: v.y - com.y_com,
            flag_vtp: true,
            flag_marker: false,
            theta: Some(v.theta),
        };
    }
    match cg_marker(eroded, cfg) {
        Some((x, y)) => IpsOutput {
            e_x: x - com.x_com,
            e_y: y - com.y_com,
            flag_vtp: false,
            flag_marker: true,
            theta: None,
        },
        None => IpsOutput::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RED: [u8; 3] = [255, 0, 0];
    const GREEN: [u8; 3] = [30, 140, 40];

    fn cfg() -> IpsConfig {
        IpsConfig::default()
    }

    fn blank() -> BinaryFrame {
        BinaryFrame::zeros(160, 120).unwrap()
    }

    fn oracle_centroid(
        frame: &BinaryFrame,
        prev: Option<f64>,
        cfg: &IpsConfig,
    ) -> Option<(f64, f64)> {
        let com = cfg.com();
        let (mut sr, mut sc, mut n) = (0usize, 0usize, 0usize);
        for r in 0..frame.height() {
            for c in 0..frame.width() {
                if !frame.get(r, c) {
                    continue;
                }
                let (dr, dc) = (r as f64 - com.x_com, c as f64 - com.y_com);
                let d = (dr * dr + dc * dc).sqrt();
                if d < cfg.r_min || d > cfg.r_max {
                    continue;
                }
                if let Some(t) = prev {
                    let mut diff = dc.atan2(dr) - t;
                    while diff > PI {
                        diff -= 2.0 * PI;
                    }
                    while diff < -PI {
                        diff += 2.0 * PI;
                    }
                    if diff.abs() > cfg.fov / 2.0 {
                        continue;
                    }
                }
                sr += r;
                sc += c;
                n += 1;
            }
        }
        (n > 0).then(|| (sr as f64 / n as f64, sc as f64 / n as f64))
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((angular_distance(3.0, -3.0) - (2.0 * PI - 6.0)).abs() < 1e-12);
    }

    #[test]
    fn arc_mask_examples() {
        let c = cfg();
        let com = c.com();
        // 27 px straight up, prev_theta pointing up.
        assert!(arc_mask_contains(33, 80, com, Some(PI), &c));
        assert!(!arc_mask_contains(30, 80, com, Some(PI), &c));
        // 27 px at 1.2 rad from prev_theta = 0 (down the image).
        let (r, cc) = (60.0 + 27.0 * 1.2f64.cos(), 80.0 + 27.0 * 1.2f64.sin());
        let (r, cc) = (r.round() as usize, cc.round() as usize);
        let d = ((r as f64 - 60.0).powi(2) + (cc as f64 - 80.0).powi(2)).sqrt();
        assert!((26.0..=28.0).contains(&d));
        assert!(!arc_mask_contains(r, cc, com, Some(0.0), &c));
        assert!(arc_mask_contains(r, cc, com, None, &c));
    }

    #[test]
    fn detect_track_examples() {
        let c = cfg();
        let com = c.com();
        let st = VtpTrackerState::default();
        let stripe = BinaryFrame::from_fn(160, 120, |_, col| (78..=82).contains(&col)).unwrap();
        assert!(detect_track(&stripe, com, &st, &c));
        assert!(!detect_track(&blank(), com, &st, &c));
        let inner = BinaryFrame::from_fn(160, 120, |r, col| {
            (r as f64 - 60.0).hypot(col as f64 - 80.0) <= 20.0
        })
        .unwrap();
        assert!(!detect_track(&inner, com, &st, &c));
    }

    #[test]
    fn vtp_single_pixel() {
        let c = cfg();
        let mut f = blank();
        f.set(33, 80, true);
        let mut st = VtpTrackerState::default();
        let v = vtp(&f, c.com(), &mut st, &c).unwrap();
        assert_eq!((v.x, v.y), (33.0, 80.0));
        assert_eq!(v.theta, PI);
        assert_eq!(st.prev_theta, Some(PI));
    }

    #[test]
    fn vtp_stripe_above_com() {
        let c = cfg();
        // Columns 79-81, upper half only.
        let f =
            BinaryFrame::from_fn(160, 120, |r, col| r < 60 && (79..=81).contains(&col)).unwrap();
        let mut st = VtpTrackerState {
            prev_theta: Some(PI),
        };
        let v = vtp(&f, c.com(), &mut st, &c).unwrap();
        let (ox, oy) = oracle_centroid(&f, Some(PI), &c).unwrap();
        assert_eq!((v.x, v.y), (ox, oy));
        // Seven ring pixels: rows 32..=34 in col 80, rows 33..=34 in cols 79 and 81.
        assert_eq!(ox, 233.0 / 7.0);
        assert_eq!(oy, 80.0);
        assert!((v.x - 60.0 + 27.0).abs() < 1.0);
    }

    #[test]
    fn vtp_fork_resolves_to_centroid() {
        let c = cfg();
        let prev = 0.3;
        let mut f = blank();
        for da in [-0.5f64, 0.5] {
            let a = prev + da;
            let (r, col) = (60.0 + 27.0 * a.cos(), 80.0 + 27.0 * a.sin());
            f.set(r.round() as usize, col.round() as usize, true);
        }
        // Build the mirror pair exactly: reflect the first pixel across prev.
        let mut st = VtpTrackerState {
            prev_theta: Some(prev),
        };
        let v = vtp(&f, c.com(), &mut st, &c).unwrap();
        let (ox, oy) = oracle_centroid(&f, Some(prev), &c).unwrap();
        assert_eq!((v.x, v.y), (ox, oy));
        assert!(angular_distance(v.theta, prev) < 0.05);

        // Exactly symmetric blobs about the row axis (prev = 0).
        let mut f = blank();
        f.set(83, 66, true);
        f.set(83, 94, true);
        let mut st = VtpTrackerState {
            prev_theta: Some(0.0),
        };
        let v = vtp(&f, c.com(), &mut st, &c).unwrap();
        assert_eq!((v.x, v.y), (83.0, 80.0));
        assert_eq!(v.theta, 0.0);
    }

    fn disk(center: (f64, f64), radius: f64) -> BinaryFrame {
        BinaryFrame::from_fn(160, 120, |r, col| {
            (r as f64 - center.0).hypot(col as f64 - center.1) <= radius
        })
        .unwrap()
    }

    #[test]
    fn marker_detection() {
        let c = IpsConfig {
            marker_kernel: Kernel::Disk { radius: 3 },
            ..cfg()
        };
        assert!(detect_marker(&disk((60.0, 80.0), 6.0), &c));
        let stripe = BinaryFrame::from_fn(160, 120, |_, col| (78..=82).contains(&col)).unwrap();
        assert!(!detect_marker(&stripe, &c));
        assert!(!detect_marker(&blank(), &c));
    }

    #[test]
    fn marker_centroid() {
        let c = cfg();
        assert_eq!(cg_marker(&disk((60.0, 80.0), 8.0), &c), Some((60.0, 80.0)));
        assert_eq!(
            cg_marker(&disk((40.0, 100.0), 8.0), &c),
            Some((40.0, 100.0))
        );
        assert_eq!(cg_marker(&blank(), &c), None);

        // Clipped by the left edge: the survivors stay strictly inside.
        let clipped = disk((60.0, 2.0), 12.0);
        let core = erode(&clipped, c.marker_kernel);
        let n = core.count_ones() as f64;
        let oc = core.ones().map(|(_, col)| col as f64).sum::<f64>() / n;
        let (x, y) = cg_marker(&clipped, &c).unwrap();
        assert_eq!(x, 60.0);
        assert_eq!(y, oc);
        assert!(y > 2.0);
    }

    fn frame_with(mut paint: impl FnMut(usize, usize) -> bool) -> PixelFrame {
        let mut f = PixelFrame::filled(160, 120, GREEN).unwrap();
        for r in 0..120 {
            for col in 0..160 {
                if paint(r, col) {
                    f.set(r, col, RED);
                }
            }
        }
        f
    }

    #[test]
    fn process_frame_stripe() {
        let c = cfg();
        let f = frame_with(|r, col| r <= 60 && (78..=82).contains(&col));
        let mut st = VtpTrackerState::default();
        let out = process_frame(&f, &mut st, &c).unwrap();
        assert!(out.flag_vtp && !out.flag_marker);
        // Eroded stripe keeps columns 79..=81; full ring on the first frame.
        let eroded = BinaryFrame::from_fn(160, 120, |r, col| {
            (1..=59).contains(&r) && (79..=81).contains(&col)
        })
        .unwrap();
        let (ox, oy) = oracle_centroid(&eroded, None, &c).unwrap();
        assert_eq!((out.e_x, out.e_y), (ox - 60.0, oy - 80.0));
        assert!((out.e_x + 27.0).abs() < 1.0);
        assert_eq!(out.e_y, 0.0);
    }

    #[test]
    fn process_frame_marker_only() {
        let c = cfg();
        let f = frame_with(|r, col| (r as f64 - 60.0).hypot(col as f64 - 80.0) <= 10.0);
        let out = process_frame(&f, &mut VtpTrackerState::default(), &c).unwrap();
        assert!(!out.flag_vtp && out.flag_marker);
        assert_eq!((out.e_x, out.e_y), (0.0, 0.0));
    }

    #[test]
    fn process_frame_background_only() {
        let c = cfg();
        let f = PixelFrame::filled(160, 120, GREEN).unwrap();
        let mut st = VtpTrackerState {
            prev_theta: Some(1.0),
        };
        let out = process_frame(&f, &mut st, &c).unwrap();
        assert_eq!(out, IpsOutput::default());
        assert_eq!(st.prev_theta, Some(1.0));
    }

    #[test]
    fn process_frame_rejects_wrong_size() {
        let f = PixelFrame::filled(80, 60, GREEN).unwrap();
        let err = process_frame(&f, &mut VtpTrackerState::default(), &cfg()).unwrap_err();
        assert!(matches!(err, ConfigError::DimensionMismatch { .. }));
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(IpsConfig { gg: 0.5, ..cfg() }.validate().is_err());
        assert!(IpsConfig {
            r_min: 30.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(IpsConfig { fov: 7.0, ..cfg() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn flags_exclusive_and_ring_respected(
            angle in -PI..PI,
            width in 3usize..9,
            prev in proptest::option::of(-PI..PI),
            disk_r in proptest::option::of(6.0f64..14.0),
        ) {
            let c = cfg();
            let (dr, dc) = (angle.cos(), angle.sin());
            let f = frame_with(|r, col| {
                let (pr, pc) = (r as f64 - 60.0, col as f64 - 80.0);
                let along = pr * dr + pc * dc;
                let across = (-pr * dc + pc * dr).abs();
                let on_stripe = along >= 0.0 && across <= width as f64 / 2.0;
                let on_disk = disk_r.is_some_and(|rad| (pr - 40.0 * dr).hypot(pc - 40.0 * dc) <= rad);
                on_stripe || on_disk
            });
            let mut st = VtpTrackerState { prev_theta: prev };
            let out = process_frame(&f, &mut st, &c).unwrap();
            prop_assert!(!(out.flag_vtp && out.flag_marker));
            if out.flag_vtp {
                let m = out.e_x.hypot(out.e_y);
                prop_assert!(m >= c.r_min - 1.0 && m <= c.r_max + 1.0, "|e| = {}", m);
            }
        }

        #[test]
        fn contributing_pixels_respect_fov(angle in -PI..PI, prev in -PI..PI) {
            let c = cfg();
            let f = frame_with(|r, col| {
                let (pr, pc) = (r as f64 - 60.0, col as f64 - 80.0);
                (-pr * angle.sin() + pc * angle.cos()).abs() <= 3.0
            });
            let mut st = VtpTrackerState { prev_theta: Some(prev) };
            let trace = process_frame_traced(&f, &mut st, &c).unwrap();
            for (r, col) in trace.masked.ones() {
                let b = bearing(r as f64, col as f64, c.com());
                prop_assert!(angular_distance(b, prev) <= c.fov / 2.0);
            }
            prop_assert_eq!(trace.output.flag_vtp, !trace.masked.is_empty());
        }

        #[test]
        fn background_invariance(
            bg1 in any::<[u8; 3]>(),
            bg2 in any::<[u8; 3]>(),
            angle in -PI..PI,
        ) {
            let c = cfg();
            let resp = |p: [u8; 3]| f64::from(p[0]) - f64::from(p[1]) / 2.0 - f64::from(p[2]) / 2.0;
            prop_assume!(resp(bg1) < c.k_t && resp(bg2) < c.k_t);
            let paint = |bg: [u8; 3]| {
                let mut f = PixelFrame::filled(160, 120, bg).unwrap();
                for r in 0..120 {
                    for col in 0..160 {
                        let (pr, pc) = (r as f64 - 60.0, col as f64 - 80.0);
                        if (-pr * angle.sin() + pc * angle.cos()).abs() <= 3.0 {
                            f.set(r, col, RED);
                        }
                    }
                }
                f
            };
            let a = process_frame(&paint(bg1), &mut VtpTrackerState::default(), &c).unwrap();
            let b = process_frame(&paint(bg2), &mut VtpTrackerState::default(), &c).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
