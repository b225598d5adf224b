use super::BinaryFrame;
use crate::error::ConfigError;

/// Structuring element for binary erosion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Odd-sided square centred on the pixel.
    Square { side: usize },
    /// All offsets `(dr, dc)` with `dr² + dc² <= radius²`.
    Disk { radius: usize },
}

impl Kernel {
    pub fn square(side: usize) -> Result<Self, ConfigError> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(ConfigError::invalid(
                "kernel",
                format!("square side {side} must be odd"),
            ));
        }
        Ok(Kernel::Square { side })
    }

    pub fn disk(radius: usize) -> Result<Self, ConfigError> {
        if radius == 0 {
            return Err(ConfigError::invalid(
                "kernel",
                "disk radius must be at least 1",
            ));
        }
        Ok(Kernel::Disk { radius })
    }

    /// Disk sized to wipe out a stripe of `path_width_px`: `ceil(w / 2) + 1`.
    pub fn marker_for_path_width(path_width_px: f64) -> Self {
        let radius = (path_width_px.max(0.0) / 2.0).ceil() as usize + 1;
        Kernel::Disk { radius }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            Kernel::Square { side } => Kernel::square(side).map(|_| ()),
            Kernel::Disk { radius } => Kernel::disk(radius).map(|_| ()),
        }
    }

    /// Every `(dr, dc)` offset of the element.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        self.spans()
            .into_iter()
            .flat_map(|(dr, half)| (-half..=half).map(move |dc| (dr, dc)))
            .collect()
    }

    /// The element as horizontal runs: `(row offset, half width)`, each run
    /// covering columns `-half..=half`.
    fn spans(&self) -> Vec<(isize, isize)> {
        match *self {
            Kernel::Square { side } => {
                let h = (side / 2) as isize;
                (-h..=h).map(|dr| (dr, h)).collect()
            }
            Kernel::Disk { radius } => {
                let r = radius as isize;
                (-r..=r)
                    .map(|dr| {
                        let mut half = 0;
                        while (half + 1) * (half + 1) + dr * dr <= r * r {
                            half += 1;
                        }
                        (dr, half)
                    })
                    .collect()
            }
        }
    }
}

/// Binary erosion. A pixel survives when every kernel offset lands on a set
/// pixel; offsets falling outside the frame count as unset.
pub fn erode(bin: &BinaryFrame, kernel: Kernel) -> BinaryFrame {
    let (w, h) = (bin.width(), bin.height());

    // run[r * w + c]: length of the run of ones starting at (r, c) going right.
    let mut run = vec![0usize; w * h];
    for r in 0..h {
        let mut len = 0;
        for c in (0..w).rev() {
            len = if bin.get(r, c) { len + 1 } else { 0 };
            run[r * w + c] = len;
        }
    }

    let spans = kernel.spans();
    let mut out = vec![false; w * h];
    for r in 0..h as isize {
        for c in 0..w as isize {
            out[r as usize * w + c as usize] = spans.iter().all(|&(dr, half)| {
                let rr = r + dr;
                let c0 = c - half;
                if rr < 0 || rr >= h as isize || c0 < 0 {
                    return false;
                }
                run[rr as usize * w + c0 as usize] >= (2 * half + 1) as usize
            });
        }
    }
    BinaryFrame::from_bits(w, h, out).expect("dimensions preserved")
}
