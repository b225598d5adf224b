//! Raster frames for the three pipeline stages and the pixel-level
//! transforms between them.
//!
//! Pixels are addressed as `(row, col)` with zero-based indices; the row
//! axis points down the image and the column axis to the right.

mod morphology;
mod pnm;

pub use morphology::{erode, Kernel};
pub use pnm::{write_pgm_binary, write_pgm_gray, write_ppm};

use crate::error::ConfigError;

pub type Rgb = [u8; 3];

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), ConfigError> {
    if width == 0 || height == 0 {
        return Err(ConfigError::invalid(
            "frame",
            "width and height must be at least 1",
        ));
    }
    if width * height != len {
        return Err(ConfigError::invalid(
            "frame",
            format!("{} values for a {width}x{height} frame", len),
        ));
    }
    Ok(())
}

/// 8-bit RGB camera frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelFrame {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl PixelFrame {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, ConfigError> {
        Self::from_pixels(width, height, vec![color; width * height])
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, ConfigError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, color: Rgb) {
        self.pixels[row * self.width + col] = color;
    }

    /// Row-major pixel data.
    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }
}

/// Signed intensity frame produced by [`channel_conv`]. Values are kept
/// unclamped in `[-255, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayFrame {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ConfigError> {
        check_dims(width, height, values.len())?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Binary mask; `true` marks a path pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryFrame {
    pub fn zeros(width: usize, height: usize) -> Result<Self, ConfigError> {
        Self::from_bits(width, height, vec![false; width * height])
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ConfigError> {
        check_dims(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Builds a frame from a predicate over `(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, ConfigError> {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self::from_bits(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Iterates over the `(row, col)` coordinates of all set pixels.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / w, i % w))
    }
}

/// Red-emphasis intensity conversion: `R - G/gg - B/gb`, evaluated in real
/// arithmetic without clamping.
pub fn channel_conv(frame: &PixelFrame, gg: f64, gb: f64) -> GrayFrame {
    debug_assert!(gg >= 1.0 && gb >= 1.0);
    let values = frame
        .pixels
        .iter()
        .map(|&[r, g, b]| f64::from(r) - f64::from(g) / gg - f64::from(b) / gb)
        .collect();
    GrayFrame {
        width: frame.width,
        height: frame.height,
        values,
    }
}

/// Thresholds a gray frame. Values at or above `k_t` become path pixels.
pub fn binarize(gray: &GrayFrame, k_t: f64) -> BinaryFrame {
    BinaryFrame {
        width: gray.width,
        height: gray.height,
        bits: gray.values.iter().map(|&v| v >= k_t).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(rgb: Rgb) -> PixelFrame {
        PixelFrame::filled(1, 1, rgb).unwrap()
    }

    #[test]
    fn channel_conv_reference_pixels() {
        assert_eq!(
            channel_conv(&single([255, 0, 0]), 2.0, 2.0).get(0, 0),
            255.0
        );
        assert_eq!(
            channel_conv(&single([255, 255, 255]), 2.0, 2.0).get(0, 0),
            0.0
        );
        assert_eq!(
            channel_conv(&single([0, 255, 0]), 2.0, 2.0).get(0, 0),
            -127.5
        );
    }

    #[test]
    fn binarize_boundary_is_inclusive() {
        let g = GrayFrame::from_values(3, 1, vec![150.0, 149.5, 255.0]).unwrap();
        let b = binarize(&g, 150.0);
        assert_eq!(b.bits(), &[true, false, true]);
    }

    #[test]
    fn binarize_all_zero() {
        let g = GrayFrame::from_values(4, 3, vec![0.0; 12]).unwrap();
        assert!(binarize(&g, 150.0).is_empty());
    }

    #[test]
    fn rejects_empty_frames() {
        assert!(PixelFrame::filled(0, 3, [0, 0, 0]).is_err());
        assert!(BinaryFrame::from_bits(2, 2, vec![true; 3]).is_err());
    }

    proptest! {
        #[test]
        fn channel_conv_is_pixelwise(
            px in proptest::collection::vec(any::<[u8; 3]>(), 1..64),
            gg in 1.0f64..8.0,
            gb in 1.0f64..8.0,
        ) {
            let n = px.len();
            let frame = PixelFrame::from_pixels(n, 1, px.clone()).unwrap();
            let mut rev = px.clone();
            rev.reverse();
            let rframe = PixelFrame::from_pixels(n, 1, rev).unwrap();
            let a = channel_conv(&frame, gg, gb);
            let b = channel_conv(&rframe, gg, gb);
            for i in 0..n {
                prop_assert_eq!(a.get(0, i), b.get(0, n - 1 - i));
                let lower = -255.0 / gg - 255.0 / gb;
                prop_assert!(a.get(0, i) >= lower && a.get(0, i) <= 255.0);
            }
        }

        #[test]
        fn rebinarizing_scaled_binary_is_idempotent(
            bits in proptest::collection::vec(any::<bool>(), 1..100),
            k_t in 0.001f64..=255.0,
        ) {
            let n = bits.len();
            let bin = BinaryFrame::from_bits(n, 1, bits).unwrap();
            let scaled = GrayFrame::from_values(
                n, 1, bin.bits().iter().map(|&b| if b { 255.0 } else { 0.0 }).collect(),
            ).unwrap();
            prop_assert_eq!(binarize(&scaled, k_t), bin);
        }
    }
}
