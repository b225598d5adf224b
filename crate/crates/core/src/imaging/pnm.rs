//! Binary PPM/PGM writers (maxval 255) for debug dumps.

use std::io::{self, Write};

use super::{BinaryFrame, GrayFrame, PixelFrame};

pub fn write_ppm<W: Write>(mut out: W, frame: &PixelFrame) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", frame.width(), frame.height())?;
    let bytes: Vec<u8> = frame.pixels().iter().flatten().copied().collect();
    out.write_all(&bytes)
}

/// Gray values are mapped linearly from `[-255, 255]` onto `[0, 255]`.
pub fn write_pgm_gray<W: Write>(mut out: W, gray: &GrayFrame) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", gray.width(), gray.height())?;
    let bytes: Vec<u8> = gray
        .values()
        .iter()
        .map(|&v| ((v.clamp(-255.0, 255.0) + 255.0) / 2.0).round() as u8)
        .collect();
    out.write_all(&bytes)
}

pub fn write_pgm_binary<W: Write>(mut out: W, bin: &BinaryFrame) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", bin.width(), bin.height())?;
    let bytes: Vec<u8> = bin
        .bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    out.write_all(&bytes)
}
