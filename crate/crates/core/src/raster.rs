//! Core image representation and bit-exact PGM (P5) file I/O.
//!
//! Rasters are row-major, 8-bit, origin at the top-left. The on-disk
//! format is binary PGM with maxval 255; the writer emits a canonical
//! header (`P5\n{w} {h}\n255\n`) so saved files are byte-stable.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn min_max(&self) -> (u8, u8) {
        let mut lo = u8::MAX;
        let mut hi = u8::MIN;
        for &p in &self.pixels {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        (lo, hi)
    }

    /// Mirror-pads by `margin` on every side. The border reflects about the
    /// edge pixel without duplicating it: the pixel at offset −k equals the
    /// pixel at offset +k.
    pub fn pad_reflect(&self, margin: usize) -> Result<GrayRaster> {
        let pixels = pad_reflect_buf(&self.pixels, self.width, self.height, margin)?;
        GrayRaster::new(self.width + 2 * margin, self.height + 2 * margin, pixels)
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<GrayRaster> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            pixels
                .extend_from_slice(&self.pixels[y * self.width + x0..y * self.width + x0 + width]);
        }
        GrayRaster::new(width, height, pixels)
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayRaster> {
        load_pgm(path)
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        save_pgm(self, path)
    }
}

/// Per-pixel vessel/background labels; every value is 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

pub const MASK_FOREGROUND: u8 = 255;
pub const MASK_BACKGROUND: u8 = 0;

impl BinaryMask {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|&&p| p != 0 && p != 255) {
            return Err(Error::InvalidRaster(format!(
                "mask value {bad} is neither 0 nor 255"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_predicate(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(if f(x, y) {
                    MASK_FOREGROUND
                } else {
                    MASK_BACKGROUND
                });
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == MASK_FOREGROUND
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels
            .iter()
            .filter(|&&p| p == MASK_FOREGROUND)
            .count()
    }

    pub fn pad_reflect(&self, margin: usize) -> Result<BinaryMask> {
        let pixels = pad_reflect_buf(&self.pixels, self.width, self.height, margin)?;
        BinaryMask::new(self.width + 2 * margin, self.height + 2 * margin, pixels)
    }

    /// Reads a PGM and validates that every pixel is 0 or 255.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
        let raster = load_pgm(path)?;
        BinaryMask::new(raster.width, raster.height, raster.pixels)
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let raster = GrayRaster::new(self.width, self.height, self.pixels.clone())?;
        save_pgm(&raster, path)
    }
}

/// Mirror index for coordinate `i` (which may be out of range by at most
/// `size - 1` on either side) into `0..size`.
#[inline]
fn reflect_index(i: isize, size: usize) -> usize {
    let size = size as isize;
    let r = if i < 0 {
        -i
    } else if i >= size {
        2 * (size - 1) - i
    } else {
        i
    };
    debug_assert!(r >= 0 && r < size);
    r as usize
}

fn pad_reflect_buf(pixels: &[u8], width: usize, height: usize, margin: usize) -> Result<Vec<u8>> {
    if margin == 0 {
        return Ok(pixels.to_vec());
    }
    // Mirroring without edge duplication needs `margin` distinct pixels
    // beyond the edge, so the image must extend at least that far.
    if margin > width.saturating_sub(1) || margin > height.saturating_sub(1) {
        return Err(Error::MarginTooLarge {
            margin,
            width,
            height,
        });
    }
    let out_w = width + 2 * margin;
    let out_h = height + 2 * margin;
    let m = margin as isize;
    let mut out = vec![0u8; out_w * out_h];
    for oy in 0..out_h {
        let sy = reflect_index(oy as isize - m, height);
        let src_row = &pixels[sy * width..(sy + 1) * width];
        let dst_row = &mut out[oy * out_w..(oy + 1) * out_w];
        for (ox, dst) in dst_row.iter_mut().enumerate() {
            let sx = reflect_index(ox as isize - m, width);
            *dst = src_row[sx];
        }
    }
    Ok(out)
}

/// Reads a binary PGM (magic `P5`, maxval 255).
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Parses PGM bytes. Accepts standard PNM whitespace and `#` comments in
/// the header.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayRaster> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        let magic = bytes
            .get(0..2)
            .map(|m| String::from_utf8_lossy(m).into_owned())
            .unwrap_or_default();
        return Err(Error::MalformedHeader(format!(
            "expected magic \"P5\", found {magic:?}"
        )));
    }
    let mut pos = 2;
    let width = read_header_number(bytes, &mut pos)? as usize;
    let height = read_header_number(bytes, &mut pos)? as usize;
    let maxval = read_header_number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::MalformedHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    GrayRaster::new(width, height, payload[..expected].to_vec())
}

fn read_header_number(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    // Skip whitespace and comment lines.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::MalformedHeader("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while let Some(b) = bytes.get(*pos) {
        if b.is_ascii_digit() {
            *pos += 1;
        } else {
            break;
        }
    }
    if *pos == start {
        return Err(Error::MalformedHeader(format!(
            "expected a number at byte {start}"
        )));
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).expect("digits are ascii");
    text.parse::<u32>()
        .map_err(|_| Error::MalformedHeader(format!("number {text} out of range")))
}

/// Writes a binary PGM with the canonical single-whitespace header; a
/// saved raster reloads byte-for-byte identical.
pub fn save_pgm(raster: &GrayRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(raster)).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(raster: &GrayRaster) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", raster.width(), raster.height());
    let mut bytes = Vec::with_capacity(header.len() + raster.pixels().len());
    bytes.extend_from_slice(header.as_bytes());
    bytes.extend_from_slice(raster.pixels());
    bytes
}
