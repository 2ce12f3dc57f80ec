//! Guidewire shadow detection and removal in polar frames.
//!
//! The guidewire blocks the beam and casts a radially uniform shadow:
//! in polar orientation, a contiguous band of near-black columns.
//! Detection finds the band of a given width with the lowest mean
//! intensity; removal deletes the band and closes the gap by shifting
//! the right side left, cross-fading a few columns on each side of the
//! seam so the splice has no hard edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayRaster;

/// A contiguous column band identified as the guidewire shadow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowBand {
    pub start_col: usize,
    pub width: usize,
    pub mean_intensity: f64,
}

/// Default detection width: 5% of the image width, rounded up.
pub fn default_band_width(image_width: usize) -> usize {
    image_width.div_ceil(20).max(1)
}

/// Finds the `band_width`-column contiguous band with minimal mean
/// intensity. Ties are broken toward the smallest start column; the
/// comparison uses exact integer column sums, so tie-breaking is not
/// subject to rounding.
pub fn detect_shadow_band(polar: &GrayRaster, band_width: usize) -> Result<ShadowBand> {
    let (w, h) = (polar.width(), polar.height());
    if band_width == 0 || band_width >= w {
        return Err(Error::BandTooWide(format!(
            "band width {band_width} invalid for image width {w}"
        )));
    }
    let mut col_sums = vec![0u64; w];
    for y in 0..h {
        for (x, s) in col_sums.iter_mut().enumerate() {
            *s += polar.get(x, y) as u64;
        }
    }
    let mut band_sum: u64 = col_sums[..band_width].iter().sum();
    let mut best_sum = band_sum;
    let mut best_start = 0usize;
    for start in 1..=w - band_width {
        band_sum = band_sum - col_sums[start - 1] + col_sums[start + band_width - 1];
        if band_sum < best_sum {
            best_sum = band_sum;
            best_start = start;
        }
    }
    Ok(ShadowBand {
        start_col: best_start,
        width: band_width,
        mean_intensity: best_sum as f64 / (band_width * h) as f64,
    })
}

/// Deletes the band's columns and closes the gap, cross-fading
/// `blend_width` columns on each side of the seam.
///
/// Within the blend region the output is a rounded convex combination
/// of the nearest surviving column on each side, with weights linear in
/// the distance from the seam; outside it pixels are copied verbatim.
/// The output is `band.width` columns narrower than the input.
pub fn remove_shadow(
    polar: &GrayRaster,
    band: &ShadowBand,
    blend_width: usize,
) -> Result<GrayRaster> {
    let (w, h) = (polar.width(), polar.height());
    if band.width == 0 || band.start_col + band.width > w || band.width >= w {
        return Err(Error::BandTooWide(format!(
            "band [{}, {}) invalid for image width {w}",
            band.start_col,
            band.start_col + band.width
        )));
    }
    let out_w = w - band.width;
    let s = band.start_col; // seam sits between output columns s−1 and s
    let mut out = Vec::with_capacity(out_w * h);
    for y in 0..h {
        for j in 0..out_w {
            let src = if j < s { j } else { j + band.width };
            out.push(polar.get(src, y));
        }
    }
    // No blending when there is nothing on one side of the seam or when
    // blending is disabled.
    if blend_width == 0 || s == 0 || s == out_w {
        return GrayRaster::new(out_w, h, out);
    }
    let lo = s.saturating_sub(blend_width);
    let hi = (s + blend_width).min(out_w);
    let span = 2.0 * blend_width as f64;
    for y in 0..h {
        for j in lo..hi {
            // Weight grows linearly with distance from the left edge of
            // the blend region, sampled at column centers.
            let alpha = (j as f64 - (s as f64 - blend_width as f64) + 0.5) / span;
            let left = polar.get(j.min(s - 1), y) as f64;
            let right = polar.get(j.max(s) + band.width, y) as f64;
            out[y * out_w + j] = ((1.0 - alpha) * left + alpha * right).round() as u8;
        }
    }
    GrayRaster::new(out_w, h, out)
}
