//! Noise assessment and impulse-noise suppression.
//!
//! Three measurements drive the denoising decision:
//!
//! 1. sharpness — population standard deviation of the 4-neighbor
//!    Laplacian response over interior pixels;
//! 2. impulse contamination — the salt-and-pepper ratio (SPR), the
//!    fraction of pixels at the intensity extremes;
//! 3. speckle level — mean of the per-pixel local variance map.
//!
//! Only the SPR is thresholded (strictly greater than the configured
//! limit raises the flag); the other two are reported for the caller to
//! interpret. A `k`×`k` exact median filter removes impulse noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayRaster;

/// Noise measurements for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    /// Population std of the 4-neighbor Laplacian over interior pixels.
    pub laplacian_std: f64,
    /// Fraction of pixels with intensity ≤ tau_min or ≥ tau_max.
    pub spr: f64,
    /// Mean of the local variance map (intensity² units).
    pub mean_local_variance: f64,
    /// True iff spr strictly exceeds the configured threshold.
    pub salt_pepper_flag: bool,
}

/// Thresholds and window size used by [`assess_noise`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseThresholds {
    pub tau_min: u8,
    pub tau_max: u8,
    pub spr_threshold: f64,
    /// Side of the sliding window for the local variance map.
    pub variance_window: usize,
}

impl Default for NoiseThresholds {
    fn default() -> Self {
        Self {
            tau_min: 5,
            tau_max: 250,
            spr_threshold: 0.75,
            variance_window: 11,
        }
    }
}

/// Population standard deviation of the discrete Laplacian response,
/// computed with the 4-neighbor kernel [[0,1,0],[1,−4,1],[0,1,0]] at
/// every interior pixel. Low values indicate a blurred frame.
pub fn laplacian_std(raster: &GrayRaster) -> Result<f64> {
    let (w, h) = (raster.width(), raster.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall(format!(
            "laplacian_std needs at least 3x3, got {w}x{h}"
        )));
    }
    let px = raster.pixels();
    let mut responses = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = px[y * w + x] as i32;
            let lap = px[(y - 1) * w + x] as i32
                + px[(y + 1) * w + x] as i32
                + px[y * w + x - 1] as i32
                + px[y * w + x + 1] as i32
                - 4 * c;
            responses.push(lap as f64);
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    let var = responses
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / n;
    Ok(var.sqrt())
}

/// Fraction of pixels at the intensity extremes: |{x ≤ τ_min or x ≥ τ_max}| / N.
pub fn salt_pepper_ratio(raster: &GrayRaster, tau_min: u8, tau_max: u8) -> Result<f64> {
    if tau_min >= tau_max {
        return Err(Error::InvalidThresholds(format!(
            "tau_min {tau_min} must be strictly below tau_max {tau_max}"
        )));
    }
    let extreme = raster
        .pixels()
        .iter()
        .filter(|&&p| p <= tau_min || p >= tau_max)
        .count();
    Ok(extreme as f64 / raster.pixels().len() as f64)
}

/// Per-pixel population variance over a `window`×`window` neighborhood
/// of the reflect-padded image. Returned row-major with the input's
/// dimensions.
///
/// All sums are taken over exact integer intensities, so the single
/// final division is the only rounding step — the map is bit-identical
/// to any oracle that accumulates the same window in any order.
pub fn local_variance_map(raster: &GrayRaster, window: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) || window < 3 {
        return Err(Error::InvalidWindow(window));
    }
    let margin = window / 2;
    let padded = raster.pad_reflect(margin)?;
    let (w, h) = (raster.width(), raster.height());
    let pw = padded.width();
    let ppx = padded.pixels();
    let n = (window * window) as u64;

    let mut map = vec![0.0f64; w * h];
    map.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        for (x, out) in out_row.iter_mut().enumerate() {
            let mut sum = 0u64;
            let mut sumsq = 0u64;
            for wy in 0..window {
                let base = (y + wy) * pw + x;
                for wx in 0..window {
                    let v = ppx[base + wx] as u64;
                    sum += v;
                    sumsq += v * v;
                }
            }
            // Population variance as an exact integer ratio:
            // (n·Σx² − (Σx)²) / n².
            let num = (n * sumsq - sum * sum) as f64;
            *out = num / ((n * n) as f64);
        }
    });
    Ok(map)
}

/// Exact `k`×`k` median filter over the reflect-padded image. Each
/// output pixel is the unique middle order statistic of its window.
pub fn median_filter(raster: &GrayRaster, k: usize) -> Result<GrayRaster> {
    if k.is_multiple_of(2) || k < 3 {
        return Err(Error::InvalidWindow(k));
    }
    let margin = k / 2;
    let padded = raster.pad_reflect(margin)?;
    let (w, h) = (raster.width(), raster.height());
    let pw = padded.width();
    let ppx = padded.pixels();
    let mid = (k * k) / 2;

    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, out_row)| {
        let mut buf = vec![0u8; k * k];
        for (x, out) in out_row.iter_mut().enumerate() {
            for wy in 0..k {
                let base = (y + wy) * pw + x;
                buf[wy * k..(wy + 1) * k].copy_from_slice(&ppx[base..base + k]);
            }
            let (_, median, _) = buf.select_nth_unstable(mid);
            *out = *median;
        }
    });
    GrayRaster::new(w, h, out)
}

/// Runs all three noise measurements and sets the salt-and-pepper flag.
///
/// The variance window is shrunk (preserving oddness) on frames too
/// small to support the configured window, so the stated 3×3 minimum
/// image size is sufficient regardless of configuration.
pub fn assess_noise(raster: &GrayRaster, config: &NoiseThresholds) -> Result<NoiseReport> {
    let (w, h) = (raster.width(), raster.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall(format!(
            "assess_noise needs at least 3x3, got {w}x{h}"
        )));
    }
    let spr = salt_pepper_ratio(raster, config.tau_min, config.tau_max)?;
    let lap = laplacian_std(raster)?;

    let max_window = 2 * w.min(h) - 1;
    let mut window = config.variance_window.min(max_window);
    if window % 2 == 0 {
        window -= 1;
    }
    let map = local_variance_map(raster, window)?;
    let mean_local_variance = map.iter().sum::<f64>() / map.len() as f64;

    Ok(NoiseReport {
        laplacian_std: lap,
        spr,
        mean_local_variance,
        salt_pepper_flag: spr > config.spr_threshold,
    })
}
