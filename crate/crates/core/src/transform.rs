//! Polar ↔ Cartesian remapping.
//!
//! Acquisition geometry is polar: each column is one A-line at a fixed
//! angle (θ uniform over [0,2π)), each row a radius, row 0 at the
//! catheter center. Display geometry is Cartesian: a square image of
//! side 2·n_radii whose center sits between pixels at
//! (n_radii−0.5, n_radii−0.5).
//!
//! Conventions, fixed so outputs are bit-stable:
//! - θ is measured from the +x axis counterclockwise in image
//!   coordinates (y grows downward, so the sweep appears clockwise on
//!   screen);
//! - sampling is bilinear with angular wraparound (θ just below 2π
//!   interpolates toward column 0) and radial clamp at the outermost
//!   row;
//! - Cartesian pixels with r ≥ n_radii take `fill_value`.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::GrayRaster;

/// Shape of the polar acquisition grid plus the out-of-range fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarGeometry {
    /// Number of A-lines (polar image width).
    pub n_angles: usize,
    /// Number of samples per A-line (polar image height).
    pub n_radii: usize,
    /// Intensity written to Cartesian pixels outside the scan disk.
    pub fill_value: u8,
}

impl PolarGeometry {
    pub fn new(n_angles: usize, n_radii: usize, fill_value: u8) -> Result<Self> {
        if n_angles < 4 || n_radii < 2 {
            return Err(Error::InvalidConfig(format!(
                "polar geometry needs n_angles >= 4 and n_radii >= 2, got {n_angles}x{n_radii}"
            )));
        }
        Ok(Self {
            n_angles,
            n_radii,
            fill_value,
        })
    }

    /// Geometry matching a polar raster's dimensions.
    pub fn for_polar(polar: &GrayRaster, fill_value: u8) -> Result<Self> {
        Self::new(polar.width(), polar.height(), fill_value)
    }

    /// Side length of the Cartesian image.
    pub fn cartesian_side(&self) -> usize {
        2 * self.n_radii
    }
}

/// Bilinear sample of `raster` at fractional column `u` (wrapping) and
/// row `r` (clamping). `u` may equal the width exactly, meaning θ = 2π.
#[inline]
fn sample_polar(raster: &GrayRaster, u: f64, r: f64) -> f64 {
    let w = raster.width();
    let h = raster.height();
    let c0 = (u.floor() as usize) % w;
    let c1 = (c0 + 1) % w;
    let fu = u - u.floor();
    let r0 = (r.floor() as usize).min(h - 1);
    let r1 = (r0 + 1).min(h - 1);
    let fv = (r - r.floor()).clamp(0.0, 1.0);
    let p00 = raster.get(c0, r0) as f64;
    let p01 = raster.get(c1, r0) as f64;
    let p10 = raster.get(c0, r1) as f64;
    let p11 = raster.get(c1, r1) as f64;
    (1.0 - fv) * ((1.0 - fu) * p00 + fu * p01) + fv * ((1.0 - fu) * p10 + fu * p11)
}

/// Bilinear sample of a Cartesian raster at (x, y), clamped to borders.
#[inline]
fn sample_clamped(raster: &GrayRaster, x: f64, y: f64) -> f64 {
    let w = raster.width();
    let h = raster.height();
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let p00 = raster.get(x0, y0) as f64;
    let p01 = raster.get(x1, y0) as f64;
    let p10 = raster.get(x0, y1) as f64;
    let p11 = raster.get(x1, y1) as f64;
    (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)
}

/// Remaps a polar frame to the square Cartesian display image.
pub fn polar_to_cartesian(polar: &GrayRaster, geom: &PolarGeometry) -> Result<GrayRaster> {
    if polar.width() != geom.n_angles || polar.height() != geom.n_radii {
        return Err(Error::DimensionMismatch(format!(
            "polar image is {}x{}, geometry expects {}x{}",
            polar.width(),
            polar.height(),
            geom.n_angles,
            geom.n_radii
        )));
    }
    let side = geom.cartesian_side();
    let center = geom.n_radii as f64 - 0.5;
    let n_angles = geom.n_angles as f64;
    let n_radii = geom.n_radii as f64;
    let fill = geom.fill_value;

    let mut out = vec![0u8; side * side];
    out.par_chunks_mut(side).enumerate().for_each(|(y, row)| {
        let dy = y as f64 - center;
        for (x, px) in row.iter_mut().enumerate() {
            let dx = x as f64 - center;
            let r = dx.hypot(dy);
            if r >= n_radii {
                *px = fill;
                continue;
            }
            let mut theta = dy.atan2(dx);
            if theta < 0.0 {
                theta += TAU;
            }
            let u = theta * n_angles / TAU;
            *px = sample_polar(polar, u, r).round() as u8;
        }
    });
    GrayRaster::new(side, side, out)
}

/// Remaps a square Cartesian image back to the polar grid.
pub fn cartesian_to_polar(cart: &GrayRaster, geom: &PolarGeometry) -> Result<GrayRaster> {
    let side = geom.cartesian_side();
    if cart.width() != cart.height() || cart.width() != side {
        return Err(Error::DimensionMismatch(format!(
            "cartesian image is {}x{}, geometry expects square side {side}",
            cart.width(),
            cart.height()
        )));
    }
    let center = geom.n_radii as f64 - 0.5;
    let n_angles = geom.n_angles;

    let mut out = vec![0u8; n_angles * geom.n_radii];
    out.par_chunks_mut(n_angles)
        .enumerate()
        .for_each(|(row, out_row)| {
            let r = row as f64;
            for (a, px) in out_row.iter_mut().enumerate() {
                let theta = a as f64 * TAU / n_angles as f64;
                let x = center + r * theta.cos();
                let y = center + r * theta.sin();
                *px = sample_clamped(cart, x, y).round() as u8;
            }
        });
    GrayRaster::new(n_angles, geom.n_radii, out)
}
