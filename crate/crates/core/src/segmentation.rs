//! Unsupervised vessel/background segmentation.
//!
//! Two independent segmenters plus a cleanup pass:
//!
//! 1. Otsu's global threshold — picks the intensity cut maximizing
//!    between-class variance;
//! 2. two-cluster 1-D K-means over pixel intensities, with a recorded
//!    per-iteration centroid/inertia trace;
//! 3. morphological refinement — binary opening then closing with a
//!    square structuring element, removing specks and filling holes.
//!
//! The brighter K-means cluster is labeled vessel: wall tissue
//! backscatters strongly while the lumen stays dark.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayRaster, MASK_FOREGROUND};

/// Otsu threshold plus the criterion value it maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtsuResult {
    /// Chosen threshold t; pixels > t are foreground.
    pub threshold: u8,
    /// σ_b²(t) = w0·w1·(μ0−μ1)² at the chosen t.
    pub between_class_variance: f64,
}

/// Per-iteration record of a K-means run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansTrace {
    /// Centroid pair after each update, ordered (lower, higher) by
    /// construction of the initializer.
    pub centroids_per_iter: Vec<(f64, f64)>,
    /// Inertia of each iteration's assignment against its updated
    /// centroids; non-increasing.
    pub inertia_per_iter: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Between-class score for threshold `t` from exact integer counts.
///
/// σ_b²·N² = (s0·N − S·n0)² / (n0·n1), a function of integers only, so
/// any two implementations that reach the same counts produce the same
/// f64 score bit-for-bit — the argmax (and its ties) is reproducible.
#[inline]
fn otsu_score(n0: u64, s0: u64, n: u64, s: u64) -> f64 {
    let n1 = n - n0;
    let d = (s0 * n) as i64 - (s * n0) as i64;
    let df = d as f64;
    df * df / ((n0 * n1) as f64)
}

/// Finds the threshold maximizing between-class variance over
/// t ∈ [0, 254], classing pixels ≤ t as background. Ties break toward
/// the smallest t.
pub fn otsu_threshold(raster: &GrayRaster) -> Result<OtsuResult> {
    let mut hist = [0u64; 256];
    for &p in raster.pixels() {
        hist[p as usize] += 1;
    }
    let n: u64 = raster.pixels().len() as u64;
    let s: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }

    let mut n0 = 0u64;
    let mut s0 = 0u64;
    let mut best_t = 0u8;
    let mut best_score = f64::NEG_INFINITY;
    for (t, &count) in hist.iter().enumerate().take(255) {
        n0 += count;
        s0 += t as u64 * count;
        if n0 == 0 || n0 == n {
            continue; // one class empty: criterion undefined, skip
        }
        let score = otsu_score(n0, s0, n, s);
        if score > best_score {
            best_score = score;
            best_t = t as u8;
        }
    }
    let nf = n as f64;
    Ok(OtsuResult {
        threshold: best_t,
        between_class_variance: best_score / (nf * nf),
    })
}

/// Binarizes: pixel > t → foreground (255), else background (0).
pub fn apply_threshold(raster: &GrayRaster, t: u8) -> BinaryMask {
    let pixels = raster
        .pixels()
        .iter()
        .map(|&p| if p > t { MASK_FOREGROUND } else { 0 })
        .collect();
    BinaryMask::new(raster.width(), raster.height(), pixels)
        .expect("thresholding preserves dimensions and emits only 0/255")
}

/// Sum of squared distances of each pixel to its assigned centroid.
/// Label 0 selects the first centroid; any nonzero label the second.
pub fn inertia(pixels: &[u8], assignment: &[u8], centroids: (f64, f64)) -> Result<f64> {
    if pixels.len() != assignment.len() {
        return Err(Error::LengthMismatch(format!(
            "{} pixels vs {} labels",
            pixels.len(),
            assignment.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &label) in pixels.iter().zip(assignment) {
        let c = if label == 0 { centroids.0 } else { centroids.1 };
        let d = p as f64 - c;
        total += d * d;
    }
    Ok(total)
}

/// Nearest-centroid label for one intensity; exact-midpoint ties go to
/// the lower centroid.
#[inline]
fn assign_one(x: f64, c0: f64, c1: f64) -> u8 {
    let d0 = (x - c0).abs();
    let d1 = (x - c1).abs();
    if d0 < d1 {
        0
    } else if d1 < d0 {
        1
    } else if c0 <= c1 {
        0
    } else {
        1
    }
}

/// Two-cluster K-means over pixel intensities.
///
/// Centroids start at the image minimum and maximum. Each iteration
/// reassigns pixels, reseeds any emptied cluster at the pixel farthest
/// from the surviving centroid, updates centroids to assignment means,
/// and records the inertia of the new centroids under the current
/// assignment (which makes the recorded trace provably non-increasing).
/// Convergence is declared when the larger centroid movement drops
/// below `tol`.
pub fn kmeans_segment(
    raster: &GrayRaster,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(BinaryMask, KMeansTrace)> {
    if k != 2 {
        return Err(Error::InvalidHyperparameter(format!(
            "this pipeline segments vessel vs. background only (k = 2), got k = {k}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(Error::InvalidHyperparameter(format!(
            "kmeans needs tol > 0 and max_iter >= 1, got tol {tol}, max_iter {max_iter}"
        )));
    }
    let pixels = raster.pixels();
    let (lo, hi) = raster.min_max();
    if lo == hi {
        return Err(Error::TooFewDistinctIntensities {
            needed: 2,
            found: 1,
        });
    }

    let mut c0 = lo as f64;
    let mut c1 = hi as f64;
    let mut labels = vec![0u8; pixels.len()];
    let mut trace = KMeansTrace {
        centroids_per_iter: Vec::new(),
        inertia_per_iter: Vec::new(),
        iterations: 0,
        converged: false,
    };

    for _ in 0..max_iter {
        // Assignment: parallel per-pixel map, deterministic by index.
        labels
            .par_iter_mut()
            .zip(pixels.par_iter())
            .for_each(|(l, &p)| *l = assign_one(p as f64, c0, c1));

        // Exact integer sums; reseed an emptied cluster at the pixel
        // farthest from the other centroid and redo the assignment
        // (the reseeded pixel is then distance 0, so once suffices).
        loop {
            let mut n = [0u64; 2];
            let mut s = [0u64; 2];
            for (&p, &l) in pixels.iter().zip(&labels) {
                n[l as usize] += 1;
                s[l as usize] += p as u64;
            }
            if n[0] > 0 && n[1] > 0 {
                c0 = s[0] as f64 / n[0] as f64;
                c1 = s[1] as f64 / n[1] as f64;
                break;
            }
            let other = if n[0] == 0 { c1 } else { c0 };
            let &far = pixels
                .iter()
                .max_by(|&&a, &&b| {
                    let da = (a as f64 - other).abs();
                    let db = (b as f64 - other).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .expect("raster is non-empty");
            if n[0] == 0 {
                c0 = far as f64;
            } else {
                c1 = far as f64;
            }
            labels
                .par_iter_mut()
                .zip(pixels.par_iter())
                .for_each(|(l, &p)| *l = assign_one(p as f64, c0, c1));
        }

        let last = trace.centroids_per_iter.last().copied();
        let movement = match last {
            Some((p0, p1)) => (c0 - p0).abs().max((c1 - p1).abs()),
            // First iteration: movement measured from the (min, max)
            // initializer.
            None => (c0 - lo as f64).abs().max((c1 - hi as f64).abs()),
        };
        trace.centroids_per_iter.push((c0, c1));
        trace
            .inertia_per_iter
            .push(inertia(pixels, &labels, (c0, c1))?);
        trace.iterations += 1;
        if movement < tol {
            trace.converged = true;
            break;
        }
    }

    let vessel = if c1 >= c0 { 1u8 } else { 0u8 };
    let mask_px = labels
        .iter()
        .map(|&l| if l == vessel { MASK_FOREGROUND } else { 0 })
        .collect();
    let mask = BinaryMask::new(raster.width(), raster.height(), mask_px)?;
    Ok((mask, trace))
}

/// Erosion with a (2r+1)² square element; out-of-bounds positions are
/// ignored, so border pixels are judged on their in-bounds window only.
fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph(mask, radius, true)
}

/// Dilation with the same element and boundary convention.
fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph(mask, radius, false)
}

fn morph(mask: &BinaryMask, radius: usize, all: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = radius as isize;
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for (x, px) in row.iter_mut().enumerate() {
            let x = x as isize;
            let mut acc = all;
            'win: for dy in -r..=r {
                let ny = y + dy;
                if ny < 0 || ny >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let nx = x + dx;
                    if nx < 0 || nx >= w as isize {
                        continue;
                    }
                    let fg = mask.is_foreground(nx as usize, ny as usize);
                    if all && !fg {
                        acc = false;
                        break 'win;
                    }
                    if !all && fg {
                        acc = true;
                        break 'win;
                    }
                }
            }
            *px = if acc { MASK_FOREGROUND } else { 0 };
        }
    });
    BinaryMask::new(w, h, out).expect("morphology preserves dimensions")
}

/// Opening followed by closing: removes foreground specks smaller than
/// the (2r+1)² element, then fills comparable holes.
pub fn morph_refine(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::InvalidHyperparameter(
            "morphology radius must be >= 1".into(),
        ));
    }
    let opened = dilate(&erode(mask, radius), radius);
    Ok(erode(&dilate(&opened, radius), radius))
}
