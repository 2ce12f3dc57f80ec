//! Brute-force reference implementations used to cross-check the
//! library's optimized arithmetic, plus small deterministic image
//! generators shared by the property and acceptance suites.
//!
//! Everything here favors obviousness over speed: full sorts, per-
//! threshold rescans, dense eigensolvers. Where the library derives a
//! float from exact integer sums, the oracle reproduces the same
//! rational so comparisons can be exact; everywhere else tolerances
//! are stated at the call site.
#![allow(dead_code)]

use octseg::raster::GrayRaster;
use octseg::rng::SplitMix64;

/// Mirror an out-of-range coordinate back into `0..size` about the
/// edge pixel (no duplication): -1 → 1, size → size-2. Valid for
/// overshoot up to `size - 1`, which is all `pad_reflect` accepts.
pub fn reflect(i: isize, size: usize) -> usize {
    let size = size as isize;
    let r = if i < 0 {
        -i
    } else if i >= size {
        2 * (size - 1) - i
    } else {
        i
    };
    assert!(r >= 0 && r < size, "reflected index out of range");
    r as usize
}

/// The values of the k×k window centered on (cx, cy), gathered with
/// reflect indexing, in row-major window order.
pub fn window_values(img: &GrayRaster, cx: usize, cy: usize, k: usize) -> Vec<u8> {
    assert!(k % 2 == 1, "window side must be odd");
    let m = (k / 2) as isize;
    let mut out = Vec::with_capacity(k * k);
    for dy in -m..=m {
        let y = reflect(cy as isize + dy, img.height());
        for dx in -m..=m {
            let x = reflect(cx as isize + dx, img.width());
            out.push(img.get(x, y));
        }
    }
    out
}

/// Median by full sort: the element at index len/2 of the sorted
/// values (the upper median for even lengths).
pub fn median_oracle(values: &[u8]) -> u8 {
    let mut v = values.to_vec();
    v.sort_unstable();
    v[v.len() / 2]
}

/// Population variance from exact integer sums, with the single final
/// division (n·Σx² − (Σx)²) / n². Any implementation that forms the
/// same integers produces this exact f64.
pub fn variance_oracle(values: &[u8]) -> f64 {
    let n = values.len() as u64;
    let s: u64 = values.iter().map(|&v| v as u64).sum();
    let s2: u64 = values.iter().map(|&v| (v as u64) * (v as u64)).sum();
    (n * s2 - s * s) as f64 / ((n * n) as f64)
}

/// The seven patch statistics recomputed from scratch for the window
/// centered on (cx, cy) of `img`, reflect-indexed. Order matches
/// `FEATURE_NAMES`: mean, std, min, max, median, entropy, grad_mag.
pub fn feature_oracle(img: &GrayRaster, cx: usize, cy: usize, patch: usize) -> [f64; 7] {
    let values = window_values(img, cx, cy, patch);
    let n = values.len() as f64;
    let sum: u64 = values.iter().map(|&v| v as u64).sum();
    let mean = sum as f64 / n;
    let std = variance_oracle(&values).sqrt();
    let lo = *values.iter().min().unwrap() as f64;
    let hi = *values.iter().max().unwrap() as f64;
    let median = median_oracle(&values) as f64;

    // Entropy of the 3×3 neighborhood of the center pixel, base-2,
    // accumulated in ascending intensity order.
    let three = window_values(img, cx, cy, 3);
    let mut hist = [0u32; 256];
    for &v in &three {
        hist[v as usize] += 1;
    }
    let mut acc = 0.0f64;
    for &count in hist.iter() {
        if count > 0 {
            let p = count as f64 / 9.0;
            acc += p * p.log2();
        }
    }
    let entropy = -acc;

    // Sobel L1 response at the center pixel.
    let at = |dx: isize, dy: isize| -> i32 {
        let x = reflect(cx as isize + dx, img.width());
        let y = reflect(cy as isize + dy, img.height());
        img.get(x, y) as i32
    };
    let gx = -at(-1, -1) + at(1, -1) - 2 * at(-1, 0) + 2 * at(1, 0) - at(-1, 1) + at(1, 1);
    let gy = -at(-1, -1) - 2 * at(0, -1) - at(1, -1) + at(-1, 1) + 2 * at(0, 1) + at(1, 1);
    let grad_mag = (gx.abs() + gy.abs()) as f64;

    [mean, std, lo, hi, median, entropy, grad_mag]
}

/// Exhaustive Otsu argmax: for every candidate threshold the class
/// counts are re-derived by a fresh scan over all pixels, the
/// between-class score is formed from those integers, and the best
/// (strictly greater, so ties keep the smallest t) wins. Returns
/// `(threshold, between_class_variance)`, or None when fewer than two
/// intensities occur.
pub fn otsu_oracle(img: &GrayRaster) -> Option<(u8, f64)> {
    let pixels = img.pixels();
    let mut distinct = [false; 256];
    for &p in pixels {
        distinct[p as usize] = true;
    }
    if distinct.iter().filter(|&&d| d).count() < 2 {
        return None;
    }
    let n = pixels.len() as u64;
    let s: u64 = pixels.iter().map(|&p| p as u64).sum();
    let mut best: Option<(u8, f64)> = None;
    for t in 0..=254u8 {
        let mut n0 = 0u64;
        let mut s0 = 0u64;
        for &p in pixels {
            if p <= t {
                n0 += 1;
                s0 += p as u64;
            }
        }
        if n0 == 0 || n0 == n {
            continue;
        }
        let d = (s0 * n) as i64 - (s * n0) as i64;
        let score = (d as f64) * (d as f64) / ((n0 * (n - n0)) as f64);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((t, score));
        }
    }
    best.map(|(t, score)| (t, score / (n as f64 * n as f64)))
}

/// Dense symmetric eigendecomposition by the cyclic Jacobi method.
/// Returns `(eigenvalues, eigenvectors)` sorted by descending
/// eigenvalue; `eigenvectors[k]` is the unit eigenvector of
/// `eigenvalues[k]`.
// Triangular sweeps and paired row/column rotations are clearest with
// explicit indices.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(mat: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = mat.len();
    assert!(
        n > 0 && mat.iter().all(|r| r.len() == n),
        "matrix must be square"
    );
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    // v starts as the identity; columns accumulate the rotations.
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                // Classic 2×2 rotation zeroing a[p][q].
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[k][k]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| (0..n).map(|r| v[r][k]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

/// A smooth polar frame — low-frequency in both angle and radius — on
/// which bilinear resampling round-trips nearly losslessly.
pub fn smooth_polar(n_angles: usize, n_radii: usize, phase: f64) -> GrayRaster {
    GrayRaster::from_fn(n_angles, n_radii, |x, y| {
        let theta = std::f64::consts::TAU * x as f64 / n_angles as f64 + phase;
        let r_hat = y as f64 / (n_radii - 1).max(1) as f64;
        let v = 120.0 + 60.0 * theta.sin() + 50.0 * (std::f64::consts::PI * r_hat).cos();
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("smooth phantom dimensions are valid")
}

/// A raster whose intensities form two tight bands separated by a wide
/// gap, so no pixel sits at a cluster midpoint and K-means assignment
/// is tie-free (the inversion invariant then holds exactly).
pub fn two_band_raster(width: usize, height: usize, low: u8, high: u8, seed: u64) -> GrayRaster {
    assert!(
        low >= 2 && high <= 253 && high > low,
        "band centers must leave jitter room"
    );
    assert!(width * height >= 2, "need room for one pixel per band");
    let mut rng = SplitMix64::new(seed);
    let pixels: Vec<u8> = (0..width * height)
        .map(|i| {
            // The first two pixels pin one value into each band so
            // neither cluster can start empty.
            let in_low_band = match i {
                0 => true,
                1 => false,
                _ => rng.next_f64() < 0.5,
            };
            let center = if in_low_band { low } else { high };
            let jitter = rng.next_below(5) as i32 - 2;
            (center as i32 + jitter).clamp(0, 255) as u8
        })
        .collect();
    GrayRaster::new(width, height, pixels).expect("two-band raster dimensions are valid")
}

/// Per-pixel 0..=255 inversion of a raster.
pub fn invert(img: &GrayRaster) -> GrayRaster {
    GrayRaster::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&p| 255 - p).collect(),
    )
    .expect("inversion preserves dimensions")
}
