//! Two-component PCA via power iteration with deflation.
//!
//! The covariance matrix is population-normalized (divide by n). Each
//! principal direction is found by power iteration from a fixed
//! starting vector, the matrix is deflated, and the next direction is
//! extracted the same way — one code path regardless of feature count.
//! Directions are sign-normalized so their first non-negligible
//! component is positive, making fitted models reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of retained components.
const N_COMPONENTS: usize = 2;
/// Power-iteration movement tolerance.
const POWER_TOL: f64 = 1e-10;
/// Iteration cap per component.
const POWER_MAX_ITER: usize = 100_000;

/// Fitted PCA basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Two orthonormal direction vectors, by descending variance.
    pub components: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population variance captured by each component, descending.
    pub explained_variance: Vec<f64>,
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Subtracts the projections of `v` onto each of `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in v.iter_mut().zip(b) {
            *x -= proj * y;
        }
    }
}

/// Deterministic starting vector for one power iteration: a generic
/// direction orthogonalized against the components already found, with
/// basis vectors as fallbacks.
fn starting_vector(d: usize, found: &[Vec<f64>]) -> Vec<f64> {
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    candidates.push((0..d).map(|i| 1.0 / (i + 1) as f64).collect());
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        candidates.push(e);
    }
    for mut v in candidates {
        orthogonalize(&mut v, found);
        if normalize(&mut v) > 1e-8 {
            return v;
        }
    }
    unreachable!("fewer than d components found, so some basis vector survives");
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Largest eigenpair of symmetric PSD `m` by power iteration.
///
/// `scale` is the total variance of the undeflated matrix; directions
/// whose image is negligible against it are treated as eigenvalue 0
/// (deflation leaves rounding residue far above the underflow range,
/// so an absolute test would spin on noise).
fn power_iterate(m: &[Vec<f64>], found: &[Vec<f64>], scale: f64) -> Result<(f64, Vec<f64>)> {
    let d = m.len();
    let zero_floor = scale * 1e-12 + 1e-300;
    let mut v = starting_vector(d, found);
    for _ in 0..POWER_MAX_ITER {
        let mut next = mat_vec(m, &v);
        orthogonalize(&mut next, found);
        if normalize(&mut next) <= zero_floor {
            // The matrix (numerically) annihilates this direction:
            // eigenvalue 0; the current orthonormal vector is a valid
            // component.
            return Ok((0.0, v));
        }
        // Residual negative eigenvalues from deflation make iterates
        // flip sign each step; measure movement up to sign.
        let mut diff_pos = 0.0f64;
        let mut diff_neg = 0.0f64;
        for (a, b) in next.iter().zip(&v) {
            diff_pos = diff_pos.max((a - b).abs());
            diff_neg = diff_neg.max((a + b).abs());
        }
        v = next;
        if diff_pos.min(diff_neg) < POWER_TOL {
            let mv = mat_vec(m, &v);
            let lambda: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
            return Ok((lambda.max(0.0), v));
        }
    }
    Err(Error::NonConvergence(format!(
        "power iteration did not settle within {POWER_MAX_ITER} iterations"
    )))
}

/// Flips the vector so its first non-negligible entry is positive.
fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return;
    }
    for &x in v.iter() {
        if x.abs() > 1e-9 * scale {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

/// Fits means, top-2 directions, and their explained variances.
pub fn pca_fit(data: &[Vec<f64>]) -> Result<PcaModel> {
    let n = data.len();
    if n < 2 {
        return Err(Error::NotEnoughData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(Error::NotEnoughData(format!(
            "PCA needs at least 2 features, got {d}"
        )));
    }
    for row in data {
        if row.len() != d {
            return Err(Error::WidthMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }

    let mut means = vec![0.0f64; d];
    for row in data {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }

    // Population covariance (divide by n).
    let mut cov = vec![vec![0.0f64; d]; d];
    for row in data {
        let centered: Vec<f64> = row.iter().zip(&means).map(|(x, m)| x - m).collect();
        for (i, ci) in centered.iter().enumerate() {
            for (j, cj) in centered.iter().enumerate() {
                cov[i][j] += ci * cj;
            }
        }
    }
    for r in cov.iter_mut() {
        for x in r.iter_mut() {
            *x /= n as f64;
        }
    }

    let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(N_COMPONENTS);
    let mut explained = Vec::with_capacity(N_COMPONENTS);
    for _ in 0..N_COMPONENTS {
        let (lambda, mut v) = power_iterate(&cov, &components, total_variance)?;
        fix_sign(&mut v);
        // Deflate: remove the found direction's variance.
        for (i, vi) in v.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                cov[i][j] -= lambda * vi * vj;
            }
        }
        components.push(v);
        explained.push(lambda);
    }
    Ok(PcaModel {
        components,
        means,
        explained_variance: explained,
    })
}

/// Projects rows onto the fitted basis: (x − mean)·components.
pub fn pca_project(model: &PcaModel, data: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let d = model.means.len();
    let mut out = Vec::with_capacity(data.len());
    for row in data {
        if row.len() != d {
            return Err(Error::WidthMismatch {
                expected: d,
                got: row.len(),
            });
        }
        let centered: Vec<f64> = row.iter().zip(&model.means).map(|(x, m)| x - m).collect();
        let mut coords = [0.0f64; 2];
        for (c, comp) in coords.iter_mut().zip(&model.components) {
            *c = centered.iter().zip(comp).map(|(a, b)| a * b).sum();
        }
        out.push(coords);
    }
    Ok(out)
}
