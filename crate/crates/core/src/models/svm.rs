//! Soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimization.
//!
//! The solver is the classic simplified SMO: sweep the training set
//! looking for KKT violators and solve one two-variable subproblem
//! analytically per violator, with the standard L/H clipping bounds.
//! The second index follows Platt's choice hierarchy — first the
//! partner of maximal error gap |E_i − E_j| (exact ties broken by the
//! seeded generator), then, if that pair cannot move, every other
//! partner starting from a seeded position. A cached decision value
//! per sample keeps each successful update O(n·d); the kernel matrix
//! is never materialized. Training stops after `max_passes`
//! consecutive sweeps without a change, or fails with a
//! non-convergence error after a hard sweep cap.
//!
//! Labels {0,1} are mapped to {−1,+1} internally. Inputs are expected
//! standardized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledDataset;
use crate::rng::SplitMix64;

/// Sweep cap: exceeding this aborts training as non-convergent.
const MAX_SWEEPS: usize = 2000;

/// Relative minimum α step (Platt's ε): proposals below it are treated
/// as no-ops so sweeps can settle once the duals stop moving
/// meaningfully at the working tolerance.
const STEP_EPS: f64 = 1e-3;

/// Curvature floor on −η = 2 − 2K_ij. Near-duplicate points give a
/// kernel row this close to singular; their unconstrained step is
/// enormous, clips to a box wall, and just bounces on the next visit
/// while improving the objective by a negligible amount — skipping the
/// pair keeps every counted update a real step toward the optimum.
const MIN_CURVATURE: f64 = 1e-8;

/// Trained SVM: support vectors with signed dual coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// α_i·y_i with y ∈ {−1,+1}; magnitude bounded by `c`.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
}

/// RBF kernel exp(−γ‖x−z‖²) via the expanded norm form.
#[inline]
fn rbf(gamma: f64, sq_a: f64, sq_b: f64, dot: f64) -> f64 {
    (-gamma * (sq_a + sq_b - 2.0 * dot)).exp()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Default kernel width 1/(d·σ̄²), where σ̄² is the mean per-feature
/// population variance; falls back to 1/d when the data is constant.
pub fn default_gamma(ds: &LabeledDataset) -> f64 {
    let d = ds.feature_names.len().max(1);
    let n = ds.len();
    if n == 0 {
        return 1.0 / d as f64;
    }
    let mut total_var = 0.0;
    for j in 0..d {
        let mean = ds.features.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = ds
            .features
            .iter()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / n as f64;
        total_var += var;
    }
    let mean_var = total_var / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// Trains by simplified SMO. `tol` is the KKT violation tolerance;
/// `max_passes` is the number of consecutive change-free sweeps that
/// ends training.
pub fn train_svm(
    train: &LabeledDataset,
    c: f64,
    gamma: f64,
    tol: f64,
    max_passes: usize,
    seed: u64,
) -> Result<SvmModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n0, n1) = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    let bad = |v: f64| v.is_nan() || v <= 0.0;
    if bad(c) || bad(gamma) || bad(tol) || max_passes == 0 {
        return Err(Error::InvalidHyperparameter(format!(
            "svm needs C > 0, gamma > 0, tol > 0, max_passes >= 1; \
             got C {c}, gamma {gamma}, tol {tol}, max_passes {max_passes}"
        )));
    }
    let x = &train.features;
    let n = x.len();
    let y: Vec<f64> = train
        .labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let sq: Vec<f64> = x.iter().map(|r| dot(r, r)).collect();

    let mut state = SmoState {
        x,
        y: &y,
        sq: &sq,
        gamma,
        c,
        alpha: vec![0.0f64; n],
        // Cached decision value f(x_k) per sample (all zero at α = 0).
        f: vec![0.0f64; n],
        b: 0.0,
    };
    let mut rng = SplitMix64::new(seed);

    let mut passes = 0usize;
    let mut sweeps = 0usize;
    while passes < max_passes {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NonConvergence(format!(
                "SMO exceeded {MAX_SWEEPS} sweeps (n = {n}, C = {c}, gamma = {gamma})"
            )));
        }
        let mut changed = 0usize;
        for i in 0..n {
            let e_i = state.f[i] - y[i];
            let r = y[i] * e_i;
            if !((r < -tol && state.alpha[i] < c) || (r > tol && state.alpha[i] > 0.0)) {
                continue;
            }
            // Second-index choice, first tier: the partner with the
            // largest error gap gives the largest guaranteed objective
            // step. Exact gap ties — pervasive on the first sweep,
            // where every cached value is zero — are broken by the
            // seeded generator via reservoir sampling.
            let mut j = i;
            let mut best_gap = -1.0f64;
            let mut ties = 0u64;
            for (cand, fc) in state.f.iter().enumerate() {
                if cand == i {
                    continue;
                }
                let gap = (e_i - (fc - y[cand])).abs();
                if gap > best_gap {
                    best_gap = gap;
                    j = cand;
                    ties = 1;
                } else if gap == best_gap {
                    ties += 1;
                    if rng.next_below(ties) == 0 {
                        j = cand;
                    }
                }
            }
            if best_gap > 0.0 && state.try_step(i, j) {
                changed += 1;
                continue;
            }
            // Second tier: the preferred pair could not move (bound
            // geometry, flat curvature, or a sub-threshold step), so
            // try every other partner from a seeded starting position.
            let start = rng.next_below(n as u64) as usize;
            for offset in 0..n {
                let cand = (start + offset) % n;
                if cand != i && cand != j && state.try_step(i, cand) {
                    changed += 1;
                    break;
                }
            }
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..n {
        if state.alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coefs.push(state.alpha[i] * y[i]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias: state.b,
        gamma,
        c,
    })
}

/// Mutable optimizer state shared by the partner-choice tiers.
struct SmoState<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    sq: &'a [f64],
    gamma: f64,
    c: f64,
    alpha: Vec<f64>,
    f: Vec<f64>,
    b: f64,
}

impl SmoState<'_> {
    /// Attempts the analytic two-variable update on (i, j). Returns
    /// whether a real step was taken; on success the α pair, the bias,
    /// and the decision cache are updated in O(n·d).
    fn try_step(&mut self, i: usize, j: usize) -> bool {
        let (y, c) = (self.y, self.c);
        let e_i = self.f[i] - y[i];
        let e_j = self.f[j] - y[j];
        let (lo, hi) = if y[i] == y[j] {
            (
                (self.alpha[i] + self.alpha[j] - c).max(0.0),
                (self.alpha[i] + self.alpha[j]).min(c),
            )
        } else {
            (
                (self.alpha[j] - self.alpha[i]).max(0.0),
                (c + self.alpha[j] - self.alpha[i]).min(c),
            )
        };
        if lo >= hi {
            return false;
        }
        let k_ij = rbf(
            self.gamma,
            self.sq[i],
            self.sq[j],
            dot(&self.x[i], &self.x[j]),
        );
        // K_ii = K_jj = 1 for the RBF kernel.
        let eta = 2.0 * k_ij - 2.0;
        if eta > -MIN_CURVATURE {
            return false;
        }
        let a_j_old = self.alpha[j];
        let a_j = (a_j_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi);
        if (a_j - a_j_old).abs() < STEP_EPS * (a_j + a_j_old + STEP_EPS) {
            return false;
        }
        let a_i_old = self.alpha[i];
        // The paired update keeps a_i in [0, C] mathematically; the
        // clamp only strips one-ulp drift so box bounds hold exactly.
        let a_i = (a_i_old + y[i] * y[j] * (a_j_old - a_j)).clamp(0.0, c);
        self.alpha[i] = a_i;
        self.alpha[j] = a_j;

        let b = self.b;
        let b1 = b - e_i - y[i] * (a_i - a_i_old) - y[j] * (a_j - a_j_old) * k_ij;
        let b2 = b - e_j - y[i] * (a_i - a_i_old) * k_ij - y[j] * (a_j - a_j_old);
        let b_new = if a_i > 0.0 && a_i < c {
            b1
        } else if a_j > 0.0 && a_j < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        for (k, fk) in self.f.iter_mut().enumerate() {
            let k_ik = rbf(
                self.gamma,
                self.sq[i],
                self.sq[k],
                dot(&self.x[i], &self.x[k]),
            );
            let k_jk = rbf(
                self.gamma,
                self.sq[j],
                self.sq[k],
                dot(&self.x[j], &self.x[k]),
            );
            *fk += y[i] * (a_i - a_i_old) * k_ik + y[j] * (a_j - a_j_old) * k_jk + (b_new - b);
        }
        self.b = b_new;
        true
    }
}

/// Decision value Σᵢ αᵢyᵢ·K(xᵢ, x) + b, summed in support-vector
/// order so results are bit-stable.
pub fn decision_value(model: &SvmModel, row: &[f64]) -> Result<f64> {
    if let Some(first) = model.support_vectors.first() {
        if row.len() != first.len() {
            return Err(Error::WidthMismatch {
                expected: first.len(),
                got: row.len(),
            });
        }
    }
    let sq_row = dot(row, row);
    let mut sum = model.bias;
    for (sv, &coef) in model.support_vectors.iter().zip(&model.dual_coefs) {
        sum += coef * rbf(model.gamma, dot(sv, sv), sq_row, dot(sv, row));
    }
    Ok(sum)
}

/// Predicted label: decision value ≥ 0 → class 1 (exact zero is vessel).
pub fn predict_svm(model: &SvmModel, row: &[f64]) -> Result<u8> {
    Ok(u8::from(decision_value(model, row)? >= 0.0))
}
