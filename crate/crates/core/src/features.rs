//! Per-pixel texture features and dataset preparation.
//!
//! Every pixel of a frame is described by seven statistics of the
//! 11×11 patch centered on it (the image is reflect-padded so border
//! pixels have full patches):
//!
//! mean, population std, min, max, median — of the whole patch;
//! entropy — base-2, of the 3×3 neighborhood of the center pixel,
//! from its normalized 256-bin intensity histogram;
//! grad_mag — |Sobel-x| + |Sobel-y| evaluated at the center pixel.
//!
//! Labels come from a segmentation mask (255 → vessel, class 1).
//! Downstream preparation: class balancing by seeded majority
//! downsampling, seeded stratified splitting, and z-score
//! standardization fitted on training rows only.
//!
//! All patch statistics are computed from exact integer sums with a
//! single final float operation, so independently structured
//! implementations agree bit-for-bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, GrayRaster, MASK_FOREGROUND};
use crate::rng::SplitMix64;

/// Canonical feature order; serialization and CSV columns follow it.
pub const FEATURE_NAMES: [&str; 7] = ["mean", "std", "min", "max", "median", "entropy", "grad_mag"];

/// The seven patch statistics for one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub entropy: f64,
    pub grad_mag: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; 7] {
        [
            self.mean,
            self.std,
            self.min,
            self.max,
            self.median,
            self.entropy,
            self.grad_mag,
        ]
    }
}

/// Rows of features with binary labels and preparation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    /// Row-major feature matrix; every row has `feature_names.len()`
    /// entries.
    pub features: Vec<Vec<f64>>,
    /// One label per row: 0 background, 1 vessel.
    pub labels: Vec<u8>,
    pub balanced: bool,
    /// Set once [`standardize`] has transformed this dataset.
    pub standardization: Option<Standardization>,
}

/// Per-feature z-score statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    /// Applies the fitted transform; features recorded with std 0 pass
    /// through unscaled.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.means.len() {
            return Err(Error::WidthMismatch {
                expected: self.means.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| if s == 0.0 { x } else { (x - m) / s })
            .collect())
    }
}

/// Seeded split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
            stratified: true,
        }
    }
}

impl LabeledDataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch(format!(
                "{} feature rows vs {} labels",
                features.len(),
                labels.len()
            )));
        }
        let width = feature_names.len();
        for row in &features {
            if row.len() != width {
                return Err(Error::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::LengthMismatch(format!(
                "label {bad} is neither 0 nor 1"
            )));
        }
        Ok(Self {
            feature_names,
            features,
            labels,
            balanced: false,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (background, vessel) row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    /// Keeps the rows at `indices`, in the order given.
    fn select(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            balanced: self.balanced,
            standardization: self.standardization.clone(),
        }
    }

    /// Serializes as CSV: feature columns in order, then `label`.
    /// Floats carry 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.feature_names.join(","));
        out.push_str(",label\n");
        for (row, &label) in self.features.iter().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v:.8e},"));
            }
            out.push_str(&format!("{label}\n"));
        }
        out
    }

    /// Parses the CSV form written by [`to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedHeader("empty CSV".into()))?;
        let mut names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        match names.pop() {
            Some(last) if last == "label" => {}
            _ => {
                return Err(Error::MalformedHeader(
                    "last CSV column must be `label`".into(),
                ))
            }
        }
        let width = names.len();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width + 1 {
                return Err(Error::WidthMismatch {
                    expected: width + 1,
                    got: fields.len(),
                });
            }
            let mut row = Vec::with_capacity(width);
            for f in &fields[..width] {
                row.push(f.trim().parse::<f64>().map_err(|_| {
                    Error::MalformedRecord(format!("line {}: bad number {f:?}", lineno + 2))
                })?);
            }
            let label = match fields[width].trim() {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(Error::MalformedRecord(format!(
                        "line {}: bad label {other:?}",
                        lineno + 2
                    )))
                }
            };
            features.push(row);
            labels.push(label);
        }
        Self::new(names, features, labels)
    }
}

/// Computes the seven statistics of one square window of the padded
/// image. `x0`, `y0` address the window's top-left corner.
fn features_from_window(
    padded: &[u8],
    padded_width: usize,
    x0: usize,
    y0: usize,
    side: usize,
) -> FeatureVector {
    let n = (side * side) as u64;
    let mut sum = 0u64;
    let mut sumsq = 0u64;
    let mut lo = u8::MAX;
    let mut hi = u8::MIN;
    let mut values = Vec::with_capacity(side * side);
    for wy in 0..side {
        let base = (y0 + wy) * padded_width + x0;
        for &v in &padded[base..base + side] {
            sum += v as u64;
            sumsq += (v as u64) * (v as u64);
            lo = lo.min(v);
            hi = hi.max(v);
            values.push(v);
        }
    }
    let mean = sum as f64 / n as f64;
    // Population variance from exact integer sums (cf. local_variance_map).
    let var_num = (n * sumsq - sum * sum) as f64;
    let std = (var_num / ((n * n) as f64)).sqrt();
    let mid = values.len() / 2;
    let (_, &mut median, _) = values.select_nth_unstable(mid);

    // Entropy of the 3×3 neighborhood of the center pixel: normalized
    // 256-bin histogram, base-2 log, terms accumulated in ascending
    // intensity order.
    let c = side / 2;
    let mut hist = [0u32; 256];
    for wy in c - 1..=c + 1 {
        let base = (y0 + wy) * padded_width + x0;
        for &v in &padded[base + c - 1..base + c + 2] {
            hist[v as usize] += 1;
        }
    }
    let mut acc = 0.0f64;
    for &count in hist.iter() {
        if count > 0 {
            let p = count as f64 / 9.0;
            acc += p * p.log2();
        }
    }
    let entropy = -acc;

    // Sobel responses at the center pixel; integer arithmetic.
    let at = |dx: isize, dy: isize| -> i32 {
        let yy = (y0 + c) as isize + dy;
        let xx = (x0 + c) as isize + dx;
        padded[yy as usize * padded_width + xx as usize] as i32
    };
    let gx = -at(-1, -1) + at(1, -1) - 2 * at(-1, 0) + 2 * at(1, 0) - at(-1, 1) + at(1, 1);
    let gy = -at(-1, -1) - 2 * at(0, -1) - at(1, -1) + at(-1, 1) + 2 * at(0, 1) + at(1, 1);
    let grad_mag = (gx.abs() + gy.abs()) as f64;

    FeatureVector {
        mean,
        std,
        min: lo as f64,
        max: hi as f64,
        median: median as f64,
        entropy,
        grad_mag,
    }
}

/// Statistics of one standalone patch (square, odd side ≥ 3).
pub fn patch_features(patch: &GrayRaster) -> Result<FeatureVector> {
    let side = patch.width();
    if patch.height() != side {
        return Err(Error::DimensionMismatch(format!(
            "patch must be square, got {}x{}",
            patch.width(),
            patch.height()
        )));
    }
    if side.is_multiple_of(2) || side < 3 {
        return Err(Error::InvalidWindow(side));
    }
    Ok(features_from_window(patch.pixels(), side, 0, 0, side))
}

/// Extracts the seven features of every pixel, row-major, with the
/// image reflect-padded by `patch_side / 2`.
pub fn extract_features(image: &GrayRaster, patch_side: usize) -> Result<Vec<Vec<f64>>> {
    if patch_side.is_multiple_of(2) || patch_side < 3 {
        return Err(Error::InvalidWindow(patch_side));
    }
    let margin = patch_side / 2;
    let padded = image.pad_reflect(margin)?;
    let (w, h) = (image.width(), image.height());
    let pw = padded.width();
    let ppx = padded.pixels();

    let rows: Vec<Vec<Vec<f64>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    features_from_window(ppx, pw, x, y, patch_side)
                        .to_array()
                        .to_vec()
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Extracts one labeled row per pixel, row-major. The image is
/// reflect-padded by `patch_side / 2`; labels are read from the mask
/// (255 → 1).
pub fn extract_dataset(
    image: &GrayRaster,
    mask: &BinaryMask,
    patch_side: usize,
) -> Result<LabeledDataset> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs mask {}x{}",
            image.width(),
            image.height(),
            mask.width(),
            mask.height()
        )));
    }
    let features = extract_features(image, patch_side)?;
    let labels = mask
        .pixels()
        .iter()
        .map(|&p| u8::from(p == MASK_FOREGROUND))
        .collect();
    LabeledDataset::new(
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        features,
        labels,
    )
}

/// Downsamples the majority class uniformly without replacement so both
/// classes have equal counts. Minority rows are all retained; surviving
/// rows keep their original relative order.
pub fn balance_dataset(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let (n0, n1) = ds.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::EmptyClass(if n0 == 0 { 0 } else { 1 }));
    }
    if n0 == n1 {
        let mut out = ds.clone();
        out.balanced = true;
        return Ok(out);
    }
    let (majority_label, keep) = if n0 > n1 { (0u8, n1) } else { (1u8, n0) };
    let majority_rows: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == majority_label)
        .collect();
    let mut rng = SplitMix64::new(seed);
    let chosen = rng.sample_indices(majority_rows.len(), keep);
    let mut keep_row: Vec<bool> = ds.labels.iter().map(|&l| l != majority_label).collect();
    for &j in &chosen {
        keep_row[majority_rows[j]] = true;
    }
    let indices: Vec<usize> = (0..ds.len()).filter(|&i| keep_row[i]).collect();
    let mut out = ds.select(&indices);
    out.balanced = true;
    Ok(out)
}

/// Round-half-up share of `n` rows that go to the training side.
fn train_take(n: usize, fraction: f64) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

/// Seeded shuffle followed by a (optionally stratified) partition.
pub fn split_dataset(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "train_fraction must lie in (0,1), got {}",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = SplitMix64::new(spec.seed);
    rng.shuffle(&mut order);

    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    if spec.stratified {
        let (n0, n1) = ds.class_counts();
        let take = [
            train_take(n0, spec.train_fraction),
            train_take(n1, spec.train_fraction),
        ];
        let mut seen = [0usize; 2];
        for &i in &order {
            let c = ds.labels[i] as usize;
            if seen[c] < take[c] {
                train_idx.push(i);
                seen[c] += 1;
            } else {
                test_idx.push(i);
            }
        }
    } else {
        let take = train_take(ds.len(), spec.train_fraction);
        train_idx.extend_from_slice(&order[..take]);
        test_idx.extend_from_slice(&order[take..]);
    }
    Ok((ds.select(&train_idx), ds.select(&test_idx)))
}

/// Fits z-score statistics on `train` and applies them to both sets.
/// A feature whose training column is constant passes through unscaled
/// and is recorded with std 0.
pub fn standardize(
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<(LabeledDataset, LabeledDataset, Standardization)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test.feature_names != train.feature_names {
        return Err(Error::DimensionMismatch(
            "train and test feature columns differ".into(),
        ));
    }
    let width = train.feature_names.len();
    let n = train.len() as f64;
    let mut means = vec![0.0f64; width];
    let mut stds = vec![0.0f64; width];
    for j in 0..width {
        let first = train.features[0][j];
        if train.features.iter().all(|row| row[j] == first) {
            means[j] = first;
            stds[j] = 0.0;
            continue;
        }
        let mean = train.features.iter().map(|row| row[j]).sum::<f64>() / n;
        let var = train
            .features
            .iter()
            .map(|row| (row[j] - mean) * (row[j] - mean))
            .sum::<f64>()
            / n;
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    let stats = Standardization { means, stds };
    let apply = |ds: &LabeledDataset| -> Result<LabeledDataset> {
        let mut out = ds.clone();
        for row in &mut out.features {
            *row = stats.transform_row(row)?;
        }
        out.standardization = Some(stats.clone());
        Ok(out)
    };
    Ok((apply(train)?, apply(test)?, stats))
}

/// Normalized per-class value histograms of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub name: String,
    /// Observed range across both classes.
    pub lo: f64,
    pub hi: f64,
    pub class0: Vec<f64>,
    pub class1: Vec<f64>,
}

/// Histograms for every feature of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistograms {
    pub bins: usize,
    pub features: Vec<FeatureHistogram>,
}

impl FeatureHistograms {
    /// CSV rows: feature, bin index, bin center, class-0 mass, class-1
    /// mass.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,bin,bin_center,class0,class1\n");
        for f in &self.features {
            let span = f.hi - f.lo;
            for b in 0..self.bins {
                let center = if span == 0.0 {
                    f.lo
                } else {
                    f.lo + span * (b as f64 + 0.5) / self.bins as f64
                };
                out.push_str(&format!(
                    "{},{b},{center:.8e},{:.8e},{:.8e}\n",
                    f.name, f.class0[b], f.class1[b]
                ));
            }
        }
        out
    }
}

/// Builds per-feature, per-class normalized histograms over each
/// feature's observed range. Each non-empty class's histogram sums to 1.
pub fn feature_histograms(ds: &LabeledDataset, bins: usize) -> Result<FeatureHistograms> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bins == 0 {
        return Err(Error::InvalidHyperparameter(
            "histogram needs at least 1 bin".into(),
        ));
    }
    let (n0, n1) = ds.class_counts();
    let mut features = Vec::with_capacity(ds.feature_names.len());
    for (j, name) in ds.feature_names.iter().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &ds.features {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        let span = hi - lo;
        let mut class0 = vec![0.0f64; bins];
        let mut class1 = vec![0.0f64; bins];
        for (row, &label) in ds.features.iter().zip(&ds.labels) {
            let b = if span == 0.0 {
                0
            } else {
                (((row[j] - lo) / span) * bins as f64)
                    .floor()
                    .min(bins as f64 - 1.0) as usize
            };
            if label == 0 {
                class0[b] += 1.0;
            } else {
                class1[b] += 1.0;
            }
        }
        if n0 > 0 {
            for v in &mut class0 {
                *v /= n0 as f64;
            }
        }
        if n1 > 0 {
            for v in &mut class1 {
                *v /= n1 as f64;
            }
        }
        features.push(FeatureHistogram {
            name: name.clone(),
            lo,
            hi,
            class0,
            class1,
        });
    }
    Ok(FeatureHistograms { bins, features })
}

/// Removes one feature column, preserving the order of the rest.
pub fn drop_feature(ds: &LabeledDataset, name: &str) -> Result<LabeledDataset> {
    let j = ds
        .feature_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
    let mut out = ds.clone();
    out.feature_names.remove(j);
    for row in &mut out.features {
        row.remove(j);
    }
    if let Some(st) = &mut out.standardization {
        st.means.remove(j);
        st.stds.remove(j);
    }
    Ok(out)
}
