//! Pipeline configuration: one flat document covering every stage.
//!
//! The config round-trips as flat JSON. Every field has a default, so a
//! partial file is valid; unknown keys are rejected so typos surface as
//! parse errors instead of silently falling back to defaults.
//! [`PipelineConfig::validate`] checks each field against the
//! preconditions of the module that consumes it and names the offending
//! field in its message.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Intensities at or below this count toward the salt-and-pepper
    /// ratio.
    pub tau_min: u8,
    /// Intensities at or above this count toward the salt-and-pepper
    /// ratio.
    pub tau_max: u8,
    /// Median filtering triggers when the measured ratio exceeds this.
    pub spr_threshold: f64,
    /// Window side of the local variance map (odd, ≥ 3).
    pub variance_window: usize,
    /// Median filter window side (odd, ≥ 3).
    pub median_k: usize,
    /// Shadow band width in columns; 0 picks ⌈width/20⌉ per image.
    pub band_width: usize,
    /// Cross-fade half-width after band deletion; 0 disables blending.
    pub blend_width: usize,
    /// Intensity written outside the scan disk in Cartesian view.
    pub fill_value: u8,
    /// Number of K-means clusters (the segmenter supports exactly 2).
    pub k: usize,
    /// Centroid-movement threshold that ends K-means iteration.
    pub kmeans_tol: f64,
    pub kmeans_max_iter: usize,
    /// Radius of the square structuring element for mask cleanup.
    pub morph_radius: usize,
    /// Feature patch side (odd, ≥ 3).
    pub patch: usize,
    /// Feature columns to remove before training.
    pub drop_features: Vec<String>,
    /// Fraction of the balanced set used for training.
    pub train_fraction: f64,
    /// Seed for balancing, splitting, and SMO partner selection.
    pub seed: u64,
    pub lr_learning_rate: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
    pub svm_c: f64,
    /// RBF width; absent means 1/(d·mean feature variance).
    pub svm_gamma: Option<f64>,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    /// Bin count of the per-feature class histograms.
    pub histogram_bins: usize,
    /// Worker threads; 0 uses the library default. Must not affect any
    /// output byte.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau_min: 5,
            tau_max: 250,
            spr_threshold: 0.75,
            variance_window: 11,
            median_k: 3,
            band_width: 0,
            blend_width: 4,
            fill_value: 0,
            k: 2,
            kmeans_tol: 0.5,
            kmeans_max_iter: 50,
            morph_radius: 1,
            patch: 11,
            drop_features: Vec::new(),
            train_fraction: 0.8,
            seed: 42,
            lr_learning_rate: 0.1,
            lr_epochs: 2000,
            lr_l2: 1e-4,
            svm_c: 1.0,
            svm_gamma: None,
            svm_tol: 1e-3,
            svm_max_passes: 10,
            histogram_bins: 32,
            workers: 0,
        }
    }
}

fn odd_window(name: &str, value: usize) -> Result<()> {
    if value.is_multiple_of(2) || value < 3 {
        return Err(Error::InvalidConfig(format!(
            "{name}: window side must be odd and >= 3, got {value}"
        )));
    }
    Ok(())
}

fn positive_finite(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "{name}: must be finite and positive, got {value}"
        )));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_min >= self.tau_max {
            return Err(Error::InvalidConfig(format!(
                "tau_min/tau_max: need tau_min < tau_max, got {} >= {}",
                self.tau_min, self.tau_max
            )));
        }
        if !(self.spr_threshold.is_finite() && (0.0..=1.0).contains(&self.spr_threshold)) {
            return Err(Error::InvalidConfig(format!(
                "spr_threshold: must lie in [0, 1], got {}",
                self.spr_threshold
            )));
        }
        odd_window("variance_window", self.variance_window)?;
        odd_window("median_k", self.median_k)?;
        odd_window("patch", self.patch)?;
        if self.k != 2 {
            return Err(Error::InvalidConfig(format!(
                "k: the segmenter supports exactly 2 clusters, got {}",
                self.k
            )));
        }
        positive_finite("kmeans_tol", self.kmeans_tol)?;
        if self.kmeans_max_iter == 0 {
            return Err(Error::InvalidConfig("kmeans_max_iter: must be >= 1".into()));
        }
        if self.morph_radius == 0 {
            return Err(Error::InvalidConfig("morph_radius: must be >= 1".into()));
        }
        for name in &self.drop_features {
            if !FEATURE_NAMES.contains(&name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "drop_features: unknown feature {name:?}"
                )));
            }
        }
        let mut sorted = self.drop_features.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.drop_features.len() {
            return Err(Error::InvalidConfig(
                "drop_features: duplicate entries".into(),
            ));
        }
        if sorted.len() >= FEATURE_NAMES.len() {
            return Err(Error::InvalidConfig(
                "drop_features: at least one feature must remain".into(),
            ));
        }
        if !(self.train_fraction.is_finite()
            && self.train_fraction > 0.0
            && self.train_fraction < 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "train_fraction: must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        positive_finite("lr_learning_rate", self.lr_learning_rate)?;
        if self.lr_epochs == 0 {
            return Err(Error::InvalidConfig("lr_epochs: must be >= 1".into()));
        }
        if !(self.lr_l2.is_finite() && self.lr_l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lr_l2: must be finite and non-negative, got {}",
                self.lr_l2
            )));
        }
        positive_finite("svm_c", self.svm_c)?;
        if let Some(g) = self.svm_gamma {
            positive_finite("svm_gamma", g)?;
        }
        positive_finite("svm_tol", self.svm_tol)?;
        if self.svm_max_passes == 0 {
            return Err(Error::InvalidConfig("svm_max_passes: must be >= 1".into()));
        }
        if self.histogram_bins == 0 {
            return Err(Error::InvalidConfig("histogram_bins: must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes infallibly")
    }
}
