//! Classifiers, PCA, metrics, and the on-disk model format.
//!
//! A trained classifier is persisted as a versioned JSON document
//! carrying everything prediction needs: the feature columns it was
//! trained on, the standardization fitted on its training set, and the
//! model parameters themselves. Loading such a file and handing it a
//! raw image reproduces the training-time preprocessing exactly.

pub mod logreg;
pub mod metrics;
pub mod pca;
pub mod svm;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, Standardization, FEATURE_NAMES};
use crate::raster::{BinaryMask, GrayRaster, MASK_FOREGROUND};

pub use logreg::{predict_logreg, train_logreg, LogRegModel};
pub use metrics::{dice, evaluate, pixel_agreement, ConfusionMatrix, MetricsReport};
pub use pca::{pca_fit, pca_project, PcaModel};
pub use svm::{default_gamma, predict_svm, train_svm, SvmModel};

/// Current model-file schema version.
pub const MODEL_FILE_VERSION: u32 = 1;

/// Model parameters of either classifier. The variants' field sets are
/// disjoint, so the untagged representation is unambiguous; the
/// `type` field of [`ModelFile`] is validated against the variant on
/// load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelParams {
    LogReg(LogRegModel),
    Svm(SvmModel),
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "type")]
    pub model_type: String,
    pub version: u32,
    /// Feature columns the model consumes, in order.
    pub feature_names: Vec<String>,
    /// Transform fitted on the training set, applied before prediction.
    pub standardization: Option<Standardization>,
    pub parameters: ModelParams,
}

impl ModelFile {
    pub fn for_logreg(
        model: LogRegModel,
        feature_names: Vec<String>,
        standardization: Option<Standardization>,
    ) -> Self {
        Self {
            model_type: "logreg".into(),
            version: MODEL_FILE_VERSION,
            feature_names,
            standardization,
            parameters: ModelParams::LogReg(model),
        }
    }

    pub fn for_svm(
        model: SvmModel,
        feature_names: Vec<String>,
        standardization: Option<Standardization>,
    ) -> Self {
        Self {
            model_type: "svm".into(),
            version: MODEL_FILE_VERSION,
            feature_names,
            standardization,
            parameters: ModelParams::Svm(model),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.version != MODEL_FILE_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model version {} (expected {MODEL_FILE_VERSION})",
                self.version
            )));
        }
        let expected = match &self.parameters {
            ModelParams::LogReg(_) => "logreg",
            ModelParams::Svm(_) => "svm",
        };
        if self.model_type != expected {
            return Err(Error::InvalidModel(format!(
                "type field {:?} does not match {expected} parameters",
                self.model_type
            )));
        }
        let width = self.feature_names.len();
        let param_width = match &self.parameters {
            ModelParams::LogReg(m) => m.weights.len(),
            ModelParams::Svm(m) => m
                .support_vectors
                .first()
                .map(|sv| sv.len())
                .unwrap_or(width),
        };
        if param_width != width {
            return Err(Error::InvalidModel(format!(
                "{width} feature names but parameters expect {param_width} inputs"
            )));
        }
        if let Some(st) = &self.standardization {
            if st.means.len() != width || st.stds.len() != width {
                return Err(Error::InvalidModel(format!(
                    "standardization width {} does not match {width} features",
                    st.means.len()
                )));
            }
        }
        Ok(())
    }

    /// Predicts one raw (unstandardized, full-width) feature row.
    /// `full_names` describes the row's columns; the model picks the
    /// columns it was trained on and applies its own standardization.
    pub fn predict_raw_row(&self, row: &[f64], full_names: &[String]) -> Result<u8> {
        if row.len() != full_names.len() {
            return Err(Error::WidthMismatch {
                expected: full_names.len(),
                got: row.len(),
            });
        }
        let mut selected = Vec::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            let idx = full_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            selected.push(row[idx]);
        }
        let transformed = match &self.standardization {
            Some(st) => st.transform_row(&selected)?,
            None => selected,
        };
        match &self.parameters {
            ModelParams::LogReg(m) => Ok(predict_logreg(m, &transformed)?.0),
            ModelParams::Svm(m) => predict_svm(m, &transformed),
        }
    }

    /// Pixel-wise prediction over a whole image: extracts the standard
    /// feature set per pixel and classifies each one.
    pub fn predict_image(&self, image: &GrayRaster, patch_side: usize) -> Result<BinaryMask> {
        let rows = features::extract_features(image, patch_side)?;
        let full_names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        let labels: Vec<u8> = rows
            .par_iter()
            .map(|row| self.predict_raw_row(row, &full_names))
            .collect::<Result<Vec<u8>>>()?;
        let pixels = labels
            .iter()
            .map(|&l| if l == 1 { MASK_FOREGROUND } else { 0 })
            .collect();
        BinaryMask::new(image.width(), image.height(), pixels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::InvalidModel(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }
}
