//! End-to-end pipeline: from one polar frame to trained classifiers,
//! masks, plot data, and a machine-readable run report.
//!
//! Stages run in a fixed order, each timed and named; a failure aborts
//! the run but still writes the report with a `failed` marker naming
//! the stage, alongside whatever artifacts were already produced. With
//! timings set aside, every artifact is a pure function of the input
//! bytes and the configuration, regardless of worker count.
//!
//! The guidewire-blended frame is saved for display only: the band
//! deletion narrows the frame, so it cannot be paired with any mask or
//! dataset derived from the full-width frame — exclusion from training
//! is enforced by the shapes, not by convention.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{
    balance_dataset, drop_feature, extract_dataset, feature_histograms, split_dataset, standardize,
    LabeledDataset, SplitSpec,
};
use crate::guidewire::{default_band_width, detect_shadow_band, remove_shadow, ShadowBand};
use crate::models::metrics::{evaluate, pixel_agreement, MetricsReport};
use crate::models::pca::{pca_fit, pca_project};
use crate::models::svm::default_gamma;
use crate::models::{predict_logreg, predict_svm, train_logreg, train_svm, ModelFile};
use crate::noise::{assess_noise, median_filter, NoiseReport, NoiseThresholds};
use crate::parallel::run_in_pool;
use crate::raster::{BinaryMask, GrayRaster};
use crate::segmentation::{
    apply_threshold, kmeans_segment, morph_refine, otsu_threshold, KMeansTrace, OtsuResult,
};
use crate::transform::{polar_to_cartesian, PolarGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    /// Rows extracted from the full image.
    pub total: usize,
    pub balanced: usize,
    pub train: usize,
    pub test: usize,
}

/// Condensed view of a K-means run; the full per-iteration trace goes
/// to `inertia_trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_inertia: f64,
    pub centroids: (f64, f64),
}

impl KMeansSummary {
    fn from_trace(trace: &KMeansTrace) -> Self {
        Self {
            iterations: trace.iterations,
            converged: trace.converged,
            final_inertia: trace.inertia_per_iter.last().copied().unwrap_or(0.0),
            centroids: trace
                .centroids_per_iter
                .last()
                .copied()
                .unwrap_or((0.0, 0.0)),
        }
    }
}

/// Everything a run produced, written as `run_report.json`.
///
/// Stage outputs are optional because a failed run reports only the
/// stages it reached. Every path in `artifacts` exists on disk when the
/// report is written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunReport {
    /// `None` on success; otherwise the failing stage and cause.
    pub failed: Option<String>,
    pub timings: Vec<StageTiming>,
    pub noise: Option<NoiseReport>,
    /// Whether the median filter ran (the noise flag tripped).
    pub median_applied: bool,
    pub shadow: Option<ShadowBand>,
    pub otsu: Option<OtsuResult>,
    pub kmeans: Option<KMeansSummary>,
    pub dataset: Option<DatasetSizes>,
    pub logreg_metrics: Option<MetricsReport>,
    pub svm_metrics: Option<MetricsReport>,
    /// Population variance captured by the two principal components.
    pub pca_explained_variance: Option<Vec<f64>>,
    /// Percentage of pixels on which the whole-image SVM mask and the
    /// K-means mask agree.
    pub mask_agreement_percent: Option<f64>,
    /// Artifact name → file name for every file the run wrote, relative
    /// to the directory holding this report, so the whole output
    /// directory can be moved or compared as a unit.
    pub artifacts: BTreeMap<String, String>,
}

impl RunReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes infallibly")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

struct Ctx<'a> {
    config: &'a PipelineConfig,
    out_dir: &'a Path,
    report: RunReport,
}

impl Ctx<'_> {
    fn stage<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.report.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out.map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        })
    }

    // Artifacts are recorded by name, relative to the directory the
    // report itself lands in. Embedding absolute paths would make the
    // report depend on where the caller pointed the run, breaking
    // byte-identity between otherwise equal runs.
    fn record(&mut self, key: &str, file_name: &str) {
        self.report
            .artifacts
            .insert(key.to_string(), file_name.to_string());
    }

    fn save_raster(&mut self, key: &str, file_name: &str, raster: &GrayRaster) -> Result<()> {
        raster.save_pgm(self.out_dir.join(file_name))?;
        self.record(key, file_name);
        Ok(())
    }

    fn save_mask(&mut self, key: &str, file_name: &str, mask: &BinaryMask) -> Result<()> {
        mask.save_pgm(self.out_dir.join(file_name))?;
        self.record(key, file_name);
        Ok(())
    }

    fn save_text(&mut self, key: &str, file_name: &str, text: &str) -> Result<()> {
        let path = self.out_dir.join(file_name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.record(key, file_name);
        Ok(())
    }
}

/// Runs the whole pipeline on one polar PGM frame.
///
/// On failure the partial report (with its `failed` marker) is still
/// written before the error propagates.
pub fn run_pipeline(
    input: impl AsRef<Path>,
    config: &PipelineConfig,
    out_dir: impl AsRef<Path>,
) -> Result<RunReport> {
    let input = input.as_ref();
    let out_dir = out_dir.as_ref();
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    run_in_pool(config.workers, || {
        let mut ctx = Ctx {
            config,
            out_dir,
            report: RunReport::default(),
        };
        match drive(&mut ctx, input) {
            Ok(()) => {
                write_report(out_dir, &ctx.report)?;
                Ok(ctx.report)
            }
            Err(e) => {
                ctx.report.failed = Some(e.to_string());
                // Best effort: the error the caller sees is the stage
                // failure, not a secondary report-write problem.
                let _ = write_report(out_dir, &ctx.report);
                Err(e)
            }
        }
    })?
}

fn write_report(out_dir: &Path, report: &RunReport) -> Result<()> {
    let path = out_dir.join("run_report.json");
    fs::write(&path, report.to_json_pretty() + "\n").map_err(|e| Error::io(&path, e))
}

fn drive(ctx: &mut Ctx, input: &Path) -> Result<()> {
    let cfg = ctx.config;

    let polar_in = ctx.stage("load", |_| GrayRaster::load_pgm(input))?;

    let noise = ctx.stage("noise", |_| {
        assess_noise(
            &polar_in,
            &NoiseThresholds {
                tau_min: cfg.tau_min,
                tau_max: cfg.tau_max,
                spr_threshold: cfg.spr_threshold,
                variance_window: cfg.variance_window,
            },
        )
    })?;
    ctx.report.noise = Some(noise.clone());
    ctx.report.median_applied = noise.salt_pepper_flag;

    let denoised = ctx.stage("denoise", |c| {
        let out = if noise.salt_pepper_flag {
            median_filter(&polar_in, cfg.median_k)?
        } else {
            polar_in.clone()
        };
        c.save_raster("denoised", "denoised.pgm", &out)?;
        Ok(out)
    })?;

    ctx.stage("guidewire", |c| {
        let band_width = if cfg.band_width == 0 {
            default_band_width(denoised.width())
        } else {
            cfg.band_width
        };
        let band = detect_shadow_band(&denoised, band_width)?;
        let blended = remove_shadow(&denoised, &band, cfg.blend_width)?;
        c.report.shadow = Some(band);
        // Display only: the narrowed frame cannot pair with full-width
        // masks, so it is structurally out of the training path.
        c.save_raster("guidewire_removed", "guidewire_removed.pgm", &blended)
    })?;

    let cartesian = ctx.stage("remap", |c| {
        let geom = PolarGeometry::for_polar(&denoised, cfg.fill_value)?;
        let cart = polar_to_cartesian(&denoised, &geom)?;
        c.save_raster("cartesian", "cartesian.pgm", &cart)?;
        Ok(cart)
    })?;

    ctx.stage("otsu", |c| {
        let otsu = otsu_threshold(&cartesian)?;
        let mask = apply_threshold(&cartesian, otsu.threshold);
        c.report.otsu = Some(otsu);
        c.save_mask("otsu_mask", "otsu_mask.pgm", &mask)
    })?;

    let kmeans_mask = ctx.stage("kmeans", |c| {
        let (raw, trace) = kmeans_segment(&cartesian, cfg.k, cfg.kmeans_tol, cfg.kmeans_max_iter)?;
        let refined = morph_refine(&raw, cfg.morph_radius)?;
        c.report.kmeans = Some(KMeansSummary::from_trace(&trace));
        c.save_text("inertia_trace", "inertia_trace.csv", &trace_csv(&trace))?;
        c.save_mask("kmeans_mask", "kmeans_mask.pgm", &refined)?;
        Ok(refined)
    })?;

    let (total_rows, balanced) = ctx.stage("features", |c| {
        let mut ds = extract_dataset(&cartesian, &kmeans_mask, cfg.patch)?;
        let total = ds.len();
        for name in &cfg.drop_features {
            ds = drop_feature(&ds, name)?;
        }
        let balanced = balance_dataset(&ds, cfg.seed)?;
        c.save_text(
            "features_balanced",
            "features_balanced.csv",
            &balanced.to_csv(),
        )?;
        let hist = feature_histograms(&balanced, cfg.histogram_bins)?;
        c.save_text(
            "feature_histograms",
            "feature_histograms.csv",
            &hist.to_csv(),
        )?;
        Ok((total, balanced))
    })?;

    let (train_set, test_set, standardization) = ctx.stage("split", |c| {
        let spec = SplitSpec {
            train_fraction: cfg.train_fraction,
            seed: cfg.seed,
            stratified: true,
        };
        let (train_raw, test_raw) = split_dataset(&balanced, &spec)?;
        let (train_set, test_set, st) = standardize(&train_raw, &test_raw)?;
        c.report.dataset = Some(DatasetSizes {
            total: total_rows,
            balanced: balanced.len(),
            train: train_set.len(),
            test: test_set.len(),
        });
        Ok((train_set, test_set, st))
    })?;

    let logreg_file = ctx.stage("train-logreg", |c| {
        let model = train_logreg(
            &train_set,
            cfg.lr_learning_rate,
            cfg.lr_epochs,
            cfg.lr_l2,
            cfg.seed,
        )?;
        let file = ModelFile::for_logreg(
            model,
            train_set.feature_names.clone(),
            Some(standardization.clone()),
        );
        file.save(c.out_dir.join("model_logreg.json"))?;
        c.record("model_logreg", "model_logreg.json");
        Ok(file)
    })?;

    let svm_file = ctx.stage("train-svm", |c| {
        let gamma = cfg.svm_gamma.unwrap_or_else(|| default_gamma(&train_set));
        let model = train_svm(
            &train_set,
            cfg.svm_c,
            gamma,
            cfg.svm_tol,
            cfg.svm_max_passes,
            cfg.seed,
        )?;
        let file = ModelFile::for_svm(
            model,
            train_set.feature_names.clone(),
            Some(standardization.clone()),
        );
        file.save(c.out_dir.join("model_svm.json"))?;
        c.record("model_svm", "model_svm.json");
        Ok(file)
    })?;

    ctx.stage("evaluate", |c| {
        // Test rows are already standardized; evaluate with the bare
        // predictors rather than the model files, which would apply the
        // transform a second time.
        let crate::models::ModelParams::LogReg(lr) = &logreg_file.parameters else {
            unreachable!("built as logreg above");
        };
        let crate::models::ModelParams::Svm(svm) = &svm_file.parameters else {
            unreachable!("built as svm above");
        };
        let mut lr_pred = Vec::with_capacity(test_set.len());
        let mut svm_pred = Vec::with_capacity(test_set.len());
        for row in &test_set.features {
            lr_pred.push(predict_logreg(lr, row)?.0);
            svm_pred.push(predict_svm(svm, row)?);
        }
        c.report.logreg_metrics = Some(evaluate(&test_set.labels, &lr_pred)?);
        c.report.svm_metrics = Some(evaluate(&test_set.labels, &svm_pred)?);
        Ok(())
    })?;

    ctx.stage("pca", |c| {
        let rows: Vec<Vec<f64>> = balanced
            .features
            .iter()
            .map(|r| standardization.transform_row(r))
            .collect::<Result<_>>()?;
        let model = pca_fit(&rows)?;
        let projected = pca_project(&model, &rows)?;
        c.report.pca_explained_variance = Some(model.explained_variance.clone());
        c.save_text(
            "pca_projection",
            "pca_projection.csv",
            &projection_csv(&projected, &balanced),
        )
    })?;

    ctx.stage("predict", |c| {
        let predicted = svm_file.predict_image(&cartesian, cfg.patch)?;
        c.save_mask("predicted_mask", "predicted_mask.pgm", &predicted)?;
        let agreement = pixel_agreement(&kmeans_mask, &predicted)?;
        c.report.mask_agreement_percent = Some(100.0 * agreement);
        Ok(())
    })?;

    Ok(())
}

fn trace_csv(trace: &KMeansTrace) -> String {
    let mut out = String::from("iteration,inertia,centroid_lo,centroid_hi\n");
    for (i, (inertia, centroids)) in trace
        .inertia_per_iter
        .iter()
        .zip(&trace.centroids_per_iter)
        .enumerate()
    {
        out.push_str(&format!(
            "{},{:.8e},{:.8e},{:.8e}\n",
            i + 1,
            inertia,
            centroids.0,
            centroids.1
        ));
    }
    out
}

fn projection_csv(points: &[[f64; 2]], ds: &LabeledDataset) -> String {
    let mut out = String::from("pc1,pc2,label\n");
    for (p, &label) in points.iter().zip(&ds.labels) {
        out.push_str(&format!("{:.8e},{:.8e},{label}\n", p[0], p[1]));
    }
    out
}
