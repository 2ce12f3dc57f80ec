//! `octseg` — OCT frame processing from the command line.
//!
//! Every subcommand wraps one library operation with file-path
//! arguments; `pipeline` chains them all. Reports and summaries print
//! to stdout as JSON so runs can be scripted.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
//! failure (an iteration cap was exceeded).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use octseg::config::PipelineConfig;
use octseg::error::Error;
use octseg::features::{
    balance_dataset, drop_feature, extract_dataset, feature_histograms, split_dataset, standardize,
    LabeledDataset, SplitSpec,
};
use octseg::guidewire::{default_band_width, detect_shadow_band, remove_shadow};
use octseg::models::{
    default_gamma, dice, evaluate, pixel_agreement, predict_logreg, predict_svm, train_logreg,
    train_svm, ModelFile, ModelParams,
};
use octseg::noise::{assess_noise, median_filter, NoiseThresholds};
use octseg::phantom::{generate_phantom, PhantomSpec};
use octseg::pipeline::run_pipeline;
use octseg::raster::MASK_FOREGROUND;
use octseg::segmentation::{apply_threshold, kmeans_segment, morph_refine, otsu_threshold};
use octseg::transform::{cartesian_to_polar, polar_to_cartesian, PolarGeometry};
use octseg::{BinaryMask, GrayRaster, Result};

#[derive(Parser)]
#[command(
    name = "octseg",
    version,
    about = "Vessel segmentation and pixel classification for intracoronary OCT frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assess impulse noise; median-filter the frame when flagged.
    Denoise(DenoiseArgs),
    /// Detect the guidewire shadow band and remove it by shift-and-blend.
    GwRemove(GwRemoveArgs),
    /// Remap a polar frame to Cartesian view (or back with --inverse).
    Remap(RemapArgs),
    /// Segment an image into a binary vessel mask.
    Segment(SegmentArgs),
    /// Extract per-pixel texture features labeled by a mask.
    Features(FeaturesArgs),
    /// Train a classifier on a feature CSV and report test metrics.
    Train(TrainArgs),
    /// Apply a saved model pixel-wise to a whole image.
    Predict(PredictArgs),
    /// Compare a predicted mask against a reference mask.
    Metrics(MetricsArgs),
    /// Generate a synthetic polar frame with ground truth.
    Phantom(PhantomArgs),
    /// Run the full pipeline and write all artifacts to a directory.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct DenoiseArgs {
    /// Input PGM image.
    #[arg(long)]
    input: PathBuf,
    /// Output PGM image (filtered, or a copy when not flagged).
    #[arg(long)]
    output: PathBuf,
    /// Median window side (odd, >= 3).
    #[arg(long, default_value_t = 3)]
    median_k: usize,
    #[arg(long, default_value_t = 5)]
    tau_min: u8,
    #[arg(long, default_value_t = 250)]
    tau_max: u8,
    /// Filter when the measured ratio strictly exceeds this.
    #[arg(long, default_value_t = 0.75)]
    spr_threshold: f64,
    /// Window side of the local variance map (odd, >= 3).
    #[arg(long, default_value_t = 11)]
    variance_window: usize,
    /// Apply the median filter even when the flag does not trip.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct GwRemoveArgs {
    /// Input polar PGM image.
    #[arg(long)]
    input: PathBuf,
    /// Output PGM image, narrower by the removed band.
    #[arg(long)]
    output: PathBuf,
    /// Shadow band width in columns; 0 picks ceil(width/20).
    #[arg(long, default_value_t = 0)]
    band_width: usize,
    /// Cross-fade half-width at the seam; 0 disables blending.
    #[arg(long, default_value_t = 4)]
    blend_width: usize,
}

#[derive(Args)]
struct RemapArgs {
    /// Input PGM image (polar, or Cartesian with --inverse).
    #[arg(long)]
    input: PathBuf,
    /// Output PGM image.
    #[arg(long)]
    output: PathBuf,
    /// Intensity written outside the scan disk.
    #[arg(long, default_value_t = 0)]
    fill: u8,
    /// Convert Cartesian back to polar instead.
    #[arg(long)]
    inverse: bool,
    /// Polar width (A-line count) for --inverse.
    #[arg(long, required_if_eq("inverse", "true"))]
    n_angles: Option<usize>,
    /// Polar height for --inverse; defaults to half the Cartesian side.
    #[arg(long)]
    n_radii: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegmentMethod {
    Kmeans,
    Otsu,
}

#[derive(Args)]
struct SegmentArgs {
    /// Input PGM image.
    #[arg(long)]
    input: PathBuf,
    /// Output PGM mask (vessel = 255).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = SegmentMethod::Kmeans)]
    method: SegmentMethod,
    /// Cluster count (the segmenter supports exactly 2).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Centroid-movement threshold that ends iteration.
    #[arg(long, default_value_t = 0.5)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Opening/closing radius applied to the mask; 0 (the default)
    /// leaves the raw clustering untouched.
    #[arg(long, default_value_t = 0)]
    morph_radius: usize,
    /// Write the per-iteration K-means trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input PGM image.
    #[arg(long)]
    image: PathBuf,
    /// Label mask PGM (vessel = 255), same dimensions as the image.
    #[arg(long)]
    mask: PathBuf,
    /// Output CSV of feature rows.
    #[arg(long)]
    output: PathBuf,
    /// Patch side (odd, >= 3).
    #[arg(long, default_value_t = 11)]
    patch: usize,
    /// Downsample the majority class to the minority count.
    #[arg(long)]
    balance: bool,
    /// Seed for the balancing draw.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Drop a feature column before writing (repeatable).
    #[arg(long = "drop", value_name = "FEATURE")]
    drop: Vec<String>,
    /// Write per-feature class histograms CSV here.
    #[arg(long)]
    histograms: Option<PathBuf>,
    /// Bin count for --histograms.
    #[arg(long, default_value_t = 32)]
    bins: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Logreg,
    Svm,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature CSV produced by the features subcommand.
    #[arg(long)]
    features: PathBuf,
    /// Where to write the trained model JSON.
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Seed for the split (and SMO partner choice).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Gradient-descent step size (logreg).
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    /// L2 penalty on the weights (logreg).
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    /// Soft-margin penalty (svm).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// RBF width; defaults to 1/(d · mean feature variance).
    #[arg(long)]
    gamma: Option<f64>,
    /// KKT tolerance (svm).
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Consecutive quiet sweeps that end SMO.
    #[arg(long, default_value_t = 10)]
    max_passes: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Input PGM image.
    #[arg(long)]
    image: PathBuf,
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Output PGM mask.
    #[arg(long)]
    output: PathBuf,
    /// Patch side used for feature extraction.
    #[arg(long, default_value_t = 11)]
    patch: usize,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reference mask PGM.
    #[arg(long)]
    truth: PathBuf,
    /// Predicted mask PGM.
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    /// Output PGM for the (possibly noisy) frame.
    #[arg(long)]
    out: PathBuf,
    /// Output PGM for the ground-truth mask.
    #[arg(long)]
    truth: PathBuf,
    /// JSON sidecar recording the spec; defaults to <out>.json.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Start from a spec JSON instead of the defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_angles: Option<usize>,
    #[arg(long)]
    n_radii: Option<usize>,
    #[arg(long)]
    lumen_radius_base: Option<f64>,
    #[arg(long)]
    lumen_eccentricity: Option<f64>,
    #[arg(long)]
    wall_thickness: Option<f64>,
    #[arg(long)]
    wall_intensity: Option<u8>,
    #[arg(long)]
    background_intensity: Option<u8>,
    #[arg(long)]
    speckle_sigma: Option<f64>,
    #[arg(long)]
    salt_pepper_fraction: Option<f64>,
    #[arg(long)]
    shadow_center_col: Option<usize>,
    #[arg(long)]
    shadow_width: Option<usize>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Input polar PGM frame.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving every artifact and the run report.
    #[arg(long)]
    out_dir: PathBuf,
    /// Flat JSON config; the flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tau_min: Option<u8>,
    #[arg(long)]
    tau_max: Option<u8>,
    #[arg(long)]
    spr_threshold: Option<f64>,
    #[arg(long)]
    variance_window: Option<usize>,
    #[arg(long)]
    median_k: Option<usize>,
    #[arg(long)]
    band_width: Option<usize>,
    #[arg(long)]
    blend_width: Option<usize>,
    #[arg(long)]
    fill_value: Option<u8>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kmeans_tol: Option<f64>,
    #[arg(long)]
    kmeans_max_iter: Option<usize>,
    #[arg(long)]
    morph_radius: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    /// Drop a feature before training (repeatable; replaces the
    /// config-file list).
    #[arg(long = "drop-feature", value_name = "FEATURE")]
    drop_features: Vec<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr_learning_rate: Option<f64>,
    #[arg(long)]
    lr_epochs: Option<usize>,
    #[arg(long)]
    lr_l2: Option<f64>,
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long)]
    svm_gamma: Option<f64>,
    #[arg(long)]
    svm_tol: Option<f64>,
    #[arg(long)]
    svm_max_passes: Option<usize>,
    #[arg(long)]
    histogram_bins: Option<usize>,
    /// Worker threads; 0 uses the library default.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_numeric() {
        4
    } else {
        3
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Denoise(a) => denoise(a),
        Command::GwRemove(a) => gw_remove(a),
        Command::Remap(a) => remap(a),
        Command::Segment(a) => segment(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Metrics(a) => metrics(a),
        Command::Phantom(a) => phantom(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("report serializes infallibly");
    // A closed pipe (e.g. piping into `head`) is not worth a panic.
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let image = GrayRaster::load_pgm(&a.input)?;
    let report = assess_noise(
        &image,
        &NoiseThresholds {
            tau_min: a.tau_min,
            tau_max: a.tau_max,
            spr_threshold: a.spr_threshold,
            variance_window: a.variance_window,
        },
    )?;
    let output = if report.salt_pepper_flag || a.force {
        median_filter(&image, a.median_k)?
    } else {
        image
    };
    output.save_pgm(&a.output)?;
    print_json(&report);
    Ok(())
}

fn gw_remove(a: GwRemoveArgs) -> Result<()> {
    let image = GrayRaster::load_pgm(&a.input)?;
    let band_width = if a.band_width == 0 {
        default_band_width(image.width())
    } else {
        a.band_width
    };
    let band = detect_shadow_band(&image, band_width)?;
    let removed = remove_shadow(&image, &band, a.blend_width)?;
    removed.save_pgm(&a.output)?;
    print_json(&band);
    Ok(())
}

fn remap(a: RemapArgs) -> Result<()> {
    let image = GrayRaster::load_pgm(&a.input)?;
    let output = if a.inverse {
        let n_angles = a.n_angles.expect("clap enforces --n-angles with --inverse");
        let n_radii = a.n_radii.unwrap_or(image.width() / 2);
        let geom = PolarGeometry::new(n_angles, n_radii, a.fill)?;
        cartesian_to_polar(&image, &geom)?
    } else {
        let geom = PolarGeometry::for_polar(&image, a.fill)?;
        polar_to_cartesian(&image, &geom)?
    };
    output.save_pgm(&a.output)?;
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let image = GrayRaster::load_pgm(&a.input)?;
    let mask = match a.method {
        SegmentMethod::Kmeans => {
            let (mask, trace) = kmeans_segment(&image, a.k, a.tol, a.max_iter)?;
            if let Some(path) = &a.trace {
                let mut csv = String::from("iteration,inertia,centroid_lo,centroid_hi\n");
                for (i, (inertia, c)) in trace
                    .inertia_per_iter
                    .iter()
                    .zip(&trace.centroids_per_iter)
                    .enumerate()
                {
                    csv.push_str(&format!(
                        "{},{:.8e},{:.8e},{:.8e}\n",
                        i + 1,
                        inertia,
                        c.0,
                        c.1
                    ));
                }
                fs::write(path, csv).map_err(|e| Error::io(path, e))?;
            }
            print_json(&trace);
            mask
        }
        SegmentMethod::Otsu => {
            let otsu = otsu_threshold(&image)?;
            print_json(&otsu);
            apply_threshold(&image, otsu.threshold)
        }
    };
    let mask = if a.morph_radius > 0 {
        morph_refine(&mask, a.morph_radius)?
    } else {
        mask
    };
    mask.save_pgm(&a.output)?;
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let image = GrayRaster::load_pgm(&a.image)?;
    let mask = BinaryMask::load_pgm(&a.mask)?;
    let mut ds = extract_dataset(&image, &mask, a.patch)?;
    for name in &a.drop {
        ds = drop_feature(&ds, name)?;
    }
    if a.balance {
        ds = balance_dataset(&ds, a.seed)?;
    }
    fs::write(&a.output, ds.to_csv()).map_err(|e| Error::io(&a.output, e))?;
    if let Some(path) = &a.histograms {
        let hist = feature_histograms(&ds, a.bins)?;
        fs::write(path, hist.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let text = fs::read_to_string(&a.features).map_err(|e| Error::io(&a.features, e))?;
    let ds = LabeledDataset::from_csv(&text)?;
    let spec = SplitSpec {
        train_fraction: a.train_fraction,
        seed: a.seed,
        stratified: true,
    };
    let (train_raw, test_raw) = split_dataset(&ds, &spec)?;
    let (train_set, test_set, st) = standardize(&train_raw, &test_raw)?;
    let names = train_set.feature_names.clone();
    let file = match a.model {
        ModelKind::Logreg => {
            let model = train_logreg(&train_set, a.learning_rate, a.epochs, a.l2, a.seed)?;
            ModelFile::for_logreg(model, names, Some(st))
        }
        ModelKind::Svm => {
            let gamma = a.gamma.unwrap_or_else(|| default_gamma(&train_set));
            let model = train_svm(&train_set, a.c, gamma, a.tol, a.max_passes, a.seed)?;
            ModelFile::for_svm(model, names, Some(st))
        }
    };
    file.save(&a.model_out)?;
    // Test rows are already standardized; use the bare predictors.
    let mut predicted = Vec::with_capacity(test_set.len());
    for row in &test_set.features {
        predicted.push(match &file.parameters {
            ModelParams::LogReg(m) => predict_logreg(m, row)?.0,
            ModelParams::Svm(m) => predict_svm(m, row)?,
        });
    }
    print_json(&evaluate(&test_set.labels, &predicted)?);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let image = GrayRaster::load_pgm(&a.image)?;
    let model = ModelFile::load(&a.model)?;
    let mask = model.predict_image(&image, a.patch)?;
    mask.save_pgm(&a.output)?;
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let truth = BinaryMask::load_pgm(&a.truth)?;
    let pred = BinaryMask::load_pgm(&a.pred)?;
    let to_labels = |m: &BinaryMask| -> Vec<u8> {
        m.pixels()
            .iter()
            .map(|&p| u8::from(p == MASK_FOREGROUND))
            .collect()
    };
    let report = evaluate(&to_labels(&truth), &to_labels(&pred))?;
    let mut value = serde_json::to_value(report).expect("report serializes infallibly");
    value["dice"] = serde_json::json!(dice(&truth, &pred)?);
    value["pixel_agreement"] = serde_json::json!(pixel_agreement(&truth, &pred)?);
    print_json(&value);
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?
        }
        None => PhantomSpec::default(),
    };
    macro_rules! override_spec {
        ($($field:ident),+ $(,)?) => {
            $(if let Some(v) = a.$field { spec.$field = v; })+
        };
    }
    override_spec!(
        seed,
        n_angles,
        n_radii,
        lumen_radius_base,
        lumen_eccentricity,
        wall_thickness,
        wall_intensity,
        background_intensity,
        speckle_sigma,
        salt_pepper_fraction,
        shadow_center_col,
        shadow_width,
    );
    let (frame, truth) = generate_phantom(&spec)?;
    frame.save_pgm(&a.out)?;
    truth.save_pgm(&a.truth)?;
    let sidecar = a
        .sidecar
        .clone()
        .unwrap_or_else(|| a.out.with_extension("json"));
    let json = serde_json::to_string_pretty(&spec).expect("spec serializes infallibly");
    fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    macro_rules! override_cfg {
        ($($field:ident),+ $(,)?) => {
            $(if let Some(v) = a.$field { cfg.$field = v; })+
        };
    }
    override_cfg!(
        tau_min,
        tau_max,
        spr_threshold,
        variance_window,
        median_k,
        band_width,
        blend_width,
        fill_value,
        k,
        kmeans_tol,
        kmeans_max_iter,
        morph_radius,
        patch,
        train_fraction,
        seed,
        lr_learning_rate,
        lr_epochs,
        lr_l2,
        svm_c,
        svm_tol,
        svm_max_passes,
        histogram_bins,
        workers,
    );
    if let Some(g) = a.svm_gamma {
        cfg.svm_gamma = Some(g);
    }
    if !a.drop_features.is_empty() {
        cfg.drop_features = a.drop_features.clone();
    }
    let report = run_pipeline(&a.input, &cfg, &a.out_dir)?;
    print_json(&report);
    Ok(())
}
