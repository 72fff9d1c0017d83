//! End-to-end runs: data resolution, scaling, training, trend analysis,
//! detection, and output emission, for both the retrospective monitoring
//! framework and the causal online framework.

use chrono::Utc;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::autoencoder::AeConfig;
use crate::detect::{self, DetectionReport, DetectorConfig};
use crate::error::{Error, Result, StageExt};
use crate::ingest::{self, SampleCatalog, ScalingMode, SynthConfig};
use crate::scg::{self, TrainConfig, TrainReport};
use crate::trend::{self, AecOptions, AecSeries, FeatureMatrix};

/// Which framework a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    /// Train on all samples; retrospective health trend.
    Monitor,
    /// Train on the leading fraction only; causal prediction over the rest.
    Online,
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Framework::Monitor => write!(f, "monitor"),
            Framework::Online => write!(f, "online"),
        }
    }
}

/// Where the catalog comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// A directory of ASCII record files.
    Ims {
        root: PathBuf,
        bearing: String,
        /// Source column; when absent the default bearing→column map applies.
        #[serde(default)]
        channel: Option<usize>,
        /// 1-based sensor selector for two-sensor rigs.
        #[serde(default)]
        sensor: Option<usize>,
        /// Expected rows per record; inferred from the first file when absent.
        #[serde(default)]
        record_rows: Option<usize>,
    },
    Synth(SynthConfig),
}

/// Autoencoder hyperparameters carried by a run (dimensions are derived from
/// the data and `hidden_dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeHyperparams {
    #[serde(default = "default_l2")]
    pub l2_coeff: f64,
    #[serde(default = "default_sparsity")]
    pub sparsity_coeff: f64,
    #[serde(default = "default_rho")]
    pub sparsity_target: f64,
    #[serde(default = "default_kl_eps")]
    pub kl_epsilon: f64,
}

fn default_l2() -> f64 {
    1e-3
}
fn default_sparsity() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.05
}
fn default_kl_eps() -> f64 {
    1e-8
}

impl Default for AeHyperparams {
    fn default() -> Self {
        Self {
            l2_coeff: default_l2(),
            sparsity_coeff: default_sparsity(),
            sparsity_target: default_rho(),
            kl_epsilon: default_kl_eps(),
        }
    }
}

/// Full resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub framework: Framework,
    pub source: DataSource,
    #[serde(default = "default_scaling")]
    pub scaling: ScalingMode,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default)]
    pub ae: AeHyperparams,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_w_size")]
    pub w_size: usize,
    #[serde(default)]
    pub detector: DetectorConfig,
    /// Fraction of samples used for training in the online framework.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Keep every k-th time point within each record (1 = off).
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default)]
    pub seed: u64,
    /// Flatness tolerance of the rate pipeline.
    #[serde(default = "default_flat_tol")]
    pub flat_tol: f64,
    /// Known onset ordinal to score the prediction against.
    #[serde(default)]
    pub reference_ordinal: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_scaling() -> ScalingMode {
    ScalingMode::GlobalMinmax
}
fn default_hidden_dim() -> usize {
    64
}
fn default_w_size() -> usize {
    10
}
fn default_train_fraction() -> f64 {
    0.7
}
fn default_decimation() -> usize {
    1
}
fn default_flat_tol() -> f64 {
    trend::DEFAULT_FLAT_TOL
}

impl RunConfig {
    /// Desk-scale synthetic run: quick enough for tests and demos.
    pub fn desk_synth(framework: Framework, seed: u64) -> Self {
        let mut synth = SynthConfig::default();
        synth.seed = seed;
        Self {
            framework,
            source: DataSource::Synth(synth),
            scaling: ScalingMode::GlobalMinmax,
            hidden_dim: 64,
            ae: AeHyperparams::default(),
            train: TrainConfig {
                max_epochs: 150,
                ..TrainConfig::default()
            },
            w_size: 10,
            detector: DetectorConfig::default(),
            train_fraction: 0.7,
            decimation: 1,
            seed,
            flat_tol: trend::DEFAULT_FLAT_TOL,
            reference_ordinal: None,
            out_dir: None,
        }
    }

    /// Desk-scale dataset run: decimation 16 (1280-point inputs at the usual
    /// 20480-row records), 64 hidden units, 150 epochs. A reduced preset for
    /// CI-speed runs — NOT the full-scale setting.
    pub fn desk_ims(root: impl Into<PathBuf>, bearing: &str) -> Self {
        Self {
            framework: Framework::Monitor,
            source: DataSource::Ims {
                root: root.into(),
                bearing: bearing.to_string(),
                channel: None,
                sensor: Some(1),
                record_rows: None,
            },
            scaling: ScalingMode::GlobalMinmax,
            hidden_dim: 64,
            ae: AeHyperparams::default(),
            train: TrainConfig {
                max_epochs: 150,
                ..TrainConfig::default()
            },
            w_size: 10,
            detector: DetectorConfig::default(),
            train_fraction: 0.7,
            decimation: 16,
            seed: 0,
            flat_tol: trend::DEFAULT_FLAT_TOL,
            reference_ordinal: None,
            out_dir: None,
        }
    }

    /// Full-scale dataset run: 1000 hidden units on raw 20480-point records.
    pub fn full_ims(root: impl Into<PathBuf>, bearing: &str) -> Self {
        let mut cfg = Self::desk_ims(root, bearing);
        cfg.hidden_dim = 1000;
        cfg.decimation = 1;
        cfg.train = TrainConfig::default();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Invalid(format!(
                "train_fraction must lie in (0,1], got {}",
                self.train_fraction
            )));
        }
        if self.framework == Framework::Online && self.train_fraction >= 1.0 {
            return Err(Error::Invalid(
                "online framework requires train_fraction < 1".into(),
            ));
        }
        if self.w_size == 0 {
            return Err(Error::Invalid("w_size must be at least 1".into()));
        }
        if self.decimation == 0 {
            return Err(Error::Invalid("decimation must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Invalid("hidden_dim must be positive".into()));
        }
        if self.flat_tol < 0.0 {
            return Err(Error::Invalid("flat_tol must be nonnegative".into()));
        }
        self.train.validate()?;
        self.detector.validate()?;
        Ok(())
    }

    /// Load a TOML config file.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Content fingerprint of the resolved config (FNV-1a over its JSON).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Everything needed to reproduce and interpret one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub created_utc: chrono::DateTime<Utc>,
    pub n_samples: usize,
    pub input_dim: usize,
    pub series_meta: serde_json::Value,
    pub config: RunConfig,
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub series: AecSeries,
    pub detection: DetectionReport,
    pub train_report: TrainReport,
    /// Accuracy vs. the supplied reference ordinal, when both exist.
    pub accuracy: Option<f64>,
    pub provenance: Provenance,
}

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub files: Vec<PathBuf>,
}

// ---------------------------------------------------------------------------
// Catalog resolution
// ---------------------------------------------------------------------------

/// Materialize the configured data source into a raw catalog (decimation
/// applied, no scaling).
pub fn resolve_catalog(config: &RunConfig) -> Result<SampleCatalog> {
    let catalog = match &config.source {
        DataSource::Synth(synth) => ingest::synth_run_to_failure(synth).stage("ingest")?,
        DataSource::Ims {
            root,
            bearing,
            channel,
            sensor,
            record_rows,
        } => {
            let channel = match channel {
                Some(c) => *c,
                None => {
                    // Peek at the first record to learn the channel count.
                    let id = ingest::BearingId::parse(bearing).stage("ingest")?;
                    let probe = first_record(root, *record_rows).stage("ingest")?;
                    id.default_column(probe.channel_count(), sensor.unwrap_or(1))
                        .stage("ingest")?
                }
            };
            ingest::read_directory(root, bearing, channel, *record_rows).stage("ingest")?
        }
    };
    ingest::decimate_catalog(&catalog, config.decimation).stage("ingest")
}

fn first_record(root: &Path, rows: Option<usize>) -> Result<ingest::RawRecord> {
    let names = ingest::list_record_files(root)?;
    let path = root.join(&names[0]);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let expected = rows.unwrap_or_else(|| text.lines().filter(|l| !l.trim().is_empty()).count());
    ingest::parse_record(&text, expected)
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

fn series_id(catalog: &SampleCatalog, framework: Framework) -> String {
    format!("{}:ch{}:{}", catalog.bearing_id, catalog.channel, framework)
}

fn make_provenance(config: &RunConfig, n_samples: usize, input_dim: usize, series: &AecSeries) -> Provenance {
    Provenance {
        config_hash: config.hash(),
        seed: config.seed,
        created_utc: Utc::now(),
        n_samples,
        input_dim,
        series_meta: series.sidecar(),
        config: config.clone(),
    }
}

fn train_and_encode(
    x_train: ndarray::ArrayView2<f64>,
    x_all: ndarray::ArrayView2<f64>,
    config: &RunConfig,
) -> Result<(FeatureMatrix, TrainReport)> {
    let ae_config = AeConfig {
        input_dim: x_all.ncols(),
        hidden_dim: config.hidden_dim,
        l2_coeff: config.ae.l2_coeff,
        sparsity_coeff: config.ae.sparsity_coeff,
        sparsity_target: config.ae.sparsity_target,
        kl_epsilon: config.ae.kl_epsilon,
        seed: config.seed,
    };
    ae_config.validate().stage("train")?;
    let params0 = scg::init_params(&ae_config);
    let (params, report) = scg::train(params0, x_train, &ae_config, &config.train).stage("train")?;
    let codes = crate::autoencoder::encode_batch(&params, x_all).stage("encode")?;
    let features = FeatureMatrix::from_array(codes).stage("encode")?;
    Ok((features, report))
}

fn aec_options(config: &RunConfig) -> AecOptions {
    AecOptions {
        flat_tol: config.flat_tol,
        ..AecOptions::default()
    }
}

/// Monitoring framework: train on every sample, compute the retrospective
/// AEC rate, and detect the degradation starting point.
pub fn run_monitor(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    if config.framework != Framework::Monitor {
        return Err(Error::Invalid("run_monitor requires framework = monitor".into()));
    }
    let catalog = resolve_catalog(config)?;
    let scaled = ingest::scale_catalog(&catalog, config.scaling).stage("scale")?;
    let x: Array2<f64> = scaled.to_matrix();

    let (features, train_report) = train_and_encode(x.view(), x.view(), config)?;
    let series =
        trend::aec_rate_with(&features, 0, config.w_size, &aec_options(config)).stage("trend")?;
    let detection =
        detect::detect_degradation(&series.filtered, &config.detector, &series_id(&catalog, config.framework))
            .stage("detect")?;

    let accuracy = score(config, &detection, catalog.len())?;
    let provenance = make_provenance(config, catalog.len(), x.ncols(), &series);
    Ok(RunResult {
        series,
        detection,
        train_report,
        accuracy,
        provenance,
    })
}

/// Online framework: train on the leading `train_fraction` of samples,
/// encode everything with frozen parameters, and predict causally over the
/// rest.
///
/// Input scaling bounds and rate-normalization bounds are both frozen from
/// the training portion; later values clip into [0,1].
pub fn run_online(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    if config.framework != Framework::Online {
        return Err(Error::Invalid("run_online requires framework = online".into()));
    }
    let catalog = resolve_catalog(config)?;
    let n = catalog.len();
    let n_train = ((config.train_fraction * n as f64).floor() as usize).clamp(1, n - 1);

    let scaled = match config.scaling {
        ScalingMode::None => ingest::scale_catalog(&catalog, ScalingMode::None).stage("scale")?,
        ScalingMode::GlobalMinmax | ScalingMode::PerSampleMinmax => {
            let (lo, hi) = ingest::bounds_of_head(&catalog, n_train).stage("scale")?;
            ingest::scale_catalog_with_bounds(&catalog, lo, hi).stage("scale")?
        }
    };
    let x: Array2<f64> = scaled.to_matrix();
    let x_train = x.slice(ndarray::s![..n_train, ..]);

    let (features, train_report) = train_and_encode(x_train, x.view(), config)?;
    let series =
        trend::aec_rate_online(&features, 0, config.w_size, n_train, &aec_options(config))
            .stage("trend")?;
    let detection =
        detect::detect_degradation(&series.filtered, &config.detector, &series_id(&catalog, config.framework))
            .stage("detect")?;

    let accuracy = score(config, &detection, n)?;
    let provenance = make_provenance(config, n, x.ncols(), &series);
    Ok(RunResult {
        series,
        detection,
        train_report,
        accuracy,
        provenance,
    })
}

/// Dispatch on the configured framework.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    match config.framework {
        Framework::Monitor => run_monitor(config),
        Framework::Online => run_online(config),
    }
}

fn score(config: &RunConfig, detection: &DetectionReport, n: usize) -> Result<Option<f64>> {
    match (config.reference_ordinal, detection.degradation_start) {
        (Some(reference), Some(predicted)) => {
            Ok(Some(detect::prediction_accuracy(predicted, reference, n).stage("detect")?))
        }
        _ => Ok(None),
    }
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

/// Write the run's artifacts into `out_dir`:
/// `aec_series.csv`, `detection.json`, `train_report.json`,
/// `provenance.json`, and `plot_data.csv` (ordinal, filtered rate, flag).
///
/// Re-running with an identical config and seed reproduces every file
/// byte-for-byte except the provenance timestamp.
pub fn emit_outputs(result: &RunResult, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::with_capacity(5);

    let series_path = out_dir.join("aec_series.csv");
    result.series.write_csv_file(&series_path)?;
    files.push(series_path);

    let detection_path = out_dir.join("detection.json");
    let mut detection_doc = result.detection.to_json();
    if let Some(acc) = result.accuracy {
        detection_doc["accuracy"] = serde_json::json!(acc);
        detection_doc["reference_ordinal"] =
            serde_json::json!(result.provenance.config.reference_ordinal);
    }
    write_json(&detection_path, &detection_doc)?;
    files.push(detection_path);

    let train_path = out_dir.join("train_report.json");
    write_json(
        &train_path,
        &serde_json::to_value(&result.train_report).map_err(|e| Error::Decode(e.to_string()))?,
    )?;
    files.push(train_path);

    let provenance_path = out_dir.join("provenance.json");
    write_json(
        &provenance_path,
        &serde_json::to_value(&result.provenance).map_err(|e| Error::Decode(e.to_string()))?,
    )?;
    files.push(provenance_path);

    let plot_path = out_dir.join("plot_data.csv");
    let mut plot = String::from("ordinal,filtered,flag\n");
    for (i, (&rate, &flag)) in result
        .series
        .filtered
        .iter()
        .zip(result.detection.flags.iter())
        .enumerate()
    {
        use std::fmt::Write as _;
        writeln!(plot, "{},{},{}", i, rate, u8::from(flag)).expect("string write");
    }
    std::fs::write(&plot_path, plot).map_err(|e| Error::io(&plot_path, e))?;
    files.push(plot_path);

    Ok(Manifest { files })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Decode(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Re-execute a run from its provenance file.
pub fn run_from_provenance(path: &Path) -> Result<RunResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let provenance: Provenance =
        serde_json::from_str(&text).map_err(|e| Error::Decode(e.to_string()))?;
    run(&provenance.config)
}
