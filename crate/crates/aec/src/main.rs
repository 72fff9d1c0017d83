//! Thin command-line front end over the library pipeline.
//!
//! Exit codes: 0 = success with detection, 2 = success without detection,
//! 1 = error.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use aec::detect;
use aec::ingest::{self, SynthConfig};
use aec::pipeline::{self, DataSource, Framework, RunConfig};

/// Dataset root fallback when --dataset is not given.
const DATASET_ENV: &str = "AEC_DATASET_ROOT";

#[derive(Parser)]
#[command(name = "aec", version, about = "Bearing health monitoring from vibration records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic run-to-failure record directory.
    Synth(SynthArgs),
    /// Parse a record directory into a catalog and write its index.
    Ingest(IngestArgs),
    /// Train the autoencoder and save parameters + training report.
    Train(RunArgs),
    /// Retrospective health monitoring (train on all samples).
    Monitor(RunArgs),
    /// Online prognostic (train on the leading fraction only).
    Online(RunArgs),
    /// Summarize a finished run directory; optionally verify reproducibility.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the record files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 1280)]
    len: usize,
    #[arg(long, default_value_t = 200)]
    change_point: usize,
    #[arg(long, default_value_t = 0.02)]
    growth: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    /// Record directory (falls back to AEC_DATASET_ROOT).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    bearing: String,
    /// Source column; defaults to the bearing→column map.
    #[arg(long)]
    channel: Option<usize>,
    /// 1-based sensor selector for two-sensor rigs.
    #[arg(long)]
    sensor: Option<usize>,
    /// Expected rows per record; inferred from the first file when absent.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = 1)]
    decimate: usize,
    /// Where to write catalog_index.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record directory (falls back to AEC_DATASET_ROOT).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    bearing: Option<String>,
    #[arg(long)]
    channel: Option<usize>,
    #[arg(long)]
    sensor: Option<usize>,
    /// Framework override; normally implied by the subcommand.
    #[arg(long)]
    framework: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Hidden-layer width D.
    #[arg(long)]
    hidden: Option<usize>,
    /// Moving-average window.
    #[arg(long)]
    wsize: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    lag: Option<usize>,
    /// Keep every k-th time point within each record.
    #[arg(long)]
    decimate: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Known onset ordinal to score the prediction against.
    #[arg(long)]
    reference_ordinal: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A run directory written by monitor/online.
    #[arg(long)]
    run: PathBuf,
    /// Re-execute from provenance.json and verify the series is identical.
    #[arg(long, default_value_t = false)]
    reproduce: bool,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit code (2) collides with "no detection".
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> aec::Result<ExitCode> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Train(args) => cmd_train(args),
        Command::Monitor(args) => cmd_run(args, Framework::Monitor),
        Command::Online(args) => cmd_run(args, Framework::Online),
        Command::Report(args) => cmd_report(args),
    }
}

fn dataset_root(explicit: Option<PathBuf>) -> Option<PathBuf> {
    explicit.or_else(|| std::env::var_os(DATASET_ENV).map(PathBuf::from))
}

fn cmd_synth(args: SynthArgs) -> aec::Result<ExitCode> {
    let cfg = SynthConfig {
        n_samples: args.n,
        sample_len: args.len,
        change_point: args.change_point,
        severity_growth: args.growth,
        seed: args.seed,
    };
    let catalog = ingest::synth_run_to_failure(&cfg)?;
    ingest::write_directory(&catalog, &args.out)?;
    let index_path = args.out.join("catalog_index.json");
    write_index(&catalog, &index_path)?;
    println!(
        "wrote {} records ({} points each) to {}",
        catalog.len(),
        catalog.sample_len(),
        args.out.display()
    );
    if let Some(cp) = catalog.change_point {
        println!("injected change point at ordinal {cp}");
    } else {
        println!("no fault injected (stationary)");
    }
    Ok(ExitCode::SUCCESS)
}

fn write_index(catalog: &ingest::SampleCatalog, path: &std::path::Path) -> aec::Result<()> {
    let text = serde_json::to_string_pretty(&catalog.index())
        .map_err(|e| aec::Error::Decode(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| aec::Error::Io {
        path: path.into(),
        source: e,
    })
}

fn cmd_ingest(args: IngestArgs) -> aec::Result<ExitCode> {
    let root = dataset_root(args.dataset)
        .ok_or_else(|| aec::Error::Invalid(format!("pass --dataset or set {DATASET_ENV}")))?;
    let channel = match args.channel {
        Some(c) => c,
        None => {
            let id = ingest::BearingId::parse(&args.bearing)?;
            id.default_column(
                probe_channel_count(&root, args.rows)?,
                args.sensor.unwrap_or(1),
            )?
        }
    };
    let catalog = ingest::read_directory(&root, &args.bearing, channel, args.rows)?;
    let catalog = ingest::decimate_catalog(&catalog, args.decimate)?;
    std::fs::create_dir_all(&args.out).map_err(|e| aec::Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let index_path = args.out.join("catalog_index.json");
    write_index(&catalog, &index_path)?;
    println!(
        "catalog: {} samples × {} points, channel {} → {}",
        catalog.len(),
        catalog.sample_len(),
        channel,
        index_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn probe_channel_count(root: &std::path::Path, rows: Option<usize>) -> aec::Result<usize> {
    let names = ingest::list_record_files(root)?;
    let path = root.join(&names[0]);
    let text = std::fs::read_to_string(&path).map_err(|e| aec::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let expected = rows.unwrap_or_else(|| text.lines().filter(|l| !l.trim().is_empty()).count());
    Ok(ingest::parse_record(&text, expected)?.channel_count())
}

/// Build a RunConfig from an optional TOML file plus flag overrides.
fn build_config(args: &RunArgs, framework: Framework) -> aec::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => {
            let root = dataset_root(args.dataset.clone()).ok_or_else(|| {
                aec::Error::Invalid(format!(
                    "pass --config, or --dataset/{DATASET_ENV} with --bearing"
                ))
            })?;
            let bearing = args
                .bearing
                .clone()
                .ok_or_else(|| aec::Error::Invalid("--bearing is required".into()))?;
            RunConfig::desk_ims(root, &bearing)
        }
    };

    cfg.framework = framework;
    if let Some(f) = &args.framework {
        cfg.framework = match f.as_str() {
            "monitor" => Framework::Monitor,
            "online" => Framework::Online,
            other => return Err(aec::Error::Invalid(format!("unknown framework '{other}'"))),
        };
    }
    if let DataSource::Ims {
        root,
        bearing,
        channel,
        sensor,
        ..
    } = &mut cfg.source
    {
        if let Some(d) = dataset_root(args.dataset.clone()) {
            *root = d;
        }
        if let Some(b) = &args.bearing {
            *bearing = b.clone();
        }
        if args.channel.is_some() {
            *channel = args.channel;
        }
        if args.sensor.is_some() {
            *sensor = args.sensor;
        }
    }
    if let Some(v) = args.train_fraction {
        cfg.train_fraction = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden_dim = v;
    }
    if let Some(v) = args.wsize {
        cfg.w_size = v;
    }
    if let Some(v) = args.theta {
        cfg.detector.theta = v;
    }
    if let Some(v) = args.lag {
        cfg.detector.lag = v;
    }
    if let Some(v) = args.decimate {
        cfg.decimation = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
        if let DataSource::Synth(s) = &mut cfg.source {
            s.seed = v;
        }
    }
    if let Some(v) = args.epochs {
        cfg.train.max_epochs = v;
    }
    if args.reference_ordinal.is_some() {
        cfg.reference_ordinal = args.reference_ordinal;
    }
    cfg.out_dir = Some(args.out.clone());
    Ok(cfg)
}

fn cmd_train(args: RunArgs) -> aec::Result<ExitCode> {
    let cfg = build_config(&args, Framework::Monitor)?;
    cfg.validate()?;
    let catalog = pipeline::resolve_catalog(&cfg)?;
    let scaled = ingest::scale_catalog(&catalog, cfg.scaling)?;
    let x = scaled.to_matrix();
    let ae_config = aec::autoencoder::AeConfig {
        input_dim: x.ncols(),
        hidden_dim: cfg.hidden_dim,
        l2_coeff: cfg.ae.l2_coeff,
        sparsity_coeff: cfg.ae.sparsity_coeff,
        sparsity_target: cfg.ae.sparsity_target,
        kl_epsilon: cfg.ae.kl_epsilon,
        seed: cfg.seed,
    };
    let params0 = aec::scg::init_params(&ae_config);
    let (params, report) = aec::scg::train(params0, x.view(), &ae_config, &cfg.train)?;

    std::fs::create_dir_all(&args.out).map_err(|e| aec::Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let params_path = args.out.join("params.aepb");
    aec::autoencoder::save_binary(&params, &ae_config, &params_path)?;
    let report_path = args.out.join("train_report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| aec::Error::Decode(e.to_string()))?;
    std::fs::write(&report_path, text).map_err(|e| aec::Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    println!(
        "trained {} epochs, final cost {:.6e}, stop: {:?}",
        report.epochs_run,
        report.cost_history.last().copied().unwrap_or(f64::NAN),
        report.stop_reason
    );
    println!("params → {}", params_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs, framework: Framework) -> aec::Result<ExitCode> {
    let cfg = build_config(&args, framework)?;
    let result = pipeline::run(&cfg)?;
    let manifest = pipeline::emit_outputs(&result, &args.out)?;
    for f in &manifest.files {
        println!("wrote {}", f.display());
    }
    match result.detection.degradation_start {
        Some(t) => {
            println!("degradation starting point: ordinal {t}");
            if let Some(acc) = result.accuracy {
                println!("prediction accuracy: {:.2}%", acc * 100.0);
            }
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("no degradation detected");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_report(args: ReportArgs) -> aec::Result<ExitCode> {
    let detection_path = args.run.join("detection.json");
    let text = std::fs::read_to_string(&detection_path).map_err(|e| aec::Error::Io {
        path: detection_path.clone(),
        source: e,
    })?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| aec::Error::Decode(e.to_string()))?;
    let report = detect::DetectionReport::from_json(&doc)?;
    println!("series: {}", report.series_id);
    println!(
        "detector: theta {}, lag {}, warmup {}",
        report.config.theta, report.config.lag, report.config.warmup
    );
    match report.degradation_start {
        Some(t) => println!("degradation starting point: ordinal {t}"),
        None => println!("no degradation detected"),
    }
    if let Some(acc) = doc.get("accuracy").and_then(|v| v.as_f64()) {
        println!("prediction accuracy: {:.2}%", acc * 100.0);
    }

    if args.reproduce {
        let original = std::fs::read_to_string(args.run.join("aec_series.csv")).map_err(|e| {
            aec::Error::Io {
                path: args.run.join("aec_series.csv"),
                source: e,
            }
        })?;
        let rerun = pipeline::run_from_provenance(&args.run.join("provenance.json"))?;
        let mut buf = Vec::new();
        rerun.series.write_csv(&mut buf).map_err(|e| aec::Error::Io {
            path: args.run.clone(),
            source: e,
        })?;
        if buf == original.as_bytes() {
            println!("reproduction: series identical");
        } else {
            eprintln!("reproduction: series DIFFERS");
            return Ok(ExitCode::from(1));
        }
    }

    Ok(match report.degradation_start {
        Some(_) => ExitCode::SUCCESS,
        None => ExitCode::from(2),
    })
}
