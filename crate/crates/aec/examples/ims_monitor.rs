//! Run the monitoring framework on a real run-to-failure record directory.
//!
//! Point it at one experiment directory of the public IMS bearing corpus
//! (ASCII records, file name = timestamp) and pick a bearing:
//!
//! ```bash
//! # desk scale (decimation 16, 64 hidden units — minutes)
//! cargo run --release -p aec --example ims_monitor -- /data/ims/2nd_test S2B1
//!
//! # full scale (no decimation, 1000 hidden units — hours)
//! cargo run --release -p aec --example ims_monitor -- /data/ims/2nd_test S2B1 --full
//! ```
//!
//! The dataset root can also come from `AEC_DATASET_ROOT`. Known reference
//! onsets: S1B3 → 2027, S1B4 → 1641, S2B1 → 547, S3B3 → 2367 (pass one as a
//! third positional argument to score the run). Full-scale outcomes belong
//! in RESULTS.md at the repository root.

use aec::pipeline::{emit_outputs, run_monitor, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let full = args.iter().any(|a| a == "--full");
    let positional: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();

    let root = positional
        .first()
        .map(|s| s.to_string())
        .or_else(|| std::env::var("AEC_DATASET_ROOT").ok());
    let Some(root) = root else {
        eprintln!("usage: ims_monitor <record-dir> <bearing> [reference-ordinal] [--full]");
        eprintln!("       (record-dir may come from AEC_DATASET_ROOT)");
        return Ok(());
    };
    if !std::path::Path::new(&root).is_dir() {
        eprintln!("record directory {root} not found; nothing to do");
        return Ok(());
    }
    let bearing = positional.get(1).map(|s| s.as_str()).unwrap_or("S2B1");
    let reference: Option<usize> = positional.get(2).and_then(|s| s.parse().ok());

    let mut config = if full {
        RunConfig::full_ims(&root, bearing)
    } else {
        RunConfig::desk_ims(&root, bearing)
    };
    config.reference_ordinal = reference;
    println!(
        "monitoring {bearing} from {root} ({} scale: hidden {}, decimation {})…",
        if full { "full" } else { "desk" },
        config.hidden_dim,
        config.decimation
    );

    let started = std::time::Instant::now();
    let result = run_monitor(&config)?;
    println!("run took {:.1} s", started.elapsed().as_secs_f64());
    println!(
        "trained {} epochs (stop: {:?})",
        result.train_report.epochs_run, result.train_report.stop_reason
    );
    match result.detection.degradation_start {
        Some(t) => {
            println!("degradation starting point: ordinal {t}");
            if let (Some(r), Some(acc)) = (reference, result.accuracy) {
                println!(
                    "reference {r}: distance {}, accuracy {:.2}%",
                    t.abs_diff(r),
                    acc * 100.0
                );
            }
        }
        None => println!("no degradation detected"),
    }

    let out = std::env::temp_dir().join(format!("aec-examples/ims_{bearing}"));
    let manifest = emit_outputs(&result, &out)?;
    println!("\noutputs:");
    for f in manifest.files {
        println!("  {}", f.display());
    }
    Ok(())
}
