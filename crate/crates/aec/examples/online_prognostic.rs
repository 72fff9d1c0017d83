//! Online prognostic end to end: train on the first 70% of a synthetic
//! run-to-failure catalog, predict causally over the held-out tail where the
//! fault begins, and score the prediction against the injected onset.
//!
//! ```bash
//! cargo run --release -p aec --example online_prognostic
//! ```

use aec::pipeline::{emit_outputs, run_online, DataSource, Framework, RunConfig};

fn main() -> Result<(), aec::Error> {
    let change_point = 220;
    let mut config = RunConfig::desk_synth(Framework::Online, 0);
    if let DataSource::Synth(s) = &mut config.source {
        s.change_point = change_point; // inside the held-out 30% (training ends at 210)
    }
    config.reference_ordinal = Some(change_point);

    println!(
        "training on the first {:.0}% of 300 samples; fault injected at {change_point}…",
        config.train_fraction * 100.0
    );
    let result = run_online(&config)?;

    let n_train = (config.train_fraction * 300.0).floor() as usize;
    println!(
        "frozen rate bounds from training portion: [{:.4}, {:.4}]",
        result.series.norm_min, result.series.norm_max
    );
    println!(
        "held-out rate trace: {:.3} (t={}) → {:.3} (t=299)",
        result.series.filtered[n_train],
        n_train,
        result.series.filtered[299]
    );
    match result.detection.degradation_start {
        Some(t) => {
            println!("predicted degradation starting point: {t}");
            if let Some(acc) = result.accuracy {
                println!("prediction accuracy vs injected onset: {:.2}%", acc * 100.0);
            }
        }
        None => println!("no degradation detected"),
    }

    let out = std::env::temp_dir().join("aec-examples/online_prognostic");
    let manifest = emit_outputs(&result, &out)?;
    println!("\noutputs:");
    for f in manifest.files {
        println!("  {}", f.display());
    }
    Ok(())
}
