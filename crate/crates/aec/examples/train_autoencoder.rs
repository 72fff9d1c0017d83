//! Train the sparse tied-weight autoencoder on synthetic vibration samples
//! and inspect the optimization trace, then save and reload the parameters.
//!
//! ```bash
//! cargo run --release -p aec --example train_autoencoder
//! ```

use aec::autoencoder::{self, AeConfig};
use aec::ingest::{scale_catalog, synth_run_to_failure, ScalingMode, SynthConfig};
use aec::scg::{init_params, train, TrainConfig};

fn main() -> Result<(), aec::Error> {
    let catalog = synth_run_to_failure(&SynthConfig {
        n_samples: 120,
        sample_len: 512,
        change_point: 80,
        severity_growth: 0.03,
        seed: 9,
    })?;
    let scaled = scale_catalog(&catalog, ScalingMode::GlobalMinmax)?;
    let x = scaled.to_matrix();
    println!("training on {} samples × {} inputs", x.nrows(), x.ncols());

    let mut config = AeConfig::new(x.ncols(), 32);
    config.seed = 9;
    let train_config = TrainConfig {
        max_epochs: 120,
        ..TrainConfig::default()
    };

    let params0 = init_params(&config);
    let initial = autoencoder::cost(&params0, x.view(), &config)?;
    let (params, report) = train(params0, x.view(), &config, &train_config)?;
    let r#final = autoencoder::cost(&params, x.view(), &config)?;

    println!("epochs run:  {} (stop: {:?})", report.epochs_run, report.stop_reason);
    println!("grad norm:   {:.3e}", report.final_grad_norm);
    println!(
        "cost:        {:.6} → {:.6}",
        initial.total, r#final.total
    );
    println!(
        "MSE:         {:.6} → {:.6}  ({:.1}% of initial)",
        initial.mse,
        r#final.mse,
        100.0 * r#final.mse / initial.mse
    );
    println!(
        "mean hidden activation: {:.4} (target {})",
        r#final.rho_hat.mean().unwrap(),
        config.sparsity_target
    );

    if let Some(first) = report.cost_history.first() {
        let mid = report.cost_history[report.cost_history.len() / 2];
        let last = report.cost_history.last().unwrap();
        println!("accepted-cost trace: {first:.6} … {mid:.6} … {last:.6}");
    }

    // Binary round trip is bit-exact.
    let path = std::env::temp_dir().join("aec-examples/params.aepb");
    std::fs::create_dir_all(path.parent().unwrap()).ok();
    autoencoder::save_binary(&params, &config, &path)?;
    let (restored, _) = autoencoder::load_binary(&path)?;
    assert_eq!(params, restored);
    println!("parameters saved to {} and reloaded bit-exactly", path.display());
    Ok(())
}
