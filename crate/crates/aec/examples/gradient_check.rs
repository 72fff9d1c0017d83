//! Check the analytic gradient of the autoencoder cost against central
//! finite differences on a small random instance.
//!
//! ```bash
//! cargo run --release -p aec --example gradient_check
//! ```

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aec::autoencoder::{cost, gradient, AeConfig, AeParams};

fn main() -> Result<(), aec::Error> {
    let (dx, d, n) = (8usize, 4usize, 5usize);
    let mut config = AeConfig::new(dx, d);
    config.l2_coeff = 0.01;
    config.sparsity_coeff = 0.5;
    config.sparsity_target = 0.2;

    // Small weights and mid-range biases keep the pre-activations inside the
    // linear region of the saturating activation, away from its kinks.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = AeParams {
        weights: Array2::from_shape_fn((d, dx), |_| rng.random_range(-0.05..0.05)),
        hidden_bias: Array1::from_shape_fn(d, |_| rng.random_range(0.45..0.55)),
        output_bias: Array1::from_shape_fn(dx, |_| rng.random_range(0.45..0.55)),
    };
    let x = Array2::from_shape_fn((n, dx), |_| rng.random_range(0.0..1.0));

    let analytic = gradient(&params, x.view(), &config)?.to_flat();

    let h = 1e-6;
    let flat = params.to_flat();
    let mut worst = (0.0f64, 0usize);
    for k in 0..flat.len() {
        let mut plus = flat.clone();
        plus[k] += h;
        let mut minus = flat.clone();
        minus[k] -= h;
        let cp = cost(&AeParams::from_flat(d, dx, plus.view())?, x.view(), &config)?.total;
        let cm = cost(&AeParams::from_flat(d, dx, minus.view())?, x.view(), &config)?.total;
        let fd = (cp - cm) / (2.0 * h);
        let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-8);
        if rel > worst.0 {
            worst = (rel, k);
        }
    }

    println!("parameters checked: {}", flat.len());
    println!("worst relative error: {:.3e} (parameter {})", worst.0, worst.1);
    assert!(worst.0 < 1e-5, "gradient check failed");
    println!("analytic gradient matches central differences (h = {h:e})");
    Ok(())
}
