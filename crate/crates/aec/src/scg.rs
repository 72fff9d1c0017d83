//! Full-batch scaled conjugate gradient training.
//!
//! Implements Møller's SCG: conjugate directions with the Møller β, curvature
//! estimated by a finite gradient difference along the search direction
//! (scaled by `sigma_scg`), and a Levenberg-style λ that grows on negative
//! curvature or rejected steps and shrinks on very successful ones. No line
//! search. The direction restarts to steepest descent every P iterations,
//! P = total parameter count.
//!
//! The driver is generic over [`Objective`] so the same loop trains the
//! autoencoder and runs on analytic test surfaces.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{self, AeConfig, AeParams};
use crate::error::{Error, Result};

/// A differentiable scalar objective over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Objective value at `w`.
    fn cost(&self, w: ArrayView1<f64>) -> Result<f64>;

    /// Objective value and gradient at `w`.
    fn cost_grad(&self, w: ArrayView1<f64>) -> Result<(f64, Array1<f64>)>;

    /// Gradient only; default goes through [`cost_grad`](Self::cost_grad).
    fn grad(&self, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.cost_grad(w)?.1)
    }
}

/// Stopping and scaling knobs for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Maximum optimizer iterations; must be at least 1.
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Stop when the gradient norm falls below this (0 disables).
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Stop when an accepted step improves the cost by less than this (0 disables).
    #[serde(default = "default_cost_tol")]
    pub cost_tol: f64,
    /// Relative length of the curvature probe step.
    #[serde(default = "default_sigma_scg")]
    pub sigma_scg: f64,
    /// Initial Levenberg scaling λ.
    #[serde(default = "default_lambda_init")]
    pub lambda_init: f64,
    /// Carried for interface compatibility; the SCG loop itself is
    /// deterministic, randomness lives in the parameter initialization seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_max_epochs() -> usize {
    400
}
fn default_grad_tol() -> f64 {
    1e-6
}
fn default_cost_tol() -> f64 {
    1e-9
}
fn default_sigma_scg() -> f64 {
    5e-5
}
fn default_lambda_init() -> f64 {
    5e-7
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: default_max_epochs(),
            grad_tol: default_grad_tol(),
            cost_tol: default_cost_tol(),
            sigma_scg: default_sigma_scg(),
            lambda_init: default_lambda_init(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(Error::Invalid("max_epochs must be at least 1".into()));
        }
        if !(self.sigma_scg > 0.0) {
            return Err(Error::Invalid("sigma_scg must be positive".into()));
        }
        if !(self.lambda_init > 0.0) {
            return Err(Error::Invalid("lambda_init must be positive".into()));
        }
        if self.grad_tol < 0.0 || self.cost_tol < 0.0 {
            return Err(Error::Invalid("tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Why a training run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    GradTol,
    CostTol,
    NumericalFailure,
}

/// Outcome summary of one run; `cost_history` holds accepted-step costs only
/// and is non-increasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub cost_history: Vec<f64>,
    pub final_grad_norm: f64,
    pub stop_reason: StopReason,
}

/// Draw initial parameters: W uniform on [−r, r] with r = √(6/(D + D_x)),
/// biases zero. Deterministic for a given `config.seed`.
pub fn init_params(config: &AeConfig) -> AeParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let r = (6.0 / (config.hidden_dim + config.input_dim) as f64).sqrt();
    let weights = Array2::from_shape_fn((config.hidden_dim, config.input_dim), |_| {
        rng.random_range(-r..r)
    });
    AeParams {
        weights,
        hidden_bias: Array1::zeros(config.hidden_dim),
        output_bias: Array1::zeros(config.input_dim),
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn is_nonfinite(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_))
}

/// Minimize `obj` from `w0` with Møller SCG.
///
/// Returns the parameters achieving the lowest observed cost. Evaluations
/// that turn non-finite after a successful start end the run with
/// [`StopReason::NumericalFailure`]; the best-so-far vector is still returned.
pub fn minimize(
    obj: &dyn Objective,
    w0: Array1<f64>,
    cfg: &TrainConfig,
) -> Result<(Array1<f64>, TrainReport)> {
    cfg.validate()?;
    if w0.len() != obj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial point has {} entries, objective expects {}",
            w0.len(),
            obj.dim()
        )));
    }
    let restart_period = obj.dim();

    let mut w = w0;
    let (mut f_curr, mut grad_curr) = obj.cost_grad(w.view())?;
    if !f_curr.is_finite() {
        return Err(Error::NonFinite("initial cost".into()));
    }

    let mut r = grad_curr.mapv(|g| -g);
    let mut p = r.clone();
    let mut lambda = cfg.lambda_init;
    let mut success = true;
    let mut delta_raw = 0.0;

    let mut best_w = w.clone();
    let mut best_f = f_curr;
    let mut cost_history = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut epochs_run = 0;

    'outer: for k in 1..=cfg.max_epochs {
        epochs_run = k;

        let mut p_norm2 = p.dot(&p);
        if p_norm2 == 0.0 {
            // Degenerate direction; fall back to steepest descent.
            p = r.clone();
            p_norm2 = p.dot(&p);
            success = true;
            if p_norm2 == 0.0 {
                stop_reason = StopReason::GradTol; // gradient is exactly zero
                break;
            }
        }

        if success {
            // Second-order information along the (new) direction.
            let sigma_k = cfg.sigma_scg / p_norm2.sqrt();
            let probe = &w + &p.mapv(|v| v * sigma_k);
            let grad_probe = match obj.grad(probe.view()) {
                Ok(g) => g,
                Err(e) if is_nonfinite(&e) => {
                    stop_reason = StopReason::NumericalFailure;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let s = (&grad_probe - &grad_curr) / sigma_k;
            delta_raw = p.dot(&s);
        }

        // Levenberg scaling; force positive definiteness along p.
        let mut delta = delta_raw + lambda * p_norm2;
        if delta <= 0.0 {
            lambda = -2.0 * delta_raw / p_norm2;
            delta = -delta_raw;
        }
        if !delta.is_finite() || !lambda.is_finite() {
            stop_reason = StopReason::NumericalFailure;
            break;
        }

        let mu = p.dot(&r);
        if mu <= 0.0 {
            // Not a descent direction; restart and spend the iteration.
            p = r.clone();
            success = true;
            continue;
        }
        let alpha = mu / delta;

        let w_new = &w + &p.mapv(|v| v * alpha);
        let (f_new, grad_new) = match obj.cost_grad(w_new.view()) {
            Ok(v) => v,
            Err(e) if is_nonfinite(&e) => {
                stop_reason = StopReason::NumericalFailure;
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        if !f_new.is_finite() {
            stop_reason = StopReason::NumericalFailure;
            break;
        }

        let big_delta = 2.0 * delta * (f_curr - f_new) / (mu * mu);

        if big_delta >= 0.0 {
            // Accepted step.
            let improvement = f_curr - f_new;
            w = w_new;
            f_curr = f_new;
            let r_new = grad_new.mapv(|g| -g);

            if k % restart_period == 0 {
                p = r_new.clone();
            } else {
                let beta = (r_new.dot(&r_new) - r_new.dot(&r)) / mu;
                p = &r_new + &p.mapv(|v| v * beta);
            }
            r = r_new;
            grad_curr = grad_new;
            success = true;
            if big_delta >= 0.75 {
                lambda *= 0.25;
            }

            cost_history.push(f_new);
            if f_new < best_f {
                best_f = f_new;
                best_w = w.clone();
            }

            let grad_norm = norm(&r);
            log::debug!(
                target: "scg",
                "epoch {k} cost {f_new:.6e} grad {grad_norm:.3e} lambda {lambda:.1e}"
            );
            if grad_norm < cfg.grad_tol || grad_norm == 0.0 {
                stop_reason = StopReason::GradTol;
                break;
            }
            if improvement < cfg.cost_tol {
                stop_reason = StopReason::CostTol;
                break;
            }
        } else {
            success = false;
            log::debug!(target: "scg", "epoch {k} rejected (Δ {big_delta:.3e}) lambda {lambda:.1e}");
        }

        if big_delta < 0.25 {
            lambda += delta * (1.0 - big_delta) / p_norm2;
        }
        if !lambda.is_finite() || lambda > 1e150 {
            stop_reason = StopReason::NumericalFailure;
            break;
        }
    }

    let report = TrainReport {
        epochs_run,
        cost_history,
        final_grad_norm: norm(&r),
        stop_reason,
    };
    Ok((best_w, report))
}

/// Autoencoder objective adapter for [`minimize`].
pub struct AeObjective<'a> {
    pub x: ArrayView2<'a, f64>,
    pub config: &'a AeConfig,
}

impl Objective for AeObjective<'_> {
    fn dim(&self) -> usize {
        self.config.hidden_dim * self.config.input_dim + self.config.hidden_dim + self.config.input_dim
    }

    fn cost(&self, w: ArrayView1<f64>) -> Result<f64> {
        let params = AeParams::from_flat(self.config.hidden_dim, self.config.input_dim, w)?;
        Ok(autoencoder::cost(&params, self.x, self.config)?.total)
    }

    fn cost_grad(&self, w: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
        let params = AeParams::from_flat(self.config.hidden_dim, self.config.input_dim, w)?;
        let (c, g) = autoencoder::cost_and_grad(&params, self.x, self.config)?;
        Ok((c.total, g.to_flat()))
    }
}

/// Train autoencoder parameters on a batch of scaled samples.
pub fn train(
    params0: AeParams,
    x: ArrayView2<f64>,
    ae_config: &AeConfig,
    train_config: &TrainConfig,
) -> Result<(AeParams, TrainReport)> {
    ae_config.validate()?;
    let obj = AeObjective { x, config: ae_config };
    let (w, report) = minimize(&obj, params0.to_flat(), train_config)?;
    let params = AeParams::from_flat(ae_config.hidden_dim, ae_config.input_dim, w.view())?;
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// f(w) = ‖w − target‖², minimum at target with value 0.
    struct Quadratic {
        target: Array1<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.target.len()
        }
        fn cost(&self, w: ArrayView1<f64>) -> Result<f64> {
            Ok((&w - &self.target).mapv(|d| d * d).sum())
        }
        fn cost_grad(&self, w: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
            let diff = &w - &self.target;
            Ok((diff.mapv(|d| d * d).sum(), diff.mapv(|d| 2.0 * d)))
        }
    }

    /// Anisotropic positive-definite quadratic Σ cᵢ(wᵢ − tᵢ)².
    struct ScaledQuadratic {
        target: Array1<f64>,
        scales: Array1<f64>,
    }

    impl Objective for ScaledQuadratic {
        fn dim(&self) -> usize {
            self.target.len()
        }
        fn cost(&self, w: ArrayView1<f64>) -> Result<f64> {
            Ok(w.iter()
                .zip(self.target.iter())
                .zip(self.scales.iter())
                .map(|((&wi, &ti), &ci)| ci * (wi - ti) * (wi - ti))
                .sum())
        }
        fn cost_grad(&self, w: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
            let g = Array1::from_iter(
                w.iter()
                    .zip(self.target.iter())
                    .zip(self.scales.iter())
                    .map(|((&wi, &ti), &ci)| 2.0 * ci * (wi - ti)),
            );
            Ok((self.cost(w)?, g))
        }
    }

    fn run_cfg(max_epochs: usize) -> TrainConfig {
        TrainConfig {
            max_epochs,
            grad_tol: 0.0,
            cost_tol: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn quadratic_converges_to_closed_form_optimum() {
        let target = Array1::from_vec(vec![1.5, -2.0, 0.25, 3.0, -0.5]);
        let obj = Quadratic { target: target.clone() };
        let w0 = Array1::from_vec(vec![10.0, -7.0, 4.0, 0.0, 2.0]);
        let cfg = TrainConfig {
            max_epochs: obj.dim(),
            grad_tol: 1e-12,
            cost_tol: 0.0,
            ..TrainConfig::default()
        };
        let (w, report) = minimize(&obj, w0, &cfg).unwrap();
        for (a, b) in w.iter().zip(target.iter()) {
            assert!((a - b).abs() < 1e-8, "component off: {a} vs {b}");
        }
        assert!(report.epochs_run <= obj.dim());
    }

    #[test]
    fn anisotropic_quadratic_converges_within_dim_iterations() {
        let target = Array1::from_vec(vec![0.3, -1.2, 2.5, 0.0, 1.1, -0.7]);
        let scales = Array1::from_vec(vec![0.5, 1.0, 2.0, 3.5, 0.8, 5.0]);
        let obj = ScaledQuadratic { target: target.clone(), scales };
        let w0 = Array1::from_elem(6, 5.0);
        let cfg = TrainConfig {
            max_epochs: 4 * obj.dim(),
            grad_tol: 1e-12,
            cost_tol: 0.0,
            ..TrainConfig::default()
        };
        let (w, _) = minimize(&obj, w0, &cfg).unwrap();
        for (a, b) in w.iter().zip(target.iter()) {
            assert!((a - b).abs() < 1e-8, "component off: {a} vs {b}");
        }
    }

    #[test]
    fn init_params_deterministic_and_bounded() {
        let cfg = AeConfig::new(12, 4);
        let a = init_params(&cfg);
        let b = init_params(&cfg);
        assert_eq!(a, b);
        let r = (6.0 / 16.0_f64).sqrt();
        assert_relative_eq!(r, 0.6124, epsilon = 1e-4);
        assert!(a.weights.iter().all(|w| w.abs() <= r));
        assert!(a.hidden_bias.iter().all(|&v| v == 0.0));
        assert!(a.output_bias.iter().all(|&v| v == 0.0));
        // Different seed, different draw.
        let mut cfg2 = cfg.clone();
        cfg2.seed = 1;
        assert_ne!(init_params(&cfg2), a);
    }

    fn sinusoid_batch(n: usize, dx: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, dx), |(i, j)| {
            let t = j as f64 / dx as f64;
            0.5 + 0.4 * (2.0 * std::f64::consts::PI * (3.0 * t + i as f64 * 0.1)).sin()
        })
    }

    #[test]
    fn autoencoder_training_reduces_mse() {
        let mut ae = AeConfig::new(12, 4);
        ae.l2_coeff = 1e-4;
        ae.sparsity_coeff = 0.01;
        ae.sparsity_target = 0.2;
        ae.seed = 3;
        let x = sinusoid_batch(32, 12);
        let params0 = init_params(&ae);
        let mse0 = autoencoder::cost(&params0, x.view(), &ae).unwrap().mse;
        let (params, report) = train(params0, x.view(), &ae, &run_cfg(200)).unwrap();
        let mse = autoencoder::cost(&params, x.view(), &ae).unwrap().mse;
        assert!(
            mse < 0.2 * mse0,
            "final MSE {mse} not below 0.2 × initial {mse0} (stop: {:?})",
            report.stop_reason
        );
    }

    #[test]
    fn accepted_cost_history_non_increasing() {
        let mut ae = AeConfig::new(10, 3);
        ae.seed = 5;
        let x = sinusoid_batch(16, 10);
        let (_, report) = train(init_params(&ae), x.view(), &ae, &run_cfg(120)).unwrap();
        assert!(!report.cost_history.is_empty());
        for pair in report.cost_history.windows(2) {
            assert!(pair[1] <= pair[0], "cost increased: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mut ae = AeConfig::new(10, 3);
        ae.seed = 9;
        let x = sinusoid_batch(16, 10);
        let (p1, r1) = train(init_params(&ae), x.view(), &ae, &run_cfg(60)).unwrap();
        let (p2, r2) = train(init_params(&ae), x.view(), &ae, &run_cfg(60)).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1.cost_history, r2.cost_history);
        assert_eq!(r1.epochs_run, r2.epochs_run);
    }

    #[test]
    fn zero_tolerances_run_exactly_max_epochs() {
        let mut ae = AeConfig::new(10, 3);
        ae.seed = 2;
        let x = sinusoid_batch(16, 10);
        let (_, report) = train(init_params(&ae), x.view(), &ae, &run_cfg(25)).unwrap();
        assert_eq!(report.epochs_run, 25);
        assert_eq!(report.stop_reason, StopReason::MaxEpochs);
    }

    #[test]
    fn max_epochs_zero_rejected_and_one_bounded() {
        let ae = AeConfig::new(10, 3);
        let x = sinusoid_batch(8, 10);
        let bad = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(init_params(&ae), x.view(), &ae, &bad).is_err());

        let (_, report) = train(init_params(&ae), x.view(), &ae, &run_cfg(1)).unwrap();
        assert_eq!(report.epochs_run, 1);
        assert!(report.cost_history.len() <= 1);
    }

    /// Objective that turns non-finite away from the origin.
    struct Exploding;
    impl Objective for Exploding {
        fn dim(&self) -> usize {
            2
        }
        fn cost(&self, w: ArrayView1<f64>) -> Result<f64> {
            let n = w.dot(&w);
            if n > 0.5 {
                Err(Error::NonFinite("cost".into()))
            } else {
                Ok(-n)
            }
        }
        fn cost_grad(&self, w: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
            Ok((self.cost(w)?, w.mapv(|v| -2.0 * v)))
        }
    }

    #[test]
    fn non_finite_evaluation_stops_with_numerical_failure() {
        let obj = Exploding;
        let w0 = Array1::from_vec(vec![0.3, 0.3]);
        let (w, report) = minimize(&obj, w0.clone(), &run_cfg(50)).unwrap();
        assert_eq!(report.stop_reason, StopReason::NumericalFailure);
        // Best-so-far parameters are still returned.
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|v| v.is_finite()));
        let _ = w0;
    }
}
