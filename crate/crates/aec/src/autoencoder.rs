//! Sparse tied-weight autoencoder: forward pass, composite cost, and its
//! exact analytic gradient.
//!
//! The network maps an input `x ∈ [0,1]^{D_x}` to a hidden code
//! `z = satlin(W x + b1) ∈ [0,1]^D` and reconstructs
//! `x̂ = satlin(Wᵀ z + b2)` with the *same* weight matrix used transposed on
//! the way back (tied weights — there is no separate decoder matrix).
//!
//! The training objective is
//!
//! ```text
//! C = (1/N) Σₙ ‖xₙ − x̂ₙ‖²  +  λ · (1/2) Σ wᵢⱼ²  +  σ · Σᵢ KL(ρ ‖ ρ̂ᵢ)
//! ```
//!
//! where `ρ̂ᵢ` is the mean activation of hidden unit `i` over the batch and
//! `KL` is the Bernoulli Kullback-Leibler divergence (natural log). The
//! gradient accounts for the weight matrix appearing in both layers and for
//! the sparsity term's dependence on the encoder output.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Hyperparameters and dimensions of the autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Input dimension `D_x` (length of one vibration sample).
    pub input_dim: usize,
    /// Hidden dimension `D`; must be strictly smaller than `input_dim`.
    pub hidden_dim: usize,
    /// L2 weight-penalty coefficient λ.
    pub l2_coeff: f64,
    /// Sparsity-penalty coefficient σ.
    pub sparsity_coeff: f64,
    /// Desired mean activation ρ of each hidden unit, in (0, 1).
    pub sparsity_target: f64,
    /// Clamp half-width for ρ̂ before KL evaluation, keeps logs finite.
    pub kl_epsilon: f64,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl AeConfig {
    /// Config with the default hyperparameters: λ = 0.001, σ = 1, ρ = 0.05.
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            l2_coeff: 1e-3,
            sparsity_coeff: 1.0,
            sparsity_target: 0.05,
            kl_epsilon: 1e-8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Invalid("dimensions must be positive".into()));
        }
        if self.hidden_dim >= self.input_dim {
            return Err(Error::Invalid(format!(
                "hidden_dim {} must be smaller than input_dim {} (compression constraint)",
                self.hidden_dim, self.input_dim
            )));
        }
        if !(self.sparsity_target > 0.0 && self.sparsity_target < 1.0) {
            return Err(Error::Invalid(format!(
                "sparsity_target must lie in (0,1), got {}",
                self.sparsity_target
            )));
        }
        if self.l2_coeff < 0.0 || self.sparsity_coeff < 0.0 {
            return Err(Error::Invalid("penalty coefficients must be nonnegative".into()));
        }
        if !(self.kl_epsilon > 0.0 && self.kl_epsilon < 0.5) {
            return Err(Error::Invalid(format!(
                "kl_epsilon must lie in (0, 0.5), got {}",
                self.kl_epsilon
            )));
        }
        Ok(())
    }
}

/// Tied encoder/decoder parameters.
///
/// `weights` is `hidden_dim × input_dim`; the decoder uses its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct AeParams {
    pub weights: Array2<f64>,
    pub hidden_bias: Array1<f64>,
    pub output_bias: Array1<f64>,
}

impl AeParams {
    pub fn zeros(hidden_dim: usize, input_dim: usize) -> Self {
        Self {
            weights: Array2::zeros((hidden_dim, input_dim)),
            hidden_bias: Array1::zeros(hidden_dim),
            output_bias: Array1::zeros(input_dim),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Total number of scalar parameters (W, b1, b2).
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.hidden_bias.len() + self.output_bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
            && self.output_bias.iter().all(|v| v.is_finite())
    }

    /// Flatten to a single vector ordered W (row-major), b1, b2.
    pub fn to_flat(&self) -> Array1<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend(self.weights.iter());
        flat.extend(self.hidden_bias.iter());
        flat.extend(self.output_bias.iter());
        Array1::from_vec(flat)
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn from_flat(hidden_dim: usize, input_dim: usize, flat: ArrayView1<f64>) -> Result<Self> {
        let expected = hidden_dim * input_dim + hidden_dim + input_dim;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                expected
            )));
        }
        let wn = hidden_dim * input_dim;
        let weights =
            Array2::from_shape_vec((hidden_dim, input_dim), flat.slice(ndarray::s![..wn]).to_vec())
                .expect("shape checked above");
        let hidden_bias = flat.slice(ndarray::s![wn..wn + hidden_dim]).to_owned();
        let output_bias = flat.slice(ndarray::s![wn + hidden_dim..]).to_owned();
        Ok(Self {
            weights,
            hidden_bias,
            output_bias,
        })
    }

    fn check_config(&self, config: &AeConfig) -> Result<()> {
        if self.hidden_dim() != config.hidden_dim || self.input_dim() != config.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "params are {}×{} but config says {}×{}",
                self.hidden_dim(),
                self.input_dim(),
                config.hidden_dim,
                config.input_dim
            )));
        }
        Ok(())
    }
}

/// Cost decomposition of one evaluation of the objective.
#[derive(Debug, Clone)]
pub struct CostBreakdown {
    /// `mse + l2_coeff·l2 + sparsity_coeff·sparsity`.
    pub total: f64,
    pub mse: f64,
    pub l2: f64,
    pub sparsity: f64,
    /// Mean activation of each hidden unit over the batch (unclamped).
    pub rho_hat: Array1<f64>,
}

/// Gradient of [`cost`] with respect to every parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Array2<f64>,
    pub d_hidden_bias: Array1<f64>,
    pub d_output_bias: Array1<f64>,
}

impl Gradients {
    pub fn to_flat(&self) -> Array1<f64> {
        let mut flat = Vec::with_capacity(
            self.d_weights.len() + self.d_hidden_bias.len() + self.d_output_bias.len(),
        );
        flat.extend(self.d_weights.iter());
        flat.extend(self.d_hidden_bias.iter());
        flat.extend(self.d_output_bias.iter());
        Array1::from_vec(flat)
    }
}

/// Saturating linear transfer function: clamps to 0 below 0 and to 1 above 1,
/// identity in between.
#[inline]
pub fn satlin(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        z
    }
}

/// Subgradient of [`satlin`]: 1 on the open interval (0,1), 0 elsewhere
/// including both boundary points (closed saturation).
#[inline]
pub fn satlin_deriv(z: f64) -> f64 {
    if z > 0.0 && z < 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Encode one sample: `z = satlin(W x + b1)`.
pub fn encode(params: &AeParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    if x.len() != params.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "encode: input has length {}, expected {}",
            x.len(),
            params.input_dim()
        )));
    }
    let mut a = params.weights.dot(&x);
    a += &params.hidden_bias;
    Ok(a.mapv(satlin))
}

/// Decode one code: `x̂ = satlin(Wᵀ z + b2)`.
pub fn decode(params: &AeParams, z: ArrayView1<f64>) -> Result<Array1<f64>> {
    if z.len() != params.hidden_dim() {
        return Err(Error::DimensionMismatch(format!(
            "decode: code has length {}, expected {}",
            z.len(),
            params.hidden_dim()
        )));
    }
    let mut a = params.weights.t().dot(&z);
    a += &params.output_bias;
    Ok(a.mapv(satlin))
}

/// Encode a batch; rows of `x` are samples, rows of the result are codes.
pub fn encode_batch(params: &AeParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "encode_batch: samples have {} columns, expected {}",
            x.ncols(),
            params.input_dim()
        )));
    }
    let mut a = x.dot(&params.weights.t());
    a += &params.hidden_bias;
    Ok(a.mapv(satlin))
}

/// Bernoulli KL divergence `KL(ρ ‖ ρ̂)` with ρ̂ clamped to `[eps, 1−eps]`.
///
/// Natural logarithm; zero exactly when the clamped ρ̂ equals ρ.
pub fn kl_divergence(rho: f64, rho_hat: f64, eps: f64) -> f64 {
    let r = rho_hat.clamp(eps, 1.0 - eps);
    rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln()
}

/// Derivative of `KL(ρ ‖ clamp(ρ̂))` with respect to ρ̂.
///
/// Zero outside the open clamp interval, matching the clamped forward value.
#[inline]
fn kl_deriv(rho: f64, rho_hat: f64, eps: f64) -> f64 {
    if rho_hat > eps && rho_hat < 1.0 - eps {
        -rho / rho_hat + (1.0 - rho) / (1.0 - rho_hat)
    } else {
        0.0
    }
}

fn check_batch(params: &AeParams, x: &ArrayView2<f64>, config: &AeConfig) -> Result<()> {
    config.validate()?;
    params.check_config(config)?;
    if x.nrows() == 0 {
        return Err(Error::Invalid("cost requires at least one sample".into()));
    }
    if x.ncols() != config.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} columns, expected {}",
            x.ncols(),
            config.input_dim
        )));
    }
    Ok(())
}

/// Evaluate the composite cost on a batch of scaled samples.
pub fn cost(params: &AeParams, x: ArrayView2<f64>, config: &AeConfig) -> Result<CostBreakdown> {
    check_batch(params, &x, config)?;
    let n = x.nrows() as f64;

    let z = encode_batch(params, x)?;
    let mut a2 = z.dot(&params.weights);
    a2 += &params.output_bias;
    let xhat = a2.mapv(satlin);

    let mut mse = 0.0;
    for (xr, hr) in x.outer_iter().zip(xhat.outer_iter()) {
        for (&a, &b) in xr.iter().zip(hr.iter()) {
            let d = a - b;
            mse += d * d;
        }
    }
    mse /= n;

    let l2 = 0.5 * params.weights.iter().map(|w| w * w).sum::<f64>();

    let rho_hat = z.mean_axis(Axis(0)).expect("non-empty batch");
    let sparsity = rho_hat
        .iter()
        .map(|&rh| kl_divergence(config.sparsity_target, rh, config.kl_epsilon))
        .sum::<f64>();

    let total = mse + config.l2_coeff * l2 + config.sparsity_coeff * sparsity;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "cost (mse={mse}, l2={l2}, sparsity={sparsity})"
        )));
    }
    Ok(CostBreakdown {
        total,
        mse,
        l2,
        sparsity,
        rho_hat,
    })
}

/// Exact gradient of [`cost`] with respect to W, b1, b2.
///
/// Handles the tied weights (W contributes through both layers), the sparsity
/// term's dependence on the mean activation, and the satlin subgradient.
pub fn gradient(params: &AeParams, x: ArrayView2<f64>, config: &AeConfig) -> Result<Gradients> {
    cost_and_grad(params, x, config).map(|(_, g)| g)
}

/// Fused cost + gradient evaluation; one forward pass shared by both.
pub fn cost_and_grad(
    params: &AeParams,
    x: ArrayView2<f64>,
    config: &AeConfig,
) -> Result<(CostBreakdown, Gradients)> {
    check_batch(params, &x, config)?;
    let n = x.nrows() as f64;
    let w = &params.weights;

    // Forward.
    let mut a1 = x.dot(&w.t());
    a1 += &params.hidden_bias;
    let z = a1.mapv(satlin);
    let mut a2 = z.dot(w);
    a2 += &params.output_bias;
    let xhat = a2.mapv(satlin);

    // Cost pieces.
    let mut mse = 0.0;
    for (xr, hr) in x.outer_iter().zip(xhat.outer_iter()) {
        for (&a, &b) in xr.iter().zip(hr.iter()) {
            let d = a - b;
            mse += d * d;
        }
    }
    mse /= n;
    let l2 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let rho_hat = z.mean_axis(Axis(0)).expect("non-empty batch");
    let sparsity = rho_hat
        .iter()
        .map(|&rh| kl_divergence(config.sparsity_target, rh, config.kl_epsilon))
        .sum::<f64>();
    let total = mse + config.l2_coeff * l2 + config.sparsity_coeff * sparsity;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "cost (mse={mse}, l2={l2}, sparsity={sparsity})"
        )));
    }

    // Backward. δ2 = (2/N)(x̂ − x) ⊙ f'(a2), shape N × D_x.
    let mut delta2 = &xhat - &x;
    delta2.mapv_inplace(|v| v * 2.0 / n);
    delta2.zip_mut_with(&a2, |d, &a| *d *= satlin_deriv(a));

    let dw_dec = z.t().dot(&delta2); // D × D_x
    let d_output_bias = delta2.sum_axis(Axis(0));

    // Into the code: reconstruction path plus the sparsity path through ρ̂.
    let kl_row = rho_hat.mapv(|rh| {
        config.sparsity_coeff / n * kl_deriv(config.sparsity_target, rh, config.kl_epsilon)
    });
    let mut dz = delta2.dot(&w.t()); // N × D
    dz += &kl_row;

    // δ1 = dz ⊙ f'(a1).
    let mut delta1 = dz;
    delta1.zip_mut_with(&a1, |d, &a| *d *= satlin_deriv(a));

    let dw_enc = delta1.t().dot(&x); // D × D_x
    let d_hidden_bias = delta1.sum_axis(Axis(0));

    let mut d_weights = dw_enc + dw_dec;
    d_weights.zip_mut_with(w, |g, &wv| *g += config.l2_coeff * wv);

    if d_weights.iter().any(|v| !v.is_finite())
        || d_hidden_bias.iter().any(|v| !v.is_finite())
        || d_output_bias.iter().any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("gradient".into()));
    }

    Ok((
        CostBreakdown {
            total,
            mse,
            l2,
            sparsity,
            rho_hat,
        },
        Gradients {
            d_weights,
            d_hidden_bias,
            d_output_bias,
        },
    ))
}

// ---------------------------------------------------------------------------
// Parameter serialization
// ---------------------------------------------------------------------------

const BINARY_MAGIC: &[u8; 4] = b"AEPB";
const BINARY_VERSION: u32 = 1;

/// Write params + config echo as versioned flat binary (little-endian f64
/// bits, W row-major). Round-trips bit-exactly.
pub fn save_binary(params: &AeParams, config: &AeConfig, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + 8 * params.param_count());
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.hidden_dim as u64).to_le_bytes());
    buf.extend_from_slice(&(config.input_dim as u64).to_le_bytes());
    for v in [
        config.l2_coeff,
        config.sparsity_coeff,
        config.sparsity_target,
        config.kl_epsilon,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&config.seed.to_le_bytes());
    for &v in params
        .weights
        .iter()
        .chain(params.hidden_bias.iter())
        .chain(params.output_bias.iter())
    {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Read back a file written by [`save_binary`].
pub fn load_binary(path: &Path) -> Result<(AeParams, AeConfig)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(Error::Decode("truncated parameter file".into()));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };

    if take(&mut off, 4)? != BINARY_MAGIC {
        return Err(Error::Decode("not a parameter file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let hidden_dim = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let input_dim = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()) as usize;
    let f64_at = |off: &mut usize| -> Result<f64> {
        Ok(f64::from_le_bytes(take(off, 8)?.try_into().unwrap()))
    };
    let l2_coeff = f64_at(&mut off)?;
    let sparsity_coeff = f64_at(&mut off)?;
    let sparsity_target = f64_at(&mut off)?;
    let kl_epsilon = f64_at(&mut off)?;
    let seed = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());

    let count = hidden_dim * input_dim + hidden_dim + input_dim;
    if bytes.len() - off != 8 * count {
        return Err(Error::Decode(format!(
            "payload holds {} bytes, expected {}",
            bytes.len() - off,
            8 * count
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
    }
    let params = AeParams::from_flat(hidden_dim, input_dim, Array1::from_vec(values).view())?;
    let config = AeConfig {
        input_dim,
        hidden_dim,
        l2_coeff,
        sparsity_coeff,
        sparsity_target,
        kl_epsilon,
        seed,
    };
    Ok((params, config))
}

/// JSON form of the same payload, for humans and other tools.
#[derive(Serialize, Deserialize)]
struct ParamsJson {
    version: u32,
    config: AeConfig,
    weights_row_major: Vec<f64>,
    hidden_bias: Vec<f64>,
    output_bias: Vec<f64>,
}

pub fn save_json(params: &AeParams, config: &AeConfig, path: &Path) -> Result<()> {
    let doc = ParamsJson {
        version: BINARY_VERSION,
        config: config.clone(),
        weights_row_major: params.weights.iter().copied().collect(),
        hidden_bias: params.hidden_bias.to_vec(),
        output_bias: params.output_bias.to_vec(),
    };
    let text = serde_json::to_string(&doc).map_err(|e| Error::Decode(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_json(path: &Path) -> Result<(AeParams, AeConfig)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ParamsJson = serde_json::from_str(&text).map_err(|e| Error::Decode(e.to_string()))?;
    let cfg = doc.config;
    let mut flat = doc.weights_row_major;
    flat.extend(doc.hidden_bias);
    flat.extend(doc.output_bias);
    let params = AeParams::from_flat(cfg.hidden_dim, cfg.input_dim, Array1::from_vec(flat).view())?;
    Ok((params, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn tiny_config(input_dim: usize, hidden_dim: usize) -> AeConfig {
        AeConfig {
            input_dim,
            hidden_dim,
            l2_coeff: 0.0,
            sparsity_coeff: 0.0,
            sparsity_target: 0.05,
            kl_epsilon: 1e-8,
            seed: 0,
        }
    }

    // -- satlin ---------------------------------------------------------------

    #[test]
    fn satlin_branches() {
        assert_eq!(satlin(-0.5), 0.0);
        assert_eq!(satlin(0.37), 0.37);
        assert_eq!(satlin(2.0), 1.0);
        assert_eq!(satlin(0.0), 0.0);
        assert_eq!(satlin(1.0), 1.0);
    }

    #[test]
    fn satlin_deriv_closed_saturation() {
        assert_eq!(satlin_deriv(0.0), 0.0);
        assert_eq!(satlin_deriv(1.0), 0.0);
        assert_eq!(satlin_deriv(0.5), 1.0);
        assert_eq!(satlin_deriv(-3.0), 0.0);
    }

    // -- encode / decode ------------------------------------------------------

    #[test]
    fn encode_zero_map() {
        let params = AeParams::zeros(3, 5);
        let z = encode(&params, array![0.2, 0.4, 0.6, 0.8, 1.0].view()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_linear_region_and_saturation() {
        let params = AeParams {
            weights: array![[1.0, 1.0]],
            hidden_bias: array![-0.5],
            output_bias: Array1::zeros(2),
        };
        let z = encode(&params, array![0.5, 0.5].view()).unwrap();
        assert_relative_eq!(z[0], 0.5, max_relative = 1e-15);

        let params = AeParams {
            weights: array![[3.0, 3.0]],
            hidden_bias: array![0.0],
            output_bias: Array1::zeros(2),
        };
        let z = encode(&params, array![0.5, 0.5].view()).unwrap();
        assert_eq!(z[0], 1.0);
    }

    #[test]
    fn decode_examples() {
        let params = AeParams {
            weights: array![[0.5, 1.0]],
            hidden_bias: array![0.0],
            output_bias: array![0.0, 0.0],
        };
        let xhat = decode(&params, array![1.0].view()).unwrap();
        assert_eq!(xhat[0], 0.5);
        assert_eq!(xhat[1], 1.0);

        let zero = decode(&params, array![0.0].view()).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let saturating = AeParams {
            weights: array![[0.5, 1.0]],
            hidden_bias: array![0.0],
            output_bias: array![2.0, 2.0],
        };
        let xhat = decode(&saturating, array![0.3].view()).unwrap();
        assert!(xhat.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn encode_dimension_mismatch() {
        let params = AeParams::zeros(2, 4);
        assert!(encode(&params, array![1.0, 2.0].view()).is_err());
        assert!(decode(&params, array![1.0].view()).is_err());
    }

    // -- KL divergence --------------------------------------------------------

    #[test]
    fn kl_zero_at_target() {
        assert_eq!(kl_divergence(0.05, 0.05, 1e-8), 0.0);
    }

    #[test]
    fn kl_hand_value() {
        // 0.5·ln2 + 0.5·ln(0.5/0.75)
        let expected = 0.5 * 2.0_f64.ln() + 0.5 * (0.5_f64 / 0.75).ln();
        assert_relative_eq!(kl_divergence(0.5, 0.25, 1e-8), expected, max_relative = 1e-12);
        assert_relative_eq!(kl_divergence(0.5, 0.25, 1e-8), 0.143841, epsilon = 1e-6);
    }

    #[test]
    fn kl_clamps_instead_of_overflowing() {
        let v = kl_divergence(0.05, 0.0, 1e-8);
        assert!(v.is_finite());
        assert!(v > 0.5);
        let v = kl_divergence(0.05, 1.0, 1e-8);
        assert!(v.is_finite());
    }

    // -- cost -----------------------------------------------------------------

    #[test]
    fn cost_zero_network_zero_data() {
        let cfg = tiny_config(4, 2);
        let params = AeParams::zeros(2, 4);
        let x = Array2::zeros((3, 4));
        let c = cost(&params, x.view(), &cfg).unwrap();
        assert_eq!(c.total, 0.0);
        assert_eq!(c.mse, 0.0);
        assert_eq!(c.l2, 0.0);
    }

    #[test]
    fn cost_reduces_to_mse_when_coeffs_zero() {
        let cfg = tiny_config(3, 2);
        let params = AeParams {
            weights: array![[0.2, -0.1, 0.3], [0.1, 0.4, -0.2]],
            hidden_bias: array![0.1, 0.2],
            output_bias: array![0.3, 0.1, 0.2],
        };
        let x = array![[0.1, 0.5, 0.9], [0.4, 0.2, 0.6]];
        let c = cost(&params, x.view(), &cfg).unwrap();
        // Direct MSE
        let mut expected = 0.0;
        for row in x.outer_iter() {
            let z = encode(&params, row).unwrap();
            let xhat = decode(&params, z.view()).unwrap();
            for (a, b) in row.iter().zip(xhat.iter()) {
                expected += (a - b) * (a - b);
            }
        }
        expected /= 2.0;
        assert_relative_eq!(c.total, expected, max_relative = 1e-14);
        assert_relative_eq!(c.total, c.mse, max_relative = 1e-14);
    }

    /// Direct-summation oracle: plain nested loops, no shared code with the
    /// implementation path.
    fn cost_oracle(params: &AeParams, x: &Array2<f64>, cfg: &AeConfig) -> f64 {
        let n = x.nrows();
        let d = cfg.hidden_dim;
        let dx = cfg.input_dim;
        let mut mse = 0.0;
        let mut rho = vec![0.0; d];
        for s in 0..n {
            let mut z = vec![0.0; d];
            for i in 0..d {
                let mut a = params.hidden_bias[i];
                for j in 0..dx {
                    a += params.weights[[i, j]] * x[[s, j]];
                }
                z[i] = satlin(a);
                rho[i] += z[i];
            }
            for j in 0..dx {
                let mut a = params.output_bias[j];
                for i in 0..d {
                    a += params.weights[[i, j]] * z[i];
                }
                let diff = x[[s, j]] - satlin(a);
                mse += diff * diff;
            }
        }
        mse /= n as f64;
        let mut l2 = 0.0;
        for i in 0..d {
            for j in 0..dx {
                l2 += params.weights[[i, j]] * params.weights[[i, j]];
            }
        }
        l2 *= 0.5;
        let mut sparse = 0.0;
        for r in &rho {
            sparse += kl_divergence(cfg.sparsity_target, r / n as f64, cfg.kl_epsilon);
        }
        mse + cfg.l2_coeff * l2 + cfg.sparsity_coeff * sparse
    }

    fn random_instance(seed: u64, dx: usize, d: usize, n: usize) -> (AeParams, Array2<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Small weights and mid-range biases keep every pre-activation inside
        // (0,1) so the gradient has no satlin kinks nearby.
        let weights =
            Array2::from_shape_fn((d, dx), |_| rng.random_range(-0.05..0.05));
        let hidden_bias = Array1::from_shape_fn(d, |_| rng.random_range(0.3..0.7));
        let output_bias = Array1::from_shape_fn(dx, |_| rng.random_range(0.3..0.7));
        let x = Array2::from_shape_fn((n, dx), |_| rng.random_range(0.0..1.0));
        (
            AeParams {
                weights,
                hidden_bias,
                output_bias,
            },
            x,
        )
    }

    #[test]
    fn cost_matches_direct_summation_oracle() {
        let mut cfg = AeConfig::new(6, 3);
        cfg.l2_coeff = 0.01;
        cfg.sparsity_coeff = 0.5;
        cfg.sparsity_target = 0.2;
        let (params, x) = random_instance(42, 6, 3, 4);
        let c = cost(&params, x.view(), &cfg).unwrap();
        let oracle = cost_oracle(&params, &x, &cfg);
        assert_relative_eq!(c.total, oracle, max_relative = 1e-12);
        // Decomposition identity.
        let rebuilt = c.mse + cfg.l2_coeff * c.l2 + cfg.sparsity_coeff * c.sparsity;
        assert_relative_eq!(c.total, rebuilt, max_relative = 1e-12);
    }

    #[test]
    fn cost_row_permutation_invariant() {
        let mut cfg = AeConfig::new(5, 2);
        cfg.l2_coeff = 0.01;
        cfg.sparsity_coeff = 0.3;
        cfg.sparsity_target = 0.3;
        let (params, x) = random_instance(7, 5, 2, 6);
        let c1 = cost(&params, x.view(), &cfg).unwrap().total;
        let perm = [3usize, 0, 5, 1, 4, 2];
        let shuffled = ndarray::stack(
            Axis(0),
            &perm.iter().map(|&i| x.row(i)).collect::<Vec<_>>(),
        )
        .unwrap();
        let c2 = cost(&params, shuffled.view(), &cfg).unwrap().total;
        assert_relative_eq!(c1, c2, max_relative = 1e-12);
    }

    #[test]
    fn cost_hidden_unit_relabel_invariant_without_sparsity() {
        let mut cfg = AeConfig::new(5, 3);
        cfg.l2_coeff = 0.02;
        cfg.sparsity_coeff = 0.0;
        let (params, x) = random_instance(11, 5, 3, 4);
        let c1 = cost(&params, x.view(), &cfg).unwrap().total;
        let perm = [2usize, 0, 1];
        let weights = ndarray::stack(
            Axis(0),
            &perm.iter().map(|&i| params.weights.row(i)).collect::<Vec<_>>(),
        )
        .unwrap();
        let hidden_bias = Array1::from_vec(perm.iter().map(|&i| params.hidden_bias[i]).collect());
        let relabeled = AeParams {
            weights,
            hidden_bias,
            output_bias: params.output_bias.clone(),
        };
        let c2 = cost(&relabeled, x.view(), &cfg).unwrap().total;
        assert_relative_eq!(c1, c2, max_relative = 1e-12);
    }

    // -- gradient ---------------------------------------------------------------

    /// Central-difference gradient of the full cost over every parameter.
    pub(crate) fn fd_gradient(
        params: &AeParams,
        x: &Array2<f64>,
        cfg: &AeConfig,
        h: f64,
    ) -> Array1<f64> {
        let flat = params.to_flat();
        let mut g = Array1::zeros(flat.len());
        for k in 0..flat.len() {
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let pp = AeParams::from_flat(cfg.hidden_dim, cfg.input_dim, plus.view()).unwrap();
            let pm = AeParams::from_flat(cfg.hidden_dim, cfg.input_dim, minus.view()).unwrap();
            let cp = cost(&pp, x.view(), cfg).unwrap().total;
            let cm = cost(&pm, x.view(), cfg).unwrap().total;
            g[k] = (cp - cm) / (2.0 * h);
        }
        g
    }

    pub(crate) fn max_relative_error(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut cfg = AeConfig::new(8, 4);
        cfg.l2_coeff = 0.01;
        cfg.sparsity_coeff = 0.5;
        cfg.sparsity_target = 0.2;
        for seed in 0..5 {
            let (params, x) = random_instance(seed, 8, 4, 5);
            let g = gradient(&params, x.view(), &cfg).unwrap().to_flat();
            let fd = fd_gradient(&params, &x, &cfg, 1e-6);
            let err = max_relative_error(&g, &fd);
            assert!(err < 1e-5, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn gradient_zero_at_exact_fixed_point() {
        // Constant rows reproduced exactly through saturated-off weights:
        // W = 0, b2 = x row, z strictly inside (0,1).
        let cfg = tiny_config(4, 2);
        let c = 0.42;
        let params = AeParams {
            weights: Array2::zeros((2, 4)),
            hidden_bias: array![0.3, 0.6],
            output_bias: Array1::from_elem(4, c),
        };
        let x = Array2::from_elem((3, 4), c);
        let g = gradient(&params, x.view(), &cfg).unwrap();
        assert!(g.d_weights.iter().all(|&v| v == 0.0));
        assert!(g.d_hidden_bias.iter().all(|&v| v == 0.0));
        assert!(g.d_output_bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_hand_derived_linear_region_formula() {
        // W = 0 so the encoder passes b1 straight through; only the decoder
        // path is active and dW[i][j] = b1_i · (2/N) Σ_n (satlin(b2_j) − x_jn).
        let cfg = tiny_config(2, 1);
        let params = AeParams {
            weights: Array2::zeros((1, 2)),
            hidden_bias: array![0.4],
            output_bias: array![0.5, 0.7],
        };
        let x = array![[0.2, 0.9], [0.6, 0.3]];
        let g = gradient(&params, x.view(), &cfg).unwrap();
        let n = 2.0;
        for j in 0..2 {
            let xhat_j = satlin(params.output_bias[j]);
            let expected = params.hidden_bias[0]
                * (2.0 / n)
                * ((xhat_j - x[[0, j]]) + (xhat_j - x[[1, j]]));
            assert_relative_eq!(g.d_weights[[0, j]], expected, max_relative = 1e-12);
        }
    }

    // -- serialization ----------------------------------------------------------

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let mut cfg = AeConfig::new(6, 3);
        cfg.seed = 99;
        let (params, _) = random_instance(5, 6, 3, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.aepb");
        save_binary(&params, &cfg, &path).unwrap();
        let (restored, rcfg) = load_binary(&path).unwrap();
        assert_eq!(rcfg, cfg);
        for (a, b) in params.to_flat().iter().zip(restored.to_flat().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_roundtrip() {
        let cfg = AeConfig::new(4, 2);
        let (params, _) = random_instance(3, 4, 2, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        save_json(&params, &cfg, &path).unwrap();
        let (restored, rcfg) = load_json(&path).unwrap();
        assert_eq!(rcfg, cfg);
        assert_eq!(params, restored);
    }

    #[test]
    fn config_validation() {
        assert!(AeConfig::new(4, 4).validate().is_err());
        assert!(AeConfig::new(4, 2).validate().is_ok());
        let mut c = AeConfig::new(4, 2);
        c.sparsity_target = 1.0;
        assert!(c.validate().is_err());
    }
}
