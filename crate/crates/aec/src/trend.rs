//! Correlation trend analysis: turn encoded feature vectors into the AEC
//! health rate.
//!
//! Each sample's feature vector is compared to the first (healthy) sample via
//! the Pearson correlation coefficient; the resulting series is min-max
//! normalized to [0,1] and smoothed with a trailing moving-average window.
//! A rate near 1 means the sample still resembles the healthy reference; a
//! falling rate means degradation.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Spread below which a correlation series is treated as flat (fully
/// healthy): min-max normalization of pure noise would otherwise stretch it
/// to full scale and fabricate degradation. A genuine degradation drop moves
/// the reference correlation by an order of magnitude more than this.
pub const DEFAULT_FLAT_TOL: f64 = 0.05;

/// Row-major matrix of per-sample feature vectors, one row per catalog
/// sample, entries in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn from_array(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() < 2 {
            return Err(Error::Invalid(
                "feature matrix needs at least 1 row and 2 columns".into(),
            ));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        if rows.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Invalid("feature entries must lie in [0,1]".into()));
        }
        Ok(Self(rows))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n_samples(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }
}

// ---------------------------------------------------------------------------
// Pearson correlation
// ---------------------------------------------------------------------------

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pearson correlation coefficient of two equal-length vectors, using sample
/// (1/(D−1)) standard deviations.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "pearson: lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Invalid("pearson needs at least 2 entries".into()));
    }
    let (mu_a, sd_a) = mean_std(a);
    let (mu_b, sd_b) = mean_std(b);
    if sd_a == 0.0 {
        return Err(Error::ZeroVariance { role: "first argument", index: 0 });
    }
    if sd_b == 0.0 {
        return Err(Error::ZeroVariance { role: "second argument", index: 0 });
    }
    let inv = 1.0 / ((a.len() - 1) as f64 * sd_a * sd_b);
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - mu_a) * (y - mu_b))
        .sum();
    Ok(sum * inv)
}

/// Rows standardized to zero mean and unit sample std, so that the
/// correlation of rows i and j is `uᵢ·uⱼ / (D−1)`.
fn standardize_rows(f: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(f.n_samples());
    for (i, row) in f.0.outer_iter().enumerate() {
        let slice: Vec<f64> = row.to_vec();
        let (mu, sd) = mean_std(&slice);
        if sd == 0.0 {
            return Err(Error::ZeroVariance { role: "feature row", index: i });
        }
        out.push(slice.iter().map(|&x| (x - mu) / sd).collect());
    }
    Ok(out)
}

fn standardized_dot(a: &[f64], b: &[f64]) -> f64 {
    let inv = 1.0 / (a.len() - 1) as f64;
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum::<f64>() * inv
}

/// Full correlation-coefficient matrix of the feature rows.
///
/// Only the upper triangle is computed; it is mirrored so the result is
/// exactly symmetric, and the diagonal is exactly 1.
pub fn cc_matrix(f: &FeatureMatrix) -> Result<Array2<f64>> {
    let n = f.n_samples();
    let std_rows = standardize_rows(f)?;
    let mut cc = Array2::zeros((n, n));
    for i in 0..n {
        cc[[i, i]] = 1.0;
        for j in i + 1..n {
            let r = standardized_dot(&std_rows[i], &std_rows[j]);
            cc[[i, j]] = r;
            cc[[j, i]] = r;
        }
    }
    Ok(cc)
}

/// Column `ref_index` of a correlation matrix: the correlation of the
/// reference sample with every sample.
pub fn reference_series(cc: &Array2<f64>, ref_index: usize) -> Result<Vec<f64>> {
    if ref_index >= cc.nrows() {
        return Err(Error::Invalid(format!(
            "reference index {ref_index} out of range for {} samples",
            cc.nrows()
        )));
    }
    Ok(cc.column(ref_index).to_vec())
}

/// Correlation of every feature row against the reference row, computed
/// directly (no matrix). Matches the corresponding [`cc_matrix`] column
/// bit-for-bit and costs O(N·D).
pub fn reference_correlations(f: &FeatureMatrix, ref_index: usize) -> Result<Vec<f64>> {
    if ref_index >= f.n_samples() {
        return Err(Error::Invalid(format!(
            "reference index {ref_index} out of range for {} samples",
            f.n_samples()
        )));
    }
    let std_rows = standardize_rows(f)?;
    let mut out = Vec::with_capacity(f.n_samples());
    for (t, row) in std_rows.iter().enumerate() {
        if t == ref_index {
            out.push(1.0);
        } else {
            // Same operand order as the upper-triangle pass of cc_matrix.
            let (a, b) = if ref_index < t {
                (&std_rows[ref_index], row)
            } else {
                (row, &std_rows[ref_index])
            };
            out.push(standardized_dot(a, b));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Normalization and filtering
// ---------------------------------------------------------------------------

/// Min-max normalize into [0,1]. A constant vector (max = min) maps to all
/// ones: no spread means no observable degradation.
pub fn normalize_minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        let span = hi - lo;
        v.iter().map(|&x| (x - lo) / span).collect()
    } else {
        vec![1.0; v.len()]
    }
}

/// Trailing moving-average filter, truncated at the start so the output has
/// the same length as the input: `out[n] = mean(y[max(0, n−w+1) ..= n])`.
pub fn ma_filter(y: &[f64], w_size: usize) -> Result<Vec<f64>> {
    if w_size == 0 {
        return Err(Error::Invalid("window size must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(y.len());
    for n in 0..y.len() {
        let start = n + 1 - w_size.min(n + 1);
        let window = &y[start..=n];
        out.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// AEC rate pipeline
// ---------------------------------------------------------------------------

/// Stage order of the rate pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOrder {
    /// Normalize the raw correlations, then filter (default).
    NormalizeThenFilter,
    /// Filter the raw correlations, then normalize.
    FilterThenNormalize,
}

/// Knobs of [`aec_rate_with`]; `Default` matches [`aec_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AecOptions {
    /// Raw-correlation spread at or below which the series counts as flat.
    pub flat_tol: f64,
    pub order: StageOrder,
    /// Average the first k feature rows as the reference (k = 1: single row).
    pub reference_rows: usize,
}

impl Default for AecOptions {
    fn default() -> Self {
        Self {
            flat_tol: DEFAULT_FLAT_TOL,
            order: StageOrder::NormalizeThenFilter,
            reference_rows: 1,
        }
    }
}

/// Per-sample health indicator with all pipeline stages retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AecSeries {
    /// Correlation of each sample's features with the reference.
    pub raw_corr: Vec<f64>,
    /// Min-max normalized stage, in [0,1].
    pub normalized: Vec<f64>,
    /// Final, filtered rate; same length as the input.
    pub filtered: Vec<f64>,
    pub w_size: usize,
    pub ref_index: usize,
    /// Bounds the normalization stage used.
    pub norm_min: f64,
    pub norm_max: f64,
    /// Whether the flatness guard fired (series treated as fully healthy).
    pub flat: bool,
}

impl AecSeries {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    /// CSV with columns ordinal, raw_corr, normalized, filtered.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "ordinal,raw_corr,normalized,filtered")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i, self.raw_corr[i], self.normalized[i], self.filtered[i]
            )?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// JSON sidecar describing how the series was produced.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "ref_index": self.ref_index,
            "w_size": self.w_size,
            "norm_min": self.norm_min,
            "norm_max": self.norm_max,
            "flat": self.flat,
        })
    }

    pub fn write_sidecar_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.sidecar().to_string()).map_err(|e| Error::io(path, e))
    }
}

fn spread(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn raw_reference_correlations(
    f: &FeatureMatrix,
    ref_index: usize,
    opts: &AecOptions,
) -> Result<Vec<f64>> {
    if opts.reference_rows <= 1 {
        // Column of the full correlation matrix.
        let cc = cc_matrix(f)?;
        reference_series(&cc, ref_index)
    } else {
        let k = opts.reference_rows.min(f.n_samples());
        let d = f.n_features();
        let mut reference = vec![0.0; d];
        for row in f.0.outer_iter().take(k) {
            for (r, &v) in reference.iter_mut().zip(row.iter()) {
                *r += v;
            }
        }
        for r in reference.iter_mut() {
            *r /= k as f64;
        }
        f.0.outer_iter()
            .map(|row| pearson(&reference, row.as_slice().expect("row-major layout")))
            .collect()
    }
}

/// Compute the AEC rate with default options.
pub fn aec_rate(f: &FeatureMatrix, ref_index: usize, w_size: usize) -> Result<AecSeries> {
    aec_rate_with(f, ref_index, w_size, &AecOptions::default())
}

/// Compute the AEC rate: reference correlations → min-max normalization →
/// moving-average filter (stage order per `opts`).
pub fn aec_rate_with(
    f: &FeatureMatrix,
    ref_index: usize,
    w_size: usize,
    opts: &AecOptions,
) -> Result<AecSeries> {
    let raw = raw_reference_correlations(f, ref_index, opts)?;
    let (lo, hi) = spread(&raw);
    let flat = hi - lo <= opts.flat_tol;

    let (normalized, filtered) = if flat {
        let ones = vec![1.0; raw.len()];
        (ones.clone(), ones)
    } else {
        match opts.order {
            StageOrder::NormalizeThenFilter => {
                let normalized = normalize_minmax(&raw);
                let filtered = ma_filter(&normalized, w_size)?;
                (normalized, filtered)
            }
            StageOrder::FilterThenNormalize => {
                let smoothed = ma_filter(&raw, w_size)?;
                let normalized = normalize_minmax(&smoothed);
                (normalized.clone(), normalized)
            }
        }
    };

    Ok(AecSeries {
        raw_corr: raw,
        normalized,
        filtered,
        w_size,
        ref_index,
        norm_min: lo,
        norm_max: hi,
        flat,
    })
}

/// Causal variant for online prognostics: correlations are computed per
/// sample against the reference (no matrix), and normalization bounds are
/// frozen from the first `train_n` samples; later values clip to [0,1].
///
/// When the frozen bounds are degenerate (training spread ≤ flat_tol, i.e.
/// the training portion shows no decorrelation beyond noise), min-max over
/// them would stretch noise to full scale, so the rate falls back to the raw
/// correlation clipped to [0,1] — already ≈1 while healthy and falling on
/// degradation. A series whose full spread is within flat_tol
/// short-circuits to all ones.
pub fn aec_rate_online(
    f: &FeatureMatrix,
    ref_index: usize,
    w_size: usize,
    train_n: usize,
    opts: &AecOptions,
) -> Result<AecSeries> {
    if train_n == 0 || train_n > f.n_samples() {
        return Err(Error::Invalid(format!(
            "train_n {train_n} out of range for {} samples",
            f.n_samples()
        )));
    }
    if ref_index >= train_n {
        return Err(Error::Invalid(format!(
            "reference index {ref_index} must lie in the training portion (train_n {train_n})"
        )));
    }
    let raw = reference_correlations(f, ref_index)?;
    let (full_lo, full_hi) = spread(&raw);
    let (lo, hi) = spread(&raw[..train_n]);

    let flat = full_hi - full_lo <= opts.flat_tol;
    let (normalized, filtered) = if flat {
        let ones = vec![1.0; raw.len()];
        (ones.clone(), ones)
    } else {
        let degenerate_bounds = hi - lo <= opts.flat_tol;
        let normalized: Vec<f64> = if degenerate_bounds {
            raw.iter().map(|&r| r.clamp(0.0, 1.0)).collect()
        } else {
            let span = hi - lo;
            raw.iter()
                .map(|&r| ((r - lo) / span).clamp(0.0, 1.0))
                .collect()
        };
        let filtered = ma_filter(&normalized, w_size)?;
        (normalized, filtered)
    };

    Ok(AecSeries {
        raw_corr: raw,
        normalized,
        filtered,
        w_size,
        ref_index,
        norm_min: lo,
        norm_max: hi,
        flat,
    })
}
