//! Degradation-onset detection, prediction accuracy, and the classical
//! RMS / kurtosis indicator baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{SampleCatalog, SAMPLES_PER_DAY};
use crate::trend;

/// Threshold-lag detector configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Relative drop threshold θ in (0,1): sample t is abnormal when its rate
    /// falls below θ times the rate `lag` samples earlier.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_lag")]
    pub lag: usize,
    /// Ordinals below this are exempt from detection.
    #[serde(default)]
    pub warmup: usize,
}

fn default_theta() -> f64 {
    0.9
}
fn default_lag() -> usize {
    100
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            lag: default_lag(),
            warmup: 0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Invalid(format!("theta must lie in (0,1), got {}", self.theta)));
        }
        if self.lag == 0 {
            return Err(Error::Invalid("lag must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where degradation starts and which samples were flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// First flagged ordinal; absent when nothing was flagged.
    pub degradation_start: Option<usize>,
    pub flags: Vec<bool>,
    pub config: DetectorConfig,
    pub series_id: String,
}

impl DetectionReport {
    /// JSON layout: series_id, degradation_start (nullable), detector knobs,
    /// and the flag vector as run-length-encoded true runs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "series_id": self.series_id,
            "degradation_start": self.degradation_start,
            "theta": self.config.theta,
            "lag": self.config.lag,
            "warmup": self.config.warmup,
            "flags_rle": {
                "n": self.flags.len(),
                "true_runs": rle_true_runs(&self.flags),
            },
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let get = |k: &str| {
            value
                .get(k)
                .ok_or_else(|| Error::Decode(format!("detection report missing '{k}'")))
        };
        let series_id = get("series_id")?
            .as_str()
            .ok_or_else(|| Error::Decode("series_id must be a string".into()))?
            .to_string();
        let degradation_start = match get("degradation_start")? {
            serde_json::Value::Null => None,
            v => Some(
                v.as_u64()
                    .ok_or_else(|| Error::Decode("degradation_start must be an ordinal".into()))?
                    as usize,
            ),
        };
        let config = DetectorConfig {
            theta: get("theta")?
                .as_f64()
                .ok_or_else(|| Error::Decode("theta must be a number".into()))?,
            lag: get("lag")?
                .as_u64()
                .ok_or_else(|| Error::Decode("lag must be an integer".into()))? as usize,
            warmup: get("warmup")?
                .as_u64()
                .ok_or_else(|| Error::Decode("warmup must be an integer".into()))?
                as usize,
        };
        let rle = get("flags_rle")?;
        let n = rle
            .get("n")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Decode("flags_rle.n missing".into()))? as usize;
        let mut flags = vec![false; n];
        let runs = rle
            .get("true_runs")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Decode("flags_rle.true_runs missing".into()))?;
        for run in runs {
            let pair = run
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::Decode("true_runs entries must be [start, len]".into()))?;
            let start = pair[0].as_u64().unwrap_or(u64::MAX) as usize;
            let len = pair[1].as_u64().unwrap_or(u64::MAX) as usize;
            if start + len > n {
                return Err(Error::Decode("flag run out of range".into()));
            }
            for f in &mut flags[start..start + len] {
                *f = true;
            }
        }
        Ok(Self {
            degradation_start,
            flags,
            config,
            series_id,
        })
    }
}

fn rle_true_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - s));
    }
    runs
}

/// Flag degradation in a falling health-rate series.
///
/// Sample t is abnormal iff `t ≥ max(warmup, lag)` and
/// `series[t] < theta · series[t − lag]` (strict). The rule compares a
/// ratio, so flags are invariant under uniform positive scaling of the
/// series.
pub fn detect_degradation(
    series: &[f64],
    cfg: &DetectorConfig,
    series_id: &str,
) -> Result<DetectionReport> {
    detect_with_rule(series, cfg, series_id, |value, lagged, theta| {
        value < theta * lagged
    })
}

/// Variant for indicators that rise on degradation (RMS, kurtosis): sample t
/// is abnormal iff `series[t] > (2 − theta) · series[t − lag]`.
pub fn detect_upward(
    series: &[f64],
    cfg: &DetectorConfig,
    series_id: &str,
) -> Result<DetectionReport> {
    detect_with_rule(series, cfg, series_id, |value, lagged, theta| {
        value > (2.0 - theta) * lagged
    })
}

fn detect_with_rule(
    series: &[f64],
    cfg: &DetectorConfig,
    series_id: &str,
    abnormal: impl Fn(f64, f64, f64) -> bool,
) -> Result<DetectionReport> {
    cfg.validate()?;
    if series.len() <= cfg.lag {
        return Err(Error::Invalid(format!(
            "series length {} must exceed lag {}",
            series.len(),
            cfg.lag
        )));
    }
    let first = cfg.warmup.max(cfg.lag);
    let mut flags = vec![false; series.len()];
    let mut degradation_start = None;
    for t in first..series.len() {
        if abnormal(series[t], series[t - cfg.lag], cfg.theta) {
            flags[t] = true;
            if degradation_start.is_none() {
                degradation_start = Some(t);
            }
        }
    }
    if let Some(t) = degradation_start {
        // Self-consistency: the returned ordinal satisfies the rule.
        debug_assert!(t >= first && abnormal(series[t], series[t - cfg.lag], cfg.theta));
    }
    Ok(DetectionReport {
        degradation_start,
        flags,
        config: *cfg,
        series_id: series_id.to_string(),
    })
}

/// Convert a day count to a sample ordinal at the 10-minute cadence.
pub fn days_to_ordinal(days: f64) -> usize {
    (days * SAMPLES_PER_DAY as f64).floor() as usize
}

/// Prediction accuracy of a detected ordinal against a reference ordinal:
/// `1 − |predicted − reference| / n_samples`.
pub fn prediction_accuracy(predicted: usize, reference: usize, n_samples: usize) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be positive".into()));
    }
    if predicted >= n_samples || reference >= n_samples {
        return Err(Error::Invalid(format!(
            "ordinals ({predicted}, {reference}) must be below n_samples {n_samples}"
        )));
    }
    let diff = predicted.abs_diff(reference) as f64;
    Ok(1.0 - diff / n_samples as f64)
}

/// Per-sample RMS of the raw (unscaled) catalog vectors.
pub fn rms_series(catalog: &SampleCatalog) -> Vec<f64> {
    catalog
        .iter()
        .map(|(_, v)| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt())
        .collect()
}

/// Per-sample kurtosis m₄/m₂² with 1/L central moments (no −3 correction).
pub fn kurtosis_series(catalog: &SampleCatalog) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(catalog.len());
    for (i, (_, v)) in catalog.iter().enumerate() {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n;
        if m2 == 0.0 {
            return Err(Error::ZeroVariance { role: "sample", index: i });
        }
        let m4 = v.iter().map(|&x| (x - mean).powi(4)).sum::<f64>() / n;
        out.push(m4 / (m2 * m2));
    }
    Ok(out)
}

/// Apply the documented baseline procedure to a raw indicator series:
/// min-max normalize, moving-average filter, then the upward detector.
///
/// A qualitative stand-in for comparing classical indicators against the AEC
/// rate, not a reproduction of any published baseline pipeline.
pub fn detect_baseline(
    indicator: &[f64],
    w_size: usize,
    cfg: &DetectorConfig,
    series_id: &str,
) -> Result<(Vec<f64>, DetectionReport)> {
    let normalized = trend::normalize_minmax(indicator);
    let filtered = trend::ma_filter(&normalized, w_size)?;
    let report = detect_upward(&filtered, cfg, series_id)?;
    Ok((filtered, report))
}
