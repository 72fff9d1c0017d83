//! Run-to-failure vibration data: record parsing, catalog assembly, input
//! scaling, and a deterministic synthetic generator for testing.
//!
//! Records are whitespace-separated ASCII, one time point per line, one
//! column per accelerometer channel, one file per 1-second recording, and the
//! file name is the recording timestamp (`YYYY.MM.DD.hh.mm.ss`).

use chrono::NaiveDateTime;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Default timestamp layout of record file names.
pub const TIMESTAMP_FORMAT: &str = "%Y.%m.%d.%H.%M.%S";

/// Records per day at the 10-minute acquisition cadence.
pub const SAMPLES_PER_DAY: usize = 144;

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One multi-channel vibration recording; rows are time points, columns are
/// accelerometer channels. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    values: Array2<f64>,
}

impl RawRecord {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Invalid("record must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("record entries".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn channel_count(&self) -> usize {
        self.values.ncols()
    }

    /// Extract one channel as an owned vector.
    pub fn column(&self, channel: usize) -> Result<Vec<f64>> {
        if channel >= self.channel_count() {
            return Err(Error::Invalid(format!(
                "channel {} out of range for a {}-channel record",
                channel,
                self.channel_count()
            )));
        }
        Ok(self.values.column(channel).to_vec())
    }
}

/// Parse a record from text; errors carry 1-based line numbers.
pub fn parse_record(text: &str, expected_rows: usize) -> Result<RawRecord> {
    let mut rows: Vec<f64> = Vec::new();
    let mut channels = 0usize;
    let mut row_count = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        for token in line.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric token '{token}'"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value '{token}'"),
                });
            }
            rows.push(value);
            count += 1;
        }
        if row_count == 0 {
            channels = count;
        } else if count != channels {
            return Err(Error::Parse {
                line: line_no,
                message: format!("{count} columns, expected {channels}"),
            });
        }
        row_count += 1;
    }

    if row_count != expected_rows {
        return Err(Error::Invalid(format!(
            "row count {row_count} ≠ expected {expected_rows}"
        )));
    }
    let values = Array2::from_shape_vec((row_count, channels), rows)
        .expect("row/column bookkeeping is consistent");
    RawRecord::new(values)
}

/// Parse a record file from disk.
pub fn read_record_file(path: &Path, expected_rows: usize) -> Result<RawRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record(&text, expected_rows)
}

/// Serialize a record back to the ASCII layout. Values print in shortest
/// round-trip form, so parse(serialize(r)) returns `r` exactly.
pub fn serialize_record(record: &RawRecord) -> String {
    let mut out = String::new();
    for row in record.values.outer_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push('\t');
            }
            write!(out, "{v}").expect("string write");
            first = false;
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Catalogs
// ---------------------------------------------------------------------------

/// Provenance of one sample within a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    pub timestamp: NaiveDateTime,
    /// Zero-based position in time order.
    pub ordinal: usize,
    pub source_name: String,
}

/// How catalog entries were mapped for the autoencoder's [0,1] input range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    GlobalMinmax,
    PerSampleMinmax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingInfo {
    pub mode: ScalingMode,
    pub min: f64,
    pub max: f64,
}

impl ScalingInfo {
    pub fn none() -> Self {
        Self {
            mode: ScalingMode::None,
            min: 0.0,
            max: 0.0,
        }
    }
}

/// Time-ordered single-channel vibration catalog for one bearing.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCatalog {
    pub bearing_id: String,
    /// Source column index of every sample.
    pub channel: usize,
    pub scaling: ScalingInfo,
    /// Ground-truth onset ordinal, present only for synthetic catalogs with
    /// an injected fault.
    pub change_point: Option<usize>,
    samples: Vec<(SampleMeta, Vec<f64>)>,
}

impl SampleCatalog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Length of every vibration vector.
    pub fn sample_len(&self) -> usize {
        self.samples.first().map_or(0, |(_, v)| v.len())
    }

    pub fn meta(&self, ordinal: usize) -> &SampleMeta {
        &self.samples[ordinal].0
    }

    pub fn vector(&self, ordinal: usize) -> &[f64] {
        &self.samples[ordinal].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &(SampleMeta, Vec<f64>)> {
        self.samples.iter()
    }

    /// Stack the first `n` samples into an `n × L` matrix.
    pub fn head_matrix(&self, n: usize) -> Array2<f64> {
        let n = n.min(self.len());
        let l = self.sample_len();
        let mut m = Array2::zeros((n, l));
        for (i, (_, v)) in self.samples.iter().take(n).enumerate() {
            m.row_mut(i).assign(&ndarray::ArrayView1::from(&v[..]));
        }
        m
    }

    /// All samples as an `N × L` matrix (catalog order).
    pub fn to_matrix(&self) -> Array2<f64> {
        self.head_matrix(self.len())
    }

    /// Summary for the catalog index file.
    pub fn index(&self) -> CatalogIndex {
        CatalogIndex {
            bearing_id: self.bearing_id.clone(),
            channel: self.channel,
            n_samples: self.len(),
            scaling: self.scaling,
            sources: self.samples.iter().map(|(m, _)| m.source_name.clone()).collect(),
        }
    }
}

/// JSON summary of a catalog: identity, size, scaling, and ordered sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogIndex {
    pub bearing_id: String,
    pub channel: usize,
    pub n_samples: usize,
    pub scaling: ScalingInfo,
    pub sources: Vec<String>,
}

/// Assemble a catalog from named records using the default timestamp format.
pub fn build_catalog(
    files: Vec<(String, RawRecord)>,
    bearing_id: &str,
    channel: usize,
) -> Result<SampleCatalog> {
    build_catalog_with_format(files, bearing_id, channel, TIMESTAMP_FORMAT)
}

/// Assemble a catalog, parsing timestamps from file names with `format`.
///
/// Samples are sorted by timestamp and given contiguous ordinals; the
/// selected column of each record becomes the sample vector.
pub fn build_catalog_with_format(
    files: Vec<(String, RawRecord)>,
    bearing_id: &str,
    channel: usize,
    format: &str,
) -> Result<SampleCatalog> {
    if files.is_empty() {
        return Err(Error::Invalid("catalog requires at least one record".into()));
    }
    let mut entries: Vec<(NaiveDateTime, String, Vec<f64>)> = Vec::with_capacity(files.len());
    let mut sample_len = None;
    for (name, record) in files {
        let timestamp = NaiveDateTime::parse_from_str(&name, format).map_err(|e| {
            Error::Invalid(format!("unparseable filename '{name}': {e}"))
        })?;
        let vector = record
            .column(channel)
            .map_err(|_| Error::Invalid(format!(
                "channel {channel} out of range in '{name}' ({} channels)",
                record.channel_count()
            )))?;
        match sample_len {
            None => sample_len = Some(vector.len()),
            Some(l) if l != vector.len() => {
                return Err(Error::DimensionMismatch(format!(
                    "'{name}' has {} rows, earlier records have {l}",
                    vector.len()
                )));
            }
            _ => {}
        }
        entries.push((timestamp, name, vector));
    }

    entries.sort_by(|a, b| a.0.cmp(&b.0));
    for pair in entries.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Invalid(format!(
                "duplicate timestamp '{}' ({} / {})",
                pair[0].0, pair[0].1, pair[1].1
            )));
        }
    }

    let samples = entries
        .into_iter()
        .enumerate()
        .map(|(ordinal, (timestamp, source_name, v))| {
            (
                SampleMeta {
                    timestamp,
                    ordinal,
                    source_name,
                },
                v,
            )
        })
        .collect();

    Ok(SampleCatalog {
        bearing_id: bearing_id.to_string(),
        channel,
        scaling: ScalingInfo::none(),
        change_point: None,
        samples,
    })
}

/// Sorted names of the timestamp-named record files in a directory. Other
/// files (indexes, readmes) are ignored.
pub fn list_record_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if !entry.path().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if NaiveDateTime::parse_from_str(&name, TIMESTAMP_FORMAT).is_ok() {
            names.push(name);
        }
    }
    if names.is_empty() {
        return Err(Error::Invalid(format!(
            "no timestamp-named record files in {}",
            dir.display()
        )));
    }
    names.sort();
    Ok(names)
}

/// Read every record file in a directory (sorted by name) and build a catalog.
///
/// When `expected_rows` is `None` the row count of the first file is adopted
/// and enforced on the rest.
pub fn read_directory(
    dir: &Path,
    bearing_id: &str,
    channel: usize,
    expected_rows: Option<usize>,
) -> Result<SampleCatalog> {
    let names = list_record_files(dir)?;
    let mut rows = expected_rows;
    let mut files = Vec::with_capacity(names.len());
    for name in names {
        let path = dir.join(&name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let expected = match rows {
            Some(r) => r,
            None => {
                let count = text.lines().filter(|l| !l.trim().is_empty()).count();
                rows = Some(count);
                count
            }
        };
        let record = parse_record(&text, expected)
            .map_err(|e| Error::Invalid(format!("{name}: {e}")))?;
        files.push((name, record));
    }
    build_catalog(files, bearing_id, channel)
}

/// Write a catalog out as a directory of ASCII record files (one column).
pub fn write_directory(catalog: &SampleCatalog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (meta, vector) in catalog.iter() {
        let mut text = String::with_capacity(vector.len() * 16);
        for v in vector {
            writeln!(text, "{v}").expect("string write");
        }
        let path = dir.join(&meta.source_name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scaling and decimation
// ---------------------------------------------------------------------------

/// Scale catalog entries into [0,1] according to `mode`.
///
/// Global min-max uses one affine map for the whole catalog so relative
/// amplitude growth across samples is preserved.
pub fn scale_catalog(catalog: &SampleCatalog, mode: ScalingMode) -> Result<SampleCatalog> {
    if catalog.is_empty() {
        return Err(Error::Invalid("cannot scale an empty catalog".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, v) in catalog.iter() {
        for &x in v {
            if !x.is_finite() {
                return Err(Error::NonFinite("catalog entries".into()));
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }

    match mode {
        ScalingMode::None => {
            let mut out = catalog.clone();
            out.scaling = ScalingInfo {
                mode: ScalingMode::None,
                min: lo,
                max: hi,
            };
            Ok(out)
        }
        ScalingMode::GlobalMinmax => {
            if hi <= lo {
                return Err(Error::Invalid(format!(
                    "constant dataset (min = max = {lo}); global min-max scaling undefined"
                )));
            }
            scale_with_bounds(catalog, lo, hi, false)
        }
        ScalingMode::PerSampleMinmax => {
            let mut out = catalog.clone();
            for (i, (_, v)) in out.samples.iter_mut().enumerate() {
                let (slo, shi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                    (a.min(x), b.max(x))
                });
                if shi <= slo {
                    return Err(Error::ZeroVariance {
                        role: "sample",
                        index: i,
                    });
                }
                let span = shi - slo;
                for x in v.iter_mut() {
                    *x = (*x - slo) / span;
                }
            }
            out.scaling = ScalingInfo {
                mode: ScalingMode::PerSampleMinmax,
                min: lo,
                max: hi,
            };
            Ok(out)
        }
    }
}

/// Scale with externally supplied bounds (e.g. frozen from a training
/// portion). When `clamp` is set, values outside the bounds clip to [0,1].
pub fn scale_catalog_with_bounds(
    catalog: &SampleCatalog,
    min: f64,
    max: f64,
) -> Result<SampleCatalog> {
    if !(max > min) {
        return Err(Error::Invalid(format!(
            "scaling bounds must satisfy max > min, got [{min}, {max}]"
        )));
    }
    scale_with_bounds(catalog, min, max, true)
}

fn scale_with_bounds(
    catalog: &SampleCatalog,
    min: f64,
    max: f64,
    clamp: bool,
) -> Result<SampleCatalog> {
    let span = max - min;
    let mut out = catalog.clone();
    for (_, v) in out.samples.iter_mut() {
        for x in v.iter_mut() {
            let mut y = (*x - min) / span;
            if clamp {
                y = y.clamp(0.0, 1.0);
            }
            *x = y;
        }
    }
    out.scaling = ScalingInfo {
        mode: ScalingMode::GlobalMinmax,
        min,
        max,
    };
    Ok(out)
}

/// Global min/max over the first `n` samples; used to freeze causal bounds.
pub fn bounds_of_head(catalog: &SampleCatalog, n: usize) -> Result<(f64, f64)> {
    if n == 0 || catalog.is_empty() {
        return Err(Error::Invalid("bounds require at least one sample".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, v) in catalog.iter().take(n) {
        for &x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    Ok((lo, hi))
}

/// Keep every `factor`-th time point within each record; catalog length is
/// unchanged.
pub fn decimate_catalog(catalog: &SampleCatalog, factor: usize) -> Result<SampleCatalog> {
    if factor == 0 {
        return Err(Error::Invalid("decimation factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(catalog.clone());
    }
    let mut out = catalog.clone();
    for (_, v) in out.samples.iter_mut() {
        *v = v.iter().copied().step_by(factor).collect();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic run-to-failure data
// ---------------------------------------------------------------------------

/// Parameters of the synthetic run-to-failure generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_sample_len")]
    pub sample_len: usize,
    /// Ordinal at which the fault component starts growing.
    #[serde(default = "default_change_point")]
    pub change_point: usize,
    /// Per-sample amplitude increment of the fault tone after the change
    /// point; 0 produces a stationary catalog.
    #[serde(default = "default_severity_growth")]
    pub severity_growth: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_samples() -> usize {
    300
}
fn default_sample_len() -> usize {
    1280
}
fn default_change_point() -> usize {
    200
}
fn default_severity_growth() -> f64 {
    0.02
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: default_n_samples(),
            sample_len: default_sample_len(),
            change_point: default_change_point(),
            severity_growth: default_severity_growth(),
            seed: 0,
        }
    }
}

// Generator constants: two healthy shaft tones, band-limited noise, and one
// growing fault tone. Frequencies are in cycles per time point.
const SHAFT_FREQ: f64 = 26.0 / 1280.0;
const SHAFT_AMP: f64 = 1.0;
const SECOND_FREQ: f64 = 59.0 / 1280.0;
const SECOND_AMP: f64 = 0.35;
const NOISE_STD: f64 = 0.2;
const NOISE_SMOOTH: usize = 4;
const FAULT_FREQ: f64 = 150.0 / 1280.0;

/// Generate a deterministic synthetic run-to-failure catalog.
///
/// Healthy samples are a fixed-phase tone pair plus band-limited noise; from
/// `change_point` on, a fault tone with amplitude
/// `severity_growth · (t − change_point)` and per-sample random phase is
/// added.
pub fn synth_run_to_failure(cfg: &SynthConfig) -> Result<SampleCatalog> {
    if cfg.change_point == 0 || cfg.change_point >= cfg.n_samples {
        return Err(Error::Invalid(format!(
            "change_point must satisfy 0 < cp < n_samples, got cp {} with n {}",
            cfg.change_point, cfg.n_samples
        )));
    }
    if cfg.sample_len < 8 {
        return Err(Error::Invalid("sample_len must be at least 8".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, NOISE_STD).expect("valid std");
    let tau = std::f64::consts::TAU;

    let start = NaiveDateTime::parse_from_str("2003.10.22.00.00.00", TIMESTAMP_FORMAT)
        .expect("literal timestamp");

    let mut samples = Vec::with_capacity(cfg.n_samples);
    for t in 0..cfg.n_samples {
        let fault_amp = if cfg.severity_growth > 0.0 && t >= cfg.change_point {
            cfg.severity_growth * (t - cfg.change_point) as f64
        } else {
            0.0
        };
        let fault_phase: f64 = rng.random_range(0.0..tau);

        // Band-limited noise: white Gaussian smoothed with a short window.
        let white: Vec<f64> = (0..cfg.sample_len + NOISE_SMOOTH)
            .map(|_| normal.sample(&mut rng))
            .collect();

        let mut v = Vec::with_capacity(cfg.sample_len);
        for j in 0..cfg.sample_len {
            let noise: f64 =
                white[j..j + NOISE_SMOOTH].iter().sum::<f64>() / NOISE_SMOOTH as f64;
            let jf = j as f64;
            let mut y = SHAFT_AMP * (tau * SHAFT_FREQ * jf).sin()
                + SECOND_AMP * (tau * SECOND_FREQ * jf).sin()
                + noise;
            if fault_amp > 0.0 {
                y += fault_amp * (tau * FAULT_FREQ * jf + fault_phase).sin();
            }
            v.push(y);
        }

        let timestamp = start + chrono::Duration::minutes(10 * t as i64);
        samples.push((
            SampleMeta {
                timestamp,
                ordinal: t,
                source_name: timestamp.format(TIMESTAMP_FORMAT).to_string(),
            },
            v,
        ));
    }

    Ok(SampleCatalog {
        bearing_id: "synthetic".into(),
        channel: 0,
        scaling: ScalingInfo::none(),
        change_point: (cfg.severity_growth > 0.0).then_some(cfg.change_point),
        samples,
    })
}

// ---------------------------------------------------------------------------
// Bearing labels and default channel mapping
// ---------------------------------------------------------------------------

/// Parsed bearing label such as `S2B1` (experiment 2, bearing 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BearingId {
    pub test: u8,
    pub bearing: u8,
}

impl BearingId {
    pub fn parse(label: &str) -> Result<Self> {
        let upper = label.to_ascii_uppercase();
        let rest = upper
            .strip_prefix('S')
            .ok_or_else(|| Error::Invalid(format!("bearing label '{label}' must look like S2B1")))?;
        let (test, bearing) = rest
            .split_once('B')
            .ok_or_else(|| Error::Invalid(format!("bearing label '{label}' must look like S2B1")))?;
        let test: u8 = test
            .parse()
            .map_err(|_| Error::Invalid(format!("bad test number in '{label}'")))?;
        let bearing: u8 = bearing
            .parse()
            .map_err(|_| Error::Invalid(format!("bad bearing number in '{label}'")))?;
        if !(1..=4).contains(&bearing) {
            return Err(Error::Invalid(format!("bearing number must be 1–4 in '{label}'")));
        }
        Ok(Self { test, bearing })
    }

    /// Default source column for this bearing given the record channel count.
    ///
    /// Eight-channel rigs carry two sensors per bearing: bearing b uses
    /// columns 2b−2 and 2b−1 (zero-based) as sensors 1 and 2. Four-channel
    /// rigs carry one sensor per bearing: column b−1. `sensor` is 1-based.
    pub fn default_column(&self, channel_count: usize, sensor: usize) -> Result<usize> {
        let b = self.bearing as usize;
        match channel_count {
            8 => match sensor {
                1 => Ok(2 * b - 2),
                2 => Ok(2 * b - 1),
                _ => Err(Error::Invalid(format!("sensor must be 1 or 2, got {sensor}"))),
            },
            4 => {
                if sensor != 1 {
                    return Err(Error::Invalid(
                        "four-channel records carry one sensor per bearing".into(),
                    ));
                }
                Ok(b - 1)
            }
            other => Err(Error::Invalid(format!(
                "no default channel map for {other}-channel records; pass --channel"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // -- parse_record ---------------------------------------------------------

    #[test]
    fn parse_small_record() {
        let r = parse_record("1 2\n3 4\n5 6", 3).unwrap();
        assert_eq!(r.row_count(), 3);
        assert_eq!(r.channel_count(), 2);
        assert_eq!(r.values()[[0, 0]], 1.0);
        assert_eq!(r.values()[[2, 1]], 6.0);
    }

    #[test]
    fn parse_empty_text_reports_row_count() {
        let err = parse_record("", 3).unwrap_err().to_string();
        assert!(err.contains("row count 0"), "got: {err}");
    }

    #[test]
    fn parse_names_bad_line() {
        let err = parse_record("1 2\n3 x", 2).unwrap_err().to_string();
        assert!(err.contains("line 2"), "got: {err}");
        assert!(err.contains('x'), "got: {err}");
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        let err = parse_record("1 2\n3 4 5", 2).unwrap_err().to_string();
        assert!(err.contains("line 2"), "got: {err}");
    }

    #[test]
    fn parse_rejects_nonfinite_tokens() {
        assert!(parse_record("1 2\nNaN 4", 2).is_err());
        assert!(parse_record("1 2\ninf 4", 2).is_err());
    }

    #[test]
    fn parse_serialize_roundtrip() {
        let r = parse_record("0.1 -2.25\n3.5e-3 4\n5 6.125", 3).unwrap();
        let text = serialize_record(&r);
        let back = parse_record(&text, 3).unwrap();
        assert_eq!(r, back);
    }

    // -- build_catalog ----------------------------------------------------------

    fn rec(values: &[f64]) -> RawRecord {
        let n = values.len();
        RawRecord::new(Array2::from_shape_vec((n, 1), values.to_vec()).unwrap()).unwrap()
    }

    fn rec2(values: Vec<Vec<f64>>) -> RawRecord {
        let rows = values.len();
        let cols = values[0].len();
        RawRecord::new(
            Array2::from_shape_vec((rows, cols), values.into_iter().flatten().collect()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn catalog_sorted_by_timestamp() {
        let files = vec![
            ("2003.10.22.12.16.24".to_string(), rec(&[2.0, 2.0])),
            ("2003.10.22.12.06.24".to_string(), rec(&[1.0, 1.0])),
        ];
        let catalog = build_catalog(files, "S1B3", 0).unwrap();
        assert_eq!(catalog.meta(0).source_name, "2003.10.22.12.06.24");
        assert_eq!(catalog.vector(0), &[1.0, 1.0]);
        assert_eq!(catalog.meta(1).ordinal, 1);
    }

    #[test]
    fn catalog_channel_out_of_range() {
        let files = vec![(
            "2003.10.22.12.06.24".to_string(),
            rec2(vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]),
        )];
        assert!(build_catalog(files, "S2B1", 4).is_err());
    }

    #[test]
    fn catalog_three_records_ordinals() {
        let files = vec![
            ("2003.10.22.12.06.24".to_string(), rec(&[1.0])),
            ("2003.10.22.12.16.24".to_string(), rec(&[2.0])),
            ("2003.10.22.12.26.24".to_string(), rec(&[3.0])),
        ];
        let catalog = build_catalog(files, "S1B3", 0).unwrap();
        assert_eq!(catalog.len(), 3);
        for (i, (meta, v)) in catalog.iter().enumerate() {
            assert_eq!(meta.ordinal, i);
            assert_eq!(v[0], (i + 1) as f64);
        }
    }

    #[test]
    fn catalog_rejects_duplicates_and_bad_names() {
        let files = vec![
            ("2003.10.22.12.06.24".to_string(), rec(&[1.0])),
            ("2003.10.22.12.06.24".to_string(), rec(&[2.0])),
        ];
        assert!(build_catalog(files, "S1B3", 0).is_err());

        let files = vec![("not-a-timestamp".to_string(), rec(&[1.0]))];
        assert!(build_catalog(files, "S1B3", 0).is_err());
    }

    // -- scaling ------------------------------------------------------------------

    fn catalog_of(vectors: Vec<Vec<f64>>) -> SampleCatalog {
        let files = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let ts = NaiveDateTime::parse_from_str("2003.10.22.00.00.00", TIMESTAMP_FORMAT)
                    .unwrap()
                    + chrono::Duration::minutes(10 * i as i64);
                (ts.format(TIMESTAMP_FORMAT).to_string(), rec(&v))
            })
            .collect();
        build_catalog(files, "test", 0).unwrap()
    }

    #[test]
    fn global_minmax_endpoints() {
        let c = catalog_of(vec![vec![-5.0, 0.0], vec![5.0, 1.0]]);
        let scaled = scale_catalog(&c, ScalingMode::GlobalMinmax).unwrap();
        assert_eq!(scaled.vector(0)[0], 0.0);
        assert_eq!(scaled.vector(1)[0], 1.0);
        assert_relative_eq!(scaled.vector(0)[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn global_minmax_two_vector_example() {
        let c = catalog_of(vec![vec![0.0, 1.0], vec![1.0, 2.0]]);
        let scaled = scale_catalog(&c, ScalingMode::GlobalMinmax).unwrap();
        assert_eq!(scaled.vector(0), &[0.0, 0.5]);
        assert_eq!(scaled.vector(1), &[0.5, 1.0]);
    }

    #[test]
    fn scaling_none_is_identity() {
        let c = catalog_of(vec![vec![3.0, -1.0]]);
        let scaled = scale_catalog(&c, ScalingMode::None).unwrap();
        assert_eq!(scaled.vector(0), c.vector(0));
        assert_eq!(scaled.scaling.mode, ScalingMode::None);
    }

    #[test]
    fn scaling_constant_dataset_errors() {
        let c = catalog_of(vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
        assert!(scale_catalog(&c, ScalingMode::GlobalMinmax).is_err());
    }

    #[test]
    fn per_sample_scaling_uses_each_samples_bounds() {
        let c = catalog_of(vec![vec![0.0, 10.0], vec![-2.0, 0.0]]);
        let scaled = scale_catalog(&c, ScalingMode::PerSampleMinmax).unwrap();
        assert_eq!(scaled.vector(0), &[0.0, 1.0]);
        assert_eq!(scaled.vector(1), &[0.0, 1.0]);
        assert_eq!(scaled.scaling.mode, ScalingMode::PerSampleMinmax);

        let constant = catalog_of(vec![vec![1.0, 1.0], vec![0.0, 2.0]]);
        let err = scale_catalog(&constant, ScalingMode::PerSampleMinmax).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance { index: 0, .. }));
    }

    #[test]
    fn scaling_roundtrip_recovers_inputs() {
        let c = catalog_of(vec![vec![-3.0, 0.5, 7.0], vec![2.0, -1.5, 4.0]]);
        let scaled = scale_catalog(&c, ScalingMode::GlobalMinmax).unwrap();
        let info = scaled.scaling;
        // Whole-catalog output range is exactly [0,1].
        let all: Vec<f64> = scaled.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        for (orig, scl) in c.iter().zip(scaled.iter()) {
            for (&a, &b) in orig.1.iter().zip(scl.1.iter()) {
                let recovered = b * (info.max - info.min) + info.min;
                assert_relative_eq!(recovered, a, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn frozen_bounds_clamp() {
        let c = catalog_of(vec![vec![0.0, 10.0], vec![20.0, -5.0]]);
        let scaled = scale_catalog_with_bounds(&c, 0.0, 10.0).unwrap();
        assert_eq!(scaled.vector(0), &[0.0, 1.0]);
        assert_eq!(scaled.vector(1), &[1.0, 0.0]); // clamped
    }

    // -- decimation -----------------------------------------------------------------

    #[test]
    fn decimation_shortens_vectors_not_catalog() {
        let c = catalog_of(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]; 3]);
        let d = decimate_catalog(&c, 2).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.sample_len(), 4);
        assert_eq!(d.vector(0), &[1.0, 3.0, 5.0, 7.0]);
        assert!(decimate_catalog(&c, 0).is_err());
        assert_eq!(decimate_catalog(&c, 1).unwrap(), c);
    }

    // -- synthetic generator ----------------------------------------------------------

    #[test]
    fn synth_deterministic() {
        let cfg = SynthConfig {
            n_samples: 20,
            sample_len: 64,
            change_point: 10,
            severity_growth: 0.05,
            seed: 42,
        };
        let a = synth_run_to_failure(&cfg).unwrap();
        let b = synth_run_to_failure(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.change_point, Some(10));
    }

    #[test]
    fn synth_zero_growth_has_no_change_point() {
        let cfg = SynthConfig {
            n_samples: 20,
            sample_len: 64,
            change_point: 10,
            severity_growth: 0.0,
            seed: 1,
        };
        let c = synth_run_to_failure(&cfg).unwrap();
        assert_eq!(c.change_point, None);
    }

    #[test]
    fn synth_validates_change_point() {
        let mut cfg = SynthConfig::default();
        cfg.change_point = 0;
        assert!(synth_run_to_failure(&cfg).is_err());
        cfg.change_point = cfg.n_samples;
        assert!(synth_run_to_failure(&cfg).is_err());
    }

    fn rms(v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn synth_rms_grows_after_change_point() {
        let cfg = SynthConfig {
            n_samples: 200,
            sample_len: 512,
            change_point: 120,
            severity_growth: 0.02,
            seed: 7,
        };
        let c = synth_run_to_failure(&cfg).unwrap();
        let series: Vec<f64> = (0..c.len()).map(|i| rms(c.vector(i))).collect();

        // Healthy mean vs mean from change_point + 20 on.
        let healthy: f64 = series[..120].iter().sum::<f64>() / 120.0;
        let degraded: f64 = series[140..].iter().sum::<f64>() / (series.len() - 140) as f64;
        assert!(
            degraded > healthy,
            "degraded RMS {degraded} should exceed healthy {healthy}"
        );

        // The trend over the faulty tail rises.
        let early_tail: f64 = series[140..160].iter().sum::<f64>() / 20.0;
        let late_tail: f64 = series[180..200].iter().sum::<f64>() / 20.0;
        assert!(late_tail > early_tail);
    }

    #[test]
    fn synth_zero_growth_is_stationary() {
        let cfg = SynthConfig {
            n_samples: 120,
            sample_len: 512,
            change_point: 60,
            severity_growth: 0.0,
            seed: 3,
        };
        let c = synth_run_to_failure(&cfg).unwrap();
        let series: Vec<f64> = (0..c.len()).map(|i| rms(c.vector(i))).collect();
        let first: f64 = series[..60].iter().sum::<f64>() / 60.0;
        let second: f64 = series[60..].iter().sum::<f64>() / 60.0;
        assert!((first - second).abs() / first < 0.05, "halves differ: {first} vs {second}");
    }

    // -- directory round trip ------------------------------------------------------------

    #[test]
    fn directory_roundtrip() {
        let cfg = SynthConfig {
            n_samples: 5,
            sample_len: 32,
            change_point: 3,
            severity_growth: 0.1,
            seed: 11,
        };
        let c = synth_run_to_failure(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_directory(&c, dir.path()).unwrap();
        let back = read_directory(dir.path(), &c.bearing_id, 0, None).unwrap();
        assert_eq!(back.len(), c.len());
        for i in 0..c.len() {
            assert_eq!(back.vector(i), c.vector(i), "sample {i} differs");
            assert_eq!(back.meta(i).source_name, c.meta(i).source_name);
        }
    }

    // -- bearing labels ---------------------------------------------------------------------

    #[test]
    fn bearing_label_parse_and_channel_map() {
        let b = BearingId::parse("S1B3").unwrap();
        assert_eq!(b, BearingId { test: 1, bearing: 3 });
        assert_eq!(b.default_column(8, 1).unwrap(), 4);
        assert_eq!(b.default_column(8, 2).unwrap(), 5);
        let b = BearingId::parse("s2b1").unwrap();
        assert_eq!(b.default_column(4, 1).unwrap(), 0);
        assert!(b.default_column(4, 2).is_err());
        assert!(BearingId::parse("B3S1").is_err());
        assert!(BearingId::parse("S1B9").is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Ordinals equal the rank of timestamps no matter the input order.
        #[test]
        fn catalog_ordinals_are_timestamp_ranks(perm_seed in 0u64..200) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let base = NaiveDateTime::parse_from_str("2004.02.10.00.00.00", TIMESTAMP_FORMAT).unwrap();
            let mut files: Vec<(String, RawRecord)> = (0..8)
                .map(|i| {
                    let ts = base + chrono::Duration::minutes(10 * i as i64);
                    let v = ndarray::Array2::from_shape_vec((2, 1), vec![i as f64, i as f64]).unwrap();
                    (ts.format(TIMESTAMP_FORMAT).to_string(), RawRecord::new(v).unwrap())
                })
                .collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
            files.shuffle(&mut rng);
            let catalog = build_catalog(files, "prop", 0).unwrap();
            for i in 0..catalog.len() {
                prop_assert_eq!(catalog.meta(i).ordinal, i);
                // Sample payload encodes its creation rank.
                prop_assert_eq!(catalog.vector(i)[0], i as f64);
            }
        }

        /// parse ∘ serialize is the identity on records.
        #[test]
        fn record_serialize_parse_identity(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.random_range(1..6usize);
            let cols = rng.random_range(1..4usize);
            let values = ndarray::Array2::from_shape_fn((rows, cols), |_| {
                rng.random_range(-100.0..100.0)
            });
            let record = RawRecord::new(values).unwrap();
            let text = serialize_record(&record);
            let back = parse_record(&text, rows).unwrap();
            prop_assert_eq!(record, back);
        }
    }
}
