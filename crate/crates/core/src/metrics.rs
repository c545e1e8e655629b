//! Recovery accuracy: normalized RMSE, coefficient sparsity, and per-bin
//! reports by speed, yaw rate, or confidence level.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CoeffVector;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0} original vs {1} recovered samples")]
    LengthMismatch(usize, usize),
    #[error("normalized RMSE is undefined for a zero reference signal")]
    ZeroReference,
}

/// `‖x_o − x̂‖₂ / ‖x_o‖₂`.
pub fn rmse_normalized(original: &[f64], recovered: &[f64]) -> Result<f64, MetricError> {
    if original.len() != recovered.len() {
        return Err(MetricError::LengthMismatch(original.len(), recovered.len()));
    }
    let mut err = 0.0;
    let mut reference = 0.0;
    for (o, r) in original.iter().zip(recovered) {
        err += (o - r) * (o - r);
        reference += o * o;
    }
    if reference == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    Ok((err / reference).sqrt())
}

/// Number of coefficients with magnitude above `threshold`.
pub fn sparsity_count(coeffs: &CoeffVector, threshold: f64) -> usize {
    coeffs.as_slice().iter().filter(|c| c.abs() > threshold).count()
}

/// Binning schemes. Intervals are left-closed and right-open except the
/// last bin of each scheme, which also takes its upper edge (and, for
/// speed, everything above it). Keys outside a scheme's range fall in the
/// nearest edge bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Eight 10 mph bins from 0, labelled `0-10`, `11-20`, … `71-80`.
    Speed10Mph,
    /// Twelve 60°/s bins over [−360, 360].
    YawRate60Deg,
    /// Ten 10 % bins over [0, 100].
    Confidence10Pct,
}

impl Binning {
    pub fn bin_count(self) -> usize {
        match self {
            Binning::Speed10Mph => 8,
            Binning::YawRate60Deg => 12,
            Binning::Confidence10Pct => 10,
        }
    }

    fn origin_and_width(self) -> (f64, f64) {
        match self {
            Binning::Speed10Mph => (0.0, 10.0),
            Binning::YawRate60Deg => (-360.0, 60.0),
            Binning::Confidence10Pct => (0.0, 10.0),
        }
    }

    pub fn bin_of(self, key: f64) -> usize {
        let (origin, width) = self.origin_and_width();
        let raw = ((key - origin) / width).floor();
        if raw.is_nan() || raw < 0.0 {
            0
        } else {
            (raw as usize).min(self.bin_count() - 1)
        }
    }

    pub fn label(self, bin: usize) -> String {
        let (origin, width) = self.origin_and_width();
        let lo = origin + width * bin as f64;
        let hi = lo + width;
        match self {
            Binning::Speed10Mph if bin == 0 => "0-10".to_string(),
            Binning::Speed10Mph => format!("{}-{}", lo as i64 + 1, hi as i64),
            _ if bin + 1 == self.bin_count() => format!("[{},{}]", lo as i64, hi as i64),
            _ => format!("[{},{})", lo as i64, hi as i64),
        }
    }
}

/// One evaluated sample: the original value, its recovery (`None` if the
/// sample fell in an unrecoverable gap) and the original value of the
/// binning variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinnedSample {
    pub original: f64,
    pub recovered: Option<f64>,
    pub key: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub label: String,
    pub count: usize,
    /// Absent for empty bins and bins whose reference norm is zero.
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub overall_rmse: Option<f64>,
    pub evaluated: usize,
    pub per_bin: Vec<BinStat>,
    pub unrecoverable_fraction: f64,
}

#[derive(Default, Clone, Copy)]
struct Accum {
    count: usize,
    err2: f64,
    ref2: f64,
}

impl Accum {
    fn add(&mut self, o: f64, r: f64) {
        self.count += 1;
        self.err2 += (o - r) * (o - r);
        self.ref2 += o * o;
    }

    fn rmse(&self) -> Option<f64> {
        (self.count > 0 && self.ref2 > 0.0).then(|| (self.err2 / self.ref2).sqrt())
    }
}

/// Per-bin normalized RMSE, each bin scored against its own reference norm.
pub fn binned_report(samples: &[BinnedSample], binning: Binning) -> RecoveryReport {
    let mut bins = vec![Accum::default(); binning.bin_count()];
    let mut overall = Accum::default();
    let mut missing = 0usize;
    for s in samples {
        match s.recovered {
            Some(r) => {
                bins[binning.bin_of(s.key)].add(s.original, r);
                overall.add(s.original, r);
            }
            None => missing += 1,
        }
    }
    let per_bin = bins
        .iter()
        .enumerate()
        .map(|(i, a)| BinStat { label: binning.label(i), count: a.count, rmse: a.rmse() })
        .collect();
    RecoveryReport {
        overall_rmse: overall.rmse(),
        evaluated: overall.count,
        per_bin,
        unrecoverable_fraction: if samples.is_empty() { 0.0 } else { missing as f64 / samples.len() as f64 },
    }
}

impl RecoveryReport {
    /// `bin,count,rmse` rows and a trailing `overall` row. Absent RMSE values
    /// are written as empty fields.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
        let mut out = String::from("bin,count,rmse\n");
        for b in &self.per_bin {
            let _ = writeln!(out, "{},{},{}", b.label, b.count, fmt(b.rmse));
        }
        let _ = writeln!(out, "overall,{},{}", self.evaluated, fmt(self.overall_rmse));
        out
    }
}
