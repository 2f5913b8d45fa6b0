//! Per-trace summary statistics used by the feature-based models.

use crate::dataset::DatasetRecord;

/// Autocorrelation lags, in samples.
pub const LAGS: [usize; 3] = [1, 5, 10];

/// Fraction of the trace's maximum magnitude a local maximum must exceed to
/// count as a peak.
pub const PEAK_THRESHOLD: f64 = 0.1;

pub const NAMES: [&str; 8] = [
    "abs_energy",
    "max_abs",
    "mean",
    "trend_slope",
    "autocorr_1",
    "autocorr_5",
    "autocorr_10",
    "peak_count",
];

pub const PER_TRACE: usize = NAMES.len();

/// Features of every trace of a record, concatenated in interrogator order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Column names such as `east.abs_energy`.
    pub fn names(ids: &[&str]) -> Vec<String> {
        ids.iter()
            .flat_map(|id| NAMES.iter().map(move |n| format!("{id}.{n}")))
            .collect()
    }
}

pub fn abs_energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Least-squares slope of the trace against its sample index.
pub fn trend_slope(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let k_mean = (n - 1) as f64 / 2.0;
    let x_mean = mean(x);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let dk = k as f64 - k_mean;
        num += dk * (v - x_mean);
        den += dk * dk;
    }
    num / den
}

/// Biased autocorrelation estimator; zero for constant traces and for lags
/// at or beyond the trace length.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let m = mean(x);
    let var: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    cov / var
}

/// Strict interior local maxima above `PEAK_THRESHOLD * max_abs(x)`.
pub fn peak_count(x: &[f64]) -> usize {
    let threshold = PEAK_THRESHOLD * max_abs(x);
    x.windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2] && w[1] > threshold)
        .count()
}

pub fn trace_features(x: &[f64]) -> [f64; PER_TRACE] {
    [
        abs_energy(x),
        max_abs(x),
        mean(x),
        trend_slope(x),
        autocorrelation(x, LAGS[0]),
        autocorrelation(x, LAGS[1]),
        autocorrelation(x, LAGS[2]),
        peak_count(x) as f64,
    ]
}

pub fn features(record: &DatasetRecord) -> FeatureVector {
    FeatureVector {
        values: record
            .seismograms
            .iter()
            .flat_map(|s| trace_features(&s.samples))
            .collect(),
    }
}
