//! Named feature vectors and the nine time-domain statistics.
//!
//! Moments are population moments. Kurtosis is reported as excess kurtosis
//! (0 for Gaussian data). Entropy is the Shannon entropy (natural log) of an
//! equal-width amplitude histogram over `[min, max]`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::Window;

pub const DEFAULT_ENTROPY_BINS: usize = 64;

pub const STATISTICAL_NAMES: [&str; 9] = [
    "rms",
    "variance",
    "entropy",
    "shape_factor",
    "crest_factor",
    "kurtosis",
    "skewness",
    "minimum",
    "maximum",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureScheme {
    /// RMS of wavelet packet leaves.
    WpdRms,
    /// Nine raw-signal statistics.
    Statistical,
}

impl FeatureScheme {
    pub fn name(self) -> &'static str {
        match self {
            FeatureScheme::WpdRms => "wpd_rms",
            FeatureScheme::Statistical => "statistical",
        }
    }
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wpd_rms" | "wpd" | "wpdrms" => Ok(FeatureScheme::WpdRms),
            "statistical" | "stat" | "stats" => Ok(FeatureScheme::Statistical),
            other => Err(Error::InvalidArgument(format!("unknown feature scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    scheme: FeatureScheme,
    names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(scheme: FeatureScheme, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} values",
                names.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate feature name '{dup}'")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "feature '{}' is not finite ({})",
                names[i], values[i]
            )));
        }
        Ok(Self { scheme, names, values })
    }

    pub fn scheme(&self) -> FeatureScheme {
        self.scheme
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Shannon entropy of a `bins`-bin histogram spanning `[min, max]`.
pub fn histogram_entropy(x: &[f64], bins: usize, min: f64, max: f64) -> f64 {
    let span = max - min;
    if x.is_empty() || bins == 0 || !(span > 0.0) {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    for &v in x {
        let b = (((v - min) / span) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn statistical_features(w: &Window) -> Result<FeatureVector> {
    statistical_features_with_bins(w, DEFAULT_ENTROPY_BINS)
}

pub fn statistical_features_with_bins(w: &Window, bins: usize) -> Result<FeatureVector> {
    let x = &w.samples;
    let degenerate = |reason| Error::DegenerateWindow {
        offset_s: w.source_offset_s,
        reason,
    };
    if x.is_empty() {
        return Err(degenerate("empty window"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let (mut sum_sq, mut sum_abs) = (0.0, 0.0);
    let (mut min, mut max, mut peak) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        sum_sq += v * v;
        sum_abs += v.abs();
        min = min.min(v);
        max = max.max(v);
        peak = peak.max(v.abs());
    }
    let variance = m2 / n;
    if !(variance > 0.0) {
        return Err(degenerate("zero variance"));
    }
    let sigma = variance.sqrt();
    let rms = (sum_sq / n).sqrt();
    let mean_abs = sum_abs / n;
    let values = vec![
        rms,
        variance,
        histogram_entropy(x, bins, min, max),
        rms / mean_abs,
        peak / rms,
        m4 / (n * variance * variance) - 3.0,
        m3 / (n * variance * sigma),
        min,
        max,
    ];
    FeatureVector::new(
        FeatureScheme::Statistical,
        STATISTICAL_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    )
}
