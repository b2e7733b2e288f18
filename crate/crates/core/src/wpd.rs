//! Wavelet packet decomposition with orthogonal two-channel filter banks.
//!
//! Both the low- and high-pass branches are split at every level. The signal
//! is extended periodically, so with an orthonormal filter pair the leaf
//! energies add up to the input energy. Leaves come out of the tree in
//! natural (Paley) order and are permuted into frequency order, so leaf `k`
//! covers `[k, k + 1) * fs / 2^(level + 1)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureScheme, FeatureVector};
use crate::signal::Window;

/// Named orthonormal low-pass filters; the high-pass is the quadrature mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotherFilter {
    Haar,
    /// Daubechies, 2 vanishing moments (4 taps).
    Db2,
    /// Daubechies, 4 vanishing moments (8 taps).
    Db4,
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

const DB2: [f64; 4] = [
    0.482_962_913_144_690_25,
    0.836_516_303_737_807_9,
    0.224_143_868_042_013_4,
    -0.129_409_522_550_921_45,
];

const DB4: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

impl MotherFilter {
    pub fn name(self) -> &'static str {
        match self {
            MotherFilter::Haar => "haar",
            MotherFilter::Db2 => "db2",
            MotherFilter::Db4 => "db4",
        }
    }

    pub fn low_pass(self) -> &'static [f64] {
        match self {
            MotherFilter::Haar => &HAAR,
            MotherFilter::Db2 => &DB2,
            MotherFilter::Db4 => &DB4,
        }
    }

    /// `g[k] = (-1)^k h[L-1-k]`
    pub fn high_pass(self) -> Vec<f64> {
        let h = self.low_pass();
        let l = h.len();
        (0..l)
            .map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] })
            .collect()
    }
}

impl fmt::Display for MotherFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotherFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(MotherFilter::Haar),
            "db2" => Ok(MotherFilter::Db2),
            "db4" => Ok(MotherFilter::Db4),
            other => Err(Error::UnknownFilter(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WpdConfig {
    pub level: u32,
    pub filter: MotherFilter,
}

impl Default for WpdConfig {
    fn default() -> Self {
        Self {
            level: 3,
            filter: MotherFilter::Db4,
        }
    }
}

impl WpdConfig {
    pub fn new(level: u32, filter_name: &str) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidArgument("decomposition level must be >= 1".into()));
        }
        Ok(Self {
            level,
            filter: filter_name.parse()?,
        })
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.level
    }
}

/// Frequency-ordered leaves of a packet tree.
#[derive(Debug, Clone, PartialEq)]
pub struct WpdLeaves {
    pub leaves: Vec<Vec<f64>>,
    pub level: u32,
    pub sample_rate_hz: u32,
}

impl WpdLeaves {
    pub fn energies(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.iter().map(|c| c * c).sum()).collect()
    }
}

/// One analysis step: periodic extension, filter, keep every other sample.
fn analysis_step(x: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n.div_ceil(2);
    let mut a = Vec::with_capacity(half);
    let mut d = Vec::with_capacity(half);
    for i in 0..half {
        let base = 2 * i;
        let (mut sa, mut sd) = (0.0, 0.0);
        for k in 0..lo.len() {
            let v = x[(base + k) % n];
            sa += lo[k] * v;
            sd += hi[k] * v;
        }
        a.push(sa);
        d.push(sd);
    }
    (a, d)
}

fn gray(k: usize) -> usize {
    k ^ (k >> 1)
}

/// Full packet tree down to `cfg.level`, leaves in frequency order.
pub fn decompose(samples: &[f64], sample_rate_hz: u32, cfg: &WpdConfig) -> Result<WpdLeaves> {
    if cfg.level == 0 {
        return Err(Error::InvalidArgument("decomposition level must be >= 1".into()));
    }
    if samples.len() < cfg.leaf_count() {
        return Err(Error::WindowTooShort {
            len: samples.len(),
            level: cfg.level,
        });
    }
    let lo = cfg.filter.low_pass();
    let hi = cfg.filter.high_pass();
    let mut nodes = vec![samples.to_vec()];
    for _ in 0..cfg.level {
        nodes = nodes
            .iter()
            .flat_map(|node| {
                let (a, d) = analysis_step(node, lo, &hi);
                [a, d]
            })
            .collect();
    }
    // The high-pass branch mirrors the spectrum, which is undone by the Gray code.
    let leaves = (0..nodes.len()).map(|k| nodes[gray(k)].clone()).collect();
    Ok(WpdLeaves {
        leaves,
        level: cfg.level,
        sample_rate_hz,
    })
}

pub fn wpd_decompose(w: &Window, cfg: &WpdConfig) -> Result<WpdLeaves> {
    decompose(&w.samples, w.sample_rate_hz, cfg)
}

/// `[k, k + 1) * fs / 2^(level + 1)` in Hz.
pub fn band_frequency_range(k: usize, sample_rate_hz: u32, level: u32) -> Result<(f64, f64)> {
    let count = 1usize << level;
    if k >= count {
        return Err(Error::InvalidArgument(format!(
            "leaf index {k} out of range for level {level} ({count} leaves)"
        )));
    }
    let width = sample_rate_hz as f64 / (2 * count) as f64;
    Ok((k as f64 * width, (k + 1) as f64 * width))
}

pub fn feature_names(sample_rate_hz: u32, level: u32) -> Vec<String> {
    (0..1usize << level)
        .map(|k| {
            let (lo, hi) = band_frequency_range(k, sample_rate_hz, level).expect("index in range");
            format!("wpd_band_{k}_{lo}_{hi}")
        })
        .collect()
}

/// RMS of every frequency-ordered leaf.
pub fn wpd_features(w: &Window, cfg: &WpdConfig) -> Result<FeatureVector> {
    let leaves = wpd_decompose(w, cfg)?;
    let values = leaves
        .leaves
        .iter()
        .map(|l| (l.iter().map(|c| c * c).sum::<f64>() / l.len() as f64).sqrt())
        .collect();
    FeatureVector::new(
        FeatureScheme::WpdRms,
        feature_names(w.sample_rate_hz, cfg.level),
        values,
    )
}
