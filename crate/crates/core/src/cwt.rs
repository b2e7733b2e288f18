//! Continuous wavelet transform with real-valued mother wavelets.
//!
//! Coefficients are computed by direct correlation of the signal with the
//! sampled, dilated wavelet `psi(m / s) / sqrt(s)`. The signal is zero
//! extended, so columns within one wavelet support of either end carry edge
//! effects; they are kept rather than trimmed. Long kernels go through an FFT
//! path that produces the same correlation.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative magnitude below which the wavelet tail is dropped.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

/// The sinc envelope of the Shannon wavelet decays too slowly for the
/// relative threshold, so its support is capped here.
pub const SHANNON_MAX_SUPPORT: f64 = 20.0;

const SUPPORT_SCAN_LIMIT: f64 = 64.0;
const SUPPORT_SCAN_STEP: f64 = 1e-3;

/// Kernels longer than this use FFT correlation.
const FFT_KERNEL_THRESHOLD: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveletSpec {
    /// `order`-th derivative of `exp(-t^2)`, unit L2 norm.
    Gaussian { order: u32 },
    /// `exp(-t^2/2) cos(2 pi fc t)`.
    Morlet { center_freq: f64 },
    /// `sqrt(fb) sinc(fb t) cos(2 pi fc t)`.
    Shannon { bandwidth: f64, center_freq: f64 },
}

impl WaveletSpec {
    pub const DEFAULT_GAUSSIAN_ORDER: u32 = 8;
    pub const DEFAULT_MORLET_FC: f64 = 0.8125;
    pub const DEFAULT_SHANNON_FB: f64 = 0.1;
    pub const DEFAULT_SHANNON_FC: f64 = 3.0;

    pub fn gaussian() -> Self {
        WaveletSpec::Gaussian {
            order: Self::DEFAULT_GAUSSIAN_ORDER,
        }
    }

    pub fn morlet() -> Self {
        WaveletSpec::Morlet {
            center_freq: Self::DEFAULT_MORLET_FC,
        }
    }

    pub fn shannon() -> Self {
        WaveletSpec::Shannon {
            bandwidth: Self::DEFAULT_SHANNON_FB,
            center_freq: Self::DEFAULT_SHANNON_FC,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WaveletSpec::Gaussian { order } => order >= 1,
            WaveletSpec::Morlet { center_freq } => center_freq > 0.0 && center_freq.is_finite(),
            WaveletSpec::Shannon { bandwidth, center_freq } => {
                bandwidth > 0.0 && center_freq > 0.0 && bandwidth.is_finite() && center_freq.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid wavelet parameters: {self}")))
        }
    }

    /// Center frequency in cycles per unit time of the mother wavelet.
    pub fn center_frequency(&self) -> f64 {
        match *self {
            WaveletSpec::Gaussian { order } => gaussian_peak_frequency(order),
            WaveletSpec::Morlet { center_freq } => center_freq,
            WaveletSpec::Shannon { center_freq, .. } => center_freq,
        }
    }

    /// Build the evaluator for this wavelet (normalization and support).
    pub fn mother(&self) -> Result<MotherWavelet> {
        self.validate()?;
        MotherWavelet::new(*self)
    }
}

impl fmt::Display for WaveletSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WaveletSpec::Gaussian { order } => write!(f, "gaussian(order={order})"),
            WaveletSpec::Morlet { center_freq } => write!(f, "morlet(fc={center_freq})"),
            WaveletSpec::Shannon { bandwidth, center_freq } => write!(f, "shannon(fb={bandwidth},fc={center_freq})"),
        }
    }
}

/// `gaussian[:order]`, `morlet[:fc]` or `shannon[:fb:fc]`.
impl FromStr for WaveletSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidArgument(format!(
                "bad wavelet '{s}' (gaussian[:order], morlet[:fc], shannon[:fb:fc])"
            ))
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        let real = |i: usize| parts[i].trim().parse::<f64>().map_err(|_| bad());
        let spec = match (parts[0].to_ascii_lowercase().as_str(), parts.len()) {
            ("gaussian" | "gaus", 1) => Self::gaussian(),
            ("gaussian" | "gaus", 2) => WaveletSpec::Gaussian {
                order: parts[1].trim().parse().map_err(|_| bad())?,
            },
            ("morlet" | "morl", 1) => Self::morlet(),
            ("morlet" | "morl", 2) => WaveletSpec::Morlet { center_freq: real(1)? },
            ("shannon" | "shan", 1) => Self::shannon(),
            ("shannon" | "shan", 3) => WaveletSpec::Shannon {
                bandwidth: real(1)?,
                center_freq: real(2)?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Physicists' Hermite polynomial H_n(t).
fn hermite(n: u32, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * t);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * t * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Peak of |F(f)| = (2 pi f)^p exp(-(pi f)^2), located by golden-section
/// search on the log magnitude.
fn gaussian_peak_frequency(order: u32) -> f64 {
    let p = order as f64;
    let log_mag = |f: f64| p * (2.0 * PI * f).ln() - (PI * f).powi(2);
    let (mut a, mut b) = (1e-6, 10.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while b - a > 1e-13 {
        if log_mag(c) > log_mag(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// A mother wavelet ready for sampling.
#[derive(Debug, Clone)]
pub struct MotherWavelet {
    spec: WaveletSpec,
    norm: f64,
    support: f64,
}

impl MotherWavelet {
    fn new(spec: WaveletSpec) -> Result<Self> {
        let mut w = Self {
            spec,
            norm: 1.0,
            support: SUPPORT_SCAN_LIMIT,
        };
        if let WaveletSpec::Gaussian { .. } = spec {
            // unit L2 norm, trapezoid rule on a fine grid
            let n = (2.0 * SUPPORT_SCAN_LIMIT / SUPPORT_SCAN_STEP) as usize;
            let energy: f64 = (0..=n)
                .map(|i| {
                    let t = -SUPPORT_SCAN_LIMIT + i as f64 * SUPPORT_SCAN_STEP;
                    w.eval(t).powi(2)
                })
                .sum::<f64>()
                * SUPPORT_SCAN_STEP;
            w.norm = energy.sqrt().recip();
        }
        w.support = match spec {
            WaveletSpec::Shannon { .. } => SHANNON_MAX_SUPPORT,
            _ => w.threshold_support(),
        };
        Ok(w)
    }

    fn threshold_support(&self) -> f64 {
        let n = (SUPPORT_SCAN_LIMIT / SUPPORT_SCAN_STEP) as usize;
        let vals: Vec<f64> = (0..=n).map(|i| self.eval(i as f64 * SUPPORT_SCAN_STEP).abs()).collect();
        let peak = vals.iter().cloned().fold(0.0, f64::max);
        let last = vals.iter().rposition(|&v| v >= SUPPORT_THRESHOLD * peak).unwrap_or(0);
        ((last + 1) as f64 * SUPPORT_SCAN_STEP).min(SUPPORT_SCAN_LIMIT)
    }

    pub fn spec(&self) -> WaveletSpec {
        self.spec
    }

    /// Half-width of the truncated support, in mother-wavelet time units.
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.spec {
            WaveletSpec::Gaussian { order } => {
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                sign * self.norm * hermite(order, t) * (-t * t).exp()
            }
            WaveletSpec::Morlet { center_freq } => (-t * t / 2.0).exp() * (2.0 * PI * center_freq * t).cos(),
            WaveletSpec::Shannon { bandwidth, center_freq } => {
                bandwidth.sqrt() * sinc(bandwidth * t) * (2.0 * PI * center_freq * t).cos()
            }
        }
    }

    /// Samples `psi(m / s) / sqrt(s)` for `m` in `-M..=M`, `M = floor(support * s)`.
    pub fn kernel(&self, scale: f64) -> Vec<f64> {
        let half = (self.support * scale).floor() as i64;
        let norm = scale.sqrt().recip();
        (-half..=half).map(|m| self.eval(m as f64 / scale) * norm).collect()
    }
}

/// `|CWT|` over (scale x time).
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    magnitudes: Vec<Vec<f64>>,
    scales: Vec<f64>,
    wavelet: WaveletSpec,
    sample_rate_hz: u32,
}

impl Scalogram {
    pub fn magnitudes(&self) -> &[Vec<f64>] {
        &self.magnitudes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.magnitudes[i]
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn wavelet(&self) -> WaveletSpec {
        self.wavelet
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn n_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn n_samples(&self) -> usize {
        self.magnitudes.first().map_or(0, Vec::len)
    }

    /// Scale whose row carries the most energy over `columns`.
    pub fn dominant_scale(&self, columns: std::ops::Range<usize>) -> f64 {
        let best = self
            .magnitudes
            .iter()
            .map(|row| row[columns.clone()].iter().map(|v| v * v).sum::<f64>())
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, e)| if e > acc.1 { (i, e) } else { acc },
            );
        self.scales[best.0]
    }

    /// Scale of the largest magnitude in column `t`.
    pub fn column_argmax_scale(&self, t: usize) -> f64 {
        let best = self
            .magnitudes
            .iter()
            .map(|row| row[t])
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        self.scales[best.0]
    }
}

fn correlate_direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len() as i64;
    let half = (kernel.len() / 2) as i64;
    (0..n)
        .map(|t| {
            let lo = (-half).max(-t);
            let hi = half.min(n - 1 - t);
            let mut acc = 0.0;
            for m in lo..=hi {
                acc += signal[(t + m) as usize] * kernel[(m + half) as usize];
            }
            acc.abs()
        })
        .collect()
}

struct FftCorrelator {
    len: usize,
    signal_spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftCorrelator {
    fn new(signal: &[f64], max_kernel_len: usize) -> Self {
        let len = (signal.len() + max_kernel_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut spectrum: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
        spectrum.resize(len, Complex::new(0.0, 0.0));
        forward.process(&mut spectrum);
        Self {
            len,
            signal_spectrum: spectrum,
            forward,
            inverse,
        }
    }

    fn correlate(&self, n: usize, kernel: &[f64]) -> Vec<f64> {
        let half = kernel.len() / 2;
        // convolution with the reversed kernel, read back at offset `half`
        let mut buf: Vec<Complex<f64>> = kernel.iter().rev().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.len, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.signal_spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[half..half + n].iter().map(|c| (c.re * scale).abs()).collect()
    }
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(Error::InvalidArgument("empty scale list".into()));
    }
    if scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument("scales must be positive".into()));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("scales must be strictly increasing".into()));
    }
    Ok(())
}

/// Continuous wavelet transform of `signal` at the given `scales` (in samples).
pub fn cwt(signal: &[f64], wavelet: WaveletSpec, scales: &[f64], sample_rate_hz: u32) -> Result<Scalogram> {
    if signal.len() < 2 {
        return Err(Error::InvalidArgument("signal needs at least 2 samples".into()));
    }
    if sample_rate_hz == 0 {
        return Err(Error::InvalidArgument("sample_rate_hz must be > 0".into()));
    }
    check_scales(scales)?;
    let mother = wavelet.mother()?;
    let kernels: Vec<Vec<f64>> = scales.iter().map(|&s| mother.kernel(s)).collect();
    let longest = kernels.iter().map(Vec::len).max().unwrap_or(1);
    let fft = (longest > FFT_KERNEL_THRESHOLD).then(|| FftCorrelator::new(signal, longest));

    let magnitudes = kernels
        .par_iter()
        .map(|k| match &fft {
            Some(f) if k.len() > FFT_KERNEL_THRESHOLD => f.correlate(signal.len(), k),
            _ => correlate_direct(signal, k),
        })
        .collect();

    Ok(Scalogram {
        magnitudes,
        scales: scales.to_vec(),
        wavelet,
        sample_rate_hz,
    })
}

/// Direct-correlation CWT without the FFT path; used to cross-check it.
pub fn cwt_direct(signal: &[f64], wavelet: WaveletSpec, scales: &[f64], sample_rate_hz: u32) -> Result<Scalogram> {
    check_scales(scales)?;
    let mother = wavelet.mother()?;
    let magnitudes = scales
        .par_iter()
        .map(|&s| correlate_direct(signal, &mother.kernel(s)))
        .collect();
    Ok(Scalogram {
        magnitudes,
        scales: scales.to_vec(),
        wavelet,
        sample_rate_hz,
    })
}

/// Pseudo-frequency in Hz of `scale` (samples): `fc * fs / scale`.
pub fn scale_to_frequency(wavelet: WaveletSpec, scale: f64, sample_rate_hz: u32) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be > 0, got {scale}")));
    }
    wavelet.validate()?;
    Ok(wavelet.center_frequency() * sample_rate_hz as f64 / scale)
}

pub fn frequency_to_scale(wavelet: WaveletSpec, freq_hz: f64, sample_rate_hz: u32) -> Result<f64> {
    if !(freq_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be > 0, got {freq_hz}")));
    }
    wavelet.validate()?;
    Ok(wavelet.center_frequency() * sample_rate_hz as f64 / freq_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalogramFormat {
    Csv,
    Pgm,
}

pub fn export_scalogram(sc: &Scalogram, path: &Path, format: ScalogramFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        ScalogramFormat::Csv => write_csv(sc, &mut w),
        ScalogramFormat::Pgm => write_pgm(sc, &mut w),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_csv(sc: &Scalogram, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# wavelet={}", sc.wavelet)?;
    writeln!(w, "# sample_rate_hz={}", sc.sample_rate_hz)?;
    let scales: Vec<String> = sc.scales.iter().map(f64::to_string).collect();
    writeln!(w, "# scales={}", scales.join(","))?;
    for row in &sc.magnitudes {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// 8-bit pixels, min-max normalized over the whole image.
pub fn to_gray(sc: &Scalogram) -> Vec<u8> {
    let (lo, hi) = sc
        .magnitudes
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    sc.magnitudes
        .iter()
        .flatten()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect()
}

fn write_pgm(sc: &Scalogram, w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", sc.n_samples(), sc.n_scales())?;
    w.write_all(&to_gray(sc))
}

/// Parse a scale list: `a:b:step` (inclusive range) or comma separated values.
pub fn parse_scales(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad scale list '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let scales = if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let step: f64 = parts[2].trim().parse().map_err(|_| bad())?;
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    check_scales(&scales)?;
    Ok(scales)
}
