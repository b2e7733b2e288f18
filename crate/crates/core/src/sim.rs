//! Synthetic triaxial vibration for the four monitored conditions.
//!
//! Each cutting recording is white noise on all axes plus one decaying
//! 2.0-2.4 kHz burst per blade impact. The scenarios modulate that picture:
//! wear scales the bursts up over the trial, defective blades hit harder,
//! instability adds a modulated 600-1000 Hz disturbance and the belt scenario
//! replaces cutting with an idle Z-axis tone of varying continuity.
//!
//! All randomness comes from named streams of the spec seed, and the three
//! axes are rendered independently, so output does not depend on threading.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{save_recording, AccelerationRecording, ConditionLabel, MachineSettings, Scenario};

pub const SIM_SAMPLE_RATE_HZ: u32 = 6400;
pub const MAX_PITCH_JITTER: f64 = 0.3;
pub const DEFAULT_BLADE_COUNT: u32 = 32;

/// Default trial lengths: one 24.8 min wear trial, 120 s per defect class,
/// 90 s per stability class and 15 s per belt setting.
pub fn default_durations(scenario: Scenario) -> Vec<f64> {
    match scenario {
        Scenario::Wear => vec![1488.0],
        Scenario::BladeDefect => vec![120.0; 3],
        Scenario::Stability => vec![90.0; 2],
        Scenario::Belt => vec![15.0; 3],
    }
}

/// Blade positions on the tool and their individual wear.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolGeometry {
    blade_angles_rad: Vec<f64>,
    per_blade_wear: Vec<f64>,
}

impl ToolGeometry {
    pub fn new(blade_angles_rad: Vec<f64>, per_blade_wear: Vec<f64>) -> Result<Self> {
        if blade_angles_rad.is_empty() {
            return Err(Error::InvalidSpec("tool needs at least one blade".into()));
        }
        if per_blade_wear.len() != blade_angles_rad.len() {
            return Err(Error::InvalidSpec(format!(
                "{} wear values for {} blades",
                per_blade_wear.len(),
                blade_angles_rad.len()
            )));
        }
        if !blade_angles_rad.iter().all(|a| (0.0..TAU).contains(a)) {
            return Err(Error::InvalidSpec("blade angles must lie in [0, 2pi)".into()));
        }
        if blade_angles_rad.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("blade angles must be strictly increasing".into()));
        }
        if !per_blade_wear.iter().all(|w| *w >= 1.0 && w.is_finite()) {
            return Err(Error::InvalidSpec("per-blade wear must be >= 1".into()));
        }
        Ok(Self {
            blade_angles_rad,
            per_blade_wear,
        })
    }

    /// Equal pitch, fresh blades.
    pub fn uniform(blade_count: u32) -> Result<Self> {
        Self::jittered(blade_count, 0.0, 0)
    }

    /// Blade `i` at `(i + 0.5 + j_i) * pitch` with `j_i` uniform in
    /// `[-max_jitter, max_jitter]`, fresh blades.
    pub fn jittered(blade_count: u32, max_jitter: f64, seed: u64) -> Result<Self> {
        if blade_count == 0 {
            return Err(Error::InvalidSpec("blade_count must be >= 1".into()));
        }
        if !(0.0..=MAX_PITCH_JITTER).contains(&max_jitter) {
            return Err(Error::InvalidSpec(format!(
                "pitch jitter must be in [0, {MAX_PITCH_JITTER}], got {max_jitter}"
            )));
        }
        let pitch = TAU / blade_count as f64;
        let mut r = rng::stream(seed, "geometry", 0);
        let angles = (0..blade_count)
            .map(|i| {
                let j = if max_jitter > 0.0 {
                    r.random_range(-max_jitter..=max_jitter)
                } else {
                    0.0
                };
                (i as f64 + 0.5 + j) * pitch
            })
            .collect();
        Self::new(angles, vec![1.0; blade_count as usize])
    }

    pub fn blade_count(&self) -> usize {
        self.blade_angles_rad.len()
    }

    pub fn blade_angles_rad(&self) -> &[f64] {
        &self.blade_angles_rad
    }

    pub fn per_blade_wear(&self) -> &[f64] {
        &self.per_blade_wear
    }

    pub fn with_wear(self, per_blade_wear: Vec<f64>) -> Result<Self> {
        Self::new(self.blade_angles_rad, per_blade_wear)
    }
}

/// `k` blade indices spread evenly over `blade_count` positions.
pub fn evenly_spaced_blades(blade_count: usize, k: usize) -> Vec<usize> {
    (0..k.min(blade_count))
        .map(|i| ((i * blade_count) as f64 / k as f64).round() as usize % blade_count)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BladePass {
    pub time_s: f64,
    pub blade: usize,
}

/// Impact times `(r + theta_i / 2pi) * 60 / rpm` below `duration_s`, sorted.
pub fn blade_pass_times(geom: &ToolGeometry, rpm: f64, duration_s: f64) -> Result<Vec<BladePass>> {
    if !(rpm > 0.0) || !rpm.is_finite() {
        return Err(Error::InvalidArgument(format!("rpm must be > 0, got {rpm}")));
    }
    let period = 60.0 / rpm;
    let mut out = Vec::new();
    let mut r = 0u64;
    loop {
        let start = r as f64 * period;
        if start >= duration_s {
            break;
        }
        for (blade, theta) in geom.blade_angles_rad.iter().enumerate() {
            let time_s = (r as f64 + theta / TAU) * period;
            if time_s < duration_s {
                out.push(BladePass { time_s, blade });
            }
        }
        r += 1;
    }
    // angles are increasing, so revolutions come out already ordered
    Ok(out)
}

/// Shape of the per-impact bursts.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstParams {
    /// Peak amplitude of a fresh blade on the Y axis.
    pub amplitude: f64,
    pub carrier_lo_hz: f64,
    pub carrier_hi_hz: f64,
    pub decay_s: f64,
    /// Relative amplitude on X, Y, Z.
    pub axis_gains: [f64; 3],
}

impl Default for BurstParams {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            carrier_lo_hz: 2000.0,
            carrier_hi_hz: 2400.0,
            decay_s: 0.005,
            axis_gains: [0.4, 1.0, 0.25],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioParams {
    /// Burst amplitude grows linearly from 1 to `growth_factor`.
    Wear { growth_factor: f64 },
    /// Bursts of `worn_blades` are multiplied by `multiplier`.
    BladeDefect { worn_blades: Vec<usize>, multiplier: f64 },
    /// Modulated band-limited disturbance on Y (unstable class only).
    Stability {
        band_lo_hz: f64,
        band_hi_hz: f64,
        disturbance_rms: f64,
        modulation_depth: f64,
    },
    /// Idle Z-axis tone whose continuity depends on the class.
    Belt { tone_hz: f64, tone_amplitude: f64 },
}

/// Everything needed to synthesize one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// `None` for the wear trial, which is labeled by time afterwards.
    pub class_id: Option<u8>,
    pub machine: MachineSettings,
    pub duration_s: f64,
    pub noise_floor_rms: f64,
    pub seed: u64,
    pub pitch_jitter: f64,
    pub burst: BurstParams,
    pub params: ScenarioParams,
}

impl ScenarioSpec {
    /// Default settings for a scenario. `class_id` must be `None` for wear.
    pub fn new(scenario: Scenario, class_id: Option<u8>, duration_s: f64, seed: u64) -> Result<Self> {
        let cutting = |rpm| MachineSettings {
            rpm,
            feed_mm_per_min: 250.0,
            cut_depth_mm: 4.0,
            blade_count: DEFAULT_BLADE_COUNT,
            idle: false,
        };
        let (machine, noise_floor_rms, params) = match scenario {
            Scenario::Wear => (cutting(41.0), 1.0, ScenarioParams::Wear { growth_factor: 3.0 }),
            Scenario::BladeDefect => {
                let k = match class_id {
                    Some(1) => 2,
                    Some(2) => 6,
                    _ => 0,
                };
                (
                    cutting(101.0),
                    0.5,
                    ScenarioParams::BladeDefect {
                        worn_blades: evenly_spaced_blades(DEFAULT_BLADE_COUNT as usize, k),
                        multiplier: 3.0,
                    },
                )
            }
            Scenario::Stability => (
                cutting(41.0),
                0.5,
                ScenarioParams::Stability {
                    band_lo_hz: 600.0,
                    band_hi_hz: 1000.0,
                    disturbance_rms: 1.0,
                    modulation_depth: 0.5,
                },
            ),
            Scenario::Belt => (
                MachineSettings {
                    rpm: 0.0,
                    feed_mm_per_min: 0.0,
                    cut_depth_mm: 0.0,
                    blade_count: DEFAULT_BLADE_COUNT,
                    idle: true,
                },
                0.1,
                ScenarioParams::Belt {
                    tone_hz: 290.0,
                    tone_amplitude: 1.0,
                },
            ),
        };
        let spec = Self {
            scenario,
            class_id,
            machine,
            duration_s,
            noise_floor_rms,
            seed,
            pitch_jitter: MAX_PITCH_JITTER,
            burst: BurstParams::default(),
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> Option<ConditionLabel> {
        self.class_id.and_then(|c| ConditionLabel::new(self.scenario, c).ok())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        self.machine.validate()?;
        if !(self.duration_s >= 2.0) || !self.duration_s.is_finite() {
            return bad(format!("duration must be >= 2 s, got {}", self.duration_s));
        }
        if !(self.noise_floor_rms > 0.0) || !self.noise_floor_rms.is_finite() {
            return bad(format!("noise_floor_rms must be > 0, got {}", self.noise_floor_rms));
        }
        match (self.scenario, self.class_id) {
            (Scenario::Wear, Some(_)) => return bad("the wear trial is labeled by time; class_id must be unset".into()),
            (Scenario::Wear, None) => {}
            (s, None) => return bad(format!("{s} recordings need a class_id")),
            (s, Some(c)) => {
                ConditionLabel::new(s, c)?;
            }
        }
        if self.machine.idle != (self.scenario == Scenario::Belt) {
            return bad(if self.machine.idle {
                format!(
                    "{} recordings are taken while cutting; idle must be false",
                    self.scenario
                )
            } else {
                "belt recordings are taken in idle mode; idle must be true".into()
            });
        }
        if !self.machine.idle && !(self.machine.rpm > 0.0) {
            return bad("cutting recordings need rpm > 0".into());
        }
        if !(0.0..=MAX_PITCH_JITTER).contains(&self.pitch_jitter) {
            return bad(format!("pitch_jitter must be in [0, {MAX_PITCH_JITTER}]"));
        }
        let nyquist = SIM_SAMPLE_RATE_HZ as f64 / 2.0;
        let b = &self.burst;
        if !(b.amplitude >= 0.0
            && b.decay_s > 0.0
            && 0.0 < b.carrier_lo_hz
            && b.carrier_lo_hz <= b.carrier_hi_hz
            && b.carrier_hi_hz < nyquist)
        {
            return bad("burst parameters out of range".into());
        }
        let blades = self.machine.blade_count as usize;
        match (&self.params, self.scenario) {
            (ScenarioParams::Wear { growth_factor }, Scenario::Wear) => {
                if !(*growth_factor >= 1.0) {
                    return bad(format!("wear growth factor must be >= 1, got {growth_factor}"));
                }
            }
            (
                ScenarioParams::BladeDefect {
                    worn_blades,
                    multiplier,
                },
                Scenario::BladeDefect,
            ) => {
                let expected = match self.class_id {
                    Some(1) => 2,
                    Some(2) => 6,
                    _ => 0,
                };
                if worn_blades.len() != expected {
                    return bad(format!(
                        "defect class {} needs exactly {expected} worn blades, got {}",
                        self.class_id.unwrap_or(0),
                        worn_blades.len()
                    ));
                }
                let mut sorted = worn_blades.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != worn_blades.len() || sorted.last().is_some_and(|&i| i >= blades) {
                    return bad("worn blade indices must be distinct and below blade_count".into());
                }
                if !(*multiplier >= 1.0) {
                    return bad(format!("defect multiplier must be >= 1, got {multiplier}"));
                }
            }
            (
                ScenarioParams::Stability {
                    band_lo_hz,
                    band_hi_hz,
                    disturbance_rms,
                    modulation_depth,
                },
                Scenario::Stability,
            ) => {
                if !(0.0 < *band_lo_hz && band_lo_hz < band_hi_hz && *band_hi_hz < nyquist) {
                    return bad(format!("disturbance band {band_lo_hz}-{band_hi_hz} Hz is invalid"));
                }
                if !(*disturbance_rms >= 0.0) || !(0.0..=1.0).contains(modulation_depth) {
                    return bad("disturbance rms must be >= 0 and modulation depth in [0, 1]".into());
                }
            }
            (
                ScenarioParams::Belt {
                    tone_hz,
                    tone_amplitude,
                },
                Scenario::Belt,
            ) => {
                if !(0.0 < *tone_hz && *tone_hz < nyquist) || !(*tone_amplitude > 0.0) {
                    return bad("belt tone frequency or amplitude out of range".into());
                }
            }
            (p, s) => return bad(format!("parameters {p:?} do not belong to scenario {s}")),
        }
        Ok(())
    }

    /// Apply `key=value` overrides, e.g. from a config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: expected a number, got '{value}'")))
        };
        match (key, &mut self.params) {
            ("duration_s", _) => self.duration_s = real()?,
            ("noise_floor_rms", _) => self.noise_floor_rms = real()?,
            ("rpm", _) => self.machine.rpm = real()?,
            ("feed_mm_per_min", _) => self.machine.feed_mm_per_min = real()?,
            ("cut_depth_mm", _) => self.machine.cut_depth_mm = real()?,
            ("pitch_jitter", _) => self.pitch_jitter = real()?,
            ("burst_amplitude", _) => self.burst.amplitude = real()?,
            ("burst_decay_s", _) => self.burst.decay_s = real()?,
            ("growth_factor", ScenarioParams::Wear { growth_factor }) => *growth_factor = real()?,
            ("defect_multiplier", ScenarioParams::BladeDefect { multiplier, .. }) => *multiplier = real()?,
            ("worn_blades", ScenarioParams::BladeDefect { worn_blades, .. }) => {
                *worn_blades = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("worn_blades: bad index '{s}'")))
                    })
                    .collect::<Result<_>>()?;
            }
            ("band_lo_hz", ScenarioParams::Stability { band_lo_hz, .. }) => *band_lo_hz = real()?,
            ("band_hi_hz", ScenarioParams::Stability { band_hi_hz, .. }) => *band_hi_hz = real()?,
            ("disturbance_rms", ScenarioParams::Stability { disturbance_rms, .. }) => *disturbance_rms = real()?,
            ("modulation_depth", ScenarioParams::Stability { modulation_depth, .. }) => *modulation_depth = real()?,
            ("tone_hz", ScenarioParams::Belt { tone_hz, .. }) => *tone_hz = real()?,
            ("tone_amplitude", ScenarioParams::Belt { tone_amplitude, .. }) => *tone_amplitude = real()?,
            _ => {
                return Err(Error::Config(format!(
                    "key '{key}' does not apply to the {} scenario",
                    self.scenario
                )))
            }
        }
        Ok(())
    }

    /// Keys accepted by [`ScenarioSpec::set`] for any scenario.
    pub fn is_sim_key(key: &str) -> bool {
        matches!(
            key,
            "duration_s"
                | "noise_floor_rms"
                | "rpm"
                | "feed_mm_per_min"
                | "cut_depth_mm"
                | "pitch_jitter"
                | "burst_amplitude"
                | "burst_decay_s"
                | "growth_factor"
                | "defect_multiplier"
                | "worn_blades"
                | "band_lo_hz"
                | "band_hi_hz"
                | "disturbance_rms"
                | "modulation_depth"
                | "tone_hz"
                | "tone_amplitude"
        )
    }
}

/// One scheduled blade impact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub time_s: f64,
    pub blade: usize,
    /// Peak amplitude on the Y axis.
    pub amplitude: f64,
    pub carrier_hz: f64,
    pub phase: f64,
}

/// Impacts of a cutting recording; empty in idle mode.
pub fn burst_schedule(spec: &ScenarioSpec, geom: &ToolGeometry) -> Result<Vec<Burst>> {
    spec.validate()?;
    if spec.machine.idle {
        return Ok(Vec::new());
    }
    if geom.blade_count() != spec.machine.blade_count as usize {
        return Err(Error::InvalidSpec(format!(
            "tool has {} blades, machine settings say {}",
            geom.blade_count(),
            spec.machine.blade_count
        )));
    }
    let passes = blade_pass_times(geom, spec.machine.rpm, spec.duration_s)?;
    let mut r = rng::stream(spec.seed, "bursts", 0);
    let b = &spec.burst;
    Ok(passes
        .into_iter()
        .map(|p| {
            let mut amplitude = b.amplitude * geom.per_blade_wear[p.blade];
            match &spec.params {
                ScenarioParams::Wear { growth_factor } => {
                    amplitude *= 1.0 + (growth_factor - 1.0) * p.time_s / spec.duration_s;
                }
                ScenarioParams::BladeDefect {
                    worn_blades,
                    multiplier,
                } if worn_blades.contains(&p.blade) => {
                    amplitude *= multiplier;
                }
                _ => {}
            }
            let carrier_hz = r.random_range(b.carrier_lo_hz..=b.carrier_hi_hz);
            let phase = r.random_range(0.0..TAU);
            Burst {
                time_s: p.time_s,
                blade: p.blade,
                amplitude,
                carrier_hz,
                phase,
            }
        })
        .collect())
}

/// Random smooth signal in [-1, 1]: a sum of `terms` slow sinusoids.
fn smooth_process(r: &mut impl Rng, terms: usize, lo_hz: f64, hi_hz: f64) -> Vec<(f64, f64)> {
    (0..terms)
        .map(|_| (r.random_range(lo_hz..hi_hz), r.random_range(0.0..TAU)))
        .collect()
}

fn eval_smooth(components: &[(f64, f64)], t: f64) -> f64 {
    components.iter().map(|(f, p)| (TAU * f * t + p).sin()).sum::<f64>() / components.len() as f64
}

fn add_bursts(out: &mut [f64], bursts: &[Burst], gain: f64, decay_s: f64, fs: f64) {
    if gain == 0.0 {
        return;
    }
    let span = (8.0 * decay_s * fs).ceil() as usize;
    for b in bursts {
        let first = (b.time_s * fs).ceil() as usize;
        for n in first..(first + span).min(out.len()) {
            let dt = n as f64 / fs - b.time_s;
            out[n] += gain * b.amplitude * (-dt / decay_s).exp() * (TAU * b.carrier_hz * dt + b.phase).sin();
        }
    }
}

fn add_disturbance(out: &mut [f64], spec: &ScenarioSpec, fs: f64) {
    let ScenarioParams::Stability {
        band_lo_hz,
        band_hi_hz,
        disturbance_rms,
        modulation_depth,
    } = spec.params
    else {
        return;
    };
    if spec.class_id != Some(1) {
        return;
    }
    const TONES: usize = 48;
    let mut r = rng::stream(spec.seed, "disturbance", 0);
    let tones: Vec<(f64, f64)> = (0..TONES)
        .map(|_| (r.random_range(band_lo_hz..band_hi_hz), r.random_range(0.0..TAU)))
        .collect();
    let envelope = smooth_process(&mut r, 3, 0.05, 0.5);
    let amp = disturbance_rms * (2.0 / TONES as f64).sqrt();
    for (n, v) in out.iter_mut().enumerate() {
        let t = n as f64 / fs;
        let m = 1.0 + modulation_depth * eval_smooth(&envelope, t);
        let s: f64 = tones.iter().map(|(f, p)| (TAU * f * t + p).sin()).sum();
        *v += m * amp * s;
    }
}

/// Gain of the belt tone at each sample: 1 for a fixed belt, with short
/// dropouts when partly loose and a wandering level when extremely loose.
fn add_belt_tone(out: &mut [f64], spec: &ScenarioSpec, fs: f64) {
    let ScenarioParams::Belt {
        tone_hz,
        tone_amplitude,
    } = spec.params
    else {
        return;
    };
    let mut r = rng::stream(spec.seed, "belt", 0);
    let phase0 = r.random_range(0.0..TAU);
    let n = out.len();
    match spec.class_id {
        Some(1) => {
            // Dropouts of 80-200 ms separated by 200-500 ms, so every
            // second of signal contains at least one complete gap.
            let mut gain = vec![1.0f64; n];
            let ramp = 0.005 * fs;
            let mut t = r.random_range(0.0..0.5);
            while t < n as f64 / fs {
                let len = r.random_range(0.08..0.2);
                let (a, b) = (t * fs, (t + len) * fs);
                let lo = a.floor().max(0.0) as usize;
                let hi = ((b + ramp).ceil() as usize).min(n);
                for (i, g) in gain.iter_mut().enumerate().take(hi).skip(lo) {
                    let x = i as f64;
                    let into = ((x - a) / ramp).clamp(0.0, 1.0);
                    let out_of = ((x - b) / ramp).clamp(0.0, 1.0);
                    let depth = 0.95 * (into - out_of);
                    *g = (*g).min(1.0 - depth);
                }
                t += len + r.random_range(0.2..0.5);
            }
            for (i, v) in out.iter_mut().enumerate() {
                *v += tone_amplitude * gain[i] * (TAU * tone_hz * i as f64 / fs + phase0).sin();
            }
        }
        Some(2) => {
            let fm = smooth_process(&mut r, 4, 0.5, 5.0);
            let am = smooth_process(&mut r, 4, 0.5, 5.0);
            let mut phase = phase0;
            for (i, v) in out.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let f = tone_hz * (1.0 + 0.1 * eval_smooth(&fm, t));
                let a = tone_amplitude * (1.0 + 0.6 * eval_smooth(&am, t)).max(0.0);
                *v += a * phase.sin();
                phase = (phase + TAU * f / fs) % TAU;
            }
        }
        _ => {
            for (i, v) in out.iter_mut().enumerate() {
                *v += tone_amplitude * (TAU * tone_hz * i as f64 / fs + phase0).sin();
            }
        }
    }
}

fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Synthesize a recording. Samples are rounded to 1e-6 to keep files small.
pub fn simulate(spec: &ScenarioSpec, geom: &ToolGeometry) -> Result<AccelerationRecording> {
    let bursts = burst_schedule(spec, geom)?;
    let fs = SIM_SAMPLE_RATE_HZ as f64;
    let n = (spec.duration_s * fs).round() as usize;
    let noise = Normal::new(0.0, spec.noise_floor_rms).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let axes: Vec<Vec<f64>> = (0..3usize)
        .into_par_iter()
        .map(|axis| {
            let mut r = rng::stream(spec.seed, "noise", axis as u64);
            let mut v: Vec<f64> = (0..n).map(|_| noise.sample(&mut r)).collect();
            add_bursts(&mut v, &bursts, spec.burst.axis_gains[axis], spec.burst.decay_s, fs);
            match axis {
                1 => add_disturbance(&mut v, spec, fs),
                2 => add_belt_tone(&mut v, spec, fs),
                _ => {}
            }
            v.iter_mut().for_each(|s| *s = quantize(*s));
            v
        })
        .collect();
    let [x, y, z]: [Vec<f64>; 3] = axes.try_into().expect("three axes");
    let mut rec = AccelerationRecording::new(SIM_SAMPLE_RATE_HZ, x, y, z, spec.machine.clone())?;
    rec.scenario = Some(spec.scenario);
    if let Some(label) = spec.label() {
        rec = rec.with_condition(label);
    }
    rec.seed = Some(spec.seed);
    Ok(rec)
}

/// Specs for a whole experiment: one per class, or a single unlabeled trial
/// for wear. Each recording gets its own seed derived from `seed`.
pub fn experiment_specs(scenario: Scenario, per_class_durations: &[f64], seed: u64) -> Result<Vec<ScenarioSpec>> {
    let expected = if scenario == Scenario::Wear {
        1
    } else {
        scenario.class_count() as usize
    };
    if per_class_durations.len() != expected {
        return Err(Error::InvalidSpec(format!(
            "{scenario} needs {expected} duration(s), got {}",
            per_class_durations.len()
        )));
    }
    per_class_durations
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let class = (scenario != Scenario::Wear).then_some(i as u8);
            ScenarioSpec::new(scenario, class, d, rng::derive_seed(seed, "recording", i as u64))
        })
        .collect()
}

/// The tool shared by all recordings of an experiment.
pub fn experiment_geometry(spec: &ScenarioSpec, seed: u64) -> Result<ToolGeometry> {
    ToolGeometry::jittered(
        spec.machine.blade_count,
        spec.pitch_jitter,
        rng::derive_seed(seed, "tool", 0),
    )
}

/// File name used for recording `index` of an experiment.
pub fn recording_file_name(spec: &ScenarioSpec) -> String {
    match spec.class_id {
        None => format!("{}_trial.csv", spec.scenario),
        Some(c) => format!("{}_class{c}.csv", spec.scenario),
    }
}

/// Simulate every spec and write the recordings into `out_dir`. The files
/// carry the experiment seed rather than the derived per-recording seeds.
pub fn write_experiment(
    specs: &[ScenarioSpec],
    seed: u64,
    out_dir: &Path,
    config_hash: Option<&str>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut paths = Vec::with_capacity(specs.len());
    for spec in specs {
        if spec.duration_s < 2.0 {
            return Err(Error::InvalidSpec("each class needs at least 2 s".into()));
        }
        let geom = experiment_geometry(spec, seed)?;
        let mut rec = simulate(spec, &geom)?;
        rec.seed = Some(seed);
        rec.config_hash = config_hash.map(str::to_string);
        let path = out_dir.join(recording_file_name(spec));
        save_recording(&rec, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Default-parameter experiment written to `out_dir`.
pub fn generate_experiment(
    scenario: Scenario,
    per_class_durations: &[f64],
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let specs = experiment_specs(scenario, per_class_durations, seed)?;
    write_experiment(&specs, seed, out_dir, None)
}

/// In-memory counterpart of [`generate_experiment`].
pub fn simulate_experiment(
    scenario: Scenario,
    per_class_durations: &[f64],
    seed: u64,
) -> Result<Vec<AccelerationRecording>> {
    experiment_specs(scenario, per_class_durations, seed)?
        .iter()
        .map(|s| simulate(s, &experiment_geometry(s, seed)?))
        .collect()
}

/// Mean impact rate in Hz.
pub fn tooth_pass_frequency(rpm: f64, blade_count: u32) -> f64 {
    rpm * blade_count as f64 / 60.0
}
