//! Run configuration: plain `key=value` lines with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::classify::{ForestParams, Gamma, ModelKind, SvmParams};
use crate::error::{Error, Result};
use crate::features::{FeatureScheme, DEFAULT_ENTROPY_BINS};
use crate::rng;
use crate::signal::{Axis, Scenario};
use crate::sim::{default_durations, experiment_specs, ScenarioSpec};
use crate::wpd::{MotherFilter, WpdConfig};

/// Split `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub axis: Axis,
    pub scheme: FeatureScheme,
    pub window_seconds: f64,
    pub validation_ratio: f64,
    pub classifiers: Vec<ModelKind>,
    /// Time spans labeled fresh / worn in the wear trial.
    pub early_span_s: f64,
    pub late_span_s: f64,
    pub wpd_level: u32,
    pub wpd_filter: MotherFilter,
    pub entropy_bins: usize,
    pub svm_c: f64,
    pub svm_gamma: Gamma,
    pub svm_tolerance: f64,
    pub forest_trees: usize,
    pub forest_max_features: Option<usize>,
    /// Recording length per class (a single entry for the wear trial).
    pub durations_s: Vec<f64>,
    /// Simulator overrides, see [`ScenarioSpec::set`].
    pub sim: BTreeMap<String, String>,
}

fn parse_kind(s: &str) -> Result<ModelKind> {
    match s.trim() {
        "svm" => Ok(ModelKind::Svm),
        "forest" | "rf" => Ok(ModelKind::Forest),
        other => Err(Error::Config(format!("unknown classifier '{other}' (svm, forest)"))),
    }
}

impl PipelineConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            axis: scenario.default_axis(),
            scheme: if scenario == Scenario::Wear {
                FeatureScheme::WpdRms
            } else {
                FeatureScheme::Statistical
            },
            window_seconds: 1.0,
            validation_ratio: 0.25,
            classifiers: vec![ModelKind::Svm, ModelKind::Forest],
            early_span_s: 300.0,
            late_span_s: 300.0,
            wpd_level: 3,
            wpd_filter: MotherFilter::Db4,
            entropy_bins: DEFAULT_ENTROPY_BINS,
            svm_c: 1.0,
            svm_gamma: Gamma::Scale,
            svm_tolerance: 1e-3,
            forest_trees: 100,
            forest_max_features: None,
            durations_s: default_durations(scenario),
            sim: BTreeMap::new(),
        }
    }

    /// Defaults for the scenario named in `pairs` (or `scenario` if absent),
    /// then every pair applied in order.
    pub fn from_pairs(pairs: &[(String, String)], scenario: Option<Scenario>) -> Result<Self> {
        let named = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .map(|(_, v)| v.parse::<Scenario>().map_err(|e| Error::Config(e.to_string())))
            .transpose()?;
        let scenario = named
            .or(scenario)
            .ok_or_else(|| Error::Config("no scenario given (set scenario=... or --scenario)".into()))?;
        let mut cfg = Self::defaults(scenario);
        for (k, v) in pairs {
            if k != "scenario" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Vec<(String, String)>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_key_values(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(format!("{key}: {e}"));
        let real = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: expected a number, got '{value}'")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got '{value}'")))
        };
        match key {
            "scenario" => {
                let s: Scenario = value.parse().map_err(cfg_err)?;
                if s != self.scenario {
                    return Err(Error::Config(format!(
                        "scenario is {} but the input belongs to {s}",
                        self.scenario
                    )));
                }
            }
            "seed" => self.seed = int()?,
            "axis" => self.axis = value.parse().map_err(cfg_err)?,
            "scheme" => self.scheme = value.parse().map_err(cfg_err)?,
            "window_seconds" => self.window_seconds = real()?,
            "validation_ratio" => self.validation_ratio = real()?,
            "classifiers" => {
                let mut kinds: Vec<ModelKind> = value.split(',').map(parse_kind).collect::<Result<_>>()?;
                kinds.dedup();
                self.classifiers = kinds;
            }
            "early_span_s" => self.early_span_s = real()?,
            "late_span_s" => self.late_span_s = real()?,
            "wpd_level" => self.wpd_level = int()? as u32,
            "wpd_filter" => self.wpd_filter = value.parse().map_err(cfg_err)?,
            "entropy_bins" => self.entropy_bins = int()? as usize,
            "svm_c" => self.svm_c = real()?,
            "svm_gamma" => {
                self.svm_gamma = if value == "scale" {
                    Gamma::Scale
                } else {
                    Gamma::Value(real()?)
                }
            }
            "svm_tolerance" => self.svm_tolerance = real()?,
            "forest_trees" => self.forest_trees = int()? as usize,
            "forest_max_features" => {
                self.forest_max_features = if value == "sqrt" { None } else { Some(int()? as usize) }
            }
            "durations_s" => {
                self.durations_s = value
                    .split(',')
                    .map(|d| {
                        d.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("durations_s: bad number '{d}'")))
                    })
                    .collect::<Result<_>>()?
            }
            k if ScenarioSpec::is_sim_key(k) => {
                self.sim.insert(k.to_string(), value.to_string());
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.window_seconds > 0.0) {
            return bad("window_seconds must be > 0");
        }
        if !(self.validation_ratio > 0.0 && self.validation_ratio < 1.0) {
            return bad("validation_ratio must be in (0, 1)");
        }
        if self.classifiers.is_empty() {
            return bad("at least one classifier is required");
        }
        if self.early_span_s < 0.0 || self.late_span_s < 0.0 {
            return bad("label spans must be >= 0");
        }
        if self.wpd_level == 0 || self.wpd_level > 10 {
            return bad("wpd_level must be in 1..=10");
        }
        if self.entropy_bins == 0 {
            return bad("entropy_bins must be >= 1");
        }
        if !(self.svm_c > 0.0) || !(self.svm_tolerance > 0.0) {
            return bad("svm_c and svm_tolerance must be > 0");
        }
        if let Gamma::Value(g) = self.svm_gamma {
            if !(g > 0.0) {
                return bad("svm_gamma must be > 0 or 'scale'");
            }
        }
        if self.forest_trees == 0 || self.forest_max_features == Some(0) {
            return bad("forest_trees and forest_max_features must be >= 1");
        }
        // surfaces simulator errors (bad durations, misplaced keys) early
        self.sim_specs()?;
        Ok(())
    }

    pub fn wpd(&self) -> WpdConfig {
        WpdConfig {
            level: self.wpd_level,
            filter: self.wpd_filter,
        }
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            c: self.svm_c,
            gamma: self.svm_gamma,
            tolerance: self.svm_tolerance,
            ..SvmParams::default()
        }
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.forest_trees,
            max_features: self.forest_max_features,
            seed: rng::derive_seed(self.seed, "forest", 0),
        }
    }

    pub fn split_seed(&self) -> u64 {
        rng::derive_seed(self.seed, "split", 0)
    }

    /// One simulator spec per recording, with overrides applied.
    pub fn sim_specs(&self) -> Result<Vec<ScenarioSpec>> {
        let mut specs =
            experiment_specs(self.scenario, &self.durations_s, self.seed).map_err(|e| Error::Config(e.to_string()))?;
        for spec in &mut specs {
            for (k, v) in &self.sim {
                spec.set(k, v)?;
            }
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(specs)
    }

    /// Every setting, one `key=value` per line in a fixed order.
    pub fn canonical_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "scenario={}", self.scenario);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "axis={}", self.axis.name());
        let _ = writeln!(s, "scheme={}", self.scheme);
        let _ = writeln!(s, "window_seconds={}", self.window_seconds);
        let _ = writeln!(s, "validation_ratio={}", self.validation_ratio);
        let kinds: Vec<&str> = self.classifiers.iter().map(|k| k.name()).collect();
        let _ = writeln!(s, "classifiers={}", kinds.join(","));
        let _ = writeln!(s, "early_span_s={}", self.early_span_s);
        let _ = writeln!(s, "late_span_s={}", self.late_span_s);
        let _ = writeln!(s, "wpd_level={}", self.wpd_level);
        let _ = writeln!(s, "wpd_filter={}", self.wpd_filter);
        let _ = writeln!(s, "entropy_bins={}", self.entropy_bins);
        let _ = writeln!(s, "svm_c={}", self.svm_c);
        let _ = match self.svm_gamma {
            Gamma::Scale => writeln!(s, "svm_gamma=scale"),
            Gamma::Value(g) => writeln!(s, "svm_gamma={g}"),
        };
        let _ = writeln!(s, "svm_tolerance={}", self.svm_tolerance);
        let _ = writeln!(s, "forest_trees={}", self.forest_trees);
        let _ = match self.forest_max_features {
            None => writeln!(s, "forest_max_features=sqrt"),
            Some(m) => writeln!(s, "forest_max_features={m}"),
        };
        let _ = writeln!(s, "durations_s={}", join(&self.durations_s));
        for (k, v) in &self.sim {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`canonical_text`](Self::canonical_text).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))[..16].to_string()
    }
}
