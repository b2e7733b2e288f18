//! End-to-end commands: simulate, featurize, train, evaluate, importance,
//! scalogram and predict. The CLI in `main.rs` is a thin layer over these.

mod config;
mod dataset;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{
    evaluate, feature_importance, stratified_split, train_random_forest, train_report, train_svm, ClassifierModel,
    Dataset, ModelKind, TrainReport,
};
use crate::cwt::{cwt, export_scalogram, Scalogram, ScalogramFormat, WaveletSpec};
use crate::error::{Error, Result};
use crate::features::{statistical_features_with_bins, FeatureScheme, FeatureVector};
use crate::signal::{
    label_all, label_windows_by_time, load_recording, segment_windows, AccelerationRecording, Axis, ConditionLabel,
    LabeledWindow, Scenario, Window,
};
use crate::sim::write_experiment;
use crate::wpd::wpd_features;

pub use config::{parse_key_values, PipelineConfig};
pub use dataset::{read_dataset, write_dataset, DatasetFile};

/// Refuse an artifact produced under a different config unless forced.
pub fn check_config_hash(artifact: &Path, found: Option<&str>, cfg: &PipelineConfig, force: bool) -> Result<()> {
    let expected = cfg.hash();
    match found {
        Some(h) if h != expected && !force => Err(Error::ConfigHashMismatch {
            artifact: artifact.to_path_buf(),
            found: h.to_string(),
            expected,
        }),
        _ => Ok(()),
    }
}

/// Write the recordings of `cfg`'s experiment into `out_dir`.
pub fn cmd_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let specs = cfg.sim_specs()?;
    write_experiment(&specs, cfg.seed, out_dir, Some(&cfg.hash()))
}

pub fn extract_features(w: &Window, cfg: &PipelineConfig) -> Result<FeatureVector> {
    match cfg.scheme {
        FeatureScheme::WpdRms => wpd_features(w, &cfg.wpd()),
        FeatureScheme::Statistical => statistical_features_with_bins(w, cfg.entropy_bins),
    }
}

/// Windows of one recording with their labels: the recording's class, or the
/// early/late time spans for an unlabeled wear trial.
pub fn labeled_windows(rec: &AccelerationRecording, cfg: &PipelineConfig) -> Result<Vec<LabeledWindow>> {
    let scenario = rec.scenario.or(rec.condition.map(|c| c.scenario()));
    if let Some(s) = scenario {
        if s != cfg.scenario {
            return Err(Error::Config(format!(
                "recording belongs to scenario {s}, config is for {}",
                cfg.scenario
            )));
        }
    }
    let windows = segment_windows(rec, cfg.axis, cfg.window_seconds)?;
    match rec.condition {
        Some(label) => Ok(label_all(windows, label)),
        None if scenario == Some(Scenario::Wear) => label_windows_by_time(
            &windows,
            cfg.early_span_s,
            cfg.late_span_s,
            ConditionLabel::new(Scenario::Wear, 0)?,
            ConditionLabel::new(Scenario::Wear, 1)?,
        ),
        None => Err(Error::InvalidArgument(
            "recording carries no class_id and is not a wear trial".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub file: DatasetFile,
    /// Offsets (s) of degenerate windows that were skipped.
    pub skipped_offsets: Vec<f64>,
    pub total_windows: usize,
}

/// Feature rows for all labeled windows, in recording then offset order.
pub fn featurize(recordings: &[AccelerationRecording], cfg: &PipelineConfig) -> Result<Featurized> {
    if recordings.is_empty() {
        return Err(Error::InvalidArgument("no recordings to featurize".into()));
    }
    let mut windows = Vec::new();
    for rec in recordings {
        windows.extend(labeled_windows(rec, cfg)?);
    }
    if windows.is_empty() {
        return Err(Error::InvalidArgument("recordings yield no labeled windows".into()));
    }
    let results: Vec<Result<FeatureVector>> = windows.par_iter().map(|lw| extract_features(&lw.window, cfg)).collect();
    let names = match cfg.scheme {
        FeatureScheme::WpdRms => crate::wpd::feature_names(windows[0].window.sample_rate_hz, cfg.wpd_level),
        FeatureScheme::Statistical => crate::features::STATISTICAL_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let mut ds = Dataset::new(cfg.scheme, names, Some(cfg.scenario));
    let mut skipped = Vec::new();
    for (lw, r) in windows.iter().zip(results) {
        match r {
            Ok(fv) => ds.push(&fv, lw.label.class_id())?,
            Err(Error::DegenerateWindow { offset_s, .. }) => skipped.push(offset_s),
            Err(e) => return Err(e),
        }
    }
    if skipped.len() * 100 > windows.len() {
        return Err(Error::TooManyDegenerate {
            count: skipped.len(),
            total: windows.len(),
            offsets: skipped,
        });
    }
    Ok(Featurized {
        file: DatasetFile {
            dataset: ds,
            axis: Some(cfg.axis),
            seed: Some(cfg.seed),
            config_hash: Some(cfg.hash()),
        },
        skipped_offsets: skipped,
        total_windows: windows.len(),
    })
}

pub fn cmd_featurize(paths: &[PathBuf], cfg: &PipelineConfig, out_csv: &Path, force: bool) -> Result<Featurized> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no recordings given".into()));
    }
    let mut recs = Vec::with_capacity(paths.len());
    for p in paths {
        let rec = load_recording(p)?;
        check_config_hash(p, rec.config_hash.as_deref(), cfg, force)?;
        recs.push(rec);
    }
    let out = featurize(&recs, cfg)?;
    write_dataset(&out.file, out_csv)?;
    Ok(out)
}

/// Everything a training run reports, echoing its config for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub n_train: usize,
    pub n_validation: usize,
    pub class_counts: BTreeMap<u8, usize>,
    pub models: Vec<TrainReport>,
    pub config: String,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "scenario {}  seed {}  config {}\ntrain rows {}  validation rows {}\n",
            self.scenario, self.seed, self.config_hash, self.n_train, self.n_validation
        );
        for r in &self.models {
            s.push_str(&r.to_text());
        }
        s.push_str("config:\n");
        for line in self.config.lines() {
            s.push_str("  ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Split, fit every configured classifier and score it.
pub fn train_models(ds: &Dataset, cfg: &PipelineConfig) -> Result<(Vec<ClassifierModel>, RunReport)> {
    if let Some(s) = ds.scenario() {
        if s != cfg.scenario {
            return Err(Error::Config(format!(
                "dataset is for {s}, config for {}",
                cfg.scenario
            )));
        }
    }
    if ds.scheme() != cfg.scheme {
        return Err(Error::SchemaMismatch {
            missing: vec![format!("scheme {}", cfg.scheme)],
            extra: vec![format!("scheme {}", ds.scheme())],
        });
    }
    let (train, validation) = stratified_split(ds, cfg.validation_ratio, cfg.split_seed())?;
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for kind in &cfg.classifiers {
        let mut model: ClassifierModel = match kind {
            ModelKind::Svm => train_svm(&train, &cfg.svm_params())?.into(),
            ModelKind::Forest => train_random_forest(&train, &cfg.forest_params())?.into(),
        };
        model.set_provenance(Some(cfg.hash()), Some(cfg.seed));
        reports.push(train_report(&model, &train, &validation, cfg.split_seed())?);
        models.push(model);
    }
    let report = RunReport {
        scenario: cfg.scenario.to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        n_train: train.len(),
        n_validation: validation.len(),
        class_counts: ds.class_counts(),
        models: reports,
        config: cfg.canonical_text(),
    };
    Ok((models, report))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model_paths: Vec<PathBuf>,
    pub report: RunReport,
}

/// Train, then write `<kind>.model`, `report.txt` and `report.json` into `out_dir`.
pub fn cmd_train(dataset_path: &Path, cfg: &PipelineConfig, out_dir: &Path, force: bool) -> Result<TrainOutcome> {
    let file = read_dataset(dataset_path)?;
    check_config_hash(dataset_path, file.config_hash.as_deref(), cfg, force)?;
    let (models, report) = train_models(&file.dataset, cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut model_paths = Vec::new();
    for m in &models {
        let p = out_dir.join(format!("{}.model", m.kind().name()));
        m.save(&p)?;
        model_paths.push(p);
    }
    let txt = out_dir.join("report.txt");
    fs::write(&txt, report.to_text()).map_err(|e| Error::io(&txt, e))?;
    let json = out_dir.join("report.json");
    fs::write(&json, report.to_json()).map_err(|e| Error::io(&json, e))?;
    Ok(TrainOutcome { model_paths, report })
}

/// Score a saved model on the validation split of a dataset (the same split
/// `train` used), or on every row with `whole`.
pub fn cmd_evaluate(
    model_path: &Path,
    dataset_path: &Path,
    cfg: &PipelineConfig,
    whole: bool,
    force: bool,
) -> Result<TrainReport> {
    let model = ClassifierModel::load(model_path)?;
    check_config_hash(model_path, model.header().config_hash.as_deref(), cfg, force)?;
    let file = read_dataset(dataset_path)?;
    check_config_hash(dataset_path, file.config_hash.as_deref(), cfg, force)?;
    let ds = if whole {
        file.dataset
    } else {
        stratified_split(&file.dataset, cfg.validation_ratio, cfg.split_seed())?.1
    };
    evaluate(&model, &ds, cfg.split_seed())
}

pub fn cmd_importance(model_path: &Path) -> Result<Vec<(String, f64)>> {
    match ClassifierModel::load(model_path)? {
        ClassifierModel::Forest(f) => Ok(feature_importance(&f)),
        ClassifierModel::Svm(_) => Err(Error::InvalidArgument("feature importance needs a forest model".into())),
    }
}

pub fn importance_table(ranked: &[(String, f64)]) -> String {
    let width = ranked.iter().map(|(n, _)| n.len()).max().unwrap_or(7).max(7);
    let mut s = format!("rank  {:<width$}  importance\n", "feature");
    for (i, (name, v)) in ranked.iter().enumerate() {
        s.push_str(&format!("{:>4}  {name:<width$}  {v:.6}\n", i + 1));
    }
    s
}

#[derive(Debug, Clone)]
pub struct ScalogramRequest {
    pub axis: Axis,
    pub wavelet: WaveletSpec,
    pub scales: Vec<f64>,
    pub start_s: f64,
    pub duration_s: Option<f64>,
    pub format: ScalogramFormat,
}

/// CWT of a slice of one recording axis, written to `out`.
pub fn cmd_scalogram(recording: &Path, req: &ScalogramRequest, out: &Path) -> Result<Scalogram> {
    let rec = load_recording(recording)?;
    let fs_hz = rec.sample_rate_hz();
    let x = rec.axis(req.axis);
    if !(req.start_s >= 0.0) {
        return Err(Error::InvalidArgument("start must be >= 0".into()));
    }
    let start = (req.start_s * fs_hz as f64).round() as usize;
    let end = match req.duration_s {
        Some(d) if d > 0.0 => start + (d * fs_hz as f64).round() as usize,
        Some(d) => return Err(Error::InvalidArgument(format!("duration must be > 0, got {d}"))),
        None => x.len(),
    };
    if start >= x.len() || end > x.len() {
        return Err(Error::InvalidArgument(format!(
            "requested slice exceeds the {:.3} s recording",
            rec.duration_s()
        )));
    }
    let sc = cwt(&x[start..end], req.wavelet, &req.scales, fs_hz)?;
    export_scalogram(&sc, out, req.format)?;
    Ok(sc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// `(window offset in s, class)` per window.
    pub windows: Vec<(f64, u8)>,
    /// Most frequent class; ties go to the lowest id.
    pub modal: u8,
}

pub fn predict_recording(
    model: &ClassifierModel,
    rec: &AccelerationRecording,
    cfg: &PipelineConfig,
) -> Result<Prediction> {
    let windows = segment_windows(rec, cfg.axis, cfg.window_seconds)?;
    if windows.is_empty() {
        return Err(Error::InvalidArgument("recording is shorter than one window".into()));
    }
    let labels: Vec<Result<u8>> = windows
        .par_iter()
        .map(|w| model.predict(&extract_features(w, cfg)?))
        .collect();
    let mut out = Vec::with_capacity(windows.len());
    let mut counts = BTreeMap::new();
    for (w, l) in windows.iter().zip(labels) {
        let l = l?;
        *counts.entry(l).or_insert(0usize) += 1;
        out.push((w.source_offset_s, l));
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let modal = counts.iter().find(|(_, &c)| c == max).map(|(&k, _)| k).unwrap_or(0);
    Ok(Prediction { windows: out, modal })
}

pub fn cmd_predict(model_path: &Path, recording: &Path, cfg: &PipelineConfig, force: bool) -> Result<Prediction> {
    let model = ClassifierModel::load(model_path)?;
    check_config_hash(model_path, model.header().config_hash.as_deref(), cfg, force)?;
    let rec = load_recording(recording)?;
    predict_recording(&model, &rec, cfg)
}

impl Prediction {
    pub fn to_text(&self, scenario: Option<Scenario>) -> String {
        let name = |c: u8| {
            scenario
                .and_then(|s| s.class_name(c))
                .map_or(String::new(), |n| format!(" ({n})"))
        };
        let mut s = String::new();
        for (t, l) in &self.windows {
            s.push_str(&format!("{t:>10.3} s  {l}{}\n", name(*l)));
        }
        s.push_str(&format!("modal label: {}{}\n", self.modal, name(self.modal)));
        s
    }
}
