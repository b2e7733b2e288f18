//! Supervised classification: datasets, stratified splits, standardization,
//! RBF support vector machines, random forests and evaluation.

mod forest;
mod model;
mod report;
mod standardize;
mod svm;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

pub use forest::{feature_importance, train_random_forest, ForestModel, ForestParams, Node, Tree};
pub use model::{ClassifierModel, ModelKind, MODEL_MAGIC};
pub use report::{evaluate, train_report, Evaluation, TrainReport};
pub use standardize::{fit_standardizer, Standardizer};
pub use svm::{kkt_gap, train_svm, BinarySvm, Gamma, SvmModel, SvmParams};

use crate::error::{Error, Result};
use crate::features::{FeatureScheme, FeatureVector};
use crate::rng;
use crate::signal::Scenario;

/// Feature rows with a shared schema and integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    scheme: FeatureScheme,
    names: Vec<String>,
    scenario: Option<Scenario>,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(scheme: FeatureScheme, names: Vec<String>, scenario: Option<Scenario>) -> Self {
        Self {
            scheme,
            names,
            scenario,
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn from_rows(
        scheme: FeatureScheme,
        names: Vec<String>,
        scenario: Option<Scenario>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != names.len()) {
            return Err(Error::InvalidArgument(format!(
                "row {i} has {} values, schema has {}",
                rows[i].len(),
                names.len()
            )));
        }
        Ok(Self {
            scheme,
            names,
            scenario,
            rows,
            labels,
        })
    }

    pub fn push(&mut self, fv: &FeatureVector, class_id: u8) -> Result<()> {
        check_schema(&self.names, fv.names())?;
        self.rows.push(fv.values().to_vec());
        self.labels.push(class_id);
        Ok(())
    }

    pub fn scheme(&self) -> FeatureScheme {
        self.scheme
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scenario(&self) -> Option<Scenario> {
        self.scenario
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<u8> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Number of label slots: the scenario's class count when known.
    pub fn n_classes(&self) -> usize {
        let seen = self.labels.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        self.scenario.map_or(seen, |s| (s.class_count() as usize).max(seen))
    }

    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut m = BTreeMap::new();
        for &c in &self.labels {
            *m.entry(c).or_insert(0) += 1;
        }
        m
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            scheme: self.scheme,
            names: self.names.clone(),
            scenario: self.scenario,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn feature_vector(&self, i: usize) -> FeatureVector {
        FeatureVector::new(self.scheme, self.names.clone(), self.rows[i].clone())
            .expect("dataset rows satisfy the schema")
    }

    pub(crate) fn require_classes(&self) -> Result<()> {
        let k = self.classes().len();
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        Ok(())
    }
}

/// Error unless `got` has exactly the names of `expected`, in order.
pub fn check_schema(expected: &[String], got: &[String]) -> Result<()> {
    if expected == got {
        return Ok(());
    }
    let missing: Vec<String> = expected.iter().filter(|n| !got.contains(n)).cloned().collect();
    let extra: Vec<String> = got.iter().filter(|n| !expected.contains(n)).cloned().collect();
    if missing.is_empty() && extra.is_empty() {
        return Err(Error::SchemaMismatch {
            missing: vec!["<feature order differs>".into()],
            extra,
        });
    }
    Err(Error::SchemaMismatch { missing, extra })
}

/// Per class, `max(1, floor(n_c * ratio))` rows go to validation, chosen by a
/// seeded shuffle. Both outputs keep the input row order.
pub fn stratified_split(ds: &Dataset, validation_ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(validation_ratio > 0.0 && validation_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation ratio must be in (0, 1), got {validation_ratio}"
        )));
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &c) in ds.labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut in_validation = vec![false; ds.len()];
    for (&class, idx) in &by_class {
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: idx.len(),
            });
        }
        let take = ((idx.len() as f64 * validation_ratio).floor() as usize).max(1);
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng::stream(seed, "split", class as u64));
        for &i in &shuffled[..take] {
            in_validation[i] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| in_validation[i]);
    Ok((ds.subset(&train), ds.subset(&val)))
}

pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(per_class: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![c as f64 * 10.0 + i as f64 * 0.01, i as f64]);
                labels.push(c as u8);
            }
        }
        Dataset::from_rows(
            FeatureScheme::Statistical,
            vec!["a".into(), "b".into()],
            None,
            rows,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn split_counts_follow_floor_rule() {
        let ds = toy(&[300, 300]);
        let (tr, va) = stratified_split(&ds, 0.25, 1).unwrap();
        assert_eq!((tr.len(), va.len()), (450, 150));
        assert_eq!(va.class_counts().values().copied().collect::<Vec<_>>(), vec![75, 75]);

        let ds = toy(&[15, 15, 15]);
        let (tr, va) = stratified_split(&ds, 0.25, 1).unwrap();
        assert_eq!((tr.len(), va.len()), (36, 9));
        assert!(va.class_counts().values().all(|&c| c == 3));

        let ds = toy(&[2, 3]);
        let (_, va) = stratified_split(&ds, 0.25, 1).unwrap();
        assert_eq!(va.len(), 2);
    }

    #[test]
    fn split_is_seeded() {
        let ds = toy(&[40, 40]);
        let a = stratified_split(&ds, 0.25, 9).unwrap();
        let b = stratified_split(&ds, 0.25, 9).unwrap();
        let c = stratified_split(&ds, 0.25, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn split_preconditions() {
        let ds = toy(&[10, 10]);
        assert!(stratified_split(&ds, 0.0, 1).is_err());
        assert!(stratified_split(&ds, 1.0, 1).is_err());
        let ds = toy(&[10, 1]);
        assert!(matches!(
            stratified_split(&ds, 0.25, 1),
            Err(Error::ClassTooSmall { class: 1, count: 1 })
        ));
    }

    #[test]
    fn schema_errors_list_names() {
        let e = check_schema(&["a".into(), "b".into()], &["a".into(), "c".into()]).unwrap_err();
        match e {
            Error::SchemaMismatch { missing, extra } => {
                assert_eq!(missing, vec!["b".to_string()]);
                assert_eq!(extra, vec!["c".to_string()]);
            }
            other => panic!("{other}"),
        }
    }
}
