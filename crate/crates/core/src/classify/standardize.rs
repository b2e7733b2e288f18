use crate::classify::{check_schema, Dataset};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Per-feature mean and population standard deviation of a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub(crate) names: Vec<String>,
    pub(crate) means: Vec<f64>,
    pub(crate) stds: Vec<f64>,
}

pub fn fit_standardizer(train: &Dataset) -> Result<Standardizer> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot standardize an empty dataset".into()));
    }
    let n = train.len() as f64;
    let d = train.n_features();
    let mut means = vec![0.0; d];
    for row in train.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; d];
    for row in train.rows() {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    let stds: Vec<f64> = vars.iter().map(|v| (v / n).sqrt()).collect();
    for (j, (&s, &m)) in stds.iter().zip(&means).enumerate() {
        if !(s > 1e-12 * m.abs().max(1.0)) {
            return Err(Error::ConstantFeature(train.names()[j].clone()));
        }
    }
    Ok(Standardizer {
        names: train.names().to_vec(),
        means,
        stds,
    })
}

impl Standardizer {
    pub fn from_parts(names: Vec<String>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if names.len() != means.len() || names.len() != stds.len() {
            return Err(Error::InvalidArgument("standardizer length mismatch".into()));
        }
        if let Some(j) = stds.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::ConstantFeature(names[j].clone()));
        }
        Ok(Self { names, means, stds })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        check_schema(&self.names, fv.names())?;
        FeatureVector::new(fv.scheme(), fv.names().to_vec(), self.transform_row(fv.values()))
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        check_schema(&self.names, ds.names())?;
        Dataset::from_rows(
            ds.scheme(),
            ds.names().to_vec(),
            ds.scenario(),
            ds.rows().iter().map(|r| self.transform_row(r)).collect(),
            ds.labels().to_vec(),
        )
    }
}
