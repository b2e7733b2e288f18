use serde::Serialize;

use crate::classify::{ClassifierModel, Dataset};
use crate::error::{Error, Result};

/// Accuracy and confusion counts (rows = true class, columns = predicted).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub confusion_matrix: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub model_id: String,
    pub kind: String,
    pub train_accuracy: Option<f64>,
    pub validation_accuracy: f64,
    pub confusion_matrix: Vec<Vec<usize>>,
    pub split_seed: u64,
}

fn confusion(model: &ClassifierModel, ds: &Dataset) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    crate::classify::check_schema(model.names(), ds.names())?;
    let k = model.header().n_classes.max(ds.n_classes());
    let mut cm = vec![vec![0usize; k]; k];
    for (row, &label) in ds.rows().iter().zip(ds.labels()) {
        cm[label as usize][model.predict_row(row) as usize] += 1;
    }
    let correct: usize = (0..k).map(|i| cm[i][i]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / ds.len() as f64,
        correct,
        total: ds.len(),
        confusion_matrix: cm,
    })
}

/// Validation accuracy and confusion matrix of `model`.
pub fn evaluate(model: &ClassifierModel, validation: &Dataset, split_seed: u64) -> Result<TrainReport> {
    let e = confusion(model, validation)?;
    Ok(TrainReport {
        model_id: model.model_id(),
        kind: model.kind().name().to_string(),
        train_accuracy: None,
        validation_accuracy: e.accuracy,
        confusion_matrix: e.confusion_matrix,
        split_seed,
    })
}

/// As [`evaluate`], with the training accuracy filled in.
pub fn train_report(
    model: &ClassifierModel,
    train: &Dataset,
    validation: &Dataset,
    split_seed: u64,
) -> Result<TrainReport> {
    let mut r = evaluate(model, validation, split_seed)?;
    r.train_accuracy = Some(confusion(model, train)?.accuracy);
    Ok(r)
}

impl Evaluation {
    pub fn of(model: &ClassifierModel, ds: &Dataset) -> Result<Self> {
        confusion(model, ds)
    }
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "model {} ({})\n  split seed        {}\n",
            self.model_id, self.kind, self.split_seed
        );
        if let Some(t) = self.train_accuracy {
            s.push_str(&format!("  train accuracy    {t:.4}\n"));
        }
        s.push_str(&format!(
            "  validation acc.   {:.4}\n  confusion (rows = true, cols = predicted)\n",
            self.validation_accuracy
        ));
        for row in &self.confusion_matrix {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>5}")).collect();
            s.push_str(&format!("    {}\n", cells.join("")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{train_random_forest, ForestParams};
    use crate::features::FeatureScheme;

    fn balanced() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..150)
            .map(|i| vec![(i % 2) as f64 * 5.0 + (i as f64 * 0.1).sin(), i as f64])
            .collect();
        let labels = (0..150).map(|i| (i % 2) as u8).collect();
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
    fn constant_predictor_scores_half() {
        // every tree is a single leaf predicting class 0
        let ds = balanced();
        let mut m = train_random_forest(
            &ds,
            &ForestParams {
                n_trees: 3,
                ..Default::default()
            },
        )
        .unwrap();
        for t in &mut m.trees {
            t.nodes = vec![crate::classify::Node::Leaf {
                distribution: vec![1.0, 0.0],
            }];
        }
        let m = ClassifierModel::Forest(m);
        let val = ds.subset(&(0..150).collect::<Vec<_>>());
        let e = Evaluation::of(&m, &val).unwrap();
        assert_eq!(e.total, 150);
        assert!((e.accuracy - 0.5).abs() < 1e-12);
        assert_eq!(e.confusion_matrix, vec![vec![75, 0], vec![75, 0]]);
    }

    #[test]
    fn perfect_model_has_diagonal_confusion() {
        let ds = balanced();
        let m: ClassifierModel = train_random_forest(
            &ds,
            &ForestParams {
                n_trees: 10,
                ..Default::default()
            },
        )
        .unwrap()
        .into();
        let r = train_report(&m, &ds, &ds, 3).unwrap();
        assert_eq!(r.validation_accuracy, 1.0);
        assert_eq!(r.confusion_matrix[0][1] + r.confusion_matrix[1][0], 0);
        let total: usize = r.confusion_matrix.iter().flatten().sum();
        assert_eq!(total, ds.len());
    }

    #[test]
    fn empty_set_rejected() {
        let ds = balanced();
        let m: ClassifierModel = train_random_forest(
            &ds,
            &ForestParams {
                n_trees: 2,
                ..Default::default()
            },
        )
        .unwrap()
        .into();
        assert!(evaluate(&m, &ds.subset(&[]), 0).is_err());
    }
}
