//! Random forest of fully grown CART trees with Gini splits.
//!
//! Tree `t` draws its bootstrap from the stream `(seed, "tree", t)`; node `k`
//! of that tree (numbered in creation order) draws its feature subset from
//! `(tree seed, "node", k)`. Trees are built in parallel and collected in
//! index order, so the model does not depend on the thread count.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::classify::model::ModelHeader;
use crate::classify::{argmax_lowest, fit_standardizer, Dataset};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Class distribution of the training rows that reached the leaf.
    Leaf { distribution: Vec<f64> },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub seed: u64,
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf distribution for a standardized row.
    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub(crate) header: ModelHeader,
    pub seed: u64,
    pub max_features: usize,
    pub trees: Vec<Tree>,
    /// Normalized total Gini decrease per feature, summing to 1.
    pub importances: Vec<f64>,
}

impl ForestModel {
    pub fn header(&self) -> &ModelHeader {
        &self.header
    }

    /// Sum of leaf distributions over all trees for a raw feature row.
    pub fn vote(&self, raw: &[f64]) -> Vec<f64> {
        let x = self.header.standardizer.transform_row(raw);
        let mut acc = vec![0.0; self.header.n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.leaf_distribution(&x)) {
                *a += p;
            }
        }
        acc
    }

    pub fn predict_row(&self, raw: &[f64]) -> u8 {
        argmax_lowest(&self.vote(raw)) as u8
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    n_classes: usize,
    max_features: usize,
    tree_seed: u64,
    n_root: usize,
    importances: Vec<f64>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Best split of `rows` on `feature`: highest Gini decrease, lowest
    /// threshold among ties. `None` if the feature is constant on `rows`.
    fn best_on_feature(&self, rows: &[usize], feature: usize, parent: f64) -> Option<Split> {
        let mut sorted: Vec<(f64, u8)> = rows.iter().map(|&r| (self.x[r][feature], self.y[r])).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = sorted.len();
        let mut right = vec![0usize; self.n_classes];
        for &(_, c) in &sorted {
            right[c as usize] += 1;
        }
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<Split> = None;
        for k in 0..n - 1 {
            let c = sorted[k].1 as usize;
            left[c] += 1;
            right[c] -= 1;
            let (v, next) = (sorted[k].0, sorted[k + 1].0);
            if v == next {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            let weighted = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            let decrease = parent - weighted;
            if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                let mid = v + (next - v) / 2.0;
                let threshold = if mid < next { mid } else { v };
                best = Some(Split {
                    feature,
                    threshold,
                    decrease,
                });
            }
        }
        best
    }

    fn find_split(&self, rows: &[usize], node_index: usize, parent: f64) -> Option<Split> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng::stream(self.tree_seed, "node", node_index as u64));

        // Sampled features first; if all are constant here, keep drawing from
        // the same permutation until one can split.
        let mut start = 0;
        while start < d {
            let end = (start + self.max_features).min(d);
            let mut batch = order[start..end].to_vec();
            batch.sort_unstable();
            let mut best: Option<Split> = None;
            for f in batch {
                if let Some(s) = self.best_on_feature(rows, f, parent) {
                    if best.as_ref().is_none_or(|b| s.decrease > b.decrease) {
                        best = Some(s);
                    }
                }
            }
            if best.is_some() {
                return best;
            }
            start = end;
        }
        None
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let mut dist = vec![0.0; self.n_classes];
        for &r in rows {
            dist[self.y[r] as usize] += 1.0;
        }
        let n = rows.len() as f64;
        dist.iter_mut().for_each(|p| *p /= n);
        Node::Leaf { distribution: dist }
    }

    fn build(mut self, rows: Vec<usize>) -> (Tree, Vec<f64>) {
        self.nodes.push(Node::Leaf { distribution: vec![] });
        let mut stack = vec![(0usize, rows)];
        while let Some((idx, rows)) = stack.pop() {
            let mut counts = vec![0usize; self.n_classes];
            for &r in &rows {
                counts[self.y[r] as usize] += 1;
            }
            let parent = gini(&counts, rows.len());
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure {
                None
            } else {
                self.find_split(&rows, idx, parent)
            };
            let Some(split) = split else {
                self.nodes[idx] = self.leaf(&rows);
                continue;
            };
            self.importances[split.feature] += rows.len() as f64 / self.n_root as f64 * split.decrease;
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
            let left = self.nodes.len();
            let right = left + 1;
            self.nodes.push(Node::Leaf { distribution: vec![] });
            self.nodes.push(Node::Leaf { distribution: vec![] });
            self.nodes[idx] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            // right pushed first so the left subtree is expanded next
            stack.push((right, r));
            stack.push((left, l));
        }
        (
            Tree {
                seed: self.tree_seed,
                nodes: self.nodes,
            },
            self.importances,
        )
    }
}

pub fn train_random_forest(train: &Dataset, params: &ForestParams) -> Result<ForestModel> {
    train.require_classes()?;
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
    }
    let standardizer = fit_standardizer(train)?;
    let x: Vec<Vec<f64>> = train.rows().iter().map(|r| standardizer.transform_row(r)).collect();
    let d = train.n_features();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let n_classes = train.n_classes();
    let n = train.len();

    let grown: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = rng::derive_seed(params.seed, "tree", t as u64);
            let mut boot = rng::stream(tree_seed, "bootstrap", 0);
            let rows: Vec<usize> = (0..n).map(|_| boot.random_range(0..n)).collect();
            Builder {
                x: &x,
                y: train.labels(),
                n_classes,
                max_features,
                tree_seed,
                n_root: n,
                importances: vec![0.0; d],
                nodes: Vec::new(),
            }
            .build(rows)
        })
        .collect();

    let mut importances = vec![0.0; d];
    for (_, imp) in &grown {
        for (a, b) in importances.iter_mut().zip(imp) {
            *a += b;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        importances.iter_mut().for_each(|v| *v = 1.0 / d as f64);
    }

    Ok(ForestModel {
        header: ModelHeader::new(train, standardizer),
        seed: params.seed,
        max_features,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        importances,
    })
}

/// Features by descending importance; ties keep feature order.
pub fn feature_importance(model: &ForestModel) -> Vec<(String, f64)> {
    let mut ranked: Vec<(usize, f64)> = model.importances.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .map(|(i, v)| (model.header.names[i].clone(), v))
        .collect()
}
