//! Soft-margin RBF support vector machine, one-vs-one for more than two
//! classes. Each binary problem is solved with SMO using second-order working
//! set selection on a precomputed kernel matrix.

use rayon::prelude::*;

use crate::classify::model::ModelHeader;
use crate::classify::{argmax_lowest, fit_standardizer, Dataset};
use crate::error::{Error, Result};

/// RBF width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `1 / (d * var(X))` with the variance pooled over all feature values.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: Gamma::Scale,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }
}

/// One pairwise machine. `f(x) > 0` votes for `positive`, otherwise `negative`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub positive: u8,
    pub negative: u8,
    /// Support vectors in standardized feature space.
    pub support: Vec<Vec<f64>>,
    /// Dual coefficients in `[0, C]`, one per support vector.
    pub alphas: Vec<f64>,
    /// `+1` for `positive`, `-1` for `negative`.
    pub signs: Vec<f64>,
    pub bias: f64,
    /// Maximal KKT violation at termination.
    pub kkt_gap: f64,
    pub iterations: usize,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64], gamma: f64) -> f64 {
        self.support
            .iter()
            .zip(self.alphas.iter().zip(&self.signs))
            .map(|(sv, (a, y))| a * y * rbf(sv, x, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub(crate) header: ModelHeader,
    pub c: f64,
    pub gamma: f64,
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn header(&self) -> &ModelHeader {
        &self.header
    }

    /// Class for a raw (unstandardized) feature row in schema order.
    pub fn predict_row(&self, raw: &[f64]) -> u8 {
        let x = self.header.standardizer.transform_row(raw);
        let mut votes = vec![0.0; self.header.n_classes];
        for m in &self.machines {
            let winner = if m.decision(&x, self.gamma) > 0.0 {
                m.positive
            } else {
                m.negative
            };
            votes[winner as usize] += 1.0;
        }
        argmax_lowest(&votes) as u8
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rbf(&x[i], &x[j], gamma);
        }
    });
    k
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    gap: f64,
    iterations: usize,
}

struct Stalled {
    i: usize,
    j: usize,
    gap: f64,
}

const TAU: f64 = 1e-12;

/// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= C`, `y'a = 0`.
fn smo(k: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> std::result::Result<Solution, Stalled> {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..n {
                if !low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            let rho = bias_from_gradient(&alpha, &grad, y, c);
            return Ok(Solution {
                alpha,
                rho,
                gap: gap.max(0.0),
                iterations,
            });
        }
        if iterations >= max_iter {
            return Err(Stalled { i, j, gap });
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let mut quad = k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }
}

/// `rho` such that `f(x) = sum a_i y_i K(x_i, x) - rho`; averaged over free
/// multipliers, or the midpoint of the feasible interval if none are free.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Maximal KKT violation `max_{I_up} -y G - min_{I_low} -y G` of a dual
/// solution, recomputed from scratch.
pub fn kkt_gap(x: &[Vec<f64>], y: &[f64], alpha: &[f64], c: f64, gamma: f64) -> f64 {
    let n = y.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| y[i] * y[j] * rbf(&x[i], &x[j], gamma) * alpha[j])
                .sum::<f64>()
                - 1.0
        })
        .collect();
    let eps = 1e-12 * c;
    let mut gmax = f64::NEG_INFINITY;
    let mut gmin = f64::INFINITY;
    for t in 0..n {
        let v = -y[t] * grad[t];
        let at_upper = alpha[t] >= c - eps;
        let at_lower = alpha[t] <= eps;
        if (y[t] > 0.0 && !at_upper) || (y[t] < 0.0 && !at_lower) {
            gmax = gmax.max(v);
        }
        if (y[t] > 0.0 && !at_lower) || (y[t] < 0.0 && !at_upper) {
            gmin = gmin.min(v);
        }
    }
    (gmax - gmin).max(0.0)
}

fn pooled_variance(rows: &[Vec<f64>]) -> f64 {
    let n = rows.iter().map(Vec::len).sum::<usize>() as f64;
    let mean = rows.iter().flatten().sum::<f64>() / n;
    rows.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Fit a standardizer on `train`, then one SMO machine per class pair.
pub fn train_svm(train: &Dataset, params: &SvmParams) -> Result<SvmModel> {
    train.require_classes()?;
    if !(params.c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {}", params.c)));
    }
    let standardizer = fit_standardizer(train)?;
    let x: Vec<Vec<f64>> = train.rows().iter().map(|r| standardizer.transform_row(r)).collect();
    let gamma = match params.gamma {
        Gamma::Value(g) if g > 0.0 => g,
        Gamma::Value(g) => return Err(Error::InvalidArgument(format!("gamma must be > 0, got {g}"))),
        Gamma::Scale => {
            let var = pooled_variance(&x);
            let d = train.n_features() as f64;
            if var > 0.0 {
                1.0 / (d * var)
            } else {
                1.0
            }
        }
    };

    let classes = train.classes();
    let pairs: Vec<(u8, u8)> = classes
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| classes[i + 1..].iter().map(move |&b| (a, b)))
        .collect();

    let machines = pairs
        .par_iter()
        .map(|&(a, b)| {
            let idx: Vec<usize> = (0..train.len())
                .filter(|&i| train.labels()[i] == a || train.labels()[i] == b)
                .collect();
            let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let ys: Vec<f64> = idx
                .iter()
                .map(|&i| if train.labels()[i] == a { 1.0 } else { -1.0 })
                .collect();
            let k = kernel_matrix(&xs, gamma);
            let sol =
                smo(&k, &ys, params.c, params.tolerance, params.max_iterations).map_err(|s| Error::NonConvergence {
                    class_a: a,
                    class_b: b,
                    iterations: params.max_iterations,
                    i: idx[s.i],
                    j: idx[s.j],
                    gap: s.gap,
                })?;
            let sv: Vec<usize> = (0..xs.len()).filter(|&t| sol.alpha[t] > 0.0).collect();
            Ok(BinarySvm {
                positive: a,
                negative: b,
                support: sv.iter().map(|&t| xs[t].clone()).collect(),
                alphas: sv.iter().map(|&t| sol.alpha[t]).collect(),
                signs: sv.iter().map(|&t| ys[t]).collect(),
                bias: -sol.rho,
                kkt_gap: sol.gap,
                iterations: sol.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SvmModel {
        header: ModelHeader::new(train, standardizer),
        c: params.c,
        gamma,
        machines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureScheme;
    use crate::rng;
    use rand::Rng;

    fn clouds(n: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed, "clouds", 0);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [(0u8, 0.0), (1u8, 5.0)] {
            for _ in 0..n {
                rows.push(vec![
                    center + r.random_range(-0.1..0.1),
                    center + r.random_range(-0.1..0.1),
                ]);
                labels.push(c);
            }
        }
        Dataset::from_rows(
            FeatureScheme::Statistical,
            vec!["u".into(), "v".into()],
            None,
            rows,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn separable_clouds_are_learned() {
        let ds = clouds(20, 3);
        let m = train_svm(&ds, &SvmParams::default()).unwrap();
        for (row, &label) in ds.rows().iter().zip(ds.labels()) {
            assert_eq!(m.predict_row(row), label);
        }
        assert_eq!(m.predict_row(&[-0.5, 0.2]), 0);
        assert_eq!(m.predict_row(&[5.3, 4.9]), 1);
    }

    #[test]
    fn duals_stay_in_box_and_kkt_holds() {
        let ds = clouds(20, 4);
        let params = SvmParams::default();
        let m = train_svm(&ds, &params).unwrap();
        let st = &m.header.standardizer;
        let x: Vec<Vec<f64>> = ds.rows().iter().map(|r| st.transform_row(r)).collect();
        let y: Vec<f64> = ds.labels().iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let mach = &m.machines[0];
        assert!(mach.alphas.iter().all(|&a| a > 0.0 && a <= params.c));
        // rebuild the full alpha vector by matching support vectors
        let alpha: Vec<f64> = x
            .iter()
            .map(|xi| {
                mach.support
                    .iter()
                    .position(|s| s == xi)
                    .map_or(0.0, |p| mach.alphas[p])
            })
            .collect();
        assert!(kkt_gap(&x, &y, &alpha, params.c, m.gamma) <= 1e-3);
        let eq: f64 = alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_reports_pair() {
        let ds = clouds(20, 5);
        let params = SvmParams {
            max_iterations: 1,
            tolerance: 1e-12,
            ..SvmParams::default()
        };
        assert!(matches!(train_svm(&ds, &params), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn three_classes_one_vs_one() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, (cx, cy)) in [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)].into_iter().enumerate() {
            for i in 0..10 {
                let d = i as f64 * 0.03;
                rows.push(vec![cx + d, cy - d]);
                labels.push(c as u8);
            }
        }
        let ds = Dataset::from_rows(
            FeatureScheme::Statistical,
            vec!["u".into(), "v".into()],
            None,
            rows,
            labels,
        )
        .unwrap();
        let m = train_svm(&ds, &SvmParams::default()).unwrap();
        assert_eq!(m.machines.len(), 3);
        for (row, &label) in ds.rows().iter().zip(ds.labels()) {
            assert_eq!(m.predict_row(row), label);
        }
    }

    #[test]
    fn single_class_rejected() {
        let ds = Dataset::from_rows(
            FeatureScheme::Statistical,
            vec!["u".into()],
            None,
            vec![vec![1.0], vec![2.0]],
            vec![0, 0],
        )
        .unwrap();
        assert!(matches!(
            train_svm(&ds, &SvmParams::default()),
            Err(Error::TooFewClasses(1))
        ));
    }
}
