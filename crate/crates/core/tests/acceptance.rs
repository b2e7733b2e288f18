//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use seamsentinel::classify::{
    feature_importance, kkt_gap, stratified_split, train_random_forest, train_svm, ClassifierModel, Dataset,
    ForestModel, ForestParams, Node, SvmModel, SvmParams,
};
use seamsentinel::cwt::{cwt, WaveletSpec};
use seamsentinel::features::{statistical_features, FeatureScheme, STATISTICAL_NAMES};
use seamsentinel::pipeline::{self, featurize, train_models, Featurized, PipelineConfig, RunReport};
use seamsentinel::rng;
use seamsentinel::signal::{Axis, Scenario, Window};
use seamsentinel::sim::{experiment_geometry, simulate};
use seamsentinel::wpd::{decompose, WpdConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Run {
    data: Featurized,
    report: RunReport,
    models: Vec<ClassifierModel>,
}

fn run(cfg: &PipelineConfig) -> Run {
    let recs: Vec<_> = cfg
        .sim_specs()
        .unwrap()
        .iter()
        .map(|s| simulate(s, &experiment_geometry(s, cfg.seed).unwrap()).unwrap())
        .collect();
    let data = featurize(&recs, cfg).unwrap();
    let (models, report) = train_models(&data.file.dataset, cfg).unwrap();
    Run { data, report, models }
}

fn accuracies(r: &RunReport) -> (f64, f64) {
    (r.models[0].validation_accuracy, r.models[1].validation_accuracy)
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1e-300)
    }
}

// 1 and 12 (wear part)
fn wear_default(shape: &mut Vec<String>) -> Verdict {
    let cfg = PipelineConfig::defaults(Scenario::Wear);
    let t0 = Instant::now();
    let r = pool(1).install(|| run(&cfg));
    let secs = t0.elapsed().as_secs_f64();
    let counts = r.data.file.dataset.class_counts();
    shape.push(format!(
        "wear class 0 = {}, class 1 = {}",
        counts.get(&0).copied().unwrap_or(0),
        counts.get(&1).copied().unwrap_or(0)
    ));
    if counts.get(&0) != Some(&300) || counts.get(&1) != Some(&300) {
        shape.push("FAIL".into());
    }
    let (svm, rf) = accuracies(&r.report);
    verdict(
        svm >= 0.95 && rf >= 0.95 && secs <= 120.0,
        format!("svm {svm:.4}, forest {rf:.4}, {secs:.1} s on one thread"),
    )
}

fn wear_importance() -> Verdict {
    let mut firsts = 0;
    let mut tops = Vec::new();
    for seed in 1..=10 {
        let mut cfg = PipelineConfig::defaults(Scenario::Wear);
        cfg.seed = seed;
        cfg.classifiers = vec![seamsentinel::classify::ModelKind::Forest];
        let r = run(&cfg);
        let ClassifierModel::Forest(f) = &r.models[0] else {
            panic!("expected a forest");
        };
        let ranked = feature_importance(f);
        if ranked[0].0 == "wpd_band_5_2000_2400" {
            firsts += 1;
        } else {
            tops.push(format!("seed {seed}: {}", ranked[0].0));
        }
    }
    let mut d = format!("band 5 first in {firsts}/10 seeds");
    if !tops.is_empty() {
        d.push_str(&format!(" ({})", tops.join(", ")));
    }
    verdict(firsts >= 9, d)
}

fn defect() -> Verdict {
    let r = run(&PipelineConfig::defaults(Scenario::BladeDefect));
    let (svm, rf) = accuracies(&r.report);
    verdict(
        svm >= 0.90 && rf >= 0.90 && r.data.file.dataset.n_features() == 9 && r.data.file.dataset.n_classes() == 3,
        format!("svm {svm:.4}, forest {rf:.4}, {} rows", r.data.file.dataset.len()),
    )
}

fn stability() -> Verdict {
    let cfg = PipelineConfig::defaults(Scenario::Stability);
    let longest = cfg.durations_s.iter().copied().fold(0.0, f64::max);
    let r = run(&cfg);
    let (svm, rf) = accuracies(&r.report);
    verdict(
        svm >= 0.90 && rf >= 0.90 && longest <= 120.0 && r.data.file.dataset.n_classes() == 2,
        format!("svm {svm:.4}, forest {rf:.4}, longest class recording {longest} s"),
    )
}

fn belt(shape: &mut Vec<String>) -> Verdict {
    let (mut svm, mut rf) = (0.0, 0.0);
    let mut shapes_ok = true;
    for seed in 0..10 {
        let mut cfg = PipelineConfig::defaults(Scenario::Belt);
        cfg.seed = seed;
        let r = run(&cfg);
        let ds = &r.data.file.dataset;
        shapes_ok &= ds.len() == 45 && ds.n_classes() == 3 && r.data.file.axis == Some(Axis::Z);
        if seed == 0 {
            shape.push(format!("belt windows = {}", ds.len()));
            if ds.len() != 45 {
                shape.push("FAIL".into());
            }
        }
        let (a, b) = accuracies(&r.report);
        svm += a / 10.0;
        rf += b / 10.0;
    }
    verdict(
        shapes_ok && svm >= 0.85 && rf >= 0.85,
        format!("mean svm {svm:.4}, mean forest {rf:.4}, 45 windows / 3 classes / z axis every seed: {shapes_ok}"),
    )
}

fn random_signal(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let kind = r.random_range(0..4);
    let scale = 10f64.powf(r.random_range(-3.0..3.0));
    let offset = r.random_range(-2.0..2.0) * scale;
    match kind {
        0 => (0..n)
            .map(|_| offset + scale * r.sample::<f64, _>(StandardNormal))
            .collect(),
        1 => (0..n).map(|_| offset + scale * r.random_range(-1.0..1.0)).collect(),
        2 => {
            let e = Exp::new(1.0).unwrap();
            (0..n).map(|_| offset + scale * e.sample(r)).collect()
        }
        _ => {
            let f = r.random_range(1.0..3199.0);
            let ph = r.random_range(0.0..2.0 * PI);
            let noise = Normal::new(0.0, 0.1 * scale).unwrap();
            (0..n)
                .map(|i| offset + scale * (2.0 * PI * f * i as f64 / 6400.0 + ph).sin() + noise.sample(r))
                .collect()
        }
    }
}

fn wpd_energy() -> Verdict {
    let cfg = WpdConfig::new(3, "db4").unwrap();
    let mut r = rng::stream(6, "acceptance", 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = random_signal(&mut r, 6400);
        let input: f64 = x.iter().map(|v| v * v).sum();
        let leaves: f64 = decompose(&x, 6400, &cfg).unwrap().energies().iter().sum();
        worst = worst.max(rel_err(leaves, input));
    }
    verdict(worst <= 1e-6, format!("worst relative error {worst:.3e}"))
}

fn wpd_sweep() -> Verdict {
    let cfg = WpdConfig::new(3, "db4").unwrap();
    let mut got = Vec::new();
    for k in 0..8 {
        let f = 100.0 + 400.0 * k as f64;
        let x: Vec<f64> = (0..6400).map(|i| (2.0 * PI * f * i as f64 / 6400.0).sin()).collect();
        let e = decompose(&x, 6400, &cfg).unwrap().energies();
        let arg = (0..e.len()).fold(0, |b, i| if e[i] > e[b] { i } else { b });
        got.push(arg);
    }
    verdict(got == (0..8).collect::<Vec<_>>(), format!("argmax leaves {got:?}"))
}

fn cwt_localization() -> Verdict {
    let fs = 6400u32;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for w in [WaveletSpec::gaussian(), WaveletSpec::morlet(), WaveletSpec::shannon()] {
        for f in [200.0, 400.0, 800.0] {
            let expect = w.center_frequency() * fs as f64 / f;
            let n = (20.0 * fs as f64 / f).round() as usize;
            let x: Vec<f64> = (0..n)
                .map(|i| (2.0 * PI * f * i as f64 / fs as f64 + 0.3).sin())
                .collect();
            let scales: Vec<f64> = (0..401)
                .map(|i| expect * 0.6 * (1.4f64 / 0.6).powf(i as f64 / 400.0))
                .collect();
            let sc = cwt(&x, w, &scales, fs).unwrap();
            let got = sc.dominant_scale(0..n);
            let e = rel_err(got, expect);
            worst = worst.max(e);
            if e > 0.05 {
                lines.push(format!("{w} at {f} Hz: {got:.3} vs {expect:.3}"));
            }
        }
    }
    let mut d = format!("worst relative scale error {:.2}%", worst * 100.0);
    if !lines.is_empty() {
        d.push_str(&format!(" ({})", lines.join("; ")));
    }
    verdict(worst <= 0.05, d)
}

/// Direct-formula statistics, written independently of the library.
fn oracle(x: &[f64]) -> [f64; 9] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let moment = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let var = moment(2);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = 64;
    let width = (hi - lo) / bins as f64;
    let mut counts = [0usize; 64];
    for &v in x {
        // last bin is closed on the right
        let b = (0..bins).rev().find(|&b| v >= lo + b as f64 * width).unwrap_or(0);
        counts[b] += 1;
    }
    let entropy = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 / n)
        .map(|p| p * p.ln())
        .sum::<f64>();
    let mean_abs = x.iter().map(|v| v.abs()).sum::<f64>() / n;
    let peak = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    [
        rms,
        var,
        entropy,
        rms / mean_abs,
        peak / rms,
        moment(4) / (var * var) - 3.0,
        moment(3) / var.powf(1.5),
        lo,
        hi,
    ]
}

fn feats(x: Vec<f64>) -> Vec<f64> {
    statistical_features(&Window::new(x, Axis::Y, 0.0, 6400))
        .unwrap()
        .into_values()
}

fn feature_oracles() -> Verdict {
    let mut r = rng::stream(9, "acceptance", 0);
    let mut worst = [0.0f64; 9];
    let mut props_ok = true;
    let mut prop_fail = String::new();
    for trial in 0..1000 {
        let n = r.random_range(64..=6400);
        let x = random_signal(&mut r, n);
        let got = feats(x.clone());
        let want = oracle(&x);
        for i in 0..9 {
            // entropy counts are integers either way; compare with a floor for
            // near-zero standardized moments
            let e = (got[i] - want[i]).abs() / want[i].abs().max(1e-12);
            worst[i] = worst[i].max(e);
        }

        // power-of-two scaling is exact in floating point
        let a = 2f64.powi(r.random_range(-8..8));
        let s = feats(x.iter().map(|v| a * v).collect());
        let exact_scaled = [0, 1, 7, 8].iter().all(|&i| {
            let p = if i == 1 { 2 } else { 1 };
            s[i] == got[i] * a.powi(p)
        }) && [2, 3, 4, 5, 6].iter().all(|&i| s[i] == got[i]);
        // arbitrary positive scale, to rounding
        let b = r.random_range(0.01..100.0);
        let t = feats(x.iter().map(|v| b * v).collect());
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-9 * v.abs().max(1e-9);
        let scaled = close(t[0], b * got[0])
            && close(t[1], b * b * got[1])
            && close(t[1].sqrt(), b * got[1].sqrt())
            && close(t[7], b * got[7])
            && close(t[8], b * got[8])
            && (2..=6).all(|i| (t[i] - got[i]).abs() <= 1e-9 * got[i].abs().max(1.0));
        let m = feats(x.iter().map(|v| -v).collect());
        let negated = m[0] == got[0]
            && m[1] == got[1]
            && m[3] == got[3]
            && m[4] == got[4]
            && m[5] == got[5]
            && m[6] == -got[6]
            && m[7] == -got[8]
            && m[8] == -got[7]
            && (m[2] - got[2]).abs() <= 1e-12;
        if props_ok && !(exact_scaled && scaled && negated) {
            props_ok = false;
            prop_fail = format!(" (trial {trial}: exact scaling {exact_scaled}, scaling {scaled}, negation {negated})");
        }
    }
    let (wi, we) = worst
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
    verdict(
        we <= 1e-9 && props_ok,
        format!(
            "worst relative error {we:.3e} ({}); scale/sign properties hold: {props_ok}{prop_fail}",
            STATISTICAL_NAMES[wi]
        ),
    )
}

fn clouds(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "clouds", 0);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in [(0u8, 0.0), (1u8, 5.0)] {
        for _ in 0..n {
            rows.push(vec![
                center + r.random_range(-0.1..=0.1),
                center + r.random_range(-0.1..=0.1),
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

/// Three overlapping Gaussian classes in four dimensions, plus relabeled copies
/// of a few rows.
fn blobs(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "blobs", 0);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3u8 {
        for _ in 0..n {
            rows.push(
                (0..4)
                    .map(|j| if j == c as usize { 1.5 } else { 0.0 } + r.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
            labels.push(c);
        }
    }
    // conflicting duplicates leave some leaves impure
    for i in 0..n / 4 {
        rows.push(rows[i].clone());
        labels.push((labels[i] + 1) % 3);
    }
    let names = (0..4).map(|j| format!("f{j}")).collect();
    Dataset::from_rows(FeatureScheme::Statistical, names, None, rows, labels).unwrap()
}

fn accuracy(m: &ClassifierModel, ds: &Dataset) -> f64 {
    let ok = ds
        .rows()
        .iter()
        .zip(ds.labels())
        .filter(|(row, &l)| m.predict_row(row) == l)
        .count();
    ok as f64 / ds.len() as f64
}

/// Forest vote recomputed tree by tree: leaf class distributions are summed
/// and the largest total wins, lowest class on ties.
fn recount(f: &ForestModel, raw: &[f64]) -> u8 {
    let st = &f.header().standardizer;
    let x: Vec<f64> = raw
        .iter()
        .zip(st.means().iter().zip(st.stds()))
        .map(|(v, (m, s))| (v - m) / s)
        .collect();
    let mut votes = vec![0.0; f.header().n_classes];
    for t in &f.trees {
        let mut i = 0;
        let dist = loop {
            match &t.nodes[i] {
                Node::Leaf { distribution } => break distribution,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        };
        for (v, p) in votes.iter_mut().zip(dist) {
            *v += p;
        }
    }
    let mut best = 0;
    for c in 1..votes.len() {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    best as u8
}

/// Largest KKT gap over the pairwise machines, recomputed from the full set of
/// training rows rather than taken from the solver.
fn recomputed_gap(m: &SvmModel, train: &Dataset) -> f64 {
    let st = &m.header().standardizer;
    let x: Vec<Vec<f64>> = train.rows().iter().map(|r| st.transform_row(r)).collect();
    let mut worst = 0.0f64;
    for mach in &m.machines {
        let idx: Vec<usize> = (0..train.len())
            .filter(|&i| train.labels()[i] == mach.positive || train.labels()[i] == mach.negative)
            .collect();
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<f64> = idx
            .iter()
            .map(|&i| if train.labels()[i] == mach.positive { 1.0 } else { -1.0 })
            .collect();
        let mut alpha = vec![0.0; xs.len()];
        // duplicate rows may carry both labels, so match on the sign too
        for ((sv, a), s) in mach.support.iter().zip(&mach.alphas).zip(&mach.signs) {
            let t = (0..xs.len())
                .position(|t| &xs[t] == sv && ys[t] == *s && alpha[t] == 0.0)
                .expect("support vector is a training row");
            alpha[t] = *a;
        }
        worst = worst.max(kkt_gap(&xs, &ys, &alpha, m.c, m.gamma));
    }
    worst
}

fn classifier_sanity() -> Verdict {
    let toy = clouds(60, 10);
    let (train, val) = stratified_split(&toy, 0.25, 1).unwrap();
    let svm: ClassifierModel = train_svm(&train, &SvmParams::default()).unwrap().into();
    let tree: ClassifierModel = train_random_forest(
        &train,
        &ForestParams {
            n_trees: 1,
            max_features: Some(2),
            seed: 3,
        },
    )
    .unwrap()
    .into();
    let toy_acc = [
        accuracy(&svm, &train),
        accuracy(&svm, &val),
        accuracy(&tree, &train),
        accuracy(&tree, &val),
    ];
    let toy_ok = toy_acc.iter().all(|&a| a == 1.0);

    let noisy = blobs(120, 11);
    let forest = train_random_forest(&noisy, &ForestParams::default()).unwrap();
    let mut r = rng::stream(12, "acceptance", 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..4).map(|_| r.random_range(-4.0..5.5)).collect();
        if recount(&forest, &raw) != forest.predict_row(&raw) {
            mismatches += 1;
        }
    }

    let mut gap = 0.0f64;
    for ds in [&train, &noisy] {
        let m = train_svm(ds, &SvmParams::default()).unwrap();
        for mach in &m.machines {
            gap = gap.max(mach.kkt_gap);
        }
        gap = gap.max(recomputed_gap(&m, ds));
    }
    verdict(
        toy_ok && mismatches == 0 && gap <= 1e-3,
        format!(
            "toy accuracy svm {}/{} tree {}/{} (train/val); vote mismatches {mismatches}/1000; max KKT gap {gap:.2e}",
            toy_acc[0], toy_acc[1], toy_acc[2], toy_acc[3]
        ),
    )
}

fn pipeline_to_disk(cfg: &PipelineConfig, dir: &Path) {
    let recs = pipeline::cmd_simulate(cfg, &dir.join("rec")).unwrap();
    let csv = dir.join("dataset.csv");
    pipeline::cmd_featurize(&recs, cfg, &csv, false).unwrap();
    pipeline::cmd_train(&csv, cfg, &dir.join("model"), false).unwrap();
}

fn determinism() -> Verdict {
    let mut belt = PipelineConfig::defaults(Scenario::Belt);
    belt.seed = 21;
    let mut wear = PipelineConfig::defaults(Scenario::Wear);
    wear.seed = 22;
    wear.durations_s = vec![60.0];
    wear.early_span_s = 20.0;
    wear.late_span_s = 20.0;
    let mut stab = PipelineConfig::defaults(Scenario::Stability);
    stab.seed = 23;
    stab.durations_s = vec![20.0, 20.0];

    let mut compared = 0;
    let mut differing = Vec::new();
    for cfg in [belt, wear, stab] {
        let serial = tempfile::tempdir().unwrap();
        let parallel = tempfile::tempdir().unwrap();
        pool(1).install(|| pipeline_to_disk(&cfg, serial.path()));
        pool(4).install(|| pipeline_to_disk(&cfg, parallel.path()));
        for name in [
            "dataset.csv",
            "model/svm.model",
            "model/forest.model",
            "model/report.txt",
            "model/report.json",
        ] {
            compared += 1;
            let a = fs::read(serial.path().join(name)).unwrap();
            let b = fs::read(parallel.path().join(name)).unwrap();
            if a != b {
                differing.push(format!("{}:{name}", cfg.scenario));
            }
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{compared} artifacts compared, 1 thread vs 4 threads, {} differ{}",
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" ({})", differing.join(", "))
            }
        ),
    )
}

fn main() {
    let mut shape = Vec::new();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut check = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {n:>2} {name}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((n, name, v));
    };

    check(1, "wear suite", &mut || wear_default(&mut shape));
    check(2, "wear band importance", &mut wear_importance);
    check(3, "defect suite", &mut defect);
    check(4, "stability suite", &mut stability);
    check(5, "belt suite", &mut || belt(&mut shape));
    check(6, "wpd energy conservation", &mut wpd_energy);
    check(7, "wpd band mapping", &mut wpd_sweep);
    check(8, "cwt localization", &mut cwt_localization);
    check(9, "feature oracles", &mut feature_oracles);
    check(10, "classifier sanity", &mut classifier_sanity);
    check(11, "determinism", &mut determinism);
    let shape_ok = shape.len() == 2 && !shape.iter().any(|s| s == "FAIL");
    let shape_detail = shape.join("; ");
    check(12, "dataset shapes", &mut || verdict(shape_ok, shape_detail.clone()));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
