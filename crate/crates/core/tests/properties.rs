use std::f64::consts::PI;

use proptest::prelude::*;

use seamsentinel::classify::{
    fit_standardizer, stratified_split, train_random_forest, train_svm, ClassifierModel, Dataset, Evaluation,
    ForestParams, Node, SvmParams,
};
use seamsentinel::cwt::{cwt, frequency_to_scale, scale_to_frequency, WaveletSpec};
use seamsentinel::features::{statistical_features, FeatureScheme};
use seamsentinel::pipeline::{train_models, PipelineConfig};
use seamsentinel::signal::{segment_windows, AccelerationRecording, Axis, MachineSettings, Scenario, Window};
use seamsentinel::wpd::{decompose, wpd_features, WpdConfig};

fn idle() -> MachineSettings {
    MachineSettings {
        rpm: 0.0,
        feed_mm_per_min: 0.0,
        cut_depth_mm: 0.0,
        blade_count: 32,
        idle: true,
    }
}

fn samples(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

/// Non-constant windows; constant ones are rejected as degenerate.
fn live_samples(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    samples(len).prop_filter("needs spread", |x| {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-6 * hi.abs().max(lo.abs())
    })
}

fn window(x: Vec<f64>) -> Window {
    Window::new(x, Axis::Y, 0.0, 6400)
}

fn stats(x: Vec<f64>) -> Vec<f64> {
    statistical_features(&window(x)).unwrap().into_values()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segmentation_is_a_partition_prefix(
        x in samples(1..3000),
        samples_per_window in 1usize..700,
    ) {
        let fs = 640;
        let n = x.len();
        let rec = AccelerationRecording::new(fs, x.clone(), vec![0.0; n], vec![0.0; n], idle()).unwrap();
        let w = segment_windows(&rec, Axis::X, samples_per_window as f64 / fs as f64).unwrap();
        prop_assert_eq!(w.len(), n / samples_per_window);
        let joined: Vec<f64> = w.iter().flat_map(|w| w.samples.iter().copied()).collect();
        prop_assert_eq!(&joined[..], &x[..w.len() * samples_per_window]);
        for (i, win) in w.iter().enumerate() {
            prop_assert_eq!(win.source_offset_s, (i * samples_per_window) as f64 / fs as f64);
        }
    }

    #[test]
    fn wpd_conserves_energy(blocks in 8usize..200, seed in any::<u64>()) {
        let mut r = seamsentinel::rng::stream(seed, "prop", 0);
        let x: Vec<f64> = (0..blocks * 8).map(|_| rand::Rng::random_range(&mut r, -5.0..5.0)).collect();
        let cfg = WpdConfig::new(3, "db4").unwrap();
        let input: f64 = x.iter().map(|v| v * v).sum();
        let leaves: f64 = decompose(&x, 6400, &cfg).unwrap().energies().iter().sum();
        prop_assert!(close(leaves, input, 1e-6), "{} vs {}", leaves, input);
    }

    #[test]
    fn wpd_rms_is_homogeneous(x in samples(64..800), k in -6i32..6, a in 0.01..100.0f64) {
        let cfg = WpdConfig::new(3, "db4").unwrap();
        let base = wpd_features(&window(x.clone()), &cfg).unwrap().into_values();
        // powers of two scale every intermediate exactly
        let p = 2f64.powi(k);
        let exact = wpd_features(&window(x.iter().map(|v| p * v).collect()), &cfg).unwrap().into_values();
        for (e, b) in exact.iter().zip(&base) {
            prop_assert_eq!(*e, p * b);
        }
        let scaled = wpd_features(&window(x.iter().map(|v| a * v).collect()), &cfg).unwrap().into_values();
        for (s, b) in scaled.iter().zip(&base) {
            prop_assert!(close(*s, a * b, 1e-12));
        }
    }

    // Daubechies-4 leaks into neighbouring leaves; over the central half of a
    // band the share stays above 0.6 (calibrated minimum 0.606, bands 3 and 4).
    #[test]
    fn sinusoid_inside_a_band_dominates_its_leaf(k in 0usize..8, pos in 0.25..0.75f64, phase in 0.0..(2.0 * PI)) {
        let f = (k as f64 + pos) * 400.0;
        let x: Vec<f64> = (0..6400).map(|i| (2.0 * PI * f * i as f64 / 6400.0 + phase).sin()).collect();
        let e = decompose(&x, 6400, &WpdConfig::new(3, "db4").unwrap()).unwrap().energies();
        let total: f64 = e.iter().sum();
        prop_assert!(e.iter().all(|&v| v <= e[k]));
        prop_assert!(e[k] / total >= 0.6, "{} Hz: leaf {} holds {:.3}", f, k, e[k] / total);
    }

    #[test]
    fn features_are_scale_equivariant(x in live_samples(16..600), k in -8i32..8, a in 0.01..100.0f64) {
        let base = stats(x.clone());
        let p = 2f64.powi(k);
        let exact = stats(x.iter().map(|v| p * v).collect());
        let expect = [p * base[0], p * p * base[1], base[2], base[3], base[4], base[5], base[6], p * base[7], p * base[8]];
        prop_assert_eq!(&exact[..], &expect[..]);

        let s = stats(x.iter().map(|v| a * v).collect());
        prop_assert!(close(s[0], a * base[0], 1e-12));
        prop_assert!(close(s[1].sqrt(), a * base[1].sqrt(), 1e-12));
        prop_assert!(close(s[7], a * base[7], 1e-12));
        prop_assert!(close(s[8], a * base[8], 1e-12));
        for i in 2..=6 {
            prop_assert!((s[i] - base[i]).abs() <= 1e-9 * base[i].abs().max(1.0), "feature {}", i);
        }
    }

    #[test]
    fn features_are_sign_symmetric(x in live_samples(16..600)) {
        let f = stats(x.clone());
        let g = stats(x.iter().map(|v| -v).collect());
        prop_assert_eq!(g[0], f[0]);
        prop_assert_eq!(g[1], f[1]);
        prop_assert_eq!(g[3], f[3]);
        prop_assert_eq!(g[4], f[4]);
        prop_assert_eq!(g[5], f[5]);
        prop_assert_eq!(g[6], -f[6]);
        prop_assert_eq!(g[7], -f[8]);
        prop_assert_eq!(g[8], -f[7]);
        prop_assert!((g[2] - f[2]).abs() <= 1e-12);
    }

    #[test]
    fn entropy_is_bounded(x in live_samples(2..2000)) {
        let h = stats(x)[2];
        prop_assert!((0.0..=64f64.ln() + 1e-12).contains(&h));
    }

    #[test]
    fn cwt_is_linear(x in samples(32..400), k in -6i32..6, a in -50.0..50.0f64) {
        let scales = [2.0, 5.5, 13.0];
        let base = cwt(&x, WaveletSpec::morlet(), &scales, 6400).unwrap();
        let p = -(2f64.powi(k));
        let exact = cwt(&x.iter().map(|v| p * v).collect::<Vec<_>>(), WaveletSpec::morlet(), &scales, 6400).unwrap();
        let scaled = cwt(&x.iter().map(|v| a * v).collect::<Vec<_>>(), WaveletSpec::morlet(), &scales, 6400).unwrap();
        for i in 0..scales.len() {
            for (t, &m) in base.row(i).iter().enumerate() {
                prop_assert_eq!(exact.row(i)[t], p.abs() * m);
                prop_assert!((scaled.row(i)[t] - a.abs() * m).abs() <= 1e-9 * (1.0 + a.abs() * m));
            }
        }
    }

    #[test]
    fn cwt_shift_moves_columns(x in samples(200..300), shift in 1usize..40) {
        // zero padding on both sides keeps the signal away from the edges
        let pad = 120;
        let scales = [1.5, 4.0];
        let place = |offset: usize| {
            let mut v = vec![0.0; pad + offset];
            v.extend(&x);
            v.resize(x.len() + 2 * pad + 40, 0.0);
            v
        };
        let a = cwt(&place(0), WaveletSpec::morlet(), &scales, 6400).unwrap();
        let b = cwt(&place(shift), WaveletSpec::morlet(), &scales, 6400).unwrap();
        for i in 0..scales.len() {
            for t in 0..a.n_samples() - shift {
                let (u, v) = (a.row(i)[t], b.row(i)[t + shift]);
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()), "row {} col {}: {} vs {}", i, t, u, v);
            }
        }
    }

    #[test]
    fn pseudo_frequency_round_trips(scale in 0.5..500.0f64, which in 0usize..3) {
        let w = [WaveletSpec::gaussian(), WaveletSpec::morlet(), WaveletSpec::shannon()][which];
        let f = scale_to_frequency(w, scale, 6400).unwrap();
        prop_assert!(close(frequency_to_scale(w, f, 6400).unwrap(), scale, 1e-12));
    }
}

#[test]
fn every_band_reaches_seventy_percent_somewhere() {
    let cfg = WpdConfig::new(3, "db4").unwrap();
    for k in 0..8 {
        let best = (1..40)
            .map(|i| {
                let f = (k as f64 + i as f64 / 40.0) * 400.0;
                let x: Vec<f64> = (0..6400).map(|n| (2.0 * PI * f * n as f64 / 6400.0).sin()).collect();
                let e = decompose(&x, 6400, &cfg).unwrap().energies();
                e[k] / e.iter().sum::<f64>()
            })
            .fold(0.0, f64::max);
        assert!(best >= 0.7, "band {k}: best share {best:.3}");
    }
}

/// Two to four classes of random rows in `d` dimensions.
fn dataset() -> impl Strategy<Value = Dataset> {
    (2usize..5, 1usize..5, 4usize..20, any::<u64>()).prop_map(|(classes, d, per_class, seed)| {
        let mut r = seamsentinel::rng::stream(seed, "prop", 1);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for _ in 0..per_class {
                rows.push(
                    (0..d)
                        .map(|j| c as f64 * (j as f64 + 1.0) + rand::Rng::random_range(&mut r, -2.0..2.0))
                        .collect(),
                );
                labels.push(c as u8);
            }
        }
        let names = (0..d).map(|j| format!("f{j}")).collect();
        Dataset::from_rows(FeatureScheme::Statistical, names, None, rows, labels).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn standardized_training_set_has_unit_moments(ds in dataset()) {
        let st = fit_standardizer(&ds).unwrap();
        let t = st.transform(&ds).unwrap();
        let n = t.len() as f64;
        for j in 0..t.n_features() {
            let mean = t.rows().iter().map(|r| r[j]).sum::<f64>() / n;
            let var = t.rows().iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((var - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn split_partitions_each_class(ds in dataset(), ratio in 0.05..0.95f64, seed in any::<u64>()) {
        let (train, val) = stratified_split(&ds, ratio, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), ds.len());
        for (c, n) in ds.class_counts() {
            let take = ((n as f64 * ratio).floor() as usize).max(1);
            prop_assert_eq!(val.class_counts()[&c], take);
            prop_assert_eq!(train.class_counts().get(&c).copied().unwrap_or(0), n - take);
        }
        let mut all: Vec<Vec<f64>> = train.rows().iter().chain(val.rows()).cloned().collect();
        let mut orig = ds.rows().to_vec();
        let key = |a: &Vec<f64>, b: &Vec<f64>| a.partial_cmp(b).unwrap();
        all.sort_by(key);
        orig.sort_by(key);
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn svm_duals_are_boxed(ds in dataset(), c in 0.1..10.0f64) {
        let params = SvmParams { c, ..SvmParams::default() };
        let m = train_svm(&ds, &params).unwrap();
        for mach in &m.machines {
            prop_assert!(mach.alphas.iter().all(|&a| a > 0.0 && a <= c));
            prop_assert!(mach.kkt_gap <= 1e-3);
        }
        prop_assert_eq!(train_svm(&ds, &params).unwrap(), m);
    }

    #[test]
    fn forest_is_well_formed(ds in dataset(), seed in any::<u64>()) {
        let f = train_random_forest(&ds, &ForestParams { n_trees: 10, max_features: None, seed }).unwrap();
        prop_assert!((f.importances.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for t in &f.trees {
            for node in &t.nodes {
                if let Node::Leaf { distribution } = node {
                    prop_assert_eq!(distribution.len(), ds.n_classes());
                    prop_assert!(distribution.iter().sum::<f64>() > 0.0);
                }
            }
        }
    }

    #[test]
    fn confusion_matrix_is_consistent(ds in dataset(), seed in any::<u64>()) {
        let m: ClassifierModel = train_random_forest(&ds, &ForestParams { n_trees: 3, max_features: None, seed })
            .unwrap()
            .into();
        let (_, val) = stratified_split(&ds, 0.3, seed).unwrap();
        let e = Evaluation::of(&m, &val).unwrap();
        let counts = val.class_counts();
        for (i, row) in e.confusion_matrix.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<usize>(), counts.get(&(i as u8)).copied().unwrap_or(0));
        }
        let trace: usize = (0..e.confusion_matrix.len()).map(|i| e.confusion_matrix[i][i]).sum();
        prop_assert_eq!(e.correct, trace);
        prop_assert_eq!(e.total, val.len());
        prop_assert_eq!(e.accuracy, trace as f64 / val.len() as f64);
    }

    #[test]
    fn validation_rows_never_reach_the_standardizer(ds in dataset(), seed in any::<u64>()) {
        let mut cfg = PipelineConfig::defaults(Scenario::BladeDefect);
        cfg.seed = seed;
        cfg.forest_trees = 2;
        let (_, val) = stratified_split(&ds, cfg.validation_ratio, cfg.split_seed()).unwrap();
        // scramble the feature values of validation rows only
        let rows: Vec<Vec<f64>> = ds
            .rows()
            .iter()
            .map(|r| {
                if val.rows().contains(r) {
                    r.iter().map(|v| v * 7.0 + 100.0).collect()
                } else {
                    r.clone()
                }
            })
            .collect();
        let scrambled =
            Dataset::from_rows(ds.scheme(), ds.names().to_vec(), None, rows, ds.labels().to_vec()).unwrap();
        let (a, _) = train_models(&ds, &cfg).unwrap();
        let (b, _) = train_models(&scrambled, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.header().standardizer, &y.header().standardizer);
        }
    }
}
