//! Trained models and their text file format.
//!
//! ```text
//! SEAMSENTINEL-MODEL v1
//! kind=svm|forest
//! scheme=wpd_rms|statistical
//! scenario=<name>|none
//! config_hash=<hex>|none
//! seed=<u64>|none
//! features=<name>,<name>,...
//! n_classes=<int>
//! standardizer.mean=<f64>,...
//! standardizer.std=<f64>,...
//! <payload>
//! end
//! ```
//!
//! Reals are written in their shortest round-trip form, so a load/save cycle
//! reproduces the file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::classify::forest::{ForestModel, Node, Tree};
use crate::classify::svm::{BinarySvm, SvmModel};
use crate::classify::{check_schema, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::features::{FeatureScheme, FeatureVector};
use crate::signal::Scenario;

pub const MODEL_MAGIC: &str = "SEAMSENTINEL-MODEL v1";

/// Schema and preprocessing shared by both model kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub scheme: FeatureScheme,
    pub scenario: Option<Scenario>,
    pub names: Vec<String>,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub config_hash: Option<String>,
    /// Master seed of the run that trained the model.
    pub seed: Option<u64>,
}

impl ModelHeader {
    pub(crate) fn new(train: &Dataset, standardizer: Standardizer) -> Self {
        Self {
            scheme: train.scheme(),
            scenario: train.scenario(),
            names: train.names().to_vec(),
            n_classes: train.n_classes(),
            standardizer,
            config_hash: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Svm,
    Forest,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Forest => "forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel {
    Svm(SvmModel),
    Forest(ForestModel),
}

impl From<SvmModel> for ClassifierModel {
    fn from(m: SvmModel) -> Self {
        ClassifierModel::Svm(m)
    }
}

impl From<ForestModel> for ClassifierModel {
    fn from(m: ForestModel) -> Self {
        ClassifierModel::Forest(m)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl ClassifierModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ClassifierModel::Svm(_) => ModelKind::Svm,
            ClassifierModel::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn header(&self) -> &ModelHeader {
        match self {
            ClassifierModel::Svm(m) => &m.header,
            ClassifierModel::Forest(m) => &m.header,
        }
    }

    fn header_mut(&mut self) -> &mut ModelHeader {
        match self {
            ClassifierModel::Svm(m) => &mut m.header,
            ClassifierModel::Forest(m) => &mut m.header,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.header().names
    }

    /// Record which config and master seed produced the model.
    pub fn set_provenance(&mut self, config_hash: Option<String>, seed: Option<u64>) {
        let h = self.header_mut();
        h.config_hash = config_hash;
        h.seed = seed;
    }

    pub fn predict_row(&self, raw: &[f64]) -> u8 {
        match self {
            ClassifierModel::Svm(m) => m.predict_row(raw),
            ClassifierModel::Forest(m) => m.predict_row(raw),
        }
    }

    /// Class of a feature vector; its names must match the training schema.
    pub fn predict(&self, fv: &FeatureVector) -> Result<u8> {
        let h = self.header();
        check_schema(&h.names, fv.names())?;
        if fv.scheme() != h.scheme {
            return Err(Error::SchemaMismatch {
                missing: vec![format!("scheme {}", h.scheme)],
                extra: vec![format!("scheme {}", fv.scheme())],
            });
        }
        Ok(self.predict_row(fv.values()))
    }

    /// Kind plus the first 12 hex digits of the SHA-256 of the model text.
    pub fn model_id(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        format!("{}-{}", self.kind().name(), &hex::encode(digest)[..12])
    }

    pub fn to_text(&self) -> String {
        let h = self.header();
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC}");
        let _ = writeln!(s, "kind={}", self.kind().name());
        let _ = writeln!(s, "scheme={}", h.scheme);
        let _ = writeln!(s, "scenario={}", h.scenario.map_or("none", |s| s.name()));
        let _ = writeln!(s, "config_hash={}", h.config_hash.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "seed={}", h.seed.map_or("none".to_string(), |v| v.to_string()));
        let _ = writeln!(s, "features={}", h.names.join(","));
        let _ = writeln!(s, "n_classes={}", h.n_classes);
        let _ = writeln!(s, "standardizer.mean={}", join(h.standardizer.means()));
        let _ = writeln!(s, "standardizer.std={}", join(h.standardizer.stds()));
        match self {
            ClassifierModel::Svm(m) => {
                let _ = writeln!(s, "svm.c={:?}", m.c);
                let _ = writeln!(s, "svm.gamma={:?}", m.gamma);
                let _ = writeln!(s, "svm.machines={}", m.machines.len());
                for b in &m.machines {
                    let _ = writeln!(
                        s,
                        "machine {} {} bias={:?} kkt_gap={:?} iterations={} n_sv={}",
                        b.positive,
                        b.negative,
                        b.bias,
                        b.kkt_gap,
                        b.iterations,
                        b.support.len()
                    );
                    for ((sv, a), y) in b.support.iter().zip(&b.alphas).zip(&b.signs) {
                        let _ = writeln!(s, "sv {a:?} {} {}", *y as i8, join(sv));
                    }
                }
            }
            ClassifierModel::Forest(m) => {
                let _ = writeln!(s, "forest.seed={}", m.seed);
                let _ = writeln!(s, "forest.max_features={}", m.max_features);
                let _ = writeln!(s, "forest.importances={}", join(&m.importances));
                let _ = writeln!(s, "forest.trees={}", m.trees.len());
                for (i, t) in m.trees.iter().enumerate() {
                    let _ = writeln!(s, "tree {i} seed={} nodes={}", t.seed, t.nodes.len());
                    for n in &t.nodes {
                        match n {
                            Node::Leaf { distribution } => {
                                let _ = writeln!(s, "L {}", join(distribution));
                            }
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => {
                                let _ = writeln!(s, "S {feature} {threshold:?} {left} {right}");
                            }
                        }
                    }
                }
            }
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = Parser {
            lines: text.lines().enumerate(),
        };
        let magic = p.next_line()?;
        if magic != MODEL_MAGIC {
            if magic.starts_with("SEAMSENTINEL-MODEL ") {
                return Err(Error::Model(format!("unsupported model version '{magic}'")));
            }
            return Err(Error::Model("not a model file (bad magic line)".into()));
        }
        let kind = p.value("kind")?;
        let scheme: FeatureScheme = p.value("scheme")?.parse()?;
        let scenario = match p.value("scenario")? {
            "none" => None,
            s => Some(s.parse()?),
        };
        let config_hash = match p.value("config_hash")? {
            "none" => None,
            h => Some(h.to_string()),
        };
        let seed = match p.value("seed")? {
            "none" => None,
            v => Some(num(v)?),
        };
        let names: Vec<String> = p.value("features")?.split(',').map(str::to_string).collect();
        let n_classes: usize = p.parse("n_classes")?;
        let means = parse_reals(p.value("standardizer.mean")?)?;
        let stds = parse_reals(p.value("standardizer.std")?)?;
        let standardizer = Standardizer::from_parts(names.clone(), means, stds)?;
        let header = ModelHeader {
            scheme,
            scenario,
            names,
            n_classes,
            standardizer,
            config_hash,
            seed,
        };
        let d = header.names.len();

        let model = match kind {
            "svm" => {
                let c: f64 = p.parse("svm.c")?;
                let gamma: f64 = p.parse("svm.gamma")?;
                let count: usize = p.parse("svm.machines")?;
                let mut machines = Vec::with_capacity(count);
                for _ in 0..count {
                    let line = p.next_line()?;
                    let f: Vec<&str> = line.split_whitespace().collect();
                    if f.len() != 7 || f[0] != "machine" {
                        return Err(Error::Model(format!("expected machine line, got '{line}'")));
                    }
                    let kv = |s: &str, key: &str| -> Result<String> {
                        s.strip_prefix(key)
                            .and_then(|r| r.strip_prefix('='))
                            .map(str::to_string)
                            .ok_or_else(|| Error::Model(format!("expected {key}= in '{line}'")))
                    };
                    let positive: u8 = num(f[1])?;
                    let negative: u8 = num(f[2])?;
                    let bias: f64 = num(&kv(f[3], "bias")?)?;
                    let kkt_gap: f64 = num(&kv(f[4], "kkt_gap")?)?;
                    let iterations: usize = num(&kv(f[5], "iterations")?)?;
                    let n_sv: usize = num(&kv(f[6], "n_sv")?)?;
                    let mut b = BinarySvm {
                        positive,
                        negative,
                        support: Vec::with_capacity(n_sv),
                        alphas: Vec::with_capacity(n_sv),
                        signs: Vec::with_capacity(n_sv),
                        bias,
                        kkt_gap,
                        iterations,
                    };
                    for _ in 0..n_sv {
                        let line = p.next_line()?;
                        let f: Vec<&str> = line.split_whitespace().collect();
                        if f.len() != 4 || f[0] != "sv" {
                            return Err(Error::Model(format!("expected sv line, got '{line}'")));
                        }
                        let alpha: f64 = num(f[1])?;
                        if !(alpha >= 0.0 && alpha <= c) {
                            return Err(Error::Model(format!("dual coefficient {alpha} outside [0, {c}]")));
                        }
                        let sign: i8 = num(f[2])?;
                        let sv = parse_reals(f[3])?;
                        if sv.len() != d || sign.abs() != 1 {
                            return Err(Error::Model(format!("malformed support vector '{line}'")));
                        }
                        b.alphas.push(alpha);
                        b.signs.push(sign as f64);
                        b.support.push(sv);
                    }
                    machines.push(b);
                }
                ClassifierModel::Svm(SvmModel {
                    header,
                    c,
                    gamma,
                    machines,
                })
            }
            "forest" => {
                let seed: u64 = p.parse("forest.seed")?;
                let max_features: usize = p.parse("forest.max_features")?;
                let importances = parse_reals(p.value("forest.importances")?)?;
                let count: usize = p.parse("forest.trees")?;
                let mut trees = Vec::with_capacity(count);
                for _ in 0..count {
                    let line = p.next_line()?;
                    let f: Vec<&str> = line.split_whitespace().collect();
                    if f.len() != 4 || f[0] != "tree" {
                        return Err(Error::Model(format!("expected tree line, got '{line}'")));
                    }
                    let tseed: u64 = num(f[2].trim_start_matches("seed="))?;
                    let n_nodes: usize = num(f[3].trim_start_matches("nodes="))?;
                    let mut nodes = Vec::with_capacity(n_nodes);
                    for _ in 0..n_nodes {
                        let line = p.next_line()?;
                        let f: Vec<&str> = line.split_whitespace().collect();
                        let node = match f.as_slice() {
                            ["L", dist] => Node::Leaf {
                                distribution: parse_reals(dist)?,
                            },
                            ["S", feat, thr, l, r] => {
                                let feature: usize = num(feat)?;
                                let (left, right): (usize, usize) = (num(l)?, num(r)?);
                                if feature >= d || left >= n_nodes || right >= n_nodes {
                                    return Err(Error::Model(format!("split out of range '{line}'")));
                                }
                                Node::Split {
                                    feature,
                                    threshold: num(thr)?,
                                    left,
                                    right,
                                }
                            }
                            _ => return Err(Error::Model(format!("malformed node '{line}'"))),
                        };
                        nodes.push(node);
                    }
                    trees.push(Tree { seed: tseed, nodes });
                }
                ClassifierModel::Forest(ForestModel {
                    header,
                    seed,
                    max_features,
                    trees,
                    importances,
                })
            }
            other => return Err(Error::Model(format!("unknown model kind '{other}'"))),
        };
        if p.next_line()? != "end" {
            return Err(Error::Model("missing 'end' line".into()));
        }
        Ok(model)
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Model(format!("bad number '{s}'")))
}

fn parse_reals(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(num).collect()
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Parser<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        self.lines
            .next()
            .map(|(_, l)| l.trim_end_matches('\r'))
            .ok_or_else(|| Error::Model("unexpected end of file".into()))
    }

    fn value(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| Error::Model(format!("expected '{key}=', got '{line}'")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        num(self.value(key)?)
    }
}
