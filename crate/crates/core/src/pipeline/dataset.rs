//! Dataset CSV files.
//!
//! ```text
//! # scheme=statistical
//! # scenario=defect
//! # axis=y
//! # kurtosis=excess
//! # seed=7
//! # config_hash=0123456789abcdef
//! label,rms,variance,...
//! 0,1.25,1.5625,...
//! ```
//!
//! Only `scheme` is required; the kurtosis line appears for the statistical
//! scheme. Values are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::classify::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureScheme;
use crate::signal::{Axis, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: Dataset,
    pub axis: Option<Axis>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

pub fn write_dataset(file: &DatasetFile, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_to(file, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_to(file: &DatasetFile, w: &mut impl Write) -> std::io::Result<()> {
    let ds = &file.dataset;
    writeln!(w, "# scheme={}", ds.scheme())?;
    if let Some(s) = ds.scenario() {
        writeln!(w, "# scenario={s}")?;
    }
    if let Some(a) = file.axis {
        writeln!(w, "# axis={a}")?;
    }
    if ds.scheme() == FeatureScheme::Statistical {
        writeln!(w, "# kurtosis=excess")?;
    }
    if let Some(seed) = file.seed {
        writeln!(w, "# seed={seed}")?;
    }
    if let Some(h) = &file.config_hash {
        writeln!(w, "# config_hash={h}")?;
    }
    writeln!(w, "label,{}", ds.names().join(","))?;
    for (row, label) in ds.rows().iter().zip(ds.labels()) {
        write!(w, "{label}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let fmt_err = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut scheme = None;
    let mut scenario = None;
    let mut axis = None;
    let mut seed = None;
    let mut config_hash = None;
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(d) = line.strip_prefix('#') {
            if names.is_some() {
                return Err(fmt_err(lineno, "directive after the header row".into()));
            }
            let (k, v) = d
                .trim()
                .split_once('=')
                .ok_or_else(|| fmt_err(lineno, format!("bad directive '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let wrap = |e: Error| fmt_err(lineno, e.to_string());
            match k {
                "scheme" => scheme = Some(v.parse::<FeatureScheme>().map_err(wrap)?),
                "scenario" => scenario = Some(v.parse::<Scenario>().map_err(wrap)?),
                "axis" => axis = Some(v.parse::<Axis>().map_err(wrap)?),
                "kurtosis" if v == "excess" => {}
                "kurtosis" => return Err(fmt_err(lineno, format!("unsupported kurtosis convention '{v}'"))),
                "seed" => seed = Some(v.parse().map_err(|_| fmt_err(lineno, format!("bad seed '{v}'")))?),
                "config_hash" => config_hash = Some(v.to_string()),
                other => return Err(fmt_err(lineno, format!("unknown directive '{other}'"))),
            }
            continue;
        }
        match &names {
            None => {
                let mut cols = line.split(',').map(|c| c.trim().to_string());
                if cols.next().as_deref() != Some("label") {
                    return Err(fmt_err(lineno, "header must start with 'label'".into()));
                }
                let n: Vec<String> = cols.collect();
                if n.is_empty() {
                    return Err(fmt_err(lineno, "no feature columns".into()));
                }
                names = Some(n);
            }
            Some(n) => {
                let mut cols = line.split(',');
                let label_str = cols.next().unwrap_or("").trim();
                let label: u8 = label_str
                    .parse()
                    .map_err(|_| fmt_err(lineno, format!("bad label '{label_str}'")))?;
                let row: Vec<f64> = cols
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| fmt_err(lineno, format!("bad value '{}'", c.trim())))
                    })
                    .collect::<Result<_>>()?;
                if row.len() != n.len() {
                    return Err(fmt_err(
                        lineno,
                        format!("expected {} values, got {}", n.len(), row.len()),
                    ));
                }
                if let Some(s) = scenario {
                    if label >= s.class_count() {
                        return Err(fmt_err(lineno, format!("label {label} invalid for scenario {s}")));
                    }
                }
                rows.push(row);
                labels.push(label);
            }
        }
    }
    let scheme = scheme.ok_or_else(|| fmt_err(1, "missing '# scheme=' directive".into()))?;
    let names = names.ok_or_else(|| fmt_err(1, "missing header row".into()))?;
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: dataset has no rows",
            path.display()
        )));
    }
    Ok(DatasetFile {
        dataset: Dataset::from_rows(scheme, names, scenario, rows, labels)?,
        axis,
        seed,
        config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let ds = Dataset::from_rows(
            FeatureScheme::Statistical,
            vec!["rms".into(), "kurtosis".into()],
            Some(Scenario::Belt),
            vec![vec![0.1 + 0.2, -1.5], vec![1e-300, 2.0 / 3.0]],
            vec![0, 2],
        )
        .unwrap();
        let file = DatasetFile {
            dataset: ds,
            axis: Some(Axis::Z),
            seed: Some(11),
            config_hash: Some("00ff".into()),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_dataset(&file, &p).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), file);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("# kurtosis=excess\n"));
        assert!(text.contains("\nlabel,rms,kurtosis\n"));
    }

    #[test]
    fn malformed_files_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        for (text, line) in [
            ("# scheme=wpd_rms\nlabel,a\n0,1\n1,x\n", 4),
            ("# scheme=statistical\n# scenario=wear\nlabel,a\n2,1\n", 4),
            ("# scheme=statistical\nlabel,a\n0,1,2\n", 3),
            ("# scheme=bogus\nlabel,a\n", 1),
            ("# scheme=statistical\n# kurtosis=pearson\n", 2),
        ] {
            std::fs::write(&p, text).unwrap();
            match read_dataset(&p) {
                Err(Error::Format { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        std::fs::write(&p, "# scheme=statistical\nlabel,a\n").unwrap();
        assert!(read_dataset(&p).is_err());
    }
}
