//! Triaxial recordings, the recording CSV format, windowing and time-based
//! labeling.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sensor axis. Z is the rotation axis of the drive train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidArgument(format!("unknown axis '{other}'"))),
        }
    }
}

/// Monitored condition family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Wear,
    BladeDefect,
    Stability,
    Belt,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Wear,
        Scenario::BladeDefect,
        Scenario::Stability,
        Scenario::Belt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Wear => "wear",
            Scenario::BladeDefect => "defect",
            Scenario::Stability => "stability",
            Scenario::Belt => "belt",
        }
    }

    pub fn class_count(self) -> u8 {
        match self {
            Scenario::Wear | Scenario::Stability => 2,
            Scenario::BladeDefect | Scenario::Belt => 3,
        }
    }

    pub fn class_name(self, class_id: u8) -> Option<&'static str> {
        let names: &[&str] = match self {
            Scenario::Wear => &["fresh", "worn"],
            Scenario::BladeDefect => &["normal", "two-worn", "six-worn"],
            Scenario::Stability => &["stable", "unstable"],
            Scenario::Belt => &["fixed", "partly-loose", "extremely-loose"],
        };
        names.get(class_id as usize).copied()
    }

    /// Axis analysed by default: Y for the cutting scenarios, Z for the belt.
    pub fn default_axis(self) -> Axis {
        match self {
            Scenario::Belt => Axis::Z,
            _ => Axis::Y,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wear" => Ok(Scenario::Wear),
            "defect" | "blade_defect" | "bladedefect" | "blade-defect" => Ok(Scenario::BladeDefect),
            "stability" => Ok(Scenario::Stability),
            "belt" => Ok(Scenario::Belt),
            other => Err(Error::InvalidArgument(format!("unknown scenario '{other}'"))),
        }
    }
}

/// A scenario together with a class valid for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionLabel {
    scenario: Scenario,
    class_id: u8,
}

impl ConditionLabel {
    pub fn new(scenario: Scenario, class_id: u8) -> Result<Self> {
        if class_id >= scenario.class_count() {
            return Err(Error::InvalidArgument(format!(
                "class {class_id} is not valid for scenario {scenario} ({} classes)",
                scenario.class_count()
            )));
        }
        Ok(Self { scenario, class_id })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn class_id(&self) -> u8 {
        self.class_id
    }
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.scenario.class_name(self.class_id).unwrap_or("?");
        write!(f, "{}:{}({})", self.scenario, self.class_id, name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineSettings {
    pub rpm: f64,
    pub feed_mm_per_min: f64,
    pub cut_depth_mm: f64,
    pub blade_count: u32,
    /// Spindle running without cutting; no blade impacts are generated.
    pub idle: bool,
}

impl MachineSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rpm >= 0.0) || !self.rpm.is_finite() {
            return Err(Error::InvalidArgument(format!("rpm must be >= 0, got {}", self.rpm)));
        }
        if self.blade_count == 0 {
            return Err(Error::InvalidArgument("blade_count must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for MachineSettings {
    fn default() -> Self {
        Self {
            rpm: 0.0,
            feed_mm_per_min: 0.0,
            cut_depth_mm: 0.0,
            blade_count: 32,
            idle: false,
        }
    }
}

/// Three equal-length acceleration channels sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelerationRecording {
    sample_rate_hz: u32,
    axes: [Vec<f64>; 3],
    pub meta: MachineSettings,
    pub condition: Option<ConditionLabel>,
    /// Scenario of the recording; may be known without a class (the wear
    /// trial is labeled by time afterwards).
    pub scenario: Option<Scenario>,
    /// Seed of the generator that produced this recording, if simulated.
    pub seed: Option<u64>,
    /// Hash of the pipeline config that produced this recording.
    pub config_hash: Option<String>,
}

impl AccelerationRecording {
    pub fn new(sample_rate_hz: u32, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, meta: MachineSettings) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample_rate_hz must be > 0".into()));
        }
        if x.is_empty() || x.len() != y.len() || x.len() != z.len() {
            return Err(Error::InvalidArgument(format!(
                "axes must be non-empty and equal length (x={}, y={}, z={})",
                x.len(),
                y.len(),
                z.len()
            )));
        }
        meta.validate()?;
        Ok(Self {
            sample_rate_hz,
            axes: [x, y, z],
            meta,
            condition: None,
            scenario: None,
            seed: None,
            config_hash: None,
        })
    }

    pub fn with_condition(mut self, label: ConditionLabel) -> Self {
        self.condition = Some(label);
        self.scenario = Some(label.scenario());
        self
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        &self.axes[axis as usize]
    }
}

/// A fixed-length single-axis slice of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<f64>,
    pub axis: Axis,
    pub source_offset_s: f64,
    pub sample_rate_hz: u32,
}

impl Window {
    pub fn new(samples: Vec<f64>, axis: Axis, source_offset_s: f64, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            axis,
            source_offset_s,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub window: Window,
    pub label: ConditionLabel,
}

fn parse_directive(line: &str) -> Option<(&str, &str)> {
    let body = line.strip_prefix('#')?.trim();
    let (k, v) = body.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Directives of a recording file, without the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingHeader {
    pub sample_rate_hz: u32,
    pub meta: MachineSettings,
    pub scenario: Option<Scenario>,
    pub condition: Option<ConditionLabel>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

/// Read only the directive lines of a recording file.
pub fn read_recording_header(path: &Path) -> Result<RecordingHeader> {
    read_impl(path, true).map(|(h, _)| h)
}

/// Read a recording from the CSV format written by [`save_recording`].
pub fn load_recording(path: &Path) -> Result<AccelerationRecording> {
    let (h, [x, y, z]) = read_impl(path, false)?;
    if x.is_empty() {
        return Err(Error::EmptyRecording(path.to_path_buf()));
    }
    let mut rec = AccelerationRecording::new(h.sample_rate_hz, x, y, z, h.meta).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: 1,
        msg: e.to_string(),
    })?;
    rec.condition = h.condition;
    rec.scenario = h.scenario;
    rec.seed = h.seed;
    rec.config_hash = h.config_hash;
    Ok(rec)
}

fn read_impl(path: &Path, header_only: bool) -> Result<(RecordingHeader, [Vec<f64>; 3])> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let fmt_err = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut sample_rate: Option<u32> = None;
    let mut meta = MachineSettings::default();
    let mut scenario: Option<Scenario> = None;
    let mut class_id: Option<u8> = None;
    let mut seed = None;
    let mut config_hash = None;
    let mut seen_header = false;
    let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');

        if lineno == 1 {
            match parse_directive(line) {
                Some(("sample_rate_hz", v)) => {
                    let sr: u32 = v
                        .parse()
                        .map_err(|_| fmt_err(lineno, format!("bad sample rate '{v}'")))?;
                    if sr == 0 {
                        return Err(fmt_err(lineno, "sample rate must be > 0".into()));
                    }
                    sample_rate = Some(sr);
                    continue;
                }
                _ => return Err(fmt_err(lineno, "first line must be '# sample_rate_hz=<int>'".into())),
            }
        }

        if !seen_header {
            if line.starts_with('#') {
                let (k, v) =
                    parse_directive(line).ok_or_else(|| fmt_err(lineno, format!("malformed directive '{line}'")))?;
                let bad = |what: &str| fmt_err(lineno, format!("bad {what} '{v}'"));
                match k {
                    "rpm" => meta.rpm = v.parse().map_err(|_| bad("rpm"))?,
                    "feed_mm_per_min" => meta.feed_mm_per_min = v.parse().map_err(|_| bad("feed"))?,
                    "cut_depth_mm" => meta.cut_depth_mm = v.parse().map_err(|_| bad("cut depth"))?,
                    "blade_count" => meta.blade_count = v.parse().map_err(|_| bad("blade count"))?,
                    "idle" => {
                        meta.idle = match v {
                            "0" => false,
                            "1" => true,
                            _ => return Err(bad("idle flag")),
                        }
                    }
                    "scenario" => scenario = Some(v.parse().map_err(|_| bad("scenario"))?),
                    "class_id" => class_id = Some(v.parse().map_err(|_| bad("class id"))?),
                    "seed" => seed = Some(v.parse().map_err(|_| bad("seed"))?),
                    "config_hash" => config_hash = Some(v.to_string()),
                    other => return Err(fmt_err(lineno, format!("unknown directive '{other}'"))),
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["x", "y", "z"] {
                return Err(fmt_err(lineno, format!("expected header 'x,y,z', got '{line}'")));
            }
            seen_header = true;
            if header_only {
                break;
            }
            continue;
        }

        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let mut vals = [0.0f64; 3];
        for (i, v) in vals.iter_mut().enumerate() {
            let cell = cells
                .next()
                .ok_or_else(|| fmt_err(lineno, format!("expected 3 values, got {i}")))?;
            *v = cell
                .trim()
                .parse()
                .map_err(|_| fmt_err(lineno, format!("non-numeric cell '{}'", cell.trim())))?;
        }
        if cells.next().is_some() {
            return Err(fmt_err(lineno, "expected 3 values, got more".into()));
        }
        x.push(vals[0]);
        y.push(vals[1]);
        z.push(vals[2]);
    }

    let Some(sample_rate) = sample_rate else {
        return Err(fmt_err(1, "missing '# sample_rate_hz=<int>' directive".into()));
    };
    if !seen_header {
        return Err(fmt_err(1, "missing 'x,y,z' header row".into()));
    }
    let condition = match (scenario, class_id) {
        (Some(s), Some(c)) => Some(ConditionLabel::new(s, c).map_err(|e| fmt_err(1, e.to_string()))?),
        (None, Some(_)) => return Err(fmt_err(1, "class_id given without scenario".into())),
        _ => None,
    };
    let header = RecordingHeader {
        sample_rate_hz: sample_rate,
        meta,
        scenario,
        condition,
        seed,
        config_hash,
    };
    Ok((header, [x, y, z]))
}

/// Write `rec` in the recording CSV format. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn save_recording(rec: &AccelerationRecording, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_recording(rec, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_recording(rec: &AccelerationRecording, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# sample_rate_hz={}", rec.sample_rate_hz)?;
    writeln!(w, "# rpm={}", rec.meta.rpm)?;
    writeln!(w, "# feed_mm_per_min={}", rec.meta.feed_mm_per_min)?;
    writeln!(w, "# cut_depth_mm={}", rec.meta.cut_depth_mm)?;
    writeln!(w, "# blade_count={}", rec.meta.blade_count)?;
    writeln!(w, "# idle={}", rec.meta.idle as u8)?;
    if let Some(s) = rec.scenario.or(rec.condition.map(|c| c.scenario())) {
        writeln!(w, "# scenario={s}")?;
    }
    if let Some(c) = rec.condition {
        writeln!(w, "# class_id={}", c.class_id())?;
    }
    if let Some(seed) = rec.seed {
        writeln!(w, "# seed={seed}")?;
    }
    if let Some(h) = &rec.config_hash {
        writeln!(w, "# config_hash={h}")?;
    }
    writeln!(w, "x,y,z")?;
    let [x, y, z] = &rec.axes;
    for i in 0..x.len() {
        writeln!(w, "{},{},{}", x[i], y[i], z[i])?;
    }
    Ok(())
}

fn samples_per_window(sample_rate_hz: u32, window_seconds: f64) -> Result<usize> {
    let exact = window_seconds * sample_rate_hz as f64;
    let rounded = exact.round();
    if !(window_seconds > 0.0) || (exact - rounded).abs() > 1e-9 * exact.max(1.0) || rounded < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "window of {window_seconds} s at {sample_rate_hz} Hz is not a whole number of samples"
        )));
    }
    Ok(rounded as usize)
}

/// Cut one axis into consecutive non-overlapping windows. A trailing partial
/// window is dropped.
pub fn segment_windows(rec: &AccelerationRecording, axis: Axis, window_seconds: f64) -> Result<Vec<Window>> {
    let len = samples_per_window(rec.sample_rate_hz, window_seconds)?;
    let fs = rec.sample_rate_hz as f64;
    Ok(rec
        .axis(axis)
        .chunks_exact(len)
        .enumerate()
        .map(|(i, chunk)| Window::new(chunk.to_vec(), axis, (i * len) as f64 / fs, rec.sample_rate_hz))
        .collect())
}

/// Label windows lying entirely inside the first `early_span_s` seconds with
/// `early_label` and those entirely inside the last `late_span_s` seconds with
/// `late_label`; everything in between is dropped. The trial length is taken
/// as the end of the last window.
pub fn label_windows_by_time(
    windows: &[Window],
    early_span_s: f64,
    late_span_s: f64,
    early_label: ConditionLabel,
    late_label: ConditionLabel,
) -> Result<Vec<LabeledWindow>> {
    if !(early_span_s >= 0.0) || !(late_span_s >= 0.0) {
        return Err(Error::InvalidArgument("label spans must be >= 0".into()));
    }
    let total_s = windows
        .iter()
        .map(|w| w.source_offset_s + w.duration_s())
        .fold(0.0, f64::max);
    const EPS: f64 = 1e-9;
    if early_span_s + late_span_s > total_s + EPS {
        return Err(Error::AmbiguousLabeling {
            early_s: early_span_s,
            late_s: late_span_s,
            total_s,
        });
    }
    let late_start = total_s - late_span_s;
    let mut out = Vec::new();
    for w in windows {
        let start = w.source_offset_s;
        let end = start + w.duration_s();
        let label = if early_span_s > 0.0 && end <= early_span_s + EPS {
            early_label
        } else if late_span_s > 0.0 && start >= late_start - EPS {
            late_label
        } else {
            continue;
        };
        out.push(LabeledWindow {
            window: w.clone(),
            label,
        });
    }
    Ok(out)
}

/// Attach the same label to every window.
pub fn label_all(windows: Vec<Window>, label: ConditionLabel) -> Vec<LabeledWindow> {
    windows
        .into_iter()
        .map(|window| LabeledWindow { window, label })
        .collect()
}
