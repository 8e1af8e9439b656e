//! Text formats read and written by the CLI.
//!
//! CSV files start with one `# key=value ...` metadata line, then a header
//! row. Numbers use SI base units; reals are written with `{:e}`, which is the
//! shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tdcim_core::allocation::{Report, WorkloadProfile};
use tdcim_core::array::OpReceipt;
use tdcim_core::bits::BitVector;
use tdcim_core::hdc::{FeatureVector, HdcModel, Hypervector, Label, Quantizer};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] tdcim_core::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

pub fn sci(x: f64) -> String {
    format!("{x:e}")
}

/// Flattens a JSON value into `key=value` pairs with dotted keys. Lists are
/// comma-joined; `null` becomes `none`.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(scalar).collect();
                out.push((prefix.to_string(), joined.join(",")));
            }
            other => out.push((prefix.to_string(), scalar(other))),
        }
    }
    fn scalar(v: &Value) -> String {
        match v {
            Value::Null => "none".into(),
            Value::String(s) => s.replace(char::is_whitespace, "_"),
            other => other.to_string(),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

/// `# k=v k=v ...` built from any serializable value plus extra pairs.
pub fn metadata_line<T: Serialize>(meta: &T, extra: &[(&str, String)]) -> String {
    let value = serde_json::to_value(meta).expect("config serializes");
    let mut line = String::from("#");
    for (k, v) in flatten(&value).iter().map(|(k, v)| (k.as_str(), v.as_str())).chain(extra.iter().map(|(k, v)| (*k, v.as_str()))) {
        let _ = write!(line, " {k}={v}");
    }
    line
}

/// CSV table buffered in memory.
pub struct Table {
    meta: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(meta: String, header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { meta, writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let body = String::from_utf8(self.writer.into_inner().expect("in-memory flush")).expect("utf-8 fields");
        format!("{}\n{}", self.meta, body)
    }

    pub fn save(self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.finish())
    }
}

/// Array image: a `rows cols` header, then one line of `0`/`1` per row.
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_array_image(text: &str) -> Result<Vec<BitVector>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing `rows cols` header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(hl, format!("bad dimension `{t}`"))))
        .collect::<Result<_, _>>()?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(hl, "header must be `rows cols`"));
    };
    let mut out = Vec::with_capacity(rows);
    for (ln, l) in lines {
        let bits = BitVector::parse(l).map_err(|_| parse_err(ln, "row must contain only 0 and 1"))?;
        if bits.len() != cols {
            return Err(parse_err(ln, format!("expected {cols} bits, found {}", bits.len())));
        }
        out.push(bits);
    }
    if out.len() != rows {
        return Err(parse_err(hl, format!("header declares {rows} rows, found {}", out.len())));
    }
    Ok(out)
}

pub fn format_array_image(rows: &[BitVector]) -> String {
    let cols = rows.first().map_or(0, BitVector::len);
    let mut s = format!("{} {}\n", rows.len(), cols);
    for r in rows {
        let _ = writeln!(s, "{r}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiptJson {
    pub op: String,
    pub counts: Vec<u32>,
    pub t_rise_s: Vec<f64>,
    pub t_fall_s: Vec<f64>,
    pub energy_j: f64,
    pub latency_s: f64,
    pub best_match: Option<usize>,
}

impl ReceiptJson {
    pub fn new(op: &str, r: &OpReceipt) -> Self {
        Self {
            op: op.into(),
            counts: r.counts.clone(),
            t_rise_s: r.delays.iter().map(|d| d.t_rise).collect(),
            t_fall_s: r.delays.iter().map(|d| d.t_fall).collect(),
            energy_j: r.energy,
            latency_s: r.latency,
            best_match: r.best_match,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Dataset CSV: a header row, real-valued feature columns, then an integer
/// label in the last column.
pub fn parse_dataset(text: &str) -> Result<Vec<(FeatureVector, Label)>, FormatError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(parse_err(1, "need at least one feature column and a label column"));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let mut features = Vec::with_capacity(width - 1);
        for f in rec.iter().take(width - 1) {
            let v: f64 = f.parse().map_err(|_| parse_err(line, format!("bad feature `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, "features must be finite"));
            }
            features.push(v);
        }
        let l = &rec[width - 1];
        let label: Label = l.parse().map_err(|_| parse_err(line, format!("bad label `{l}`")))?;
        out.push((FeatureVector(features), label));
    }
    Ok(out)
}

pub fn format_dataset(data: &[(FeatureVector, Label)]) -> String {
    let n = data.first().map_or(0, |(f, _)| f.len());
    let mut header: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    let mut t = Table::new(String::new(), &header.iter().map(String::as_str).collect::<Vec<_>>());
    for (f, l) in data {
        t.row(f.0.iter().map(|v| sci(*v)).chain(std::iter::once(l.to_string())));
    }
    // No metadata line for datasets: the header is the first line.
    t.finish().trim_start_matches('\n').to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassJson {
    pub label: Label,
    pub bits: String,
}

/// Trained model. The quantizer ranges travel with the model so inference
/// scales features exactly as training did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub quant_bits: u32,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub classes: Vec<ClassJson>,
}

impl ModelJson {
    pub fn from_model(model: &HdcModel) -> Result<Self, FormatError> {
        let q = model.quantizer().ok_or(tdcim_core::Error::Untrained)?;
        let classes = model
            .classes()
            .iter()
            .map(|c| {
                let hv = c.hypervector().ok_or(tdcim_core::Error::Untrained)?;
                Ok(ClassJson { label: c.label, bits: hv.0.to_string() })
            })
            .collect::<Result<_, tdcim_core::Error>>()?;
        Ok(Self {
            seed: model.base().seed(),
            n: model.n_features(),
            d: model.dim(),
            quant_bits: model.quant_bits(),
            feature_min: q.min().to_vec(),
            feature_max: q.max().to_vec(),
            classes,
        })
    }

    pub fn into_model(self) -> Result<HdcModel, FormatError> {
        let quantizer = Quantizer::from_ranges(self.quant_bits, self.feature_min, self.feature_max)?;
        let mut classes = Vec::with_capacity(self.classes.len());
        for c in self.classes {
            let bits = BitVector::parse(&c.bits).map_err(|_| parse_err(0, format!("class {} bits must be 0/1", c.label)))?;
            if bits.len() != self.d {
                return Err(tdcim_core::Error::LengthMismatch { expected: self.d, found: bits.len() }.into());
            }
            classes.push((c.label, Hypervector(bits)));
        }
        Ok(HdcModel::from_trained(self.n, self.seed, quantizer, classes)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyJson {
    pub mac: f64,
    pub cam: f64,
    pub write: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyJson {
    pub mac: f64,
    pub cam: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpsJson {
    pub mac: u64,
    pub cam: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentJson {
    pub energy: EnergyJson,
    pub latency: LatencyJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub task: String,
    pub tiles_mac: usize,
    pub tiles_cam: usize,
    pub ops: OpsJson,
    pub energy_j: EnergyJson,
    pub latency_s: LatencyJson,
    pub percentages: PercentJson,
}

impl ReportJson {
    pub fn new(task: &str, profile: &WorkloadProfile, r: &Report) -> Self {
        let p = &r.percentages;
        Self {
            task: task.into(),
            tiles_mac: r.tiles_mac,
            tiles_cam: r.tiles_cam,
            ops: OpsJson { mac: profile.mac.ops, cam: profile.cam.ops },
            energy_j: EnergyJson { mac: r.energy.mac, cam: r.energy.cam, write: r.energy.write },
            latency_s: LatencyJson { mac: r.latency.mac, cam: r.latency.cam },
            percentages: PercentJson {
                energy: EnergyJson { mac: p.energy_mac, cam: p.energy_cam, write: p.energy_write },
                latency: LatencyJson { mac: p.latency_mac, cam: p.latency_cam },
            },
        }
    }

    /// Long-form rows for stacked-bar plots.
    pub fn breakdown_csv(&self, meta: String) -> String {
        let mut t = Table::new(meta, &["task", "metric", "phase", "value", "percent"]);
        let e = (&self.energy_j, &self.percentages.energy);
        let l = (&self.latency_s, &self.percentages.latency);
        let rows = [
            ("energy_j", "mac", e.0.mac, e.1.mac),
            ("energy_j", "cam", e.0.cam, e.1.cam),
            ("energy_j", "write", e.0.write, e.1.write),
            ("latency_s", "mac", l.0.mac, l.1.mac),
            ("latency_s", "cam", l.0.cam, l.1.cam),
        ];
        for (metric, phase, v, pct) in rows {
            t.row([self.task.clone(), metric.into(), phase.into(), sci(v), sci(pct)]);
        }
        t.finish()
    }
}
