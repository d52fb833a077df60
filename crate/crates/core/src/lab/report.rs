//! Tables, verdicts and their CSV / JSON emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::linalg::C64;

/// Shortest round-trip decimal; exponent form for very small or large magnitudes.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

/// `re+imj`.
pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", format_float(z.re), sign, format_float(z.im.abs()))
}

mod float_repr {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&format_float(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a float: {other}"))),
            },
        }
    }

    pub mod pair {
        use super::*;

        pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
            #[derive(Serialize)]
            struct P(#[serde(with = "super")] f64, #[serde(with = "super")] f64);
            P(z.re, z.im).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
            #[derive(Deserialize)]
            struct P(#[serde(with = "super")] f64, #[serde(with = "super")] f64);
            let P(re, im) = P::deserialize(d)?;
            Ok(C64::new(re, im))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Int(i64),
    Float(#[serde(with = "float_repr")] f64),
    Complex(#[serde(with = "float_repr::pair")] C64),
    Text(String),
    Bool(bool),
}

impl Value {
    pub fn to_csv(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(x) => format_float(*x),
            Value::Complex(z) => format_complex(*z),
            Value::Text(t) => csv_escape(t),
            Value::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<C64> for Value {
    fn from(z: C64) -> Self {
        Value::Complex(z)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<i32> for Value {
    fn from(i: i32) -> Self {
        Value::Int(i as i64)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Value::to_csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// A checked quantity against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    #[serde(with = "float_repr")]
    pub value: f64,
    #[serde(with = "float_repr")]
    pub threshold: f64,
    /// `le`: pass when `value ≤ threshold`; `ge`: pass when `value ≥ threshold`.
    pub relation: String,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), value, threshold, relation: "le".into(), pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), value, threshold, relation: "ge".into(), pass: value >= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub experiment: String,
    pub config_echo: BTreeMap<String, String>,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
    pub versions: BTreeMap<String, String>,
    /// Wall-clock seconds per stage; kept out of the CSV tables.
    #[serde(default)]
    pub runtimes: BTreeMap<String, f64>,
}

impl ReportBundle {
    pub fn new(experiment: &str, config_echo: BTreeMap<String, String>) -> Self {
        let versions = [
            ("phaselab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("report_format".to_string(), "1".to_string()),
        ]
        .into_iter()
        .collect();
        Self {
            experiment: experiment.to_string(),
            config_echo,
            tables: Vec::new(),
            verdicts: Vec::new(),
            versions,
            runtimes: BTreeMap::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn verdict_table(&self) -> Table {
        let mut t = Table::new("verdicts", &["name", "value", "threshold", "relation", "pass"]);
        for v in &self.verdicts {
            t.push(vec![
                v.name.as_str().into(),
                v.value.into(),
                v.threshold.into(),
                v.relation.as_str().into(),
                v.pass.into(),
            ]);
        }
        t
    }

    /// CSV documents keyed by file suffix: the first table under `""`, the
    /// others under `-<name>`, the verdicts under `-verdicts`.
    pub fn csv_documents(&self) -> Vec<(String, String)> {
        let mut docs = Vec::new();
        for (i, t) in self.tables.iter().enumerate() {
            let suffix = if i == 0 { String::new() } else { format!("-{}", t.name) };
            docs.push((suffix, t.to_csv()));
        }
        if docs.is_empty() {
            docs.push((String::new(), self.verdict_table().to_csv()));
        } else {
            docs.push(("-verdicts".to_string(), self.verdict_table().to_csv()));
        }
        docs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::config(format!("invalid report JSON: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(LabError::config(format!("unknown format '{other}' (csv, json)"))),
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| LabError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Writes the bundle; CSV output spreads the tables over `out` and its
/// `-<table>` siblings. Returns the written paths.
pub fn emit_report(bundle: &ReportBundle, format: Format, out: &Path) -> Result<Vec<PathBuf>> {
    match format {
        Format::Json => {
            write(out, &bundle.to_json())?;
            Ok(vec![out.to_path_buf()])
        }
        Format::Csv => bundle
            .csv_documents()
            .into_iter()
            .map(|(suffix, text)| {
                let p = sibling(out, &suffix);
                write(&p, &text).map(|_| p)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(1e-10), "1e-10");
        assert_eq!(format_complex(C64::new(1.5, -2.0)), "1.5-2.0j");
        assert_eq!(format_complex(C64::new(0.0, 0.25)), "0.0+0.25j");
        assert_eq!(Value::from("a,b").to_csv(), "\"a,b\"");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("x", &["a", "b"]);
        assert_eq!(t.to_csv(), "a,b\n");
        let b = ReportBundle::new("none", BTreeMap::new());
        assert_eq!(b.csv_documents(), vec![(String::new(), "name,value,threshold,relation,pass\n".to_string())]);
    }

    #[test]
    fn json_round_trip() {
        let mut b = ReportBundle::new("demo", [("k".to_string(), "v".to_string())].into_iter().collect());
        let mut t = Table::new("main", &["i", "x", "z", "s", "ok"]);
        t.push(vec![3usize.into(), 0.1.into(), C64::new(1e-300, -2.5).into(), "txt".into(), true.into()]);
        t.push(vec![(-1i64).into(), f64::INFINITY.into(), C64::new(0.3, 0.7).into(), "".into(), false.into()]);
        b.tables.push(t);
        b.verdicts.push(Verdict::at_least("exp", f64::INFINITY, 2.9));
        b.runtimes.insert("total".into(), 0.125);
        let back = ReportBundle::from_json(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn csv_siblings() {
        let dir = std::env::temp_dir().join(format!("phaselab-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut b = ReportBundle::new("demo", BTreeMap::new());
        b.tables.push(Table::new("main", &["a"]));
        b.tables.push(Table::new("extra", &["b"]));
        let paths = emit_report(&b, Format::Csv, &dir.join("out.csv")).unwrap();
        let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["out.csv", "out-extra.csv", "out-verdicts.csv"]);
        let err = emit_report(&b, Format::Json, &dir.join("missing").join("x.json")).unwrap_err();
        assert!(matches!(err, LabError::Io { .. }));
        fs::remove_dir_all(&dir).unwrap();
    }
}
