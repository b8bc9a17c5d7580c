//! Result model shared by every detector, plus JSON/CSV serialization and
//! plot-data emission.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::concordance::ConcordanceMatrix;
use crate::error::{Error, Result};
use crate::ingest::Exclusion;
use crate::quantile::quantile_sorted;

/// Value of the top-level `schema` key of every JSON document.
pub const SCHEMA: &str = "panel-outliers/1";

/// A tuning constant or summary statistic echoed in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    UInt(u64),
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Num(v)
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::UInt(v as u64)
    }
}

impl From<u64> for ParamValue {
    fn from(v: u64) -> Self {
        ParamValue::UInt(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(v: String) -> Self {
        ParamValue::Text(v)
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

/// A named per-unit score series, aligned with `DetectionResult::units`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub name: String,
    pub values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// The decision rule a detector applied to its primary score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Flag values strictly outside `[lower, upper]`.
    Interval { lower: f64, upper: f64 },
    /// Flag values strictly greater than `threshold`.
    Above { threshold: f64 },
    /// Flag units whose cluster label is `None`.
    Noise { labels: Vec<Option<usize>> },
    /// Scores only; nothing is flagged.
    RankingOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub method: String,
    /// What the detector consumed: `E` (effect scores) or `ratio`.
    pub input: String,
    pub params: ParamMap,
    pub units: Vec<String>,
    pub scores: Vec<ScoreVector>,
    /// Name of the series in `scores` that `rule` applies to.
    pub score: String,
    pub rule: Rule,
    pub flagged: Vec<String>,
    /// Unit ids by decreasing ranking score; ties by unit id.
    pub ranking: Vec<String>,
    pub details: ParamMap,
    pub warnings: Vec<String>,
    pub exclusions: Vec<Exclusion>,
}

impl DetectionResult {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.scores
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }

    /// Re-applies the recorded rule to the recorded scores.
    pub fn replay(&self) -> Vec<String> {
        let flags = match &self.rule {
            Rule::RankingOnly => vec![false; self.units.len()],
            Rule::Noise { labels } => labels.iter().map(Option::is_none).collect(),
            Rule::Interval { lower, upper } => self
                .series(&self.score)
                .unwrap_or(&[])
                .iter()
                .map(|v| v < lower || v > upper)
                .collect(),
            Rule::Above { threshold } => self
                .series(&self.score)
                .unwrap_or(&[])
                .iter()
                .map(|v| v > threshold)
                .collect(),
        };
        self.units
            .iter()
            .zip(flags)
            .filter(|(_, f)| *f)
            .map(|(u, _)| u.clone())
            .collect()
    }
}

/// Units flagged by `rule` over `values`, in input order.
pub(crate) fn apply_rule(units: &[String], values: &[f64], rule: &Rule) -> Vec<String> {
    let probe = DetectionResult {
        method: String::new(),
        input: String::new(),
        params: ParamMap::new(),
        units: units.to_vec(),
        scores: vec![ScoreVector::new("x", values.to_vec())],
        score: "x".into(),
        rule: rule.clone(),
        flagged: Vec::new(),
        ranking: Vec::new(),
        details: ParamMap::new(),
        warnings: Vec::new(),
        exclusions: Vec::new(),
    };
    probe.replay()
}

/// Unit ids sorted by decreasing score, ties broken by unit id.
pub fn rank_descending(units: &[String], score: &[f64]) -> Vec<String> {
    let mut ix: Vec<usize> = (0..units.len()).collect();
    ix.sort_by(|&a, &b| {
        score[b]
            .total_cmp(&score[a])
            .then_with(|| units[a].cmp(&units[b]))
    });
    ix.into_iter().map(|i| units[i].clone()).collect()
}

/// A full run: one or more detector results over the same input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub results: Vec<DetectionResult>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(results: Vec<DetectionResult>) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            results,
            notes: Vec::new(),
        }
    }

    pub fn result(&self, method: &str) -> Option<&DetectionResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidParam(format!("unknown format `{other}`"))),
        }
    }
}

/// Formats `v` with 17 significant digits (`%.17g`), always keeping a
/// decimal point or exponent so the value reads back as a float.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let negative = mantissa.starts_with('-');
    let mut digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-5..17).contains(&exp) {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push_str(&format!("e{exp}"));
        return out;
    }
    if exp >= 0 {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(&digits);
            out.push_str(&"0".repeat(int_len - digits.len()));
            out.push_str(".0");
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.push_str(&"0".repeat((-exp - 1) as usize));
        out.push_str(&digits);
    }
    out
}

/// Pretty JSON with 17-significant-digit floats.
struct Sig17Formatter {
    pretty: PrettyFormatter<'static>,
}

impl Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Serializes any report document as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let formatter = Sig17Formatter {
        pretty: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value
        .serialize(&mut ser)
        .expect("report types always serialize");
    buf.push(b'\n');
    buf
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per unit: id, every score series, and a 0/1 flag column.
/// Multiple results are stacked with a leading `method` column.
pub fn report_csv(report: &Report) -> String {
    let mut out = String::new();
    for result in &report.results {
        let flagged: std::collections::HashSet<&str> =
            result.flagged.iter().map(String::as_str).collect();
        out.push_str("method,unit_id");
        for s in &result.scores {
            out.push(',');
            out.push_str(&csv_field(&s.name));
        }
        out.push_str(",flagged\n");
        for (i, unit) in result.units.iter().enumerate() {
            out.push_str(&csv_field(&result.method));
            out.push(',');
            out.push_str(&csv_field(unit));
            for s in &result.scores {
                out.push(',');
                out.push_str(&format_f64(s.values[i]));
            }
            out.push_str(if flagged.contains(unit.as_str()) { ",1\n" } else { ",0\n" });
        }
    }
    out
}

/// Square matrix with a header row of labels; entries rounded to 4
/// decimals, undefined entries left empty.
pub fn matrix_csv(matrix: &ConcordanceMatrix) -> String {
    let mut out = String::new();
    for label in &matrix.labels {
        out.push(',');
        out.push_str(&csv_field(label));
    }
    out.push('\n');
    for (label, row) in matrix.labels.iter().zip(&matrix.tau) {
        out.push_str(&csv_field(label));
        for v in row {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format!("{v:.4}"));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub schema: String,
    #[serde(flatten)]
    pub matrix: ConcordanceMatrix,
}

pub fn emit_report(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => report_csv(report).into_bytes(),
    }
}

pub fn emit_matrix(matrix: &ConcordanceMatrix, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_json(&MatrixDocument {
            schema: SCHEMA.to_string(),
            matrix: matrix.clone(),
        }),
        Format::Csv => matrix_csv(matrix).into_bytes(),
    }
}

/// Histogram bins with Freedman-Diaconis width `2 IQR / m^(1/3)`.
///
/// Returns `(lower, upper, count)` per bin. The last bin is closed on the
/// right so counts always sum to `m`. Zero IQR or zero range falls back to
/// Sturges' bin count.
pub fn fd_histogram(x: &[f64]) -> Vec<(f64, f64, usize)> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let m = sorted.len() as f64;
    if hi == lo {
        return vec![(lo, hi, sorted.len())];
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let nbins = if iqr > 0.0 {
        let width = 2.0 * iqr / m.cbrt();
        ((hi - lo) / width).ceil().clamp(1.0, 10_000.0) as usize
    } else {
        (m.log2().ceil() as usize + 1).max(1)
    };
    let width = (hi - lo) / nbins as f64;
    let mut counts = vec![0usize; nbins];
    for &v in &sorted {
        let b = (((v - lo) / width).floor() as usize).min(nbins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let lower = lo + i as f64 * width;
            let upper = if i + 1 == nbins { hi } else { lo + (i + 1) as f64 * width };
            (lower, upper, c)
        })
        .collect()
}

/// A named CSV plot series.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub csv: String,
}

/// The data behind the histogram, scatter and sorted-score figures:
///
/// * `hist_E`: Freedman-Diaconis histogram of the effect scores;
/// * `bounds`: every interval rule (HB bounds, boxplot fences);
/// * `scatter_<series>`: pairs `(E, companion score)` per unit;
/// * `sorted_<series>`: scores in increasing order with a rank index.
pub fn plot_series(report: &Report) -> Vec<PlotSeries> {
    let mut out = Vec::new();
    let base = report
        .results
        .iter()
        .find_map(|r| r.series("E").map(|e| (r, e)));

    if let Some((_, e)) = base {
        let mut csv = String::from("bin,lower,upper,count\n");
        for (i, (lo, hi, c)) in fd_histogram(e).into_iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", i, format_f64(lo), format_f64(hi), c));
        }
        out.push(PlotSeries {
            name: "hist_E".into(),
            csv,
        });
    }

    let mut bounds = String::from("method,lower,upper\n");
    let mut any_bounds = false;
    for r in &report.results {
        if let Rule::Interval { lower, upper } = r.rule {
            any_bounds = true;
            bounds.push_str(&format!(
                "{},{},{}\n",
                csv_field(&r.method),
                format_f64(lower),
                format_f64(upper)
            ));
        }
    }
    if any_bounds {
        out.push(PlotSeries {
            name: "bounds".into(),
            csv: bounds,
        });
    }

    let e_by_unit: Option<HashMap<&str, f64>> = base.map(|(r, e)| {
        r.units
            .iter()
            .map(String::as_str)
            .zip(e.iter().copied())
            .collect()
    });

    let mut seen = std::collections::HashSet::new();
    for r in &report.results {
        for s in &r.scores {
            if !seen.insert(s.name.clone()) {
                continue;
            }
            let mut sorted = s.values.clone();
            sorted.sort_by(f64::total_cmp);
            let mut csv = format!("rank,{}\n", csv_field(&s.name));
            for (i, v) in sorted.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", i + 1, format_f64(*v)));
            }
            out.push(PlotSeries {
                name: format!("sorted_{}", s.name),
                csv,
            });

            if s.name == "E" {
                continue;
            }
            if let Some(map) = &e_by_unit {
                let mut csv = format!("E,{}\n", csv_field(&s.name));
                for (unit, v) in r.units.iter().zip(&s.values) {
                    if let Some(e) = map.get(unit.as_str()) {
                        csv.push_str(&format!("{},{}\n", format_f64(*e), format_f64(*v)));
                    }
                }
                out.push(PlotSeries {
                    name: format!("scatter_{}", s.name),
                    csv,
                });
            }
        }
    }
    out
}

/// Writes every plot series as `<out_dir>/<name>.csv`.
pub fn emit_plot_data(report: &Report, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for series in plot_series(report) {
        let path = dir.join(format!("{}.csv", series.name));
        fs::write(&path, series.csv.as_bytes()).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
