//! Panel loading and period-over-period ratios.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One unit observed on two occasions. Either value may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelPair {
    pub unit_id: String,
    pub y1: Option<f64>,
    pub y2: Option<f64>,
}

impl PanelPair {
    pub fn new(unit_id: impl Into<String>, y1: Option<f64>, y2: Option<f64>) -> Self {
        Self {
            unit_id: unit_id.into(),
            y1,
            y2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    MissingY1,
    MissingY2,
    ZeroY1,
    ZeroY2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub unit_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub unit_id: String,
    /// `y2 / y1`, always finite and strictly positive.
    pub ratio: f64,
    pub y1: f64,
    pub y2: f64,
}

/// Valid ratios in input order, plus the ledger of units that were dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSet {
    pub entries: Vec<RatioEntry>,
    pub excluded: Vec<Exclusion>,
}

impl RatioSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ratio).collect()
    }

    pub fn unit_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.unit_id.clone()).collect()
    }

    /// Builds a ratio set directly from `(unit_id, y1, y2)` triples with
    /// strictly positive values.
    pub fn from_positive_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64, f64)>,
        S: Into<String>,
    {
        let pairs: Vec<PanelPair> = pairs
            .into_iter()
            .map(|(id, y1, y2)| PanelPair::new(id, Some(y1), Some(y2)))
            .collect();
        let set = compute_ratios(&pairs)?;
        if !set.excluded.is_empty() {
            return Err(Error::InvalidParam(format!(
                "unit `{}` has a non-positive value",
                set.excluded[0].unit_id
            )));
        }
        Ok(set)
    }
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

fn parse_cell(raw: &str, unit: &str, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if is_missing_token(s) {
        return Ok(None);
    }
    let unparseable = || Error::Unparseable {
        unit: unit.to_string(),
        column: column.to_string(),
        raw: raw.to_string(),
    };
    let v: f64 = s.parse().map_err(|_| unparseable())?;
    if !v.is_finite() {
        return Err(unparseable());
    }
    if v < 0.0 {
        return Err(Error::NegativeValue {
            unit: unit.to_string(),
            column: column.to_string(),
            value: v,
        });
    }
    Ok(Some(v))
}

/// Reads a panel from any CSV source. The first record is the header.
pub fn read_panel<R: Read>(
    reader: R,
    id_col: &str,
    t1_col: &str,
    t2_col: &str,
) -> Result<Vec<PanelPair>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_ix, t1_ix, t2_ix) = (find(id_col)?, find(t1_col)?, find(t2_col)?);

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |ix: usize| record.get(ix).unwrap_or("");
        let unit_id = field(id_ix).trim().to_string();
        if !seen.insert(unit_id.clone()) {
            return Err(Error::DuplicateUnit(unit_id));
        }
        let y1 = parse_cell(field(t1_ix), &unit_id, t1_col)?;
        let y2 = parse_cell(field(t2_ix), &unit_id, t2_col)?;
        out.push(PanelPair { unit_id, y1, y2 });
    }
    Ok(out)
}

/// Loads a panel CSV and pairs the two chosen occasions per unit.
///
/// Empty cells, `NA` and `NaN` (any case) are missing values. Negative
/// numbers are rejected.
pub fn load_panel(
    path: impl AsRef<Path>,
    id_col: &str,
    t1_col: &str,
    t2_col: &str,
) -> Result<Vec<PanelPair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_panel(file, id_col, t1_col, t2_col)
}

/// Ratios `y2 / y1` for units where both values are present and strictly
/// positive. Every other unit lands in the exclusion ledger.
pub fn compute_ratios(pairs: &[PanelPair]) -> Result<RatioSet> {
    let mut entries = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for p in pairs {
        let reason = match (p.y1, p.y2) {
            (None, _) => Some(ExclusionReason::MissingY1),
            (Some(0.0), _) => Some(ExclusionReason::ZeroY1),
            (_, None) => Some(ExclusionReason::MissingY2),
            (_, Some(0.0)) => Some(ExclusionReason::ZeroY2),
            _ => None,
        };
        match reason {
            Some(reason) => excluded.push(Exclusion {
                unit_id: p.unit_id.clone(),
                reason,
            }),
            None => {
                let (y1, y2) = (p.y1.unwrap(), p.y2.unwrap());
                let ratio = y2 / y1;
                if !(ratio.is_finite() && ratio > 0.0) {
                    return Err(Error::NonFinite);
                }
                entries.push(RatioEntry {
                    unit_id: p.unit_id.clone(),
                    ratio,
                    y1,
                    y2,
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyRatioSet);
    }
    Ok(RatioSet { entries, excluded })
}
