//! Boxplot fences: the standard `[Q1 - c IQR, Q3 + c IQR]` rule and the
//! medcouple-adjusted variant for skewed data.

mod medcouple;

pub use medcouple::{medcouple, medcouple_naive};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{quantile_sorted, sorted_copy};
use crate::report::{apply_rule, rank_descending, DetectionResult, ParamMap, Rule, ScoreVector};

/// Medcouple magnitude beyond which adjusted fences become unreliable.
pub const SKEW_WARNING: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FenceMethod {
    Standard,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub lower: f64,
    pub upper: f64,
    pub method: FenceMethod,
    /// Width multiplier; fixed at 1.5 for adjusted fences.
    pub c: f64,
    /// Medcouple, for adjusted fences only.
    pub medcouple: Option<f64>,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Fences {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// `(Q1, median, Q3)`.
pub fn quartiles(x: &[f64]) -> Result<(f64, f64, f64)> {
    let s = sorted_copy(x)?;
    Ok((
        quantile_sorted(&s, 0.25),
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.75),
    ))
}

pub fn standard_fences(x: &[f64], c: f64) -> Result<Fences> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParam(format!("boxplot c must be positive, got {c}")));
    }
    let (q1, median, q3) = quartiles(x)?;
    let iqr = q3 - q1;
    Ok(Fences {
        lower: q1 - c * iqr,
        upper: q3 + c * iqr,
        method: FenceMethod::Standard,
        c,
        medcouple: None,
        q1,
        median,
        q3,
    })
}

/// Exponent pair `(a, b)` for the given medcouple.
pub fn skew_exponents(m: f64) -> (f64, f64) {
    if m >= 0.0 {
        (-4.0, 3.0)
    } else {
        (-3.0, 4.0)
    }
}

fn adjusted_from(q1: f64, median: f64, q3: f64, m: f64) -> Fences {
    let (a, b) = skew_exponents(m);
    let iqr = q3 - q1;
    Fences {
        lower: q1 - 1.5 * (a * m).exp() * iqr,
        upper: q3 + 1.5 * (b * m).exp() * iqr,
        method: FenceMethod::Adjusted,
        c: 1.5,
        medcouple: Some(m),
        q1,
        median,
        q3,
    }
}

pub fn adjusted_fences(x: &[f64]) -> Result<Fences> {
    let m = medcouple(x)?;
    let (q1, median, q3) = quartiles(x)?;
    Ok(adjusted_from(q1, median, q3, m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxMethod {
    Standard { c: f64 },
    Adjusted,
}

/// Flags units strictly outside the fences. The standard method reports as
/// `boxplot`, the adjusted one as `sabp`.
pub fn box_detect(units: &[String], x: &[f64], method: BoxMethod) -> Result<DetectionResult> {
    if units.len() != x.len() {
        return Err(Error::LengthMismatch(units.len(), x.len()));
    }
    let fences = match method {
        BoxMethod::Standard { c } => standard_fences(x, c)?,
        BoxMethod::Adjusted => adjusted_fences(x)?,
    };
    let rule = Rule::Interval {
        lower: fences.lower,
        upper: fences.upper,
    };
    let flagged = apply_rule(units, x, &rule);
    // distance outside the box, so the ranking follows the rule
    let outside: Vec<f64> = x
        .iter()
        .map(|&v| (fences.q1 - v).max(v - fences.q3).max(0.0))
        .collect();

    let mut params = ParamMap::new();
    params.insert("c".into(), fences.c.into());
    let mut details = ParamMap::new();
    details.insert("Q1".into(), fences.q1.into());
    details.insert("median".into(), fences.median.into());
    details.insert("Q3".into(), fences.q3.into());
    details.insert("IQR".into(), fences.iqr().into());
    let mut warnings = Vec::new();
    if let Some(m) = fences.medcouple {
        let (a, b) = skew_exponents(m);
        details.insert("M".into(), m.into());
        details.insert("a".into(), a.into());
        details.insert("b".into(), b.into());
        if m.abs() > SKEW_WARNING {
            warnings.push(format!(
                "medcouple {m:.4} outside [-{SKEW_WARNING}, {SKEW_WARNING}]; adjusted fences may be unreliable"
            ));
        }
    }

    Ok(DetectionResult {
        method: match method {
            BoxMethod::Standard { .. } => "boxplot",
            BoxMethod::Adjusted => "sabp",
        }
        .into(),
        input: "x".into(),
        params,
        units: units.to_vec(),
        ranking: rank_descending(units, &outside),
        scores: vec![ScoreVector::new("x", x.to_vec())],
        score: "x".into(),
        rule,
        flagged,
        details,
        warnings,
        exclusions: Vec::new(),
    })
}
