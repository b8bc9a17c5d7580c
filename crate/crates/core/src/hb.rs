//! Hidiroglou-Berthelot effect scores and interval detection, with the
//! percentile (P10/P90) variant for data with many tied ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RatioSet;
use crate::quantile::{quantile_sorted, sorted_copy};
use crate::report::{apply_rule, rank_descending, DetectionResult, ParamMap, Rule, ScoreVector};

/// Share of tied ratios above which the percentile variant is worth a look.
pub const TIE_SHARE_WARNING: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileMode {
    /// Spread from the first and third quartiles.
    Quartiles,
    /// Spread from the 10th and 90th percentiles.
    Deciles,
}

impl PercentileMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PercentileMode::Quartiles => "quartiles",
            PercentileMode::Deciles => "deciles",
        }
    }

    fn probabilities(self) -> (f64, f64) {
        match self {
            PercentileMode::Quartiles => (0.25, 0.75),
            PercentileMode::Deciles => (0.10, 0.90),
        }
    }
}

impl std::str::FromStr for PercentileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quartiles" => Ok(PercentileMode::Quartiles),
            "deciles" => Ok(PercentileMode::Deciles),
            other => Err(Error::InvalidParam(format!(
                "percentile_mode must be `quartiles` or `deciles`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBParams {
    /// Magnitude exponent in `[0, 1]`.
    pub u: f64,
    /// Interval width multiplier.
    pub c: f64,
    /// Floor constant for the half-widths.
    pub a: f64,
    pub percentile_mode: PercentileMode,
}

impl Default for HBParams {
    fn default() -> Self {
        Self {
            u: 0.5,
            c: 7.0,
            a: 0.05,
            percentile_mode: PercentileMode::Quartiles,
        }
    }
}

impl HBParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.u) {
            return Err(Error::InvalidParam(format!("U must lie in [0, 1], got {}", self.u)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParam(format!("C must be positive, got {}", self.c)));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::InvalidParam(format!("A must be positive, got {}", self.a)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HBScores {
    pub s: Vec<f64>,
    pub e: Vec<f64>,
    pub r_median: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBInterval {
    pub lower: f64,
    pub upper: f64,
    pub e_median: f64,
    /// Lower quantile of E (Q1 or P10).
    pub e_low: f64,
    /// Upper quantile of E (Q3 or P90).
    pub e_high: f64,
    pub d_q1: f64,
    pub d_q3: f64,
    /// Fewer than three distinct scores, or a zero-width interval.
    pub degenerate: bool,
}

/// Centered ratios `s` and the median ratio.
pub fn center_ratios(ratios: &RatioSet) -> Result<(Vec<f64>, f64)> {
    let r = ratios.ratios();
    let sorted = sorted_copy(&r)?;
    let r_m = quantile_sorted(&sorted, 0.5);
    let s = r
        .iter()
        .map(|&ri| if ri < r_m { 1.0 - r_m / ri } else { ri / r_m - 1.0 })
        .collect();
    Ok((s, r_m))
}

/// `E_i = s_i * max(y1_i, y2_i)^U`.
pub fn effect_scores(s: &[f64], ratios: &RatioSet, u: f64) -> Result<Vec<f64>> {
    if s.len() != ratios.len() {
        return Err(Error::LengthMismatch(s.len(), ratios.len()));
    }
    Ok(s.iter()
        .zip(&ratios.entries)
        .map(|(si, en)| si * en.y1.max(en.y2).powf(u))
        .collect())
}

pub fn hb_scores(ratios: &RatioSet, u: f64) -> Result<HBScores> {
    let (s, r_median) = center_ratios(ratios)?;
    let e = effect_scores(&s, ratios, u)?;
    Ok(HBScores { s, e, r_median })
}

pub fn hb_interval(e: &[f64], params: &HBParams) -> Result<HBInterval> {
    params.validate()?;
    let sorted = sorted_copy(e)?;
    let (p_lo, p_hi) = params.percentile_mode.probabilities();
    let e_median = quantile_sorted(&sorted, 0.5);
    let e_low = quantile_sorted(&sorted, p_lo);
    let e_high = quantile_sorted(&sorted, p_hi);
    let floor = (params.a * e_median).abs();
    let d_q1 = (e_median - e_low).max(floor);
    let d_q3 = (e_high - e_median).max(floor);
    let lower = e_median - params.c * d_q1;
    let upper = e_median + params.c * d_q3;

    let mut distinct = 1;
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            distinct += 1;
        }
    }
    Ok(HBInterval {
        lower,
        upper,
        e_median,
        e_low,
        e_high,
        d_q1,
        d_q3,
        degenerate: distinct < 3 || lower == upper,
    })
}

/// Largest share of units sharing one identical ratio value.
pub fn tied_ratio_share(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut best, mut run) = (1usize, 1usize);
    for w in sorted.windows(2) {
        run = if w[0] == w[1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best as f64 / sorted.len() as f64
}

pub fn hb_detect(ratios: &RatioSet, params: &HBParams) -> Result<DetectionResult> {
    params.validate()?;
    let scores = hb_scores(ratios, params.u)?;
    let interval = hb_interval(&scores.e, params)?;
    let units = ratios.unit_ids();
    let abs_e: Vec<f64> = scores.e.iter().map(|v| v.abs()).collect();
    let rule = Rule::Interval {
        lower: interval.lower,
        upper: interval.upper,
    };
    let flagged = apply_rule(&units, &scores.e, &rule);
    let ranking = rank_descending(&units, &abs_e);

    let mut p = ParamMap::new();
    p.insert("U".into(), params.u.into());
    p.insert("C".into(), params.c.into());
    p.insert("A".into(), params.a.into());
    p.insert("percentile_mode".into(), params.percentile_mode.as_str().into());

    let (lo_name, hi_name) = match params.percentile_mode {
        PercentileMode::Quartiles => ("E_Q1", "E_Q3"),
        PercentileMode::Deciles => ("E_P10", "E_P90"),
    };
    let ratio_values = ratios.ratios();
    let tie_share = tied_ratio_share(&ratio_values);
    let mut d = ParamMap::new();
    d.insert("r_M".into(), scores.r_median.into());
    d.insert("E_M".into(), interval.e_median.into());
    d.insert(lo_name.into(), interval.e_low.into());
    d.insert(hi_name.into(), interval.e_high.into());
    d.insert("d_Q1".into(), interval.d_q1.into());
    d.insert("d_Q3".into(), interval.d_q3.into());
    d.insert("degenerate".into(), interval.degenerate.into());
    d.insert("tied_ratio_share".into(), tie_share.into());

    let mut warnings = Vec::new();
    if interval.degenerate {
        warnings.push(format!(
            "degenerate interval [{}, {}]: fewer than three distinct scores or zero width",
            interval.lower, interval.upper
        ));
    }
    if tie_share > TIE_SHARE_WARNING && params.percentile_mode == PercentileMode::Quartiles {
        warnings.push(format!(
            "{:.1}% of units share one ratio value; consider percentile_mode = deciles",
            100.0 * tie_share
        ));
    }

    Ok(DetectionResult {
        method: "hb".into(),
        input: "E".into(),
        params: p,
        units,
        scores: vec![
            ScoreVector::new("E", scores.e),
            ScoreVector::new("abs_E", abs_e),
            ScoreVector::new("s", scores.s),
            ScoreVector::new("ratio", ratio_values),
        ],
        score: "E".into(),
        rule,
        flagged,
        ranking,
        details: d,
        warnings,
        exclusions: ratios.excluded.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RatioSet;
    use proptest::prelude::*;

    fn set(pairs: &[(f64, f64)]) -> RatioSet {
        RatioSet::from_positive_pairs(
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(y1, y2))| (format!("u{i:03}"), y1, y2)),
        )
        .unwrap()
    }

    #[test]
    fn centering_fixed_points() {
        // ratios 0.5, 1, 2: median 1
        let rs = set(&[(2.0, 1.0), (3.0, 3.0), (1.0, 2.0)]);
        let (s, r_m) = center_ratios(&rs).unwrap();
        assert_eq!(r_m, 1.0);
        assert_eq!(s, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn effect_examples() {
        let rs = set(&[(50.0, 100.0), (81.0, 10.0)]);
        assert_eq!(effect_scores(&[1.0, -0.5], &rs, 0.5).unwrap(), vec![10.0, -4.5]);
        assert_eq!(effect_scores(&[1.0, -0.5], &rs, 0.0).unwrap(), vec![1.0, -0.5]);
    }

    #[test]
    fn interval_examples() {
        let p = HBParams { c: 1.0, ..HBParams::default() };
        let iv = hb_interval(&[-2.0, -1.0, 0.0, 1.0, 2.0], &p).unwrap();
        assert_eq!((iv.lower, iv.upper, iv.e_median, iv.d_q1, iv.d_q3), (-1.0, 1.0, 0.0, 1.0, 1.0));
        assert!(!iv.degenerate);

        let p = HBParams::default();
        let iv = hb_interval(&[4.0; 6], &p).unwrap();
        assert_eq!(iv.e_median, 4.0);
        assert!((iv.d_q1 - 0.2).abs() < 1e-15 && (iv.d_q3 - 0.2).abs() < 1e-15);
        assert!((iv.lower - (4.0 - 7.0 * 0.05 * 4.0)).abs() < 1e-12);
        assert!((iv.upper - (4.0 + 7.0 * 0.05 * 4.0)).abs() < 1e-12);
        assert!(iv.degenerate);

        // E_M = E_Q3: the floor keeps the upper half-width positive
        let iv = hb_interval(&[1.0, 2.0, 5.0, 5.0, 5.0], &p).unwrap();
        assert_eq!(iv.e_high, iv.e_median);
        assert_eq!(iv.d_q3, 0.05 * 5.0);

        let iv = hb_interval(&[0.0; 4], &p).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));
        assert!(iv.degenerate);

        assert!(matches!(hb_interval(&[], &p), Err(Error::EmptyInput)));
    }

    #[test]
    fn deciles_mode_uses_p10_p90() {
        let e: Vec<f64> = (1..=10).map(f64::from).collect();
        let p = HBParams { percentile_mode: PercentileMode::Deciles, ..HBParams::default() };
        let iv = hb_interval(&e, &p).unwrap();
        assert!((iv.e_low - 1.9).abs() < 1e-12 && (iv.e_high - 9.1).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        for bad in [
            HBParams { u: 1.5, ..HBParams::default() },
            HBParams { c: 0.0, ..HBParams::default() },
            HBParams { a: -1.0, ..HBParams::default() },
            HBParams { a: f64::NAN, ..HBParams::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidParam(_))));
        }
        assert_eq!("deciles".parse::<PercentileMode>().unwrap(), PercentileMode::Deciles);
        assert!("median".parse::<PercentileMode>().is_err());
    }

    #[test]
    fn equal_ratios_flag_nothing() {
        let rs = set(&[(1.0, 2.0), (5.0, 10.0), (30.0, 60.0), (7.0, 14.0)]);
        let r = hb_detect(&rs, &HBParams::default()).unwrap();
        assert!(r.flagged.is_empty());
        assert_eq!(r.details["degenerate"], true.into());
    }

    #[test]
    fn single_extreme_ratio_is_flagged() {
        let mut pairs: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let y1 = 100.0 + i as f64;
                (y1, y1 * (1.0 + 0.002 * ((i % 7) as f64 - 3.0)))
            })
            .collect();
        pairs.push((120.0, 120.0 * 100.0));
        let rs = set(&pairs);
        let r = hb_detect(&rs, &HBParams::default()).unwrap();
        assert_eq!(r.flagged, vec!["u050"]);
        assert_eq!(r.ranking[0], "u050");
        assert_eq!(r.replay(), r.flagged);
    }

    #[test]
    fn tie_share_warning() {
        let mut pairs = vec![(10.0, 10.0); 5];
        pairs.extend([(10.0, 11.0), (10.0, 12.0), (10.0, 9.0), (10.0, 30.0)]);
        let r = hb_detect(&set(&pairs), &HBParams::default()).unwrap();
        assert_eq!(r.details["tied_ratio_share"], (5.0 / 9.0).into());
        assert!(r.warnings.iter().any(|w| w.contains("deciles")));
    }

    fn ratio_sets() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.5f64..1e4, 0.2f64..5.0), 3..80)
            .prop_map(|v| v.into_iter().map(|(y1, r)| (y1, y1 * r)).collect())
    }

    proptest! {
        #[test]
        fn algebra_invariants(pairs in ratio_sets(), u in 0.0f64..=1.0) {
            let rs = set(&pairs);
            let sc = hb_scores(&rs, u).unwrap();
            let r = rs.ratios();
            for i in 0..r.len() {
                prop_assert_eq!(sc.s[i] == 0.0, r[i] == sc.r_median);
                if sc.s[i] != 0.0 {
                    prop_assert_eq!(sc.e[i].signum(), sc.s[i].signum());
                }
                for j in 0..r.len() {
                    if r[i] < r[j] {
                        prop_assert!(sc.s[i] < sc.s[j]);
                    }
                }
            }
            let iv = hb_interval(&sc.e, &HBParams { u, ..HBParams::default() }).unwrap();
            prop_assert!(iv.lower <= iv.e_median && iv.e_median <= iv.upper);
            prop_assert!(iv.d_q1 >= (0.05 * iv.e_median).abs());
            prop_assert!(iv.d_q3 >= (0.05 * iv.e_median).abs());
        }

        #[test]
        fn scale_equivariance(pairs in ratio_sets(), lambda in 0.01f64..100.0) {
            let base = center_ratios(&set(&pairs)).unwrap();
            let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (a, b * lambda)).collect();
            let other = center_ratios(&set(&scaled)).unwrap();
            prop_assert!((other.1 / base.1 - lambda).abs() <= 1e-12 * lambda);
            for (x, y) in base.0.iter().zip(&other.0) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn flags_permutation_invariant(pairs in ratio_sets(), rot in 0usize..80) {
            let rs = set(&pairs);
            let a = hb_detect(&rs, &HBParams::default()).unwrap();
            let mut entries = rs.entries.clone();
            let k = rot % entries.len();
            entries.rotate_left(k);
            let rotated = RatioSet { entries, excluded: vec![] };
            let b = hb_detect(&rotated, &HBParams::default()).unwrap();
            let mut fa = a.flagged.clone();
            let mut fb = b.flagged.clone();
            fa.sort();
            fb.sort();
            prop_assert_eq!(fa, fb);
            prop_assert_eq!(a.ranking, b.ranking);
        }

        #[test]
        fn u_zero_scores_are_s(pairs in ratio_sets()) {
            let sc = hb_scores(&set(&pairs), 0.0).unwrap();
            prop_assert_eq!(sc.e, sc.s);
        }
    }
}
