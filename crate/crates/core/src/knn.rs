//! k-nearest-neighbour distance and weight scores on the real line.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{apply_rule, rank_descending, DetectionResult, ParamMap, Rule, ScoreVector};

/// Neighbour counts offered by default.
pub const DEFAULT_KS: [usize; 3] = [5, 10, 15];

#[derive(Debug, Clone, PartialEq)]
pub struct KnnScores {
    pub k: usize,
    /// Per unit, the `k` nearest distances in ascending order.
    pub neighbor_dists: Vec<Vec<f64>>,
    /// Distance to the `k`-th nearest neighbour.
    pub dist: Vec<f64>,
    /// Sum of the `k` nearest distances.
    pub weight: Vec<f64>,
}

impl KnnScores {
    pub fn mean(&self) -> Vec<f64> {
        self.weight.iter().map(|w| w / self.k as f64).collect()
    }

    pub fn get(&self, kind: ScoreKind) -> Vec<f64> {
        match kind {
            ScoreKind::Distance => self.dist.clone(),
            ScoreKind::Weight => self.weight.clone(),
            ScoreKind::Mean => self.mean(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Distance,
    Weight,
    /// Weight divided by `k`.
    Mean,
}

impl ScoreKind {
    pub fn method_name(self) -> &'static str {
        match self {
            ScoreKind::Distance => "knn-dist",
            ScoreKind::Weight => "knn-weight",
            ScoreKind::Mean => "knn-mean",
        }
    }

    pub fn series_name(self, k: usize) -> String {
        match self {
            ScoreKind::Distance => format!("knn_dist_{k}"),
            ScoreKind::Weight => format!("knn_weight_{k}"),
            ScoreKind::Mean => format!("knn_mean_{k}"),
        }
    }
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    if k >= m {
        return Err(Error::KTooLarge { k, m });
    }
    Ok(())
}

/// Absolute-difference k-NN scores, self excluded. Sorts once, then grows a
/// two-sided window around each point: O(m log m + m k).
pub fn knn_distances(x: &[f64], k: usize) -> Result<KnnScores> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    check_k(k, x.len())?;
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();

    let per_sorted: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::with_capacity(k);
            let (mut l, mut r) = (p, p + 1);
            while out.len() < k {
                let dl = if l > 0 { Some(xs[p] - xs[l - 1]) } else { None };
                let dr = if r < m { Some(xs[r] - xs[p]) } else { None };
                match (dl, dr) {
                    (Some(a), Some(b)) if a <= b => {
                        out.push(a);
                        l -= 1;
                    }
                    (Some(a), None) => {
                        out.push(a);
                        l -= 1;
                    }
                    (_, Some(b)) => {
                        out.push(b);
                        r += 1;
                    }
                    (None, None) => unreachable!("k < m guarantees enough neighbours"),
                }
            }
            out
        })
        .collect();

    let mut neighbor_dists = vec![Vec::new(); m];
    for (p, d) in per_sorted.into_iter().enumerate() {
        neighbor_dists[order[p]] = d;
    }
    let dist = neighbor_dists.iter().map(|d| d[k - 1]).collect();
    let weight = neighbor_dists.iter().map(|d| d.iter().sum()).collect();
    Ok(KnnScores {
        k,
        neighbor_dists,
        dist,
        weight,
    })
}

/// Reference implementation from all pairwise distances; O(m^2 log m).
pub fn knn_distances_naive(x: &[f64], k: usize) -> Result<KnnScores> {
    check_k(k, x.len())?;
    let neighbor_dists: Vec<Vec<f64>> = (0..x.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..x.len())
                .filter(|&j| j != i)
                .map(|j| (x[i] - x[j]).abs())
                .collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d.truncate(k);
            d.sort_by(f64::total_cmp);
            d
        })
        .collect();
    Ok(KnnScores {
        k,
        dist: neighbor_dists.iter().map(|d| d[k - 1]).collect(),
        weight: neighbor_dists.iter().map(|d| d.iter().sum()).collect(),
        neighbor_dists,
    })
}

/// `epsilon` times the largest gap between consecutive sorted scores.
pub fn gap_threshold(scores: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParam(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if scores.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: scores.len(),
        });
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let gap = s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(epsilon * gap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Ranking only.
    None,
    Value(f64),
    /// Resolve through [`gap_threshold`].
    Epsilon(f64),
}

pub fn knn_detect(
    units: &[String],
    x: &[f64],
    k: usize,
    kind: ScoreKind,
    threshold: Threshold,
) -> Result<DetectionResult> {
    if units.len() != x.len() {
        return Err(Error::LengthMismatch(units.len(), x.len()));
    }
    let scores = knn_distances(x, k)?;
    let primary = scores.get(kind);
    let mut params = ParamMap::new();
    params.insert("k".into(), k.into());
    params.insert("score_kind".into(), kind.method_name().into());
    let mut details = ParamMap::new();
    let rule = match threshold {
        Threshold::None => Rule::RankingOnly,
        Threshold::Value(t) => {
            if !t.is_finite() {
                return Err(Error::InvalidParam(format!("threshold must be finite, got {t}")));
            }
            params.insert("threshold".into(), t.into());
            Rule::Above { threshold: t }
        }
        Threshold::Epsilon(eps) => {
            let t = gap_threshold(&primary, eps)?;
            params.insert("epsilon".into(), eps.into());
            details.insert("u0".into(), t.into());
            Rule::Above { threshold: t }
        }
    };
    let flagged = apply_rule(units, &primary, &rule);
    let mut series = vec![
        ScoreVector::new(ScoreKind::Distance.series_name(k), scores.dist.clone()),
        ScoreVector::new(ScoreKind::Weight.series_name(k), scores.weight.clone()),
    ];
    if kind == ScoreKind::Mean {
        series.push(ScoreVector::new(ScoreKind::Mean.series_name(k), primary.clone()));
    }
    Ok(DetectionResult {
        method: kind.method_name().into(),
        input: "x".into(),
        params,
        units: units.to_vec(),
        ranking: rank_descending(units, &primary),
        scores: series,
        score: kind.series_name(k),
        rule,
        flagged,
        details,
        warnings: Vec::new(),
        exclusions: Vec::new(),
    })
}
