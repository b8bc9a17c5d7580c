use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::knn_distances;
use crate::report::{rank_descending, DetectionResult, ParamMap, Rule, ScoreVector};

/// Minimum-points values offered by default.
pub const DEFAULT_GS: [usize; 3] = [6, 11, 16];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Reachability radius.
    pub delta: f64,
    /// Minimum points: a core point has at least `g - 1` other units within `delta`.
    pub g: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidParam(format!("delta must be positive, got {}", self.delta)));
        }
        if self.g < 2 {
            return Err(Error::InvalidParam(format!("g must be at least 2, got {}", self.g)));
        }
        Ok(())
    }
}

/// Cluster id per unit in input order; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<Option<usize>>,
    pub clusters: usize,
}

impl ClusterLabels {
    pub fn noise(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i].is_none()).collect()
    }
}

fn within(a: f64, b: f64, delta: f64) -> bool {
    (a - b).abs() <= delta
}

/// 1-D DBSCAN over sorted values.
///
/// Clusters are numbered by ascending position. A border point reachable
/// from two clusters joins the left one.
pub fn dbscan_cluster(x: &[f64], params: &DbscanParams) -> Result<ClusterLabels> {
    params.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let m = x.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let delta = params.delta;

    let mut core = vec![false; m];
    let (mut lo, mut hi) = (0usize, 0usize);
    for p in 0..m {
        while !within(xs[p], xs[lo], delta) {
            lo += 1;
        }
        if hi < p {
            hi = p;
        }
        while hi + 1 < m && within(xs[hi + 1], xs[p], delta) {
            hi += 1;
        }
        core[p] = hi - lo >= params.g - 1;
    }

    let mut sorted_labels: Vec<Option<usize>> = vec![None; m];
    let mut clusters = 0usize;
    let mut last_core: Option<usize> = None;
    for p in 0..m {
        if !core[p] {
            continue;
        }
        match last_core {
            Some(q) if within(xs[p], xs[q], delta) => sorted_labels[p] = sorted_labels[q],
            _ => {
                sorted_labels[p] = Some(clusters);
                clusters += 1;
            }
        }
        last_core = Some(p);
    }

    let mut left_core: Option<usize> = None;
    let mut right_core = vec![None; m];
    let mut next = None;
    for p in (0..m).rev() {
        right_core[p] = next;
        if core[p] {
            next = Some(p);
        }
    }
    for p in 0..m {
        if core[p] {
            left_core = Some(p);
            continue;
        }
        let left = left_core.filter(|&q| within(xs[p], xs[q], delta));
        let right = right_core[p].filter(|&q| within(xs[p], xs[q], delta));
        sorted_labels[p] = left.or(right).and_then(|q| sorted_labels[q]);
    }

    let mut labels = vec![None; m];
    for (p, &i) in order.iter().enumerate() {
        labels[i] = sorted_labels[p];
    }
    Ok(ClusterLabels { labels, clusters })
}

/// Reference DBSCAN from the full pairwise neighbourhood graph; O(m^2).
pub fn dbscan_cluster_naive(x: &[f64], params: &DbscanParams) -> Result<ClusterLabels> {
    params.validate()?;
    let m = x.len();
    let delta = params.delta;
    let core: Vec<bool> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i && within(x[i], x[j], delta)).count() >= params.g - 1)
        .collect();

    let mut comp = vec![usize::MAX; m];
    let mut n_comp = 0;
    for s in 0..m {
        if !core[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = n_comp;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                if core[j] && comp[j] == usize::MAX && within(x[i], x[j], delta) {
                    comp[j] = n_comp;
                    stack.push(j);
                }
            }
        }
        n_comp += 1;
    }
    // renumber components by their smallest core value
    let mut min_x = vec![f64::INFINITY; n_comp];
    for i in 0..m {
        if core[i] {
            min_x[comp[i]] = min_x[comp[i]].min(x[i]);
        }
    }
    let mut rank: Vec<usize> = (0..n_comp).collect();
    rank.sort_by(|&a, &b| min_x[a].total_cmp(&min_x[b]));
    let mut new_id = vec![0; n_comp];
    for (pos, &c) in rank.iter().enumerate() {
        new_id[c] = pos;
    }

    let labels = (0..m)
        .map(|i| {
            if core[i] {
                Some(new_id[comp[i]])
            } else {
                (0..m)
                    .filter(|&j| core[j] && within(x[i], x[j], delta))
                    .map(|j| new_id[comp[j]])
                    .min()
            }
        })
        .collect();
    Ok(ClusterLabels {
        labels,
        clusters: n_comp,
    })
}

/// Checks labels against the definitions directly. Returns a description of
/// every violation found; empty means the labelling is consistent.
pub fn audit(x: &[f64], params: &DbscanParams, labels: &ClusterLabels) -> Vec<String> {
    let m = x.len();
    let delta = params.delta;
    let near = |i: usize| (0..m).filter(move |&j| j != i && within(x[i], x[j], delta));
    let core: Vec<bool> = (0..m).map(|i| near(i).count() >= params.g - 1).collect();
    let mut issues = Vec::new();
    for i in 0..m {
        match labels.labels[i] {
            None if core[i] => issues.push(format!("unit {i} is core but labelled noise")),
            None => {
                if near(i).any(|j| core[j]) {
                    issues.push(format!("unit {i} is noise but reachable from a core"));
                }
            }
            Some(c) if !core[i] => {
                if !near(i).any(|j| core[j] && labels.labels[j] == Some(c)) {
                    issues.push(format!("border unit {i} has no core of cluster {c} within delta"));
                }
            }
            Some(c) => {
                for j in near(i).filter(|&j| core[j]) {
                    if labels.labels[j] != Some(c) {
                        issues.push(format!("cores {i} and {j} are within delta but in different clusters"));
                    }
                }
            }
        }
    }
    issues
}

/// Per-unit `k`-NN distances in ascending order, with 1-based ranks.
pub fn sorted_knn_curve(x: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    let mut d = knn_distances(x, k)?.dist;
    d.sort_by(f64::total_cmp);
    Ok(d.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect())
}

/// Flags noise points. The `(g-1)`-NN distance used for choosing `delta` is
/// carried as a score series and drives the ranking.
pub fn dbscan_detect(units: &[String], x: &[f64], params: &DbscanParams) -> Result<DetectionResult> {
    if units.len() != x.len() {
        return Err(Error::LengthMismatch(units.len(), x.len()));
    }
    let labels = dbscan_cluster(x, params)?;
    let noise = labels.noise();
    let flagged = noise.iter().map(|&i| units[i].clone()).collect();

    let mut scores = vec![ScoreVector::new("x", x.to_vec())];
    let curve_name = format!("dbscan_g{}_knn_dist_{}", params.g, params.g - 1);
    let ranking = match knn_distances(x, params.g - 1) {
        Ok(k) => {
            let r = rank_descending(units, &k.dist);
            scores.push(ScoreVector::new(curve_name, k.dist));
            r
        }
        Err(Error::KTooLarge { .. }) => rank_descending(units, &vec![0.0; units.len()]),
        Err(e) => return Err(e),
    };

    let mut p = ParamMap::new();
    p.insert("delta".into(), params.delta.into());
    p.insert("g".into(), params.g.into());
    let mut d = ParamMap::new();
    d.insert("clusters".into(), labels.clusters.into());
    d.insert("noise".into(), noise.len().into());
    Ok(DetectionResult {
        method: "dbscan".into(),
        input: "x".into(),
        params: p,
        units: units.to_vec(),
        scores,
        score: "x".into(),
        rule: Rule::Noise {
            labels: labels.labels,
        },
        flagged,
        ranking,
        details: d,
        warnings: Vec::new(),
        exclusions: Vec::new(),
    })
}
