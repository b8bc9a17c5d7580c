//! Univariate isolation forest.
//!
//! Each tree draws from its own xoshiro256++ stream seeded from
//! `seed + tree_index`, so fitting and scoring in parallel give the same
//! bits as a serial run.

use rand::seq::index::sample;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{apply_rule, rank_descending, DetectionResult, ParamMap, Rule, ScoreVector};

pub const DEFAULT_NTREES: usize = 500;
pub const DEFAULT_SUBSAMPLE_CAP: usize = 256;
pub const DEFAULT_U0: f64 = 0.5;

const HARMONIC_DIRECT_LIMIT: u64 = 1_000_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `H(n) = 1 + 1/2 + ... + 1/n`, summed directly up to 10^6 terms and by
/// the asymptotic expansion beyond.
pub fn harmonic(n: u64) -> f64 {
    if n <= HARMONIC_DIRECT_LIMIT {
        return (1..=n).map(|i| 1.0 / i as f64).sum();
    }
    let x = n as f64;
    let x2 = x * x;
    x.ln() + EULER_GAMMA + 1.0 / (2.0 * x) - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
}

/// Average path length of an unsuccessful search in a binary search tree
/// of `q` points: `2 H(q-1) - 2 (q-1) / q`.
pub fn c_factor(q: usize) -> Result<f64> {
    if q < 2 {
        return Err(Error::QTooSmall(q));
    }
    let q64 = q as u64;
    Ok(2.0 * harmonic(q64 - 1) - 2.0 * (q as f64 - 1.0) / q as f64)
}

/// Path-length correction for a leaf holding `n` points; zero for `n <= 1`.
fn leaf_adjustment(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        c_factor(n).expect("n >= 2")
    }
}

/// `ceil(log2 q)`.
pub fn default_max_depth(q: usize) -> usize {
    (usize::BITS - (q.max(2) - 1).leading_zeros()) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    /// Subsample size per tree; `None` means `min(m, 256)`.
    pub q: Option<usize>,
    pub ntrees: usize,
    pub seed: u64,
    /// `None` means `ceil(log2 q)`.
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            q: None,
            ntrees: DEFAULT_NTREES,
            seed: 1,
            max_depth: None,
        }
    }
}

impl ForestParams {
    /// Effective `(q, max_depth)` for `m` units.
    pub fn resolve(&self, m: usize) -> Result<(usize, usize)> {
        let q = self.q.unwrap_or(m.min(DEFAULT_SUBSAMPLE_CAP));
        if q < 2 {
            return Err(Error::QTooSmall(q));
        }
        if q > m {
            return Err(Error::InvalidParam(format!("q = {q} exceeds the {m} available units")));
        }
        if self.ntrees == 0 {
            return Err(Error::InvalidParam("ntrees must be at least 1".into()));
        }
        let depth = self.max_depth.unwrap_or_else(|| default_max_depth(q));
        if depth == 0 {
            return Err(Error::InvalidParam("max_depth must be at least 1".into()));
        }
        Ok((q, depth))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { value: f64, left: usize, right: usize },
    Leaf { size: usize, depth: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    /// Depth of the leaf reached by `v`, plus the leaf-size correction.
    pub fn path_length(&self, v: f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { value, left, right } => i = if v <= value { left } else { right },
                Node::Leaf { size, depth } => return depth as f64 + leaf_adjustment(size),
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tree_rng(seed: u64, tree: usize) -> Xoshiro256PlusPlus {
    let s0 = splitmix64(splitmix64(seed.wrapping_add(tree as u64)));
    let s1 = splitmix64(s0);
    let s2 = splitmix64(s1);
    let s3 = splitmix64(s2);
    let mut bytes = [0u8; 32];
    for (chunk, s) in bytes.chunks_exact_mut(8).zip([s0, s1, s2, s3]) {
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    Xoshiro256PlusPlus::from_seed(bytes)
}

fn unit_draw(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct Grower<'a> {
    x: &'a [f64],
    max_depth: usize,
    rng: Xoshiro256PlusPlus,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&mut self, size: usize, depth: usize) -> usize {
        self.nodes.push(Node::Leaf { size, depth });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        if idx.len() <= 2 || depth >= self.max_depth {
            return self.leaf(idx.len(), depth);
        }
        // one draw is reserved per splittable node, then the split draw
        unit_draw(&mut self.rng);
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(self.x[i]), hi.max(self.x[i]))
        });
        if lo == hi {
            return self.leaf(idx.len(), depth);
        }
        let u = unit_draw(&mut self.rng);
        let mut split = 2.0 * (0.5 * lo + u * (0.5 * hi - 0.5 * lo));
        if split >= hi {
            split = hi.next_down();
        }
        let split = split.max(lo);

        let mut n_left = 0;
        for k in 0..idx.len() {
            if self.x[idx[k]] <= split {
                idx.swap(k, n_left);
                n_left += 1;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            value: split,
            left: 0,
            right: 0,
        });
        let (l, r) = idx.split_at_mut(n_left);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split {
            value: split,
            left,
            right,
        };
        at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub q: usize,
    pub max_depth: usize,
    pub c_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IFScores {
    /// Mean path length over trees.
    pub avg_path: Vec<f64>,
    /// `2^(-avg_path / c(q))`.
    pub u: Vec<f64>,
}

impl IFScores {
    pub fn mean_u(&self) -> f64 {
        self.u.iter().sum::<f64>() / self.u.len() as f64
    }
}

pub fn fit_forest(x: &[f64], params: &ForestParams) -> Result<IsolationForest> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    let m = x.len();
    let (q, max_depth) = params.resolve(m)?;
    let trees = (0..params.ntrees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let mut idx: Vec<usize> = if q == m {
                (0..m).collect()
            } else {
                sample(&mut rng, m, q).into_vec()
            };
            let mut g = Grower {
                x,
                max_depth,
                rng,
                nodes: Vec::new(),
            };
            g.grow(&mut idx, 0);
            IsolationTree { nodes: g.nodes }
        })
        .collect();
    Ok(IsolationForest {
        trees,
        q,
        max_depth,
        c_q: c_factor(q)?,
    })
}

impl IsolationForest {
    pub fn score(&self, x: &[f64]) -> IFScores {
        let n = self.trees.len() as f64;
        let avg_path: Vec<f64> = x
            .par_iter()
            .map(|&v| self.trees.iter().map(|t| t.path_length(v)).sum::<f64>() / n)
            .collect();
        let u = avg_path.iter().map(|h| (-h / self.c_q).exp2()).collect();
        IFScores { avg_path, u }
    }
}

pub fn iforest_detect(units: &[String], x: &[f64], params: &ForestParams, u0: f64) -> Result<DetectionResult> {
    if units.len() != x.len() {
        return Err(Error::LengthMismatch(units.len(), x.len()));
    }
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::InvalidParam(format!("u0 must lie in (0, 1), got {u0}")));
    }
    let forest = fit_forest(x, params)?;
    let scores = forest.score(x);
    let rule = Rule::Above { threshold: u0 };
    let flagged = apply_rule(units, &scores.u, &rule);
    let mean_u = scores.mean_u();

    let mut p = ParamMap::new();
    p.insert("q".into(), forest.q.into());
    p.insert("ntrees".into(), params.ntrees.into());
    p.insert("seed".into(), params.seed.into());
    p.insert("max_depth".into(), forest.max_depth.into());
    p.insert("u0".into(), u0.into());
    let mut d = ParamMap::new();
    d.insert("c_q".into(), forest.c_q.into());
    d.insert("mean_u".into(), mean_u.into());
    let mut warnings = Vec::new();
    if mean_u < 0.5 {
        warnings.push(format!(
            "mean isolation score {mean_u:.4} is below 0.5; consider increasing ntrees"
        ));
    }
    Ok(DetectionResult {
        method: "iforest".into(),
        input: "x".into(),
        params: p,
        units: units.to_vec(),
        ranking: rank_descending(units, &scores.u),
        scores: vec![
            ScoreVector::new("if_score", scores.u),
            ScoreVector::new("if_avg_path", scores.avg_path),
        ],
        score: "if_score".into(),
        rule,
        flagged,
        details: d,
        warnings,
        exclusions: Vec::new(),
    })
}
