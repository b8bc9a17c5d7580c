//! Seeded synthetic panels used by tests, benches and examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

/// `(unit_id, y1, y2)` triples with strictly positive values.
pub type Panel = Vec<(String, f64, f64)>;

fn unit(prefix: &str, i: usize) -> String {
    format!("{prefix}{i:04}")
}

/// 509 firms: log-normal sizes, mostly stable growth, a heavier tail of
/// contractions (negatively skewed scores) and a handful of unit-of-measure
/// errors.
pub fn firms_like(seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = LogNormal::new(8.0, 1.2).unwrap();
    let stable = Normal::new(0.03, 0.06).unwrap();
    let contraction = Normal::new(-0.2, 0.25).unwrap();
    (0..509)
        .map(|i| {
            let y1: f64 = size.sample(&mut rng);
            let u: f64 = rng.random();
            let log_r: f64 = if u < 0.75 {
                stable.sample(&mut rng)
            } else if u < 0.985 {
                contraction.sample(&mut rng)
            } else if rng.random_bool(0.5) {
                (10.0f64).ln()
            } else {
                (0.1f64).ln()
            };
            (unit("f", i), y1, y1 * log_r.exp())
        })
        .collect()
}

/// Household incomes over two waves: `m` units with heavy-tailed changes.
pub fn shiw_like(seed: u64, m: usize) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let income = LogNormal::new(10.0, 0.7).unwrap();
    let calm = Normal::new(0.01, 0.12).unwrap();
    let wild = Normal::new(0.0, 0.6).unwrap();
    (0..m)
        .map(|i| {
            let y1: f64 = income.sample(&mut rng);
            let log_r: f64 = if rng.random_bool(0.9) {
                calm.sample(&mut rng)
            } else {
                wild.sample(&mut rng)
            };
            (unit("h", i), y1, y1 * log_r.exp())
        })
        .collect()
}

/// `m` uniform points on `[0, 1)` plus one point `distance` ranges beyond
/// the cluster's maximum, placed last.
pub fn planted_outlier(seed: u64, m: usize, distance: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    x.push(hi + distance * (hi - lo));
    x
}

/// Maps scores onto a panel whose ratios are `1 + scale * x`, with a common
/// base value, so ratio-based detectors see the same ordering as `x`.
pub fn embed_as_ratios(x: &[f64], scale: f64, base: f64) -> Panel {
    x.iter()
        .enumerate()
        .map(|(i, &v)| (unit("p", i), base, base * (1.0 + scale * v)))
        .collect()
}

/// Two normal clusters of different spread and size.
pub fn two_clusters(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Normal::new(0.0, 1.0).unwrap();
    let b = Normal::new(12.0, 0.3).unwrap();
    (0..m)
        .map(|i| if i % 4 == 0 { b.sample(&mut rng) } else { a.sample(&mut rng) })
        .collect()
}

/// Panel rows as CSV with columns `id,y1,y2`; values in shortest
/// round-trip form.
pub fn panel_csv(panel: &Panel) -> String {
    let mut out = String::from("id,y1,y2\n");
    for (id, y1, y2) in panel {
        out.push_str(&format!("{id},{y1:?},{y2:?}\n"));
    }
    out
}
