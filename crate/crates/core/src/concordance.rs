//! Kendall's tau-b between score vectors and the pairwise matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row/column layout of the detector comparison matrix.
pub const COMPARISON_LABELS: [&str; 8] = [
    "|E|",
    "IF",
    "5-NN-dist",
    "10-NN-dist",
    "15-NN-dist",
    "5-NN-weight",
    "10-NN-weight",
    "15-NN-weight",
];

/// Symmetric matrix of pairwise tau-b values. `None` marks a pair where tau
/// is undefined because one of the vectors is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceMatrix {
    pub labels: Vec<String>,
    pub tau: Vec<Vec<Option<f64>>>,
}

impl ConcordanceMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.tau[i][j]
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: a.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort of `v` counting inversions (strict descents).
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

fn finish(n0: u64, n1: u64, n2: u64, s: i64) -> Result<f64> {
    if n1 == n0 {
        return Err(Error::DegenerateVector("a".into()));
    }
    if n2 == n0 {
        return Err(Error::DegenerateVector("b".into()));
    }
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    Ok((s as f64 / denom).clamp(-1.0, 1.0))
}

/// Tau-b in O(m log m) (Knight's merge-sort algorithm).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let m = a.len();
    // +0.0 folds -0.0 into 0.0 so equal values sort adjacently
    let mut pairs: Vec<(f64, f64)> = a.iter().zip(b).map(|(x, y)| (x + 0.0, y + 0.0)).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let n0 = (m as u64) * (m as u64 - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tie_pairs(&xs);

    let mut joint = 0u64;
    let mut run = 1u64;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; m];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tie_pairs(&ys);

    let s = n0 as i64 - n1 as i64 - n2 as i64 + joint as i64 - 2 * swaps as i64;
    finish(n0, n1, n2, s)
}

/// Tau-b by enumerating all unit pairs; O(m^2).
pub fn kendall_tau_naive(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let m = a.len();
    let (mut s, mut n1, mut n2) = (0i64, 0u64, 0u64);
    for i in 0..m {
        for j in i + 1..m {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 {
                n1 += 1;
            }
            if db == 0.0 {
                n2 += 1;
            }
            if da != 0.0 && db != 0.0 {
                s += if (da > 0.0) == (db > 0.0) { 1 } else { -1 };
            }
        }
    }
    let n0 = (m as u64) * (m as u64 - 1) / 2;
    finish(n0, n1, n2, s)
}

/// Pairwise tau-b over named vectors, in the given order. Vectors whose
/// name is in `use_abs_for` are replaced by their absolute values first.
pub fn build_matrix(scores: &[(String, Vec<f64>)], use_abs_for: &[&str]) -> Result<ConcordanceMatrix> {
    let Some((_, first)) = scores.first() else {
        return Err(Error::EmptyInput);
    };
    let vectors: Vec<Vec<f64>> = scores
        .iter()
        .map(|(name, v)| {
            if v.len() != first.len() {
                return Err(Error::LengthMismatch(first.len(), v.len()));
            }
            Ok(if use_abs_for.contains(&name.as_str()) {
                v.iter().map(|x| x.abs()).collect()
            } else {
                v.clone()
            })
        })
        .collect::<Result<_>>()?;

    let n = vectors.len();
    let mut tau = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let t = match kendall_tau(&vectors[i], &vectors[j]) {
                Ok(t) => Some(t),
                Err(Error::DegenerateVector(_)) => None,
                Err(e) => return Err(e),
            };
            tau[i][j] = t;
            tau[j][i] = t;
        }
    }
    Ok(ConcordanceMatrix {
        labels: scores.iter().map(|(n, _)| n.clone()).collect(),
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        assert!((kendall_tau(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&a, &neg).unwrap(), -1.0);
    }

    #[test]
    fn constant_vector_is_undefined() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(kendall_tau(&a, &[5.0; 3]), Err(Error::DegenerateVector(_))));
        assert!(matches!(kendall_tau(&[5.0; 3], &a), Err(Error::DegenerateVector(_))));
        assert!(matches!(kendall_tau_naive(&a, &[5.0; 3]), Err(Error::DegenerateVector(_))));
        assert!(matches!(kendall_tau(&[1.0], &[1.0]), Err(Error::TooFewPoints { .. })));
        assert!(matches!(kendall_tau(&a, &[1.0]), Err(Error::LengthMismatch(3, 1))));
    }

    #[test]
    fn ties_match_reference_value() {
        // scipy.stats.kendalltau (tau-b)
        let a = [1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 4.0];
        let b = [2.0, 1.0, 1.0, 3.0, 5.0, 5.0, 4.0];
        let t = kendall_tau(&a, &b).unwrap();
        assert!((t - 0.5564148840746572).abs() < 1e-12, "{t}");
    }

    #[test]
    fn signed_zero_is_a_tie() {
        let a = [0.0, -0.0, 1.0, 2.0];
        let b = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(kendall_tau(&a, &b).unwrap(), kendall_tau_naive(&a, &b).unwrap());
    }

    #[test]
    fn matrix_layout_and_abs() {
        let e = vec![-5.0, 0.1, 0.2, 3.0, -0.3];
        let abs: Vec<f64> = e.iter().map(|v: &f64| v.abs()).collect();
        let scores = vec![
            ("|E|".to_string(), e.clone()),
            ("copy".to_string(), abs.clone()),
            ("half".to_string(), abs.iter().map(|v| v / 2.0).collect()),
            ("flat".to_string(), vec![1.0; 5]),
        ];
        let m = build_matrix(&scores, &["|E|"]).unwrap();
        assert_eq!(m.labels, vec!["|E|", "copy", "half", "flat"]);
        assert_eq!(m.get("|E|", "copy"), Some(1.0));
        assert_eq!(m.get("copy", "half"), Some(1.0));
        assert_eq!(m.get("flat", "copy"), None);
        for i in 0..3 {
            assert_eq!(m.tau[i][i], Some(1.0));
        }
    }

    fn tied_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0i32..8).prop_map(|v| v as f64 * 0.5), len)
    }

    proptest! {
        #[test]
        fn fast_matches_naive(pair in (2usize..120).prop_flat_map(|m| (tied_vec(m), tied_vec(m)))) {
            let (a, b) = pair;
            match (kendall_tau(&a, &b), kendall_tau_naive(&a, &b)) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() <= 1e-12),
                (Err(Error::DegenerateVector(_)), Err(Error::DegenerateVector(_))) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }

        #[test]
        fn symmetric_and_monotone_invariant(
            pair in (3usize..60).prop_flat_map(|m| (
                prop::collection::vec(-100.0f64..100.0, m),
                prop::collection::vec(-100.0f64..100.0, m),
            ))
        ) {
            let (a, b) = pair;
            let t = kendall_tau(&a, &b).unwrap();
            prop_assert!((t - kendall_tau(&b, &a).unwrap()).abs() < 1e-15);
            let cubed: Vec<f64> = a.iter().map(|v| v * v * v + 1.0).collect();
            prop_assert!((t - kendall_tau(&cubed, &b).unwrap()).abs() < 1e-15);
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            prop_assert!((t + kendall_tau(&neg, &b).unwrap()).abs() < 1e-15);
        }
    }
}
