//! Medcouple robust skewness: a pair-enumeration reference and an
//! O(m log m) selection algorithm sharing one kernel.
//!
//! Pairs are formed from distinct observations `x_i <= med <= x_j`. When
//! several observations equal the median, pairs among them score by the
//! sign rule on their positions in the tied block: for a block of `k`
//! ties that contributes `k(k-1)/2` entries of `+1` and as many of `-1`.

use crate::error::{Error, Result};
use crate::quantile::{quantile_sorted, sorted_copy};

/// Kernel for upper distance `a = x_j - med >= 0` and lower distance
/// `c = med - x_i >= 0`, not both zero: `(a - c) / (a + c)`.
///
/// Evaluated through `t = min(a, c) / max(a, c)` so that every step is one
/// correctly rounded, monotone operation. The result is therefore exactly
/// monotone in `a` and `c`, odd under swapping them, and depends on the
/// pair only through the ratio `a / c`.
#[inline]
fn kernel(a: f64, c: f64) -> f64 {
    if a >= c {
        let t = c / a;
        (1.0 - t) / (1.0 + t)
    } else {
        let t = a / c;
        -((1.0 - t) / (1.0 + t))
    }
}

/// Pair grid: rows are upper distances (descending), columns are lower
/// distances (ascending). Entries are non-increasing along rows and columns.
struct Grid {
    upper: Vec<f64>,
    lower: Vec<f64>,
    /// Number of observations equal to the median.
    ties: usize,
}

impl Grid {
    fn new(x: &[f64]) -> Result<Self> {
        if x.len() < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: x.len(),
            });
        }
        let sorted = sorted_copy(x)?;
        let med = quantile_sorted(&sorted, 0.5);
        let upper: Vec<f64> = sorted.iter().rev().filter(|&&v| v >= med).map(|&v| v - med).collect();
        let lower: Vec<f64> = sorted.iter().rev().filter(|&&v| v <= med).map(|&v| med - v).collect();
        let ties = sorted.iter().filter(|&&v| v == med).count();
        Ok(Self { upper, lower, ties })
    }

    fn rows(&self) -> usize {
        self.upper.len()
    }

    fn cols(&self) -> usize {
        self.lower.len()
    }

    /// Anti-diagonal cells of the tied block pair an observation with
    /// itself; they are excluded from the multiset.
    fn is_self_pair(&self, i: usize, j: usize) -> bool {
        let first = self.rows() - self.ties;
        i >= first && j < self.ties && (i - first) + j + 1 == self.ties
    }

    #[inline]
    fn h(&self, i: usize, j: usize) -> f64 {
        let (a, c) = (self.upper[i], self.lower[j]);
        if a == 0.0 && c == 0.0 {
            // tied block: +1 above the anti-diagonal, 0 on it, -1 below
            let k = self.ties as isize;
            let ii = (i + self.ties - self.rows()) as isize;
            let d = k - 1 - ii - j as isize;
            return d.signum() as f64;
        }
        kernel(a, c)
    }

    /// Number of pairs, self pairs excluded.
    fn len(&self) -> usize {
        self.rows() * self.cols() - self.ties
    }

    /// Count of grid entries (self pairs included) that are `>= 0`.
    fn count_nonnegative(&self) -> usize {
        let (p, q) = (self.rows(), self.cols());
        let mut j = q;
        let mut total = 0;
        for i in 0..p {
            while j > 0 && self.h(i, j - 1) < 0.0 {
                j -= 1;
            }
            total += j;
        }
        total
    }

    /// The `k`-th largest pair value (0-based), self pairs excluded. The
    /// excluded cells are all zero, so ranks past the zero run shift by
    /// the tie count.
    fn kth_largest(&self, k: usize, nonnegative: usize) -> f64 {
        if k + self.ties < nonnegative {
            self.kth_largest_grid(k)
        } else {
            self.kth_largest_grid(k + self.ties)
        }
    }

    /// The `k`-th largest grid entry (0-based) by iterative row-bound
    /// shrinking.
    fn kth_largest_grid(&self, k: usize) -> f64 {
        let (p, q) = (self.rows(), self.cols());
        let mut left = vec![0usize; p];
        // right bound is exclusive here
        let mut right = vec![q; p];
        let mut l_tot = 0usize;
        let mut r_tot = p * q;

        while r_tot - l_tot > p {
            let mut cands: Vec<(f64, usize)> = (0..p)
                .filter(|&i| left[i] < right[i])
                .map(|i| (self.h(i, (left[i] + right[i] - 1) / 2), right[i] - left[i]))
                .collect();
            cands.sort_by(|x, y| x.0.total_cmp(&y.0));
            let total: usize = cands.iter().map(|c| c.1).sum();
            let mut acc = 0usize;
            let mut wm = cands[cands.len() - 1].0;
            for (v, w) in &cands {
                acc += w;
                if 2 * acc >= total {
                    wm = *v;
                    break;
                }
            }

            // greater[i]: count of entries in row i strictly above wm
            let mut greater = vec![0usize; p];
            let mut j = 0usize;
            for i in (0..p).rev() {
                while j < q && self.h(i, j) > wm {
                    j += 1;
                }
                greater[i] = j;
            }
            // at_least[i]: count of entries in row i at or above wm
            let mut at_least = vec![0usize; p];
            let mut j = q;
            for (i, slot) in at_least.iter_mut().enumerate() {
                while j > 0 && self.h(i, j - 1) < wm {
                    j -= 1;
                }
                *slot = j;
            }
            let n_greater: usize = greater.iter().sum();
            let n_at_least: usize = at_least.iter().sum();

            if k < n_greater {
                right = greater;
                r_tot = n_greater;
            } else if k >= n_at_least {
                left = at_least;
                l_tot = n_at_least;
            } else {
                return wm;
            }
        }

        let mut rest: Vec<f64> = (0..p)
            .flat_map(|i| (left[i]..right[i]).map(move |j| (i, j)))
            .map(|(i, j)| self.h(i, j))
            .collect();
        rest.sort_by(|x, y| y.total_cmp(x));
        rest[k - l_tot]
    }
}

fn median_of_count(n: usize, kth: impl Fn(usize) -> f64) -> f64 {
    if n % 2 == 1 {
        kth(n / 2)
    } else {
        (kth(n / 2 - 1) + kth(n / 2)) / 2.0
    }
}

/// Medcouple in O(m log m).
pub fn medcouple(x: &[f64]) -> Result<f64> {
    let g = Grid::new(x)?;
    let nonnegative = g.count_nonnegative();
    Ok(median_of_count(g.len(), |k| g.kth_largest(k, nonnegative)))
}

/// Medcouple by enumerating every pair; O(m^2) time and memory.
pub fn medcouple_naive(x: &[f64]) -> Result<f64> {
    let g = Grid::new(x)?;
    let mut all: Vec<f64> = Vec::with_capacity(g.len());
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            if !g.is_self_pair(i, j) {
                all.push(g.h(i, j));
            }
        }
    }
    all.sort_by(|x, y| y.total_cmp(x));
    Ok(median_of_count(all.len(), |k| all[k]))
}
