//! Closed-form clutter rank in the coarray domain and empirical rank counts.
//!
//! With `β = M/N` and `2d/λ = N`, the clutter of one ambiguity region only
//! excites the receive/time lags through the integer `N n + M k`, so its
//! rank is the number of distinct such values; transmit lags multiply this
//! by the number of separable ambiguity regions.

use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::coprime::count_distinct_sums;
use crate::covariance::HermitianCov;
use crate::error::{Error, Result};
use crate::linalg::{herm_eigenvalues, RMat};

/// Which case of the closed form applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBranch {
    /// Grid values have `(M-1)(N-1)` holes.
    GeneralFraction,
    /// Every `(k, n)` pair lands on a distinct value.
    Saturated,
    /// `N = 1`: a hole-free run of consecutive integers.
    IntegerBeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rr: u64,
    pub total_rank: u64,
    pub branch: RankBranch,
    pub empirical_rank: Option<usize>,
    pub eigenvalues: Vec<f64>,
}

pub fn rank_branch(l_s: usize, l_t: usize, m: u64, n: u64) -> RankBranch {
    if m > l_s as u64 || n > l_t as u64 {
        RankBranch::Saturated
    } else if n == 1 {
        RankBranch::IntegerBeta
    } else {
        RankBranch::GeneralFraction
    }
}

/// Rank of the receive/time factor for `β = M/N`.
pub fn rank_rr(l_s: usize, l_t: usize, m: u64, n: u64) -> Result<u64> {
    // time lags k pair with M, receive lags n with N
    count_distinct_sums(m, n, l_t as u64, l_s as u64)
}

/// Clutter rank for `n_p` ambiguity regions.
pub fn clutter_rank(l_s: usize, l_t: usize, m: u64, n: u64, n_p: usize) -> Result<u64> {
    if n_p == 0 {
        return Err(Error::BadConfig("need at least one ambiguity region".into()));
    }
    let rr = rank_rr(l_s, l_t, m, n)?;
    Ok(n_p.min(l_s + 1) as u64 * rr)
}

pub fn predict(l_s: usize, l_t: usize, beta: Ratio<u64>, n_p: usize) -> Result<RankReport> {
    let (m, n) = (*beta.numer(), *beta.denom());
    Ok(RankReport {
        rr: rank_rr(l_s, l_t, m, n)?,
        total_rank: clutter_rank(l_s, l_t, m, n, n_p)?,
        branch: rank_branch(l_s, l_t, m, n),
        empirical_rank: None,
        eigenvalues: Vec::new(),
    })
}

/// 0/1 matrix mapping `(k, n)` receive/time lag pairs onto the sorted distinct
/// grid values `ζ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    pub l_s: usize,
    pub l_t: usize,
    /// Sorted distinct values of `N n + M k`.
    pub positions: Vec<u64>,
    /// For row `k (L_s + 1) + n`, the column holding its 1.
    pub column_of_row: Vec<usize>,
}

impl GridMap {
    pub fn rows(&self) -> usize {
        self.column_of_row.len()
    }

    pub fn cols(&self) -> usize {
        self.positions.len()
    }

    pub fn to_dense(&self) -> RMat {
        let mut p = RMat::zeros(self.rows(), self.cols());
        for (r, &c) in self.column_of_row.iter().enumerate() {
            p[(r, c)] = 1.0;
        }
        p
    }

    /// How many rows land on each column.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.cols()];
        for &c in &self.column_of_row {
            m[c] += 1;
        }
        m
    }
}

/// Grid-value map `N n + M k`, defined when `2d/λ = N`.
pub fn build_p(l_s: usize, l_t: usize, m: u64, n: u64, two_d_over_lambda: Ratio<u64>) -> Result<GridMap> {
    if m == 0 || n == 0 || num_integer::gcd(m, n) != 1 {
        return Err(Error::NonCoprime(m, n));
    }
    if two_d_over_lambda != Ratio::from_integer(n) {
        return Err(Error::UnsupportedSpacing {
            ratio: *two_d_over_lambda.numer() as f64 / *two_d_over_lambda.denom() as f64,
            n,
        });
    }
    grid_map(l_s, l_t, m, n)
}

pub(crate) fn grid_map(l_s: usize, l_t: usize, m: u64, n: u64) -> Result<GridMap> {
    let mut values = Vec::with_capacity((l_s + 1) * (l_t + 1));
    for k in 0..=l_t as u64 {
        for r in 0..=l_s as u64 {
            values.push(n * r + m * k);
        }
    }
    let mut positions = values.clone();
    positions.sort_unstable();
    positions.dedup();
    let lookup: BTreeMap<u64, usize> = positions.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let column_of_row = values.iter().map(|v| lookup[v]).collect();
    Ok(GridMap {
        l_s,
        l_t,
        positions,
        column_of_row,
    })
}

/// Eigenvalues at or above `rel_threshold * λ_max`.
pub fn empirical_rank(r: &HermitianCov, rel_threshold: f64) -> (usize, Vec<f64>) {
    let ev = herm_eigenvalues(&r.matrix);
    let max = ev.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return (0, ev);
    }
    let count = ev.iter().filter(|&&v| v >= rel_threshold * max).count();
    (count, ev)
}

/// Eigenvalues above `factor * noise_level`, for estimated covariances whose
/// noise floor is known (for the recovered coarray matrix, the noise power).
pub fn empirical_rank_above_noise(r: &HermitianCov, noise_level: f64, factor: f64) -> (usize, Vec<f64>) {
    let ev = herm_eigenvalues(&r.matrix);
    let count = ev.iter().filter(|&&v| v > factor * noise_level).count();
    (count, ev)
}
