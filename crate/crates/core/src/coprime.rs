//! Co-prime index patterns and their difference coarrays.
//!
//! A co-prime pair `(M, N)` generates the index set
//! `{M i : 0 <= i < N} ∪ {N j : 1 <= j < 2M}` used for sensor positions,
//! frequency offsets and pulse start times. Its difference set contains every
//! lag in `[-(MN + M - 1), MN + M - 1]`.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoprimePair {
    pub m_small: u64,
    pub n_large: u64,
}

impl CoprimePair {
    /// Both entries must be positive and co-prime. Ordering is not checked
    /// here because the Doppler ratio `beta = M/N` may exceed one.
    pub fn new(m_small: u64, n_large: u64) -> Result<Self> {
        if m_small == 0 || n_large == 0 || m_small.gcd(&n_large) != 1 {
            return Err(Error::NonCoprime(m_small, n_large));
        }
        Ok(Self { m_small, n_large })
    }

    /// Contiguous coarray bound `L = M N + M - 1`.
    pub fn contiguous_bound(&self) -> usize {
        (self.m_small * self.n_large + self.m_small - 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoprimeSet {
    pub pair: CoprimePair,
    /// Sorted, duplicate-free.
    pub indices: Vec<i64>,
}

impl CoprimeSet {
    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }
}

pub fn build_coprime_set(pair: CoprimePair) -> Result<CoprimeSet> {
    let (m, n) = (pair.m_small, pair.n_large);
    if m.gcd(&n) != 1 {
        return Err(Error::NonCoprime(m, n));
    }
    if m >= n {
        return Err(Error::BadOrder { m, n });
    }
    let mut set = BTreeSet::new();
    for i in 0..n {
        set.insert((m * i) as i64);
    }
    for j in 1..2 * m {
        set.insert((n * j) as i64);
    }
    Ok(CoprimeSet {
        pair,
        indices: set.into_iter().collect(),
    })
}

/// Index pairs realising each lag of the difference coarray.
#[derive(Debug, Clone)]
pub struct LagStructure {
    pub contiguous_bound: usize,
    pub full_difference_set: Vec<i64>,
    /// `selection_map[lag + L]` lists every `(a, b)` with
    /// `indices[a] - indices[b] == lag`, for `lag` in `[-L, L]`.
    pub selection_map: Vec<Vec<(usize, usize)>>,
    /// Lags beyond the contiguous segment with their pair counts; not used by
    /// the coarray stages.
    pub unused_lags: BTreeMap<i64, usize>,
}

impl LagStructure {
    pub fn pairs(&self, lag: i64) -> &[(usize, usize)] {
        let l = self.contiguous_bound as i64;
        assert!(lag.abs() <= l, "lag {lag} outside contiguous segment [-{l}, {l}]");
        &self.selection_map[(lag + l) as usize]
    }

    /// Number of physical elements the structure was built from.
    pub fn element_count(&self) -> usize {
        self.pairs(0).len()
    }
}

pub fn lag_structure(set: &CoprimeSet) -> LagStructure {
    let l = set.pair.contiguous_bound() as i64;
    let mut selection_map = vec![Vec::new(); (2 * l + 1) as usize];
    let mut unused_lags = BTreeMap::new();
    let mut diffs = BTreeSet::new();
    for (a, &xa) in set.indices.iter().enumerate() {
        for (b, &xb) in set.indices.iter().enumerate() {
            let lag = xa - xb;
            diffs.insert(lag);
            if lag.abs() <= l {
                selection_map[(lag + l) as usize].push((a, b));
            } else {
                *unused_lags.entry(lag).or_insert(0) += 1;
            }
        }
    }
    debug_assert!(selection_map.iter().all(|p| !p.is_empty()));
    LagStructure {
        contiguous_bound: l as usize,
        full_difference_set: diffs.into_iter().collect(),
        selection_map,
        unused_lags,
    }
}

/// Number of distinct values of `l M + p N` for `0 <= l <= l_max`,
/// `0 <= p <= p_max`, in closed form.
///
/// When either index range is shorter than the other integer's period every
/// sum is distinct; otherwise the range `[0, l_max M + p_max N]` is filled
/// except for `(M - 1)(N - 1)` holes placed symmetrically at both ends.
pub fn count_distinct_sums(m: u64, n: u64, l_max: u64, p_max: u64) -> Result<u64> {
    if m == 0 || n == 0 || m.gcd(&n) != 1 {
        return Err(Error::NonCoprime(m, n));
    }
    if n > l_max || m > p_max {
        Ok((l_max + 1) * (p_max + 1))
    } else {
        Ok(l_max * m + p_max * n + 1 - (m - 1) * (n - 1))
    }
}
