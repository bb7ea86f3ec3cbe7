//! Dense complex linear algebra shared by the processing stages.
//!
//! Thin layer over `nalgebra`: Hermitian eigendecomposition sorted in
//! descending order, PSD square roots, parallel Gram products and an
//! instrumented multiply counter used by the complexity benchmarks.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Unit-modulus exponential vector `exp(j 2 pi f x)` over integer positions.
pub fn exp_vector(positions: &[i64], freq: f64) -> CVec {
    CVec::from_iterator(
        positions.len(),
        positions.iter().map(|&x| cis(TWO_PI * freq * x as f64)),
    )
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Counts complex multiply-accumulate operations of the instrumented kernels.
#[derive(Debug, Default)]
pub struct Flops(AtomicU64);

impl Flops {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// `a * b`, counting `m * k * n` multiplies.
pub fn matmul(a: &CMat, b: &CMat, flops: &Flops) -> CMat {
    flops.add((a.nrows() * a.ncols() * b.ncols()) as u64);
    a * b
}

/// `a^H * b`, counting `a.ncols() * a.nrows() * b.ncols()` multiplies.
pub fn ad_mul(a: &CMat, b: &CMat, flops: &Flops) -> CMat {
    flops.add((a.nrows() * a.ncols() * b.ncols()) as u64);
    a.ad_mul(b)
}

/// General inverse by LU; Gauss-Jordan inversion costs `n^3` multiplies.
pub fn inverse(m: &CMat, flops: &Flops) -> Option<CMat> {
    let n = m.nrows() as u64;
    flops.add(n * n * n);
    m.clone().try_inverse()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn herm_eigen(m: &CMat) -> HermEigen {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermEigen { values, vectors }
}

/// Eigenvalues only, descending.
pub fn herm_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Real symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eigen(m: &RMat) -> (Vec<f64>, RMat) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = RMat::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `(m + m^H) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Relative deviation from Hermitian symmetry in Frobenius norm.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() / scale
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `z * z^H`, with rows of the output computed in parallel.
///
/// Each output row is produced by a single thread with a fixed accumulation
/// order, so the result does not depend on the thread count.
pub fn gram(z: &CMat) -> CMat {
    let n = z.nrows();
    let zh = z.adjoint();
    const BLOCK: usize = 32;
    let blocks: Vec<(usize, CMat)> = (0..n)
        .step_by(BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let rows = BLOCK.min(n - start);
            let part = z.rows(start, rows) * &zh;
            (start, part)
        })
        .collect();
    let mut out = CMat::zeros(n, n);
    for (start, part) in blocks {
        out.rows_mut(start, part.nrows()).copy_from(&part);
    }
    out
}

/// Reassemble `V diag(values) V^H`.
pub fn from_eigen(values: &[f64], vectors: &CMat) -> CMat {
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * vectors.adjoint()
}

/// Condition number of a Hermitian positive (semi)definite matrix.
pub fn hermitian_condition(m: &CMat) -> f64 {
    let ev = herm_eigenvalues(m);
    let max = ev.first().copied().unwrap_or(0.0);
    let min = ev.last().copied().unwrap_or(0.0);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solve `R x = b` for Hermitian `R`, Cholesky first and LU as fallback.
pub fn herm_solve(r: &CMat, b: &CVec) -> Option<CVec> {
    if let Some(ch) = r.clone().cholesky() {
        return Some(ch.solve(b));
    }
    r.clone().lu().solve(b)
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
pub fn principal_angle(a: &CMat, b: &CMat) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.adjoint() * qb).singular_values();
    let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
    smin.clamp(-1.0, 1.0).acos()
}
