//! Slepian (DPSS) bases for the coarray clutter subspace and the
//! inversion-lemma filter built on them.
//!
//! Within one ambiguity region the receive/time part of a clutter vector is a
//! bandlimited sinusoid sampled at the integers `N n + M k`. When `2d/λ = N`
//! the band fills the whole unit circle, the prolate matrix degenerates to the
//! identity and the subspace is spanned exactly by indicator vectors of the
//! occupied grid values. Otherwise the leading DPSS of the grid window are
//! used with half-bandwidth `d / (N λ)` (or `d / λ` under the unscaled
//! convention).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::covariance::{Domain, HermitianCov};
use crate::error::{Error, Result};
use crate::linalg::{
    ad_mul, exp_vector, hermitian_condition, hermitize, inverse, matmul, sym_eigen, trace_re, CMat, CVec, Flops,
    RMat, C64,
};
use crate::rank::{grid_map, rank_rr};
use crate::scene::CCubeConfig;

/// Leading discrete prolate spheroidal sequences of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct DpssSet {
    pub m_t: usize,
    pub w: f64,
    /// Orthonormal columns, ordered by decreasing eigenvalue.
    pub vectors: RMat,
    pub eigenvalues: Vec<f64>,
}

impl DpssSet {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.count());
        Self {
            m_t: self.m_t,
            w: self.w,
            vectors: self.vectors.columns(0, n).into_owned(),
            eigenvalues: self.eigenvalues[..n].to_vec(),
        }
    }
}

/// `sin(2πW(n-m)) / (π(n-m))` with `2W` on the diagonal.
pub fn prolate_kernel(m_t: usize, w: f64) -> RMat {
    RMat::from_fn(m_t, m_t, |i, j| {
        if i == j {
            2.0 * w
        } else {
            let k = i as f64 - j as f64;
            (2.0 * std::f64::consts::PI * w * k).sin() / (std::f64::consts::PI * k)
        }
    })
}

/// All `m_t` sequences of half-bandwidth `w`.
///
/// Signs follow the usual convention: even-order sequences have a positive
/// sum, odd-order ones a positive first lobe.
pub fn dpss(m_t: usize, w: f64) -> Result<DpssSet> {
    if !(w > 0.0 && w < 0.5) {
        return Err(Error::BadBandwidth(w));
    }
    if m_t == 0 {
        return Err(Error::BadConfig("DPSS window length must be positive".into()));
    }
    let (eigenvalues, mut vectors) = sym_eigen(&prolate_kernel(m_t, w));
    for (k, mut col) in vectors.column_iter_mut().enumerate() {
        let flip = if k % 2 == 0 {
            col.sum() < 0.0
        } else {
            let peak = col.amax();
            col.iter().find(|v| v.abs() > 1e-7 * peak).is_some_and(|&v| v < 0.0)
        };
        if flip {
            col.neg_mut();
        }
    }
    Ok(DpssSet {
        m_t,
        w,
        vectors,
        eigenvalues,
    })
}

const CACHE_MAGIC: &[u8; 4] = b"DPSS";
const CACHE_VERSION: u32 = 1;

fn cache_path(dir: &Path, m_t: usize, w: f64, n_t: usize) -> PathBuf {
    dir.join(format!("dpss_{m_t}_{:016x}_{n_t}.bin", w.to_bits()))
}

/// Writes `b"DPSS"`, `u32` version, `u64 M_T`, `f64 W`, `u64` count, the
/// eigenvalues, then the vectors column by column, all little-endian.
pub fn write_dpss<W: Write>(set: &DpssSet, mut out: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(set.m_t as u64).to_le_bytes());
    buf.extend_from_slice(&set.w.to_le_bytes());
    buf.extend_from_slice(&(set.count() as u64).to_le_bytes());
    for v in &set.eigenvalues {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in set.vectors.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_dpss<R: Read>(mut input: R) -> Result<DpssSet> {
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    let short = || Error::Format("truncated DPSS cache".into());
    if raw.len() < 32 || &raw[..4] != CACHE_MAGIC {
        return Err(Error::Format("bad DPSS cache magic".into()));
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("DPSS cache version {version}, expected {CACHE_VERSION}")));
    }
    let u64_at = |o: usize| u64::from_le_bytes(raw[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(raw[o..o + 8].try_into().unwrap());
    let m_t = u64_at(8) as usize;
    let w = f64_at(16);
    let count = u64_at(24) as usize;
    let need = 32 + 8 * (count + m_t * count);
    if raw.len() != need {
        return Err(short());
    }
    let eigenvalues = (0..count).map(|i| f64_at(32 + 8 * i)).collect();
    let base = 32 + 8 * count;
    let vectors = RMat::from_fn(m_t, count, |i, j| f64_at(base + 8 * (j * m_t + i)));
    Ok(DpssSet {
        m_t,
        w,
        vectors,
        eigenvalues,
    })
}

/// Leading `n_t + 1` sequences, read from `dir` when a matching file exists
/// and computed and stored otherwise.
pub fn dpss_cached(dir: &Path, m_t: usize, w: f64, n_t: usize) -> Result<DpssSet> {
    let path = cache_path(dir, m_t, w, n_t);
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(set) = read_dpss(&bytes[..]) {
            if set.m_t == m_t && set.w.to_bits() == w.to_bits() && set.count() == (n_t + 1).min(m_t) {
                return Ok(set);
            }
        }
    }
    let set = dpss(m_t, w)?.truncated(n_t + 1);
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    write_dpss(&set, fs::File::create(&tmp)?)?;
    fs::rename(&tmp, &path)?;
    Ok(set)
}

/// How the DPSS half-bandwidth is derived from the element spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandwidthConvention {
    /// `W = d / (N λ)`: the band of the sinusoid measured on the integer grid
    /// `N n + M k`.
    #[default]
    GridCorrected,
    /// `W = d / λ`, ignoring the grid rescaling.
    Unscaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisBranch {
    /// `2d/λ = N`: indicator vectors of the occupied grid values.
    Exact,
    /// Leading DPSS with a time-bandwidth rank estimate.
    Approximate,
}

#[derive(Debug, Clone, Default)]
pub struct BasisOptions {
    pub convention: BandwidthConvention,
    /// Use the DPSS branch even when `2d/λ = N`.
    pub force_approximate: bool,
    pub cache_dir: Option<PathBuf>,
}

/// Clutter basis `V_c = A_T ⊗ U_c` of the coarray domain.
#[derive(Debug, Clone)]
pub struct SlepianBasis {
    pub l_s: usize,
    pub l_t: usize,
    pub n_p: usize,
    pub branch: BasisBranch,
    pub convention: BandwidthConvention,
    /// Number of receive/time basis vectors minus one.
    pub n_t: usize,
    pub m_t: usize,
    pub w: f64,
    /// DPSS concentration of each column of `U_c` (all ones on the exact branch).
    pub concentrations: Vec<f64>,
    /// `(L_s+1)(L_t+1) x (N_T+1)`, row `k (L_s+1) + n`.
    pub u_c: CMat,
    /// `(L_s+1) x N_p`, column `p` holds `exp(j 2π f_T(p) m)`.
    pub a_t: CMat,
}

impl SlepianBasis {
    pub fn r_b(&self) -> usize {
        self.n_p * (self.n_t + 1)
    }

    pub fn dim(&self) -> usize {
        (self.l_s + 1) * (self.l_s + 1) * (self.l_t + 1)
    }

    pub fn v_c(&self) -> CMat {
        self.a_t.kronecker(&self.u_c)
    }

    /// Fraction of `tr(R)` inside the span of `V_c`.
    pub fn capture_fraction(&self, r: &HermitianCov) -> f64 {
        let q = orthonormal_span(&self.v_c(), 1e-10);
        let inside = trace_re(&(q.adjoint() * &r.matrix * &q));
        inside / r.trace()
    }
}

/// Orthonormal basis of the column span, dropping singular values below
/// `rel_tol * s_max`.
pub fn orthonormal_span(a: &CMat, rel_tol: f64) -> CMat {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    CMat::from_fn(a.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Builds the clutter basis for `n_p` ambiguity regions of `cfg`.
pub fn slepian_clutter_basis(cfg: &CCubeConfig, n_p: usize, opts: &BasisOptions) -> Result<SlepianBasis> {
    if n_p == 0 {
        return Err(Error::BadConfig("need at least one ambiguity region".into()));
    }
    let (l_s, l_t) = (cfg.l_s(), cfg.l_t());
    let beta = cfg.beta();
    let (m, n) = (*beta.numer(), *beta.denom());
    let d_lambda = cfg.d_over_lambda();
    let m_t = n as usize * l_s + m as usize * l_t + 1;
    let grid = grid_map(l_s, l_t, m, n)?;
    let rr = rank_rr(l_s, l_t, m, n)? as usize;
    let exact = (2.0 * d_lambda - n as f64).abs() <= 1e-9 * n as f64 && !opts.force_approximate;
    let w = match opts.convention {
        BandwidthConvention::GridCorrected => d_lambda / n as f64,
        BandwidthConvention::Unscaled => d_lambda,
    };
    let rows = (l_s + 1) * (l_t + 1);
    let (branch, n_t, u_c, concentrations) = if exact {
        let mut u = CMat::zeros(rows, rr);
        for (r, &c) in grid.column_of_row.iter().enumerate() {
            u[(r, c)] = C64::new(1.0, 0.0);
        }
        (BasisBranch::Exact, rr - 1, u, vec![1.0; rr])
    } else {
        if !(w > 0.0 && w < 0.5) {
            return Err(Error::BadBandwidth(w));
        }
        let t_b = l_s as f64 + cfg.beta_f64() * l_t as f64;
        let estimate = (2.0 * d_lambda * t_b - 1e-9).ceil().max(0.0) as usize;
        let n_t = estimate.min(rr - 1);
        let set = match &opts.cache_dir {
            Some(dir) => dpss_cached(dir, m_t, w, n_t)?,
            None => dpss(m_t, w)?.truncated(n_t + 1),
        };
        let mut u = CMat::zeros(rows, n_t + 1);
        for k in 0..=l_t {
            for r in 0..=l_s {
                let g = (n as usize) * r + (m as usize) * k;
                for i in 0..=n_t {
                    u[(k * (l_s + 1) + r, i)] = C64::new(set.vectors[(g, i)], 0.0);
                }
            }
        }
        (BasisBranch::Approximate, n_t, u, set.eigenvalues)
    };
    let mut a_t = CMat::zeros(l_s + 1, n_p);
    let positions: Vec<i64> = (0..=l_s as i64).collect();
    for p in 0..n_p {
        a_t.set_column(p, &exp_vector(&positions, cfg.transmit_frequency(p + 1)));
    }
    Ok(SlepianBasis {
        l_s,
        l_t,
        n_p,
        branch,
        convention: opts.convention,
        n_t,
        m_t,
        w,
        concentrations,
        u_c,
        a_t,
    })
}

/// Left inverse of the transmit factor; minimum-norm right inverse when
/// there are more ambiguity regions than transmit lags.
fn transmit_pinv(a: &CMat) -> Result<CMat> {
    if a.ncols() <= a.nrows() {
        let g = a.ad_mul(a);
        let cond = hermitian_condition(&g);
        if !(cond <= 1e12) {
            return Err(Error::SingularGram(cond));
        }
        Ok(g.try_inverse().ok_or(Error::SingularGram(f64::INFINITY))? * a.adjoint())
    } else {
        let g = a * a.adjoint();
        let cond = hermitian_condition(&g);
        if !(cond <= 1e12) {
            return Err(Error::SingularGram(cond));
        }
        Ok(a.adjoint() * g.try_inverse().ok_or(Error::SingularGram(f64::INFINITY))?)
    }
}

/// `V_c^†` assembled from its Kronecker factors,
/// `A_T^† ⊗ (U_c^H U_c)^{-1} U_c^H`.
///
/// Grid values hit by several `(k, n)` pairs make `U_c^H U_c` diagonal but not
/// the identity, so the receive/time factor keeps its Gram inverse.
pub fn basis_pinv(basis: &SlepianBasis) -> Result<CMat> {
    let a_pinv = transmit_pinv(&basis.a_t)?;
    let g = basis.u_c.ad_mul(&basis.u_c);
    let cond = hermitian_condition(&g);
    if !(cond <= 1e12) {
        return Err(Error::SingularGram(cond));
    }
    let u_pinv = g.try_inverse().ok_or(Error::SingularGram(f64::INFINITY))? * basis.u_c.adjoint();
    Ok(a_pinv.kronecker(&u_pinv))
}

/// `D̂_c = V_c^† (R̂_v - R̂_n) V_c^{†H}`.
pub fn estimate_dc(basis: &SlepianBasis, rv_hat: &HermitianCov, rn_hat: &HermitianCov) -> Result<CMat> {
    estimate_dc_counted(basis, rv_hat, rn_hat, &Flops::new())
}

pub fn estimate_dc_counted(
    basis: &SlepianBasis,
    rv_hat: &HermitianCov,
    rn_hat: &HermitianCov,
    flops: &Flops,
) -> Result<CMat> {
    let n = basis.dim();
    for (name, r) in [("coarray covariance", rv_hat), ("noise covariance", rn_hat)] {
        if r.dim() != n {
            return Err(Error::DimensionMismatch(format!("{name} is {}x{0}, basis needs {n}", r.dim())));
        }
    }
    let pinv = basis_pinv(basis)?;
    let rc = &rv_hat.matrix - &rn_hat.matrix;
    let left = matmul(&pinv, &rc, flops);
    Ok(hermitize(&matmul(&left, &pinv.adjoint(), flops)))
}

/// Same estimate through the dense pseudo-inverse of `V_c`.
pub fn estimate_dc_direct(basis: &SlepianBasis, rv_hat: &HermitianCov, rn_hat: &HermitianCov) -> Result<CMat> {
    let v = basis.v_c();
    let pinv = v
        .pseudo_inverse(1e-10)
        .map_err(|e| Error::Format(format!("pseudo-inverse failed: {e}")))?;
    let rc = &rv_hat.matrix - &rn_hat.matrix;
    Ok(hermitize(&(&pinv * rc * pinv.adjoint())))
}

/// Anything that can apply an inverse covariance to a vector.
pub trait CovInverse: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &CVec) -> CVec;

    /// `x^H R^{-1} x`.
    fn quad_form(&self, x: &CVec) -> f64 {
        x.dotc(&self.apply(x)).re
    }
}

/// Explicit dense inverse.
#[derive(Debug, Clone)]
pub struct DenseInverse(pub CMat);

impl DenseInverse {
    pub fn new(r: &HermitianCov) -> Result<Self> {
        Self::counted(r, &Flops::new())
    }

    pub fn counted(r: &HermitianCov, flops: &Flops) -> Result<Self> {
        let inv = inverse(&r.matrix, flops).ok_or(Error::Singular)?;
        if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(Self(hermitize(&inv)))
    }
}

impl CovInverse for DenseInverse {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &CVec) -> CVec {
        &self.0 * x
    }
}

/// `R_n^{-1} - R_n^{-1} V (D^{-1} + V^H R_n^{-1} V)^{-1} V^H R_n^{-1}` in
/// factored form.
#[derive(Debug, Clone)]
pub struct FastInverse {
    /// `R_n^{-1}` as a scalar when `R_n` is a multiple of the identity.
    rn_inv_scalar: Option<f64>,
    rn_inv: Option<CMat>,
    /// `R_n^{-1} V`.
    y: CMat,
    core_inv: CMat,
    /// Complex multiplies spent building the handle.
    pub flops: u64,
    /// Diagonal loading added to `D` before inversion.
    pub loading: f64,
}

fn scalar_identity(m: &CMat) -> Option<f64> {
    let s = m[(0, 0)].re;
    let scale = s.abs().max(f64::MIN_POSITIVE);
    let off = m
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let (i, j) = (idx % m.nrows(), idx / m.nrows());
            if i == j {
                (z - C64::new(s, 0.0)).norm()
            } else {
                z.norm()
            }
        })
        .fold(0.0, f64::max);
    (off <= 1e-14 * scale).then_some(s)
}

impl FastInverse {
    /// Relative diagonal loading applied to `D` before inversion.
    pub const EPSILON: f64 = 1e-10;

    pub fn new(basis: &SlepianBasis, d_c: &CMat, r_n: &HermitianCov) -> Result<Self> {
        let flops = Flops::new();
        let n = basis.dim();
        let r_b = basis.r_b();
        if d_c.nrows() != r_b || d_c.ncols() != r_b || r_n.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "core {}x{}, noise {}x{2}, basis needs {r_b} and {n}",
                d_c.nrows(),
                d_c.ncols(),
                r_n.dim()
            )));
        }
        let v = basis.v_c();
        let (rn_inv_scalar, rn_inv, y) = match scalar_identity(&r_n.matrix) {
            Some(s) if s > 0.0 => {
                flops.add((n * r_b) as u64);
                (Some(1.0 / s), None, &v * C64::new(1.0 / s, 0.0))
            }
            Some(_) => return Err(Error::Singular),
            None => {
                let inv = inverse(&r_n.matrix, &flops).ok_or(Error::Singular)?;
                let y = matmul(&inv, &v, &flops);
                (None, Some(inv), y)
            }
        };
        let trace = trace_re(d_c);
        let level = if trace > 0.0 {
            trace / r_b as f64
        } else {
            r_n.trace() / n as f64
        };
        let loading = Self::EPSILON * level;
        let mut d = d_c.clone();
        for i in 0..r_b {
            d[(i, i)] += C64::new(loading, 0.0);
        }
        // (D^{-1} + C)^{-1} = D (I + C D)^{-1}: same 2 r_b^3 cost without
        // forming D^{-1}, and I + C D has eigenvalues >= 1 for PSD D.
        let c = ad_mul(&v, &y, &flops);
        let mut core = matmul(&c, &d, &flops);
        for i in 0..r_b {
            core[(i, i)] += C64::new(1.0, 0.0);
        }
        let core_inv = hermitize(&(&d * inverse(&core, &flops).ok_or(Error::SingularCore)?));
        if core_inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularCore);
        }
        Ok(Self {
            rn_inv_scalar,
            rn_inv,
            y,
            core_inv,
            flops: flops.get(),
            loading,
        })
    }

    pub fn rank(&self) -> usize {
        self.y.ncols()
    }

    /// Dense `R^{-1}`; adds the `n^2 r_b + n r_b^2` multiplies of the outer
    /// product to `flops`.
    pub fn to_dense(&self, flops: &Flops) -> CMat {
        let n = self.y.nrows();
        let mut out = match (&self.rn_inv, self.rn_inv_scalar) {
            (Some(m), _) => m.clone(),
            (None, Some(s)) => CMat::identity(n, n) * C64::new(s, 0.0),
            (None, None) => unreachable!("noise inverse always set"),
        };
        let t = matmul(&self.y, &self.core_inv, flops);
        flops.add((n * n * self.rank()) as u64);
        out -= t * self.y.adjoint();
        hermitize(&out)
    }
}

impl CovInverse for FastInverse {
    fn dim(&self) -> usize {
        self.y.nrows()
    }

    fn apply(&self, x: &CVec) -> CVec {
        let base = match (&self.rn_inv, self.rn_inv_scalar) {
            (Some(m), _) => m * x,
            (None, Some(s)) => x * C64::new(s, 0.0),
            (None, None) => unreachable!("noise inverse always set"),
        };
        let c = &self.core_inv * self.y.ad_mul(x);
        base - &self.y * c
    }
}

/// Noise covariance `σ² I` in the recovered coarray domain.
pub fn coarray_noise(l_s: usize, l_t: usize, sigma2: f64) -> HermitianCov {
    let n = (l_s + 1) * (l_s + 1) * (l_t + 1);
    HermitianCov::new(CMat::identity(n, n) * C64::new(sigma2, 0.0), Domain::CoarrayRecovered { l_s, l_t })
}

/// Complex multiplies of the inversion-lemma inverse, `2 r_b^3 + r_b n^2`.
pub fn fast_inverse_cost(r_b: usize, n: usize) -> u64 {
    let (r, n) = (r_b as u64, n as u64);
    2 * r * r * r + r * n * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::coarray_analytic;
    use crate::scene::ClutterScene;

    fn random_psd(n: usize, seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = CMat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &g * g.adjoint()
    }

    #[test]
    fn prolate_near_half_band_is_identity() {
        let s = dpss(16, 0.4999).unwrap();
        let spread = s.eigenvalues[0] - s.eigenvalues[15];
        assert!(spread < 1e-2, "spread {spread}");
        assert!(s.eigenvalues.iter().all(|&v| (v - 1.0).abs() < 1e-2));
    }

    #[test]
    fn eigenvalue_trace_and_ordering() {
        for &(m, w) in &[(15, 0.25), (12, 0.3), (9, 0.45)] {
            let s = dpss(m, w).unwrap();
            let sum: f64 = s.eigenvalues.iter().sum();
            assert!((sum - 2.0 * w * m as f64).abs() < 1e-10);
            assert!(s.eigenvalues.windows(2).all(|p| p[0] > p[1]));
            // μ_0 < 1 holds mathematically but can round to 1.0 for wide bands
            assert!(s.eigenvalues[0] <= 1.0 + 1e-12 && *s.eigenvalues.last().unwrap() > 0.0);
            let g = s.vectors.transpose() * &s.vectors;
            assert!((g - RMat::identity(m, m)).norm() < 1e-10);
        }
        let s = dpss(15, 0.25).unwrap();
        let above = s.eigenvalues.iter().filter(|&&v| v > 0.5).count();
        assert!(above == 7 || above == 8);
    }

    #[test]
    fn bad_bandwidth_rejected() {
        for w in [0.0, 0.5, 0.7, -0.1] {
            assert!(matches!(dpss(8, w), Err(Error::BadBandwidth(_))));
        }
    }

    #[test]
    fn sign_convention() {
        let s = dpss(20, 0.2).unwrap();
        assert!(s.vectors.column(0).sum() > 0.0);
        assert!(s.vectors.column(2).sum() > 0.0);
    }

    #[test]
    fn cache_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let a = dpss_cached(dir.path(), 15, 0.4, 12).unwrap();
        assert_eq!(a.count(), 13);
        let b = dpss_cached(dir.path(), 15, 0.4, 12).unwrap();
        assert_eq!(a, b);
        let mut bytes = Vec::new();
        write_dpss(&a, &mut bytes).unwrap();
        bytes[4] = 9;
        assert!(matches!(read_dpss(&bytes[..]), Err(Error::Format(_))));
    }

    #[test]
    fn exact_branch_sizes() {
        let cfg = CCubeConfig::reference(3, 0.5, 150.0).unwrap();
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        assert_eq!(b.branch, BasisBranch::Exact);
        assert_eq!(b.n_t, 14);
        assert_eq!(b.r_b(), 45);
        let cfg = CCubeConfig::reference(3, 1.0, 150.0).unwrap();
        let b = slepian_clutter_basis(&cfg, 2, &BasisOptions::default()).unwrap();
        assert_eq!(cfg.beta(), num_rational::Ratio::new(1, 2));
        assert_eq!(b.n_t, 21);
    }

    #[test]
    fn approximate_branch_sizes() {
        let cfg = CCubeConfig::reference(3, 0.4, 120.0).unwrap();
        assert_eq!(cfg.beta(), num_rational::Ratio::from_integer(1));
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        assert_eq!(b.branch, BasisBranch::Approximate);
        assert_eq!(b.n_t, 12);
        assert!((b.w - 0.4).abs() < 1e-12);
        let forced = BasisOptions {
            force_approximate: true,
            ..Default::default()
        };
        let cfg = CCubeConfig::reference(3, 0.5, 150.0).unwrap();
        assert!(matches!(slepian_clutter_basis(&cfg, 3, &forced), Err(Error::BadBandwidth(_))));
    }

    #[test]
    fn kronecker_pinv_matches_dense() {
        let cfg = CCubeConfig::reference(3, 0.4, 120.0).unwrap();
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        let x = CMat::from_fn(512, 512, |i, j| C64::new(((i * 7 + j * 3) % 11) as f64, ((i + 2 * j) % 5) as f64));
        let rv = HermitianCov::new(&x * x.adjoint(), Domain::CoarrayRecovered { l_s: 7, l_t: 7 });
        let rn = coarray_noise(7, 7, 1.0);
        let a = estimate_dc(&b, &rv, &rn).unwrap();
        let d = estimate_dc_direct(&b, &rv, &rn).unwrap();
        assert!((&a - &d).norm() / d.norm() < 1e-10);
    }

    #[test]
    fn known_core_recovered() {
        let cfg = CCubeConfig::reference(3, 0.5, 150.0).unwrap();
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        let g = CMat::from_fn(45, 45, |i, j| C64::new((i as f64 - j as f64).cos(), (i * j) as f64 * 0.01));
        let d = &g * g.adjoint();
        let v = b.v_c();
        let rn = coarray_noise(7, 7, 0.7);
        let rv = HermitianCov::new(&v * &d * v.adjoint() + &rn.matrix, Domain::CoarrayRecovered { l_s: 7, l_t: 7 });
        let est = estimate_dc(&b, &rv, &rn).unwrap();
        assert!((&est - &d).norm() / d.norm() < 1e-8);
        assert!(estimate_dc(&b, &rn, &rn).unwrap().norm() < 1e-12);
    }

    #[test]
    fn woodbury_matches_dense_inverse() {
        let cfg = CCubeConfig::reference(3, 0.5, 150.0).unwrap();
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        let d = random_psd(45, 3);
        let rn = coarray_noise(7, 7, 1.3);
        let v = b.v_c();
        let full = HermitianCov::new(&v * &d * v.adjoint() + &rn.matrix, Domain::CoarrayRecovered { l_s: 7, l_t: 7 });
        let fast = FastInverse::new(&b, &d, &rn).unwrap();
        let dense = DenseInverse::new(&full).unwrap();
        let fd = fast.to_dense(&Flops::new());
        assert!((&fd - &dense.0).norm() / dense.0.norm() < 1e-8);
        let x = CVec::from_fn(512, |i, _| C64::new(i as f64, -1.0));
        assert!((fast.apply(&x) - dense.apply(&x)).norm() / dense.apply(&x).norm() < 1e-8);
    }

    #[test]
    fn zero_core_gives_noise_inverse() {
        let cfg = CCubeConfig::reference(3, 0.5, 150.0).unwrap();
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        let rn = coarray_noise(7, 7, 2.0);
        let fast = FastInverse::new(&b, &CMat::zeros(45, 45), &rn).unwrap();
        let fd = fast.to_dense(&Flops::new());
        let target = CMat::identity(512, 512) * C64::new(0.5, 0.0);
        assert!((fd - &target).norm() / target.norm() < 1e-6);
    }

    #[test]
    fn exact_basis_captures_analytic_clutter() {
        let cfg = CCubeConfig::reference(3, 0.5, 150.0).unwrap();
        let scene = ClutterScene::uniform_rings(3, 60, 40.0, 1.0, 0);
        let rc = coarray_analytic(&cfg, &scene, false).unwrap();
        let b = slepian_clutter_basis(&cfg, 3, &BasisOptions::default()).unwrap();
        assert!(b.capture_fraction(&rc) > 1.0 - 1e-10);
    }
}
