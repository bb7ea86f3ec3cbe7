//! Rejection of clustered interference occupying a known box of
//! (transmit, Doppler, receive) frequencies.
//!
//! The average outer product of coarray steering vectors over the box is a
//! Kronecker product of modulated prolate matrices, so its eigenvectors are
//! Kronecker products of modulated DPSS. The projector keeps the leading ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariance::{coarray_steer, HermitianCov};
use crate::error::{Error, Result};
use crate::linalg::{exp_vector, hermitize, kron_vec, sym_eigen, CMat, CVec, RMat};
use crate::scene::FrequencyTriple;

/// Box `f_0 ± Δ/2` in normalised frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    pub center: FrequencyTriple,
    /// Widths along (transmit, Doppler, receive).
    pub widths: [f64; 3],
}

impl RegionSpec {
    /// Widths `1/(L_s+1)`, `1/(L_t+1)`, `1/(L_s+1)`.
    pub fn with_default_widths(center: FrequencyTriple, l_s: usize, l_t: usize) -> Self {
        let (s, t) = (1.0 / (l_s + 1) as f64, 1.0 / (l_t + 1) as f64);
        Self {
            center,
            widths: [s, t, s],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::BadConfig(format!("region widths {:?} must lie in (0, 1]", self.widths)));
        }
        let c = self.center;
        if [c.f_t, c.f_d, c.f_r].iter().any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("region center must be finite".into()));
        }
        Ok(())
    }

    fn centers(&self) -> [f64; 3] {
        [self.center.f_t, self.center.f_d, self.center.f_r]
    }

    /// Whether `f` lies inside the box, transmit frequency taken modulo 1.
    pub fn contains(&self, f: FrequencyTriple) -> bool {
        let wrap = |x: f64| x - x.round();
        let c = self.centers();
        let d = [wrap(f.f_t - c[0]), f.f_d - c[1], f.f_r - c[2]];
        d.iter().zip(&self.widths).all(|(x, w)| x.abs() <= w / 2.0)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> FrequencyTriple {
        let c = self.centers();
        let mut draw = |i: usize| c[i] + self.widths[i] * (rng.random::<f64>() - 0.5);
        FrequencyTriple::new(draw(0), draw(1), draw(2))
    }

    /// Default per-factor ranks `⌈2W P⌉ + 1` with `W = Δ/2`.
    pub fn default_ranks(&self, l_s: usize, l_t: usize) -> [usize; 3] {
        let sizes = [l_s + 1, l_t + 1, l_s + 1];
        let mut out = [0; 3];
        for i in 0..3 {
            out[i] = ((self.widths[i] * sizes[i] as f64 - 1e-9).ceil() as usize + 1).min(sizes[i]);
        }
        out
    }
}

/// `2W sinc(2W(k - l))`.
pub fn prolate_matrix(p: usize, w: f64) -> RMat {
    RMat::from_fn(p, p, |k, l| {
        if k == l {
            2.0 * w
        } else {
            let x = std::f64::consts::PI * 2.0 * w * (k as f64 - l as f64);
            2.0 * w * x.sin() / x
        }
    })
}

/// `(s s^H) ⊙ B`.
pub fn modulated_prolate(steer: &CVec, b: &RMat) -> Result<CMat> {
    if b.nrows() != steer.len() || b.ncols() != steer.len() {
        return Err(Error::DimensionMismatch(format!(
            "steering length {} vs prolate {}x{}",
            steer.len(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(CMat::from_fn(steer.len(), steer.len(), |i, j| steer[i] * steer[j].conj() * b[(i, j)]))
}

/// Modulated DPSS of one factor, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct FactorEigen {
    pub values: Vec<f64>,
    /// Columns `s ⊙ u_k`.
    pub vectors: CMat,
}

fn factor_eigen(p: usize, center: f64, width: f64) -> FactorEigen {
    let (values, u) = sym_eigen(&prolate_matrix(p, width / 2.0));
    let s = exp_vector(&(0..p as i64).collect::<Vec<_>>(), center);
    let vectors = CMat::from_fn(p, p, |i, k| s[i] * u[(i, k)]);
    FactorEigen { values, vectors }
}

#[derive(Debug, Clone)]
pub struct RejectionProjector {
    pub region: RegionSpec,
    pub ranks: [usize; 3],
    /// Selected factor index triples, by decreasing eigenvalue product.
    pub selected: Vec<[usize; 3]>,
    pub products: Vec<f64>,
    pub factors: [FactorEigen; 3],
    /// Orthonormal columns `α ⊗ β ⊗ γ` spanning the projector.
    pub basis: CMat,
    /// Sum of `λμκ/(Δ_T Δ_d Δ_R)` over every unselected triple.
    tail: f64,
    dim: usize,
}

/// Projector onto the `K̃` leading Kronecker eigenvectors of the region's
/// average steering outer product.
///
/// Per factor the top `ranks[i]` modulated DPSS are eligible; the `total`
/// triples with the largest eigenvalue products are kept (all eligible ones
/// when `total` is `None`), ties broken by factor index.
pub fn build_projector(
    l_s: usize,
    l_t: usize,
    region: &RegionSpec,
    ranks: [usize; 3],
    total: Option<usize>,
) -> Result<RejectionProjector> {
    region.validate()?;
    let sizes = [l_s + 1, l_t + 1, l_s + 1];
    let dim = sizes.iter().product::<usize>();
    for i in 0..3 {
        if ranks[i] > sizes[i] {
            return Err(Error::RankTooLarge {
                requested: ranks[i],
                available: sizes[i],
            });
        }
    }
    let c = region.centers();
    let factors = [
        factor_eigen(sizes[0], c[0], region.widths[0]),
        factor_eigen(sizes[1], c[1], region.widths[1]),
        factor_eigen(sizes[2], c[2], region.widths[2]),
    ];
    let scale: f64 = region.widths.iter().product();
    let mut all: Vec<([usize; 3], f64)> = Vec::with_capacity(dim);
    for a in 0..sizes[0] {
        for b in 0..sizes[1] {
            for g in 0..sizes[2] {
                let v = factors[0].values[a] * factors[1].values[b] * factors[2].values[g];
                all.push(([a, b, g], v));
            }
        }
    }
    let mut eligible: Vec<([usize; 3], f64)> = all
        .iter()
        .copied()
        .filter(|(k, _)| k[0] < ranks[0] && k[1] < ranks[1] && k[2] < ranks[2])
        .collect();
    eligible.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let keep = total.unwrap_or(eligible.len());
    if keep > eligible.len() {
        return Err(Error::RankTooLarge {
            requested: keep,
            available: eligible.len(),
        });
    }
    eligible.truncate(keep);
    let chosen: std::collections::BTreeSet<[usize; 3]> = eligible.iter().map(|e| e.0).collect();
    let tail = all
        .iter()
        .filter(|(k, _)| !chosen.contains(k))
        .map(|(_, v)| v.max(0.0))
        .sum::<f64>()
        / scale;
    let mut basis = CMat::zeros(dim, keep);
    for (j, (k, _)) in eligible.iter().enumerate() {
        let v = kron_vec(
            &kron_vec(&factors[0].vectors.column(k[0]).into_owned(), &factors[1].vectors.column(k[1]).into_owned()),
            &factors[2].vectors.column(k[2]).into_owned(),
        );
        basis.set_column(j, &v);
    }
    Ok(RejectionProjector {
        region: *region,
        ranks,
        selected: eligible.iter().map(|e| e.0).collect(),
        products: eligible.iter().map(|e| e.1).collect(),
        factors,
        basis,
        tail,
        dim,
    })
}

impl RejectionProjector {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Π = Σ v_k v_k^H`.
    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// `Π⊥ = I - Π`.
    pub fn complement(&self) -> CMat {
        CMat::identity(self.dim, self.dim) - self.projector()
    }

    pub fn apply_perp(&self, x: &CVec) -> CVec {
        x - &self.basis * self.basis.ad_mul(x)
    }

    /// Expected fraction of a random in-region steering vector's energy left
    /// outside the projector: the unselected eigenvalue mass of the region
    /// average divided by its trace.
    pub fn residue_bound(&self) -> f64 {
        self.tail / self.dim as f64
    }

    /// Monte-Carlo mean and standard error of `‖Π⊥ v‖² / ‖v‖²` over uniform
    /// draws from the region.
    pub fn residue_monte_carlo(&self, l_s: usize, l_t: usize, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..draws)
            .map(|_| {
                let v = coarray_steer(l_s, l_t, self.region.sample(&mut rng));
                self.apply_perp(&v).norm_squared() / v.norm_squared()
            })
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

/// `Π⊥ R Π⊥`.
pub fn reject(r: &HermitianCov, proj: &RejectionProjector) -> Result<HermitianCov> {
    check_dim(r, proj)?;
    let p = proj.complement();
    Ok(HermitianCov::new(hermitize(&(&p * &r.matrix * &p)), r.domain))
}

/// `Π⊥ R`, not Hermitian in general.
pub fn reject_one_sided(r: &HermitianCov, proj: &RejectionProjector) -> Result<CMat> {
    check_dim(r, proj)?;
    Ok(proj.complement() * &r.matrix)
}

fn check_dim(r: &HermitianCov, proj: &RejectionProjector) -> Result<()> {
    if r.dim() != proj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "covariance {}x{0}, projector {}x{1}",
            r.dim(),
            proj.dim()
        )));
    }
    Ok(())
}

/// Output SINR (linear) of weight `w` with `Π⊥ R` in the denominator:
/// `σ_t² |w^H v|² / |w^H Π⊥ R w|`.
///
/// The quadratic form is not real in general because `Π⊥ R` is not
/// Hermitian; its modulus is used.
pub fn sinr_one_sided(w: &CVec, r: &HermitianCov, proj: &RejectionProjector, v_t: &CVec, sigma_t2: f64) -> f64 {
    let rw = &r.matrix * w;
    let denom = w.dotc(&proj.apply_perp(&rw)).norm();
    sigma_t2 * w.dotc(v_t).norm_sqr() / denom
}
