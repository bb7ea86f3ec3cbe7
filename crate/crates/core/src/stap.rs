//! MVDR weights, output SINR, Doppler sweeps and MVDR spectra.

use rayon::prelude::*;

use crate::covariance::{coarray_analytic, coarray_steer, lift, Domain, HermitianCov};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64, TWO_PI};
use crate::scene::{
    analytic_covariance_on, estimate_noise_power, sample_covariance, simulate_snapshots_on, ArrayLayout, CCubeConfig,
    ClutterScene, FrequencyTriple, TargetSpec,
};
use crate::slepian::{coarray_noise, estimate_dc, slepian_clutter_basis, BasisOptions, CovInverse, DenseInverse, FastInverse};

/// Distortionless MVDR weight `R^{-1} v / (v^H R^{-1} v)`.
#[derive(Debug, Clone)]
pub struct StapWeight {
    pub w: CVec,
    pub v_t: CVec,
    /// `v^H R^{-1} v` of the covariance the weight was designed on.
    pub gain: f64,
}

pub fn weight(inv: &dyn CovInverse, v_t: &CVec) -> Result<StapWeight> {
    if inv.dim() != v_t.len() {
        return Err(Error::DimensionMismatch(format!(
            "steering length {} vs covariance order {}",
            v_t.len(),
            inv.dim()
        )));
    }
    let r_inv_v = inv.apply(v_t);
    let q = v_t.dotc(&r_inv_v);
    if !(q.re.is_finite() && q.re > 0.0) {
        return Err(Error::Singular);
    }
    Ok(StapWeight {
        w: r_inv_v / q,
        v_t: v_t.clone(),
        gain: q.re,
    })
}

pub fn weight_dense(r: &HermitianCov, v_t: &CVec) -> Result<StapWeight> {
    weight(&DenseInverse::new(r)?, v_t)
}

/// `σ_t² |w^H v|² / (w^H R w)`, linear.
pub fn output_sinr(w: &CVec, r_total: &CMat, v_t: &CVec, sigma_t2: f64) -> f64 {
    let num = sigma_t2 * w.dotc(v_t).norm_sqr();
    let den = w.dotc(&(r_total * w)).re;
    num / den
}

pub fn output_sinr_db(w: &CVec, r_total: &CMat, v_t: &CVec, sigma_t2: f64) -> f64 {
    db(output_sinr(w, r_total, v_t, sigma_t2))
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Sample-matrix MVDR on a uniform FDA with the same element and pulse counts.
    PhysicalFd,
    /// MVDR on the recovered coarray covariance.
    CoarrayFd,
    /// MVDR on the Slepian low-rank model with the inversion lemma.
    CoarrayDpss,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::PhysicalFd, Method::CoarrayFd, Method::CoarrayDpss];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PhysicalFd => "physical-fd",
            Method::CoarrayFd => "coarray-fd",
            Method::CoarrayDpss => "coarray-dpss",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Covariance used in the SINR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SinrReference {
    /// The exact covariance of the scene in the method's domain.
    #[default]
    Truth,
    /// The covariance the weight was designed on.
    Design,
}

#[derive(Debug, Clone)]
pub struct SinrSetup {
    pub cfg: CCubeConfig,
    pub scene: ClutterScene,
    pub target: TargetSpec,
    pub n_samples: usize,
    pub trials: usize,
    pub doppler: Vec<f64>,
    pub basis: BasisOptions,
    pub reference: SinrReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrCurve {
    pub method: Method,
    pub doppler: Vec<f64>,
    /// Trial-averaged (linear mean) SINR in dB.
    pub sinr_db: Vec<f64>,
}

impl SinrCurve {
    /// Mean of the dB curve over Doppler bins farther than `exclusion` from
    /// `notch`.
    pub fn mean_outside(&self, notch: f64, exclusion: f64) -> f64 {
        let kept: Vec<f64> = self
            .doppler
            .iter()
            .zip(&self.sinr_db)
            .filter(|(f, _)| (*f - notch).abs() > exclusion)
            .map(|(_, s)| *s)
            .collect();
        kept.iter().sum::<f64>() / kept.len() as f64
    }

    pub fn argmin(&self) -> f64 {
        let i = (0..self.sinr_db.len())
            .min_by(|&a, &b| self.sinr_db[a].total_cmp(&self.sinr_db[b]))
            .unwrap_or(0);
        self.doppler[i]
    }
}

impl SinrSetup {
    /// Clutter Doppler at the target's cone angle.
    pub fn notch(&self) -> f64 {
        self.cfg.beta_f64() * self.cfg.receive_frequency(self.target.psi.cos())
    }

    fn target_triple(&self, f_d: f64) -> FrequencyTriple {
        let t = self.target.triple(&self.cfg);
        FrequencyTriple::new(t.f_t, f_d, t.f_r)
    }

    fn trial_scene(&self, trial: usize) -> ClutterScene {
        let mut s = self.scene.clone();
        s.rng_seed = self.scene.rng_seed.wrapping_add((trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        s
    }
}

fn curve_for(
    setup: &SinrSetup,
    design: &dyn CovInverse,
    design_cov: Option<&CMat>,
    truth: &CMat,
    steer: &(dyn Fn(FrequencyTriple) -> CVec + Sync),
) -> Result<Vec<f64>> {
    setup
        .doppler
        .par_iter()
        .map(|&fd| {
            let v = steer(setup.target_triple(fd));
            let w = weight(design, &v)?;
            let r = match setup.reference {
                SinrReference::Truth => truth,
                SinrReference::Design => design_cov.unwrap_or(truth),
            };
            Ok(output_sinr(&w.w, r, &v, setup.target.power))
        })
        .collect()
}

/// Per-method SINR over the Doppler grid, averaged over independent
/// training sets.
pub fn sinr_curves(setup: &SinrSetup, methods: &[Method]) -> Result<Vec<SinrCurve>> {
    setup.scene.validate()?;
    if setup.trials == 0 || setup.n_samples == 0 {
        return Err(Error::Empty);
    }
    let cfg = &setup.cfg;
    let (l_s, l_t) = (cfg.l_s(), cfg.l_t());
    let uniform = cfg.uniform_layout();
    let coprime = cfg.layout();
    let needs_phys = methods.contains(&Method::PhysicalFd);
    let needs_co = methods.iter().any(|m| *m != Method::PhysicalFd);
    let phys_truth = if needs_phys {
        Some(analytic_covariance_on(&uniform, cfg, &setup.scene)?.matrix)
    } else {
        None
    };
    let co_truth = if needs_co {
        Some(coarray_analytic(cfg, &setup.scene, true)?.matrix)
    } else {
        None
    };
    let basis = if methods.contains(&Method::CoarrayDpss) {
        Some(slepian_clutter_basis(cfg, setup.scene.n_ambiguities, &setup.basis)?)
    } else {
        None
    };
    let phys_steer = |f: FrequencyTriple| uniform.steer(f);
    let co_steer = |f: FrequencyTriple| coarray_steer(l_s, l_t, f);

    let per_trial: Vec<Vec<Vec<f64>>> = (0..setup.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<Vec<f64>>> {
            let scene = setup.trial_scene(trial);
            let mut out = Vec::with_capacity(methods.len());
            let mut co_cov: Option<HermitianCov> = None;
            for &m in methods {
                let curve = match m {
                    Method::PhysicalFd => {
                        let y = simulate_snapshots_on(&uniform, cfg, &scene, setup.n_samples)?;
                        let r = sample_covariance(&y, uniform.domain())?;
                        let inv = DenseInverse::new(&r)?;
                        curve_for(setup, &inv, Some(&r.matrix), phys_truth.as_ref().unwrap(), &phys_steer)?
                    }
                    Method::CoarrayFd | Method::CoarrayDpss => {
                        if co_cov.is_none() {
                            let y = simulate_snapshots_on(&coprime, cfg, &scene, setup.n_samples)?;
                            let r = sample_covariance(&y, coprime.domain())?;
                            co_cov = Some(lift(cfg, &r)?);
                        }
                        let rv = co_cov.as_ref().unwrap();
                        if m == Method::CoarrayFd {
                            let inv = DenseInverse::new(rv)?;
                            curve_for(setup, &inv, Some(&rv.matrix), co_truth.as_ref().unwrap(), &co_steer)?
                        } else {
                            let basis = basis.as_ref().unwrap();
                            let sigma2 = passive_noise_estimate(cfg, &scene, setup.n_samples)?;
                            let rn = coarray_noise(l_s, l_t, sigma2);
                            let d = estimate_dc(basis, rv, &rn)?;
                            let fast = FastInverse::new(basis, &d, &rn)?;
                            let v = basis.v_c();
                            let model = &v * &d * v.adjoint() + &rn.matrix;
                            curve_for(setup, &fast, Some(&model), co_truth.as_ref().unwrap(), &co_steer)?
                        }
                    }
                };
                out.push(curve);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    Ok(methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let sinr_db = (0..setup.doppler.len())
                .map(|k| {
                    let mean = per_trial.iter().map(|t| t[mi][k]).sum::<f64>() / setup.trials as f64;
                    db(mean)
                })
                .collect();
            SinrCurve {
                method,
                doppler: setup.doppler.clone(),
                sinr_db,
            }
        })
        .collect())
}

/// Noise power from a capture with the transmitter off.
pub fn passive_noise_estimate(cfg: &CCubeConfig, scene: &ClutterScene, n_samples: usize) -> Result<f64> {
    let quiet = scene.passive();
    estimate_noise_power(&simulate_snapshots_on(&cfg.layout(), cfg, &quiet, n_samples)?)
}

/// Integer (transmit, time, receive) coordinates of each vector entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementGrid {
    pub coords: Vec<[i64; 3]>,
}

impl ElementGrid {
    pub fn coarray(l_s: usize, l_t: usize) -> Self {
        let mut coords = Vec::with_capacity((l_s + 1) * (l_s + 1) * (l_t + 1));
        for m in 0..=l_s as i64 {
            for k in 0..=l_t as i64 {
                for n in 0..=l_s as i64 {
                    coords.push([m, k, n]);
                }
            }
        }
        Self { coords }
    }

    pub fn physical(layout: &ArrayLayout) -> Self {
        let mut coords = Vec::with_capacity(layout.dim());
        for &m in &layout.sensors {
            for &k in &layout.pulses {
                for &n in &layout.sensors {
                    coords.push([m, k, n]);
                }
            }
        }
        Self { coords }
    }

    pub fn steer(&self, f: FrequencyTriple) -> CVec {
        CVec::from_iterator(
            self.coords.len(),
            self.coords
                .iter()
                .map(|c| cis(TWO_PI * (f.f_t * c[0] as f64 + f.f_d * c[1] as f64 + f.f_r * c[2] as f64))),
        )
    }
}

/// `v^H X v` for every steering vector of an element grid, folded onto the
/// lag lattice so each evaluation costs one 3-D trigonometric sum.
#[derive(Debug, Clone)]
pub struct LagSpectrum {
    extent: [i64; 3],
    h: Vec<C64>,
}

impl LagSpectrum {
    pub fn new(grid: &ElementGrid, x: &CMat) -> Result<Self> {
        let n = grid.coords.len();
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch(format!("grid of {n} elements vs {}x{}", x.nrows(), x.ncols())));
        }
        let mut extent = [0i64; 3];
        for d in 0..3 {
            let lo = grid.coords.iter().map(|c| c[d]).min().unwrap_or(0);
            let hi = grid.coords.iter().map(|c| c[d]).max().unwrap_or(0);
            extent[d] = hi - lo;
        }
        let size = extent.iter().map(|e| (2 * e + 1) as usize).product();
        let mut h = vec![C64::new(0.0, 0.0); size];
        for (i, ci) in grid.coords.iter().enumerate() {
            for (j, cj) in grid.coords.iter().enumerate() {
                let idx = Self::flat(&extent, [cj[0] - ci[0], cj[1] - ci[1], cj[2] - ci[2]]);
                h[idx] += x[(i, j)];
            }
        }
        Ok(Self { extent, h })
    }

    fn flat(extent: &[i64; 3], lag: [i64; 3]) -> usize {
        let w = extent.map(|e| 2 * e + 1);
        (((lag[0] + extent[0]) * w[1] + (lag[1] + extent[1])) * w[2] + (lag[2] + extent[2])) as usize
    }

    fn phasors(extent: i64, f: f64) -> Vec<C64> {
        (-extent..=extent).map(|l| cis(TWO_PI * f * l as f64)).collect()
    }

    /// `v^H X v` at one frequency triple.
    pub fn quad_form(&self, f: FrequencyTriple) -> f64 {
        let e0 = Self::phasors(self.extent[0], f.f_t);
        let e1 = Self::phasors(self.extent[1], f.f_d);
        let e2 = Self::phasors(self.extent[2], f.f_r);
        let mut acc = C64::new(0.0, 0.0);
        let mut idx = 0;
        for a in &e0 {
            for b in &e1 {
                let ab = a * b;
                let mut inner = C64::new(0.0, 0.0);
                for c in &e2 {
                    inner += self.h[idx] * c;
                    idx += 1;
                }
                acc += ab * inner;
            }
        }
        acc.re
    }

    /// MVDR power `1 / (v^H R^{-1} v)` when built from an inverse covariance.
    pub fn power(&self, f: FrequencyTriple) -> f64 {
        1.0 / self.quad_form(f)
    }
}

/// Grid of the `(f_T, f_R)` plane with Doppler tied to `β f_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPlane {
    pub f_t: Vec<f64>,
    pub f_r: Vec<f64>,
    pub beta: f64,
}

impl CoupledPlane {
    /// `n_t` transmit bins on `[0, 1)`, `n_r` receive bins on `[-f_max, f_max]`.
    pub fn new(n_t: usize, n_r: usize, f_max: f64, beta: f64) -> Self {
        Self {
            f_t: (0..n_t).map(|i| i as f64 / n_t as f64).collect(),
            f_r: (0..n_r)
                .map(|j| if n_r == 1 { 0.0 } else { -f_max + 2.0 * f_max * j as f64 / (n_r - 1) as f64 })
                .collect(),
            beta,
        }
    }

    pub fn triple(&self, i: usize, j: usize) -> FrequencyTriple {
        FrequencyTriple::new(self.f_t[i], self.beta * self.f_r[j], self.f_r[j])
    }
}

/// MVDR spectrum over the coupled plane, row-major with `f_T` outer.
pub fn mvdr_plane(spec: &LagSpectrum, plane: &CoupledPlane) -> Vec<f64> {
    let n_r = plane.f_r.len();
    (0..plane.f_t.len() * n_r)
        .into_par_iter()
        .map(|idx| spec.power(plane.triple(idx / n_r, idx % n_r)))
        .collect()
}

/// MVDR spectrum on a full `(f_T, f_d, f_R)` lattice, `f_T` outermost.
pub fn mvdr_cube(spec: &LagSpectrum, f_t: &[f64], f_d: &[f64], f_r: &[f64]) -> Vec<f64> {
    let (nd, nr) = (f_d.len(), f_r.len());
    (0..f_t.len() * nd * nr)
        .into_par_iter()
        .map(|idx| {
            let (i, rest) = (idx / (nd * nr), idx % (nd * nr));
            spec.power(FrequencyTriple::new(f_t[i], f_d[rest / nr], f_r[rest % nr]))
        })
        .collect()
}

/// Inverse of `R + loading I` packaged for spectrum evaluation.
pub fn mvdr_spectrum(r: &HermitianCov, grid: &ElementGrid, loading: f64) -> Result<LagSpectrum> {
    let mut m = r.matrix.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(loading, 0.0);
    }
    let inv = DenseInverse::new(&HermitianCov::new(m, r.domain))?;
    LagSpectrum::new(grid, &inv.0)
}

/// Element grid matching a covariance domain.
pub fn grid_for(domain: Domain, layout: &ArrayLayout) -> ElementGrid {
    match domain {
        Domain::Physical { .. } => ElementGrid::physical(layout),
        Domain::CoarraySmoothed { l_s, l_t } | Domain::CoarrayRecovered { l_s, l_t } => ElementGrid::coarray(l_s, l_t),
    }
}

/// Connected regions within `threshold_db` of the peak on an `n_t x n_r`
/// plane (row-major, `f_T` outer). Neighbours are 4-connected, with the
/// transmit axis treated as periodic.
pub fn count_ridges(values: &[f64], n_t: usize, n_r: usize, threshold_db: f64) -> usize {
    assert_eq!(values.len(), n_t * n_r);
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = peak * 10f64.powf(threshold_db / 10.0);
    let mask: Vec<bool> = values.iter().map(|&v| v >= cut).collect();
    let mut label = vec![false; values.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..values.len() {
        if !mask[start] || label[start] {
            continue;
        }
        count += 1;
        label[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (i, j) = (p / n_r, p % n_r);
            let mut nb = vec![((i + 1) % n_t) * n_r + j, ((i + n_t - 1) % n_t) * n_r + j];
            if j + 1 < n_r {
                nb.push(p + 1);
            }
            if j > 0 {
                nb.push(p - 1);
            }
            for q in nb {
                if mask[q] && !label[q] {
                    label[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    count
}
