//! Radar geometry, steering vectors and physical-domain snapshot synthesis.
//!
//! Snapshots are stacked transmit-major: entry `(m, k, n)` of a
//! space-time-range vector sits at `(m K + k) P_s + n`, matching
//! `a_T ⊗ b ⊗ a_R`. Range dependence inside an ambiguity region is assumed
//! compensated, so every patch of region `p` shares the transmit frequency
//! `-2 Δf r_u (p - 1) / c`.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::coprime::{build_coprime_set, CoprimePair, CoprimeSet};
use crate::covariance::{Domain, HermitianCov};
use crate::error::{Error, Result};
use crate::linalg::{exp_vector, kron_vec, CMat, CVec, C64};

/// Propagation speed used throughout; the reference scenarios are specified
/// with `c = 3e8` so that `beta = 2 v T / d` is an exact ratio.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Normalised transmit (range), Doppler and receive spatial frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyTriple {
    pub f_t: f64,
    pub f_d: f64,
    pub f_r: f64,
}

impl FrequencyTriple {
    pub const fn new(f_t: f64, f_d: f64, f_r: f64) -> Self {
        Self { f_t, f_d, f_r }
    }
}

/// Physical radar and platform parameters, SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarParams {
    /// Unit inter-element spacing `d` [m].
    pub d: f64,
    /// Unit frequency offset `Δf` [Hz].
    pub delta_f: f64,
    /// Reference carrier `f_b` [Hz].
    pub f_b: f64,
    /// Unit pulse repetition interval `T` [s].
    pub t_pri: f64,
    /// Pulse duration `T_p` [s].
    pub t_p: f64,
    /// Platform speed [m/s].
    pub v_p: f64,
    /// Platform height [m].
    pub h: f64,
}

impl RadarParams {
    /// Smallest positive frequency offset with `Δf ≡ 1/N_p (mod 1/T)`.
    pub fn ambiguity_matched_offset(n_ambiguities: usize, t_pri: f64) -> f64 {
        1.0 / (n_ambiguities as f64 * t_pri)
    }
}

/// Co-prime sensors, frequency offsets and pulses plus platform constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CCubeConfig {
    pub sensor_set: CoprimeSet,
    pub pulse_set: CoprimeSet,
    pub params: RadarParams,
    beta: Ratio<u64>,
}

/// Integer element positions (units of `d`) and pulse start times (units of `T`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayLayout {
    pub sensors: Vec<i64>,
    pub pulses: Vec<i64>,
}

impl ArrayLayout {
    pub fn uniform(sensors: usize, pulses: usize) -> Self {
        Self {
            sensors: (0..sensors as i64).collect(),
            pulses: (0..pulses as i64).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sensors.len() * self.sensors.len() * self.pulses.len()
    }

    pub fn transmit(&self, f_t: f64) -> CVec {
        exp_vector(&self.sensors, f_t)
    }

    pub fn receive(&self, f_r: f64) -> CVec {
        exp_vector(&self.sensors, f_r)
    }

    pub fn time(&self, f_d: f64) -> CVec {
        exp_vector(&self.pulses, f_d)
    }

    /// `a_T(f_T) ⊗ b(f_d) ⊗ a_R(f_R)`.
    pub fn steer(&self, f: FrequencyTriple) -> CVec {
        kron_vec(&kron_vec(&self.transmit(f.f_t), &self.time(f.f_d)), &self.receive(f.f_r))
    }

    pub fn domain(&self) -> Domain {
        Domain::Physical {
            sensors: self.sensors.len(),
            pulses: self.pulses.len(),
        }
    }
}

/// Best rational approximation with a bounded denominator.
fn rational_approx(x: f64, max_den: u64, rel_tol: f64) -> Option<Ratio<u64>> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    // continued-fraction convergents
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > u32::MAX as f64 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= rel_tol * x {
            return (h1 > 0).then(|| Ratio::new(h1, k1));
        }
        let frac = r - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

impl CCubeConfig {
    pub fn new(sensors: CoprimePair, pulses: CoprimePair, params: RadarParams) -> Result<Self> {
        let sensor_set = build_coprime_set(sensors)?;
        let pulse_set = build_coprime_set(pulses)?;
        let p = &params;
        if !(p.d > 0.0) {
            return Err(Error::BadConfig(format!("element spacing d must be positive, got {}", p.d)));
        }
        if !(p.f_b > 0.0) {
            return Err(Error::BadConfig(format!("carrier must be positive, got {}", p.f_b)));
        }
        if !(p.t_p > 0.0 && p.t_pri > p.t_p) {
            return Err(Error::BadConfig(format!(
                "need PRI > pulse width > 0, got T = {}, T_p = {}",
                p.t_pri, p.t_p
            )));
        }
        if !(p.delta_f.is_finite() && p.v_p.is_finite() && p.h.is_finite()) {
            return Err(Error::BadConfig("non-finite radar parameter".into()));
        }
        let ratio = 2.0 * p.v_p * p.t_pri / p.d;
        let beta = rational_approx(ratio, 1000, 1e-9).ok_or_else(|| {
            Error::BadConfig(format!(
                "beta = 2 v T / d = {ratio} is not a positive ratio of small co-prime integers"
            ))
        })?;
        Ok(Self {
            sensor_set,
            pulse_set,
            params,
            beta,
        })
    }

    /// The reference scenario: `(2, 3)` sensors and pulses, `T = 0.5 ms`,
    /// `T_p = 1 us`, `f_b = 1 GHz`, `H = 6 km`, `Δf = 1/(N_p T)`.
    pub fn reference(n_ambiguities: usize, d_over_lambda: f64, v_p: f64) -> Result<Self> {
        let t_pri = 0.5e-3;
        let f_b = 1.0e9;
        let lambda = SPEED_OF_LIGHT / f_b;
        let params = RadarParams {
            d: d_over_lambda * lambda,
            delta_f: RadarParams::ambiguity_matched_offset(n_ambiguities, t_pri),
            f_b,
            t_pri,
            t_p: 1.0e-6,
            v_p,
            h: 6000.0,
        };
        Self::new(CoprimePair::new(2, 3)?, CoprimePair::new(2, 3)?, params)
    }

    pub fn lambda(&self) -> f64 {
        SPEED_OF_LIGHT / self.params.f_b
    }

    /// Maximum unambiguous range `c T / 2`.
    pub fn r_u(&self) -> f64 {
        SPEED_OF_LIGHT * self.params.t_pri / 2.0
    }

    /// `beta = 2 v_p T / d` as a reduced fraction `M / N`.
    pub fn beta(&self) -> Ratio<u64> {
        self.beta
    }

    pub fn beta_f64(&self) -> f64 {
        *self.beta.numer() as f64 / *self.beta.denom() as f64
    }

    pub fn d_over_lambda(&self) -> f64 {
        self.params.d / self.lambda()
    }

    pub fn p_s(&self) -> usize {
        self.sensor_set.cardinality()
    }

    pub fn k(&self) -> usize {
        self.pulse_set.cardinality()
    }

    pub fn l_s(&self) -> usize {
        self.sensor_set.pair.contiguous_bound()
    }

    pub fn l_t(&self) -> usize {
        self.pulse_set.pair.contiguous_bound()
    }

    pub fn layout(&self) -> ArrayLayout {
        ArrayLayout {
            sensors: self.sensor_set.indices.clone(),
            pulses: self.pulse_set.indices.clone(),
        }
    }

    /// Uniform FDA comparator with the same element and pulse counts.
    pub fn uniform_layout(&self) -> ArrayLayout {
        ArrayLayout::uniform(self.p_s(), self.k())
    }

    /// Compensated transmit frequency of ambiguity region `p` (1-based).
    pub fn transmit_frequency(&self, p: usize) -> f64 {
        -2.0 * self.params.delta_f * self.r_u() * (p as f64 - 1.0) / SPEED_OF_LIGHT
    }

    pub fn receive_frequency(&self, cos_psi: f64) -> f64 {
        self.d_over_lambda() * cos_psi
    }

    pub fn clutter_doppler(&self, cos_psi: f64) -> f64 {
        2.0 * self.params.v_p * self.params.t_pri * cos_psi / self.lambda()
    }

    /// Normalised Doppler of a scatterer with radial velocity `v`.
    pub fn doppler_of_velocity(&self, v: f64) -> f64 {
        2.0 * v * self.params.t_pri / self.lambda()
    }

    pub fn clutter_triple(&self, ring: usize, cos_psi: f64) -> FrequencyTriple {
        FrequencyTriple::new(
            self.transmit_frequency(ring),
            self.clutter_doppler(cos_psi),
            self.receive_frequency(cos_psi),
        )
    }

    pub fn steer_transmit(&self, f_t: f64) -> CVec {
        self.layout().transmit(f_t)
    }

    pub fn steer_receive(&self, f_r: f64) -> CVec {
        self.layout().receive(f_r)
    }

    pub fn steer_time(&self, f_d: f64) -> CVec {
        self.layout().time(f_d)
    }

    pub fn space_time_range_steer(&self, f: FrequencyTriple) -> CVec {
        self.layout().steer(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterPatch {
    /// Ambiguity region, 1-based.
    pub ring: usize,
    pub cos_psi: f64,
    pub power: f64,
}

/// A point source at an arbitrary (uncoupled) frequency triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub freq: FrequencyTriple,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    /// Ambiguity region of the target, 1-based.
    pub ring: usize,
    /// Conic angle [rad].
    pub psi: f64,
    /// Radial velocity [m/s].
    pub velocity: f64,
    /// Target power `σ_t²`.
    pub power: f64,
}

impl TargetSpec {
    pub fn triple(&self, cfg: &CCubeConfig) -> FrequencyTriple {
        FrequencyTriple::new(
            cfg.transmit_frequency(self.ring),
            cfg.doppler_of_velocity(self.velocity),
            cfg.receive_frequency(self.psi.cos()),
        )
    }
}

/// Source with the frequencies realised for a particular configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceMeta {
    /// Ambiguity region for clutter patches, `None` for interference.
    pub ring: Option<usize>,
    pub freq: FrequencyTriple,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterScene {
    pub n_ambiguities: usize,
    pub patches: Vec<ClutterPatch>,
    pub interference: Vec<PointSource>,
    pub noise_power: f64,
    pub rng_seed: u64,
    pub target: Option<TargetSpec>,
}

impl ClutterScene {
    /// `n_patches` patches per ring with cosines uniformly spaced in
    /// `(-1, 1)`, shifted by a per-ring fraction of the spacing so that no two
    /// patches share a cosine. Total clutter power is `cnr * noise_power`,
    /// split evenly.
    pub fn uniform_rings(
        n_ambiguities: usize,
        n_patches: usize,
        cnr_db: f64,
        noise_power: f64,
        rng_seed: u64,
    ) -> Self {
        let total = 10f64.powf(cnr_db / 10.0) * noise_power;
        let count = n_ambiguities * n_patches;
        let power = if count == 0 { 0.0 } else { total / count as f64 };
        let mut patches = Vec::with_capacity(count);
        for p in 1..=n_ambiguities {
            let jitter = 0.5 * ((p - 1) as f64 / n_ambiguities as f64 - 0.5);
            for q in 0..n_patches {
                let cos_psi = -1.0 + 2.0 * (q as f64 + 0.5 + jitter) / n_patches as f64;
                patches.push(ClutterPatch {
                    ring: p,
                    cos_psi,
                    power,
                });
            }
        }
        Self {
            n_ambiguities,
            patches,
            interference: Vec::new(),
            noise_power,
            rng_seed,
            target: None,
        }
    }

    pub fn noise_only(noise_power: f64, rng_seed: u64) -> Self {
        Self {
            n_ambiguities: 1,
            patches: Vec::new(),
            interference: Vec::new(),
            noise_power,
            rng_seed,
            target: None,
        }
    }

    pub fn with_target(mut self, target: TargetSpec) -> Self {
        self.target = Some(target);
        self
    }

    pub fn clutter_power(&self) -> f64 {
        self.patches.iter().map(|p| p.power).sum()
    }

    /// Clutter-to-noise ratio `Σσ²/σ_n²` in dB.
    pub fn cnr_db(&self) -> f64 {
        10.0 * (self.clutter_power() / self.noise_power).log10()
    }

    /// Same scene without clutter or interference, used for passive noise capture.
    pub fn passive(&self) -> Self {
        Self {
            n_ambiguities: self.n_ambiguities,
            patches: Vec::new(),
            interference: Vec::new(),
            noise_power: self.noise_power,
            rng_seed: self.rng_seed ^ 0x05ee_d0f0_015e,
            target: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ambiguities == 0 {
            return Err(Error::BadScene("need at least one ambiguity region".into()));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::BadScene(format!("noise power {} invalid", self.noise_power)));
        }
        for p in &self.patches {
            if p.ring == 0 || p.ring > self.n_ambiguities {
                return Err(Error::BadScene(format!(
                    "patch ring {} outside [1, {}]",
                    p.ring, self.n_ambiguities
                )));
            }
            if !(p.power.is_finite() && p.power >= 0.0) {
                return Err(Error::BadScene(format!("patch power {} invalid", p.power)));
            }
            if !(-1.0..=1.0).contains(&p.cos_psi) {
                return Err(Error::BadScene(format!("cos(psi) = {} outside [-1, 1]", p.cos_psi)));
            }
        }
        let mut cosines: Vec<f64> = self.patches.iter().map(|p| p.cos_psi).collect();
        cosines.sort_by(f64::total_cmp);
        if cosines.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::BadScene("patch cone-angle cosines must be distinct".into()));
        }
        for s in &self.interference {
            if !(s.power.is_finite() && s.power >= 0.0) {
                return Err(Error::BadScene(format!("interference power {} invalid", s.power)));
            }
        }
        if let Some(t) = &self.target {
            if t.ring == 0 || t.ring > self.n_ambiguities {
                return Err(Error::BadScene(format!(
                    "target ring {} outside [1, {}]",
                    t.ring, self.n_ambiguities
                )));
            }
        }
        Ok(())
    }

    /// Clutter patches and interference with their realised frequencies.
    pub fn sources(&self, cfg: &CCubeConfig) -> Vec<SourceMeta> {
        let clutter = self.patches.iter().map(|p| SourceMeta {
            ring: Some(p.ring),
            freq: cfg.clutter_triple(p.ring, p.cos_psi),
            power: p.power,
        });
        let jam = self.interference.iter().map(|s| SourceMeta {
            ring: None,
            freq: s.freq,
            power: s.power,
        });
        clutter.chain(jam).collect()
    }
}

fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Steering vectors of every source as columns, with their powers.
fn steering_matrix(layout: &ArrayLayout, sources: &[SourceMeta]) -> (CMat, Vec<f64>) {
    let dim = layout.dim();
    let mut s = CMat::zeros(dim, sources.len());
    sources
        .par_iter()
        .map(|src| layout.steer(src.freq))
        .collect::<Vec<_>>()
        .into_iter()
        .enumerate()
        .for_each(|(j, v)| s.set_column(j, &v));
    (s, sources.iter().map(|s| s.power).collect())
}

/// I.i.d. training snapshots on the co-prime layout.
pub fn simulate_snapshots(cfg: &CCubeConfig, scene: &ClutterScene, n_samples: usize) -> Result<Vec<CVec>> {
    simulate_snapshots_on(&cfg.layout(), cfg, scene, n_samples)
}

/// I.i.d. training snapshots on an arbitrary layout.
///
/// Reflectivities are redrawn for every sample. Sample `i` uses ChaCha stream
/// `i` of the scene seed, so results do not depend on the thread count.
pub fn simulate_snapshots_on(
    layout: &ArrayLayout,
    cfg: &CCubeConfig,
    scene: &ClutterScene,
    n_samples: usize,
) -> Result<Vec<CVec>> {
    scene.validate()?;
    if n_samples == 0 {
        return Err(Error::Empty);
    }
    let sources = scene.sources(cfg);
    let (steer, powers) = steering_matrix(layout, &sources);
    let dim = layout.dim();
    let noise = scene.noise_power;
    Ok((0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
            rng.set_stream(i as u64);
            let rho = CVec::from_iterator(powers.len(), powers.iter().map(|&p| complex_normal(&mut rng, p)));
            let mut y = &steer * rho;
            if noise > 0.0 {
                for k in 0..dim {
                    y[k] += complex_normal(&mut rng, noise);
                }
            }
            y
        })
        .collect())
}

/// `Σ σ² v v^H + σ_n² I` on the co-prime layout.
pub fn analytic_covariance(cfg: &CCubeConfig, scene: &ClutterScene) -> Result<HermitianCov> {
    analytic_covariance_on(&cfg.layout(), cfg, scene)
}

pub fn analytic_covariance_on(layout: &ArrayLayout, cfg: &CCubeConfig, scene: &ClutterScene) -> Result<HermitianCov> {
    scene.validate()?;
    let sources = scene.sources(cfg);
    let (mut steer, powers) = steering_matrix(layout, &sources);
    let plain = steer.clone();
    for (j, p) in powers.iter().enumerate() {
        steer.column_mut(j).scale_mut(*p);
    }
    let mut r = steer * plain.adjoint();
    for k in 0..layout.dim() {
        r[(k, k)] += C64::new(scene.noise_power, 0.0);
    }
    Ok(HermitianCov::new(crate::linalg::hermitize(&r), layout.domain()))
}

/// `(1/L) Σ y y^H`.
pub fn sample_covariance(samples: &[CVec], domain: Domain) -> Result<HermitianCov> {
    let first = samples.first().ok_or(Error::Empty)?;
    let dim = first.len();
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch("samples of unequal length".into()));
    }
    let y = CMat::from_columns(samples);
    let r = crate::linalg::gram(&y) / C64::new(samples.len() as f64, 0.0);
    HermitianCov::checked(crate::linalg::hermitize(&r), domain)
}

/// Average per-element power of a capture; the passive-mode noise estimate.
pub fn estimate_noise_power(samples: &[CVec]) -> Result<f64> {
    let first = samples.first().ok_or(Error::Empty)?;
    let total: f64 = samples.iter().map(|s| s.norm_squared()).sum();
    Ok(total / (samples.len() * first.len()) as f64)
}
