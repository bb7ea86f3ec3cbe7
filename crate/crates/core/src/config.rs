//! TOML experiment configuration.
//!
//! Every table is optional; omitted fields take the reference scenario
//! values. Unknown keys are rejected so typos surface as errors with the
//! offending line.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coprime::CoprimePair;
use crate::error::{Error, Result};
use crate::rejection::RegionSpec;
use crate::scene::{CCubeConfig, ClutterScene, FrequencyTriple, PointSource, RadarParams, TargetSpec, SPEED_OF_LIGHT};
use crate::slepian::{BandwidthConvention, BasisOptions};
use crate::stap::{Method, SinrReference};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub radar: RadarSection,
    pub scene: SceneSection,
    pub target: TargetSection,
    pub slepian: SlepianSection,
    pub spectrum: SpectrumSection,
    pub sinr: SinrSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interference: Option<InterferenceSection>,
    pub reject: RejectSection,
    pub bench: BenchSection,
    pub rank_table: RankTableSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarSection {
    /// Co-prime pair `(M_s, N_s)` of the sensor and frequency-offset sets.
    pub sensors: [u64; 2],
    /// Co-prime pair `(M_t, N_t)` of the pulse set.
    pub pulses: [u64; 2],
    pub d_over_lambda: f64,
    pub carrier_hz: f64,
    pub pri_s: f64,
    pub pulse_width_s: f64,
    pub platform_speed: f64,
    pub height_m: f64,
    /// Defaults to `1 / (N_p T)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_f_hz: Option<f64>,
}

impl Default for RadarSection {
    fn default() -> Self {
        Self {
            sensors: [2, 3],
            pulses: [2, 3],
            d_over_lambda: 0.5,
            carrier_hz: 1.0e9,
            pri_s: 0.5e-3,
            pulse_width_s: 1.0e-6,
            platform_speed: 150.0,
            height_m: 6000.0,
            delta_f_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub ambiguities: usize,
    pub patches_per_ring: usize,
    pub cnr_db: f64,
    pub noise_power: f64,
    pub training_samples: usize,
    pub seed: u64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            ambiguities: 3,
            patches_per_ring: 181,
            cnr_db: 40.0,
            noise_power: 1.0,
            training_samples: 500,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub ring: usize,
    pub psi_deg: f64,
    pub velocity: f64,
    pub power: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            ring: 1,
            psi_deg: 60.0,
            velocity: 0.0,
            power: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionName {
    #[default]
    GridCorrected,
    Unscaled,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlepianSection {
    pub convention: ConventionName,
    pub force_approximate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

/// Which covariance the spectra are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovSource {
    #[default]
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub transmit_bins: usize,
    pub receive_bins: usize,
    pub threshold_db: f64,
    pub source: CovSource,
    /// Diagonal loading of the coarray covariances; defaults to the noise power.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loading: Option<f64>,
    /// `(f_T, f_d, f_R)` bins of an optional full spectrum cube.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cube_bins: Option<[usize; 3]>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            transmit_bins: 120,
            receive_bins: 61,
            threshold_db: -10.0,
            source: CovSource::Analytic,
            loading: None,
            cube_bins: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceName {
    #[default]
    Truth,
    Design,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinrSection {
    pub doppler_bins: usize,
    pub trials: usize,
    pub notch_exclusion: f64,
    pub reference: ReferenceName,
    pub methods: Vec<String>,
}

impl Default for SinrSection {
    fn default() -> Self {
        Self {
            doppler_bins: 41,
            trials: 10,
            notch_exclusion: 0.05,
            reference: ReferenceName::Truth,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSection {
    /// `(f_T, f_d, f_R)` of the box center.
    pub center: [f64; 3],
    /// Defaults to `(1/(L_s+1), 1/(L_t+1), 1/(L_s+1))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<[f64; 3]>,
    /// Total interference power over the noise power.
    pub inr_db: f64,
    /// Number of point sources drawn uniformly inside the box.
    pub components: usize,
    /// Per-factor projector ranks; defaults to `⌈ΔP⌉ + 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks: Option<[usize; 3]>,
    /// Number of Kronecker triples kept; defaults to all eligible ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_rank: Option<usize>,
}

impl Default for InterferenceSection {
    fn default() -> Self {
        Self {
            center: [0.1, -0.3, 0.3],
            widths: None,
            inr_db: 30.0,
            components: 64,
            ranks: None,
            total_rank: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RejectSection {
    /// Target Doppler bins across the interference band.
    pub doppler_bins: usize,
    /// Points per axis of the in-region energy lattice.
    pub region_points: usize,
    /// Recompute the weight from the projected covariance instead of
    /// reusing the unprojected one.
    pub projected_weight: bool,
}

impl Default for RejectSection {
    fn default() -> Self {
        Self {
            doppler_bins: 17,
            region_points: 9,
            projected_weight: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// Sensor pairs swept; pulses stay at the radar table's pair.
    pub sensor_pairs: Vec<[u64; 2]>,
    pub repeats: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            sensor_pairs: vec![[1, 2], [1, 3], [2, 3], [2, 5]],
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankCase {
    pub d_over_lambda: f64,
    pub platform_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankTableSection {
    pub cases: Vec<RankCase>,
    pub ambiguities: Vec<usize>,
    /// Eigenvalues of the noise-free covariance at or above this fraction
    /// of the largest count towards the rank.
    pub rel_threshold: f64,
}

impl Default for RankTableSection {
    fn default() -> Self {
        Self {
            cases: vec![
                RankCase {
                    d_over_lambda: 0.5,
                    platform_speed: 150.0,
                },
                RankCase {
                    d_over_lambda: 1.0,
                    platform_speed: 150.0,
                },
            ],
            ambiguities: (2..=10).collect(),
            rel_threshold: 1e-6,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadConfig(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scene;
        if s.ambiguities == 0 {
            return Err(bad("scene.ambiguities must be at least 1"));
        }
        if !(s.noise_power.is_finite() && s.noise_power > 0.0) {
            return Err(bad(format!("scene.noise_power must be positive, got {}", s.noise_power)));
        }
        if !s.cnr_db.is_finite() {
            return Err(bad("scene.cnr_db must be finite"));
        }
        if s.training_samples == 0 {
            return Err(bad("scene.training_samples must be at least 1"));
        }
        let t = &self.target;
        if t.ring == 0 || t.ring > s.ambiguities {
            return Err(bad(format!("target.ring must lie in 1..={}, got {}", s.ambiguities, t.ring)));
        }
        if !(t.power > 0.0 && t.power.is_finite()) {
            return Err(bad("target.power must be positive"));
        }
        let sp = &self.spectrum;
        if sp.transmit_bins < 2 || sp.receive_bins < 2 {
            return Err(bad("spectrum bins must be at least 2 per axis"));
        }
        if !(sp.threshold_db < 0.0) {
            return Err(bad("spectrum.threshold_db must be negative"));
        }
        if let Some(l) = sp.loading {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(bad("spectrum.loading must be non-negative"));
            }
        }
        if let Some(c) = sp.cube_bins {
            if c.contains(&0) {
                return Err(bad("spectrum.cube_bins entries must be positive"));
            }
        }
        let si = &self.sinr;
        if si.doppler_bins < 2 || si.trials == 0 {
            return Err(bad("sinr needs at least 2 Doppler bins and 1 trial"));
        }
        if !(si.notch_exclusion >= 0.0 && si.notch_exclusion < 0.5) {
            return Err(bad("sinr.notch_exclusion must lie in [0, 0.5)"));
        }
        self.sinr_methods()?;
        if let Some(i) = &self.interference {
            if !i.inr_db.is_finite() || i.components == 0 {
                return Err(bad("interference needs finite inr_db and at least one component"));
            }
        }
        if self.reject.doppler_bins < 2 || self.reject.region_points < 2 {
            return Err(bad("reject needs at least 2 Doppler bins and 2 region points"));
        }
        if self.bench.sensor_pairs.is_empty() || self.bench.repeats == 0 {
            return Err(bad("bench needs at least one sensor pair and one repeat"));
        }
        for p in &self.bench.sensor_pairs {
            CoprimePair::new(p[0], p[1])?;
        }
        let rt = &self.rank_table;
        if rt.cases.is_empty() || rt.ambiguities.contains(&0) || !(rt.rel_threshold > 0.0 && rt.rel_threshold < 1.0) {
            return Err(bad("rank_table needs cases, positive ambiguities and rel_threshold in (0, 1)"));
        }
        self.radar_config()?;
        Ok(())
    }

    pub fn radar_params(&self, n_ambiguities: usize, d_over_lambda: f64, v_p: f64) -> RadarParams {
        let r = &self.radar;
        let lambda = SPEED_OF_LIGHT / r.carrier_hz;
        RadarParams {
            d: d_over_lambda * lambda,
            delta_f: r
                .delta_f_hz
                .unwrap_or_else(|| RadarParams::ambiguity_matched_offset(n_ambiguities, r.pri_s)),
            f_b: r.carrier_hz,
            t_pri: r.pri_s,
            t_p: r.pulse_width_s,
            v_p,
            h: r.height_m,
        }
    }

    pub fn radar_config_with(&self, sensors: [u64; 2], n_ambiguities: usize, d_over_lambda: f64, v_p: f64) -> Result<CCubeConfig> {
        let r = &self.radar;
        CCubeConfig::new(
            CoprimePair::new(sensors[0], sensors[1])?,
            CoprimePair::new(r.pulses[0], r.pulses[1])?,
            self.radar_params(n_ambiguities, d_over_lambda, v_p),
        )
    }

    pub fn radar_config(&self) -> Result<CCubeConfig> {
        let r = &self.radar;
        self.radar_config_with(r.sensors, self.scene.ambiguities, r.d_over_lambda, r.platform_speed)
    }

    pub fn target_spec(&self) -> TargetSpec {
        let t = &self.target;
        TargetSpec {
            ring: t.ring,
            psi: t.psi_deg.to_radians(),
            velocity: t.velocity,
            power: t.power,
        }
    }

    /// Clutter rings plus the interference box when configured.
    pub fn clutter_scene(&self, cfg: &CCubeConfig) -> Result<ClutterScene> {
        let s = &self.scene;
        let mut scene = ClutterScene::uniform_rings(s.ambiguities, s.patches_per_ring, s.cnr_db, s.noise_power, s.seed);
        if let Some(i) = &self.interference {
            let region = self.region(cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(u64::MAX);
            let power = 10f64.powf(i.inr_db / 10.0) * s.noise_power / i.components as f64;
            for _ in 0..i.components {
                scene.interference.push(PointSource {
                    freq: region.sample(&mut rng),
                    power,
                });
            }
        }
        scene.validate()?;
        Ok(scene)
    }

    /// Interference box; the default centre when no table is present.
    pub fn region(&self, cfg: &CCubeConfig) -> Result<RegionSpec> {
        let i = self.interference.clone().unwrap_or_default();
        let center = FrequencyTriple::new(i.center[0], i.center[1], i.center[2]);
        let region = match i.widths {
            Some(widths) => RegionSpec { center, widths },
            None => RegionSpec::with_default_widths(center, cfg.l_s(), cfg.l_t()),
        };
        region.validate()?;
        Ok(region)
    }

    pub fn basis_options(&self) -> BasisOptions {
        BasisOptions {
            convention: match self.slepian.convention {
                ConventionName::GridCorrected => BandwidthConvention::GridCorrected,
                ConventionName::Unscaled => BandwidthConvention::Unscaled,
            },
            force_approximate: self.slepian.force_approximate,
            cache_dir: self.slepian.cache_dir.clone(),
        }
    }

    pub fn sinr_methods(&self) -> Result<Vec<Method>> {
        self.sinr
            .methods
            .iter()
            .map(|m| Method::parse(m).ok_or_else(|| bad(format!("unknown SINR method `{m}`"))))
            .collect()
    }

    pub fn sinr_reference(&self) -> SinrReference {
        match self.sinr.reference {
            ReferenceName::Truth => SinrReference::Truth,
            ReferenceName::Design => SinrReference::Design,
        }
    }

    /// Doppler bins spanning `[-0.5, 0.5]`.
    pub fn doppler_grid(&self) -> Vec<f64> {
        let n = self.sinr.doppler_bins;
        (0..n).map(|i| -0.5 + i as f64 / (n - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_reference_scenario() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let radar = cfg.radar_config().unwrap();
        assert_eq!(radar.l_s(), 7);
        assert_eq!(*radar.beta().numer(), 1);
    }

    #[test]
    fn round_trip_preserves_hash() {
        let mut cfg = ExperimentConfig {
            interference: Some(InterferenceSection::default()),
            ..Default::default()
        };
        cfg.spectrum.cube_bins = Some([4, 5, 6]);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.scene.seed += 1;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = ExperimentConfig::from_toml("[scene]\nseed = 3\ncnr = 40\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("cnr"), "{msg}");
    }

    #[test]
    fn semantic_errors() {
        for text in [
            "[radar]\nsensors = [2, 4]\n",
            "[scene]\nambiguities = 0\n",
            "[target]\nring = 5\n",
            "[sinr]\nmethods = [\"bogus\"]\n",
            "[radar]\nplatform_speed = 151.234567\n",
        ] {
            assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::BadConfig(_) | Error::NonCoprime(..))), "{text}");
        }
    }

    #[test]
    fn interference_scene_is_deterministic() {
        let cfg = ExperimentConfig {
            interference: Some(InterferenceSection::default()),
            ..Default::default()
        };
        let radar = cfg.radar_config().unwrap();
        let a = cfg.clutter_scene(&radar).unwrap();
        let b = cfg.clutter_scene(&radar).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.interference.len(), 64);
        let region = cfg.region(&radar).unwrap();
        assert!(a.interference.iter().all(|s| region.contains(s.freq)));
        let total: f64 = a.interference.iter().map(|s| s.power).sum();
        assert!((total - 1000.0).abs() < 1e-9);
    }
}
