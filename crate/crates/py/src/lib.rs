//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers, row-major.

use std::path::PathBuf;

use fda_coarray::cli::{self, Verb};
use fda_coarray::config::ExperimentConfig;
use fda_coarray::coprime::{build_coprime_set, count_distinct_sums as distinct_sums, lag_structure, CoprimePair};
use fda_coarray::covariance::{self, Domain, HermitianCov};
use fda_coarray::linalg::{herm_eigenvalues, CMat, CVec, C64};
use fda_coarray::rank;
use fda_coarray::rejection::{self, RegionSpec};
use fda_coarray::scene::{self, CCubeConfig, ClutterPatch, ClutterScene, FrequencyTriple, PointSource};
use fda_coarray::slepian::{self, BasisBranch, BasisOptions, SlepianBasis};
use fda_coarray::stap;
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(fda_coarray_py, CoarrayError, PyValueError);
create_exception!(fda_coarray_py, ConfigError, CoarrayError);
create_exception!(fda_coarray_py, NumericalError, CoarrayError);

fn to_py(err: fda_coarray::Error) -> PyErr {
    use fda_coarray::Error as E;
    match err {
        E::Io(e) => PyIOError::new_err(e.to_string()),
        E::BadConfig(_) | E::BadScene(_) | E::NonCoprime(..) | E::BadOrder { .. } => ConfigError::new_err(err.to_string()),
        E::NotPsd { .. } | E::SingularGram(_) | E::SingularCore | E::Singular | E::Empty => {
            NumericalError::new_err(err.to_string())
        }
        other => CoarrayError::new_err(other.to_string()),
    }
}

fn rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(data: &[Vec<C64>]) -> PyResult<CMat> {
    let n = data.len();
    let m = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(CMat::from_fn(n, m, |i, j| data[i][j]))
}

fn triple(f: (f64, f64, f64)) -> FrequencyTriple {
    FrequencyTriple::new(f.0, f.1, f.2)
}

/// Sorted indices of the co-prime set `{M i} ∪ {N j}`.
#[pyfunction]
fn coprime_set(m: u64, n: u64) -> PyResult<Vec<i64>> {
    let set = build_coprime_set(CoprimePair::new(m, n).map_err(to_py)?).map_err(to_py)?;
    Ok(set.indices)
}

/// Lags of the contiguous difference segment with the number of pairs
/// realising each one.
#[pyfunction]
fn lag_counts(m: u64, n: u64) -> PyResult<Vec<(i64, usize)>> {
    let set = build_coprime_set(CoprimePair::new(m, n).map_err(to_py)?).map_err(to_py)?;
    let lags = lag_structure(&set);
    let l = lags.contiguous_bound as i64;
    Ok((-l..=l).map(|k| (k, lags.pairs(k).len())).collect())
}

/// `|{m l + n p : 0 <= l <= l_max, 0 <= p <= p_max}|`.
#[pyfunction]
fn count_distinct_sums(m: u64, n: u64, l_max: u64, p_max: u64) -> PyResult<u64> {
    distinct_sums(m, n, l_max, p_max).map_err(to_py)
}

/// Predicted coarray clutter rank for Doppler ratio `beta = m / n`.
#[pyfunction]
fn clutter_rank(l_s: usize, l_t: usize, m: u64, n: u64, n_p: usize) -> PyResult<u64> {
    rank::clutter_rank(l_s, l_t, m, n, n_p).map_err(to_py)
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    cli::PRESETS.iter().map(|(n, _)| *n).collect()
}

#[pyclass(name = "Covariance", module = "fda_coarray_py", from_py_object)]
#[derive(Clone)]
struct PyCovariance {
    inner: HermitianCov,
}

#[pymethods]
impl PyCovariance {
    /// Physical-domain covariance of order `sensors² · pulses`.
    #[staticmethod]
    fn physical(data: Vec<Vec<C64>>, sensors: usize, pulses: usize) -> PyResult<Self> {
        let inner = HermitianCov::checked(from_rows(&data)?, Domain::Physical { sensors, pulses }).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Recovered coarray covariance of order `(l_s+1)² (l_t+1)`.
    #[staticmethod]
    fn coarray(data: Vec<Vec<C64>>, l_s: usize, l_t: usize) -> PyResult<Self> {
        let inner = HermitianCov::checked(from_rows(&data)?, Domain::CoarrayRecovered { l_s, l_t }).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: HermitianCov::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn domain(&self) -> String {
        format!("{:?}", self.inner.domain)
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Eigenvalues in descending order.
    fn eigenvalues(&self) -> Vec<f64> {
        let mut v = herm_eigenvalues(&self.inner.matrix);
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[pyo3(signature = (rel_threshold = 1e-6))]
    fn rank(&self, rel_threshold: f64) -> usize {
        rank::empirical_rank(&self.inner, rel_threshold).0
    }

    fn to_list(&self) -> Vec<Vec<C64>> {
        rows(&self.inner.matrix)
    }

    /// Distortionless MVDR weight for steering vector `v`.
    fn mvdr_weight(&self, v: Vec<C64>) -> PyResult<Vec<C64>> {
        let w = stap::weight_dense(&self.inner, &CVec::from_vec(v)).map_err(to_py)?;
        Ok(w.w.iter().copied().collect())
    }

    /// Output SINR in dB of weight `w` against this covariance as the truth.
    #[pyo3(signature = (w, v, target_power = 1.0))]
    fn sinr_db(&self, w: Vec<C64>, v: Vec<C64>, target_power: f64) -> f64 {
        stap::output_sinr_db(&CVec::from_vec(w), &self.inner.matrix, &CVec::from_vec(v), target_power)
    }

    fn __repr__(&self) -> String {
        format!("Covariance({}, dim={})", self.domain(), self.dim())
    }
}

#[pyclass(name = "Scene", module = "fda_coarray_py", from_py_object)]
#[derive(Clone)]
struct PyScene {
    inner: ClutterScene,
}

#[pymethods]
impl PyScene {
    /// Evenly spaced patches on every ambiguity ring.
    #[staticmethod]
    #[pyo3(signature = (ambiguities, patches_per_ring, cnr_db, noise_power = 1.0, seed = 0))]
    fn uniform_rings(ambiguities: usize, patches_per_ring: usize, cnr_db: f64, noise_power: f64, seed: u64) -> Self {
        Self {
            inner: ClutterScene::uniform_rings(ambiguities, patches_per_ring, cnr_db, noise_power, seed),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (noise_power = 1.0, seed = 0))]
    fn noise_only(noise_power: f64, seed: u64) -> Self {
        Self {
            inner: ClutterScene::noise_only(noise_power, seed),
        }
    }

    fn add_patch(&mut self, ring: usize, cos_psi: f64, power: f64) {
        self.inner.n_ambiguities = self.inner.n_ambiguities.max(ring);
        self.inner.patches.push(ClutterPatch { ring, cos_psi, power });
    }

    /// Point source at `(f_T, f_d, f_R)`.
    fn add_interference(&mut self, freq: (f64, f64, f64), power: f64) {
        self.inner.interference.push(PointSource {
            freq: triple(freq),
            power,
        });
    }

    #[getter]
    fn patch_count(&self) -> usize {
        self.inner.patches.len()
    }

    #[getter]
    fn cnr_db(&self) -> f64 {
        self.inner.cnr_db()
    }

    #[getter]
    fn noise_power(&self) -> f64 {
        self.inner.noise_power
    }
}

#[pyclass(name = "Basis", module = "fda_coarray_py", from_py_object)]
#[derive(Clone)]
struct PyBasis {
    inner: SlepianBasis,
}

#[pymethods]
impl PyBasis {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.r_b()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `"exact"` or `"approximate"`.
    #[getter]
    fn branch(&self) -> &'static str {
        match self.inner.branch {
            BasisBranch::Exact => "exact",
            BasisBranch::Approximate => "approximate",
        }
    }

    #[getter]
    fn half_bandwidth(&self) -> f64 {
        self.inner.w
    }

    fn capture_fraction(&self, cov: &PyCovariance) -> f64 {
        self.inner.capture_fraction(&cov.inner)
    }

    fn to_list(&self) -> Vec<Vec<C64>> {
        rows(&self.inner.v_c())
    }

    /// MVDR weight from the low-rank model of `cov` with white noise `noise_power`.
    fn mvdr_weight(&self, cov: &PyCovariance, noise_power: f64, v: Vec<C64>) -> PyResult<Vec<C64>> {
        let rn = slepian::coarray_noise(self.inner.l_s, self.inner.l_t, noise_power);
        let d = slepian::estimate_dc(&self.inner, &cov.inner, &rn).map_err(to_py)?;
        let inv = slepian::FastInverse::new(&self.inner, &d, &rn).map_err(to_py)?;
        let w = stap::weight(&inv, &CVec::from_vec(v)).map_err(to_py)?;
        Ok(w.w.iter().copied().collect())
    }
}

#[pyclass(name = "Radar", module = "fda_coarray_py", from_py_object)]
#[derive(Clone)]
struct PyRadar {
    inner: CCubeConfig,
}

#[pymethods]
impl PyRadar {
    /// Reference geometry: sensors and pulses `(2, 3)`, 1 GHz carrier,
    /// 0.5 ms PRI, offset matched to `ambiguities`.
    #[staticmethod]
    #[pyo3(signature = (ambiguities, d_over_lambda = 0.5, platform_speed = 150.0))]
    fn reference(ambiguities: usize, d_over_lambda: f64, platform_speed: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CCubeConfig::reference(ambiguities, d_over_lambda, platform_speed).map_err(to_py)?,
        })
    }

    /// Radar described by an experiment config.
    #[staticmethod]
    fn from_config(config: &PyConfig) -> PyResult<Self> {
        Ok(Self {
            inner: config.inner.radar_config().map_err(to_py)?,
        })
    }

    #[getter]
    fn l_s(&self) -> usize {
        self.inner.l_s()
    }

    #[getter]
    fn l_t(&self) -> usize {
        self.inner.l_t()
    }

    /// Doppler ratio as `(numerator, denominator)`.
    #[getter]
    fn beta(&self) -> (u64, u64) {
        let b = self.inner.beta();
        (*b.numer(), *b.denom())
    }

    #[getter]
    fn sensor_indices(&self) -> Vec<i64> {
        self.inner.sensor_set.indices.clone()
    }

    #[getter]
    fn pulse_indices(&self) -> Vec<i64> {
        self.inner.pulse_set.indices.clone()
    }

    fn predicted_rank(&self, ambiguities: usize) -> PyResult<u64> {
        let r = rank::predict(self.inner.l_s(), self.inner.l_t(), self.inner.beta(), ambiguities).map_err(to_py)?;
        Ok(r.total_rank)
    }

    /// `(f_T, f_d, f_R)` of a clutter patch.
    fn clutter_frequencies(&self, ring: usize, cos_psi: f64) -> (f64, f64, f64) {
        let f = self.inner.clutter_triple(ring, cos_psi);
        (f.f_t, f.f_d, f.f_r)
    }

    fn steer(&self, freq: (f64, f64, f64)) -> Vec<C64> {
        self.inner.space_time_range_steer(triple(freq)).iter().copied().collect()
    }

    fn coarray_steer(&self, freq: (f64, f64, f64)) -> Vec<C64> {
        covariance::coarray_steer(self.inner.l_s(), self.inner.l_t(), triple(freq))
            .iter()
            .copied()
            .collect()
    }

    fn covariance(&self, scene: &PyScene) -> PyResult<PyCovariance> {
        Ok(PyCovariance {
            inner: scene::analytic_covariance(&self.inner, &scene.inner).map_err(to_py)?,
        })
    }

    /// Sample covariance of `samples` simulated snapshots.
    fn sample_covariance(&self, scene: &PyScene, samples: usize) -> PyResult<PyCovariance> {
        let y = scene::simulate_snapshots(&self.inner, &scene.inner, samples).map_err(to_py)?;
        let domain = self.inner.layout().domain();
        Ok(PyCovariance {
            inner: scene::sample_covariance(&y, domain).map_err(to_py)?,
        })
    }

    /// Closed-form coarray covariance of `scene`.
    #[pyo3(signature = (scene, with_noise = true))]
    fn coarray_covariance(&self, scene: &PyScene, with_noise: bool) -> PyResult<PyCovariance> {
        Ok(PyCovariance {
            inner: covariance::coarray_analytic(&self.inner, &scene.inner, with_noise).map_err(to_py)?,
        })
    }

    /// Virtualise, smooth and take the principal square root.
    fn lift(&self, cov: &PyCovariance) -> PyResult<PyCovariance> {
        Ok(PyCovariance {
            inner: covariance::lift(&self.inner, &cov.inner).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (ambiguities, force_approximate = false))]
    fn clutter_basis(&self, ambiguities: usize, force_approximate: bool) -> PyResult<PyBasis> {
        let opts = BasisOptions {
            force_approximate,
            ..BasisOptions::default()
        };
        Ok(PyBasis {
            inner: slepian::slepian_clutter_basis(&self.inner, ambiguities, &opts).map_err(to_py)?,
        })
    }

    /// Applies the Kronecker prolate projector for the box `center ± widths/2`
    /// and returns `Π⊥ R Π⊥` with the projector rank.
    #[pyo3(signature = (cov, center, widths = None))]
    fn reject(
        &self,
        cov: &PyCovariance,
        center: (f64, f64, f64),
        widths: Option<(f64, f64, f64)>,
    ) -> PyResult<(PyCovariance, usize)> {
        let (l_s, l_t) = (self.inner.l_s(), self.inner.l_t());
        let region = match widths {
            Some(w) => RegionSpec {
                center: triple(center),
                widths: [w.0, w.1, w.2],
            },
            None => RegionSpec::with_default_widths(triple(center), l_s, l_t),
        };
        let proj = rejection::build_projector(l_s, l_t, &region, region.default_ranks(l_s, l_t), None).map_err(to_py)?;
        let out = rejection::reject(&cov.inner, &proj).map_err(to_py)?;
        Ok((PyCovariance { inner: out }, proj.rank()))
    }
}

#[pyclass(name = "Config", module = "fda_coarray_py", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_toml(toml).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let text = cli::preset(name).ok_or_else(|| ConfigError::new_err(format!("unknown preset {name:?}")))?;
        Self::new(text)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn sha256(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.scene.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.scene.seed = seed;
    }

    /// Runs a CLI verb. Returns `(summary, artifacts)` where `artifacts`
    /// maps file names to bytes; with `out` set, also writes them and the
    /// manifest there.
    #[pyo3(signature = (verb, out = None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        verb: &str,
        out: Option<PathBuf>,
    ) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyDict>)> {
        let verb = Verb::parse(verb).ok_or_else(|| ConfigError::new_err(format!("unknown verb {verb:?}")))?;
        self.inner.validate().map_err(to_py)?;
        let cfg = self.inner.clone();
        let output = py.detach(move || cli::run(verb, &cfg)).map_err(to_py)?;
        if let Some(dir) = out {
            cli::write_outputs(&dir, &self.inner, &output).map_err(to_py)?;
        }
        let summary = py.import("json")?.call_method1("loads", (output.summary.to_string(),))?;
        let files = PyDict::new(py);
        for a in &output.artifacts {
            files.set_item(&a.name, PyBytes::new(py, &a.bytes))?;
        }
        Ok((summary, files))
    }

    fn __repr__(&self) -> String {
        format!("Config(sha256={})", &self.sha256()[..12])
    }
}

#[pymodule]
fn fda_coarray_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CoarrayError", m.py().get_type::<CoarrayError>())?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(coprime_set, m)?)?;
    m.add_function(wrap_pyfunction!(lag_counts, m)?)?;
    m.add_function(wrap_pyfunction!(count_distinct_sums, m)?)?;
    m.add_function(wrap_pyfunction!(clutter_rank, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_class::<PyCovariance>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyRadar>()?;
    m.add_class::<PyConfig>()?;
    Ok(())
}
