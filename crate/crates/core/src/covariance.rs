//! Difference-coarray lifting of a physical covariance.
//!
//! The pipeline is `virtualize -> spatial_smooth -> recover_coarray_cov`.
//! For an exact covariance the smoothed matrix equals the square of the
//! coarray covariance `Σ σ² v̆ v̆^H + σ_n² I`; with the per-lag averaging used
//! here the proportionality constant is exactly one, but nothing downstream
//! relies on that: MVDR weights and rank counts are invariant to the scale of
//! the recovered matrix.
//!
//! Coarray vectors are ordered transmit-lag major, then time lag, then receive
//! lag, the same nesting as the physical `a_T ⊗ b ⊗ a_R`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::coprime::LagStructure;
use crate::error::{Error, Result};
use crate::linalg::{cis, gram, herm_eigen, hermitian_defect, hermitize, trace_re, CMat, CVec, C64, TWO_PI};
use crate::scene::{CCubeConfig, ClutterScene, FrequencyTriple};

/// Which space a covariance lives in, with the dimensions that fix its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Physical { sensors: usize, pulses: usize },
    CoarraySmoothed { l_s: usize, l_t: usize },
    CoarrayRecovered { l_s: usize, l_t: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match *self {
            Domain::Physical { sensors, pulses } => sensors * sensors * pulses,
            Domain::CoarraySmoothed { l_s, l_t } | Domain::CoarrayRecovered { l_s, l_t } => {
                (l_s + 1) * (l_s + 1) * (l_t + 1)
            }
        }
    }

    fn tag(&self) -> (u8, usize, usize) {
        match *self {
            Domain::Physical { sensors, pulses } => (0, sensors, pulses),
            Domain::CoarraySmoothed { l_s, l_t } => (1, l_s, l_t),
            Domain::CoarrayRecovered { l_s, l_t } => (2, l_s, l_t),
        }
    }

    fn from_tag(tag: u8, a: usize, b: usize) -> Result<Self> {
        Ok(match tag {
            0 => Domain::Physical { sensors: a, pulses: b },
            1 => Domain::CoarraySmoothed { l_s: a, l_t: b },
            2 => Domain::CoarrayRecovered { l_s: a, l_t: b },
            t => return Err(Error::Format(format!("unknown domain tag {t}"))),
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Domain::Physical { .. } => "physical",
            Domain::CoarraySmoothed { .. } => "coarray-smoothed",
            Domain::CoarrayRecovered { .. } => "coarray-recovered",
        }
    }
}

/// Complex Hermitian covariance tagged with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianCov {
    pub matrix: CMat,
    pub domain: Domain,
}

impl HermitianCov {
    /// Wraps a matrix without validation.
    pub fn new(matrix: CMat, domain: Domain) -> Self {
        Self { matrix, domain }
    }

    /// Wraps a matrix after checking its size and Hermitian symmetry.
    pub fn checked(matrix: CMat, domain: Domain) -> Result<Self> {
        let n = domain.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} domain needs {n}x{n}, got {}x{}",
                domain.name(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if hermitian_defect(&matrix) > 1e-10 {
            return Err(Error::DimensionMismatch("matrix is not Hermitian".into()));
        }
        Ok(Self { matrix, domain })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }

    /// Binary container: `b"HCOV"`, `u32` version, `u8` domain tag, two `u64`
    /// dimensions, `u64` order `n`, then `n * n` entries row-major as
    /// little-endian `f64` pairs `(re, im)`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (tag, a, b) = self.domain.tag();
        let n = self.dim();
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[tag])?;
        for v in [a as u64, b as u64, n as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(16 * n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b)?;
        let version = u32::from_le_bytes(u32b);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *d = u64::from_le_bytes(b) as usize;
        }
        let domain = Domain::from_tag(tag[0], dims[0], dims[1])?;
        let n = dims[2];
        if domain.dim() != n {
            return Err(Error::Format(format!("order {n} inconsistent with {}", domain.name())));
        }
        let mut raw = vec![0u8; 16 * n * n];
        r.read_exact(&mut raw)?;
        let f = |k: usize| f64::from_le_bytes(raw[8 * k..8 * k + 8].try_into().unwrap());
        let matrix = CMat::from_fn(n, n, |i, j| {
            let k = 2 * (i * n + j);
            C64::new(f(k), f(k + 1))
        });
        Ok(Self { matrix, domain })
    }

    /// Text form: a `# hcov 1 <domain> <a> <b> <n>` header, then one line per
    /// row holding `re,im` pairs for each column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (_, a, b) = self.domain.tag();
        let n = self.dim();
        writeln!(w, "# hcov {FORMAT_VERSION} {} {a} {b} {n}", self.domain.name())?;
        for i in 0..n {
            let line: Vec<String> = (0..n)
                .map(|j| {
                    let z = self.matrix[(i, j)];
                    format!("{:e},{:e}", z.re, z.im)
                })
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 7 || parts[0] != "#" || parts[1] != "hcov" {
            return Err(Error::Format(format!("bad header {header:?}")));
        }
        if parts[2] != FORMAT_VERSION.to_string() {
            return Err(Error::Format(format!("unsupported version {}", parts[2])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Format(e.to_string()));
        let (a, b, n) = (num(parts[4])?, num(parts[5])?, num(parts[6])?);
        let tag = match parts[3] {
            "physical" => 0,
            "coarray-smoothed" => 1,
            "coarray-recovered" => 2,
            other => return Err(Error::Format(format!("unknown domain {other}"))),
        };
        let domain = Domain::from_tag(tag, a, b)?;
        if domain.dim() != n {
            return Err(Error::Format(format!("order {n} inconsistent with {}", parts[3])));
        }
        let mut matrix = CMat::zeros(n, n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing row {i}")))??;
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Format(e.to_string())))
                .collect::<Result<_>>()?;
            if vals.len() != 2 * n {
                return Err(Error::Format(format!("row {i} has {} values, expected {}", vals.len(), 2 * n)));
            }
            for j in 0..n {
                matrix[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
            }
        }
        Ok(Self { matrix, domain })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(f)
        } else {
            self.write_binary(f)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = BufReader::new(std::fs::File::open(path)?);
        if path.extension().is_some_and(|e| e == "csv") {
            Self::read_csv(f)
        } else {
            Self::read_binary(f)
        }
    }
}

const MAGIC: &[u8; 4] = b"HCOV";
const FORMAT_VERSION: u32 = 1;

/// Contiguous lag vector `z` of the difference coarray.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSnapshot {
    pub z: CVec,
    pub l_s: usize,
    pub l_t: usize,
}

impl VirtualSnapshot {
    /// Position of lag `(l1, l2, l3)`, each taken in `[-L, L]`.
    pub fn index(&self, l1: i64, l2: i64, l3: i64) -> usize {
        lag_index(self.l_s, self.l_t, l1, l2, l3)
    }

    pub fn at(&self, l1: i64, l2: i64, l3: i64) -> C64 {
        self.z[self.index(l1, l2, l3)]
    }

    pub fn center(&self) -> usize {
        (self.z.len() - 1) / 2
    }
}

fn lag_index(l_s: usize, l_t: usize, l1: i64, l2: i64, l3: i64) -> usize {
    let (ls, lt) = (l_s as i64, l_t as i64);
    (((l1 + ls) * (2 * lt + 1) + (l2 + lt)) * (2 * ls + 1) + (l3 + ls)) as usize
}

/// Averages every covariance entry sharing a `(transmit, time, receive)` lag.
pub fn virtualize(r: &HermitianCov, lags_s: &LagStructure, lags_t: &LagStructure) -> Result<VirtualSnapshot> {
    let (p_s, k) = match r.domain {
        Domain::Physical { sensors, pulses } => (sensors, pulses),
        d => {
            return Err(Error::DimensionMismatch(format!(
                "virtualize needs a physical covariance, got {}",
                d.name()
            )))
        }
    };
    if p_s != lags_s.element_count() || k != lags_t.element_count() || r.dim() != p_s * p_s * k {
        return Err(Error::DimensionMismatch(format!(
            "covariance built for {p_s} sensors / {k} pulses, lag structures have {} / {}",
            lags_s.element_count(),
            lags_t.element_count()
        )));
    }
    let (ls, lt) = (lags_s.contiguous_bound as i64, lags_t.contiguous_bound as i64);
    let idx = |m: usize, t: usize, n: usize| (m * k + t) * p_s + n;
    let m = &r.matrix;
    let mut z = Vec::with_capacity(((2 * ls + 1) * (2 * ls + 1) * (2 * lt + 1)) as usize);
    for l1 in -ls..=ls {
        let p1 = lags_s.pairs(l1);
        for l2 in -lt..=lt {
            let p2 = lags_t.pairs(l2);
            for l3 in -ls..=ls {
                let p3 = lags_s.pairs(l3);
                let mut acc = C64::new(0.0, 0.0);
                for &(a1, b1) in p1 {
                    for &(a2, b2) in p2 {
                        for &(a3, b3) in p3 {
                            acc += m[(idx(a1, a2, a3), idx(b1, b2, b3))];
                        }
                    }
                }
                z.push(acc / (p1.len() * p2.len() * p3.len()) as f64);
            }
        }
    }
    Ok(VirtualSnapshot {
        z: CVec::from_vec(z),
        l_s: ls as usize,
        l_t: lt as usize,
    })
}

/// Sum of outer products of every shifted `(L_s+1) x (L_t+1) x (L_s+1)`
/// window of the lag cube.
///
/// Window `s` holds `z[m - s1, k - s2, n - s3]` for `m, n` in `[0, L_s]`,
/// `k` in `[0, L_t]`.
pub fn spatial_smooth(z: &VirtualSnapshot) -> HermitianCov {
    let (ls, lt) = (z.l_s, z.l_t);
    let n = (ls + 1) * (ls + 1) * (lt + 1);
    let mut windows = CMat::zeros(n, n);
    let shifts: Vec<(usize, usize, usize)> = (0..=ls)
        .flat_map(|s1| (0..=lt).flat_map(move |s2| (0..=ls).map(move |s3| (s1, s2, s3))))
        .collect();
    let columns: Vec<CVec> = shifts
        .par_iter()
        .map(|&(s1, s2, s3)| {
            let mut col = CVec::zeros(n);
            let mut i = 0;
            for m in 0..=ls {
                for k in 0..=lt {
                    for r in 0..=ls {
                        col[i] = z.at(m as i64 - s1 as i64, k as i64 - s2 as i64, r as i64 - s3 as i64);
                        i += 1;
                    }
                }
            }
            col
        })
        .collect();
    for (j, c) in columns.iter().enumerate() {
        windows.set_column(j, c);
    }
    HermitianCov::new(hermitize(&gram(&windows)), Domain::CoarraySmoothed { l_s: ls, l_t: lt })
}

/// Principal square root of the smoothed matrix, negative eigenvalues clamped.
///
/// The result is proportional to the coarray covariance; its scale is left
/// unnormalised.
pub fn recover_coarray_cov(rv: &HermitianCov) -> Result<HermitianCov> {
    let (l_s, l_t) = match rv.domain {
        Domain::CoarraySmoothed { l_s, l_t } => (l_s, l_t),
        d => {
            return Err(Error::DimensionMismatch(format!(
                "recovery needs a smoothed coarray matrix, got {}",
                d.name()
            )))
        }
    };
    let eig = herm_eigen(&rv.matrix);
    let trace = rv.trace();
    let min_eig = eig.values.last().copied().unwrap_or(0.0);
    if min_eig < -1e-10 * trace.abs() {
        return Err(Error::NotPsd { min_eig, trace });
    }
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let m = crate::linalg::from_eigen(&roots, &eig.vectors);
    Ok(HermitianCov::new(hermitize(&m), Domain::CoarrayRecovered { l_s, l_t }))
}

/// Full pipeline from a physical covariance of `cfg`'s co-prime layout.
pub fn lift(cfg: &CCubeConfig, r: &HermitianCov) -> Result<HermitianCov> {
    let lags_s = crate::coprime::lag_structure(&cfg.sensor_set);
    let lags_t = crate::coprime::lag_structure(&cfg.pulse_set);
    let z = virtualize(r, &lags_s, &lags_t)?;
    recover_coarray_cov(&spatial_smooth(&z))
}

/// Coarray steering vector `exp(j 2π (f_T m + f_d k + f_R n))` over
/// `m, n` in `[0, L_s]` and `k` in `[0, L_t]`.
pub fn coarray_steer(l_s: usize, l_t: usize, f: FrequencyTriple) -> CVec {
    let n = (l_s + 1) * (l_s + 1) * (l_t + 1);
    let mut v = CVec::zeros(n);
    let mut i = 0;
    for m in 0..=l_s {
        for k in 0..=l_t {
            for r in 0..=l_s {
                v[i] = cis(TWO_PI * (f.f_t * m as f64 + f.f_d * k as f64 + f.f_r * r as f64));
                i += 1;
            }
        }
    }
    v
}

/// Exact coarray covariance `Σ σ² v̆ v̆^H + σ_n² I`, built directly from the
/// scene rather than through the lifting pipeline.
pub fn coarray_analytic(cfg: &CCubeConfig, scene: &ClutterScene, with_noise: bool) -> Result<HermitianCov> {
    scene.validate()?;
    let (l_s, l_t) = (cfg.l_s(), cfg.l_t());
    let n = (l_s + 1) * (l_s + 1) * (l_t + 1);
    let sources = scene.sources(cfg);
    let cols: Vec<CVec> = sources.par_iter().map(|s| coarray_steer(l_s, l_t, s.freq)).collect();
    let mut a = CMat::zeros(n, cols.len());
    let mut weighted = CMat::zeros(n, cols.len());
    for (j, (c, s)) in cols.iter().zip(&sources).enumerate() {
        a.set_column(j, c);
        weighted.set_column(j, &(c * C64::new(s.power, 0.0)));
    }
    let mut r = weighted * a.adjoint();
    if with_noise {
        for i in 0..n {
            r[(i, i)] += C64::new(scene.noise_power, 0.0);
        }
    }
    Ok(HermitianCov::new(hermitize(&r), Domain::CoarrayRecovered { l_s, l_t }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coprime::{build_coprime_set, lag_structure, CoprimePair};
    use crate::scene::analytic_covariance;

    fn cfg() -> CCubeConfig {
        CCubeConfig::reference(3, 0.5, 150.0).unwrap()
    }

    fn lags(c: &CCubeConfig) -> (LagStructure, LagStructure) {
        (lag_structure(&c.sensor_set), lag_structure(&c.pulse_set))
    }

    #[test]
    fn noise_maps_to_center_impulse() {
        let c = cfg();
        let r = analytic_covariance(&c, &ClutterScene::noise_only(2.0, 0)).unwrap();
        let (ls, lt) = lags(&c);
        let z = virtualize(&r, &ls, &lt).unwrap();
        assert_eq!(z.z.len(), 3375);
        assert_eq!(z.center(), z.index(0, 0, 0));
        for (i, v) in z.z.iter().enumerate() {
            let expect = if i == z.center() { 2.0 } else { 0.0 };
            assert!((v - C64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_patch_lags_are_exponentials() {
        let c = cfg();
        let mut scene = ClutterScene::uniform_rings(2, 1, 0.0, 0.0, 0);
        scene.patches[1].power = 1.7;
        scene.patches[0].power = 0.0;
        let r = analytic_covariance(&c, &scene).unwrap();
        let (ls, lt) = lags(&c);
        let z = virtualize(&r, &ls, &lt).unwrap();
        let f = c.clutter_triple(2, scene.patches[1].cos_psi);
        for l1 in -7..=7i64 {
            for l2 in -7..=7i64 {
                for l3 in -7..=7i64 {
                    let expect = cis(TWO_PI * (f.f_t * l1 as f64 + f.f_d * l2 as f64 + f.f_r * l3 as f64)) * 1.7;
                    assert!((z.at(l1, l2, l3) - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_impulse_smooths_to_identity() {
        let mut z = CVec::zeros(3375);
        z[1687] = C64::new(1.0, 0.0);
        let rv = spatial_smooth(&VirtualSnapshot { z, l_s: 7, l_t: 7 });
        assert_eq!(rv.dim(), 512);
        assert!((rv.matrix - CMat::identity(512, 512)).norm() < 1e-14);
        let rec = recover_coarray_cov(&HermitianCov::new(CMat::identity(4, 4), Domain::CoarraySmoothed { l_s: 1, l_t: 0 }))
            .unwrap();
        assert!((rec.matrix - CMat::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn smoothed_matrix_is_square_of_coarray_covariance() {
        let c = cfg();
        let scene = ClutterScene::uniform_rings(2, 5, 20.0, 0.5, 0);
        let r = analytic_covariance(&c, &scene).unwrap();
        let (ls, lt) = lags(&c);
        let rv = spatial_smooth(&virtualize(&r, &ls, &lt).unwrap());
        let rt = coarray_analytic(&c, &scene, true).unwrap();
        let sq = &rt.matrix * &rt.matrix;
        assert!((&rv.matrix - &sq).norm() / rv.matrix.norm() < 1e-10);
        let rec = recover_coarray_cov(&rv).unwrap();
        assert!((&rec.matrix - &rt.matrix).norm() / rt.matrix.norm() < 1e-8);
    }

    #[test]
    fn recovered_eigenvalues_are_square_roots() {
        let a = CMat::from_fn(6, 6, |i, j| C64::new((i * j) as f64 * 0.1, i as f64 - j as f64));
        let rv = HermitianCov::new(&a * a.adjoint(), Domain::CoarraySmoothed { l_s: 1, l_t: 1 });
        let before = crate::linalg::herm_eigenvalues(&rv.matrix);
        let after = crate::linalg::herm_eigenvalues(&recover_coarray_cov(&rv).unwrap().matrix);
        for (b, a) in before.iter().zip(&after) {
            assert!((b.max(0.0).sqrt() - a).abs() < 1e-7 * before[0].sqrt());
        }
    }

    #[test]
    fn indefinite_input_rejected() {
        let mut m = CMat::identity(4, 4);
        m[(3, 3)] = C64::new(-1.0, 0.0);
        let rv = HermitianCov::new(m, Domain::CoarraySmoothed { l_s: 1, l_t: 0 });
        assert!(matches!(recover_coarray_cov(&rv), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn wrong_dimensions_rejected() {
        let set = build_coprime_set(CoprimePair::new(1, 2).unwrap()).unwrap();
        let l = lag_structure(&set);
        let r = HermitianCov::new(CMat::identity(216, 216), Domain::Physical { sensors: 6, pulses: 6 });
        assert!(matches!(virtualize(&r, &l, &l), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn containers_round_trip() {
        let m = CMat::from_fn(8, 8, |i, j| C64::new(i as f64 + 0.25, j as f64 * -1.5e-7));
        let h = HermitianCov::new(m, Domain::CoarrayRecovered { l_s: 1, l_t: 1 });
        let mut bin = Vec::new();
        h.write_binary(&mut bin).unwrap();
        assert_eq!(HermitianCov::read_binary(&bin[..]).unwrap(), h);
        let mut txt = Vec::new();
        h.write_csv(&mut txt).unwrap();
        assert_eq!(HermitianCov::read_csv(&txt[..]).unwrap(), h);
        bin[0] = b'X';
        assert!(matches!(HermitianCov::read_binary(&bin[..]), Err(Error::Format(_))));
    }
}
