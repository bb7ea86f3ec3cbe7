//! Experiment verbs, output artifacts and the command-line front end.
//!
//! Each verb turns an [`ExperimentConfig`] into a set of in-memory artifacts
//! plus a JSON summary. [`write_outputs`] stores them and a `manifest.json`
//! listing every file with its SHA-256, the config hash and the seed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{CovSource, ExperimentConfig, InterferenceSection};
use crate::covariance::{coarray_analytic, coarray_steer, lift, HermitianCov};
use crate::error::{Error, Result};
use crate::linalg::{CMat, Flops, C64};
use crate::rank::{empirical_rank, predict};
use crate::rejection::{build_projector, reject, sinr_one_sided};
use crate::scene::{
    analytic_covariance_on, sample_covariance, simulate_snapshots_on, CCubeConfig, ClutterScene, FrequencyTriple,
};
use crate::slepian::{
    coarray_noise, estimate_dc, estimate_dc_counted, fast_inverse_cost, slepian_clutter_basis, DenseInverse,
    FastInverse,
};
use crate::stap::{
    count_ridges, db, mvdr_cube, mvdr_plane, mvdr_spectrum, output_sinr, passive_noise_estimate, sinr_curves, weight,
    weight_dense, CoupledPlane, ElementGrid, LagSpectrum, Method, SinrSetup,
};

/// Shipped configurations, one per reproduced experiment.
pub const PRESETS: &[(&str, &str)] = &[
    ("spectrum-np3", include_str!("../presets/spectrum-np3.toml")),
    ("spectrum-np6", include_str!("../presets/spectrum-np6.toml")),
    ("rank-table", include_str!("../presets/rank-table.toml")),
    ("sinr", include_str!("../presets/sinr.toml")),
    ("reject", include_str!("../presets/reject.toml")),
    ("bench", include_str!("../presets/bench.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Spectrum,
    RankTable,
    Sinr,
    Reject,
    Bench,
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Spectrum => "spectrum",
            Verb::RankTable => "rank-table",
            Verb::Sinr => "sinr",
            Verb::Reject => "reject",
            Verb::Bench => "bench",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Verb::Spectrum, Verb::RankTable, Verb::Sinr, Verb::Reject, Verb::Bench]
            .into_iter()
            .find(|v| v.name() == name)
    }

    pub fn default_preset(&self) -> &'static str {
        match self {
            Verb::Spectrum => "spectrum-np3",
            other => other.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, body: String) -> Self {
        Self {
            name: name.to_string(),
            bytes: body.into_bytes(),
        }
    }

    fn json(name: &str, value: &Value) -> Self {
        let mut body = serde_json::to_string_pretty(value).expect("json value serialises");
        body.push('\n');
        Self::text(name, body)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub verb: Verb,
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

pub fn run(verb: Verb, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (artifacts, summary) = match verb {
        Verb::Spectrum => spectrum(cfg)?,
        Verb::RankTable => rank_table(cfg)?,
        Verb::Sinr => sinr(cfg)?,
        Verb::Reject => reject_verb(cfg)?,
        Verb::Bench => bench(cfg)?,
    };
    Ok(RunOutput {
        verb,
        artifacts,
        summary,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the artifacts, the resolved `config.toml` and `manifest.json`
/// into `dir`. Returns the manifest path.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let config_text = cfg.to_toml();
    let mut files = vec![Artifact::text("config.toml", config_text)];
    files.extend(out.artifacts.iter().cloned());
    let mut listed = Vec::with_capacity(files.len());
    for a in &files {
        fs::write(dir.join(&a.name), &a.bytes)?;
        listed.push(json!({
            "file": a.name,
            "sha256": sha256_hex(&a.bytes),
            "bytes": a.bytes.len(),
        }));
    }
    let manifest = json!({
        "verb": out.verb.name(),
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": cfg.hash(),
        "seed": cfg.scene.seed,
        "outputs": listed,
        "summary": out.summary,
    });
    let path = dir.join("manifest.json");
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    body.push('\n');
    fs::write(&path, body)?;
    Ok(path)
}

/// Process exit status for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonCoprime(..)
        | Error::BadOrder { .. }
        | Error::BadConfig(_)
        | Error::BadScene(_)
        | Error::UnsupportedSpacing { .. }
        | Error::BadBandwidth(_)
        | Error::RankTooLarge { .. } => 2,
        Error::NotPsd { .. } | Error::SingularGram(_) | Error::SingularCore | Error::Singular | Error::Empty => 3,
        Error::DimensionMismatch(_) | Error::Format(_) | Error::Io(_) => 1,
    }
}

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn f(x: f64) -> String {
    format!("{x}")
}

// --- spectrum --------------------------------------------------------------

struct SpectrumInputs {
    physical: HermitianCov,
    /// Coarray covariance the FD spectrum is drawn from, loading included.
    coarray: HermitianCov,
    /// Coarray covariance with noise, input to the DPSS fit.
    coarray_full: HermitianCov,
    noise: f64,
}

fn spectrum_inputs(cfg: &ExperimentConfig, radar: &CCubeConfig, scene: &ClutterScene) -> Result<SpectrumInputs> {
    let uniform = radar.uniform_layout();
    let loading = cfg.spectrum.loading.unwrap_or(cfg.scene.noise_power);
    let n = cfg.scene.training_samples;
    let (physical, mut coarray, coarray_full, noise) = match cfg.spectrum.source {
        CovSource::Analytic => (
            analytic_covariance_on(&uniform, radar, scene)?,
            coarray_analytic(radar, scene, false)?,
            coarray_analytic(radar, scene, true)?,
            cfg.scene.noise_power,
        ),
        CovSource::Sampled => {
            let y = simulate_snapshots_on(&uniform, radar, scene, n)?;
            let physical = sample_covariance(&y, uniform.domain())?;
            let layout = radar.layout();
            let lifted = lift(radar, &sample_covariance(&simulate_snapshots_on(&layout, radar, scene, n)?, layout.domain())?)?;
            let noise = passive_noise_estimate(radar, scene, n)?;
            (physical, lifted.clone(), lifted, noise)
        }
    };
    for i in 0..coarray.dim() {
        coarray.matrix[(i, i)] += C64::new(loading, 0.0);
    }
    Ok(SpectrumInputs {
        physical,
        coarray,
        coarray_full,
        noise,
    })
}

/// MVDR spectra of the uniform physical array, the coarray and the DPSS
/// model over the `(f_T, f_R)` plane with Doppler tied to `β f_R`.
fn spectrum(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Value)> {
    let radar = cfg.radar_config()?;
    let scene = cfg.clutter_scene(&radar)?;
    let (l_s, l_t) = (radar.l_s(), radar.l_t());
    let inputs = spectrum_inputs(cfg, &radar, &scene)?;
    let basis = slepian_clutter_basis(&radar, scene.n_ambiguities, &cfg.basis_options())?;
    let rn = coarray_noise(l_s, l_t, inputs.noise);
    let d = estimate_dc(&basis, &inputs.coarray_full, &rn)?;
    let fast = FastInverse::new(&basis, &d, &rn)?;

    let coarray_grid = ElementGrid::coarray(l_s, l_t);
    let spectra: Vec<(&str, LagSpectrum)> = vec![
        (
            "physical",
            mvdr_spectrum(&inputs.physical, &ElementGrid::physical(&radar.uniform_layout()), 0.0)?,
        ),
        ("coarray", mvdr_spectrum(&inputs.coarray, &coarray_grid, 0.0)?),
        ("dpss", LagSpectrum::new(&coarray_grid, &fast.to_dense(&Flops::new()))?),
    ];

    let sp = &cfg.spectrum;
    let f_max = radar.d_over_lambda().min(0.5);
    let plane = CoupledPlane::new(sp.transmit_bins, sp.receive_bins, f_max, radar.beta_f64());
    let mut artifacts = Vec::new();
    let mut ridges = BTreeMap::new();
    for (name, spec) in &spectra {
        let values = mvdr_plane(spec, &plane);
        let count = count_ridges(&values, sp.transmit_bins, sp.receive_bins, sp.threshold_db);
        let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ridges.insert(name.to_string(), json!({ "ridges": count, "peak": peak }));
        let mut csv = String::from("f_t,f_d,f_r,power,power_db\n");
        for i in 0..plane.f_t.len() {
            for j in 0..plane.f_r.len() {
                let t = plane.triple(i, j);
                let p = values[i * plane.f_r.len() + j];
                push_row(&mut csv, &[f(t.f_t), f(t.f_d), f(t.f_r), f(p), f(db(p / peak))]);
            }
        }
        artifacts.push(Artifact::text(&format!("spectrum_{name}.csv"), csv));
        if let Some([nt, nd, nr]) = sp.cube_bins {
            let axis = |n: usize, lo: f64| -> Vec<f64> { (0..n).map(|i| lo + i as f64 / n as f64).collect() };
            let (ft, fd, fr) = (axis(nt, 0.0), axis(nd, -0.5), axis(nr, -0.5));
            let cube = mvdr_cube(spec, &ft, &fd, &fr);
            let mut csv = String::from("f_t,f_d,f_r,power\n");
            for (idx, p) in cube.iter().enumerate() {
                let (i, rest) = (idx / (nd * nr), idx % (nd * nr));
                push_row(&mut csv, &[f(ft[i]), f(fd[rest / nr]), f(fr[rest % nr]), f(*p)]);
            }
            artifacts.push(Artifact::text(&format!("cube_{name}.csv"), csv));
        }
    }
    let summary = json!({
        "ambiguities": scene.n_ambiguities,
        "beta": radar.beta_f64(),
        "threshold_db": sp.threshold_db,
        "source": match sp.source { CovSource::Analytic => "analytic", CovSource::Sampled => "sampled" },
        "basis_rank": basis.r_b(),
        "methods": ridges,
    });
    artifacts.push(Artifact::json("ridges.json", &summary));
    Ok((artifacts, summary))
}

// --- rank-table ------------------------------------------------------------

fn rank_table(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Value)> {
    let rt = &cfg.rank_table;
    let mut csv = String::from("d_over_lambda,platform_speed,beta,ambiguities,predicted,empirical_coarray,empirical_dpss\n");
    let mut rows = Vec::new();
    for case in &rt.cases {
        for &n_p in &rt.ambiguities {
            let radar = cfg.radar_config_with(cfg.radar.sensors, n_p, case.d_over_lambda, case.platform_speed)?;
            let scene = ClutterScene::uniform_rings(n_p, cfg.scene.patches_per_ring, cfg.scene.cnr_db, cfg.scene.noise_power, cfg.scene.seed);
            let report = predict(radar.l_s(), radar.l_t(), radar.beta(), n_p)?;
            let rc = coarray_analytic(&radar, &scene, false)?;
            let (coarray_rank, _) = empirical_rank(&rc, rt.rel_threshold);
            let basis = slepian_clutter_basis(&radar, n_p, &cfg.basis_options())?;
            let zero = coarray_noise(radar.l_s(), radar.l_t(), 0.0);
            let d = estimate_dc(&basis, &rc, &zero)?;
            let v = basis.v_c();
            let model = HermitianCov::new(&v * d * v.adjoint(), rc.domain);
            let (dpss_rank, _) = empirical_rank(&model, rt.rel_threshold);
            push_row(
                &mut csv,
                &[
                    f(case.d_over_lambda),
                    f(case.platform_speed),
                    f(radar.beta_f64()),
                    n_p.to_string(),
                    report.total_rank.to_string(),
                    coarray_rank.to_string(),
                    dpss_rank.to_string(),
                ],
            );
            rows.push(json!({
                "beta": radar.beta_f64(),
                "ambiguities": n_p,
                "predicted": report.total_rank,
                "empirical_coarray": coarray_rank,
                "empirical_dpss": dpss_rank,
            }));
        }
    }
    let matches = rows.iter().all(|r| r["predicted"] == r["empirical_coarray"]);
    let summary = json!({ "rows": rows, "predicted_matches_coarray": matches });
    Ok((vec![Artifact::text("rank_table.csv", csv)], summary))
}

// --- sinr ------------------------------------------------------------------

pub fn sinr_setup(cfg: &ExperimentConfig) -> Result<SinrSetup> {
    let radar = cfg.radar_config()?;
    let scene = cfg.clutter_scene(&radar)?;
    Ok(SinrSetup {
        cfg: radar,
        scene,
        target: cfg.target_spec(),
        n_samples: cfg.scene.training_samples,
        trials: cfg.sinr.trials,
        doppler: cfg.doppler_grid(),
        basis: cfg.basis_options(),
        reference: cfg.sinr_reference(),
    })
}

fn sinr(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Value)> {
    let setup = sinr_setup(cfg)?;
    let methods = cfg.sinr_methods()?;
    let curves = sinr_curves(&setup, &methods)?;
    let notch = setup.notch();
    let mut csv = String::from("method,f_d,sinr_db\n");
    let mut means = BTreeMap::new();
    let mut argmins = BTreeMap::new();
    for c in &curves {
        for (fd, s) in c.doppler.iter().zip(&c.sinr_db) {
            push_row(&mut csv, &[c.method.name().to_string(), f(*fd), f(*s)]);
        }
        means.insert(c.method.name(), c.mean_outside(notch, cfg.sinr.notch_exclusion));
        argmins.insert(c.method.name(), c.argmin());
    }
    let gap = |a: Method, b: Method| match (means.get(a.name()), means.get(b.name())) {
        (Some(x), Some(y)) => json!(x - y),
        _ => Value::Null,
    };
    let summary = json!({
        "notch": notch,
        "notch_exclusion": cfg.sinr.notch_exclusion,
        "training_samples": setup.n_samples,
        "trials": setup.trials,
        "mean_sinr_db": means,
        "argmin_doppler": argmins,
        "coarray_fd_minus_physical_fd_db": gap(Method::CoarrayFd, Method::PhysicalFd),
        "coarray_fd_minus_coarray_dpss_db": gap(Method::CoarrayFd, Method::CoarrayDpss),
    });
    Ok((vec![Artifact::text("sinr.csv", csv)], summary))
}

// --- reject ----------------------------------------------------------------

/// Evenly spaced points across `center ± width/2`, ends included.
fn band(center: f64, width: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| center - width / 2.0 + width * i as f64 / (n - 1) as f64).collect()
}

fn reject_verb(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Value)> {
    let mut cfg = cfg.clone();
    if cfg.interference.is_none() {
        cfg.interference = Some(InterferenceSection::default());
    }
    let radar = cfg.radar_config()?;
    let (l_s, l_t) = (radar.l_s(), radar.l_t());
    let scene = cfg.clutter_scene(&radar)?;
    let region = cfg.region(&radar)?;
    let isec = cfg.interference.clone().unwrap_or_default();
    let ranks = isec.ranks.unwrap_or_else(|| region.default_ranks(l_s, l_t));
    let proj = build_projector(l_s, l_t, &region, ranks, isec.total_rank)?;
    let noise = cfg.scene.noise_power;
    let r = match cfg.spectrum.source {
        CovSource::Analytic => coarray_analytic(&radar, &scene, true)?,
        CovSource::Sampled => {
            let layout = radar.layout();
            let y = simulate_snapshots_on(&layout, &radar, &scene, cfg.scene.training_samples)?;
            lift(&radar, &sample_covariance(&y, layout.domain())?)?
        }
    };
    let rejected = reject(&r, &proj)?;
    // The projected covariance is singular along the rejected subspace; the
    // noise power restores invertibility for the spectrum and the variant
    // weight.
    let mut loaded = rejected.clone();
    for i in 0..loaded.dim() {
        loaded.matrix[(i, i)] += C64::new(noise, 0.0);
    }
    let grid = ElementGrid::coarray(l_s, l_t);
    let pre = mvdr_spectrum(&r, &grid, 0.0)?;
    let post = LagSpectrum::new(&grid, &DenseInverse::new(&loaded)?.0)?;

    let c = region.center;
    let n = cfg.reject.region_points;
    let axes = [
        band(c.f_t, region.widths[0], n),
        band(c.f_d, region.widths[1], n),
        band(c.f_r, region.widths[2], n),
    ];
    let mut energy_csv = String::from("stage,f_t,f_d,f_r,power\n");
    let (mut e_pre, mut e_post) = (0.0, 0.0);
    for (stage, spec, total) in [("pre", &pre, &mut e_pre), ("post", &post, &mut e_post)] {
        for &ft in &axes[0] {
            for &fd in &axes[1] {
                for &fr in &axes[2] {
                    let p = spec.power(FrequencyTriple::new(ft, fd, fr));
                    *total += p;
                    push_row(&mut energy_csv, &[stage.to_string(), f(ft), f(fd), f(fr), f(p)]);
                }
            }
        }
    }

    let inv = DenseInverse::new(&r)?;
    let sigma_t2 = cfg.target.power;
    let mut sinr_csv = String::from("stage,f_d,sinr_db\n");
    let mut min_gain = f64::INFINITY;
    let mut rows = Vec::new();
    for fd in band(c.f_d, region.widths[1], cfg.reject.doppler_bins) {
        let v = coarray_steer(l_s, l_t, FrequencyTriple::new(c.f_t, fd, c.f_r));
        let w = weight(&inv, &v)?;
        let before = db(output_sinr(&w.w, &r.matrix, &v, sigma_t2));
        let after = if cfg.reject.projected_weight {
            let w2 = weight_dense(&loaded, &v)?;
            db(sinr_one_sided(&w2.w, &r, &proj, &v, sigma_t2))
        } else {
            db(sinr_one_sided(&w.w, &r, &proj, &v, sigma_t2))
        };
        min_gain = min_gain.min(after - before);
        rows.push((fd, before, after));
    }
    for (stage, pick) in [("pre", 0), ("post", 1)] {
        for (fd, b, a) in &rows {
            push_row(&mut sinr_csv, &[stage.to_string(), f(*fd), f(if pick == 0 { *b } else { *a })]);
        }
    }
    let summary = json!({
        "center": [c.f_t, c.f_d, c.f_r],
        "widths": region.widths,
        "ranks": ranks,
        "projector_rank": proj.rank(),
        "residue_bound": proj.residue_bound(),
        "energy_pre": e_pre,
        "energy_post": e_post,
        "energy_drop_db": db(e_pre / e_post),
        "min_sinr_gain_db": min_gain,
        "projected_weight": cfg.reject.projected_weight,
    });
    Ok((
        vec![
            Artifact::text("reject_energy.csv", energy_csv),
            Artifact::text("reject_sinr.csv", sinr_csv),
        ],
        summary,
    ))
}

// --- bench -----------------------------------------------------------------

struct BenchRow {
    sensors: [u64; 2],
    method: &'static str,
    dim: usize,
    flops: u64,
    model: u64,
    seconds: f64,
}

fn timed<T>(repeats: usize, mut body: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        last = Some(body()?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok((last.expect("at least one repeat"), times[times.len() / 2]))
}

/// Least-squares slope of `log y` against `log x`.
fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0.ln(), a.1 + p.1.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        num += (p.0.ln() - mx) * (p.1.ln() - my);
        den += (p.0.ln() - mx).powi(2);
    }
    (den > 0.0).then(|| num / den)
}

fn bench(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Value)> {
    let n_p = cfg.scene.ambiguities;
    let n = cfg.scene.training_samples;
    let repeats = cfg.bench.repeats;
    let mut rows = Vec::new();
    let mut dpss_d_flops = Vec::new();
    for &pair in &cfg.bench.sensor_pairs {
        let radar = cfg.radar_config_with(pair, n_p, cfg.radar.d_over_lambda, cfg.radar.platform_speed)?;
        let scene = cfg.clutter_scene(&radar)?;
        let uniform = radar.uniform_layout();
        let coprime = radar.layout();
        let (l_s, l_t) = (radar.l_s(), radar.l_t());

        let phys_samples = simulate_snapshots_on(&uniform, &radar, &scene, n)?;
        let co_samples = simulate_snapshots_on(&coprime, &radar, &scene, n)?;
        let sigma2 = passive_noise_estimate(&radar, &scene, n)?;

        let flops = Flops::new();
        let (_, t_phys) = timed(repeats, || {
            flops.reset();
            let r = sample_covariance(&phys_samples, uniform.domain())?;
            DenseInverse::counted(&r, &flops)
        })?;
        let dim = uniform.dim();
        rows.push(BenchRow {
            sensors: pair,
            method: Method::PhysicalFd.name(),
            dim,
            flops: flops.get(),
            model: (dim as u64).pow(3),
            seconds: t_phys,
        });

        let (rv, t_lift) = timed(repeats, || lift(&radar, &sample_covariance(&co_samples, coprime.domain())?))?;
        let (_, t_co) = timed(repeats, || {
            flops.reset();
            DenseInverse::counted(&rv, &flops)
        })?;
        let dim = rv.dim();
        rows.push(BenchRow {
            sensors: pair,
            method: Method::CoarrayFd.name(),
            dim,
            flops: flops.get(),
            model: (dim as u64).pow(3),
            seconds: t_lift + t_co,
        });

        let est_flops = Flops::new();
        let ((fast, r_b), t_dpss) = timed(repeats, || {
            flops.reset();
            est_flops.reset();
            let basis = slepian_clutter_basis(&radar, n_p, &cfg.basis_options())?;
            let rn = coarray_noise(l_s, l_t, sigma2);
            let d = estimate_dc_counted(&basis, &rv, &rn, &est_flops)?;
            let fast = FastInverse::new(&basis, &d, &rn)?;
            let _dense: CMat = fast.to_dense(&flops);
            Ok((fast.flops, basis.r_b()))
        })?;
        rows.push(BenchRow {
            sensors: pair,
            method: Method::CoarrayDpss.name(),
            dim,
            flops: fast + flops.get(),
            model: fast_inverse_cost(r_b, dim),
            seconds: t_lift + t_dpss,
        });
        dpss_d_flops.push(json!({ "sensors": pair, "rank": r_b, "estimate_flops": est_flops.get() }));
    }

    let mut csv = String::from("sensor_m,sensor_n,method,dim,flops,model_flops\n");
    for r in &rows {
        push_row(
            &mut csv,
            &[
                r.sensors[0].to_string(),
                r.sensors[1].to_string(),
                r.method.to_string(),
                r.dim.to_string(),
                r.flops.to_string(),
                r.model.to_string(),
            ],
        );
    }
    let mut slopes = BTreeMap::new();
    for m in Method::ALL {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.method == m.name())
            .map(|r| (r.dim as f64, r.flops as f64))
            .collect();
        slopes.insert(m.name(), log_slope(&pts));
    }
    let entries: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "sensors": r.sensors,
                "method": r.method,
                "dim": r.dim,
                "flops": r.flops,
                "model_flops": r.model,
                "flops_over_model": r.flops as f64 / r.model as f64,
                "seconds": r.seconds,
            })
        })
        .collect();
    let summary = json!({
        "ambiguities": n_p,
        "training_samples": n,
        "repeats": repeats,
        "log_flops_vs_log_dim_slope": slopes,
        "estimate_flops": dpss_d_flops,
        "rows": entries,
    });
    Ok((
        vec![Artifact::text("bench.csv", csv), Artifact::json("bench.json", &summary)],
        summary,
    ))
}

// --- command line ----------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "fda-coarray", version, about = "Coarray-domain clutter suppression experiments")]
pub struct Cli {
    /// TOML config file, or `preset:<name>` for a shipped preset.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `scene.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub verb: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MVDR spectra of the physical, coarray and DPSS covariances.
    Spectrum,
    /// Predicted against empirical clutter rank.
    RankTable,
    /// SINR against target Doppler for each method.
    Sinr,
    /// Interference rejection over a frequency box.
    Reject {
        /// Box centre `f_T,f_d,f_R`.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        center: Option<Vec<f64>>,
        /// Box widths `Δ_T,Δ_d,Δ_R`.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        widths: Option<Vec<f64>>,
    },
    /// Flop counts and wall time over a sweep of sensor pairs.
    Bench,
    /// Print the names of the shipped presets.
    Presets,
}

fn load_config(spec: Option<&str>, verb: Verb) -> Result<ExperimentConfig> {
    let text = match spec {
        None => preset(verb.default_preset()).expect("default preset exists").to_string(),
        Some(s) => match s.strip_prefix("preset:") {
            Some(name) => preset(name)
                .ok_or_else(|| Error::BadConfig(format!("unknown preset `{name}`")))?
                .to_string(),
            None => fs::read_to_string(s).map_err(|e| Error::BadConfig(format!("cannot read config {s}: {e}")))?,
        },
    };
    ExperimentConfig::from_toml(&text)
}

fn execute(cli: &Cli) -> Result<()> {
    let verb = match &cli.verb {
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Spectrum => Verb::Spectrum,
        Command::RankTable => Verb::RankTable,
        Command::Sinr => Verb::Sinr,
        Command::Reject { .. } => Verb::Reject,
        Command::Bench => Verb::Bench,
    };
    let mut cfg = load_config(cli.config.as_deref(), verb)?;
    if let Some(seed) = cli.seed {
        cfg.scene.seed = seed;
    }
    if let Command::Reject { center, widths } = &cli.verb {
        if center.is_some() || widths.is_some() {
            let sec = cfg.interference.get_or_insert_with(InterferenceSection::default);
            if let Some(c) = center {
                sec.center = [c[0], c[1], c[2]];
            }
            if let Some(w) = widths {
                sec.widths = Some([w[0], w[1], w[2]]);
            }
        }
    }
    cfg.validate()?;
    let output = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::BadConfig(format!("thread pool: {e}")))?
            .install(|| run(verb, &cfg))?,
        None => run(verb, &cfg)?,
    };
    let manifest = write_outputs(&cli.out, &cfg, &output)?;
    println!("{}", serde_json::to_string_pretty(&output.summary).expect("summary serialises"));
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

/// Parses `args` and runs the selected verb; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
