use std::collections::BTreeSet;

use fda_coarray::coprime::{build_coprime_set, count_distinct_sums, lag_structure, CoprimePair};
use fda_coarray::covariance::{coarray_analytic, lift, spatial_smooth, virtualize, Domain, HermitianCov};
use fda_coarray::linalg::{CMat, CVec, C64};
use fda_coarray::rank::{clutter_rank, rank_rr};
use fda_coarray::rejection::{build_projector, RegionSpec};
use fda_coarray::scene::{
    analytic_covariance, CCubeConfig, ClutterPatch, ClutterScene, FrequencyTriple, RadarParams,
};
use fda_coarray::slepian::{coarray_noise, slepian_clutter_basis, BasisOptions, CovInverse, DenseInverse, FastInverse};
use fda_coarray::stap::{output_sinr, weight_dense};
use num_integer::Integer;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coprime_pair(max: u64) -> impl Strategy<Value = (u64, u64)> {
    (1..=max, 1..=max).prop_filter("co-prime", |(m, n)| m.gcd(n) == 1)
}

fn ordered_pair(max: u64) -> impl Strategy<Value = (u64, u64)> {
    coprime_pair(max).prop_filter("m < n", |(m, n)| m < n)
}

/// Reference-like radar built on arbitrary sensor and pulse pairs with `β = 1`.
fn small_config(sensors: (u64, u64), pulses: (u64, u64), n_p: usize) -> CCubeConfig {
    let f_b = 1.0e9;
    let t_pri = 0.5e-3;
    let d = 0.15;
    let params = RadarParams {
        d,
        delta_f: RadarParams::ambiguity_matched_offset(n_p, t_pri),
        f_b,
        t_pri,
        t_p: 1.0e-6,
        v_p: d / (2.0 * t_pri),
        h: 6000.0,
    };
    CCubeConfig::new(
        CoprimePair::new(sensors.0, sensors.1).unwrap(),
        CoprimePair::new(pulses.0, pulses.1).unwrap(),
        params,
    )
    .unwrap()
}

fn random_patches(seed: u64, n_p: usize, count: usize, noise: f64) -> ClutterScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = ClutterScene::noise_only(noise, seed);
    scene.n_ambiguities = n_p;
    for q in 0..count {
        scene.patches.push(ClutterPatch {
            ring: 1 + q % n_p,
            cos_psi: -0.99 + 1.98 * (q as f64 + rng.random::<f64>()) / count as f64,
            power: rng.random_range(0.5..50.0),
        });
    }
    scene
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
    let a = CMat::from_fn(n, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &a * a.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distinct_sums_match_enumeration((m, n) in coprime_pair(8), l_max in 0u64..12, p_max in 0u64..12) {
        let brute: BTreeSet<u64> = (0..=l_max).flat_map(|l| (0..=p_max).map(move |p| m * l + n * p)).collect();
        prop_assert_eq!(count_distinct_sums(m, n, l_max, p_max).unwrap(), brute.len() as u64);
    }

    #[test]
    fn holes_are_symmetric((m, n) in coprime_pair(8), l_max in 0u64..12, p_max in 0u64..12) {
        let top = l_max * m + p_max * n;
        let values: BTreeSet<u64> = (0..=l_max).flat_map(|l| (0..=p_max).map(move |p| m * l + n * p)).collect();
        let holes: BTreeSet<u64> = (0..=top).filter(|v| !values.contains(v)).collect();
        let mirrored: BTreeSet<u64> = holes.iter().map(|h| top - h).collect();
        prop_assert_eq!(holes, mirrored);
    }

    #[test]
    fn difference_set_covers_contiguous_segment((m, n) in ordered_pair(8)) {
        let set = build_coprime_set(CoprimePair::new(m, n).unwrap()).unwrap();
        prop_assert_eq!(set.cardinality() as u64, n + 2 * m - 1);
        let lags = lag_structure(&set);
        let l = (m * n + m - 1) as i64;
        let diffs: BTreeSet<i64> = lags.full_difference_set.iter().copied().collect();
        for lag in -l..=l {
            prop_assert!(diffs.contains(&lag));
            let pairs = lags.pairs(lag);
            prop_assert!(!pairs.is_empty());
            for &(a, b) in pairs {
                prop_assert_eq!(set.indices[a] - set.indices[b], lag);
            }
        }
        prop_assert_eq!(lags.element_count(), set.cardinality());
    }

    #[test]
    fn rank_rr_matches_grid_count((m, n) in coprime_pair(5), l_s in 0usize..10, l_t in 0usize..10) {
        let brute: BTreeSet<u64> = (0..=l_t as u64).flat_map(|k| (0..=l_s as u64).map(move |r| n * r + m * k)).collect();
        prop_assert_eq!(rank_rr(l_s, l_t, m, n).unwrap(), brute.len() as u64);
    }

    #[test]
    fn clutter_rank_is_monotone_then_flat((m, n) in coprime_pair(5), l_s in 1usize..8, l_t in 1usize..8) {
        let ranks: Vec<u64> = (1..=l_s + 4).map(|p| clutter_rank(l_s, l_t, m, n, p).unwrap()).collect();
        prop_assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(ranks[l_s..].iter().all(|&r| r == ranks[l_s]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn smoothing_squares_coarray_covariance(
        sensors in ordered_pair(3),
        pulses in ordered_pair(3),
        n_p in 1usize..=3,
        count in 1usize..=10,
        seed in any::<u64>(),
    ) {
        let cfg = small_config(sensors, pulses, n_p);
        let scene = random_patches(seed, n_p, count, 0.7);
        let r = analytic_covariance(&cfg, &scene).unwrap();
        let z = virtualize(&r, &lag_structure(&cfg.sensor_set), &lag_structure(&cfg.pulse_set)).unwrap();
        let rv = spatial_smooth(&z).matrix;
        let rt = coarray_analytic(&cfg, &scene, true).unwrap().matrix;
        prop_assert!((&rv - &rt * &rt).norm() / rv.norm() <= 1e-8);
        prop_assert!((rv.clone() - rv.adjoint()).norm() <= 1e-12 * rv.norm());
    }

    #[test]
    fn projector_is_orthogonal(
        l_s in 1usize..6,
        l_t in 1usize..6,
        center in (0.0..1.0f64, -0.5..0.5f64, -0.5..0.5f64),
        widths in (0.02..0.5f64, 0.02..0.5f64, 0.02..0.5f64),
        ranks in (1usize..4, 1usize..4, 1usize..4),
    ) {
        let region = RegionSpec {
            center: FrequencyTriple::new(center.0, center.1, center.2),
            widths: [widths.0, widths.1, widths.2],
        };
        let ranks = [ranks.0.min(l_s + 1), ranks.1.min(l_t + 1), ranks.2.min(l_s + 1)];
        let proj = build_projector(l_s, l_t, &region, ranks, None).unwrap();
        let p = proj.projector();
        prop_assert!((&p * &p - &p).norm() <= 1e-8);
        prop_assert!((&p - p.adjoint()).norm() <= 1e-8);
        prop_assert!((p.trace().re - proj.rank() as f64).abs() <= 1e-8);
        let (mean, se) = proj.residue_monte_carlo(l_s, l_t, 1000, 5);
        prop_assert!(mean <= proj.residue_bound() + 3.0 * se + 1e-12);
    }

    #[test]
    fn fast_inverse_matches_dense(seed in any::<u64>(), rank in 1usize..12, noise in 0.1..10.0f64) {
        let cfg = small_config((1, 2), (1, 2), 2);
        let basis = slepian_clutter_basis(&cfg, 2, &BasisOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_psd(&mut rng, basis.r_b(), rank.min(basis.r_b())) * C64::new(100.0, 0.0);
        let rn = coarray_noise(cfg.l_s(), cfg.l_t(), noise);
        let fast = FastInverse::new(&basis, &d, &rn).unwrap();
        let v = basis.v_c();
        let mut dl = d.clone();
        for i in 0..dl.nrows() {
            dl[(i, i)] += C64::new(fast.loading, 0.0);
        }
        let dense = (&v * dl * v.adjoint() + &rn.matrix).try_inverse().unwrap();
        let x = CVec::from_fn(basis.dim(), |i, _| C64::new((i as f64).sin(), (0.3 * i as f64).cos()));
        let got = fast.apply(&x);
        let want = &dense * &x;
        prop_assert!((got - &want).norm() <= 1e-8 * want.norm());
    }

    #[test]
    fn weights_are_distortionless_and_scale_free(seed in any::<u64>(), scale in 1e-3..1e3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let mut m = random_psd(&mut rng, n, 5);
        for i in 0..n {
            m[(i, i)] += C64::new(0.5, 0.0);
        }
        let dom = Domain::Physical { sensors: 2, pulses: 3 };
        let r = HermitianCov::new(m.clone(), dom);
        let v = CVec::from_fn(n, |i, _| C64::from_polar(1.0, 0.7 * i as f64));
        let w = weight_dense(&r, &v).unwrap();
        prop_assert!((w.w.dotc(&v) - C64::new(1.0, 0.0)).norm() <= 1e-10);
        let scaled = HermitianCov::new(m * C64::new(scale, 0.0), dom);
        let w2 = weight_dense(&scaled, &v).unwrap();
        prop_assert!((&w.w - &w2.w).norm() <= 1e-9 * w.w.norm());
        let inv = DenseInverse::new(&r).unwrap();
        let direct = inv.quad_form(&v);
        prop_assert!((output_sinr(&w.w, &r.matrix, &v, 1.0) - direct).abs() <= 1e-10 * direct);
    }
}

#[test]
fn sinr_non_increasing_in_clutter_power() {
    let cfg = small_config((1, 2), (1, 2), 1);
    let v = cfg.space_time_range_steer(FrequencyTriple::new(0.0, 0.1, -0.2));
    let mut last = f64::INFINITY;
    for power in [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0] {
        let mut scene = ClutterScene::noise_only(1.0, 0);
        scene.patches.push(ClutterPatch { ring: 1, cos_psi: -0.3, power });
        let r = analytic_covariance(&cfg, &scene).unwrap();
        let w = weight_dense(&r, &v).unwrap();
        let sinr = output_sinr(&w.w, &r.matrix, &v, 1.0);
        assert!(sinr <= last * (1.0 + 1e-12), "power {power}: {sinr} > {last}");
        last = sinr;
    }
}

#[test]
fn noise_only_lift_is_scaled_identity() {
    let cfg = small_config((1, 2), (2, 3), 1);
    let r = analytic_covariance(&cfg, &ClutterScene::noise_only(2.5, 0)).unwrap();
    let rec = lift(&cfg, &r).unwrap();
    let n = rec.dim();
    let scale = rec.trace() / n as f64;
    assert!((rec.matrix - CMat::identity(n, n) * C64::new(scale, 0.0)).norm() <= 1e-10);
}
