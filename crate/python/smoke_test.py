"""Smoke test for the fda_coarray_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/py
"""

import cmath
import tempfile
from pathlib import Path

import fda_coarray_py as fc


def main():
    assert fc.coprime_set(2, 3) == [0, 2, 3, 4, 6, 9]
    assert dict(fc.lag_counts(2, 3))[0] == 6
    brute = {2 * l + 3 * q for l in range(8) for q in range(8)}
    assert fc.count_distinct_sums(2, 3, 7, 7) == len(brute)
    assert "sinr" in fc.presets()

    radar = fc.Radar.reference(3)
    assert (radar.l_s, radar.l_t) == (7, 7)
    assert radar.beta == (1, 1)
    assert radar.predicted_rank(3) == 3 * fc.count_distinct_sums(1, 1, 7, 7)

    scene = fc.Scene.uniform_rings(3, 61, 40.0, noise_power=1.0)
    r = radar.covariance(scene)
    assert r.dim == 216

    rc = radar.lift(r)
    assert rc.dim == 8 * 8 * 8
    clean = radar.coarray_covariance(scene, with_noise=False)
    assert clean.rank() == radar.predicted_rank(3)

    basis = radar.clutter_basis(3)
    assert basis.branch == "exact"
    assert basis.capture_fraction(clean) > 0.999

    f = (radar.clutter_frequencies(1, 0.5)[0], 0.25, 0.25)
    v = radar.coarray_steer(f)
    w_fast = basis.mvdr_weight(rc, 1.0, v)
    w_dense = rc.mvdr_weight(v)
    gain = sum(a.conjugate() * b for a, b in zip(w_fast, v))
    assert abs(gain - 1) < 1e-8
    fast_db = rc.sinr_db(w_fast, v)
    dense_db = rc.sinr_db(w_dense, v)
    assert dense_db >= fast_db - 1e-6
    print(f"coarray SINR dense {dense_db:.2f} dB, low-rank {fast_db:.2f} dB")

    scene.add_interference((0.1, -0.3, 0.3), 1000.0)
    jammed = radar.coarray_covariance(scene)
    cleaned, rank = radar.reject(jammed, (0.1, -0.3, 0.3))
    assert rank == 8
    probe = radar.coarray_steer((0.1, -0.3, 0.3))
    before = sum((a.conjugate() * b).real for a, b in zip(probe, jammed.mvdr_weight(probe)))
    assert cleaned.trace() < jammed.trace()
    assert cmath.isfinite(complex(before))

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "r.bin"
        r.save(str(path))
        back = fc.Covariance.load(str(path))
        assert back.to_list() == r.to_list()

        cfg = fc.Config.preset("rank-table")
        cfg2 = fc.Config(cfg.to_toml())
        assert cfg.sha256() == cfg2.sha256()

        small = fc.Config(
            "[radar]\nsensors = [1, 2]\npulses = [1, 2]\n"
            "[scene]\nambiguities = 2\npatches_per_ring = 31\ntraining_samples = 200\n"
            "[sinr]\ndoppler_bins = 5\ntrials = 1\n"
        )
        summary, files = small.run("sinr", out=str(Path(tmp) / "out"))
        assert "sinr.csv" in files
        assert (Path(tmp) / "out" / "manifest.json").exists()
        print("sinr summary:", summary["mean_sinr_db"])

    try:
        fc.Config("[radar]\nbogus = 1\n")
    except fc.ConfigError as e:
        assert "line 2" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
