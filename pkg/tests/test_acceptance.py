"""Acceptance suite: one check per release criterion, one verdict line each.

Run this file with ``pytest -s`` to see the per-criterion report; every
test prints exactly one ``criterion N ... PASS/FAIL`` line before its
assertions fire. The balanced-loss study behind criterion 5 costs about
two minutes at 64x64 and is computed once at module scope; criterion 9
reruns it from scratch under a different thread ceiling and byte-compares
the emitted files.
"""

import math
import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from stylebalance import selftest
from stylebalance.analysis import (AnnotationRecord, FeatureBank, LossTable,
                                   MomentSpec, correlation_report,
                                   deception_rate, linear_fit,
                                   mc_expectation_bounds, nearest_style_ids)
from stylebalance.featnet import build, default_config, forward
from stylebalance.fileio import write_image, write_sweep_csv
from stylebalance.gradients import run_gradcheck
from stylebalance.losses import (DEFAULT_STYLE_TAPS, balanced_layer_loss,
                                 classic_layer_loss, gram, inf_bound,
                                 norm_constant, sup_bound)
from stylebalance.scoring import LossKind
from stylebalance.stylizer import OptimizeConfig, sweep
from stylebalance.tensors import FeatureMap
from stylebalance.textures import noise_image, texture_set


def _verdict(num: int, label: str, ok: bool, detail: str) -> None:
    print(f"criterion {num} [{label}]: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} [{label}]: {detail}"


def _random_pair(i: int):
    """Seeded feature pair i of the 10,000 shared by criteria 1 and 2."""
    rng = np.random.default_rng(1000 + i)
    h = int(rng.integers(1, 17))
    w = int(rng.integers(1, 17))
    c = int(rng.integers(1, 33))
    s = float(rng.choice([0.1, 1.0, 10.0]))
    fs = FeatureMap(rng.random((h, w, c)) * s, nonneg=True)
    fp = FeatureMap(rng.random((h, w, c)) * s, nonneg=True)
    n = float(c * c) if i % 2 == 0 else float(h * w)
    return fs, fp, n


@pytest.fixture(scope="module")
def net():
    return build(default_config())


STUDY_CFG = OptimizeConfig(steps=200, step_size=0.02, seed=5,
                           loss_kind=LossKind.BALANCED)


def _run_study(study_net):
    """One noise content against 20 seeded textures, balanced-driven."""
    finals = {}

    def grab(task, step, rep):
        finals[task] = rep

    result = sweep(study_net, [noise_image(99, 64)],
                   texture_set(17, 20, size=64), STUDY_CFG,
                   keep_pastiches=True, on_step=grab)
    return result, finals


@pytest.fixture(scope="module")
def study(net):
    t0 = time.perf_counter()
    result, finals = _run_study(net)
    return result, finals, time.perf_counter() - t0


def test_c1_bound_containment():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(10_000):
        fs, fp, n = _random_pair(i)
        gs, gp = gram(fs), gram(fp)
        classic = classic_layer_loss(gs, gp, n)
        hi = sup_bound(gs, gp, n)
        lo = inf_bound(gs, gp, n)
        worst = max(worst,
                    (lo - classic) / max(classic, 1e-300),
                    (classic - hi) / max(hi, 1e-300))

    # Constructed equality cases: features living on disjoint channel sets
    # have orthogonal Grams and saturate the upper bound; a doubled copy
    # has a parallel Gram and saturates the lower one.
    rng = np.random.default_rng(2024)
    a = np.zeros((2, 3, 4))
    a[:, :, :2] = rng.random((2, 3, 2)) + 0.5
    b = np.zeros((2, 3, 4))
    b[:, :, 2:] = rng.random((2, 3, 2)) + 0.5
    ga, gb = gram(FeatureMap(a, nonneg=True)), gram(FeatureMap(b, nonneg=True))
    sup_gap = abs(classic_layer_loss(ga, gb, 16.0) - sup_bound(ga, gb, 16.0))
    sup_gap /= sup_bound(ga, gb, 16.0)
    gd = gram(FeatureMap(a * 2.0, nonneg=True))
    inf_gap = abs(classic_layer_loss(ga, gd, 16.0) - inf_bound(ga, gd, 16.0))
    inf_gap /= classic_layer_loss(ga, gd, 16.0)

    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and sup_gap <= 1e-12 and inf_gap <= 1e-12 and dt < 10.0
    _verdict(1, "bound containment", ok,
             f"10000 pairs, worst rel violation {worst:.2e}; equality gaps "
             f"sup {sup_gap:.2e} / inf {inf_gap:.2e}; {dt:.1f}s")


def test_c2_balanced_range_and_scale_invariance():
    t0 = time.perf_counter()
    out_of_range = 0
    worst_drift = 0.0
    for i in range(10_000):
        fs, fp, n = _random_pair(i)
        base = balanced_layer_loss(gram(fs), gram(fp), n)
        if not 0.0 <= base <= 1.0:
            out_of_range += 1
        for s in (0.1, 1.0, 7.0):
            scaled = balanced_layer_loss(
                gram(FeatureMap(fs.data * s, nonneg=True)),
                gram(FeatureMap(fp.data * s, nonneg=True)), n)
            worst_drift = max(worst_drift,
                              abs(scaled - base) / max(base, 1e-300))
    dt = time.perf_counter() - t0
    ok = out_of_range == 0 and worst_drift < 1e-12 and dt < 10.0
    _verdict(2, "balanced range and scale invariance", ok,
             f"10000 pairs in [0,1] ({out_of_range} out), worst scale drift "
             f"{worst_drift:.2e}; {dt:.1f}s")


def test_c3_gradient_correctness():
    t0 = time.perf_counter()
    s = run_gradcheck(seed=0, feature_instances=100, pixel_instances=100,
                      pixel_size=8)
    dt = time.perf_counter() - t0
    ok = (s.content <= 1e-6 and s.classic <= 1e-6 and s.balanced <= 1e-6
          and s.pixels <= 1e-4 and s.stop_gradient <= 1e-12 and s.passed()
          and dt < 60.0)
    _verdict(3, "gradient correctness", ok,
             f"100+100 instances: feature worst {s.worst_feature:.2e}, "
             f"pixels {s.pixels:.2e}, stop-gradient {s.stop_gradient:.2e}; "
             f"{dt:.1f}s")


def test_c4_sup_bound_tracks_classic_loss(net):
    t0 = time.perf_counter()
    textures = texture_set(23, 200, size=16)
    taps = list(DEFAULT_STYLE_TAPS)
    grams = []
    for img in textures:
        feats = forward(net, img, taps)
        grams.append({t: (gram(feats[t]), norm_constant(feats[t]))
                      for t in taps})
    rs = {}
    for tap in taps:
        xs, ys = [], []
        for i in range(200):
            ga, n = grams[i][tap]
            gb, _ = grams[(i + 1) % 200][tap]
            xs.append(sup_bound(ga, gb, n))
            ys.append(classic_layer_loss(ga, gb, n))
        rs[tap] = linear_fit(xs, ys)[2]
    dt = time.perf_counter() - t0
    ok = all(r > 0.9 for r in rs.values()) and dt < 30.0
    _verdict(4, "sup/classic correlation", ok,
             "200 texture pairs, per-tap r "
             + ", ".join(f"{t}={r:.3f}" for t, r in rs.items())
             + f"; {dt:.1f}s")


def test_c5_balanced_loss_compresses_dispersion(study):
    result, finals, dt = study
    classic = np.array([r.classic_style for r in result.rows])
    balanced = np.array([r.balanced_style for r in result.rows])
    cov_classic = float(classic.std() / classic.mean())
    cov_balanced = float(balanced.std() / balanced.mean())
    layer_vals = [rep.balanced for task in sorted(finals)
                  for rep in finals[task].layers]
    in_range = all(0.0 <= v <= 1.0 for v in layer_vals)
    ok = (len(result.rows) == 20 and cov_classic > cov_balanced and in_range
          and dt < 900.0)
    _verdict(5, "dispersion compression", ok,
             f"20 styles at 200 steps: CoV classic {cov_classic:.3f} > "
             f"balanced {cov_balanced:.3f}; {len(layer_vals)} per-layer "
             f"values in [0,1]; {dt:.0f}s")


def _random_spec(rng):
    kind = int(rng.integers(0, 3))
    if kind == 0:
        vals = rng.uniform(0.0, 5.0, size=int(rng.integers(1, 5)))
        return MomentSpec.discrete(vals)
    if kind == 1:
        return MomentSpec.point(float(rng.uniform(0.0, 5.0)))
    lo = float(rng.uniform(0.0, 3.0))
    return MomentSpec.uniform(lo, lo + float(rng.uniform(0.5, 3.0)))


def test_c6_expectation_bounds_monte_carlo():
    t0 = time.perf_counter()
    two_point = MomentSpec.discrete([1.0, 3.0])
    res = mc_expectation_bounds(two_point, two_point, trials=100_000, seed=0)
    anchor_ok = (res.within and (res.lower, res.upper) == (2.0, 10.0)
                 and abs(res.estimate - 2.0) <= 3.0 * res.stderr)
    contained = 0
    for i in range(100):
        rng = np.random.default_rng(40 + i)
        a, b = _random_spec(rng), _random_spec(rng)
        if mc_expectation_bounds(a, b, trials=20_000, seed=1000 + i).within:
            contained += 1
    dt = time.perf_counter() - t0
    ok = anchor_ok and contained >= 95 and dt < 30.0
    _verdict(6, "expectation bounds", ok,
             f"two-point estimate {res.estimate:.5f} within "
             f"[{res.lower:g}, {res.upper:g}]; containment {contained}/100; "
             f"{dt:.1f}s")


def test_c7_deception_metric():
    t0 = time.perf_counter()
    rng = np.random.default_rng(300)
    centers = {"a": np.zeros(16), "b": np.full(16, 10.0)}

    def cluster(prefix, artist, count):
        ids = [f"{prefix}{artist}{i}" for i in range(count)]
        vecs = centers[artist] + 0.1 * rng.standard_normal((count, 16))
        return ids, [artist] * count, vecs

    sa, sb = cluster("s", "a", 5), cluster("s", "b", 5)
    styles = FeatureBank(sa[0] + sb[0], sa[1] + sb[1],
                         np.vstack([sa[2], sb[2]]))
    pa, pb = cluster("p", "a", 8), cluster("p", "b", 8)
    stylized = FeatureBank(pa[0] + pb[0], pa[1] + pb[1],
                           np.vstack([pa[2], pb[2]]))
    separated = deception_rate(stylized, styles)
    swapped = FeatureBank(stylized.ids, ("b",) * 8 + ("a",) * 8,
                          stylized.vectors)
    inverted = deception_rate(swapped, styles)

    g_ids = [f"g{i:02d}" for i in range(50)]
    g_vecs = rng.standard_normal((50, 16))
    gallery = FeatureBank(g_ids, ["x"] * 50, g_vecs)
    q_vecs = rng.standard_normal((1000, 16))
    queries = FeatureBank([f"q{i:04d}" for i in range(1000)], ["x"] * 1000,
                          q_vecs)
    got = nearest_style_ids(queries, gallery)
    expected = []
    for v in q_vecs:
        d2 = [math.fsum((v - g_vecs[j]) ** 2) for j in range(50)]
        best = min(d2)
        expected.append(min(g_ids[j] for j in range(50) if d2[j] == best))

    dt = time.perf_counter() - t0
    ok = (separated == 1.0 and inverted == 0.0 and got == expected
          and dt < 10.0)
    _verdict(7, "deception metric", ok,
             f"separated rate {separated}, label-swapped rate {inverted}, "
             f"oracle agreement 1000/1000; {dt:.1f}s")


def test_c8_annotation_correlation():
    t0 = time.perf_counter()
    scores = [-1, 0, 1] * 333
    ids = [f"s{i:03d}" for i in range(999)]
    table = LossTable(ids, ("total",),
                      np.array([[2.0 * s + 5.0] for s in scores]))
    annos = [AnnotationRecord(i, s) for i, s in zip(ids, scores)]
    aligned = correlation_report(table, annos)["total"]

    rng = np.random.default_rng(11)
    n = 1000
    raw = np.array(([-1, 0, 1] * 334)[:n])
    perm = rng.permutation(n)
    nids = [f"n{i:04d}" for i in range(n)]
    ntable = LossTable(nids, ("total",), (2.0 * raw + 5.0).reshape(n, 1))
    nannos = [AnnotationRecord(nids[i], int(raw[perm[i]])) for i in range(n)]
    null_r = correlation_report(ntable, nannos)["total"]

    dt = time.perf_counter() - t0
    ok = aligned == 1.0 and abs(null_r) < 0.1 and dt < 5.0
    _verdict(8, "annotation correlation", ok,
             f"rank-aligned r = {aligned!r} (exact), shuffled |r| = "
             f"{abs(null_r):.4f} at n=1000; {dt:.2f}s")


def test_c9_bitwise_determinism(net, study, tmp_path):
    result, _, _ = study
    with threadpool_limits(limits=3):
        result2, _ = _run_study(build(default_config()))

    d1, d2 = tmp_path / "run1", tmp_path / "run2"
    d1.mkdir()
    d2.mkdir()
    write_sweep_csv(d1 / "sweep.csv", result)
    write_sweep_csv(d2 / "sweep.csv", result2)
    for k, (p1, p2) in enumerate(zip(result.pastiches, result2.pastiches)):
        write_image(p1, d1 / f"pastiche_{k:02d}.ppm")
        write_image(p2, d2 / f"pastiche_{k:02d}.ppm")
    names = sorted(p.name for p in d1.iterdir())
    sweep_same = all((d1 / nm).read_bytes() == (d2 / nm).read_bytes()
                     for nm in names)

    s1, s2 = tmp_path / "self1", tmp_path / "self2"
    art1 = selftest.write_artifacts(s1)
    with threadpool_limits(limits=3):
        art2 = selftest.write_artifacts(s2)
    self_same = art1 == art2 and all(
        (s1 / nm).read_bytes() == (s2 / nm).read_bytes() for nm in art1)

    ok = sweep_same and self_same
    _verdict(9, "bitwise determinism", ok,
             f"{len(names)} study files and {len(art1)} selftest artifacts "
             f"byte-identical across thread ceilings")
