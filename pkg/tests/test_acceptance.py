"""Acceptance suite: one PASS/FAIL verdict line per criterion.

Verdicts are collected in ``VERDICTS`` and printed in the terminal summary.
Wall-clock budgets are part of each verdict.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from pothull import (
    Box,
    CostSpec,
    DiscreteMeasure,
    c_transform,
    certify,
    compute_lambda,
    diameter_linf,
    is_member,
    load_instance,
)
from pothull.experiments import (
    ExperimentConfig,
    load_config,
    run_config,
    run_grid_epsilon,
    run_sharpness_grid,
)
from pothull.geometry import chain_sum_points, curve_bound_rhs
from pothull.potentials import uniqueness_predictor

from conftest import line_measure, random_curve_draw, random_matrix_instance, sharpness_d1_n2
from oracles import chain_lambda, exact_diameter_vertices, floyd_min_cycle, vertex_min

CONFIGS = Path(__file__).parents[1] / "configs"
VERDICTS: list[str] = []


def verdict(number: int, ok: bool, detail: str) -> None:
    VERDICTS.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    print(VERDICTS[-1])
    assert ok, detail


def certified_graphs(instance_dir: Path):
    """Chain graphs and certificates of every instance an experiment dumped."""
    out = []
    for p in sorted(instance_dir.glob("*.json")):
        inst = load_instance(p)
        _, _, g, cert = certify(inst.rho, inst.mu, inst.cost)
        out.append((g, cert))
    return out


# criterion 1 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def sharpness(tmp_path_factory):
    d = tmp_path_factory.mktemp("sharpness")
    cfg = ExperimentConfig("sharpness_grid", (2, 4, 8, 16, 32), dims=1, cost="bilinear",
                           instances_dir=str(d))
    t0 = time.perf_counter()
    res = run_sharpness_grid(1, cfg.sizes, config=cfg)
    return res, time.perf_counter() - t0, certified_graphs(d)


def test_criterion_1_sharpness(sharpness):
    res, elapsed, _ = sharpness
    problems = []
    d = 1
    for r in res.rows:
        n = r["n"]
        if not r["exact"] >= 1.0 / (2 * n):
            problems.append(f"n={n}: {r['exact']!r} < 1/(2n)")
        if not r["exact"] <= 2 * math.sqrt(d) * d / n:
            problems.append(f"n={n}: {r['exact']!r} above grid bound")
        if not (r["phi0_member"] and r["phi1_member"]):
            problems.append(f"n={n}: explicit potentials rejected")
    exact = [r["exact"] for r in res.rows]
    ok = not problems and elapsed < 5.0
    verdict(1, ok, f"exact={exact}, {elapsed:.2f}s {problems}")


# criterion 2 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def grid(tmp_path_factory):
    d = tmp_path_factory.mktemp("grid")
    mu = DiscreteMeasure([[0.5, 0.0], [0.5, 0.5], [0.5, 1.0]], [0.25, 0.5, 0.25])
    eps = [1 / 2, 1 / 4, 1 / 8, 1 / 16]
    cfg = ExperimentConfig("grid_epsilon", tuple(1 / e for e in eps), dims=2, drop_smallest=0,
                           instances_dir=str(d))
    t0 = time.perf_counter()
    res = run_grid_epsilon(Box.unit(2), eps, mu, config=cfg)
    return res, mu, time.perf_counter() - t0, certified_graphs(d)


def test_criterion_2_grid_bound(grid):
    res, mu, elapsed, _ = grid
    diam_y = float(np.max(np.linalg.norm(mu.points[:, None] - mu.points[None], axis=2)))
    bound_ok = all(r["exact"] <= 2 * 2 * diam_y * r["eps"] for r in res.rows)
    slope = res.fit.slope
    ok = bound_ok and 0.9 <= slope <= 1.1 and elapsed < 60.0
    verdict(2, ok, f"exact={[float(v) for v in res.column('exact')]}, slope={slope:.4f}, {elapsed:.2f}s")


# criterion 3 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def uniqueness():
    rng = np.random.default_rng(31)
    t0 = time.perf_counter()
    records = []
    for k in range(200):
        n, m = int(rng.integers(1, 9)), int(rng.integers(1, 7))
        C, a, b, rho, mu, c = random_matrix_instance(rng, n, m, integer=bool(k % 2), degenerate=k % 4 < 2)
        _, face, g, cert = certify(rho, mu, c)
        records.append((uniqueness_predictor(face).connected, diameter_linf(cert)[1], g, cert))
    spot = []
    split = (line_measure([0.0, 1.0]), line_measure([0.0, 1.0]), CostSpec.quadratic())
    for inst in (split, sharpness_d1_n2()):
        _, face, g, cert = certify(*inst)
        spot.append((uniqueness_predictor(face).connected, diameter_linf(cert)[1], g, cert))
    return records, spot, time.perf_counter() - t0


def test_criterion_3_uniqueness(uniqueness):
    records, spot, elapsed = uniqueness
    connected = [d for conn, d, _, _ in records if conn]
    worst = max(connected) if connected else 0.0
    spot_ok = all((not conn) and d > 0 for conn, d, _, _ in spot)
    split = sum(1 for conn, d, _, _ in records if not conn and d > 0)
    ok = worst <= 1e-9 and spot_ok and elapsed < 30.0
    verdict(3, ok, f"{len(connected)}/200 connected, worst connected diameter {worst:.3e}, "
                   f"{split} disconnected with positive diameter, "
                   f"disconnected spot checks {[d for _, d, _, _ in spot]}, {elapsed:.2f}s")


# criterion 4 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def oracle_runs():
    rng = np.random.default_rng(41)
    t0 = time.perf_counter()
    errs = {"value": 0.0, "lambda": 0.0, "diameter": 0.0}
    graphs = []
    for k in range(100):
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        C, a, b, rho, mu, c = random_matrix_instance(rng, n, m, integer=bool(k % 2), degenerate=k % 4 < 2)
        sol, face, g, cert = certify(rho, mu, c)
        errs["value"] = max(errs["value"], abs(sol.value - vertex_min(a, b, C)))
        errs["lambda"] = max(errs["lambda"], float(np.abs(cert.lam - chain_lambda(C, face.usable)).max()))
        exact = diameter_linf(cert)[1]
        errs["diameter"] = max(errs["diameter"], abs(exact - exact_diameter_vertices(a, b, C, sol.value)))
        graphs.append((g, cert))
    return errs, graphs, time.perf_counter() - t0


def test_criterion_4_oracles(oracle_runs):
    errs, _, elapsed = oracle_runs
    ok = errs["value"] <= 1e-10 and errs["lambda"] <= 1e-12 and errs["diameter"] <= 1e-9 and elapsed < 120.0
    verdict(4, ok, f"max errors value={errs['value']:.2e} lambda={errs['lambda']:.2e} "
                   f"diameter={errs['diameter']:.2e}, {elapsed:.2f}s")


# criterion 5 ---------------------------------------------------------------


def test_criterion_5_invariants(sharpness, grid, uniqueness, oracle_runs):
    pairs = list(sharpness[2]) + list(grid[3])
    pairs += [(g, cert) for _, _, g, cert in uniqueness[0] + uniqueness[1]]
    pairs += list(oracle_runs[1])
    worst_cycle, member_fail, anchor_err = math.inf, 0, 0.0
    for g, cert in pairs:
        worst_cycle = min(worst_cycle, floyd_min_cycle(g.weight))
        if not (is_member(cert.phi_max, cert)[0] and is_member(cert.phi_min, cert)[0]):
            member_fail += 1
        exact = diameter_linf(cert)[1]
        # Fresh label-correcting runs (with their anchored cross-checks) at up to five anchors.
        for k in np.unique(np.linspace(0, cert.size - 1, 5).astype(int)):
            again = compute_lambda(g, int(k))
            anchor_err = max(anchor_err, abs(diameter_linf(again)[1] - exact))
    rng = np.random.default_rng(51)
    lip = -math.inf
    for _ in range(100):
        rho, mu = DiscreteMeasure(rng.random((5, 2))), DiscreteMeasure(rng.random((4, 2)))
        p0, p1 = rng.normal(size=5), rng.normal(size=5)
        c = CostSpec.quadratic()
        gap = np.abs(c_transform(p0, c, rho, mu) - c_transform(p1, c, rho, mu)).max()
        lip = max(lip, gap - np.abs(p0 - p1).max())
    ok = worst_cycle >= -1e-9 and member_fail == 0 and anchor_err <= 1e-12 and lip <= 1e-12
    verdict(5, ok, f"{len(pairs)} chain graphs, min cycle {worst_cycle:.3e}, membership failures "
                   f"{member_fail}, anchor spread {anchor_err:.2e}, Lipschitz excess {lip:.2e}")


# criterion 6 ---------------------------------------------------------------


def test_criterion_6_curve_chain_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(61)
    worst = -math.inf
    for _ in range(500):
        curve, atoms, ys, n, c, consts = random_curve_draw(rng)
        worst = max(worst, chain_sum_points(c, atoms, ys) - curve_bound_rhs(curve, atoms, n, consts).total)
    tele = 0
    for _ in range(100):
        n = int(rng.integers(1, 20))
        step = rng.integers(-5, 6, 2).astype(float)
        xs = rng.integers(-5, 6, 2).astype(float) + np.arange(n + 1)[:, None] * step
        ys = rng.integers(-9, 10, (n + 1, 2)).astype(float)
        if chain_sum_points(CostSpec.bilinear(), xs, ys) != float(step @ (ys[-1] - ys[0])):
            tele += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.0 and tele == 0 and elapsed < 10.0
    verdict(6, ok, f"max LHS - RHS over 500 draws {worst:.3e}, telescoping mismatches {tele}, {elapsed:.2f}s")


# criteria 7-9 --------------------------------------------------------------


def timed_config(name: str):
    cfg = load_config(CONFIGS / name)
    t0 = time.perf_counter()
    res = run_config(cfg)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def scaling():
    return timed_config("hausdorff_scaling.json")


@pytest.fixture(scope="module")
def empirical():
    return timed_config("empirical_mc.json")


def test_criterion_7_hausdorff_scaling(scaling):
    res, elapsed = scaling
    levels = sorted(set(res.column("level")))
    rows_ok = bool(np.all(res.column("certified") <= res.column("bound_curve"))
                   and np.all(res.column("exact") <= res.column("bound_k")))
    ok = res.passed and rows_ok and len(levels) == 6 and len(res.rows) == 120 and elapsed < 300.0
    verdict(7, ok, f"{len(res.rows)} rows within the explicit bound, measured slope "
                   f"{res.fit.slope:.4f} (informative), {elapsed:.2f}s")


def test_criterion_8_empirical_mc(empirical):
    res, elapsed = empirical
    means = res.summary["mean_exact"]
    inversions = res.summary["inversions"]
    slope = res.fit.slope
    ok = len(inversions) <= 1 and 0.3 <= slope <= 0.7 and elapsed < 600.0
    verdict(8, ok, f"means {[round(m, 6) for m in means]}, inversions {inversions}, "
                   f"slope {slope:.4f} (target [0.3, 0.7]), {elapsed:.2f}s")


def test_criterion_9_determinism(scaling, empirical, tmp_path):
    same = []
    for name, (first, _) in (("hausdorff_scaling.json", scaling), ("empirical_mc.json", empirical)):
        again, _ = timed_config(name)
        a, b = tmp_path / f"a_{name}.csv", tmp_path / f"b_{name}.csv"
        first.write(a)
        again.write(b)
        same.append(a.read_bytes() == b.read_bytes()
                    and json.loads(a.with_suffix(".json").read_text())["content_hash"]
                    == json.loads(b.with_suffix(".json").read_text())["content_hash"])
    verdict(9, all(same), f"byte-identical reruns: hausdorff_scaling={same[0]}, empirical_mc={same[1]}")
