"""The nine acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, star_doc
from slnet.analysis import (PROBE_SWITCH, ProbeResult, consistency_probe, convergence_study, lipschitz_constant,
                            one_step_defect, probe_switch_ratio, run_scenario)
from slnet.io import initial_layer
from slnet.network import GridFunction, Scenario, build_grid, load_scenario, network_from_dict
from slnet.scheme import SchemeParams, Solver, apply_boundary, solve
from slnet.traffic import density_from_value


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_probe():
    consistency_probe(0.01, 0.005)
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for dx in (0.01, 0.02, 0.05, 0.1):
        for r in rng.uniform(0.05, 3.0, 5):
            dt = r * dx
            p = consistency_probe(dx, dt)
            sc1, sc2 = ProbeResult.expected(dx, dt)
            worst = max(worst, abs(p.value - min(sc1, sc2)))
            assert p.branch == ("stay" if sc1 <= sc2 else "cross")
    switch = probe_switch_ratio()
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and abs(switch - PROBE_SWITCH) <= 1e-9 and secs < 1.0
    assert record(1, ok, f"max|w-min(sc1,sc2)|={worst:.2e} switch={switch:.12f} time={secs:.2f}s")


def test_criterion_2_test2_order():
    rep = convergence_study("test2", [0.04, 0.02, 0.01, 0.005], 2.5, 2.0)
    ok = 0.8 <= rep.order <= 1.2 and 6.5 / 2 <= rep.constant <= 6.5 * 2 and rep.seconds < 60
    errs = " ".join(f"{r[2]:.4g}" for r in rep.rows)
    assert record(2, ok, f"errors=[{errs}] q={rep.order:.3f} C={rep.constant:.3g} time={rep.seconds:.1f}s")


def test_criterion_3_test1_order():
    t0 = time.perf_counter()
    parts, ok = [], True
    for A, target in ((0.0, 4.5), (-0.2, 2.0)):
        rep = convergence_study("test1", [0.02, 0.01, 0.005], 2.5, 0.2, ref="fine", ref_dx=5e-4, ref_ratio=1.0, A=A)
        ratios = rep.ratios()
        ok &= 0.8 <= rep.order <= 1.2 and all(1.6 <= r <= 2.4 for r in ratios)
        ok &= target / 2 <= rep.constant <= target * 2
        parts.append(f"A={A:g}: q={rep.order:.3f} ratios={[round(r, 3) for r in ratios]} C={rep.constant:.3g}")
    secs = time.perf_counter() - t0
    ok &= secs < 120
    assert record(3, ok, "; ".join(parts) + f" time={secs:.1f}s")


def test_criterion_4_monotone():
    net = network_from_dict(star_doc())
    grid = build_grid(net, 0.1)
    params = SchemeParams(0.1, 0.02, 0.02)
    solver = Solver(grid, params)
    rng = np.random.default_rng(4)
    worst = -math.inf
    for _ in range(100):
        v = rng.uniform(-1, 1, grid.n_samples)
        w = v + rng.uniform(0, 1, grid.n_samples) * (rng.random(grid.n_samples) < 0.5)
        sv = solver.step(apply_boundary(GridFunction(grid, v, 0.0), 0.0))
        sw = solver.step(apply_boundary(GridFunction(grid, w, 0.0), 0.0))
        worst = max(worst, float(np.max(sv.values - sw.values)))
    assert record(4, worst <= 1e-12, f"max(S[v]-S[w]) over 100 ordered pairs = {worst:.2e}")


def test_criterion_5_commutation():
    net = network_from_dict(star_doc(bc="neumann"))
    grid = build_grid(net, 0.1)
    solver = Solver(grid, SchemeParams(0.1, 0.02, 0.02))
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        v = GridFunction(grid, rng.uniform(-1, 1, grid.n_samples), 0.0)
        c = float(rng.uniform(-10, 10))
        lhs = solver.step(v.with_values(v.values + c)).values
        rhs = solver.step(v).values + c
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert record(5, worst <= 1e-12, f"max|S[v+c]-S[v]-c| over 50 trials = {worst:.2e}")


def test_criterion_6_stability():
    scen = load_scenario("test1")
    worst, Ks = -math.inf, []
    for A in (0.0, -0.2):
        net = scen.net.replace(A=A)
        sc = Scenario(scen.name, net, scen.params, scen.initial)
        grid = build_grid(net, 0.01)
        u0 = initial_layer(sc, grid)
        params = SchemeParams(0.01, 0.025, 2.0)
        K = one_step_defect(grid, u0, params)
        Ks.append(K)
        base = apply_boundary(u0, 0.0).values
        res = solve(grid, u0, params, snapshots=[n * params.dt for n in range(params.n_steps + 1)])
        for w in res.snapshots:
            worst = max(worst, float(np.max(np.abs(w.values - base))) - K * w.t)
    ok = worst <= 1e-12
    assert record(6, ok, f"max(|w_n-u0| - K t_n)={worst:.2e} K={[round(k, 4) for k in Ks]}")


def test_criterion_7_lipschitz():
    scen = load_scenario("test1")
    lips = []
    for dx in (0.01, 0.005):
        _, res = run_scenario(scen, dx, 2.5 * dx, 0.2)
        lips.append(lipschitz_constant(res.final))
    rel = abs(lips[1] - lips[0]) / lips[0]
    assert record(7, rel <= 0.10, f"Lip(w(T)) dx={lips[0]:.5f} dx/2={lips[1]:.5f} rel={rel:.2e}")


def test_criterion_8_zero_node():
    scen = load_scenario("test1")
    net = scen.net.replace(A=0.0)
    grid = build_grid(net, 0.01)
    u0 = initial_layer(Scenario(scen.name, net, scen.params, scen.initial), grid)
    params = SchemeParams(0.01, 0.025, 2.0)
    res = solve(grid, u0, params, snapshots=[n * params.dt for n in range(params.n_steps + 1)])
    worst = max(abs(w.at_node("O")) for w in res.snapshots)
    assert record(8, worst <= 1e-12, f"max_n |w(t_n,0)| = {worst:.2e} over {len(res.snapshots)} levels")


def test_criterion_9_rouen():
    t0 = time.perf_counter()
    scen = load_scenario("rouen")
    grid, res = run_scenario(scen, 0.01, 0.05, 1.5, snapshots=[n * 0.05 for n in range(31)])
    fields = [density_from_value(w) for w in res.snapshots]
    secs = time.perf_counter() - t0
    finite = all(f.all_finite() for f in fields)
    node_min = min(float(np.min(f.node_rho)) for f in fields)
    init_arc = fields[0].arc_max()
    peak = max((f.node_max(), f.t) for f in fields[1:])
    ok = finite and node_min >= 0 and peak[0] > init_arc and secs < 120
    assert record(9, ok, f"finite={finite} min node rho={node_min:.3g} initial arc max={init_arc:.4f} "
                         f"node peak={peak[0]:.4f} at t={peak[1]:.2f} time={secs:.1f}s")
