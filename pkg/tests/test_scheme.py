import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import line_doc, star_doc
from slnet._accel import HAVE_NUMBA
from slnet.analysis import ProbeResult, consistency_probe
from slnet.io import initial_layer
from slnet.network import GridFunction, build_grid, load_scenario, network_from_dict
from slnet.scheme import (SchemeError, SchemeParams, Solver, apply_boundary, interpolate, sl_update_interior,
                          sl_update_junction, solve, step)
from slnet.traffic import rouen_like

STAR = network_from_dict(star_doc(A=-0.2, bc="neumann"))
STAR_GRID = build_grid(STAR, 0.1)


def smooth(grid, fx=1.3, fy=0.7):
    x, y = grid.positions().T
    return GridFunction(grid, np.sin(fx * x) + np.cos(fy * y), 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        SchemeParams(0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        SchemeParams(0.1, -1.0, 1.0)
    with pytest.raises(ValueError):
        SchemeParams(0.1, 0.1, 1.0, tie_break="random")
    assert SchemeParams(0.01, 0.025, 0.2).n_steps == 8


def test_interpolate_examples():
    grid = build_grid(network_from_dict(line_doc(length=1.0)), 0.25)
    v = GridFunction(grid, np.zeros(grid.n_samples), 0.0)
    s, _ = grid.arc_samples("E")
    vals = v.values.copy()
    vals[grid.arc_g[grid.arc_ptr[0]:grid.arc_ptr[1]]] = s ** 2
    v = v.with_values(vals)
    assert interpolate(v, "E", 0.25) == pytest.approx(0.0625)
    assert interpolate(v, "E", 0.375) == pytest.approx((0.0625 + 0.25) / 2)
    assert interpolate(v, "E", 1.0) == pytest.approx(1.0)


def test_linear_data_closed_form():
    grid = build_grid(network_from_dict(line_doc(length=4.0, c=0.3)), 0.05)
    s, _ = grid.arc_samples("E")
    m, b = 0.8, 0.2
    vals = np.empty(grid.n_samples)
    vals[grid.arc_g] = m * s + b
    v = GridFunction(grid, vals, 0.0)
    params = SchemeParams(0.05, 0.04, 0.04)
    for k in (20, 40, 60):
        val, wit = sl_update_interior(v, "E", k, params)
        assert val == pytest.approx(m * s[k] + b - params.dt * (m * m / 2 - 0.3), abs=1e-13)
        assert wit.branch == "stay"
        assert abs(wit.alpha_i) == pytest.approx(m)
    with pytest.raises(ValueError):
        sl_update_interior(v, "E", 0, params)


def test_constant_data_junction():
    v = GridFunction(STAR_GRID, np.zeros(STAR_GRID.n_samples), 0.0)
    params = SchemeParams(0.1, 0.02, 0.02)
    val, wit = sl_update_junction(v, "O", params)
    assert val == pytest.approx(0.2 * params.dt, abs=1e-15)
    assert wit.branch in ("junction", "cross")
    nxt = step(v, params)
    for a, c in enumerate((0.5, 1.0, 2.0)):
        _, vals = nxt.on_arc(a)
        assert vals[3:] == pytest.approx(c * params.dt, abs=1e-15)
    with pytest.raises(ValueError):
        sl_update_junction(v, "B0", params)


def test_probe_branches_match_closed_form():
    for dx, r in ((0.01, 0.5), (0.01, 1.0), (0.02, 2.0), (0.05, 0.2)):
        dt = r * dx
        p = consistency_probe(dx, dt)
        sc1, sc2 = ProbeResult.expected(dx, dt)
        if r <= 1:
            # beyond this ratio the stationary foot would leave the arc
            assert p.stay_value == pytest.approx(sc1, abs=1e-12)
        if r >= 1 / math.sqrt(3):
            # below this ratio the crossing control cannot reach the node in time
            assert p.cross_value == pytest.approx(sc2, abs=1e-12)
        assert p.value == pytest.approx(min(sc1, sc2), abs=1e-12)
    cross = consistency_probe(0.01, 0.01).witness
    assert cross.branch == "cross" and cross.arc_j == "J1"
    assert cross.alpha_i == pytest.approx(math.sqrt(3), abs=1e-6)
    assert cross.alpha_j == pytest.approx(-1.0, abs=1e-6)


def test_witness_branch_consistency():
    v = smooth(STAR_GRID)
    solver = Solver(STAR_GRID, SchemeParams(0.1, 0.03, 0.03))
    res = solver.raw_step(v)
    for g in range(STAR_GRID.n_samples):
        w = solver.witness(res, g)
        if w.branch == "stay":
            assert w.value == w.stay_value <= w.cross_value + 1e-13
        elif w.branch == "cross":
            assert w.value == w.cross_value < w.stay_value
        assert w.value == pytest.approx(min(w.stay_value, w.cross_value), abs=1e-13)


def test_dirichlet_boundary_applied():
    net = network_from_dict(star_doc(bc="dirichlet", value=1.5))
    grid = build_grid(net, 0.1)
    v = apply_boundary(GridFunction(grid, np.zeros(grid.n_samples), 0.0), 0.0)
    for i in range(3):
        assert v.at_node(f"B{i}") == 1.5
    out = step(v, SchemeParams(0.1, 0.02, 0.02))
    assert out.at_node("B1") == 1.5


def test_neumann_zero_keeps_constant_line():
    grid = build_grid(network_from_dict(line_doc(length=1.0, c=0.0)), 0.1)
    v = GridFunction(grid, np.full(grid.n_samples, 3.0), 0.0)
    res = solve(grid, v, SchemeParams(0.1, 0.05, 1.0))
    assert res.final.values == pytest.approx(3.0, abs=1e-15)


def test_short_horizon_returns_initial_layer():
    v = smooth(STAR_GRID)
    res = solve(STAR_GRID, v, SchemeParams(0.1, 0.05, 0.01))
    assert res.n_steps == 0
    assert np.array_equal(res.final.values, v.values)


def test_snapshots_round_down():
    v = smooth(STAR_GRID)
    res = solve(STAR_GRID, v, SchemeParams(0.1, 0.02, 0.1), snapshots=[0.0, 0.05, 0.1])
    assert res.times == pytest.approx([0.0, 0.04, 0.1])


def test_one_node_rule_violation():
    v = smooth(STAR_GRID, fx=3.0)
    with pytest.raises(SchemeError):
        step(v, SchemeParams(0.1, 2.0, 2.0))


def test_nan_input_is_rejected():
    vals = smooth(STAR_GRID).values.copy()
    vals[5] = np.nan
    with pytest.raises((SchemeError, ValueError)):
        solve(STAR_GRID, GridFunction(STAR_GRID, vals, 0.0), SchemeParams(0.1, 0.02, 0.04))


data = st.lists(st.floats(-1, 1), min_size=STAR_GRID.n_samples, max_size=STAR_GRID.n_samples).map(np.array)


@settings(max_examples=30, deadline=None)
@given(data, data)
def test_monotone_property(a, b):
    solver = Solver(STAR_GRID, SchemeParams(0.1, 0.02, 0.02))
    lo = GridFunction(STAR_GRID, np.minimum(a, b), 0.0)
    hi = GridFunction(STAR_GRID, np.maximum(a, b), 0.0)
    assert np.all(solver.step(lo).values <= solver.step(hi).values + 1e-12)


@settings(max_examples=30, deadline=None)
@given(data, st.floats(-5, 5))
def test_commutes_with_constants(a, c):
    solver = Solver(STAR_GRID, SchemeParams(0.1, 0.02, 0.02))
    v = GridFunction(STAR_GRID, a, 0.0)
    assert solver.step(v.with_values(a + c)).values == pytest.approx(solver.step(v).values + c, abs=1e-12)


def hopf_lax(u0, x, t, y):
    return np.min(u0(y)[None, :] + (x[:, None] - y[None, :]) ** 2 / (2 * t), axis=1)


def test_first_order_against_hopf_lax():
    """Line with ``L = alpha**2/2`` and smooth data: error halves with dx."""
    u0 = lambda s: np.sin(1.5 * s)
    y = np.linspace(-2, 6, 400001)
    errs = []
    for dx in (0.04, 0.02, 0.01):
        grid = build_grid(network_from_dict(line_doc(length=4.0)), dx)
        s, _ = grid.arc_samples("E")
        vals = np.empty(grid.n_samples)
        vals[grid.arc_g] = u0(s)
        res = solve(grid, GridFunction(grid, vals, 0.0), SchemeParams(dx, 2 * dx, 0.4))
        _, w = res.final.on_arc("E")
        inner = (s > 1.0) & (s < 3.0)
        errs.append(np.max(np.abs(w[inner] - hopf_lax(u0, s[inner], 0.4, y))))
    assert errs[0] / errs[1] > 1.6 and errs[1] / errs[2] > 1.6


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("case", ["star", "test2", "counterexample", "rouen"])
def test_backends_agree(case):
    if case == "star":
        grid, v, dt = STAR_GRID, smooth(STAR_GRID), 0.03
    elif case == "rouen":
        grid = build_grid(network_from_dict(rouen_like()), 0.01)
        v = smooth(grid, 4.0, 3.0)
        v, dt = v.with_values(0.05 * v.values), 0.05
    else:
        scen = load_scenario(case)
        grid = build_grid(scen.net, 0.02, scen.params.get("grid_policy", "strict"))
        v, dt = apply_boundary(initial_layer(scen, grid), 0.0), 0.04
    results = [Solver(grid, SchemeParams(grid.dx, dt, dt, backend=b)).raw_step(v) for b in ("numba", "numpy")]
    nb, npy = results
    assert np.max(np.abs(nb.value - npy.value)) <= 1e-12
    assert np.array_equal(nb.branch, npy.branch)
    assert np.max(np.abs(nb.s0 - npy.s0)) <= 1e-9


def test_env_flag_selects_numpy(monkeypatch):
    from slnet._accel import default_backend, resolve_backend

    monkeypatch.setenv("SLNET_DISABLE_NUMBA", "1")
    assert default_backend() == "numpy"
    assert resolve_backend(None) == "numpy"
    monkeypatch.delenv("SLNET_DISABLE_NUMBA")
    assert default_backend() == ("numba" if HAVE_NUMBA else "numpy")
