import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slnet.hamiltonian import (FluxCapacity, HamiltonianSpec, JunctionCost, MINUS_INFINITY, Quadratic, QuadraticX,
                               Tabulated, control_bound, cost, flux_limiter_F, h_minus, h_plus, lagrangian_from_dict,
                               lagrangian_to_dict, legendre, optimal_control, p_hat)

ALPHAS = np.linspace(-300, 300, 1200001)


def numeric_conjugate(spec, p, s=0.0):
    """Brute-force ``sup_alpha (alpha p - L)`` on a dense grid."""
    alphas = ALPHAS if spec.table is None else np.union1d(ALPHAS, spec.table[0])
    vals = alphas * p - cost(spec, s, alphas)
    return float(np.max(vals))


specs = st.one_of(
    st.builds(Quadratic, st.floats(-3, 3)),
    st.builds(FluxCapacity, st.floats(0.05, 1.0)),
    st.builds(lambda lo, hi, c: Tabulated((-lo, 0.0, hi), (c + lo, c, c + 2 * hi)),
              st.floats(0.5, 4), st.floats(0.5, 4), st.floats(-2, 2)),
)
slopes = st.floats(-5, 5)


def test_legendre_examples():
    assert legendre(Quadratic(2.0), 0.0, 2.0) == pytest.approx(0.0)
    assert legendre(Quadratic(0.5), 0.0, 0.0) == pytest.approx(-0.5)
    assert legendre(FluxCapacity(1.0), 0.0, 0.5) == pytest.approx(-0.25)


def test_h_minus_examples():
    q = Quadratic(1.0)
    assert h_minus(q, 0.0, 0.0) == pytest.approx(-1.0)
    assert h_minus(q, 0.0, 1.0) == pytest.approx(-1.0)
    assert h_minus(q, 0.0, -1.0) == pytest.approx(-0.5)


def test_flux_is_convex_hull():
    f = FluxCapacity(0.5)
    for p in (-2.0, -0.25, 0.0, 0.1, 0.25, 1.0, 3.0):
        expected = p * p / 0.5 - abs(p) if abs(p) >= 0.25 else -0.5 / 4
        assert legendre(f, 0.0, p) == pytest.approx(expected, abs=1e-14)


def test_flux_control_bound_uses_exact_formula():
    f = FluxCapacity(0.5)
    P = 2.0
    assert control_bound([f], P) == pytest.approx(2 * P / 0.5 - 1)
    assert control_bound([f], 0.1) == 0.0


def test_quadratic_control_bound():
    assert control_bound([Quadratic(0.5), Quadratic(2.0)], 3.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        control_bound([], 1.0)


@settings(max_examples=60, deadline=None)
@given(specs, slopes)
def test_conjugate_matches_brute_force(spec, p):
    assert legendre(spec, 0.0, p) == pytest.approx(numeric_conjugate(spec, p), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(specs, slopes)
def test_h_is_max_of_branches(spec, p):
    assert legendre(spec, 0.0, p) == pytest.approx(max(h_minus(spec, 0.0, p), h_plus(spec, 0.0, p)), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(specs, slopes, slopes)
def test_branches_are_monotone(spec, p, q):
    lo, hi = min(p, q), max(p, q)
    assert h_minus(spec, 0.0, lo) >= h_minus(spec, 0.0, hi) - 1e-12
    assert h_plus(spec, 0.0, lo) <= h_plus(spec, 0.0, hi) + 1e-12


@settings(max_examples=60, deadline=None)
@given(specs)
def test_minimum_of_h_is_minus_cost_at_rest(spec):
    ph = p_hat(spec)
    assert legendre(spec, 0.0, ph) == pytest.approx(-float(cost(spec, 0.0, 0.0)), abs=1e-12)
    grid = np.linspace(-5, 5, 2001)
    assert np.min(legendre(spec, 0.0, grid)) >= -float(cost(spec, 0.0, 0.0)) - 1e-12


@settings(max_examples=60, deadline=None)
@given(specs, slopes)
def test_optimal_control_attains_conjugate(spec, p):
    a = optimal_control(spec, p)
    assert a * p - cost(spec, 0.0, a) == pytest.approx(legendre(spec, 0.0, p), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-5, 5))
def test_quadratic_biconjugate(c, alpha):
    ps = np.linspace(-80, 80, 320001)
    back = np.max(alpha * ps - legendre(Quadratic(c), 0.0, ps))
    assert back == pytest.approx(alpha * alpha / 2 + c, abs=1e-6)


def test_quadratic_x_offset():
    q = QuadraticX((1.0, 2.0))
    assert cost(q, 0.5, 0.0) == pytest.approx(2.0)
    assert legendre(q, 0.5, 1.0) == pytest.approx(0.5 - 2.0)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        Tabulated((1.0, 2.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        Tabulated((-1.0, 1.0, 0.5), (0.0, 1.0, 2.0))
    with pytest.raises(ValueError):
        Tabulated((-1.0, 0.0, 1.0), (0.0, 1.0, 0.0))


def test_dict_round_trip():
    for spec in (Quadratic(0.5), QuadraticX((1.0, 0.0, 2.0)), FluxCapacity(0.3),
                 Tabulated((-1.0, 0.0, 2.0), (1.0, 0.0, 3.0))):
        assert lagrangian_from_dict(lagrangian_to_dict(spec)) == spec
    with pytest.raises(ValueError):
        lagrangian_from_dict({"type": "cubic"})


def test_flux_limiter():
    specs = [HamiltonianSpec(Quadratic(1.0)), HamiltonianSpec(Quadratic(1.0))]
    assert flux_limiter_F(-2.0, [0.0, -1.0], specs) == pytest.approx(-0.5)
    assert flux_limiter_F(0.0, [0.0, -1.0], specs) == 0.0
    assert flux_limiter_F(MINUS_INFINITY, [1.0, 1.0], [Quadratic(1.0)] * 2) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        flux_limiter_F(0.0, [0.0], specs)


def test_junction_cost():
    assert JunctionCost(-0.4).staying_cost == pytest.approx(0.4)
    assert math.isinf(JunctionCost().staying_cost)
