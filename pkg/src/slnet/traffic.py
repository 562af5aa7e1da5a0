"""Traffic reading of the value function: flux Hamiltonians, densities, evacuation runs.

The value ``u`` plays the role of a cumulative vehicle count, so the density
is the rate at which ``u`` drops along the direction of travel.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .hamiltonian import FluxCapacity, MINUS_INFINITY, QuadraticX
from .network import Arc, Grid, GridFunction, Network, Node, BoundaryCondition, build_grid
from .scheme import SchemeParams, Solver, apply_boundary, solve

log = logging.getLogger(__name__)


class TrafficError(RuntimeError):
    pass


@dataclass(frozen=True)
class FluxModel:
    """Concave flux ``f(rho) = rho (1 - rho / lam)`` scaled by ``gamma``.

    Its sign-split Hamiltonian ``-(1/gamma) f(gamma |p|)`` simplifies to
    ``gamma p**2 / lam - |p|``.  Only the convex hull of that function is a
    Legendre transform; the hull differs from it on ``|p| < lam / (2 gamma)``
    where it is flat at its minimum.
    """

    lam: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0 and self.gamma > 0):
            raise TrafficError("flux capacity and scaling must be positive")

    def flux(self, rho):
        rho = np.asarray(rho, float)
        return rho * (1.0 - rho / self.lam)

    def hamiltonian(self, p):
        """Sign-split flux Hamiltonian as written for the traffic model (not convexified)."""
        p = np.abs(np.asarray(p, float))
        return -self.flux(self.gamma * p) / self.gamma


def hamiltonian_from_flux(model: FluxModel) -> FluxCapacity:
    """Lagrangian whose transform is the convex hull of ``model.hamiltonian``.

    ``gamma p**2 / lam - |p|`` equals ``p**2 / lam' - |p|`` with
    ``lam' = lam / gamma``.
    """
    lam = model.lam / model.gamma
    if not (0 < lam <= 1):
        raise TrafficError(f"effective capacity {lam} outside (0, 1]")
    return FluxCapacity(lam)


@dataclass
class DensityField:
    """Density per sample (arc samples only) and per node, at time ``t``."""

    grid: Grid
    t: float
    arc_rho: List[np.ndarray]
    node_rho: np.ndarray
    cap: float = 1.0

    def arc_max(self) -> float:
        return max(float(np.max(r[1:-1])) if r.size > 2 else -math.inf for r in self.arc_rho)

    def node_max(self) -> float:
        return float(np.max(self.node_rho))

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.node_rho)) and all(np.all(np.isfinite(r)) for r in self.arc_rho))

    def out_of_range(self) -> int:
        bad = int(np.sum((self.node_rho < 0) | (self.node_rho > self.cap)))
        return bad + sum(int(np.sum((r < 0) | (r > self.cap))) for r in self.arc_rho)


def density_from_value(u: GridFunction, cap: float = 1.0) -> DensityField:
    """Density read off a value layer.

    On an arc the density is ``|u_s|``: the slope measured along the local
    direction in which ``u`` decreases, which is the direction of travel.
    Centred differences inside, one-sided at the ends.  At a node it is
    ``-sum_i min(d_i u, 0)`` with ``d_i u`` the one-sided derivative into arc
    ``i``.  Values outside ``[0, cap]`` are logged, not clipped.
    """
    grid = u.grid
    arc_rho = []
    node_rho = np.zeros(len(grid.net.nodes))
    idx = grid.net.node_index
    for a, arc in enumerate(grid.net.arcs):
        s, vals = u.on_arc(a)
        h = grid.arc_h[a]
        arc_rho.append(np.abs(np.gradient(vals, h)) if vals.size > 2 else np.full(vals.size, abs(vals[1] - vals[0]) / h))
        d_tail = (vals[1] - vals[0]) / h
        d_head = (vals[-2] - vals[-1]) / h
        node_rho[idx[arc.tail]] -= min(d_tail, 0.0)
        node_rho[idx[arc.head]] -= min(d_head, 0.0)
    field = DensityField(grid, u.t, arc_rho, node_rho, cap)
    bad = field.out_of_range()
    if bad:
        log.info("t=%.4g: %d density samples outside [0, %g]", u.t, bad, cap)
    return field


def _position_poly(net: Network, arc: Arc):
    idx = net.node_index
    p0 = np.asarray(net.nodes[idx[arc.tail]].position, float)
    p1 = np.asarray(net.nodes[idx[arc.head]].position, float)
    return p0, (p1 - p0) / arc.length


def eikonal_network(net: Network, rhs_coeffs: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Network:
    """Copy of ``net`` whose arcs cost ``alpha**2 / 2 + rhs**2 / 2``.

    ``rhs_coeffs(p0, d)`` returns the coefficients, in the arc coordinate, of
    the polynomial ``rhs(p0 + s d)``.  Junctions get no staying option.
    """
    arcs = []
    for arc in net.arcs:
        p0, d = _position_poly(net, arc)
        r = np.asarray(rhs_coeffs(p0, d), float)
        c = np.polynomial.polynomial.polymul(r, r) / 2.0
        arcs.append(Arc(arc.id, arc.tail, arc.head, arc.length, QuadraticX(tuple(c))))
    nodes = tuple(Node(n.id, n.kind, MINUS_INFINITY, n.bc, n.position) for n in net.nodes)
    return Network(nodes, tuple(arcs))


def radial_rhs(base: float, center: Sequence[float], k: float):
    """``rhs(x) = base - k |x - center|**2`` as a coefficient builder for ``eikonal_network``."""
    cx = np.asarray(center, float)

    def coeffs(p0, d):
        q = p0 - cx
        return np.array([base - k * q @ q, -2.0 * k * (q @ d), -k * (d @ d)])

    return coeffs


def eikonal_initializer(net: Network, grid: Grid, rhs_coeffs, dt: float, tol: float = 1e-8,
                        max_iter: int = 100000, backend=None) -> GridFunction:
    """Stationary solution of ``|v_s| = rhs``, ``v = 0`` on Dirichlet exits.

    Marches the evolutive scheme from ``v = 0`` until successive layers agree
    to ``tol``.  ``rhs`` must be non-negative on the network.
    """
    enet = eikonal_network(net, rhs_coeffs)
    for arc in enet.arcs:
        s = np.linspace(0.0, arc.length, 17)
        p0, d = _position_poly(net, arc)
        if np.any(np.polynomial.polynomial.polyval(s, rhs_coeffs(p0, d)) < -1e-12):
            raise TrafficError(f"rhs is negative on arc {arc.id}")
    egrid = type(grid)(enet, grid.dx, grid.arc_n, grid.arc_h, grid.arc_ptr, grid.arc_g)
    params = SchemeParams(grid.dx, dt, dt, backend=backend)
    solver = Solver(egrid, params)
    v = apply_boundary(GridFunction(egrid, np.zeros(egrid.n_samples), 0.0), 0.0)
    for _ in range(max_iter):
        nxt = solver.step(v)
        if np.max(np.abs(nxt.values - v.values)) <= tol:
            return GridFunction(grid, nxt.values, 0.0)
        v = GridFunction(egrid, nxt.values, 0.0)
    raise TrafficError(f"eikonal iteration did not settle within {max_iter} steps")


def run_evacuation(net: Network, grid: Grid, u0: GridFunction, params: SchemeParams,
                   snapshots: Sequence[float], cap: float = 1.0) -> List[DensityField]:
    """Solve from ``u0`` and map the requested snapshots to densities."""
    res = solve(grid, u0, params, snapshots=snapshots)
    return [density_from_value(layer, cap) for layer in res.snapshots]


# ----------------------------------------------------------------------------
# synthetic city network


def rouen_like(rows: int = 4, cols: int = 5, seed: int = 7) -> Dict:
    """A small road grid in the unit square with exits at its rim.

    Junctions sit on a jittered ``rows x cols`` lattice.  Every other column
    and the middle row form the large roads (capacity 1); the remaining
    streets have capacity 0.8.  Each rim junction of the outer columns and of
    the bottom and top rows in alternate positions gets a short exit arc to a
    boundary node with zero Dirichlet data.  Arc lengths are the Euclidean
    lengths rounded to 0.01 so they stay commensurate with the grids used.
    """
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.18, 0.82, cols)
    ys = np.linspace(0.18, 0.82, rows)
    pos = {}
    nodes = []
    for r in range(rows):
        for c in range(cols):
            nid = f"n{r}{c}"
            p = np.array([xs[c], ys[r]]) + rng.uniform(-0.03, 0.03, 2)
            pos[nid] = p
            nodes.append({"id": nid, "kind": "junction", "A": -0.4, "position": [round(float(p[0]), 4), round(float(p[1]), 4)]})
    arcs = []

    def add(a, b, lam, exit_pos=None):
        pa = pos[a]
        pb = pos[b] if exit_pos is None else exit_pos
        length = max(round(float(np.linalg.norm(pb - pa)), 2), 0.05)
        arcs.append({"id": f"{a}-{b}", "from": a, "to": b, "length": length,
                     "lagrangian": {"type": "flux", "lambda": lam}})

    for r in range(rows):
        for c in range(cols - 1):
            add(f"n{r}{c}", f"n{r}{c + 1}", 1.0 if r == rows // 2 else 0.8)
    for c in range(cols):
        for r in range(rows - 1):
            add(f"n{r}{c}", f"n{r + 1}{c}", 1.0 if c % 2 == 0 else 0.8)
    exits = []
    for r in range(rows):
        exits.append((f"n{r}0", np.array([0.02, pos[f"n{r}0"][1]])))
        exits.append((f"n{r}{cols - 1}", np.array([0.98, pos[f"n{r}{cols - 1}"][1]])))
    for c in range(1, cols - 1, 2):
        exits.append((f"n0{c}", np.array([pos[f"n0{c}"][0], 0.02])))
        exits.append((f"n{rows - 1}{c}", np.array([pos[f"n{rows - 1}{c}"][0], 0.98])))
    exits = exits[::2] + [exits[-1]]
    for k, (src, p) in enumerate(exits):
        eid = f"x{k}"
        pos[eid] = p
        nodes.append({"id": eid, "kind": "boundary", "position": [round(float(p[0]), 4), round(float(p[1]), 4)],
                      "bc": {"kind": "dirichlet", "value": 0.0}})
        add(src, eid, 1.0)
    return {"nodes": nodes, "arcs": arcs}
