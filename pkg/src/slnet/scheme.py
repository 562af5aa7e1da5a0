"""The semi-Lagrangian operator on a network and its time marching.

One step replaces every sample value by the cheapest way to reach it in
time ``dt``: either staying on its arc, or running to an end node, possibly
waiting there at the staying cost, and leaving along one of the arcs at that
node.  Both inner problems are solved exactly (see ``kernels``).
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .kernels import BRANCH_CROSS, BRANCH_JUNCTION, BRANCH_STAY, Layout, StepResult
from .network import Grid, GridFunction

NODE_TYPES = {"dirichlet": kernels.NODE_DIRICHLET, "neumann": kernels.NODE_NEUMANN,
              "outflow": kernels.NODE_OUTFLOW}
BRANCH_NAMES = {0: "boundary", BRANCH_STAY: "stay", BRANCH_CROSS: "cross", BRANCH_JUNCTION: "junction"}
STEP_SLACK = 1e-9


class SchemeError(RuntimeError):
    """Raised when a step cannot be taken (CFL-type violation, blow-up)."""


@dataclass(frozen=True)
class SchemeParams:
    """Discretisation parameters.

    ``mu`` is a floor for the per-step control bound; the bound actually used
    is recomputed each step from the current slopes, which already certifies
    it.  ``n_alpha`` is kept for scenario compatibility: every variant is
    minimised exactly, so no control sampling happens.
    """

    dx: float
    dt: float
    T: float
    mu: float = 0.0
    n_alpha: int = 0
    tie_break: str = "stay-then-lowest-arc"
    tol: float = 1e-13
    backend: Optional[str] = None

    def __post_init__(self):
        for name in ("dx", "dt"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive, got {val}")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ValueError(f"T must be non-negative, got {self.T}")
        if self.tie_break != "stay-then-lowest-arc":
            raise ValueError(f"unsupported tie-break policy {self.tie_break!r}")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T / self.dt + STEP_SLACK))

    def step_index(self, t: float) -> int:
        """Index of the last time level not after ``t``."""
        return int(math.floor(t / self.dt + STEP_SLACK))


@dataclass(frozen=True)
class UpdateWitness:
    """Minimiser found for one sample.

    ``alpha_i`` is the velocity on the sample's own arc: along increasing
    ``s`` for ``stay``, and the speed ``|x| / tau`` towards the crossed node
    for ``cross``.  ``alpha_j <= 0`` is the departure velocity on ``arc_j``,
    measured positive away from the node as in the junction formula.
    """

    branch: str
    value: float
    alpha_i: float = 0.0
    s0: float = 0.0
    node: Optional[str] = None
    arc_j: Optional[str] = None
    alpha_j: float = 0.0
    stay_value: float = math.inf
    cross_value: float = math.inf


def build_layout(grid: Grid) -> Layout:
    net = grid.net
    arc_kind, arc_lam, arc_tid, arc_c = [], [], [], []
    tables: List[np.ndarray] = []
    tab_v: List[np.ndarray] = []
    tab_ptr = [0]
    for a, arc in enumerate(net.arcs):
        spec = arc.lagrangian
        s = np.arange(grid.arc_n[a] + 1) * grid.arc_h[a]
        arc_kind.append(spec.kind)
        arc_lam.append(spec.lam)
        arc_c.append(spec.offset(s))
        if spec.table is not None:
            ta, tv = spec.table
            arc_tid.append(len(tables))
            tables.append(ta)
            tab_v.append(tv)
            tab_ptr.append(tab_ptr[-1] + ta.size)
        else:
            arc_tid.append(0)
    idx = net.node_index
    node_type, bar_l0 = [], []
    inc_ptr, inc_arc, inc_sig = [0], [], []
    for n in net.nodes:
        if n.kind == "junction":
            node_type.append(kernels.NODE_JUNCTION)
            bar_l0.append(-n.A)
        else:
            node_type.append(NODE_TYPES[n.bc.kind])
            bar_l0.append(math.inf)
        for a, sig in net.incident(n.id):
            inc_arc.append(a)
            inc_sig.append(sig)
        inc_ptr.append(len(inc_arc))
    i64 = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    f64 = lambda x: np.asarray(x, dtype=np.float64)  # noqa: E731
    return Layout(
        arc_ptr=i64(grid.arc_ptr), arc_n=i64(grid.arc_n), arc_h=f64(grid.arc_h),
        arc_len=f64([a.length for a in net.arcs]), arc_kind=i64(arc_kind), arc_lam=f64(arc_lam),
        arc_tid=i64(arc_tid), arc_from=i64([idx[a.tail] for a in net.arcs]),
        arc_to=i64([idx[a.head] for a in net.arcs]), arc_g=i64(grid.arc_g), arc_c=f64(np.concatenate(arc_c)),
        node_g=np.arange(len(net.nodes), dtype=np.int64), node_type=i64(node_type), node_bar_l0=f64(bar_l0),
        node_inc_ptr=i64(inc_ptr), node_inc_arc=i64(inc_arc), node_inc_sig=i64(inc_sig),
        tab_a=f64(np.concatenate(tables)) if tables else np.zeros(0),
        tab_v=f64(np.concatenate(tab_v)) if tables else np.zeros(0),
        tab_ptr=i64(tab_ptr), n_samples=grid.n_samples)


def interpolate(v: GridFunction, arc, s) -> np.ndarray:
    """Piecewise-linear interpolant of ``v`` on one arc."""
    pos, vals = v.on_arc(arc)
    s_arr = np.asarray(s, float)
    if np.any(s_arr < -1e-12) or np.any(s_arr > pos[-1] + 1e-12):
        raise ValueError(f"position outside arc {arc}")
    return np.interp(s_arr, pos, vals)


class Solver:
    """Marches grid functions on one grid; the layout is built once."""

    def __init__(self, grid: Grid, params: SchemeParams):
        self.grid = grid
        self.params = params
        self.layout = build_layout(grid)
        self._bcs = [n.bc for n in grid.net.nodes]
        self.min_length = float(np.min(self.layout.arc_len))

    def boundary_values(self, t: float) -> np.ndarray:
        return np.array([bc.at(t) if bc is not None else 0.0 for bc in self._bcs])

    def raw_step(self, v: GridFunction) -> StepResult:
        p = self.params
        lay = self.layout
        bval = self.boundary_values(v.t)
        bnext = self.boundary_values(v.t + p.dt)
        big_m = kernels.max_slope(lay, v.values, bval)
        mu_arc = kernels.control_bounds(lay, v.values, bval, p.mu)
        reach = float(np.max(mu_arc)) * p.dt
        if reach > self.min_length * (1 + 1e-12):
            raise SchemeError(f"control bound {float(np.max(mu_arc)):.6g} times dt = {reach:.6g} exceeds the "
                              f"shortest arc {self.min_length:.6g}; reduce dt")
        return kernels.run_step(lay, v.values, p.dt, mu_arc, big_m, bval, bnext, p.tol, p.backend)

    def step(self, v: GridFunction) -> GridFunction:
        res = self.raw_step(v)
        bad = ~np.isfinite(res.value)
        if np.any(bad):
            g = int(np.flatnonzero(bad)[0])
            raise SchemeError(f"non-finite value at sample {g} after t = {v.t + self.params.dt:.6g}")
        return GridFunction(self.grid, res.value, v.t + self.params.dt)

    def witness(self, res: StepResult, g: int) -> UpdateWitness:
        net = self.grid.net
        b = int(res.branch[g])
        return UpdateWitness(
            branch=BRANCH_NAMES[b], value=float(res.value[g]), alpha_i=float(res.alpha_i[g]),
            s0=float(res.s0[g]), node=net.nodes[res.node[g]].id if res.node[g] >= 0 else None,
            arc_j=net.arcs[res.arc_j[g]].id if res.arc_j[g] >= 0 else None, alpha_j=float(res.alpha_j[g]),
            stay_value=float(res.stay_value[g]), cross_value=float(res.cross_value[g]))


def sl_update_interior(v: GridFunction, arc, k: int, params: SchemeParams):
    """Updated value at sample ``k`` (not an endpoint) of ``arc`` with its witness."""
    solver = Solver(v.grid, params)
    a = v.grid.net.arc_index[arc] if isinstance(arc, str) else int(arc)
    n = int(v.grid.arc_n[a])
    if not 0 < k < n:
        raise ValueError(f"sample {k} is not interior to arc {arc}")
    g = int(v.grid.arc_g[v.grid.arc_ptr[a] + k])
    res = solver.raw_step(v)
    return float(res.value[g]), solver.witness(res, g)


def sl_update_junction(v: GridFunction, node_id: str, params: SchemeParams):
    node = v.grid.net.node(node_id)
    if node.kind != "junction":
        raise ValueError(f"node {node_id} is not a junction")
    solver = Solver(v.grid, params)
    g = v.grid.node_sample(node_id)
    res = solver.raw_step(v)
    return float(res.value[g]), solver.witness(res, g)


def apply_boundary(v: GridFunction, t: float) -> GridFunction:
    """Layer with Dirichlet samples set to their data at time ``t``.

    Neumann data enters through the ghost extension used by the operator and
    outflow ends through the in-domain restriction on the foot, so neither
    touches stored values.
    """
    vals = v.values.copy()
    for n in v.grid.net.nodes:
        if n.bc is not None and n.bc.kind == "dirichlet":
            vals[v.grid.node_sample(n.id)] = n.bc.at(t)
    return GridFunction(v.grid, vals, t)


def step(v: GridFunction, params: SchemeParams) -> GridFunction:
    return Solver(v.grid, params).step(v)


@dataclass
class SolveResult:
    snapshots: List[GridFunction]
    final: GridFunction
    n_steps: int
    max_alpha: float
    witnesses: List[StepResult] = field(default_factory=list)

    @property
    def times(self) -> List[float]:
        return [s.t for s in self.snapshots]


def solve(grid: Grid, u0: GridFunction, params: SchemeParams, snapshots: Optional[Sequence[float]] = None,
          keep_witness: bool = False, callback=None) -> SolveResult:
    """March ``u0`` for ``params.n_steps`` steps.

    ``snapshots`` are times rounded down to the nearest level; by default the
    initial and final layers are kept.  ``callback(n, layer, step_result)`` is
    invoked after every step.
    """
    solver = Solver(grid, params)
    n_steps = params.n_steps
    if snapshots is None:
        wanted = {0, n_steps}
    else:
        wanted = {min(params.step_index(t), n_steps) for t in snapshots if t >= 0}
    v = apply_boundary(GridFunction(grid, u0.values, 0.0), 0.0)
    snaps = [v] if 0 in wanted else []
    witnesses = []
    max_alpha = 0.0
    for n in range(1, n_steps + 1):
        res = solver.raw_step(v)
        if not np.all(np.isfinite(res.value)):
            g = int(np.flatnonzero(~np.isfinite(res.value))[0])
            raise SchemeError(f"non-finite value at sample {g}, step {n}")
        moving = (res.branch == BRANCH_STAY) | (res.branch == BRANCH_CROSS) | (res.branch == BRANCH_JUNCTION)
        if np.any(moving):
            max_alpha = max(max_alpha, float(np.max(np.abs(res.alpha_i[moving]))),
                            float(np.max(np.abs(res.alpha_j[moving]))))
        v = GridFunction(grid, res.value, n * params.dt)
        if keep_witness:
            witnesses.append(res)
        if callback is not None:
            callback(n, v, res)
        if n in wanted:
            snaps.append(v)
    return SolveResult(snaps, v, n_steps, max_alpha, witnesses)
