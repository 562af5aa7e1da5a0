"""Flat-array kernels for one step of the scheme, with numba and numpy backends."""

from typing import NamedTuple

import numpy as np

from .._accel import resolve_backend
from . import prims

NODE_JUNCTION, NODE_DIRICHLET, NODE_NEUMANN, NODE_OUTFLOW = 0, 1, 2, 3
BRANCH_NODE, BRANCH_STAY, BRANCH_CROSS, BRANCH_JUNCTION = 0, 1, 2, 3


class Layout(NamedTuple):
    """Grid and cost data flattened into arrays the kernels understand.

    Sample ``k`` of arc ``a`` lives at global index ``arc_g[arc_ptr[a] + k]``
    for ``k = 0..arc_n[a]``; ``arc_c`` shares that indexing.
    """

    arc_ptr: np.ndarray
    arc_n: np.ndarray
    arc_h: np.ndarray
    arc_len: np.ndarray
    arc_kind: np.ndarray
    arc_lam: np.ndarray
    arc_tid: np.ndarray
    arc_from: np.ndarray
    arc_to: np.ndarray
    arc_g: np.ndarray
    arc_c: np.ndarray
    node_g: np.ndarray
    node_type: np.ndarray
    node_bar_l0: np.ndarray
    node_inc_ptr: np.ndarray
    node_inc_arc: np.ndarray
    node_inc_sig: np.ndarray
    tab_a: np.ndarray
    tab_v: np.ndarray
    tab_ptr: np.ndarray
    n_samples: int

    @property
    def tabs(self):
        return self.tab_a, self.tab_v, self.tab_ptr

    def member_capacity(self) -> int:
        cap = 1
        for nd in range(self.node_g.shape[0]):
            arcs = self.node_inc_arc[self.node_inc_ptr[nd]:self.node_inc_ptr[nd + 1]]
            cap = max(cap, int(np.sum(2 * self.arc_n[arcs] + 1)))
        return cap


class StepResult(NamedTuple):
    """New layer plus per-sample witness arrays (see ``scheme.UpdateWitness``)."""

    value: np.ndarray
    branch: np.ndarray
    node: np.ndarray
    alpha_i: np.ndarray
    s0: np.ndarray
    arc_j: np.ndarray
    alpha_j: np.ndarray
    stay_value: np.ndarray
    cross_value: np.ndarray


def max_slope(lay: Layout, v: np.ndarray, node_bval: np.ndarray) -> float:
    """Largest discrete slope of ``v`` over all cells and Neumann data."""
    lo = lay.arc_g[_cell_left(lay)]
    hi = lay.arc_g[_cell_left(lay) + 1]
    h = np.repeat(lay.arc_h, lay.arc_n)
    m = float(np.max(np.abs(v[hi] - v[lo]) / h)) if lo.size else 0.0
    neu = lay.node_type == NODE_NEUMANN
    if np.any(neu):
        m = max(m, float(np.max(np.abs(node_bval[neu]))))
    return m


def _cell_left(lay: Layout) -> np.ndarray:
    starts = np.repeat(lay.arc_ptr[:-1], lay.arc_n)
    offs = np.arange(starts.size) - np.repeat(np.cumsum(lay.arc_n) - lay.arc_n, lay.arc_n)
    return starts + offs


def control_bounds(lay: Layout, v: np.ndarray, node_bval: np.ndarray, mu_floor: float = 0.0) -> np.ndarray:
    """Per-arc bound on the optimal |alpha| of the coming step.

    An optimal foot lies in a cell whose own stationary control points from
    some updated sample (or a crossing node) into that cell, and its control
    is bounded by that cell's stationary one.  Cells whose stationary motion
    only leads from non-updated samples, such as the cell next to a
    Dirichlet end, are therefore skipped.
    """
    mu = np.full(lay.arc_n.shape[0], float(mu_floor))
    tabs = lay.tabs
    for a in range(lay.arc_n.shape[0]):
        n = int(lay.arc_n[a])
        p0 = lay.arc_ptr[a]
        vals = v[lay.arc_g[p0:p0 + n + 1]]
        m = np.diff(vals) / lay.arc_h[a]
        tf, tt = lay.node_type[lay.arc_from[a]], lay.node_type[lay.arc_to[a]]
        k_start = 0 if tf >= NODE_NEUMANN else 1
        k_end = n if tt >= NODE_NEUMANN else n - 1
        if tf == NODE_NEUMANN:
            m = np.r_[-node_bval[lay.arc_from[a]], m]
            left = np.r_[-1, np.arange(n)]
        else:
            left = np.arange(n)
        if tt == NODE_NEUMANN:
            m = np.r_[m, node_bval[lay.arc_to[a]]]
            left = np.r_[left, n]
        alpha = prims.argmax(lay.arc_kind[a], lay.arc_lam[a], lay.arc_tid[a], m, tabs)
        # alpha > 0 moves the foot towards s = 0: useful to samples at or beyond the cell's right end
        useful_left = (alpha > 0) & ((tt == NODE_JUNCTION) | (left + 1 <= k_end))
        useful_right = (alpha < 0) & ((tf == NODE_JUNCTION) | (left >= k_start))
        useful = useful_left | useful_right
        if np.any(useful):
            mu[a] = max(mu[a], float(np.max(np.abs(alpha[useful]))))
    return mu


def run_step(lay: Layout, v, dt, mu_arc, big_m, node_bval, node_bnext, tol=1e-13, backend=None) -> StepResult:
    backend = resolve_backend(backend)
    if backend == "numba":
        from . import nb

        n = lay.n_samples
        out = np.empty(n)
        wb = np.zeros(n, dtype=np.int64)
        wnode = np.full(n, -1, dtype=np.int64)
        wa_i = np.zeros(n)
        wa_x = np.zeros(n)
        ws0 = np.zeros(n)
        wj = np.full(n, -1, dtype=np.int64)
        wa_j = np.zeros(n)
        wb1 = np.empty(n)
        wb2 = np.empty(n)
        cap = lay.member_capacity()
        mem = np.zeros((cap, nb.M_COLS))
        scratch = np.zeros((cap, 4))
        nb.step_kernel(np.ascontiguousarray(v, dtype=float), float(dt), float(tol), mu_arc, float(big_m),
                       lay.arc_ptr, lay.arc_n, lay.arc_h, lay.arc_len, lay.arc_kind, lay.arc_lam, lay.arc_tid,
                       lay.arc_from, lay.arc_to, lay.arc_g, lay.arc_c,
                       lay.node_g, lay.node_type, lay.node_bar_l0, node_bval, node_bnext,
                       lay.node_inc_ptr, lay.node_inc_arc, lay.node_inc_sig,
                       lay.tab_a, lay.tab_v, lay.tab_ptr,
                       out, wb, wnode, wa_i, wa_x, ws0, wj, wa_j, wb1, wb2, mem, scratch)
        return StepResult(out, wb, wnode, wa_i, ws0, wj, wa_j, wb1, wb2)
    from . import vec

    return vec.step(lay, np.asarray(v, dtype=float), float(dt), float(tol), mu_arc, float(big_m),
                    node_bval, node_bnext)
