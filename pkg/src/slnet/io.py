"""Initial layers from scenario documents and the CSV/SVG writers."""

import csv
import math
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from .network import Grid, GridFunction, NetworkError, Scenario
from .kernels import StepResult

_SAFE_NAMES = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "minimum", "maximum", "where", "pi", "e",
    "sinh", "cosh", "tanh", "arctan", "hypot", "clip", "floor", "ceil")}
_SAFE_NAMES["min"] = np.minimum
_SAFE_NAMES["max"] = np.maximum


def evaluate_expression(expr: str, s, x, y):
    """Evaluate an arithmetic expression in ``s`` (arc coordinate) and ``x, y`` (position)."""
    try:
        code = compile(expr, "<initial>", "eval")
    except SyntaxError as exc:
        raise NetworkError(f"bad initial expression {expr!r}: {exc.msg}") from exc
    for name in code.co_names:
        if name not in _SAFE_NAMES and name not in ("s", "x", "y"):
            raise NetworkError(f"initial expression uses unknown name {name!r}")
    scope = dict(_SAFE_NAMES, s=s, x=x, y=y)
    return np.asarray(eval(code, {"__builtins__": {}}, scope), float) * np.ones(np.shape(s))


def initial_layer(scenario: Scenario, grid: Grid, dt: Optional[float] = None, backend=None) -> GridFunction:
    """Build ``u0`` on ``grid`` from the scenario's ``initial`` entry.

    Supported types: ``expression`` (``expr`` plus optional ``per_arc``
    overrides), ``table`` (per-arc ``s``/``values`` lists, interpolated) and
    ``eikonal`` (stationary solution with a radial right-hand side).
    """
    init = scenario.initial or {"type": "expression", "expr": "0"}
    kind = init.get("type", "expression")
    net = grid.net
    if kind == "eikonal":
        from .traffic import eikonal_initializer, radial_rhs

        rhs = radial_rhs(float(init.get("base", 0.7)), init.get("center", (0.5, 0.5)), float(init.get("k", 0.5)))
        step = float(dt if dt is not None else scenario.params.get("dt", grid.dx))
        return eikonal_initializer(net, grid, rhs, step, float(init.get("tol", 1e-8)), backend=backend)
    a_idx, s, g, x, y = grid.sample_table()
    vals = np.empty(s.shape)
    if kind == "expression":
        per_arc = init.get("per_arc", {}) or {}
        for a, arc in enumerate(net.arcs):
            m = a_idx == a
            expr = str(per_arc.get(arc.id, init.get("expr", "0")))
            vals[m] = evaluate_expression(expr, s[m], x[m], y[m])
    elif kind == "table":
        arcs = init.get("arcs", {})
        for a, arc in enumerate(net.arcs):
            if arc.id not in arcs:
                raise NetworkError(f"initial table misses arc {arc.id}")
            m = a_idx == a
            vals[m] = np.interp(s[m], arcs[arc.id]["s"], arcs[arc.id]["values"])
    else:
        raise NetworkError(f"unknown initial type {kind!r}")
    out = np.empty(grid.n_samples)
    out[g] = vals
    return GridFunction(grid, out, 0.0)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_snapshot(path: Path, layer: GridFunction) -> None:
    a_idx, s, g, x, y = layer.grid.sample_table()
    arcs = layer.grid.net.arcs
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arc_id", "s", "x_pos", "y_pos", "value"])
        for a, si, gi, xi, yi in zip(a_idx, s, g, x, y):
            w.writerow([arcs[a].id, _fmt(si), _fmt(xi), _fmt(yi), _fmt(layer.values[gi])])


def write_density(path: Path, field) -> None:
    grid = field.grid
    idx = grid.net.node_index
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arc_id", "s", "x_pos", "y_pos", "rho"])
        for a, arc in enumerate(grid.net.arcs):
            s, _ = grid.arc_samples(a)
            p0 = np.asarray(grid.net.nodes[idx[arc.tail]].position, float)
            p1 = np.asarray(grid.net.nodes[idx[arc.head]].position, float)
            for si, r in zip(s, field.arc_rho[a]):
                xy = p0 + (si / arc.length) * (p1 - p0)
                w.writerow([arc.id, _fmt(si), _fmt(xy[0]), _fmt(xy[1]), _fmt(r)])


def write_node_density(path: Path, field) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "rho"])
        for n, r in zip(field.grid.net.nodes, field.node_rho):
            w.writerow([n.id, _fmt(r)])


def write_report(path: Path, rows: Sequence[Sequence[float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dx", "dt", "E_inf"])
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_witness(path: Path, grid: Grid, res: StepResult, t: float) -> None:
    from .scheme import BRANCH_NAMES

    net = grid.net
    arc, pos = grid.arc_coordinates()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "sample", "arc_id", "s", "branch", "value", "alpha_i", "s0", "node", "arc_j", "alpha_j"])
        for g in range(grid.n_samples):
            node = net.nodes[res.node[g]].id if res.node[g] >= 0 else ""
            arc_j = net.arcs[res.arc_j[g]].id if res.arc_j[g] >= 0 else ""
            w.writerow([_fmt(t), g, net.arcs[arc[g]].id, _fmt(pos[g]), BRANCH_NAMES[int(res.branch[g])],
                        _fmt(res.value[g]), _fmt(res.alpha_i[g]), _fmt(res.s0[g]), node, arc_j, _fmt(res.alpha_j[g])])


def _color(v: float, lo: float, hi: float) -> str:
    z = 0.0 if hi <= lo else min(max((v - lo) / (hi - lo), 0.0), 1.0)
    r = int(round(255 * z))
    b = int(round(255 * (1 - z)))
    g = int(round(255 * (1 - abs(2 * z - 1)) * 0.8))
    return f"#{r:02x}{g:02x}{b:02x}"


def write_svg(path: Path, grid: Grid, arc_values: Sequence[np.ndarray], title: str = "",
              vmin: Optional[float] = None, vmax: Optional[float] = None, size: int = 600) -> None:
    """Heat map: each cell of each arc drawn as a coloured segment."""
    pos = np.array([n.position for n in grid.net.nodes], float)
    lo_xy = pos.min(axis=0)
    span = float(max(np.ptp(pos[:, 0]), np.ptp(pos[:, 1]), 1e-12))
    allv = np.concatenate([np.asarray(v, float) for v in arc_values])
    lo = float(np.min(allv)) if vmin is None else vmin
    hi = float(np.max(allv)) if vmax is None else vmax
    pad = 20

    def tx(p):
        q = (p - lo_xy) / span * (size - 2 * pad)
        return pad + q[0], size - pad - q[1]

    idx = grid.net.node_index
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="{pad}" y="14" font-size="12" font-family="sans-serif">{title}</text>')
    for a, arc in enumerate(grid.net.arcs):
        p0 = pos[idx[arc.tail]]
        p1 = pos[idx[arc.head]]
        vals = np.asarray(arc_values[a], float)
        n = vals.size - 1
        for k in range(n):
            x0, y0 = tx(p0 + (k / n) * (p1 - p0))
            x1, y1 = tx(p0 + ((k + 1) / n) * (p1 - p0))
            c = _color(0.5 * (vals[k] + vals[k + 1]), lo, hi)
            parts.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="{c}" stroke-width="4"/>')
    parts.append(f'<text x="{pad}" y="{size - 4}" font-size="11" font-family="sans-serif">'
                 f'range [{lo:.4g}, {hi:.4g}]</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def layer_arc_values(layer: GridFunction) -> Sequence[np.ndarray]:
    return [layer.on_arc(a)[1] for a in range(len(layer.grid.net.arcs))]
