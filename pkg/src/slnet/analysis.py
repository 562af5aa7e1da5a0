"""Error norms, convergence studies, the junction consistency probe and exact solutions."""

import math
import time
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .network import Grid, GridFunction, NetworkError, Scenario, build_grid, load_scenario
from .scheme import SchemeParams, Solver, UpdateWitness, solve

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
PROBE_SWITCH = SQRT3 - 1.0


def error_sup(w: GridFunction, ref: Union[GridFunction, Callable]) -> float:
    """``max |w - ref|`` over the samples of ``w``.

    ``ref`` is either ``fn(arc_index, s, x, y)`` or a layer on a finer grid of
    the same network whose samples contain those of ``w``.
    """
    a_idx, s, g, x, y = w.grid.sample_table()
    if callable(ref):
        r = np.asarray(ref(a_idx, s, x, y), float) * np.ones(s.shape)
        return float(np.max(np.abs(w.values[g] - r)))
    fine = ref.grid
    if len(fine.net.arcs) != len(w.grid.net.arcs):
        raise NetworkError("reference lives on a different network")
    worst = 0.0
    for a in range(len(w.grid.net.arcs)):
        sc, vc = w.on_arc(a)
        sf, vf = ref.on_arc(a)
        k = sc / fine.arc_h[a]
        kr = np.rint(k)
        if np.any(np.abs(k - kr) > 1e-6) or np.any(kr > sf.size - 1):
            raise NetworkError("coarse samples are not a subset of the reference samples")
        worst = max(worst, float(np.max(np.abs(vc - vf[kr.astype(int)]))))
    return worst


def exact_test2(point: Sequence[float]) -> float:
    """Steady state of the three-arc example at a planar point on the network."""
    x1, x2 = float(point[0]), float(point[1])
    tol = 1e-12
    if abs(x1) <= tol and -tol <= x2 <= 1 + tol:
        return SQRT2 + x2
    if -tol <= x1 <= 1 + tol and abs(x2 + x1) <= tol:
        return min(2.0 * math.hypot(x1 - 1.0, x2 + 1.0), SQRT2 + 2.0 * math.hypot(x1, x2))
    if -1 - tol <= x1 <= tol and abs(x2 - x1) <= tol:
        return math.hypot(x1 + 1.0, x2 + 1.0)
    raise ValueError(f"point {point} is not on the three-arc network")


def exact_test2_samples(a_idx, s, x, y) -> np.ndarray:
    return np.array([exact_test2((xi, yi)) for xi, yi in zip(np.atleast_1d(x), np.atleast_1d(y))])


@dataclass(frozen=True)
class ProbeResult:
    value: float
    branch: str
    stay_value: float
    cross_value: float
    witness: UpdateWitness

    @staticmethod
    def expected(dx: float, dt: float) -> Tuple[float, float]:
        """Closed-form values of the stay and crossing branches."""
        return 1.0 + dx + 1.5 * dt, 1.0 + SQRT3 * dx + 0.5 * dt


@lru_cache(maxsize=1)
def _probe_scenario() -> Scenario:
    return load_scenario("counterexample")


def consistency_probe(dx: float, dt: float, backend=None) -> ProbeResult:
    """One step of the scheme at distance ``dx`` from the counterexample junction.

    The data is linear with slope 1 away from the junction on the expensive
    arc and slope -1 on the cheap one.
    """
    from .io import initial_layer

    scen = _probe_scenario()
    grid = build_grid(scen.net, dx)
    u = initial_layer(scen, grid)
    solver = Solver(grid, SchemeParams(dx, dt, dt, backend=backend))
    res = solver.raw_step(u)
    a = scen.net.arc_index["J2"]
    g = int(grid.arc_g[grid.arc_ptr[a] + 1])
    w = solver.witness(res, g)
    return ProbeResult(w.value, w.branch, w.stay_value, w.cross_value, w)


def probe_switch_ratio(dx: float = 0.01, lo: float = 0.3, hi: float = 1.2, tol: float = 1e-11, backend=None) -> float:
    """Bisect ``dt / dx`` for the first ratio where the crossing branch wins."""
    if consistency_probe(dx, lo * dx, backend).branch != "stay" or consistency_probe(dx, hi * dx, backend).branch != "cross":
        raise RuntimeError("probe branch does not switch inside the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if consistency_probe(dx, mid * dx, backend).branch == "stay":
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class ConvergenceReport:
    rows: List[Tuple[float, float, float]]
    order: float
    constant: float
    seconds: float = 0.0
    label: str = ""

    def ratios(self) -> List[float]:
        errs = [r[2] for r in self.rows]
        return [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]

    def summary(self) -> str:
        return f"{self.label} order={self.order:.4f} constant={self.constant:.4f}".strip()


def fit_order(dx: Sequence[float], err: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line through ``(log dx, log err)``: returns (slope, exp(intercept))."""
    slope, icpt = np.polyfit(np.log(np.asarray(dx, float)), np.log(np.asarray(err, float)), 1)
    return float(slope), float(math.exp(icpt))


def run_scenario(scen: Scenario, dx: float, dt: float, T: float, A: Optional[float] = None, backend=None,
                 snapshots=None, keep_witness=False):
    """Build grid and initial data for a scenario and solve it."""
    from .io import initial_layer

    net = scen.net if A is None else scen.net.replace(A=A)
    scen = Scenario(scen.name, net, scen.params, scen.initial, scen.source)
    grid = build_grid(net, dx, scen.params.get("grid_policy", "strict"))
    u0 = initial_layer(scen, grid, dt, backend=backend)
    params = SchemeParams(dx, dt, T, backend=backend)
    return grid, solve(grid, u0, params, snapshots=snapshots, keep_witness=keep_witness)


def convergence_study(scenario: Union[str, Scenario], resolutions: Sequence[float], ratio: float, T: float,
                      ref: str = "exact", ref_dx: float = 5e-4, ref_ratio: float = 1.0, A: Optional[float] = None,
                      backend=None, csv_path: Optional[Path] = None) -> ConvergenceReport:
    """Errors at ``dt = ratio * dx`` against an exact or a fine-grid reference."""
    if len(resolutions) < 3:
        raise ValueError("a convergence study needs at least three resolutions")
    scen = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    t0 = time.perf_counter()
    if ref == "exact":
        if scen.name != "test2":
            raise ValueError("an exact reference is only available for test2")
        reference = exact_test2_samples
    elif ref == "fine":
        _, fine = run_scenario(scen, ref_dx, ref_ratio * ref_dx, T, A, backend)
        reference = fine.final
    else:
        raise ValueError(f"unknown reference policy {ref!r}")
    rows = []
    for dx in resolutions:
        _, res = run_scenario(scen, dx, ratio * dx, T, A, backend)
        rows.append((dx, ratio * dx, error_sup(res.final, reference)))
    q, k = fit_order([r[0] for r in rows], [r[2] for r in rows])
    report = ConvergenceReport(rows, q, k, time.perf_counter() - t0, scen.name if A is None else f"{scen.name} A={A:g}")
    if csv_path is not None:
        from .io import write_report

        write_report(Path(csv_path), rows)
    return report


def lipschitz_constant(w: GridFunction) -> float:
    """Largest slope of ``w`` over all cells."""
    worst = 0.0
    for a in range(len(w.grid.net.arcs)):
        _, vals = w.on_arc(a)
        worst = max(worst, float(np.max(np.abs(np.diff(vals)))) / float(w.grid.arc_h[a]))
    return worst


def one_step_defect(grid: Grid, u0: GridFunction, params: SchemeParams) -> float:
    """``K = sup |S[u0] - u0| / dt``, the stability constant of the first step."""
    from .scheme import apply_boundary

    v = apply_boundary(u0, 0.0)
    nxt = Solver(grid, params).step(v)
    return float(np.max(np.abs(nxt.values - v.values))) / params.dt
