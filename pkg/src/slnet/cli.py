"""Command-line front end: ``slnet {solve,converge,probe,traffic}``.

Exit codes: 0 success, 1 invalid input or failed run, 2 acceptance threshold
violated.  Errors go to stderr as ``slnet-error: <kind>: <message>``.
"""

import argparse
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import io
from .analysis import consistency_probe, convergence_study
from .network import NetworkError, Scenario, build_grid, load_scenario
from .scheme import SchemeError, SchemeParams, Solver, apply_boundary, solve
from .traffic import TrafficError, density_from_value

EXIT_OK, EXIT_INVALID, EXIT_THRESHOLD = 0, 1, 2


class ThresholdError(RuntimeError):
    pass


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (val > 0 and math.isfinite(val)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return val


def _limiter(text: str) -> float:
    if text.strip().lower() in ("-inf", "minus_infinity"):
        return -math.inf
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slnet", description="Semi-Lagrangian solver for HJ equations on networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_default=None):
        sp.add_argument("--scenario", default=scenario_default, required=scenario_default is None,
                        help="scenario file (YAML/JSON) or bundled name")
        sp.add_argument("--dx", type=_positive)
        sp.add_argument("--dt", type=_positive)
        sp.add_argument("--T", type=float)
        sp.add_argument("--A", type=_limiter, help="flux limiter applied to every junction")
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--backend", choices=("numba", "numpy"))

    sp = sub.add_parser("solve", help="march a scenario and write snapshot CSVs")
    common(sp)
    sp.add_argument("--snapshots", type=_floats, help="times t1,t2,... (rounded down to time levels)")
    sp.add_argument("--svg", action="store_true", help="also write SVG heat maps")
    sp.add_argument("--witness", action="store_true", help="dump per-sample minimisers of each snapshot step")

    sp = sub.add_parser("converge", help="convergence study with a least-squares order fit")
    common(sp)
    sp.add_argument("--resolutions", type=_floats, default=None, help="dx values, coarse to fine")
    sp.add_argument("--ratio", type=_positive, default=2.5, help="dt / dx")
    sp.add_argument("--ref", choices=("exact", "fine"), default=None)
    sp.add_argument("--ref-dx", type=_positive, default=5e-4)
    sp.add_argument("--assert-order", type=float, default=None)
    sp.add_argument("--tol", type=float, default=0.2)

    sp = sub.add_parser("probe", help="one step next to the counterexample junction")
    sp.add_argument("--dx", type=_positive, required=True)
    sp.add_argument("--dt", type=_positive, required=True)
    sp.add_argument("--backend", choices=("numba", "numpy"))

    sp = sub.add_parser("traffic", help="evacuation run with density output")
    common(sp, scenario_default="rouen")
    sp.add_argument("--snapshots", type=_floats)
    sp.add_argument("--svg", action="store_true")
    return p


def _setup(args) -> tuple:
    scen = load_scenario(args.scenario)
    if args.A is not None:
        scen = Scenario(scen.name, scen.net.replace(A=args.A), scen.params, scen.initial, scen.source)
    prm = scen.params
    dx = args.dx if args.dx is not None else prm.get("dx")
    dt = args.dt if args.dt is not None else prm.get("dt")
    T = args.T if args.T is not None else prm.get("T")
    if dx is None or dt is None or T is None:
        raise NetworkError("dx, dt and T must come from the scenario or the command line")
    params = SchemeParams(float(dx), float(dt), float(T), backend=args.backend)
    grid = build_grid(scen.net, params.dx, prm.get("grid_policy", "strict"))
    return scen, grid, params


def _snapshot_times(args, scen, params) -> List[float]:
    if getattr(args, "snapshots", None):
        return list(args.snapshots)
    if scen.params.get("snapshots"):
        return [float(t) for t in scen.params["snapshots"]]
    return [0.0, params.T]


def cmd_solve(args) -> int:
    scen, grid, params = _setup(args)
    u0 = io.initial_layer(scen, grid, params.dt, backend=params.backend)
    times = _snapshot_times(args, scen, params)
    wanted = {min(params.step_index(t), params.n_steps) for t in times}
    args.out.mkdir(parents=True, exist_ok=True)
    witness_steps = {}

    def keep(n, layer, res):
        if args.witness and n in wanted:
            witness_steps[n] = res

    res = solve(grid, u0, params, snapshots=times, callback=keep)
    for layer in res.snapshots:
        n = params.step_index(layer.t)
        io.write_snapshot(args.out / f"snapshot_{n:05d}.csv", layer)
        if args.svg:
            io.write_svg(args.out / f"snapshot_{n:05d}.svg", grid, io.layer_arc_values(layer),
                         title=f"{scen.name} t={layer.t:.4g}")
        if n in witness_steps:
            io.write_witness(args.out / f"witness_{n:05d}.csv", grid, witness_steps[n], layer.t)
    print(f"scenario={scen.name} steps={res.n_steps} snapshots={len(res.snapshots)} "
          f"max_alpha={res.max_alpha:.6g} out={args.out}")
    return EXIT_OK


def cmd_converge(args) -> int:
    scen = load_scenario(args.scenario)
    ref = args.ref or ("exact" if scen.name == "test2" else "fine")
    resolutions = args.resolutions or [0.04, 0.02, 0.01, 0.005]
    T = args.T if args.T is not None else float(scen.params.get("T", 1.0))
    args.out.mkdir(parents=True, exist_ok=True)
    label = "" if args.A is None else f"_A{args.A:g}"
    report = convergence_study(scen, resolutions, args.ratio, T, ref=ref, ref_dx=args.ref_dx, A=args.A,
                               backend=args.backend, csv_path=args.out / f"convergence_{scen.name}{label}.csv")
    for dx, dt, err in report.rows:
        print(f"dx={dx:.6g} dt={dt:.6g} E_inf={err:.6e}")
    print(report.summary())
    if args.assert_order is not None and abs(report.order - args.assert_order) > args.tol:
        raise ThresholdError(f"fitted order {report.order:.4f} outside {args.assert_order} +- {args.tol}")
    return EXIT_OK


def cmd_probe(args) -> int:
    r = consistency_probe(args.dx, args.dt, backend=args.backend)
    print(f"{r.value:.12g} branch={r.branch} stay={r.stay_value:.12g} cross={r.cross_value:.12g}")
    return EXIT_OK


def cmd_traffic(args) -> int:
    scen, grid, params = _setup(args)
    u0 = io.initial_layer(scen, grid, params.dt, backend=params.backend)
    times = _snapshot_times(args, scen, params)
    res = solve(grid, u0, params, snapshots=times)
    args.out.mkdir(parents=True, exist_ok=True)
    peak_arc0 = None
    for layer in res.snapshots:
        field = density_from_value(layer)
        if not field.all_finite():
            raise SchemeError(f"non-finite density at t={layer.t:.4g}")
        n = params.step_index(layer.t)
        io.write_density(args.out / f"density_{n:05d}.csv", field)
        io.write_node_density(args.out / f"nodes_{n:05d}.csv", field)
        if args.svg:
            io.write_svg(args.out / f"density_{n:05d}.svg", grid, field.arc_rho, title=f"density t={layer.t:.4g}",
                         vmin=0.0, vmax=1.0)
        if peak_arc0 is None:
            peak_arc0 = field.arc_max()
        print(f"t={layer.t:.4g} arc_max={field.arc_max():.6g} node_max={field.node_max():.6g} "
              f"node_min={float(np.min(field.node_rho)):.6g}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "probe": cmd_probe, "traffic": cmd_traffic}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except ThresholdError as exc:
        print(f"slnet-error: threshold: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (NetworkError, ValueError) as exc:
        print(f"slnet-error: invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SchemeError, TrafficError) as exc:
        print(f"slnet-error: run: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
