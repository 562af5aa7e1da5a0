"""Time one scheme step with the numba kernels and with the numpy twin.

    python3 benchmarks/bench_backends.py [--repeat 5]

Compilation happens in a warm-up step that is not timed.
"""

import argparse
import statistics
import time

import numpy as np

from slnet._accel import HAVE_NUMBA
from slnet.io import initial_layer
from slnet.network import build_grid, load_scenario
from slnet.scheme import SchemeParams, Solver, apply_boundary

CASES = [("test1", 0.005, 0.0125), ("test2", 0.01, 0.025), ("rouen", 0.01, 0.05)]


def time_step(solver, v, repeat):
    solver.step(v)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = solver.step(v)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    print(f"{'scenario':<10}{'samples':>9}" + "".join(f"{b + ' ms':>12}" for b in backends) + f"{'speedup':>10}{'max diff':>11}")
    for name, dx, dt in CASES:
        scen = load_scenario(name)
        grid = build_grid(scen.net, dx, scen.params.get("grid_policy", "strict"))
        v = apply_boundary(initial_layer(scen, grid, dt), 0.0)
        res = {b: time_step(Solver(grid, SchemeParams(dx, dt, dt, backend=b)), v, args.repeat) for b in backends}
        row = f"{name:<10}{grid.n_samples:>9}" + "".join(f"{1e3 * res[b][0]:>12.2f}" for b in backends)
        if len(backends) == 2:
            diff = float(np.max(np.abs(res["numba"][1].values - res["numpy"][1].values)))
            row += f"{res['numpy'][0] / res['numba'][0]:>10.1f}{diff:>11.1e}"
        print(row)


if __name__ == "__main__":
    main()
