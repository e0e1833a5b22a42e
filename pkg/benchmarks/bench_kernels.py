"""Compiled kernel vs. numpy fallback on the bundled scenario.

    python benchmarks/bench_kernels.py [--t-end 2] [--repeat 3]

Reports wall time per backend for a full run and the largest state difference
between the two traces (they should agree to rounding).
"""
import argparse
import time

import numpy as np

from lagrange_swarm import kernels
from lagrange_swarm.scenario import default_scenario
from lagrange_swarm.simulation import resolve_substeps, run


def _time(sc, backend, repeat):
    best, tr = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = run(sc, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, tr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    sc = default_scenario(t_end=args.t_end)
    steps = round(sc.t_end / sc.dt) * resolve_substeps(sc)
    print(f"scenario {sc.name}: {sc.n} agents, t_end {sc.t_end:g} s, {steps} RK4 steps")
    results = {}
    for backend in ("compiled", "python"):
        if backend == "compiled" and not kernels.COMPILED_AVAILABLE:
            print("compiled   not built, skipped")
            continue
        reps = 1 if backend == "python" else args.repeat
        t, tr = _time(sc, backend, reps)
        results[backend] = (t, tr)
        print(f"{backend:<10} {t:8.3f} s   {steps / t:12.0f} steps/s")
    if len(results) == 2:
        (tc, a), (tp, b) = results["compiled"], results["python"]
        diff = np.abs(a.terminal_state() - b.terminal_state()).max()
        print(f"speedup {tp / tc:.1f}x, max terminal difference {diff:.2e}")


if __name__ == "__main__":
    main()
