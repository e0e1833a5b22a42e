"""Command-line entry point: ``lagrange-swarm {run,certify,check-graph,sweep}``.

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 certification failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .analysis import analyze, steady_state_norm
from .certification import certify_scenario, scenario_ledgers
from .gains import IterationCap
from .graph import DirectedGraph, NoSpanningTree, has_rooted_spanning_tree, laplacian, read_graph, solve_gamma
from .plotdata import gnuplot_script, write_plot_data
from .scenario import (ScenarioError, bundled_path, dump_scenario, load_scenario, with_overrides,
                       write_trace_csv)
from .simulation import NonFiniteState, run

log = logging.getLogger("lagrange_swarm")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_CERT = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _setup_logging() -> None:
    raw = os.environ.get("LAGRANGE_SWARM_LOG", "WARNING").strip().upper()
    level = int(raw) if raw.isdigit() else logging.getLevelName(raw)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if raw and not raw.isdigit() and level == logging.WARNING and raw != "WARNING":
        log.warning("unknown LAGRANGE_SWARM_LOG level %r, using WARNING", raw)


# -- shared helpers ----------------------------------------------------------------

def _load(args, t_end: Optional[float] = None):
    path = args.scenario or bundled_path()
    try:
        sc = load_scenario(path)
        sc = with_overrides(sc, dt=args.dt, epsilon=args.epsilon, mu=args.mu, eta=args.eta, beta=args.beta)
        if t_end is not None:
            sc = sc.with_(t_end=t_end)
        sc.validate()
    except (ScenarioError, ValueError) as exc:
        raise _Fail(EXIT_VALIDATION, f"invalid scenario {path}: {exc}") from None
    return sc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ledgers_or_none(sc, seed):
    try:
        return scenario_ledgers(sc, seed=seed)
    except (NoSpanningTree, ValueError) as exc:
        log.warning("no gain ledger for the bound checks: %s", exc)
        return None


def _simulate(sc, out: Path, tag: str = ""):
    try:
        tr = run(sc)
    except NonFiniteState as exc:
        write_trace_csv(exc.trace, out / f"trace{tag}.partial.csv")
        raise _Fail(EXIT_RUNTIME, f"{exc} (component {exc.component}, t = {exc.time:g}); "
                                  f"partial trace written") from None
    except (ValueError, NoSpanningTree) as exc:
        raise _Fail(EXIT_VALIDATION, str(exc)) from None
    return tr


# -- subcommands ----------------------------------------------------------------------

def cmd_run(args) -> int:
    sc = _load(args, args.t_end)
    out = _out_dir(args)
    tr = _simulate(sc, out)
    rep = analyze(tr, sc.blackout, _ledgers_or_none(sc, args.seed), sc.name)
    write_trace_csv(tr, out / "trace.csv")
    (out / "report.txt").write_text(rep.to_text())
    (out / "report.json").write_text(rep.to_json())
    dump_scenario(sc, out / "scenario.yaml")
    dat = write_plot_data(tr, out)
    (out / "plots.gp").write_text(gnuplot_script(dat))
    print(rep.summary())
    print(f"wrote {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = _load(args)
    overridden = any(v is not None for v in (args.mu, args.eta, args.beta))
    design = not (overridden or args.scenario_gains)
    out = _out_dir(args)
    try:
        cert = certify_scenario(sc, design=design, seed=args.seed)
    except NoSpanningTree as exc:
        raise _Fail(EXIT_VALIDATION, f"cannot certify: {exc}") from None
    except IterationCap as exc:
        raise _Fail(EXIT_CERT, f"gain design failed: {exc}") from None
    except ValueError as exc:
        raise _Fail(EXIT_VALIDATION, f"cannot certify: {exc}") from None
    path = out / "certificate.txt"
    path.write_text(cert.text())
    g = cert.gains
    print(f"{'designed' if design else 'given'} gains: mu={g.mu:.6g} eta={g.eta:.6g} beta={g.beta:.6g}"
          f" epsilon={g.epsilon:.6g}")
    dw = cert.dwell
    if "required" in dw:
        print(f"dwell: configured {dw['configured']:.4g} s, required {dw['required']:.4g} s -> {dw['verdict']}")
    else:
        print(f"dwell: {dw['verdict']}")
    print(f"certificate written to {path}")
    if not cert.ok:
        print("violated inequalities:", file=sys.stderr)
        for v in cert.violations():
            print(f"  {v}", file=sys.stderr)
        return EXIT_CERT
    print("all inequalities satisfied")
    return EXIT_OK


def _rooted(g: DirectedGraph, root: int) -> DirectedGraph:
    """Relabel so ``root`` becomes node 0."""
    if root == 0:
        return g
    if not 0 <= root <= g.n_followers:
        raise ValueError(f"root {root} is not a node")
    swap = {0: root, root: 0}
    return DirectedGraph.from_edges(g.n_followers, [(swap.get(s, s), swap.get(d, d), w) for s, d, w in g.edges()])


def cmd_check_graph(args) -> int:
    try:
        g = _rooted(read_graph(args.graph), args.root)
    except (OSError, ValueError) as exc:
        raise _Fail(EXIT_VALIDATION, f"cannot read graph {args.graph}: {exc}") from None
    if not has_rooted_spanning_tree(g, 0):
        print(f"no directed spanning tree rooted at node {args.root}")
        return EXIT_VALIDATION
    part = laplacian(g)
    try:
        cert = solve_gamma(part, seed=args.seed)
    except (NoSpanningTree, ValueError) as exc:
        raise _Fail(EXIT_VALIDATION, str(exc)) from None
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        print(f"spanning tree rooted at node {args.root}: yes")
        print("L21 =", part.L21.ravel() + 0.0)
        print("L22 =")
        print(part.L22 + 0.0)
        print("gamma =", cert.gamma)
        print(f"min eig of (Gamma L22 + L22^T Gamma) = {cert.min_eig:.6g}")
    return EXIT_OK


def _sweep_one(job):
    sc, param, value = job
    sc = with_overrides(sc, **{param: value})
    try:
        return value, run(sc), None
    except (NonFiniteState, ValueError) as exc:
        return value, None, str(exc)


def _parse_values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise _Fail(EXIT_VALIDATION, f"bad --values list {text!r}") from None
    if not vals:
        raise _Fail(EXIT_VALIDATION, "--values is empty")
    return vals


def cmd_sweep(args) -> int:
    values = _parse_values(args.values)
    sc = _load(args, args.t_end)
    for v in values:
        try:
            with_overrides(sc, **{args.param: v})
        except ValueError as exc:
            raise _Fail(EXIT_VALIDATION, f"{args.param}={v}: {exc}") from None
    out = _out_dir(args)
    jobs = [(sc, args.param, v) for v in values]
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    rows, dat, failed = [], [], []
    for value, tr, err in results:
        if tr is None:
            failed.append(f"{args.param}={value}: {err}")
            continue
        tag = f"_{args.param}_{value:g}"
        scv = with_overrides(sc, **{args.param: value})
        rep = analyze(tr, scv.blackout, None, f"{sc.name}{tag}")
        write_trace_csv(tr, out / f"trace{tag}.csv")
        (out / f"report{tag}.json").write_text(rep.to_json())
        dat += write_plot_data(tr, out, tag)
        e, ed = tr.stacked_errors()
        rows.append({"param": args.param, "value": value, "T1": rep.T1,
                     "steady_state_norm": steady_state_norm(tr),
                     "final_err_pos": float(e[-1]), "final_err_vel": float(ed[-1])})
    if dat:
        (out / "plots.gp").write_text(gnuplot_script(dat))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["param", "value", "T1", "steady_state_norm", "final_err_pos",
                                "final_err_vel"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    for r in rows:
        print(f"{r['param']}={r['value']:g}: steady-state norm {r['steady_state_norm']:.4g}, "
              f"T1 {r['T1']:.4g}")
    if failed:
        raise _Fail(EXIT_RUNTIME, "; ".join(failed))
    return EXIT_OK


def read_sweep_csv(path) -> list[dict]:
    with open(path) as fh:
        return [{k: (v if k == "param" else float(v)) for k, v in r.items()} for r in csv.DictReader(fh)]


# -- parser -------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--scenario", help="scenario YAML (default: the bundled one)")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--dt", type=float, help="integration step [s]")
    p.add_argument("--epsilon", type=float, help="boundary-layer width (0 = signum law)")
    p.add_argument("--mu", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int, default=0, help="seed for the sampled bound and Gamma searches")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lagrange-swarm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s (kernel: {kernels.BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write trace, report and plot data")
    _add_common(p, "run_out")
    p.add_argument("--t-end", type=float, help="override the horizon [s]")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="design and/or verify gains for every topology")
    _add_common(p, "certify_out")
    p.add_argument("--scenario-gains", action="store_true",
                   help="verify the scenario's own gains instead of designing new ones")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("check-graph", help="spanning-tree verdict, Laplacian split and Gamma")
    p.add_argument("graph", help="edge-list file")
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_graph)

    p = sub.add_parser("sweep", help="run a scenario over several epsilon or mu values")
    _add_common(p, "sweep_out")
    p.add_argument("--param", choices=("epsilon", "mu"), default="epsilon")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--workers", type=int, default=0, help="parallel runs (default: one per value)")
    p.add_argument("--t-end", type=float, help="override the horizon [s]")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are validation errors
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (RuntimeError, FloatingPointError, OSError) as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
