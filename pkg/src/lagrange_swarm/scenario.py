"""Scenario documents (YAML), agent parameter files and trace CSV I/O."""
from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .control import GainSet
from .dynamics import (GRAVITY, ConstantLeader, ReferenceLeader, TwoLinkArm, TwoLinkArmParams)
from .graph import (DirectedGraph, SwitchingSignal, format_edge_list, parse_edge_list,
                    parse_schedule)
from .simulation import AgentSpec, ScenarioConfig, SimTrace, make_disturbance

SECTIONS = ("agents", "leader", "graphs", "gains", "observer", "integration", "blackout")
AGENT_COLUMNS = ("agent",) + TwoLinkArmParams.FIELDS + ("q0_1", "q0_2", "qdot0_1", "qdot0_2")


class ScenarioError(ValueError):
    """Scenario document is malformed or fails validation."""


def bundled_path(name: str = "five_arms.yaml") -> Path:
    return Path(str(resources.files("lagrange_swarm") / "scenarios" / name))


# -- agent parameter files -------------------------------------------------------

def parse_agent_table(text: str) -> list[dict]:
    """CSV with header ``agent,m1,...,I2,q0_1,q0_2,qdot0_1,qdot0_2``."""
    rows = list(csv.DictReader(line for line in io.StringIO(text) if not line.lstrip().startswith("#")))
    if not rows:
        raise ScenarioError("agent table is empty")
    missing = set(AGENT_COLUMNS) - set(rows[0])
    if missing:
        raise ScenarioError(f"agent table lacks columns: {', '.join(sorted(missing))}")
    out = []
    for r in rows:
        try:
            rec = {f: float(r[f]) for f in TwoLinkArmParams.FIELDS}
            rec["q0"] = [float(r["q0_1"]), float(r["q0_2"])]
            rec["qdot0"] = [float(r["qdot0_1"]), float(r["qdot0_2"])]
        except ValueError as exc:
            raise ScenarioError(f"bad number in agent row {r.get('agent')}: {exc}") from None
        out.append(rec)
    return out


def format_agent_table(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGENT_COLUMNS)
    for i, r in enumerate(records, 1):
        w.writerow([i] + [repr(float(r[f])) for f in TwoLinkArmParams.FIELDS]
                   + [repr(float(v)) for v in r["q0"]] + [repr(float(v)) for v in r["qdot0"]])
    return buf.getvalue()


# -- scenario documents ------------------------------------------------------------

def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(f"missing '{key}' in {where}")
    return d[key]


def _read_rel(base: Path, name: str) -> str:
    p = Path(name)
    if not p.is_absolute():
        p = base / p
    try:
        return p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {p}: {exc}") from None


def _graph(spec, base: Path, n: int) -> DirectedGraph:
    try:
        if isinstance(spec, str):
            return parse_edge_list(_read_rel(base, spec), n)
        if isinstance(spec, dict) and "edges" in spec:
            return DirectedGraph.from_edges(n, [tuple(e) for e in spec["edges"]])
    except ValueError as exc:
        raise ScenarioError(f"bad graph: {exc}") from None
    raise ScenarioError(f"graph entries must be a file name or {{edges: ...}}, got {spec!r}")


def _signal(spec: dict, base: Path, n: int, t_end: float, where: str) -> SwitchingSignal:
    tops = _need(spec, "topologies", where)
    if not isinstance(tops, list) or not tops:
        raise ScenarioError(f"{where}.topologies must be a nonempty list")
    graphs = [_graph(g, base, n) for g in tops]
    dwell = float(spec.get("dwell_floor", 0.0))
    sched = spec.get("schedule")
    try:
        if sched is None:
            return SwitchingSignal(tuple(graphs), ((0.0, 0),), dwell)
        if isinstance(sched, dict) and "period" in sched:
            return SwitchingSignal.periodic(graphs, float(sched["period"]), max(t_end, 1e-12), dwell)
        if isinstance(sched, str):
            return SwitchingSignal(tuple(graphs), tuple(parse_schedule(_read_rel(base, sched))), dwell)
        if isinstance(sched, list):
            return SwitchingSignal(tuple(graphs), tuple((float(t), int(k)) for t, k in sched), dwell)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    raise ScenarioError(f"{where}.schedule must be a period, a file name or a list")


def scenario_from_dict(doc: dict, base: Path | str = ".") -> ScenarioConfig:
    base = Path(base)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    unknown = set(doc) - set(SECTIONS) - {"name", "design"}
    if unknown:
        raise ScenarioError(f"unknown sections: {', '.join(sorted(unknown))}")

    ag = _need(doc, "agents", "scenario")
    recs = ag.get("params")
    if isinstance(recs, str):
        recs = parse_agent_table(_read_rel(base, recs))
    if not isinstance(recs, list) or not recs:
        raise ScenarioError("agents.params must be a file name or a nonempty list")
    grav = float(ag.get("gravity", GRAVITY))
    dist = ag.get("disturbance", "sinusoidal")
    agents = []
    try:
        for i, r in enumerate(recs, 1):
            prm = TwoLinkArmParams(**{f: float(r[f]) for f in TwoLinkArmParams.FIELDS}, gravity_accel=grav)
            agents.append(AgentSpec(TwoLinkArm(prm, make_disturbance(dist, i, 2)), r["q0"], r["qdot0"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad agent record: {exc}") from None
    n = len(agents)

    ld = doc.get("leader", {"type": "reference"}) or {"type": "reference"}
    if ld.get("type") == "reference":
        leader = ReferenceLeader()
    elif ld.get("type") == "constant":
        leader = ConstantLeader(_need(ld, "position", "leader"))
    else:
        raise ScenarioError(f"unknown leader type {ld.get('type')!r}")

    integ = doc.get("integration", {}) or {}
    try:
        t_end = float(integ.get("t_end", 40.0))
        dt = float(integ.get("dt", 1e-3))
        stride = int(integ.get("stride", 10))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad integration value: {exc}") from None
    substeps = integ.get("substeps", "auto")

    gr = _need(doc, "graphs", "scenario")
    gA = _signal(_need(gr, "A", "graphs"), base, n, t_end, "graphs.A")
    bspec = _need(gr, "B", "graphs")
    paired = bool(bspec.get("paired", False))
    if paired and "schedule" not in bspec:
        bspec = dict(bspec, schedule=[list(e) for e in gA.schedule])
    gB = _signal(bspec, base, n, t_end, "graphs.B")

    gn = _need(doc, "gains", "scenario")
    ob = doc.get("observer", {}) or {}
    bl = doc.get("blackout")
    blackout = None
    if bl:
        blackout = (float(_need(bl, "start", "blackout")), float(_need(bl, "end", "blackout")))
    try:
        gains = GainSet(mu=float(gn["mu"]), eta=float(gn["eta"]), beta=float(gn["beta"]),
                        epsilon=float(gn.get("epsilon", 0.0)))
        return ScenarioConfig(
            agents=agents, leader=leader, gA=gA, gB=gB, gains=gains,
            omega1=float(ob.get("omega1", 1.0)), omega2=float(ob.get("omega2", 5.0)),
            t_end=t_end, dt=dt, stride=stride, substeps=substeps, blackout=blackout,
            paired=paired, pin_leader=bool(gr.get("pin_leader", True)),
            observer_init=str(ob.get("init", "own")),
            observer_scheme=str(ob.get("scheme", "implicit")), name=str(doc.get("name", "scenario")),
            extras={"design": doc.get("design", {}) or {}, "agent_records": recs,
                    "gravity": grav, "disturbance": dist, "leader": ld})
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {path}: {exc}") from None
    return scenario_from_dict(doc, path.parent)


def _signal_doc(sig: SwitchingSignal) -> dict:
    return {"topologies": [{"edges": [[s, d, w] for s, d, w in g.edges()]} for g in sig.topologies],
            "schedule": [[t, k] for t, k in sig.schedule], "dwell_floor": sig.dwell_floor}


def scenario_to_dict(sc: ScenarioConfig) -> dict:
    """Self-contained document (graphs and agents inline)."""
    ex = sc.extras
    recs = []
    for a in sc.agents:
        prm = a.model.params
        r = {f: float(getattr(prm, f)) for f in TwoLinkArmParams.FIELDS}
        r["q0"] = [float(v) for v in a.q0]
        r["qdot0"] = [float(v) for v in a.qdot0]
        recs.append(r)
    doc = {
        "name": sc.name,
        "agents": {"params": recs, "gravity": float(ex.get("gravity", GRAVITY)),
                   "disturbance": ex.get("disturbance", "sinusoidal")},
        "leader": ex.get("leader", {"type": "reference"}),
        "graphs": {"A": _signal_doc(sc.gA), "B": dict(_signal_doc(sc.gB), paired=sc.paired),
                   "pin_leader": sc.pin_leader},
        "gains": {"mu": sc.gains.mu, "eta": sc.gains.eta, "beta": sc.gains.beta,
                  "epsilon": sc.gains.epsilon},
        "observer": {"omega1": sc.omega1, "omega2": sc.omega2, "init": sc.observer_init,
                     "scheme": sc.observer_scheme},
        "integration": {"t_end": sc.t_end, "dt": sc.dt, "stride": sc.stride, "substeps": sc.substeps},
        "blackout": None if sc.blackout is None else {"start": sc.blackout[0], "end": sc.blackout[1]},
    }
    if ex.get("design"):
        doc["design"] = ex["design"]
    return doc


def dump_scenario(sc: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(sc), sort_keys=False))


# -- trace CSV ---------------------------------------------------------------------

def trace_columns(n: int, p: int) -> list[str]:
    cols = ["t"]
    for base in ("q", "qdot", "rhat", "vhat", "tau"):
        cols += [f"{base}_{i}^({k})" for i in range(1, n + 1) for k in range(1, p + 1)]
    cols += [f"q_0^({k})" for k in range(1, p + 1)] + [f"qdot_0^({k})" for k in range(1, p + 1)]
    cols += ["V"] + [f"err_pos_{i}" for i in range(1, n + 1)] + [f"err_vel_{i}" for i in range(1, n + 1)]
    cols += ["topo_A", "topo_B"]
    return cols


def trace_to_array(tr: SimTrace) -> np.ndarray:
    T = len(tr.times)
    parts = [tr.times[:, None]]
    for arr in (tr.q, tr.qdot, tr.r_hat, tr.v_hat, tr.tau):
        parts.append(arr.reshape(T, -1))
    parts += [tr.q0, tr.qdot0, tr.V[:, None], tr.err_pos, tr.err_vel,
              tr.topo_A[:, None].astype(float), tr.topo_B[:, None].astype(float)]
    return np.hstack(parts)


def write_trace_csv(tr: SimTrace, path: str | Path) -> None:
    cols = trace_columns(tr.n, tr.dof)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, trace_to_array(tr), delimiter=",", fmt="%.17g")


def read_trace_csv(path: str | Path) -> SimTrace:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    n = sum(1 for c in header if c.startswith("err_pos_"))
    p = sum(1 for c in header if c.startswith("q_0^("))
    if header != trace_columns(n, p):
        raise ValueError("trace header does not match the expected column layout")
    T = data.shape[0]
    k = n * p
    blocks = [data[:, 1 + j * k: 1 + (j + 1) * k].reshape(T, n, p) for j in range(5)]
    o = 1 + 5 * k
    q0 = data[:, o:o + p]
    qd0 = data[:, o + p:o + 2 * p]
    V = data[:, o + 2 * p]
    return SimTrace(times=data[:, 0], q=blocks[0], qdot=blocks[1], r_hat=blocks[2], v_hat=blocks[3],
                    tau=blocks[4], q0=q0, qdot0=qd0, V=V, topo_A=data[:, -2].astype(int),
                    topo_B=data[:, -1].astype(int))


def default_scenario(**overrides) -> ScenarioConfig:
    sc = load_scenario(bundled_path())
    return sc.with_(**overrides) if overrides else sc


def write_edge_files(sc: ScenarioConfig, out: Path) -> list[Path]:
    paths = []
    for tag, sig in (("A", sc.gA), ("B", sc.gB)):
        for k, g in enumerate(sig.topologies, 1):
            p = out / f"graph_{tag}{k}.txt"
            p.write_text(format_edge_list(g))
            paths.append(p)
    return paths


def with_overrides(sc: ScenarioConfig, dt: Optional[float] = None, epsilon: Optional[float] = None,
                   mu: Optional[float] = None, eta: Optional[float] = None,
                   beta: Optional[float] = None) -> ScenarioConfig:
    g = sc.gains
    gains = GainSet(mu=g.mu if mu is None else mu, eta=g.eta if eta is None else eta,
                    beta=g.beta if beta is None else beta,
                    epsilon=g.epsilon if epsilon is None else epsilon)
    return sc.with_(gains=gains, dt=sc.dt if dt is None else dt)
