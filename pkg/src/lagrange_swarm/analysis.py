"""Post-run checks: phase error metrics, decay-rate fit, state boxes and the residual-set check.

Everything here is a pure function of a trace and (optionally) gain ledgers,
so re-analysing a stored trace reproduces the report exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .observer import NotConverged, detect_convergence

STEADY_FRACTION = 0.1   # steady state = final 10% of the horizon
T1_TOL = 1e-5
DECAY_DROP = 1e-3       # default fit window ends once V has fallen by this factor
EXACT_TOL = 0.1         # "exact tracking" slack used when the predicted radius is 0

PHASES = ("pre_T1", "tracking", "blackout", "post_reconnect", "steady_state")


class DegenerateWindow(ValueError):
    """Decay fit window holds too few usable samples."""


# -- decay fit -------------------------------------------------------------------

@dataclass
class DecayFit:
    rate: float
    residual: float   # RMS of the log-linear fit residuals
    stderr: float     # standard error of the rate
    window: tuple
    samples: int


def fit_log_slope(times, values) -> DecayFit:
    """Least-squares fit of log(values) = c - rate * t."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 3:
        raise DegenerateWindow(f"need at least 3 samples, got {len(t)}")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise DegenerateWindow("values must be finite and positive on the window")
    y = np.log(v)
    # centred normal equations: a constant series gives a slope of exactly 0
    tc = t - t.mean()
    yc = y - y.mean()
    sxx = float(tc @ tc)
    if sxx <= 0:
        raise DegenerateWindow("window has zero time extent")
    slope = float(tc @ yc) / sxx
    res = yc - slope * tc
    s2 = float(res @ res) / (len(t) - 2)
    stderr = math.sqrt(s2 / sxx)
    rate = -slope
    return DecayFit(rate=rate + 0.0, residual=float(np.sqrt(np.mean(res ** 2))), stderr=stderr,
                    window=(float(t[0]), float(t[-1])), samples=len(t))


def fit_decay_rate(trace, window: tuple) -> DecayFit:
    """Exponential rate of ``trace.V`` over the closed window ``(t_a, t_b)``."""
    ta, tb = window
    sel = (trace.times >= ta) & (trace.times <= tb)
    return fit_log_slope(trace.times[sel], trace.V[sel])


def default_decay_window(trace, t1: float, t_stop: Optional[float] = None,
                         drop: float = DECAY_DROP) -> tuple:
    """[T1, first time V falls below ``drop`` * V(T1)], cut at ``t_stop``."""
    t = trace.times
    stop = t[-1] if t_stop is None else t_stop
    sel = (t >= t1) & (t < stop) & np.isfinite(trace.V)
    idx = np.flatnonzero(sel)
    if len(idx) == 0:
        return (t1, t1)
    v0 = trace.V[idx[0]]
    below = idx[trace.V[idx] <= drop * v0]
    end = t[below[0]] if len(below) else t[idx[-1]]
    return (float(t[idx[0]]), float(end))


def monotonicity_excess(trace, t_from: float) -> float:
    """Largest increase of V between consecutive samples at or after ``t_from`` (0 if none)."""
    V = trace.V[trace.times >= t_from]
    V = V[np.isfinite(V)]
    if len(V) < 2:
        return 0.0
    return float(max(np.diff(V).max(), 0.0))


# -- convergence and phases ---------------------------------------------------------

def observer_errors(trace) -> np.ndarray:
    """Per-sample, per-follower max of the two estimate error norms."""
    return np.maximum(trace.obs_err_pos, trace.obs_err_vel)


def detect_t1(trace, t_from: float = 0.0, t_to: Optional[float] = None, tol: float = T1_TOL) -> float:
    """Empirical observer convergence time within [t_from, t_to); NaN if not reached."""
    t = trace.times
    sel = t >= t_from
    if t_to is not None:
        sel &= t < t_to
    if not sel.any():
        return float("nan")
    try:
        return detect_convergence(t[sel], observer_errors(trace)[sel], tol)
    except NotConverged:
        return float("nan")


@dataclass
class PhaseStats:
    t_start: float
    t_end: float
    samples: int
    max_err_pos: float
    max_err_vel: float
    max_obs_err: float


def phase_labels(times, t1: float, blackout: Optional[tuple], t_end: float) -> np.ndarray:
    """Assign every sample to exactly one phase (see ``PHASES``)."""
    t = np.asarray(times, dtype=float)
    t_ss = (1.0 - STEADY_FRACTION) * t_end
    lab = np.full(len(t), "tracking", dtype=object)
    if math.isnan(t1):
        pre = np.ones(len(t), dtype=bool)
    else:
        pre = t < t1
    lab[pre] = "pre_T1"
    if blackout is not None:
        a, b = blackout
        if math.isnan(t1):
            lab[t >= a] = "tracking"
        lab[(t >= a) & (t < b)] = "blackout"
        lab[t >= b] = "post_reconnect"
    lab[t >= t_ss] = "steady_state"
    return lab


def phase_stats(trace, labels) -> dict:
    ep, ev, eo = trace.err_pos.max(axis=1), trace.err_vel.max(axis=1), observer_errors(trace).max(axis=1)
    out = {}
    for name in PHASES:
        sel = labels == name
        if not sel.any():
            continue
        t = trace.times[sel]
        out[name] = PhaseStats(float(t[0]), float(t[-1]), int(sel.sum()), float(ep[sel].max()),
                               float(ev[sel].max()), float(eo[sel].max()))
    return out


# -- region checks ------------------------------------------------------------------

def _as_list(ledger) -> list:
    if ledger is None:
        return []
    return list(ledger) if isinstance(ledger, (list, tuple)) else [ledger]


def check_boxes(trace, ledger) -> int:
    """Samples with ||q_tilde|| >= calX or ||q_tilde_dot|| >= calY (tightest box over ledgers)."""
    leds = _as_list(ledger)
    if not leds:
        raise ValueError("need at least one ledger")
    cx = min(L.calX for L in leds)
    cy = min(L.calY for L in leds)
    e, ed = trace.stacked_errors()
    return int(np.count_nonzero((e >= cx) | (ed >= cy)))


@dataclass
class OmegaCheck:
    predicted: float
    observed: float
    satisfied: bool


def steady_state_norm(trace) -> float:
    """max over the final 10% of ||[q_tilde; q_tilde_dot]||."""
    t = trace.times
    sel = t >= (1.0 - STEADY_FRACTION) * t[-1]
    e, ed = trace.stacked_errors()
    return float(np.sqrt(e[sel] ** 2 + ed[sel] ** 2).max())


def check_omega(trace, ledger, exact_tol: float = EXACT_TOL) -> OmegaCheck:
    """Compare the steady-state error with the largest predicted residual radius.

    A zero radius (signum law) turns the check into ``observed <= exact_tol``.
    """
    leds = _as_list(ledger)
    radius = max((L.omega_radius for L in leds), default=0.0)
    obs = steady_state_norm(trace)
    ok = obs <= radius if radius > 0 else obs <= exact_tol
    return OmegaCheck(float(radius), obs, bool(ok))


# -- report -------------------------------------------------------------------------

@dataclass
class RunReport:
    name: str
    t_end: float
    T1: float
    T1_reconnect: float = float("nan")
    decay: Optional[DecayFit] = None
    decay_bound: float = float("nan")
    monotonic_excess: float = float("nan")
    phases: dict = field(default_factory=dict)
    box_violations: Optional[int] = None
    omega: Optional[OmegaCheck] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.decay is not None:
            d["decay"]["window"] = list(self.decay.window)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        if d.get("decay") is not None:
            dec = dict(d["decay"])
            dec["window"] = tuple(dec["window"])
            d["decay"] = DecayFit(**dec)
        if d.get("omega") is not None:
            d["omega"] = OmegaCheck(**d["omega"])
        d["phases"] = {k: PhaseStats(**v) for k, v in (d.get("phases") or {}).items()}
        return cls(**d)

    def to_json(self) -> str:
        # NaN/inf are written as JSON's non-standard tokens, which json.loads accepts
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [f"# run report: {self.name}"]
        for k, v in _flatten(self.to_dict()):
            lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunReport":
        return cls.from_dict(parse_report_text(text))

    def summary(self) -> str:
        """Short human-readable digest for the terminal."""
        out = [f"scenario {self.name}: T1 = {self.T1:.4g} s"]
        if not math.isnan(self.T1_reconnect):
            out.append(f"  observer reconverged at {self.T1_reconnect:.4g} s")
        for k, p in self.phases.items():
            out.append(f"  {k:<15} [{p.t_start:7.3f}, {p.t_end:7.3f}]  pos {p.max_err_pos:.3e}"
                       f"  vel {p.max_err_vel:.3e}  obs {p.max_obs_err:.3e}")
        if self.decay is not None:
            out.append(f"  decay rate {self.decay.rate:.4g} +/- {self.decay.stderr:.2g} /s"
                       f" (ledger bound {self.decay_bound:.3g})")
        if self.box_violations is not None:
            out.append(f"  box violations {self.box_violations}")
        if self.omega is not None:
            out.append(f"  residual {self.omega.observed:.4g} vs radius {self.omega.predicted:.4g}:"
                       f" {'ok' if self.omega.satisfied else 'exceeded'}")
        return "\n".join(out)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            if not v:
                yield key, "{}"
            else:
                yield from _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)):
            yield key, ",".join(repr(float(x)) for x in v)
        else:
            yield key, v


def _parse_scalar(s: str):
    if s == "none":
        return None
    if s in ("true", "false"):
        return s == "true"
    if s == "{}":
        return {}
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def parse_report_text(text: str) -> dict:
    """Inverse of ``RunReport.to_text`` (nested dict as produced by ``to_dict``)."""
    out: dict = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition(" = ")
        if not sep:
            raise ValueError(f"malformed report line: {raw!r}")
        parts = key.split(".")
        cur = out
        for p in parts[:-1]:
            cur = cur.setdefault(p, {})
        if parts[-1] == "window":
            cur[parts[-1]] = [float(x) for x in val.split(",")]
        elif parts[-1] == "name":
            cur[parts[-1]] = val
        else:
            cur[parts[-1]] = _parse_scalar(val)
    for k in ("t_end", "T1", "T1_reconnect", "decay_bound", "monotonic_excess"):
        if isinstance(out.get(k), int):
            out[k] = float(out[k])
    return out


def analyze(trace, blackout: Optional[tuple] = None, ledgers: Optional[Sequence] = None,
            name: str = "scenario", tol: float = T1_TOL) -> RunReport:
    """Build the run report. ``ledgers`` (one per A topology) enable the bound checks."""
    t_end = float(trace.times[-1])
    stop = blackout[0] if blackout is not None else None
    t1 = detect_t1(trace, 0.0, stop, tol)
    t1r = detect_t1(trace, blackout[1], None, tol) if blackout is not None else float("nan")
    labels = phase_labels(trace.times, t1, blackout, t_end)
    rep = RunReport(name=name, t_end=t_end, T1=t1, T1_reconnect=t1r,
                    phases=phase_stats(trace, labels))
    if not math.isnan(t1):
        win = default_decay_window(trace, t1, stop)
        try:
            rep.decay = fit_decay_rate(trace, win)
        except DegenerateWindow:
            rep.decay = None
        rep.monotonic_excess = monotonicity_excess(trace, t1) if stop is None else float("nan")
    leds = _as_list(ledgers)
    if leds:
        rep.decay_bound = float(min(L.psi for L in leds))
        rep.box_violations = check_boxes(trace, leds)
        rep.omega = check_omega(trace, leds)
    return rep
