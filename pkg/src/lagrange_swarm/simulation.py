"""Fixed-step RK4 simulation of the follower network, observer and leader.

Two routes share one chunking loop:

* networks made only of two-link arms go through the compiled (or numpy
  fallback) kernel in :mod:`lagrange_swarm.kernels`;
* anything else is integrated by a generic per-agent Python RK4.

Switch instants and blackout boundaries must lie on the ``dt`` grid; each
``dt`` step may be split into ``substeps`` RK4 substeps.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import _pykernel as _pyk
from . import kernels
from .control import GainSet, network_control
from .dynamics import (AgentModel, LeaderTrajectory, SinusoidalDisturbance, TwoLinkArm,
                       ZeroDisturbance, forward_accel)
from .graph import (DirectedGraph, GammaCertificate, LaplacianPartition, NoSpanningTree,
                    SwitchingSignal, laplacian, solve_gamma)
from .observer import neighbour_disagreement

log = logging.getLogger(__name__)

GRID_TOL = 1e-9
STABILITY_LIMIT = 2.0  # target h * stiffness; RK4's real-axis limit is about 2.785
MAX_SUBSTEP = 1e-4     # auto substeps never exceed this (signum chatter scales with h)


class NonFiniteState(RuntimeError):
    """Integration produced NaN/inf. ``trace`` holds the samples recorded so far."""

    def __init__(self, message: str, time: float, component: str, trace: "SimTrace"):
        super().__init__(message)
        self.time = time
        self.component = component
        self.trace = trace


@dataclass
class AgentSpec:
    model: AgentModel
    q0: np.ndarray
    qdot0: np.ndarray

    def __post_init__(self):
        self.q0 = np.atleast_1d(np.asarray(self.q0, dtype=float))
        self.qdot0 = np.atleast_1d(np.asarray(self.qdot0, dtype=float))
        if self.q0.shape != (self.model.dof,) or self.qdot0.shape != (self.model.dof,):
            raise ValueError("initial conditions must match the model's dof")


@dataclass
class ScenarioConfig:
    agents: list
    leader: LeaderTrajectory
    gA: SwitchingSignal
    gB: SwitchingSignal
    gains: GainSet
    omega1: float = 1.0
    omega2: float = 5.0
    t_end: float = 40.0
    dt: float = 1e-3
    stride: int = 10
    substeps: Union[int, str] = "auto"
    blackout: Optional[tuple] = None
    paired: bool = False
    pin_leader: bool = True
    observer_init: str = "own"
    observer_scheme: str = "implicit"
    name: str = "scenario"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.agents = list(self.agents)
        self.validate()

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def dof(self) -> int:
        return self.agents[0].model.dof

    def validate(self) -> None:
        if not self.agents:
            raise ValueError("need at least one agent")
        if len({a.model.dof for a in self.agents}) != 1:
            raise ValueError("all agents must share the dof")
        if self.leader.dof != self.dof:
            raise ValueError("leader dof does not match the agents")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if int(self.stride) < 1:
            raise ValueError("stride must be >= 1")
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("observer gains must be positive")
        if self.substeps != "auto" and int(self.substeps) < 1:
            raise ValueError("substeps must be >= 1 or 'auto'")
        if self.observer_init not in ("own", "leader"):
            raise ValueError("observer_init must be 'own' or 'leader'")
        if self.observer_scheme not in ("implicit", "rk4"):
            raise ValueError("observer_scheme must be 'implicit' or 'rk4'")
        for sig in (self.gA, self.gB):
            if sig.topologies[0].n_followers != self.n:
                raise ValueError("graph size does not match the agent count")
        if self.paired and len(self.gA.topologies) != len(self.gB.topologies):
            raise ValueError("paired switching needs equally many A and B topologies")
        if self.blackout is not None:
            a, b = self.blackout
            if not 0 <= a < b:
                raise ValueError("blackout must satisfy 0 <= start < end")

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)

    # -- topology queries --------------------------------------------------

    def a_index(self, t: float) -> int:
        return self.gA.index_at(t)

    def b_index(self, t: float) -> int:
        return self.gA.index_at(t) if self.paired else self.gB.index_at(t)

    def in_blackout(self, t: float) -> bool:
        return self.blackout is not None and self.blackout[0] <= t < self.blackout[1]

    def weights_at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Effective (A, B) adjacency at t, with pinning and blackout applied."""
        A = self.gA.topologies[self.a_index(t)].weights
        if self.in_blackout(t):
            return A, np.zeros_like(A)
        B = self.gB.topologies[self.b_index(t)].weights.copy()
        if self.pin_leader:
            pinned = A[:, 0] > 0
            B[pinned, 0] = A[pinned, 0]
        return A, B

    def event_times(self) -> list[float]:
        ev = set(self.gA.switch_times())
        if not self.paired:
            ev |= set(self.gB.switch_times())
        if self.blackout is not None:
            ev |= set(self.blackout)
        return sorted(t for t in ev if 0 < t < self.t_end)


@dataclass
class SimTrace:
    times: np.ndarray
    q: np.ndarray       # (T, n, p)
    qdot: np.ndarray
    r_hat: np.ndarray
    v_hat: np.ndarray
    tau: np.ndarray
    q0: np.ndarray      # (T, p)
    qdot0: np.ndarray
    V: np.ndarray       # (T,)
    topo_A: np.ndarray  # (T,) active index
    topo_B: np.ndarray  # (T,) active index, -1 during blackout
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def dof(self) -> int:
        return self.q.shape[2]

    @property
    def err_pos(self) -> np.ndarray:
        return np.linalg.norm(self.q - self.q0[:, None, :], axis=2)

    @property
    def err_vel(self) -> np.ndarray:
        return np.linalg.norm(self.qdot - self.qdot0[:, None, :], axis=2)

    @property
    def obs_err_pos(self) -> np.ndarray:
        return np.linalg.norm(self.r_hat - self.q0[:, None, :], axis=2)

    @property
    def obs_err_vel(self) -> np.ndarray:
        return np.linalg.norm(self.v_hat - self.qdot0[:, None, :], axis=2)

    def stacked_errors(self) -> tuple[np.ndarray, np.ndarray]:
        """(||q_tilde||, ||q_tilde_dot||) of the stacked network per sample."""
        e = (self.q - self.q0[:, None, :]).reshape(len(self.times), -1)
        ed = (self.qdot - self.qdot0[:, None, :]).reshape(len(self.times), -1)
        return np.linalg.norm(e, axis=1), np.linalg.norm(ed, axis=1)

    def terminal_state(self) -> np.ndarray:
        return np.concatenate([self.q[-1].ravel(), self.qdot[-1].ravel(),
                               self.r_hat[-1].ravel(), self.v_hat[-1].ravel()])

    def assert_finite(self) -> None:
        for name in ("q", "qdot", "r_hat", "v_hat", "tau"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in trace field {name}")


# -- Lyapunov function ---------------------------------------------------------

def lyapunov_value(q_tilde, qdot_tilde, eta: float, mu: float, gamma: GammaCertificate,
                   part: LaplacianPartition, models: Sequence[AgentModel], q) -> float:
    """0.5 eta e^T X e + mu^-1 e^T Gp M ed + 0.5 ed^T Gp M ed with M at the current q.

    ``q_tilde``, ``qdot_tilde`` and ``q`` are (n, p) arrays.
    """
    e = np.asarray(q_tilde, dtype=float)
    ed = np.asarray(qdot_tilde, dtype=float)
    q = np.asarray(q, dtype=float)
    g = gamma.gamma
    S = g[:, None] * part.L22
    Xn = S + S.T
    quad = float(np.einsum("ik,ij,jk->", e, Xn, e))
    Me = np.stack([models[i].inertia(q[i]) @ ed[i] for i in range(len(models))])
    cross = float(np.sum(g[:, None] * e * Me))
    kin = float(np.sum(g[:, None] * ed * Me))
    return 0.5 * eta * quad + cross / mu + 0.5 * kin


def _two_link_inertia_batch(P: np.ndarray, q: np.ndarray) -> np.ndarray:
    """M for every (sample, agent); ``q`` is (T, n, 2). Returns (T, n, 2, 2)."""
    m1, m2, l1, _, lc1, lc2, I1, I2, _ = P.T
    c2 = np.cos(q[..., 1])
    m11 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + I1 + I2
    m12 = m2 * (lc2**2 + l1 * lc2 * c2) + I2
    m22 = np.broadcast_to(m2 * lc2**2 + I2, m11.shape)
    return np.stack([np.stack([m11, m12], -1), np.stack([m12, m22], -1)], -2)


def _inertia_batch(models, q: np.ndarray) -> np.ndarray:
    if all(isinstance(m, TwoLinkArm) for m in models):
        return _two_link_inertia_batch(np.array([m.params.as_array() for m in models]), q)
    T, n, p = q.shape
    out = np.empty((T, n, p, p))
    for k in range(T):
        for i, m in enumerate(models):
            out[k, i] = m.inertia(q[k, i])
    return out


def lyapunov_series(trace: SimTrace, sc: ScenarioConfig, certs: dict) -> np.ndarray:
    """V at every sample using the certificate of the active A topology (NaN if none)."""
    models = [a.model for a in sc.agents]
    e = trace.q - trace.q0[:, None, :]
    ed = trace.qdot - trace.qdot0[:, None, :]
    M = _inertia_batch(models, trace.q)
    Me = np.einsum("tiab,tib->tia", M, ed)
    V = np.full(len(trace.times), np.nan)
    for k, cert in certs.items():
        if cert is None:
            continue
        gamma, part = cert
        sel = trace.topo_A == k
        if not sel.any():
            continue
        g = gamma.gamma
        S = g[:, None] * part.L22
        Xn = S + S.T
        quad = np.einsum("tik,ij,tjk->t", e[sel], Xn, e[sel])
        cross = np.einsum("i,tik,tik->t", g, e[sel], Me[sel])
        kin = np.einsum("i,tik,tik->t", g, ed[sel], Me[sel])
        V[sel] = 0.5 * sc.gains.eta * quad + cross / sc.gains.mu + 0.5 * kin
    return V


def topology_certificates(sc: ScenarioConfig) -> dict:
    out = {}
    for k, g in enumerate(sc.gA.topologies):
        part = laplacian(g)
        try:
            out[k] = (solve_gamma(part), part)
        except NoSpanningTree:
            out[k] = None
    return out


# -- stiffness-aware substep count --------------------------------------------

def _min_inertia_eig(model: AgentModel) -> float:
    if isinstance(model, TwoLinkArm):
        q2 = np.linspace(-np.pi, np.pi, 721)
        q = np.stack([np.zeros_like(q2), q2], axis=1)
        M = _two_link_inertia_batch(model.params.as_array()[None, :], q[:, None, :])[:, 0]
        return float(np.linalg.eigvalsh(M)[:, 0].min())
    return float(np.linalg.eigvalsh(model.inertia(np.zeros(model.dof)))[0])


def stiffness_estimate(sc: ScenarioConfig) -> float:
    """Largest damping rate mu (eta deg_i + beta/eps) / lambda_min(M_i) over agents and topologies."""
    deg = np.max([g.weights[1:].sum(axis=1) for g in sc.gA.topologies], axis=0)
    g = sc.gains
    extra = g.beta / g.epsilon if g.epsilon > 0 else 0.0
    rates = [g.mu * (g.eta * deg[i] + extra) / _min_inertia_eig(a.model)
             for i, a in enumerate(sc.agents)]
    return max(max(rates), 1e-12)


def resolve_substeps(sc: ScenarioConfig) -> int:
    if sc.substeps != "auto":
        return int(sc.substeps)
    stiff = math.ceil(sc.dt * stiffness_estimate(sc) / STABILITY_LIMIT)
    return max(1, stiff, math.ceil(sc.dt / MAX_SUBSTEP - 1e-9))


# -- generic Python right-hand side --------------------------------------------

@dataclass
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    r_hat: np.ndarray
    v_hat: np.ndarray

    def pack(self) -> np.ndarray:
        return np.concatenate([self.q.ravel(), self.qdot.ravel(), self.r_hat.ravel(), self.v_hat.ravel()])

    @classmethod
    def unpack(cls, y: np.ndarray, n: int, p: int) -> "SimState":
        k = n * p
        return cls(*(y[i * k:(i + 1) * k].reshape(n, p).copy() for i in range(4)))


def initial_state(sc: ScenarioConfig) -> SimState:
    q = np.stack([a.q0 for a in sc.agents])
    qd = np.stack([a.qdot0 for a in sc.agents])
    if sc.observer_init == "own":
        rh, vh = q.copy(), np.zeros_like(qd)
    else:
        rh = np.tile(sc.leader.position(0.0), (sc.n, 1))
        vh = np.tile(sc.leader.velocity(0.0), (sc.n, 1))
    return SimState(q, qd, rh, vh)


def _generic_rhs(y, t, A, B, sc: ScenarioConfig):
    n, p = sc.n, sc.dof
    s = SimState.unpack(y, n, p)
    q0, qd0 = sc.leader.position(t), sc.leader.velocity(t)
    Q = np.vstack([q0, s.q])
    QD = np.vstack([qd0, s.qdot])
    tau = network_control(A, Q, QD, s.r_hat, s.v_hat, sc.gains)
    acc = np.stack([forward_accel(a.model, s.q[i], s.qdot[i], tau[i], t) for i, a in enumerate(sc.agents)])
    rdot = s.v_hat - sc.omega1 * np.sign(neighbour_disagreement(B, np.vstack([q0, s.r_hat])))
    vdot = -sc.omega2 * np.sign(neighbour_disagreement(B, np.vstack([qd0, s.v_hat])))
    return np.concatenate([s.qdot.ravel(), acc.ravel(), rdot.ravel(), vdot.ravel()])


def implicit_observer_step(r_hat, v_hat, B, q0, qd0, hs, omega1, omega2):
    """Implicit Euler step of the observer with the set-valued signum solved exactly.

    ``q0``/``qd0`` are the leader values at the end of the step. Once an
    estimate has reached its target it stays there, so no numerical chattering.
    """
    v_new = _pyk._implicit_sgn(v_hat, v_hat.copy(), B, np.asarray(qd0, dtype=float), hs * omega2)
    free = r_hat + hs * v_new
    r_new = _pyk._implicit_sgn(free, free, B, np.asarray(q0, dtype=float), hs * omega1)
    return r_new, v_new


def _generic_advance(y, t0, h, nsteps, A, B, sc) -> int:
    n, p = sc.n, sc.dof
    po = 2 * n * p
    implicit = sc.observer_scheme == "implicit"
    for k in range(nsteps):
        t = t0 + k * h
        if implicit:
            obs = []
            cur = SimState.unpack(y, n, p)
            r, v = cur.r_hat, cur.v_hat
            for tt in (t + 0.5 * h, t + h):
                r, v = implicit_observer_step(r, v, B, sc.leader.position(tt), sc.leader.velocity(tt),
                                              0.5 * h, sc.omega1, sc.omega2)
                obs.append(np.concatenate([r.ravel(), v.ravel()]))

            def stage(z, j):
                z = z.copy()
                z[po:] = obs[j]
                return z
        else:
            def stage(z, j):
                return z
        try:
            k1 = _generic_rhs(y, t, A, B, sc)
            k2 = _generic_rhs(stage(y + 0.5 * h * k1, 0), t + 0.5 * h, A, B, sc)
            k3 = _generic_rhs(stage(y + 0.5 * h * k2, 0), t + 0.5 * h, A, B, sc)
            k4 = _generic_rhs(stage(y + h * k3, 1), t + h, A, B, sc)
        except np.linalg.LinAlgError:
            return k
        yn = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if implicit:
            yn[po:] = obs[1]
        if not np.all(np.isfinite(yn)):
            return k
        y[:] = yn
    return nsteps


def step(state: SimState, t: float, dt: float, sc: ScenarioConfig) -> SimState:
    """One RK4 step of size ``dt`` from ``t`` with the topology active at ``t``."""
    A, B = sc.weights_at(t)
    y = state.pack()
    if _generic_advance(y, t, dt, 1, A, B, sc) != 1:
        raise NonFiniteState(f"non-finite state after step at t={t}", t,
                             "state", _empty_trace(sc))
    return SimState.unpack(y, sc.n, sc.dof)


# -- engine -------------------------------------------------------------------

def _kernel_eligible(sc: ScenarioConfig) -> bool:
    return all(isinstance(a.model, TwoLinkArm) for a in sc.agents)


def _disturbance_samples(sc: ScenarioConfig, t: np.ndarray) -> np.ndarray:
    cols = []
    for a in sc.agents:
        d = a.model.disturbance or ZeroDisturbance(dof=sc.dof)
        cols.append(np.asarray(d(t), dtype=float).reshape(len(t), sc.dof))
    return np.ascontiguousarray(np.concatenate(cols, axis=1))


def _grid_index(t: float, dt: float) -> int:
    k = round(t / dt)
    if abs(k * dt - t) > GRID_TOL * max(1.0, abs(t)):
        raise ValueError(f"event time {t} is not on the dt={dt} grid")
    return int(k)


def _empty_trace(sc: ScenarioConfig) -> SimTrace:
    z = np.zeros((0, sc.n, sc.dof))
    return SimTrace(np.zeros(0), z, z, z, z, z, np.zeros((0, sc.dof)), np.zeros((0, sc.dof)),
                    np.zeros(0), np.zeros(0, int), np.zeros(0, int))


class _Recorder:
    def __init__(self, sc: ScenarioConfig):
        self.sc = sc
        self.rows = []

    def add(self, t: float, y: np.ndarray):
        sc = self.sc
        s = SimState.unpack(y, sc.n, sc.dof)
        q0, qd0 = sc.leader.position(t), sc.leader.velocity(t)
        A, _ = sc.weights_at(t)
        tau = network_control(A, np.vstack([q0, s.q]), np.vstack([qd0, s.qdot]), s.r_hat, s.v_hat, sc.gains)
        b = -1 if sc.in_blackout(t) else sc.b_index(t)
        self.rows.append((t, s, tau, q0, qd0, sc.a_index(t), b))

    def build(self, certs: Optional[dict] = None, meta: Optional[dict] = None) -> SimTrace:
        if not self.rows:
            return _empty_trace(self.sc)
        t, S, tau, q0, qd0, ia, ib = zip(*self.rows)
        tr = SimTrace(
            times=np.array(t), q=np.stack([s.q for s in S]), qdot=np.stack([s.qdot for s in S]),
            r_hat=np.stack([s.r_hat for s in S]), v_hat=np.stack([s.v_hat for s in S]),
            tau=np.stack(tau), q0=np.stack(q0), qdot0=np.stack(qd0), V=np.full(len(t), np.nan),
            topo_A=np.array(ia), topo_B=np.array(ib), meta=dict(meta or {}))
        if certs is not None:
            tr.V = lyapunov_series(tr, self.sc, certs)
        return tr


def _locate_nonfinite(y_prev: np.ndarray, sc: ScenarioConfig) -> str:
    names = ("q", "qdot", "r_hat", "v_hat")
    k = sc.n * sc.dof
    for i, nm in enumerate(names):
        if not np.all(np.isfinite(y_prev[i * k:(i + 1) * k])):
            return nm
    return "qdot"  # the acceleration blew up during the failed step


def run(sc: ScenarioConfig, backend: Optional[str] = None) -> SimTrace:
    """Integrate [0, t_end]; record every ``stride``-th grid point plus the final one.

    ``backend`` is ``None`` (default kernel), ``'compiled'``, ``'python'`` or
    ``'generic'`` (per-agent Python RK4, works for any model).
    """
    n_steps = _grid_index(sc.t_end, sc.dt)
    nsub = resolve_substeps(sc)
    h = sc.dt / nsub
    use_generic = backend == "generic" or not _kernel_eligible(sc)
    if not use_generic:
        kmod = kernels.get(backend) if backend else kernels
        P = np.ascontiguousarray([a.model.params.as_array() for a in sc.agents])
    certs = topology_certificates(sc)
    meta = {"dt": sc.dt, "substeps": nsub, "observer_scheme": sc.observer_scheme, "backend": "generic" if use_generic else
            (backend or kernels.BACKEND), "name": sc.name}

    # chunk boundaries: record points and events
    events = {_grid_index(t, sc.dt) for t in sc.event_times()}
    records = set(range(0, n_steps + 1, int(sc.stride))) | {n_steps}
    marks = sorted(events | records | {0})

    y = initial_state(sc).pack()
    rec = _Recorder(sc)
    rec.add(0.0, y)
    for k0, k1 in zip(marks[:-1], marks[1:]):
        t0 = k0 * sc.dt
        A, B = sc.weights_at(t0)
        nsteps = (k1 - k0) * nsub
        if use_generic:
            done = _generic_advance(y, t0, h, nsteps, A, B, sc)
        else:
            th = t0 + 0.5 * h * np.arange(2 * nsteps + 1)
            lq = np.ascontiguousarray(sc.leader.position(th))
            lqd = np.ascontiguousarray(sc.leader.velocity(th))
            zeta = _disturbance_samples(sc, th)
            done = kmod.advance(y, h, nsteps, np.ascontiguousarray(A), np.ascontiguousarray(B), P,
                                sc.gains.mu, sc.gains.eta, sc.gains.beta, sc.gains.epsilon,
                                sc.omega1, sc.omega2, lq, lqd, zeta,
                                int(sc.observer_scheme == "implicit"))
        if done < nsteps:
            t_fail = t0 + done * h
            comp = _locate_nonfinite(y, sc)
            trace = rec.build(certs, meta)
            raise NonFiniteState(f"state became non-finite near t={t_fail:.6g} ({comp})",
                                 t_fail, comp, trace)
        if k1 in records:
            rec.add(k1 * sc.dt, y)
    return rec.build(certs, meta)


# -- constructors used by scenario files and tests ------------------------------

def paired_signal(topologies: Sequence[DirectedGraph], sig: SwitchingSignal) -> SwitchingSignal:
    return SwitchingSignal(tuple(topologies), sig.schedule, sig.dwell_floor)


def make_disturbance(kind: str, index: int, dof: int):
    if kind == "sinusoidal":
        return SinusoidalDisturbance(index=index, dof=dof)
    if kind in ("none", "zero"):
        return ZeroDisturbance(dof=dof)
    raise ValueError(f"unknown disturbance {kind!r}")
