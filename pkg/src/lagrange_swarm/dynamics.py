"""Euler-Lagrange agent models, disturbances, leader trajectories and bound constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

GRAVITY = 9.81
SAFETY_FACTOR = 1.1


class SingularInertia(np.linalg.LinAlgError):
    pass


# -- disturbances ------------------------------------------------------------

class Disturbance:
    """Time-varying generalized force; ``__call__`` accepts scalar or 1-D time."""

    dof: int = 0
    bound: float = 0.0

    def __call__(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroDisturbance(Disturbance):
    dof: int = 2
    bound: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape + (self.dof,))


@dataclass(frozen=True)
class SinusoidalDisturbance(Disturbance):
    """``[sin(i * rate * t), cos(i * rate * t)]`` for agent number ``index``."""

    index: int
    rate: float = 0.1
    dof: int = 2
    bound: float = 1.0

    def __call__(self, t):
        w = self.index * self.rate * np.asarray(t, dtype=float)
        return np.stack([np.sin(w), np.cos(w)], axis=-1)


# -- agent models -----------------------------------------------------------

class AgentModel:
    """Interface for M(q) qdd + C(q, qd) qd + g(q) + zeta(t) = tau."""

    dof: int
    disturbance: Optional[Disturbance] = None

    def inertia(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def coriolis(self, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gravity(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zeta(self, t):
        if self.disturbance is None:
            t = np.asarray(t, dtype=float)
            return np.zeros(t.shape + (self.dof,))
        return self.disturbance(t)


@dataclass(frozen=True)
class TwoLinkArmParams:
    m1: float
    m2: float
    l1: float
    l2: float
    lc1: float
    lc2: float
    I1: float
    I2: float
    gravity_accel: float = GRAVITY

    FIELDS = ("m1", "m2", "l1", "l2", "lc1", "lc2", "I1", "I2")

    def __post_init__(self):
        for name in self.FIELDS:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gravity_accel < 0:
            raise ValueError("gravity_accel must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS] + [self.gravity_accel])


class TwoLinkArm(AgentModel):
    """Planar revolute two-link arm with joint angles measured from the horizontal."""

    dof = 2

    def __init__(self, params: TwoLinkArmParams, disturbance: Optional[Disturbance] = None):
        self.params = params
        self.disturbance = disturbance

    def __repr__(self):
        return f"TwoLinkArm({self.params!r})"

    def inertia(self, q):
        p = self.params
        c2 = math.cos(q[1])
        m11 = p.m1 * p.lc1**2 + p.m2 * (p.l1**2 + p.lc2**2 + 2 * p.l1 * p.lc2 * c2) + p.I1 + p.I2
        m12 = p.m2 * (p.lc2**2 + p.l1 * p.lc2 * c2) + p.I2
        m22 = p.m2 * p.lc2**2 + p.I2
        return np.array([[m11, m12], [m12, m22]])

    def coriolis(self, q, qdot):
        p = self.params
        h = -p.m2 * p.l1 * p.lc2 * math.sin(q[1])
        return np.array([[h * qdot[1], h * (qdot[0] + qdot[1])],
                         [-h * qdot[0], 0.0]])

    def gravity(self, q):
        p = self.params
        g = p.gravity_accel
        c12 = math.cos(q[0] + q[1])
        return np.array([(p.m1 * p.lc1 + p.m2 * p.l1) * g * math.cos(q[0]) + p.m2 * p.lc2 * g * c12,
                         p.m2 * p.lc2 * g * c12])


class ConstantInertiaModel(AgentModel):
    """Point mass(es) with constant inertia and no Coriolis term; handy for checks."""

    def __init__(self, M, gravity=None, disturbance: Optional[Disturbance] = None):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        self.dof = self.M.shape[0]
        self._g = np.zeros(self.dof) if gravity is None else np.asarray(gravity, dtype=float)
        self.disturbance = disturbance

    def inertia(self, q):
        return self.M.copy()

    def coriolis(self, q, qdot):
        return np.zeros((self.dof, self.dof))

    def gravity(self, q):
        return self._g.copy()


def eval_dynamics(model: AgentModel, q, qdot, t: float):
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    return model.inertia(q), model.coriolis(q, qdot), model.gravity(q), np.asarray(model.zeta(t))


def forward_accel(model: AgentModel, q, qdot, tau, t: float) -> np.ndarray:
    M, C, g, zeta = eval_dynamics(model, q, qdot, t)
    rhs = np.asarray(tau, dtype=float) - C @ np.asarray(qdot, dtype=float) - g - zeta
    if not np.all(np.isfinite(M)) or np.linalg.cond(M) > 1e12:
        raise SingularInertia(f"inertia matrix is numerically singular at q={q}")
    return np.linalg.solve(M, rhs)


# -- leader trajectories ------------------------------------------------------

class LeaderTrajectory:
    dof: int

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def acceleration(self, t):
        raise NotImplementedError


class ReferenceLeader(LeaderTrajectory):
    """Two-coordinate sum-of-sines leader used in the two-link arm demonstration."""

    dof = 2

    def position(self, t):
        t = np.asarray(t, dtype=float)
        a = 0.5 * np.sin(t) - 0.2 * np.sin(0.5 * t)
        b = 0.4 * (2 * np.sin(t) + np.sin(2 * t) / 2 + np.sin(3 * t) / 3 + np.sin(4 * t) / 4)
        return np.stack([a, b], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        a = 0.5 * np.cos(t) - 0.1 * np.cos(0.5 * t)
        b = 0.4 * (2 * np.cos(t) + np.cos(2 * t) + np.cos(3 * t) + np.cos(4 * t))
        return np.stack([a, b], axis=-1)

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        a = -0.5 * np.sin(t) + 0.05 * np.sin(0.5 * t)
        b = 0.4 * (-2 * np.sin(t) - 2 * np.sin(2 * t) - 3 * np.sin(3 * t) - 4 * np.sin(4 * t))
        return np.stack([a, b], axis=-1)


class ConstantLeader(LeaderTrajectory):
    def __init__(self, q0):
        self.q0 = np.atleast_1d(np.asarray(q0, dtype=float))
        self.dof = self.q0.size

    def position(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.q0, t.shape + (self.dof,)).copy()

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape + (self.dof,))

    acceleration = velocity


def leader_bounds(leader: LeaderTrajectory, n: int, t_end: float, samples: int = 20001,
                  safety: float = SAFETY_FACTOR) -> tuple[float, float]:
    """Sampled (k_p, k_q): bounds on ||1_n (x) qdot0|| and ||1_n (x) qddot0||."""
    t = np.linspace(0.0, t_end, samples)
    vmax = np.linalg.norm(leader.velocity(t), axis=-1).max()
    amax = np.linalg.norm(leader.acceleration(t), axis=-1).max()
    root_n = math.sqrt(n)
    return safety * root_n * vmax, safety * root_n * amax


# -- bound constants ------------------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    """Scalar bounds used by the gain design; any field may be left unset."""

    k_m_lower: Optional[float] = None
    k_M_upper: Optional[float] = None
    k_C: Optional[float] = None
    k_g: Optional[float] = None
    k_zeta: Optional[float] = None
    k_p: Optional[float] = None
    k_q: Optional[float] = None
    k_a: Optional[float] = None
    k_b: Optional[float] = None

    def merged(self, **kw) -> "BoundConstants":
        return replace(self, **kw)

    def missing(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name) is None]

    def validate(self) -> None:
        missing = self.missing()
        if missing:
            raise ValueError(f"bound constants not set: {', '.join(missing)}")
        for name in ("k_m_lower", "k_M_upper", "k_p", "k_q", "k_a", "k_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("k_C", "k_g", "k_zeta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.k_m_lower > self.k_M_upper:
            raise ValueError("k_m_lower exceeds k_M_upper")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _box(box, dof):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dof,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dof,))
    if np.any(hi < lo):
        raise ValueError("empty box")
    return lo, hi


def estimate_bounds(model: AgentModel, q_box, qdot_box, samples: int = 2000, seed: int = 0,
                    safety: float = SAFETY_FACTOR) -> BoundConstants:
    """Sample the operating box and inflate the extremes by ``safety``.

    Returns k_m_lower, k_M_upper, k_C and k_g; the remaining fields stay unset.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    qlo, qhi = _box(q_box, model.dof)
    vlo, vhi = _box(qdot_box, model.dof)
    lam_min, lam_max, c_ratio, g_max = np.inf, 0.0, 0.0, 0.0
    for _ in range(samples):
        q = rng.uniform(qlo, qhi)
        v = rng.uniform(vlo, vhi)
        eig = np.linalg.eigvalsh(model.inertia(q))
        lam_min = min(lam_min, eig[0])
        lam_max = max(lam_max, eig[-1])
        vn = np.linalg.norm(v)
        if vn > 0:
            c_ratio = max(c_ratio, np.linalg.norm(model.coriolis(q, v), 2) / vn)
        g_max = max(g_max, np.linalg.norm(model.gravity(q)))
    return BoundConstants(k_m_lower=lam_min / safety, k_M_upper=lam_max * safety,
                          k_C=c_ratio * safety, k_g=g_max * safety)


def combine_bounds(bounds) -> BoundConstants:
    """Worst case across agents: min of lower bounds, max of upper bounds."""
    bounds = list(bounds)
    out = {}
    for f in fields(BoundConstants):
        vals = [getattr(b, f.name) for b in bounds if getattr(b, f.name) is not None]
        if not vals:
            out[f.name] = None
        elif f.name == "k_m_lower":
            out[f.name] = min(vals)
        else:
            out[f.name] = max(vals)
    return BoundConstants(**out)


def check_skew(model: AgentModel, q, qdot, fd_step: float = 1e-6) -> float:
    """max over unit x of |x^T (Mdot - C - C^T) x|, with Mdot by central difference along qdot."""
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    mdot = (model.inertia(q + fd_step * qdot) - model.inertia(q - fd_step * qdot)) / (2 * fd_step)
    C = model.coriolis(q, qdot)
    S = mdot - C - C.T
    S = 0.5 * (S + S.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(S))))
