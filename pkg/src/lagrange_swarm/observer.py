"""Finite-time distributed estimator of the leader's position and velocity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph


class NotConverged(RuntimeError):
    pass


@dataclass
class ObserverState:
    r_hat: np.ndarray  # (n, p)
    v_hat: np.ndarray  # (n, p)
    omega1: float
    omega2: float

    def __post_init__(self):
        self.r_hat = np.atleast_2d(np.asarray(self.r_hat, dtype=float))
        self.v_hat = np.atleast_2d(np.asarray(self.v_hat, dtype=float))
        if self.r_hat.shape != self.v_hat.shape:
            raise ValueError("r_hat and v_hat must have the same shape")
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("observer gains must be strictly positive")


def neighbour_disagreement(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Rows ``sum_j w_ij (x_i - x_j)`` for followers i = 1..n.

    ``values`` stacks the leader in row 0. Differences are formed before
    weighting so identical neighbours contribute an exact zero.
    """
    diff = values[1:, None, :] - values[None, :, :]
    return np.einsum("ij,ijk->ik", weights[1:], diff)


def observer_rhs(state: ObserverState, gB: DirectedGraph, leader: tuple) -> tuple[np.ndarray, np.ndarray]:
    q0, qd0 = (np.asarray(v, dtype=float) for v in leader)
    n = state.r_hat.shape[0]
    if gB.n_followers != n:
        raise ValueError(f"graph has {gB.n_followers} followers, observer has {n}")
    R = np.vstack([q0, state.r_hat])
    Vh = np.vstack([qd0, state.v_hat])
    r_dot = state.v_hat - state.omega1 * np.sign(neighbour_disagreement(gB.weights, R))
    v_dot = -state.omega2 * np.sign(neighbour_disagreement(gB.weights, Vh))
    return r_dot, v_dot


def check_observer_gain(omega2: float, k_q: float, n: int) -> bool:
    return omega2 > k_q / n


def detect_convergence(times, errors, tol: float = 1e-5) -> float:
    """First sample time after which every error column stays below ``tol``.

    ``errors`` has one row per sample (any trailing shape). Raises
    ``NotConverged`` if the final sample is not below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    times = np.asarray(times, dtype=float)
    err = np.asarray(errors, dtype=float).reshape(len(times), -1)
    ok = np.all(err < tol, axis=1)
    if len(ok) == 0 or not ok[-1]:
        raise NotConverged(f"estimate errors not sustained below {tol:g}")
    bad = np.flatnonzero(~ok)
    first = 0 if len(bad) == 0 else bad[-1] + 1
    return float(times[first])
