"""Model-independent tracking control laws (signum and boundary-layer variants)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph
from .observer import neighbour_disagreement


@dataclass(frozen=True)
class GainSet:
    mu: float
    eta: float
    beta: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.eta > 1:
            raise ValueError("eta must exceed 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def continuous(self) -> bool:
        return self.epsilon > 0


def boundary_layer(x, epsilon: float) -> np.ndarray:
    """x / (||x||_2 + epsilon); zero at x = 0."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        return np.zeros_like(x)
    return x / (nrm + epsilon)


def _weights(gA) -> np.ndarray:
    return gA.weights if isinstance(gA, DirectedGraph) else np.asarray(gA, dtype=float)


def _linear_term(i, A, q, qdot, mu):
    a = A[i]
    return ((a[:, None]) * ((q[i] - q) + mu * (qdot[i] - qdot))).sum(axis=0)


def control_discontinuous(i: int, gA, q, qdot, r_hat_i, v_hat_i, gains: GainSet) -> np.ndarray:
    """Torque for follower node ``i`` (1-based; row 0 of ``q``/``qdot`` is the leader)."""
    A = _weights(gA)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    x = (q[i] - r_hat_i) + gains.mu * (qdot[i] - v_hat_i)
    return -gains.eta * _linear_term(i, A, q, qdot, gains.mu) - gains.beta * np.sign(x)


def control_continuous(i: int, gA, q, qdot, r_hat_i, v_hat_i, gains: GainSet) -> np.ndarray:
    if not gains.epsilon > 0:
        raise ValueError("the boundary-layer law needs epsilon > 0")
    A = _weights(gA)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    x = (q[i] - r_hat_i) + gains.mu * (qdot[i] - v_hat_i)
    return -gains.eta * _linear_term(i, A, q, qdot, gains.mu) - gains.beta * boundary_layer(x, gains.epsilon)


def network_control(A: np.ndarray, Q: np.ndarray, QD: np.ndarray, r_hat: np.ndarray,
                    v_hat: np.ndarray, gains: GainSet) -> np.ndarray:
    """All follower torques at once; ``Q``/``QD`` stack the leader in row 0."""
    lin = neighbour_disagreement(A, Q) + gains.mu * neighbour_disagreement(A, QD)
    x = (Q[1:] - r_hat) + gains.mu * (QD[1:] - v_hat)
    if gains.epsilon > 0:
        nrm = np.linalg.norm(x, axis=1, keepdims=True)
        s = x / (nrm + gains.epsilon)
    else:
        s = np.sign(x)
    return -gains.eta * lin - gains.beta * s
