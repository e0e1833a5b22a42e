"""Pure numpy twin of ``_ckernel``; same signatures and state layout."""
from __future__ import annotations

import numpy as np


def _sgn(x):
    return np.sign(x)


def _disagreement(W, X, leader):
    full = np.vstack([leader, X])
    diff = X[:, None, :] - full[None, :, :]
    return np.einsum("ij,ijk->ik", W[1:], diff)


def _rhs(y, n, A, B, P, mu, eta, beta, eps, w1, w2, lq, lqd, zeta):
    q = y[: 2 * n].reshape(n, 2)
    v = y[2 * n: 4 * n].reshape(n, 2)
    r = y[4 * n: 6 * n].reshape(n, 2)
    u = y[6 * n:].reshape(n, 2)
    lin = _disagreement(A, q, lq) + mu * _disagreement(A, v, lqd)
    x = (q - r) + mu * (v - u)
    if eps > 0:
        nr = np.linalg.norm(x, axis=1, keepdims=True)
        s = np.where(nr > 0, x / (nr + eps), 0.0)
    else:
        s = _sgn(x)
    tau = -eta * lin - beta * s

    m1, m2, l1, _, lc1, lc2, I1, I2, grav = P.T
    c2 = np.cos(q[:, 1])
    m11 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + I1 + I2
    m12 = m2 * (lc2**2 + l1 * lc2 * c2) + I2
    m22 = m2 * lc2**2 + I2
    h = -m2 * l1 * lc2 * np.sin(q[:, 1])
    c12 = np.cos(q[:, 0] + q[:, 1])
    g0 = (m1 * lc1 + m2 * l1) * grav * np.cos(q[:, 0]) + m2 * lc2 * grav * c12
    g1 = m2 * lc2 * grav * c12
    z = zeta.reshape(n, 2)
    f0 = tau[:, 0] - (h * v[:, 1] * v[:, 0] + h * (v[:, 0] + v[:, 1]) * v[:, 1]) - g0 - z[:, 0]
    f1 = tau[:, 1] + h * v[:, 0] * v[:, 0] - g1 - z[:, 1]
    det = m11 * m22 - m12 * m12
    if np.any(~(det > 0)):
        return None
    acc = np.stack([(m22 * f0 - m12 * f1) / det, (m11 * f1 - m12 * f0) / det], axis=1)
    rdot = u - w1 * _sgn(_disagreement(B, r, lq))
    udot = -w2 * _sgn(_disagreement(B, u, lqd))
    return np.concatenate([v.ravel(), acc.ravel(), rdot.ravel(), udot.ravel()])


def _implicit_sgn(x0, free, B, leader, gh):
    """Solve x_i = free_i - gh * Sgn(sum_j b_ij (x_i - x_j)) by Gauss-Seidel sweeps."""
    n = free.shape[0]
    x = x0.copy()
    d = B[1:].sum(axis=1)
    for _ in range(n + 1):
        changed = False
        for i in range(n):
            if d[i] == 0.0:
                val = free[i]
            else:
                tgt = (B[i + 1, 0] * leader + B[i + 1, 1:] @ x) / d[i]
                diff = free[i] - tgt
                val = np.where(np.abs(diff) <= gh, tgt, free[i] - gh * np.sign(diff))
            if np.any(val != x[i]):
                x[i] = val
                changed = True
        if not changed:
            break
    return x


def _observer_step(y, n, B, lq, lqd, hs, w1, w2):
    out = y.copy()
    r = y[4 * n: 6 * n].reshape(n, 2)
    v = y[6 * n:].reshape(n, 2)
    v_new = _implicit_sgn(v, v.copy(), B, lqd, hs * w2)
    free_r = r + hs * v_new
    r_new = _implicit_sgn(free_r, free_r, B, lq, hs * w1)
    out[4 * n: 6 * n] = r_new.ravel()
    out[6 * n:] = v_new.ravel()
    return out


def observer_step(y, B, hs, w1, w2, lq, lqd):
    y = np.asarray(y, dtype=float)
    return _observer_step(y, y.shape[0] // 8, B, np.asarray(lq), np.asarray(lqd), hs, w1, w2)


def rhs(y, A, B, P, mu, eta, beta, eps, w1, w2, lq, lqd, zeta):
    n = P.shape[0]
    out = _rhs(np.asarray(y, dtype=float), n, A, B, P, mu, eta, beta, eps, w1, w2,
               np.asarray(lq), np.asarray(lqd), np.asarray(zeta))
    return np.full(8 * n, np.nan) if out is None else out


def advance(y, h, nsteps, A, B, P, mu, eta, beta, eps, w1, w2, lq, lqd, zeta,
            implicit_observer=1):
    n = P.shape[0]
    po = 4 * n
    if lq.shape[0] < 2 * nsteps + 1 or zeta.shape[0] < 2 * nsteps + 1:
        raise ValueError("leader/disturbance samples do not cover the step grid")
    args = (n, A, B, P, mu, eta, beta, eps, w1, w2)
    for k in range(nsteps):
        s = 2 * k
        if implicit_observer:
            oh = _observer_step(y, n, B, lq[s + 1], lqd[s + 1], 0.5 * h, w1, w2)
            of = _observer_step(oh, n, B, lq[s + 2], lqd[s + 2], 0.5 * h, w1, w2)

            def stage(base, half):
                out = base.copy()
                out[po:] = (oh if half else of)[po:]
                return out
        else:
            def stage(base, half):
                return base
        k1 = _rhs(y, *args, lq[s], lqd[s], zeta[s])
        if k1 is None:
            return k
        k2 = _rhs(stage(y + 0.5 * h * k1, True), *args, lq[s + 1], lqd[s + 1], zeta[s + 1])
        if k2 is None:
            return k
        k3 = _rhs(stage(y + 0.5 * h * k2, True), *args, lq[s + 1], lqd[s + 1], zeta[s + 1])
        if k3 is None:
            return k
        k4 = _rhs(stage(y + h * k3, False), *args, lq[s + 2], lqd[s + 2], zeta[s + 2])
        if k4 is None:
            return k
        yn = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if implicit_observer:
            yn[po:] = of[po:]
        if not np.all(np.isfinite(yn)):
            return k
        y[:] = yn
    return nsteps
