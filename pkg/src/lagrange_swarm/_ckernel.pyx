# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 loop for a network of two-link arms with the distributed observer.

State layout (length 8n): q, qdot, r_hat, v_hat, each n x 2 row-major.
Parameter rows: m1, m2, l1, l2, lc1, lc2, I1, I2, gravity.
"""
import numpy as np
from libc.math cimport sin, cos, sqrt, isfinite, fabs


cdef inline double _sgn(double x) noexcept nogil:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


cdef int _rhs(const double[::1] y, double[::1] dy, int n,
              const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] P,
              double mu, double eta, double beta, double eps, double w1, double w2,
              double lq0, double lq1, double lv0, double lv1,
              const double[::1] zeta) noexcept nogil:
    cdef int i, j, node
    cdef int oq = 0, ov = 2 * n, orh = 4 * n, ovh = 6 * n
    cdef double q0, q1, v0, v1, r0, r1, u0, u1
    cdef double lin0, lin1, w, x0, x1, nr, s0, s1, t0, t1
    cdef double m1, m2, l1, lc1, lc2, I1, I2, grav, c2, m11, m12, m22, h, g0, g1, c12
    cdef double f0, f1, det, sr0, sr1, sv0, sv1
    for i in range(n):
        node = i + 1
        q0 = y[oq + 2 * i]
        q1 = y[oq + 2 * i + 1]
        v0 = y[ov + 2 * i]
        v1 = y[ov + 2 * i + 1]
        r0 = y[orh + 2 * i]
        r1 = y[orh + 2 * i + 1]
        u0 = y[ovh + 2 * i]
        u1 = y[ovh + 2 * i + 1]

        w = A[node, 0]
        lin0 = 0.0
        lin1 = 0.0
        if w != 0.0:
            lin0 += w * ((q0 - lq0) + mu * (v0 - lv0))
            lin1 += w * ((q1 - lq1) + mu * (v1 - lv1))
        w = B[node, 0]
        sr0 = 0.0
        sr1 = 0.0
        sv0 = 0.0
        sv1 = 0.0
        if w != 0.0:
            sr0 += w * (r0 - lq0)
            sr1 += w * (r1 - lq1)
            sv0 += w * (u0 - lv0)
            sv1 += w * (u1 - lv1)
        for j in range(n):
            w = A[node, j + 1]
            if w != 0.0:
                lin0 += w * ((q0 - y[oq + 2 * j]) + mu * (v0 - y[ov + 2 * j]))
                lin1 += w * ((q1 - y[oq + 2 * j + 1]) + mu * (v1 - y[ov + 2 * j + 1]))
            w = B[node, j + 1]
            if w != 0.0:
                sr0 += w * (r0 - y[orh + 2 * j])
                sr1 += w * (r1 - y[orh + 2 * j + 1])
                sv0 += w * (u0 - y[ovh + 2 * j])
                sv1 += w * (u1 - y[ovh + 2 * j + 1])

        x0 = (q0 - r0) + mu * (v0 - u0)
        x1 = (q1 - r1) + mu * (v1 - u1)
        if eps > 0.0:
            nr = sqrt(x0 * x0 + x1 * x1)
            if nr == 0.0:
                s0 = 0.0
                s1 = 0.0
            else:
                s0 = x0 / (nr + eps)
                s1 = x1 / (nr + eps)
        else:
            s0 = _sgn(x0)
            s1 = _sgn(x1)
        t0 = -eta * lin0 - beta * s0
        t1 = -eta * lin1 - beta * s1

        m1 = P[i, 0]
        m2 = P[i, 1]
        l1 = P[i, 2]
        lc1 = P[i, 4]
        lc2 = P[i, 5]
        I1 = P[i, 6]
        I2 = P[i, 7]
        grav = P[i, 8]
        c2 = cos(q1)
        m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + I1 + I2
        m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + I2
        m22 = m2 * lc2 * lc2 + I2
        h = -m2 * l1 * lc2 * sin(q1)
        c12 = cos(q0 + q1)
        g0 = (m1 * lc1 + m2 * l1) * grav * cos(q0) + m2 * lc2 * grav * c12
        g1 = m2 * lc2 * grav * c12
        # tau - C qdot - g - zeta
        f0 = t0 - (h * v1 * v0 + h * (v0 + v1) * v1) - g0 - zeta[2 * i]
        f1 = t1 - (-h * v0 * v0) - g1 - zeta[2 * i + 1]
        det = m11 * m22 - m12 * m12
        if not det > 0.0:
            return 1

        dy[oq + 2 * i] = v0
        dy[oq + 2 * i + 1] = v1
        dy[ov + 2 * i] = (m22 * f0 - m12 * f1) / det
        dy[ov + 2 * i + 1] = (m11 * f1 - m12 * f0) / det
        dy[orh + 2 * i] = u0 - w1 * _sgn(sr0)
        dy[orh + 2 * i + 1] = u1 - w1 * _sgn(sr1)
        dy[ovh + 2 * i] = -w2 * _sgn(sv0)
        dy[ovh + 2 * i + 1] = -w2 * _sgn(sv1)
    return 0


cdef void _implicit_sgn(double[::1] x, int xo, const double[::1] free, int fo, int n,
                       const double[:, ::1] B, double l0, double l1, double gh) noexcept nogil:
    """Solve x_i = free_i - gh * Sgn(sum_j b_ij (x_i - x_j)) by Gauss-Seidel sweeps.

    Each row is exact given its neighbours, so n + 1 sweeps are exact on
    acyclic graphs.
    """
    cdef int sweep, i, j, c, changed
    cdef double d, num, tgt, diff, val, lc
    for sweep in range(n + 1):
        changed = 0
        for i in range(n):
            d = B[i + 1, 0]
            for j in range(n):
                d += B[i + 1, j + 1]
            for c in range(2):
                if d == 0.0:
                    val = free[fo + 2 * i + c]
                else:
                    lc = l0 if c == 0 else l1
                    num = B[i + 1, 0] * lc
                    for j in range(n):
                        if B[i + 1, j + 1] != 0.0:
                            num += B[i + 1, j + 1] * x[xo + 2 * j + c]
                    tgt = num / d
                    diff = free[fo + 2 * i + c] - tgt
                    if fabs(diff) <= gh:
                        val = tgt
                    elif diff > 0:
                        val = free[fo + 2 * i + c] - gh
                    else:
                        val = free[fo + 2 * i + c] + gh
                if val != x[xo + 2 * i + c]:
                    x[xo + 2 * i + c] = val
                    changed = 1
        if not changed:
            break


cdef void _observer_step(const double[::1] src, double[::1] dst, double[::1] free, int n,
                         const double[:, ::1] B, double lq0, double lq1, double lv0, double lv1,
                         double hs, double w1, double w2) noexcept nogil:
    """Implicit step of length hs for the observer block (offsets 4n: r_hat, 6n: v_hat)."""
    cdef int a, orh = 4 * n, ovh = 6 * n
    for a in range(2 * n):
        free[a] = src[ovh + a]
        dst[ovh + a] = src[ovh + a]
    _implicit_sgn(dst, ovh, free, 0, n, B, lv0, lv1, hs * w2)
    for a in range(2 * n):
        free[a] = src[orh + a] + hs * dst[ovh + a]
        dst[orh + a] = free[a]
    _implicit_sgn(dst, orh, free, 0, n, B, lq0, lq1, hs * w1)


def observer_step(const double[::1] y, const double[:, ::1] B, double hs, double w1, double w2,
                  const double[::1] lq, const double[::1] lqd):
    """One implicit observer step; returns a copy of ``y`` with the observer block advanced."""
    cdef int n = y.shape[0] // 8
    out = np.array(y, dtype=float)
    cdef double[::1] o = out
    free = np.empty(2 * n)
    cdef double[::1] f = free
    _observer_step(y, o, f, n, B, lq[0], lq[1], lqd[0], lqd[1], hs, w1, w2)
    return out


def rhs(const double[::1] y, const double[:, ::1] A, const double[:, ::1] B,
        const double[:, ::1] P, double mu, double eta, double beta, double eps,
        double w1, double w2, const double[::1] lq, const double[::1] lqd,
        const double[::1] zeta):
    """Single right-hand-side evaluation; returns a new array."""
    cdef int n = P.shape[0]
    out = np.zeros(8 * n)
    cdef double[::1] dy = out
    if _rhs(y, dy, n, A, B, P, mu, eta, beta, eps, w1, w2, lq[0], lq[1], lqd[0], lqd[1], zeta):
        out[:] = np.nan
    return out


def advance(double[::1] y, double h, int nsteps,
            const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] P,
            double mu, double eta, double beta, double eps, double w1, double w2,
            const double[:, ::1] lq, const double[:, ::1] lqd, const double[:, ::1] zeta,
            int implicit_observer=1):
    """Take ``nsteps`` RK4 steps of size ``h`` in place.

    Leader and disturbance samples are given on the half-step grid (2*nsteps+1
    rows). With ``implicit_observer`` the observer block is advanced by two
    implicit half-steps per step and fed to the RK4 stages; otherwise it is
    integrated by RK4 with the signum evaluated at each stage. Returns the
    number of completed steps; fewer than ``nsteps`` means the state became
    non-finite and ``y`` holds the last finite state.
    """
    cdef int n = P.shape[0]
    cdef int m = 8 * n
    cdef int k, s, a, bad = 0, done = 0
    cdef double hh = 0.5 * h, h6 = h / 6.0
    if lq.shape[0] < 2 * nsteps + 1 or zeta.shape[0] < 2 * nsteps + 1:
        raise ValueError("leader/disturbance samples do not cover the step grid")
    cdef int po = 4 * n  # plant block length; the observer follows
    work = np.empty((8, m))
    cdef double[:, ::1] W = work
    cdef double[::1] k1 = W[0]
    cdef double[::1] k2 = W[1]
    cdef double[::1] k3 = W[2]
    cdef double[::1] k4 = W[3]
    cdef double[::1] yt = W[4]
    cdef double[::1] oh = W[5]
    cdef double[::1] of = W[6]
    cdef double[::1] fr = W[7]
    cdef int lim = po if implicit_observer else m
    with nogil:
        for k in range(nsteps):
            s = 2 * k
            if implicit_observer:
                _observer_step(y, oh, fr, n, B, lq[s + 1, 0], lq[s + 1, 1],
                               lqd[s + 1, 0], lqd[s + 1, 1], hh, w1, w2)
                _observer_step(oh, of, fr, n, B, lq[s + 2, 0], lq[s + 2, 1],
                               lqd[s + 2, 0], lqd[s + 2, 1], hh, w1, w2)
            bad = _rhs(y, k1, n, A, B, P, mu, eta, beta, eps, w1, w2,
                       lq[s, 0], lq[s, 1], lqd[s, 0], lqd[s, 1], zeta[s])
            for a in range(lim):
                yt[a] = y[a] + hh * k1[a]
            for a in range(lim, m):
                yt[a] = oh[a]
            bad |= _rhs(yt, k2, n, A, B, P, mu, eta, beta, eps, w1, w2,
                        lq[s + 1, 0], lq[s + 1, 1], lqd[s + 1, 0], lqd[s + 1, 1], zeta[s + 1])
            for a in range(lim):
                yt[a] = y[a] + hh * k2[a]
            bad |= _rhs(yt, k3, n, A, B, P, mu, eta, beta, eps, w1, w2,
                        lq[s + 1, 0], lq[s + 1, 1], lqd[s + 1, 0], lqd[s + 1, 1], zeta[s + 1])
            for a in range(lim):
                yt[a] = y[a] + h * k3[a]
            for a in range(lim, m):
                yt[a] = of[a]
            bad |= _rhs(yt, k4, n, A, B, P, mu, eta, beta, eps, w1, w2,
                        lq[s + 2, 0], lq[s + 2, 1], lqd[s + 2, 0], lqd[s + 2, 1], zeta[s + 2])
            if bad:
                break
            for a in range(lim):
                yt[a] = y[a] + h6 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])
            for a in range(lim, m):
                yt[a] = of[a]
            for a in range(m):
                if not isfinite(yt[a]):
                    bad = 1
            if bad:
                break
            for a in range(m):
                y[a] = yt[a]
            done += 1
    return done
