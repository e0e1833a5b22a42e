"""Gain design, independent gain verification, practical-tracking radius and dwell time.

The design path works with scalar eigenvalue summaries of the stacked
Laplacian form; ``verify_gains`` rebuilds the stacked matrices explicitly and
re-derives every bound, so the two paths share no intermediate numbers.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .control import GainSet
from .dynamics import BoundConstants
from .graph import GammaCertificate, LaplacianPartition

DELTA_FRACTION = 0.01   # delta = DELTA_FRACTION * k_m_lower
MU_MARGIN = 1.05        # mu_k* = MU_MARGIN * threshold_k
BETA_MARGIN = 1.1       # designed beta = BETA_MARGIN * beta_min
ETA_START = 1.1
ETA_GROWTH = 1.5
MAX_ITER = 60
MARGIN_FRACTION = 0.5   # calX - vartheta = MARGIN_FRACTION * calX1 (same for Y)
A3_FLOOR = 1e-9


class IterationCap(RuntimeError):
    """The eta search ran out of iterations; ``ledger`` holds the last state."""

    def __init__(self, message: str, ledger: "GainLedger"):
        super().__init__(message)
        self.ledger = ledger


@dataclass(frozen=True)
class DesignInputs:
    bounds: BoundConstants
    gamma: GammaCertificate
    part: LaplacianPartition
    dof: int = 2

    def __post_init__(self):
        self.bounds.validate()
        if self.dof < 1:
            raise ValueError("dof must be >= 1")
        if len(self.gamma.gamma) != self.part.n_followers:
            raise ValueError("gamma size does not match the follower count")

    @property
    def n(self) -> int:
        return self.part.n_followers


@dataclass
class GainLedger:
    n: int
    gamma_underbar: float
    lam_min_X: float
    lam_max_X: float
    delta: float
    xi: float
    beta_min: float
    mu_stars: tuple  # (mu1*, ..., mu6*)
    eta_stars: tuple  # (eta1*, eta2*)
    rho1: float
    rho2: float
    sigma2: float
    V_bar_star: float
    V_hat_star: float
    calX1: float
    calY1: float
    calX: float
    calY: float
    vartheta: float
    varepsilon_margin: float
    phi: float
    phi_rhs: float
    region_a1: float
    region_a1_min: float
    region_b_rhs: float
    p_min_on_S: float
    lam_max_L: float
    lam_min_N: float
    a3: float
    psi: float
    omega_radius: float = 0.0
    kappa: float = float("nan")
    Lambda: float = float("nan")
    dwell_min: float = float("nan")
    iterations: int = 0
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["mu_stars"] = list(self.mu_stars)
        d["eta_stars"] = list(self.eta_stars)
        return d

    def conditions(self) -> dict:
        """Design-side truth values of every condition the search enforces."""
        return {
            "phi_positive": self.phi > 0,
            "phi_margin": self.phi > self.phi_rhs,
            "region_a1": self.region_a1 > self.region_a1_min,
            "region_b": self.phi > self.region_b_rhs,
            "p_positive_on_S": self.p_min_on_S > 0,
            "rho_order": self.rho1 > self.rho2,
        }

    def clean(self) -> bool:
        return all(self.conditions().values())


# -- scalar helpers -------------------------------------------------------------

def beta_min(k_C: float, k_p: float, xi: float, gamma_underbar: float) -> float:
    """Smallest admissible signum gain (strict inequality)."""
    return (k_C * k_p ** 2 + xi) / gamma_underbar


def mu4_threshold(k_M: float, lam_min_X: float) -> float:
    return math.sqrt(2.0 * k_M / lam_min_X)


def phi(mu: float, eta: float, lam_min_X: float, k_C: float, k_p: float, k_M: float) -> float:
    return 0.5 * mu ** 2 * eta * lam_min_X - mu * k_C * k_p - k_M


def omega_radius(beta: float, gamma_underbar: float, n: int, epsilon: float, psi: float,
                 lambda_min_N: float) -> float:
    """Radius of the residual set reached by the boundary-layer law."""
    if epsilon < 0 or beta < 0 or gamma_underbar < 0 or n < 0:
        raise ValueError("inputs must be nonnegative")
    if not (psi > 0 and lambda_min_N > 0):
        raise ValueError("psi and lambda_min_N must be positive")
    return math.sqrt(beta * gamma_underbar * n * epsilon / (psi * lambda_min_N))


def dwell_time(entries: Sequence[tuple[float, float, float]]) -> tuple[float, float, float]:
    """(kappa, Lambda, pi_d) from per-topology (lam_min_N, lam_max_L, a3)."""
    entries = list(entries)
    if not entries:
        raise ValueError("need at least one topology")
    arr = np.asarray(entries, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("all dwell-time inputs must be positive")
    lam_min_N, lam_max_L, a3 = arr.T
    kappa = float(lam_max_L.max() / lam_min_N.min())
    Lambda = float((a3 / lam_max_L).min())
    return kappa, Lambda, math.log(kappa) / Lambda


def _g_form(x, y, mu, eta, lam_min_X, k_C, k_p, k_M):
    ph = phi(mu, eta, lam_min_X, k_C, k_p, k_M)
    return ph * y ** 2 + 0.5 * eta * lam_min_X * x ** 2 - 2 * k_C * k_p * x * y - k_C * x * y ** 2


def estimate_a3(mu: float, eta: float, lam_min_X: float, k_C: float, k_p: float, k_M: float,
                calX: float, calY: float, n_rays: int = 181, n_radii: int = 200,
                floor: float = A3_FLOOR) -> float:
    """min over the box [0, calX] x [0, calY] (origin excluded) of g / (mu (x^2 + y^2)).

    Sampled along rays from the origin so the quadratic part near the origin
    is captured; the result is floored at ``floor``.
    """
    th = np.linspace(0.0, 0.5 * np.pi, n_rays)
    c, s = np.cos(th), np.sin(th)
    with np.errstate(divide="ignore"):
        rmax = np.minimum(np.where(c > 0, calX / c, np.inf), np.where(s > 0, calY / s, np.inf))
    frac = np.concatenate([np.geomspace(1e-6, 1e-2, 20), np.linspace(1e-2, 1.0, n_radii)])
    r = rmax[:, None] * frac[None, :]
    x, y = r * c[:, None], r * s[:, None]
    val = _g_form(x, y, mu, eta, lam_min_X, k_C, k_p, k_M) / (mu * r ** 2)
    return max(float(val.min()), floor)


def _p_min_on_S(mu, eta, lam_min_X, k_C, k_p, k_M, e, calX, calY, x_in, y_in, m=120):
    """Sampled minimum of the pre-convergence form over U u V inside the box."""
    def p(x, y):
        return _g_form(x, y, mu, eta, lam_min_X, k_C, k_p, k_M) - e * x - mu * e * y

    xs_u = np.linspace(x_in, calX, m)
    ys_u = np.linspace(calY / (10 * m), calY, 2 * m)
    xs_v = np.linspace(calX / (10 * m), calX, 2 * m)
    ys_v = np.linspace(y_in, calY, m)
    pu = p(xs_u[:, None], ys_u[None, :]).min()
    pv = p(xs_v[:, None], ys_v[None, :]).min()
    return float(min(pu, pv))


def _sym2_eigs(a: float, b: float, d: float) -> tuple[float, float]:
    """Eigenvalues (min, max) of [[a, b], [b, d]]."""
    m, r = 0.5 * (a + d), math.hypot(0.5 * (a - d), b)
    return m - r, m + r


# -- ledger evaluation (design path) --------------------------------------

def _x_eigs(inputs: DesignInputs) -> tuple[float, float]:
    g = inputs.gamma.gamma
    S = g[:, None] * inputs.part.L22
    ev = np.linalg.eigvalsh(S + S.T)
    return float(ev[0]), float(ev[-1])


def compute_ledger(inputs: DesignInputs, gains: GainSet) -> GainLedger:
    """Evaluate every design quantity at fixed ``gains`` (no search)."""
    b = inputs.bounds
    n = inputs.n
    gl = inputs.gamma.gamma_underbar
    lmin, lmax = _x_eigs(inputs)
    kM, km, kC, kp, kq = b.k_M_upper, b.k_m_lower, b.k_C, b.k_p, b.k_q
    delta = DELTA_FRACTION * km
    kMd, kmd = kM + delta, km - delta
    xi = b.k_g + b.k_zeta + kM * kq
    bmin = beta_min(kC, kp, xi, gl)

    mu1 = MU_MARGIN * math.sqrt(kMd / (2.0 * lmax))
    mu2 = MU_MARGIN * math.sqrt(2.0 * gl * kmd / lmin)
    mu3 = max(mu1, mu2)
    mu4 = MU_MARGIN * mu4_threshold(kM, lmin)
    mu, eta, beta = gains.mu, gains.eta, gains.beta

    rho1 = eta * lmax - 0.5 * kMd / mu3 ** 2
    # rho2 / sigma2: Schur complements of the lower form's x and y blocks; the y-side
    # chain (calY1, calY) is reconstructed by mirroring the x-side one
    rho2 = 0.25 * eta * lmin - 0.5 * gl * kmd / mu3 ** 2
    sigma2 = 0.5 * gl * kmd - (gl * kmd) ** 2 / (mu3 ** 2 * eta * lmin)
    V_bar = eta * lmax * b.k_a ** 2 + 0.5 * kMd * b.k_b ** 2 + kMd * b.k_a * b.k_b / mu3
    X1 = math.sqrt(V_bar / rho2)
    Y1 = math.sqrt(V_bar / sigma2)
    V_hat = eta * lmax * X1 ** 2 + 0.5 * kMd * Y1 ** 2 + kMd * X1 * Y1 / mu3
    calX = math.sqrt(V_hat / rho2)
    calY = math.sqrt(V_hat / sigma2)
    x_in = MARGIN_FRACTION * X1
    y_in = MARGIN_FRACTION * Y1
    vartheta = calX - x_in
    eps_m = calY - y_in

    ph = phi(mu, eta, lmin, kC, kp, kM)
    phi_rhs = (2 * kC * kp) ** 2 / (2 * eta * lmin) + kC * calX
    a = 0.5 * eta * lmin
    a_star = a1 = 0.5 * a
    e = math.sqrt(n) * beta + kC * kp ** 2 + xi
    f = mu * e
    a1_min = e / x_in
    denom = a1 * x_in ** 2 - e * x_in
    b1x = f ** 2 / (4.0 * denom) if denom > 0 else math.inf
    b1y = e ** 2 / (4.0 * a1 * y_in ** 2) + f / y_in
    region_b_rhs = kC * calX + (2 * kC * kp) ** 2 / (4.0 * a_star) + max(b1x, b1y)
    p_min = _p_min_on_S(mu, eta, lmin, kC, kp, kM, e, calX, calY, x_in, y_in)

    lam_max_L = _sym2_eigs(eta * lmax, 0.5 * kMd / mu, 0.5 * kMd)[1]
    lam_min_N = _sym2_eigs(0.25 * eta * lmin, 0.5 * gl * kmd / mu, 0.5 * gl * kmd)[0]
    a3 = estimate_a3(mu, eta, lmin, kC, kp, kM, calX, calY)
    psi = a3 / lam_max_L
    omega = 0.0
    if gains.epsilon > 0 and lam_min_N > 0:
        omega = omega_radius(beta, gl, n, gains.epsilon, psi, lam_min_N)
    kappa, Lambda, dwell = (float("nan"),) * 3
    if lam_min_N > 0:
        kappa, Lambda, dwell = dwell_time([(lam_min_N, lam_max_L, a3)])

    return GainLedger(
        n=n, gamma_underbar=gl, lam_min_X=lmin, lam_max_X=lmax, delta=delta, xi=xi,
        beta_min=bmin, mu_stars=(mu1, mu2, mu3, mu4, mu, mu), eta_stars=(eta, eta),
        rho1=rho1, rho2=rho2, sigma2=sigma2, V_bar_star=V_bar, V_hat_star=V_hat,
        calX1=X1, calY1=Y1, calX=calX, calY=calY, vartheta=vartheta, varepsilon_margin=eps_m,
        phi=ph, phi_rhs=phi_rhs, region_a1=a1, region_a1_min=a1_min, region_b_rhs=region_b_rhs,
        p_min_on_S=p_min, lam_max_L=lam_max_L, lam_min_N=lam_min_N, a3=a3, psi=psi,
        omega_radius=omega, kappa=kappa, Lambda=Lambda, dwell_min=dwell,
    )


def _base_gains(inputs: DesignInputs) -> tuple[float, float]:
    """(beta, mu) fixed before the eta search."""
    led = compute_ledger(inputs, GainSet(mu=1.0, eta=ETA_START, beta=1.0))
    beta = BETA_MARGIN * led.beta_min if led.beta_min > 0 else BETA_MARGIN
    return beta, max(led.mu_stars[:4])


def design_gains_switched(bounds: BoundConstants,
                          topologies: Sequence[tuple[GammaCertificate, LaplacianPartition]],
                          dof: int = 2, epsilon: float = 0.0) -> tuple[GainSet, list[GainLedger]]:
    """One gain set valid for every topology: beta and mu are the per-topology
    maxima, then eta grows until every ledger is clean."""
    inputs = [DesignInputs(bounds, g, p, dof) for g, p in topologies]
    if not inputs:
        raise ValueError("need at least one topology")
    base = [_base_gains(i) for i in inputs]
    beta = max(b for b, _ in base)
    mu = max(m for _, m in base)
    eta = ETA_START
    eta1 = None
    for it in range(1, MAX_ITER + 1):
        gains = GainSet(mu=mu, eta=eta, beta=beta, epsilon=epsilon)
        ledgers = [compute_ledger(i, gains) for i in inputs]
        if eta1 is None and all(L.phi > 0 for L in ledgers):
            eta1 = eta
        if all(L.clean() for L in ledgers):
            for L in ledgers:
                L.eta_stars = (eta1, eta)
                L.iterations = it
            if all(L.lam_min_N > 0 for L in ledgers):
                kappa, Lam, pd = dwell_time([(L.lam_min_N, L.lam_max_L, L.a3) for L in ledgers])
                for L in ledgers:
                    L.kappa, L.Lambda, L.dwell_min = kappa, Lam, pd
            return gains, ledgers
        eta *= ETA_GROWTH
    raise IterationCap(f"eta search did not close after {MAX_ITER} iterations (eta={eta:.3g})",
                       ledgers[0])


def design_gains(bounds: BoundConstants, gamma: GammaCertificate, part: LaplacianPartition,
                 dof: int = 2, epsilon: float = 0.0) -> tuple[GainSet, GainLedger]:
    gains, ledgers = design_gains_switched(bounds, [(gamma, part)], dof, epsilon)
    return gains, ledgers[0]


# -- independent verification ---------------------------------------------

@dataclass(frozen=True)
class CheckRow:
    id: str
    satisfied: bool
    slack: float
    lhs: float = float("nan")
    rhs: float = float("nan")
    operands: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator:
        return iter((self.id, self.satisfied, self.slack))


def _row(rid, lhs, rhs, **operands) -> CheckRow:
    slack = float(lhs - rhs)
    return CheckRow(rid, bool(slack > 0 and math.isfinite(slack)), slack, float(lhs), float(rhs),
                    {k: float(v) for k, v in operands.items()})


def _schur_x(B, C, D):
    """lambda_min of B - C D^-1 C^T."""
    F = B - C @ np.linalg.solve(D, C.T)
    return float(np.linalg.eigvalsh(0.5 * (F + F.T))[0])


def _schur_y(B, C, D):
    G = D - C.T @ np.linalg.solve(B, C)
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def verify_gains(gains: GainSet, inputs: DesignInputs, omega2: Optional[float] = None,
                 samples: int = 160) -> list[CheckRow]:
    """Re-derive every design inequality from raw inputs and report its slack.

    Works on the explicitly stacked np x np matrices; nothing is reused from
    ``compute_ledger``.
    """
    b = inputs.bounds
    n, p = inputs.n, inputs.dof
    Gam = np.diag(inputs.gamma.gamma)
    L22 = inputs.part.L22
    I = np.eye(n * p)
    Xm = np.kron(Gam @ L22 + L22.T @ Gam, np.eye(p))
    ev = np.linalg.eigvalsh(Xm)
    lmin, lmax = ev[0], ev[-1]
    gl = float(np.min(np.diag(Gam)))
    kM, km = b.k_M_upper, b.k_m_lower
    delta = DELTA_FRACTION * km
    mu, eta, beta = gains.mu, gains.eta, gains.beta
    xi = b.k_g + b.k_zeta + kM * b.k_q
    rows = []

    rows.append(_row("beta_lower", beta * gl, b.k_C * b.k_p ** 2 + xi, beta=beta, gamma_underbar=gl,
                     k_C=b.k_C, k_p=b.k_p, xi=xi))
    thr1 = math.sqrt((kM + delta) / (2 * lmax))
    thr2 = math.sqrt(2 * gl * (km - delta) / lmin)
    thr4 = math.sqrt(2 * kM / lmin)
    rows.append(_row("mu1_upper_pd", mu, thr1, mu=mu, k_M=kM, delta=delta, lam_max_X=lmax))
    rows.append(_row("mu2_lower_pd", mu, thr2, mu=mu, k_m=km, delta=delta, lam_min_X=lmin))
    rows.append(_row("mu4_lower", mu, thr4, mu=mu, k_M=kM, lam_min_X=lmin))

    def upper_blocks(m):
        return eta * lmax * I, 0.5 * (kM + delta) / m * I, 0.5 * (kM + delta) * I

    def lower_blocks(m):
        c = gl * (km - delta)
        return 0.5 * (0.5 * eta * lmin) * I, 0.5 * c / m * I, 0.5 * c * I

    A_, C_, D_ = upper_blocks(mu)
    Lfull = np.block([[A_, C_], [C_.T, D_]])
    A_, C_, D_ = lower_blocks(mu)
    Nfull = np.block([[A_, C_], [C_.T, D_]])
    lam_max_L = float(np.linalg.eigvalsh(Lfull)[-1])
    lam_min_N = float(np.linalg.eigvalsh(Nfull)[0])
    rows.append(_row("upper_form_pd", float(np.linalg.eigvalsh(Lfull)[0]), 0.0, mu=mu, eta=eta))
    rows.append(_row("lower_form_pd", lam_min_N, 0.0, mu=mu, eta=eta))

    mu3 = MU_MARGIN * max(thr1, thr2)
    rows.append(_row("mu_ge_mu3", mu * (1 + 1e-12), mu3, mu=mu, mu3=mu3))
    Bl, Cl, Dl = lower_blocks(mu3)
    rho2 = _schur_x(Bl, Cl, Dl)
    sig2 = _schur_y(Bl, Cl, Dl)
    rho1 = eta * lmax - 0.5 * (kM + delta) / mu3 ** 2
    rows.append(_row("rho_order", rho1, rho2, rho1=rho1, rho2=rho2))
    rows.append(_row("rho2_positive", rho2, 0.0))

    def upper_value(x, y):
        Bu, Cu, Du = upper_blocks(mu3)
        z = np.concatenate([np.full(n * p, x / math.sqrt(n * p)), np.full(n * p, y / math.sqrt(n * p))])
        Hu = np.block([[Bu, np.abs(Cu)], [np.abs(Cu).T, Du]])
        return float(z @ Hu @ z)

    Vb = upper_value(b.k_a, b.k_b)
    X1, Y1 = math.sqrt(Vb / rho2), math.sqrt(Vb / sig2)
    Vh = upper_value(X1, Y1)
    calX, calY = math.sqrt(Vh / rho2), math.sqrt(Vh / sig2)
    x_in, y_in = MARGIN_FRACTION * X1, MARGIN_FRACTION * Y1
    vartheta, eps_m = calX - x_in, calY - y_in
    rows.append(_row("vartheta_margin", vartheta, calX - X1, vartheta=vartheta, calX=calX, calX1=X1))
    rows.append(_row("varepsilon_margin", eps_m, calY - Y1, varepsilon=eps_m, calY=calY, calY1=Y1))
    rows.append(_row("inner_x_positive", calX - vartheta, 0.0))
    rows.append(_row("inner_y_positive", calY - eps_m, 0.0))

    kC, kp = b.k_C, b.k_p
    ph = 0.5 * mu ** 2 * eta * lmin - mu * kC * kp - kM
    rows.append(_row("phi_positive", ph, 0.0, mu=mu, eta=eta))
    rows.append(_row("phi_margin", ph, (2 * kC * kp) ** 2 / (2 * eta * lmin) + kC * calX,
                     phi=ph, k_C=kC, k_p=kp, calX=calX, eta=eta, lam_min_X=lmin))

    a = 0.5 * eta * lmin
    a1 = a_star = 0.5 * a
    e = math.sqrt(n) * beta + kC * kp ** 2 + xi
    f = mu * e
    xr, yr = calX - vartheta, calY - eps_m
    rows.append(_row("region_a1", a1, e / xr, a1=a1, e=e, inner_x=xr))
    den = a1 * xr ** 2 - e * xr
    b1x = f * f / (4 * den) if den > 0 else math.inf
    b1y = e * e / (4 * a1 * yr ** 2) + f / yr
    rows.append(_row("region_b", ph, kC * calX + (2 * kC * kp) ** 2 / (4 * a_star) + max(b1x, b1y),
                     b1x=b1x, b1y=b1y, a_star=a_star, e=e, f=f))

    # direct sampling of the pre-convergence form on S
    xs = np.linspace(0.0, calX, samples + 1)[1:]
    ys = np.linspace(0.0, calY, samples + 1)[1:]
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    in_S = (xx >= xr) | (yy >= yr)
    pv = (ph * yy ** 2 + a * xx ** 2 - 2 * kC * kp * xx * yy - kC * xx * yy ** 2
          - e * xx - f * yy)
    rows.append(_row("p_positive_on_S", float(pv[in_S].min()), 0.0))

    if omega2 is not None:
        rows.append(_row("observer_omega2", omega2, b.k_q / n, omega2=omega2, k_q=b.k_q, n=n))
    return rows


def violated(rows: Sequence[CheckRow]) -> list[str]:
    return [r.id for r in rows if not r.satisfied]


# -- certificate file ---------------------------------------------------------

def format_certificate(gains: GainSet, sections: Sequence[tuple[str, Sequence[CheckRow], GainLedger]],
                       dwell: Optional[dict] = None) -> str:
    """Plain-text certificate: one ``check`` line per inequality with operands and slack."""
    out = ["# lagrange-swarm gain certificate",
           f"gains mu={gains.mu!r} eta={gains.eta!r} beta={gains.beta!r} epsilon={gains.epsilon!r}"]
    ok = True
    for name, rows, ledger in sections:
        out.append(f"topology {name}")
        for k, v in ledger.as_dict().items():
            if k == "notes":
                continue
            if isinstance(v, list):
                v = ",".join(repr(float(x)) for x in v)
            out.append(f"  ledger {k}={v!r}" if not isinstance(v, str) else f"  ledger {k}={v}")
        for r in rows:
            ops = " ".join(f"{k}={v!r}" for k, v in r.operands.items())
            status = "PASS" if r.satisfied else "FAIL"
            out.append(f"  check {r.id} {status} lhs={r.lhs!r} rhs={r.rhs!r} slack={r.slack!r}"
                       + (f" {ops}" if ops else ""))
            ok &= r.satisfied
    if dwell:
        out.append("dwell " + " ".join(f"{k}={v!r}" if not isinstance(v, str) else f"{k}={v}"
                                       for k, v in dwell.items()))
    out.append(f"result {'PASS' if ok else 'FAIL'}")
    return "\n".join(out) + "\n"


def _kv(tokens):
    out = {}
    for tok in tokens:
        k, _, v = tok.partition("=")
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out


def parse_certificate(text: str) -> dict:
    """Inverse of ``format_certificate`` (values come back as floats where numeric)."""
    cert = {"gains": {}, "topologies": [], "dwell": None, "result": None}
    cur = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        if head == "gains":
            cert["gains"] = _kv(rest)
        elif head == "topology":
            cur = {"name": " ".join(rest), "ledger": {}, "checks": []}
            cert["topologies"].append(cur)
        elif head == "ledger":
            k, _, v = rest[0].partition("=")
            if "," in v:
                cur["ledger"][k] = [float(x) for x in v.split(",")]
            else:
                cur["ledger"].update(_kv([rest[0]]))
        elif head == "check":
            rid, status, *ops = rest
            kv = _kv(ops)
            cur["checks"].append({"id": rid, "satisfied": status == "PASS", **kv})
        elif head == "dwell":
            cert["dwell"] = _kv(rest)
        elif head == "result":
            cert["result"] = rest[0]
        else:
            raise ValueError(f"unrecognised certificate line: {raw!r}")
    return cert
