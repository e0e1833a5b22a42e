"""Acceptance criteria 1-9, one verdict line each.

Run on its own with ``python tests/test_acceptance.py`` (or ``pytest -s``) to see
the PASS/FAIL lines; they are also collected into pytest's terminal summary.
"""
import math
import time

import numpy as np
import pytest

from lagrange_swarm.analysis import (check_boxes, check_omega, default_decay_window, detect_t1,
                                     fit_decay_rate, steady_state_norm)
from lagrange_swarm.certification import (DEFAULT_QDOT_BOX, DEFAULT_Q_BOX, certify_scenario,
                                          scenario_ledgers)
from lagrange_swarm.control import GainSet
from lagrange_swarm.dynamics import TwoLinkArm, check_skew
from lagrange_swarm.gains import DesignInputs, design_gains, dwell_time, verify_gains
from lagrange_swarm.graph import laplacian, solve_gamma
from lagrange_swarm.simulation import run

from conftest import random_bounds, random_tree_graph, table_params


def test_criterion_1_gamma_existence(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_eig, worst_max = math.inf, 0.0
    ok = True
    for _ in range(100):
        part = laplacian(random_tree_graph(rng, 8))
        cert = solve_gamma(part)
        G = np.diag(cert.gamma)
        lam = np.linalg.eigvalsh(G @ part.L22 + part.L22.T @ G)[0]
        worst_eig = min(worst_eig, lam)
        worst_max = max(worst_max, abs(cert.gamma.max() - 1.0))
        ok &= bool(np.all(cert.gamma > 0) and lam > 1e-9 and cert.gamma.max() == 1.0)
    dt = time.perf_counter() - t0
    ok &= dt < 5.0
    assert verdict(1, ok, f"min eig {worst_eig:.3g} > 1e-9, |max gamma - 1| = {worst_max:.1g}, {dt:.2f} s < 5 s")


def test_criterion_2_skew_symmetry(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(1, 6):
        arm = TwoLinkArm(table_params(i))
        for _ in range(1000):
            q = rng.uniform(*DEFAULT_Q_BOX, size=2)
            qd = rng.uniform(*DEFAULT_QDOT_BOX, size=2)
            worst = max(worst, check_skew(arm, q, qd, fd_step=1e-6))
    dt = time.perf_counter() - t0
    assert verdict(2, worst <= 1e-5 and dt < 10.0, f"max residual {worst:.2e} <= 1e-5, {dt:.2f} s < 10 s")


def test_criterion_3_scenario(verdict, demo_sc):
    t0 = time.perf_counter()
    tr = run(demo_sc)
    dt = time.perf_counter() - t0
    a, b = demo_sc.blackout
    t1 = detect_t1(tr, 0.0, a)
    inside = (tr.times >= a) & (tr.times < b)
    finite = all(np.all(np.isfinite(getattr(tr, f))) for f in ("q", "qdot", "r_hat", "v_hat", "tau"))
    in_box = bool(np.all((tr.q[inside] >= DEFAULT_Q_BOX[0]) & (tr.q[inside] <= DEFAULT_Q_BOX[1]))
                  and np.all(np.abs(tr.qdot[inside]) <= DEFAULT_QDOT_BOX[1]))
    k = int(np.argmin(np.abs(tr.times - 35.0)))
    pos, vel = tr.err_pos[k].max(), tr.err_vel[k].max()
    ok_a = t1 < 10.0
    ok_b = finite and in_box
    ok_c = pos <= 0.05 and vel <= 0.1
    ok = ok_a and ok_b and ok_c and dt < 60.0
    assert verdict(3, ok, f"(a) T1 = {t1:.3g} s < 10; (b) finite {finite}, in design box {in_box} "
                          f"(max blackout err pos {tr.err_pos[inside].max():.3g}, vel {tr.err_vel[inside].max():.3g}); "
                          f"(c) at t=35 pos {pos:.3g} <= 0.05, vel {vel:.3g} <= 0.1; {dt:.1f} s < 60 s")


def test_criterion_4_exponential_decay(verdict, fixed_sc, fixed_trace):
    tr = fixed_trace
    t1 = detect_t1(tr)
    after = tr.times > t1
    v_t1 = tr.V[np.flatnonzero(tr.times >= t1)[0]]
    V = tr.V[after]
    excess = float(max(np.diff(V).max(), 0.0))
    mono = excess <= 1e-6 * v_t1
    win = default_decay_window(tr, t1)
    fit = fit_decay_rate(tr, win)
    psi = min(L.psi for L in scenario_ledgers(fixed_sc))
    rate_ok = fit.rate > 0 and fit.rate >= psi - fit.stderr
    assert verdict(4, mono and rate_ok,
                   f"T1 = {t1:.3g} s, max V increase {excess:.2e} <= {1e-6 * v_t1:.2e}; "
                   f"rate {fit.rate:.4g} +/- {fit.stderr:.1g} >= ledger bound {psi:.3g} "
                   f"(window {win[0]:.3g}-{win[1]:.3g} s)")


def test_criterion_5_practical_tracking(verdict, demo_sc):
    norms, omega = {}, None
    for eps in (0.05, 0.5):
        sc = demo_sc.with_(gains=GainSet(demo_sc.gains.mu, demo_sc.gains.eta, demo_sc.gains.beta, eps))
        tr = run(sc)
        norms[eps] = steady_state_norm(tr)
        if eps == 0.5:
            omega = check_omega(tr, scenario_ledgers(sc))
    ordered = norms[0.05] < norms[0.5]
    assert verdict(5, ordered and omega.satisfied,
                   f"steady-state err(0.05) = {norms[0.05]:.3g} < err(0.5) = {norms[0.5]:.3g}; "
                   f"err(0.5) {omega.observed:.3g} <= radius {omega.predicted:.3g}")


def test_criterion_6_gain_round_trip(verdict):
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    failures, min_slack = 0, math.inf
    for _ in range(50):
        b = random_bounds(rng)
        part = laplacian(random_tree_graph(rng, 5))
        gamma = solve_gamma(part)
        gains, _ = design_gains(b, gamma, part)
        rows = verify_gains(gains, DesignInputs(b, gamma, part))
        failures += sum(not (r.satisfied and r.slack > 0) for r in rows)
        min_slack = min(min_slack, min(r.slack for r in rows))
    dt = time.perf_counter() - t0
    assert verdict(6, failures == 0 and dt < 30.0,
                   f"{failures} unsatisfied rows over 50 sets, min slack {min_slack:.3g}, {dt:.2f} s < 30 s")


def test_criterion_7_boxes(verdict, demo_sc):
    cert = certify_scenario(demo_sc, design=True)
    sc = demo_sc.with_(gains=cert.gains)
    tr = run(sc)
    ledgers = [led for _, _, led in cert.sections]
    viol = check_boxes(tr, ledgers)
    e, ed = tr.stacked_errors()
    assert verdict(7, cert.ok and viol == 0,
                   f"certificate clean {cert.ok}, {viol} box violations "
                   f"(max |q~| {e.max():.3g} < {min(L.calX for L in ledgers):.3g}, "
                   f"max |q~'| {ed.max():.3g} < {min(L.calY for L in ledgers):.3g})")


def test_criterion_8_dwell_time(verdict, demo_sc):
    kappa, lam, pd = dwell_time([(1.0, math.e ** 2, math.e ** 2)])
    hand = abs(pd - 2.0) <= 1e-15 and abs(math.log(kappa) - 2.0) <= 1e-15 and lam == 1.0
    dw = certify_scenario(demo_sc).dwell
    reported = dw["verdict"] in ("satisfied", "violated") and (
        (dw["configured"] > dw["required"]) == (dw["verdict"] == "satisfied"))
    assert verdict(8, hand and reported,
                   f"hand case pi_d = {pd!r}; scenario dwell {dw['configured']:.3g} s vs floor "
                   f"{dw['required']:.3g} s -> {dw['verdict']}")


@pytest.mark.parametrize("eps", [0.05, 0.5])
def test_criterion_9_step_halving(verdict, demo_sc, eps):
    gains = GainSet(demo_sc.gains.mu, demo_sc.gains.eta, demo_sc.gains.beta, eps)
    sc = demo_sc.with_(gains=gains, substeps=10)
    a = run(sc).terminal_state()
    b = run(sc.with_(dt=sc.dt / 2)).terminal_state()
    dnorm = abs(np.linalg.norm(a) - np.linalg.norm(b))
    dstate = np.linalg.norm(a - b)
    assert verdict(9, dnorm < 1e-6, f"eps={eps}: terminal norm change {dnorm:.2e} < 1e-6 "
                                    f"(state difference {dstate:.2e})")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
