"""Gain certification for a whole scenario.

Bound constants are estimated from the agent models over an operating box,
the leader trajectory and the initial errors; every A topology is then run
through the designer (optional) and the independent verifier, and the switching
schedule is checked against the dwell-time floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import GainSet
from .dynamics import (SAFETY_FACTOR, BoundConstants, combine_bounds, estimate_bounds,
                       leader_bounds)
from .gains import (DesignInputs, GainLedger, compute_ledger, design_gains_switched, dwell_time,
                    format_certificate, verify_gains)
from .graph import NoSpanningTree, laplacian, solve_gamma
from .simulation import ScenarioConfig

DEFAULT_Q_BOX = (-math.pi, math.pi)
DEFAULT_QDOT_BOX = (-5.0, 5.0)
DEFAULT_SAMPLES = 2000
BOUND_FLOOR = 1e-6  # keeps k_p, k_q, k_a, k_b positive for static leaders / exact starts


def scenario_bounds(sc: ScenarioConfig, seed: int = 0) -> BoundConstants:
    """Stacked bound constants for ``sc``; entries of the ``design`` section override."""
    design = dict(sc.extras.get("design", {}) or {})
    q_box = design.get("q_box", DEFAULT_Q_BOX)
    qdot_box = design.get("qdot_box", DEFAULT_QDOT_BOX)
    samples = int(design.get("samples", DEFAULT_SAMPLES))
    n = sc.n
    root_n = math.sqrt(n)

    per_agent = combine_bounds(estimate_bounds(a.model, q_box, qdot_box, samples=samples, seed=seed)
                               for a in sc.agents)
    zeta = max((a.model.disturbance.bound if a.model.disturbance is not None else 0.0)
               for a in sc.agents)
    k_p, k_q = leader_bounds(sc.leader, n, max(sc.t_end, 1e-9))
    q = np.stack([a.q0 for a in sc.agents])
    qd = np.stack([a.qdot0 for a in sc.agents])
    e0 = np.linalg.norm(q - sc.leader.position(0.0))
    ed0 = np.linalg.norm(qd - sc.leader.velocity(0.0))

    b = per_agent.merged(
        k_g=root_n * per_agent.k_g,
        k_zeta=SAFETY_FACTOR * root_n * zeta,
        k_p=max(k_p, BOUND_FLOOR), k_q=max(k_q, BOUND_FLOOR),
        k_a=max(SAFETY_FACTOR * e0, BOUND_FLOOR), k_b=max(SAFETY_FACTOR * ed0, BOUND_FLOOR),
    )
    over = {k: float(v) for k, v in design.items() if k in b.as_dict()}
    b = b.merged(**over)
    b.validate()
    return b


def topology_inputs(sc: ScenarioConfig, bounds: BoundConstants,
                    seed: int = 0) -> list[tuple[str, DesignInputs]]:
    """(name, DesignInputs) for every A topology; raises NoSpanningTree if one lacks a tree."""
    out = []
    for k, g in enumerate(sc.gA.topologies):
        part = laplacian(g)
        out.append((f"A{k + 1}", DesignInputs(bounds, solve_gamma(part, seed=seed), part, sc.dof)))
    return out


def configured_dwell(sc: ScenarioConfig) -> float:
    """Shortest interval the A schedule holds a topology (inf when it never switches)."""
    times = [0.0] + sc.gA.switch_times()
    if len(times) < 2:
        return float("inf")
    return float(np.min(np.diff(times)))


def scenario_ledgers(sc: ScenarioConfig, gains: Optional[GainSet] = None,
                     bounds: Optional[BoundConstants] = None, seed: int = 0) -> list[GainLedger]:
    """Ledgers of the A topologies evaluated at ``gains`` (default: the scenario's)."""
    bounds = bounds or scenario_bounds(sc, seed)
    gains = gains or sc.gains
    return [compute_ledger(inp, gains) for _, inp in topology_inputs(sc, bounds, seed)]


@dataclass
class Certification:
    gains: GainSet
    designed: bool
    bounds: BoundConstants
    sections: list  # (name, rows, ledger)
    dwell: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.satisfied for _, rows, _ in self.sections for r in rows)

    def violations(self) -> list[str]:
        return [f"{name}:{r.id}" for name, rows, _ in self.sections for r in rows if not r.satisfied]

    def text(self) -> str:
        return format_certificate(self.gains, self.sections, self.dwell)


def certify_scenario(sc: ScenarioConfig, design: bool = False,
                     bounds: Optional[BoundConstants] = None, seed: int = 0) -> Certification:
    """Verify the scenario's gains (or freshly designed ones) on every A topology.

    The dwell verdict is informational; it does not enter ``ok``.
    """
    bounds = bounds or scenario_bounds(sc, seed)
    inputs = topology_inputs(sc, bounds, seed)
    if design:
        gains, ledgers = design_gains_switched(bounds, [(i.gamma, i.part) for _, i in inputs],
                                               sc.dof, sc.gains.epsilon)
    else:
        gains = sc.gains
        ledgers = [compute_ledger(i, gains) for _, i in inputs]
    sections = [(name, verify_gains(gains, inp, omega2=sc.omega2), led)
                for (name, inp), led in zip(inputs, ledgers)]

    dwell = {"configured": configured_dwell(sc)}
    entries = [(L.lam_min_N, L.lam_max_L, L.a3) for L in ledgers]
    if all(min(e) > 0 for e in entries):
        kappa, lam, pi_d = dwell_time(entries)
        dwell.update(kappa=kappa, Lambda=lam, required=pi_d,
                     verdict="satisfied" if dwell["configured"] > pi_d else "violated")
    else:
        dwell["verdict"] = "undefined"
    return Certification(gains, design, bounds, sections, dwell)


__all__ = ["Certification", "NoSpanningTree", "certify_scenario", "configured_dwell",
           "scenario_bounds", "scenario_ledgers", "topology_inputs"]
