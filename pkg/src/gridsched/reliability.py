"""N-1 screening, the per-state reliability fraction, and empirical
chance-constraint evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grid import dc_flows


@dataclass(frozen=True)
class Contingency:
    line_id: int


@dataclass(frozen=True)
class ChanceThresholds:
    r_min: float = 0.8
    shed_max_frac: float = 0.005  # of overall load capacity
    alpha_r: float = 0.05
    alpha_shed: float = 0.05

    def validate(self):
        for nm in ("r_min", "shed_max_frac", "alpha_r", "alpha_shed"):
            v = getattr(self, nm)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"thresholds.{nm}: {v} outside [0, 1]")
        return self


@dataclass
class StateMetrics:
    reliability: float
    shed_MW: float
    operating_cost: float


@dataclass
class ScenarioStats:
    """Per-scenario averages entering the chance constraints."""

    mean_reliability: float
    mean_shed_MW: float
    mean_shed_frac: float
    total_cost: float


@dataclass
class ScheduleMetrics:
    per_scenario: list
    expected_cost: float
    p_reliability_ok: float
    p_shed_ok: float
    reliability_satisfied: bool = False
    shed_satisfied: bool = False
    per_month_cost: list = field(default_factory=list)
    per_month_reliability: list = field(default_factory=list)
    per_month_shed_MW: list = field(default_factory=list)

    @property
    def mean_reliability(self):
        return float(np.mean([s.mean_reliability for s in self.per_scenario]))

    @property
    def mean_shed_frac(self):
        return float(np.mean([s.mean_shed_frac for s in self.per_scenario]))


def contingency_list(case, topology):
    """One single-line contingency per in-service line, ordered by line id."""
    out = [Contingency(ln.id) for l, ln in enumerate(case.lines) if topology.line_status[l]]
    return sorted(out, key=lambda c: c.line_id)


class DcFeasibilityChecker:
    """Post-contingency screening on the DC model at frozen injections.

    The flow pattern at fixed injections is unique, so feasibility is a
    linear solve plus limit checks; a contingency that leaves an island
    unbalanced (for example islanded load) has no balanced flow and counts
    infeasible.  Swap in an AC power-flow checker through the same call
    signature for full fidelity.
    """

    def __init__(self, tol_MW=1e-6):
        self.tol_MW = tol_MW

    def check(self, case, topology, injections_MW):
        flows = dc_flows(case, topology, injections_MW, tol_balance=max(self.tol_MW, 1e-4))
        if flows is None:
            return False
        for l, ln in enumerate(case.lines):
            if topology.line_status[l] and abs(flows[l]) > ln.flow_limit_MW + 1e-6:
                return False
        return True


def state_injections(case, state, decision):
    """Net nodal injections of the realized operating point."""
    inj = np.zeros(case.n_buses)
    for gi, g in enumerate(case.dispatchable_generators):
        inj[case.bus_pos(g.bus)] += decision.dispatch_MW[gi]
    for wi, w in enumerate(case.wind_generators):
        inj[case.bus_pos(w.bus)] += state.wind[wi] - decision.wind_curtail_MW[wi]
    inj -= state.load - decision.load_shed_MW
    return inj


def state_reliability(case, topology, state, decision, checker=None):
    """Fraction of single-line contingencies the operating point survives."""
    if checker is None:
        checker = DcFeasibilityChecker()
    contingencies = contingency_list(case, topology)
    if not contingencies:
        return 1.0
    inj = state_injections(case, state, decision)
    ok = 0
    for c in contingencies:
        post = topology.with_lines_out(case, [c.line_id])
        if checker.check(case, post, inj):
            ok += 1
    return ok / len(contingencies)


def evaluate_chance(per_scenario, thr, total_load_capacity_MW):
    """Empirical chance-constraint evaluation over scenario statistics.

    p_r is the fraction of scenarios whose mean reliability clears r_min;
    p_ls the fraction whose mean shedding stays below the allowed share of
    overall load capacity.  Satisfaction compares each against 1 - alpha.
    """
    if not per_scenario:
        raise ValidationError("evaluate_chance: needs at least one scenario")
    thr.validate()
    shed_cap = thr.shed_max_frac * total_load_capacity_MW
    p_r = float(np.mean([1.0 if s.mean_reliability >= thr.r_min else 0.0 for s in per_scenario]))
    p_ls = float(np.mean([1.0 if s.mean_shed_MW <= shed_cap else 0.0 for s in per_scenario]))
    return {
        "p_r": p_r,
        "p_ls": p_ls,
        "satisfied": (p_r >= 1.0 - thr.alpha_r, p_ls >= 1.0 - thr.alpha_shed),
    }
