"""Hourly real-time redispatch around the day-ahead baseline.

Commitment is frozen from the day-ahead solution; the LP re-dispatches
committed units at a symmetric cost on the production-cost gap (linearized
with an up/down deviation pair per generator segment), curtails wind, and
sheds load under the DC network with realized wind and demand.  Hours chain
through ramp limits; hour zero of a window anchors to the baseline dispatch
of that hour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NumericalError, ValidationError
from .grid import dc_matrices
from .milp import LpBuilder, MixedIntegerProgram, solve_lp, solve_milp
from .uc import THETA_MAX, gen_segments


@dataclass
class RtDecision:
    dispatch_MW: np.ndarray  # n_gen
    redispatch_cost: float
    wind_curtail_MW: np.ndarray  # n_wind
    load_shed_MW: np.ndarray  # n_bus
    angles_rad: np.ndarray  # n_bus
    total_cost: float
    curtail_cost: float = 0.0

    @property
    def shed_total_MW(self):
        return float(self.load_shed_MW.sum())


def rt_operating_cost(decision):
    """Operating-cost summand of the mid-term objective.

    Equals the decision total minus the shedding penalty (shedding is
    constrained separately, so it is not double-counted as a cost).
    """
    return decision.redispatch_cost + decision.curtail_cost


def baseline_segment_fill(g, committed, dispatch):
    """Merit-order split of a baseline dispatch across the marginal blocks."""
    _, segs = gen_segments(g)
    above = max(0.0, dispatch - g.p_min_MW) if committed else 0.0
    fills = []
    for width, _ in segs:
        take = min(above, width)
        fills.append(take)
        above -= take
    return fills


def solve_rt(case, topology, state, baseline, hour, prev=None,
             allow_emergency_commit=False):
    """One hour of real-time operation; returns the redispatch decision.

    ``state`` is the realized HourlyRealization, ``baseline`` the day-ahead
    UcSolution covering this hour, ``prev`` the previous hour's decision
    inside the window (None at the window start; consecutive calls within a
    window must step one hour at a time).
    """
    H = baseline.commitment.shape[1]
    if not 0 <= hour < H:
        raise ValidationError(f"hour {hour} outside the baseline horizon 0..{H - 1}")
    prev_dispatch = prev.dispatch_MW if prev is not None else baseline.dispatch_MW[:, hour]

    mats = dc_matrices(case, topology)
    gens = case.dispatchable_generators
    b = LpBuilder()

    emergency = {}
    pseg = {}
    dev = {}
    seg_info = []
    for gi, g in enumerate(gens):
        base, segs = gen_segments(g)
        seg_info.append((base, segs))
        committed = bool(baseline.commitment[gi, hour])
        fills = baseline_segment_fill(g, committed, baseline.dispatch_MW[gi, hour])
        startable = (allow_emergency_commit and not committed
                     and g.min_up_h <= 1 and g.min_down_h <= 1)
        if startable:
            emergency[gi] = b.add_var(f"emerg[{g.id}]", 0.0, 1.0, g.startup_cost(10**6))
        for k, (width, price) in enumerate(segs):
            hi = width if (committed or startable) else 0.0
            pseg[gi, k] = b.add_var(f"p[{g.id},{k}]", 0.0, hi, 0.0)
            up = b.add_var(f"dup[{g.id},{k}]", 0.0, np.inf, price)
            dn = b.add_var(f"ddn[{g.id},{k}]", 0.0, np.inf, price)
            dev[gi, k] = (up, dn)
            # p - p_baseline = up - dn  (cost gap priced symmetrically)
            b.add_constraint([(pseg[gi, k], 1.0), (up, -1.0), (dn, 1.0)], "==", fills[k])
            if startable:
                b.add_constraint([(pseg[gi, k], 1.0), (emergency[gi], -width)], "<=", 0.0)

    wc = {}
    for wi, w in enumerate(case.wind_generators):
        wc[wi] = b.add_var(f"wc[{w.id}]", 0.0, float(state.wind[wi]), case.wind_curtail_price)
    ls = {}
    for bi, bus in enumerate(case.buses):
        ls[bi] = b.add_var(f"ls[{bus.id}]", 0.0, float(state.load[bi]), case.voll)
    th = {}
    ref = {case.bus_pos(r) for r in case.reference_buses}
    for bi, bus in enumerate(case.buses):
        lo, hi = (0.0, 0.0) if bi in ref else (-THETA_MAX, THETA_MAX)
        th[bi] = b.add_var(f"th[{bus.id}]", lo, hi, 0.0)

    gens_at = [[] for _ in case.buses]
    for gi, g in enumerate(gens):
        gens_at[case.bus_pos(g.bus)].append(gi)
    wind_at = [[] for _ in case.buses]
    for wi, w in enumerate(case.wind_generators):
        wind_at[case.bus_pos(w.bus)].append(wi)

    for bi in range(case.n_buses):
        pairs = []
        for bj in np.nonzero(mats.b_bus[bi])[0]:
            pairs.append((th[int(bj)], mats.b_bus[bi, int(bj)]))
        rhs = (float(sum(state.wind[wi] for wi in wind_at[bi]))
               - float(state.load[bi]) - mats.g_sh[bi] - mats.p_bus_shift[bi])
        for gi in gens_at[bi]:
            if baseline.commitment[gi, hour]:
                rhs += gens[gi].p_min_MW  # committed base output supplies the bus
            elif gi in emergency:
                pairs.append((emergency[gi], -gens[gi].p_min_MW))
            for k in range(len(seg_info[gi][1])):
                pairs.append((pseg[gi, k], -1.0))
        for wi in wind_at[bi]:
            pairs.append((wc[wi], 1.0))
        pairs.append((ls[bi], -1.0))
        b.add_constraint(pairs, "==", rhs)

    for l, ln in enumerate(case.lines):
        if not topology.line_status[l]:
            continue
        i, j = case.bus_pos(ln.from_bus), case.bus_pos(ln.to_bus)
        coef = 1.0 / ln.reactance_pu
        b.add_range([(th[i], coef), (th[j], -coef)],
                    -ln.flow_limit_MW - mats.p_f_shift[l],
                    ln.flow_limit_MW - mats.p_f_shift[l])

    # ramp coupling; start-up/shut-down transition hours are exempt
    for gi, g in enumerate(gens):
        committed = bool(baseline.commitment[gi, hour])
        if not committed:
            continue
        if prev is not None and hour > 0 and not baseline.commitment[gi, hour - 1]:
            continue  # unit starts this hour per the day-ahead plan
        width_tot = sum(w for w, _ in seg_info[gi][1])
        lo = max(0.0, prev_dispatch[gi] - g.ramp_down_MW_per_h - g.p_min_MW)
        hi = prev_dispatch[gi] + g.ramp_up_MW_per_h - g.p_min_MW
        if lo <= 0.0 and hi >= width_tot:
            continue  # never binds
        pairs = [(pseg[gi, k], 1.0) for k in range(len(seg_info[gi][1]))]
        b.add_range(pairs, lo, min(hi, width_tot))

    lp = b.build()
    if emergency:
        sol = solve_milp(MixedIntegerProgram(lp, tuple(sorted(emergency.values()))))
    else:
        sol = solve_lp(lp)
    if sol.status == "infeasible":
        raise InfeasibleError("real-time redispatch infeasible")  # unreachable: shedding absorbs
    if sol.status != "optimal":
        raise NumericalError(f"real-time solve ended with status {sol.status}")

    x = sol.values
    dispatch = np.zeros(case.n_gens)
    redisp = 0.0
    for gi, g in enumerate(gens):
        committed = bool(baseline.commitment[gi, hour])
        started = gi in emergency and x[emergency[gi]] > 0.5
        tot = sum(x[pseg[gi, k]] for k in range(len(seg_info[gi][1])))
        if committed or started:
            dispatch[gi] = g.p_min_MW + tot
        for k, (_, price) in enumerate(seg_info[gi][1]):
            up, dn = dev[gi, k]
            redisp += price * (x[up] + x[dn])
        if started:
            redisp += g.startup_cost(10**6)

    curtail = np.array([x[wc[wi]] for wi in range(case.n_wind)])
    shed = np.array([x[ls[bi]] for bi in range(case.n_buses)])
    angles = np.array([x[th[bi]] for bi in range(case.n_buses)])
    curtail_cost = float(curtail.sum()) * case.wind_curtail_price
    return RtDecision(
        dispatch_MW=dispatch,
        redispatch_cost=float(redisp),
        wind_curtail_MW=curtail,
        load_shed_MW=shed,
        angles_rad=angles,
        total_cost=float(sol.objective),
        curtail_cost=curtail_cost,
    )


def verify_rt_decision(case, topology, state, baseline, hour, decision, prev=None, tol=1e-6):
    """Independent checks: commitment respect, ramps, balance, flows."""
    bad = []
    gens = case.dispatchable_generators
    anchor = prev.dispatch_MW if prev is not None else baseline.dispatch_MW[:, hour]
    for gi, g in enumerate(gens):
        p = decision.dispatch_MW[gi]
        if not baseline.commitment[gi, hour] and abs(p) > tol:
            bad.append(f"{g.id}: dispatch while uncommitted")
        if baseline.commitment[gi, hour] and not (g.p_min_MW - tol <= p <= g.p_max_MW + tol):
            bad.append(f"{g.id}: dispatch {p} outside limits")
        if prev is not None and hour > 0 and not baseline.commitment[gi, hour - 1]:
            continue  # transition hour, ramp exempt
        if not baseline.commitment[gi, hour]:
            continue
        if p - anchor[gi] > g.ramp_up_MW_per_h + tol:
            bad.append(f"{g.id}: ramp-up violated")
        if anchor[gi] - p > g.ramp_down_MW_per_h + tol:
            bad.append(f"{g.id}: ramp-down violated")
    if np.any(decision.wind_curtail_MW < -tol) or np.any(decision.wind_curtail_MW > state.wind + tol):
        bad.append("curtailment outside [0, realized wind]")
    if np.any(decision.load_shed_MW < -tol) or np.any(decision.load_shed_MW > state.load + tol):
        bad.append("shedding outside [0, realized load]")

    mats = dc_matrices(case, topology)
    inj = np.zeros(case.n_buses)
    for gi, g in enumerate(gens):
        inj[case.bus_pos(g.bus)] += decision.dispatch_MW[gi]
    for wi, w in enumerate(case.wind_generators):
        inj[case.bus_pos(w.bus)] += state.wind[wi] - decision.wind_curtail_MW[wi]
    inj -= state.load - decision.load_shed_MW
    resid = mats.b_bus @ decision.angles_rad + mats.p_bus_shift + mats.g_sh - inj
    if np.max(np.abs(resid)) > tol:
        bad.append(f"nodal balance residual {np.max(np.abs(resid)):.2e}")
    flows = mats.b_f @ decision.angles_rad + mats.p_f_shift
    for l, ln in enumerate(case.lines):
        if topology.line_status[l] and abs(flows[l]) > ln.flow_limit_MW + tol:
            bad.append(f"line {ln.id}: post-decision overload")
    return bad
