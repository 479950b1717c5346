"""Day-ahead unit commitment as a MILP over the DC network.

Commitment binaries couple hours through start indicators, min up/down
inequalities, and hot/cold start-up steps.  Generators that are free to
cycle (zero minimum output, zero start-up cost, unit min up/down) are
committed unconditionally, which is optimal and removes their binaries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NumericalError, ValidationError
from .grid import dc_matrices
from .milp import LpBuilder, MixedIntegerProgram, solve_milp

# Susceptances are 1/x with flows in MW, so angles carry a factor of the
# 100 MVA base against the textbook per-unit convention; +-100*pi is the
# equivalent of the per-unit +-pi angle box and never binds physically.
THETA_MAX = 100.0 * np.pi


@dataclass(frozen=True)
class GenStatus:
    """Commitment state entering the horizon: on/off and for how many hours."""

    on: bool
    hours: int


def default_initial_status(case):
    """Window-start convention: every unit on long enough to be unconstrained."""
    return {g.id: GenStatus(True, 10**6) for g in case.dispatchable_generators}


def chain_initial_status(prev_status, case, commitment):
    """Initial status for the next day from a day's commitment matrix."""
    out = {}
    for gi, g in enumerate(case.dispatchable_generators):
        row = commitment[gi]
        last = bool(row[-1])
        run = 0
        for v in row[::-1]:
            if bool(v) == last:
                run += 1
            else:
                break
        if run == len(row) and prev_status[g.id].on == last:
            run += prev_status[g.id].hours
        out[g.id] = GenStatus(last, run)
    return out


@dataclass
class UcSolution:
    commitment: np.ndarray  # n_gen x H, {0,1}
    dispatch_MW: np.ndarray  # n_gen x H
    wind_curtail_MW: np.ndarray  # n_wind x H
    load_shed_MW: np.ndarray  # n_bus x H
    angles_rad: np.ndarray  # n_bus x H
    cost: float
    day_context: dict

    def to_dict(self):
        return {
            "commitment": self.commitment.astype(int).tolist(),
            "dispatch_MW": self.dispatch_MW.tolist(),
            "wind_curtail_MW": self.wind_curtail_MW.tolist(),
            "load_shed_MW": self.load_shed_MW.tolist(),
            "angles_rad": self.angles_rad.tolist(),
            "cost": self.cost,
            "day_context": self.day_context,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            commitment=np.array(doc["commitment"], dtype=np.int8),
            dispatch_MW=np.array(doc["dispatch_MW"]),
            wind_curtail_MW=np.array(doc["wind_curtail_MW"]),
            load_shed_MW=np.array(doc["load_shed_MW"]),
            angles_rad=np.array(doc["angles_rad"]),
            cost=float(doc["cost"]),
            day_context=dict(doc["day_context"]),
        )


def forecast_ref(forecast):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(forecast.wind).tobytes())
    h.update(np.ascontiguousarray(forecast.load).tobytes())
    return h.hexdigest()[:16]


def is_free_commit(g):
    """Binary-free unit: committing it always is optimal, so no alpha needed."""
    return (
        g.p_min_MW == 0.0
        and g.min_up_h <= 1
        and g.min_down_h <= 1
        and all(s.cost == 0.0 for s in g.startup_cost_fn)
    )


def gen_segments(g):
    """Marginal blocks covering [p_min, p_max], plus the committed base cost."""
    segs = []
    prev = 0.0
    for seg in g.cost_curve:
        lo = max(prev, g.p_min_MW)
        hi = min(seg.to_MW, g.p_max_MW)
        if hi > lo + 1e-12:
            segs.append((hi - lo, seg.price_per_MWh))
        prev = seg.to_MW
    base = g.cost_of(g.p_min_MW)
    return base, segs


def _pre_alpha(st, tau):
    """Commitment at pre-horizon hour tau (< 0) implied by the initial status."""
    if tau >= -st.hours:
        return 1.0 if st.on else 0.0
    return 0.0 if st.on else 1.0


def build_uc(case, topology, forecast, initial_status=None):
    """Assemble the day-ahead commitment MILP.

    Variable count follows H * (2*B + X + S + W + N + N): per hour there are
    B commitment binaries, B start indicators, X extra start-up step
    indicators, S production segments, W curtailment, N shedding, and N
    angle variables (B = binary-committed units, X = units' start-up steps
    beyond the first, S = total marginal blocks over all units).
    """
    if initial_status is None:
        initial_status = default_initial_status(case)
    H = forecast.hours
    if forecast.wind.shape != (case.n_wind, H):
        raise ValidationError("forecast.wind: shape mismatch with case")
    if forecast.load.shape != (case.n_buses, H):
        raise ValidationError("forecast.load: shape mismatch with case")
    if len(topology.line_status) != case.n_lines:
        raise ValidationError("topology: length mismatch with case")

    mats = dc_matrices(case, topology)
    b = LpBuilder()
    gens = case.dispatchable_generators
    binary = [not is_free_commit(g) for g in gens]

    alpha = {}
    start = {}
    coldv = {}
    for gi, g in enumerate(gens):
        if not binary[gi]:
            continue
        st = initial_status[g.id]
        force = {}
        if st.on and st.hours < g.min_up_h:
            for t in range(g.min_up_h - st.hours):
                force[t] = 1.0
        if not st.on and st.hours < g.min_down_h:
            for t in range(g.min_down_h - st.hours):
                force[t] = 0.0
        for t in range(H):
            lo, hi = (force[t], force[t]) if t in force else (0.0, 1.0)
            alpha[gi, t] = b.add_var(f"alpha[{g.id},{t}]", lo, hi, 0.0)
        hot = g.startup_cost_fn[0].cost
        for t in range(H):
            start[gi, t] = b.add_var(f"start[{g.id},{t}]", 0.0, 1.0, hot)
        for si, step in enumerate(g.startup_cost_fn[1:], start=1):
            inc = step.cost - g.startup_cost_fn[si - 1].cost
            for t in range(H):
                coldv[gi, si, t] = b.add_var(f"cold[{g.id},{si},{t}]", 0.0, 1.0, inc)

    pseg = {}
    seg_info = []
    for gi, g in enumerate(gens):
        base, segs = gen_segments(g)
        seg_info.append((base, segs))
        for k, (width, price) in enumerate(segs):
            for t in range(H):
                pseg[gi, k, t] = b.add_var(f"p[{g.id},{k},{t}]", 0.0, width, price)
        if binary[gi]:
            for t in range(H):
                # committed base cost rides on alpha
                b.cost[alpha[gi, t]] += base

    wc = {}
    for wi, w in enumerate(case.wind_generators):
        for t in range(H):
            wc[wi, t] = b.add_var(f"wc[{w.id},{t}]", 0.0, float(forecast.wind[wi, t]),
                                  case.wind_curtail_price)
    ls = {}
    for bi, bus in enumerate(case.buses):
        for t in range(H):
            ls[bi, t] = b.add_var(f"ls[{bus.id},{t}]", 0.0, float(forecast.load[bi, t]),
                                  case.voll)
    th = {}
    ref = {case.bus_pos(r) for r in case.reference_buses}
    for bi, bus in enumerate(case.buses):
        lo, hi = (0.0, 0.0) if bi in ref else (-THETA_MAX, THETA_MAX)
        for t in range(H):
            th[bi, t] = b.add_var(f"th[{bus.id},{t}]", lo, hi, 0.0)

    gens_at = [[] for _ in case.buses]
    for gi, g in enumerate(gens):
        gens_at[case.bus_pos(g.bus)].append(gi)
    wind_at = [[] for _ in case.buses]
    for wi, w in enumerate(case.wind_generators):
        wind_at[case.bus_pos(w.bus)].append(wi)

    for t in range(H):
        # nodal balance: B_bus theta = net injection
        for bi in range(case.n_buses):
            pairs = []
            for bj in np.nonzero(mats.b_bus[bi])[0]:
                pairs.append((th[int(bj), t], mats.b_bus[bi, int(bj)]))
            for gi in gens_at[bi]:
                if binary[gi]:
                    pairs.append((alpha[gi, t], -gens[gi].p_min_MW))
                for k in range(len(seg_info[gi][1])):
                    pairs.append((pseg[gi, k, t], -1.0))
            for wi in wind_at[bi]:
                pairs.append((wc[wi, t], 1.0))
            pairs.append((ls[bi, t], -1.0))
            rhs = (float(sum(forecast.wind[wi, t] for wi in wind_at[bi]))
                   - float(forecast.load[bi, t]) - mats.g_sh[bi] - mats.p_bus_shift[bi])
            b.add_constraint(pairs, "==", rhs)

        # line flow limits (one ranged row per in-service line)
        for l, ln in enumerate(case.lines):
            if not topology.line_status[l]:
                continue
            i, j = case.bus_pos(ln.from_bus), case.bus_pos(ln.to_bus)
            coef = 1.0 / ln.reactance_pu
            b.add_range([(th[i, t], coef), (th[j, t], -coef)],
                        -ln.flow_limit_MW - mats.p_f_shift[l],
                        ln.flow_limit_MW - mats.p_f_shift[l])

        for gi, g in enumerate(gens):
            if not binary[gi]:
                continue
            st = initial_status[g.id]
            # segment output only when committed
            for k, (width, _) in enumerate(seg_info[gi][1]):
                b.add_constraint([(pseg[gi, k, t], 1.0), (alpha[gi, t], -width)], "<=", 0.0)
            # start indicator: start >= alpha_t - alpha_{t-1}
            if t == 0:
                b.add_constraint([(alpha[gi, t], 1.0), (start[gi, t], -1.0)],
                                 "<=", _pre_alpha(st, -1))
            else:
                b.add_constraint([(alpha[gi, t], 1.0), (alpha[gi, t - 1], -1.0),
                                  (start[gi, t], -1.0)], "<=", 0.0)
            # start-up depth steps: cold_s >= start_t - sum(alpha over lookback)
            for si, step in enumerate(g.startup_cost_fn[1:], start=1):
                h_s = step.hours_off_at_least
                pairs = [(start[gi, t], 1.0), (coldv[gi, si, t], -1.0)]
                const = 0.0
                for tau in range(t - h_s, t):
                    if tau >= 0:
                        pairs.append((alpha[gi, tau], -1.0))
                    else:
                        const += _pre_alpha(st, tau)
                b.add_constraint(pairs, "<=", const)
            # minimum up time: starts within the window keep the unit on
            lo_t = max(0, t - g.min_up_h + 1)
            pairs = [(start[gi, tau], 1.0) for tau in range(lo_t, t + 1)]
            pairs.append((alpha[gi, t], -1.0))
            b.add_constraint(pairs, "<=", 0.0)
            # minimum down time: no restart within t_down of a shutdown
            lo_t = max(0, t - g.min_down_h + 1)
            pairs = [(start[gi, tau], 1.0) for tau in range(lo_t, t + 1)]
            tau0 = t - g.min_down_h
            if tau0 >= 0:
                pairs.append((alpha[gi, tau0], 1.0))
                b.add_constraint(pairs, "<=", 1.0)
            else:
                b.add_constraint(pairs, "<=", 1.0 - _pre_alpha(st, tau0))

    lp = b.build()
    return MixedIntegerProgram(lp, tuple(sorted(alpha.values())))


def _layout_counts(case, H):
    gens = case.dispatchable_generators
    nbin = sum(0 if is_free_commit(g) else 1 for g in gens)
    nxtra = sum(0 if is_free_commit(g) else len(g.startup_cost_fn) - 1 for g in gens)
    nseg = sum(len(gen_segments(g)[1]) for g in gens)
    return nbin, nxtra, nseg


def uc_variable_count(case, H):
    """The documented counting formula for build_uc's variable total."""
    nbin, nxtra, nseg = _layout_counts(case, H)
    return H * (2 * nbin + nxtra + nseg + case.n_wind + 2 * case.n_buses)


def _extract(case, forecast, mip, sol, initial_status, topology):
    H = forecast.hours
    gens = case.dispatchable_generators
    names = mip.lp.names
    pos = {nm: j for j, nm in enumerate(names)}
    x = sol.values

    commitment = np.ones((case.n_gens, H), dtype=np.int8)
    dispatch = np.zeros((case.n_gens, H))
    for gi, g in enumerate(gens):
        base, segs = gen_segments(g)
        free = is_free_commit(g)
        for t in range(H):
            tot = 0.0
            for k in range(len(segs)):
                tot += x[pos[f"p[{g.id},{k},{t}]"]]
            if free:
                dispatch[gi, t] = tot
            else:
                a = round(x[pos[f"alpha[{g.id},{t}]"]])
                commitment[gi, t] = a
                dispatch[gi, t] = a * g.p_min_MW + tot

    curt = np.zeros((case.n_wind, H))
    for wi, w in enumerate(case.wind_generators):
        for t in range(H):
            curt[wi, t] = x[pos[f"wc[{w.id},{t}]"]]
    shed = np.zeros((case.n_buses, H))
    angles = np.zeros((case.n_buses, H))
    for bi, bus in enumerate(case.buses):
        for t in range(H):
            shed[bi, t] = x[pos[f"ls[{bus.id},{t}]"]]
            angles[bi, t] = x[pos[f"th[{bus.id},{t}]"]]

    return UcSolution(
        commitment=commitment,
        dispatch_MW=dispatch,
        wind_curtail_MW=curt,
        load_shed_MW=shed,
        angles_rad=angles,
        cost=float(sol.objective),
        day_context={"topology": list(topology.line_status), "forecast": forecast_ref(forecast)},
    )


def uc_cost_of(case, forecast, sol, initial_status=None):
    """Recompute the day-ahead objective from a solution's own variables."""
    if initial_status is None:
        initial_status = default_initial_status(case)
    H = forecast.hours
    total = 0.0
    for gi, g in enumerate(case.dispatchable_generators):
        st = initial_status[g.id]
        off_run = 0 if st.on else st.hours
        for t in range(H):
            on = bool(sol.commitment[gi, t])
            if on:
                total += g.cost_of(sol.dispatch_MW[gi, t])
                prev_on = bool(sol.commitment[gi, t - 1]) if t > 0 else st.on
                if not prev_on:
                    total += g.startup_cost(off_run)
                off_run = 0
            else:
                off_run += 1
    total += float(sol.wind_curtail_MW.sum()) * case.wind_curtail_price
    total += float(sol.load_shed_MW.sum()) * case.voll
    return total


def verify_uc_solution(case, topology, forecast, sol, initial_status=None, tol=1e-6):
    """Independent feasibility pass rebuilt from the case, not the MILP."""
    if initial_status is None:
        initial_status = default_initial_status(case)
    H = forecast.hours
    bad = []
    mats = dc_matrices(case, topology)
    gens = case.dispatchable_generators

    for gi, g in enumerate(gens):
        for t in range(H):
            on = sol.commitment[gi, t]
            p = sol.dispatch_MW[gi, t]
            if on not in (0, 1):
                bad.append(f"{g.id}@{t}: non-binary commitment {on}")
            if not on and abs(p) > tol:
                bad.append(f"{g.id}@{t}: off but dispatching {p}")
            if on and not (g.p_min_MW - tol <= p <= g.p_max_MW + tol):
                bad.append(f"{g.id}@{t}: dispatch {p} outside [{g.p_min_MW}, {g.p_max_MW}]")
        st = initial_status[g.id]
        runs = _runs_with_initial(sol.commitment[gi], st)
        for status, length, closed in runs:
            if not closed:
                continue  # runs cut by the horizon edge are unconstrained
            if status and length < g.min_up_h:
                bad.append(f"{g.id}: up-run of {length}h violates min up {g.min_up_h}")
            if not status and length < g.min_down_h:
                bad.append(f"{g.id}: down-run of {length}h violates min down {g.min_down_h}")

    if np.any(sol.wind_curtail_MW < -tol) or np.any(sol.wind_curtail_MW > forecast.wind + tol):
        bad.append("curtailment outside [0, forecast wind]")
    if np.any(sol.load_shed_MW < -tol) or np.any(sol.load_shed_MW > forecast.load + tol):
        bad.append("shedding outside [0, forecast load]")

    inj = np.zeros((case.n_buses, H))
    for gi, g in enumerate(gens):
        inj[case.bus_pos(g.bus)] += sol.dispatch_MW[gi]
    for wi, w in enumerate(case.wind_generators):
        inj[case.bus_pos(w.bus)] += forecast.wind[wi] - sol.wind_curtail_MW[wi]
    inj -= forecast.load - sol.load_shed_MW
    resid = mats.b_bus @ sol.angles_rad + mats.p_bus_shift[:, None] + mats.g_sh[:, None] - inj
    worst = float(np.max(np.abs(resid)))
    if worst > tol:
        bad.append(f"nodal balance residual {worst:.2e} exceeds {tol}")

    flows = mats.b_f @ sol.angles_rad + mats.p_f_shift[:, None]
    for l, ln in enumerate(case.lines):
        if topology.line_status[l] and np.any(np.abs(flows[l]) > ln.flow_limit_MW + tol):
            bad.append(f"line {ln.id}: flow exceeds limit")

    want = uc_cost_of(case, forecast, sol, initial_status)
    if abs(want - sol.cost) > 1e-6 * max(1.0, abs(want)):
        bad.append(f"cost mismatch: stored {sol.cost} vs recomputed {want}")
    return bad


def _runs_with_initial(row, st):
    """(status, length, closed) runs; the first run extends the initial state."""
    runs = []
    cur = bool(row[0])
    length = 1
    for v in row[1:]:
        if bool(v) == cur:
            length += 1
        else:
            runs.append([cur, length, True])
            cur = bool(v)
            length = 1
    runs.append([cur, length, False])  # cut by end of horizon
    if runs and runs[0][0] == st.on:
        runs[0][1] += st.hours
    return [tuple(r) for r in runs]


def solve_uc(case, topology, forecast, initial_status=None, gap_tol=1e-6):
    """Solve the day-ahead problem and return a verified UcSolution."""
    if initial_status is None:
        initial_status = default_initial_status(case)
    mip = build_uc(case, topology, forecast, initial_status)
    sol = solve_milp(mip, gap_tol=gap_tol)
    if sol.status == "infeasible":
        # unreachable for valid cases: shedding can absorb the full load
        raise InfeasibleError("unit commitment infeasible")
    if sol.status != "optimal":
        raise NumericalError(f"unit commitment solve ended with status {sol.status}")
    out = _extract(case, forecast, mip, sol, initial_status, topology)
    problems = verify_uc_solution(case, topology, forecast, out, initial_status)
    if problems:
        raise NumericalError("unit commitment failed re-verification: " + "; ".join(problems[:4]))
    return out
