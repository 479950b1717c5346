"""Grid test cases, modifications, and DC power-flow coefficient matrices."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ParseError, SingularTopologyError, ValidationError


@dataclass(frozen=True)
class CostSegment:
    """Marginal-price block covering output up to ``to_MW``."""

    to_MW: float
    price_per_MWh: float


@dataclass(frozen=True)
class StartupStep:
    """Start-up cost applying once the unit has been off at least this long."""

    hours_off_at_least: int
    cost: float


@dataclass(frozen=True)
class Bus:
    id: int
    peak_load_MW: float
    load_profile_id: str = "default"


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance_pu: float
    flow_limit_MW: float


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    p_min_MW: float
    p_max_MW: float
    ramp_up_MW_per_h: float
    ramp_down_MW_per_h: float
    min_up_h: int
    min_down_h: int
    cost_curve: tuple
    startup_cost_fn: tuple

    def startup_cost(self, hours_off):
        """Step-table lookup: the cost of the deepest step reached."""
        cost = 0.0
        for step in self.startup_cost_fn:
            if hours_off >= step.hours_off_at_least:
                cost = step.cost
        return cost

    def cost_of(self, p_MW):
        """Piecewise-linear production cost of running at p_MW for one hour."""
        total, prev = 0.0, 0.0
        for seg in self.cost_curve:
            take = min(p_MW, seg.to_MW) - prev
            if take > 0:
                total += take * seg.price_per_MWh
            prev = seg.to_MW
        return total


@dataclass(frozen=True)
class WindGenerator:
    id: str
    bus: int
    capacity_MW: float


@dataclass(frozen=True)
class GridCase:
    name: str
    buses: tuple
    lines: tuple
    dispatchable_generators: tuple
    wind_generators: tuple
    reference_buses: frozenset
    voll: float
    wind_curtail_price: float

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def n_gens(self):
        return len(self.dispatchable_generators)

    @property
    def n_wind(self):
        return len(self.wind_generators)

    def bus_pos(self, bus_id):
        return self._bus_index[bus_id]

    def line_pos(self, line_id):
        return self._line_index[line_id]

    @property
    def _bus_index(self):
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def _line_index(self):
        return {ln.id: i for i, ln in enumerate(self.lines)}

    @property
    def peak_loads(self):
        return np.array([b.peak_load_MW for b in self.buses])

    @property
    def total_peak_load_MW(self):
        return float(self.peak_loads.sum())

    @property
    def wind_capacities(self):
        return np.array([w.capacity_MW for w in self.wind_generators])

    def to_dict(self):
        return {
            "name": self.name,
            "buses": [vars(b) for b in self.buses],
            "lines": [vars(ln) for ln in self.lines],
            "dispatchable_generators": [
                {
                    **{k: v for k, v in vars(g).items() if k not in ("cost_curve", "startup_cost_fn")},
                    "cost_curve": [vars(s) for s in g.cost_curve],
                    "startup_cost_fn": [vars(s) for s in g.startup_cost_fn],
                }
                for g in self.dispatchable_generators
            ],
            "wind_generators": [vars(w) for w in self.wind_generators],
            "reference_buses": sorted(self.reference_buses),
            "prices": {"voll": self.voll, "wind_curtail_price": self.wind_curtail_price},
        }

    def case_hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class Topology:
    """In-service flags per line, aligned with GridCase.lines."""

    line_status: tuple

    @classmethod
    def all_on(cls, case):
        return cls(tuple(True for _ in case.lines))

    def with_lines_out(self, case, line_ids):
        status = list(self.line_status)
        for lid in line_ids:
            status[case.line_pos(lid)] = False
        return Topology(tuple(status))

    def as_array(self):
        return np.array(self.line_status, dtype=bool)


@dataclass(frozen=True)
class DcMatrices:
    b_bus: np.ndarray
    b_f: np.ndarray
    p_bus_shift: np.ndarray
    p_f_shift: np.ndarray
    g_sh: np.ndarray


def _require(cond, msg):
    if not cond:
        raise ValidationError(msg)


def validate_case(case):
    _require(len(case.buses) > 0, "buses: empty")
    ids = [b.id for b in case.buses]
    _require(len(set(ids)) == len(ids), "buses: duplicate id")
    idset = set(ids)
    line_ids = [ln.id for ln in case.lines]
    _require(len(set(line_ids)) == len(line_ids), "lines: duplicate id")
    for i, ln in enumerate(case.lines):
        _require(ln.from_bus in idset, f"lines[{ln.id}].from_bus: bus {ln.from_bus} not defined")
        _require(ln.to_bus in idset, f"lines[{ln.id}].to_bus: bus {ln.to_bus} not defined")
        _require(ln.reactance_pu > 0, f"lines[{ln.id}].reactance_pu: must be > 0")
        _require(ln.flow_limit_MW > 0, f"lines[{ln.id}].flow_limit_MW: must be > 0")
    for g in case.dispatchable_generators:
        _require(g.bus in idset, f"dispatchable_generators[{g.id}].bus: bus {g.bus} not defined")
        _require(g.p_min_MW <= g.p_max_MW, f"dispatchable_generators[{g.id}]: p_min > p_max")
        _require(g.p_min_MW >= 0, f"dispatchable_generators[{g.id}].p_min_MW: negative")
        _require(g.min_up_h >= 1, f"dispatchable_generators[{g.id}].min_up_h: must be >= 1")
        _require(g.min_down_h >= 1, f"dispatchable_generators[{g.id}].min_down_h: must be >= 1")
        _require(len(g.cost_curve) >= 1, f"dispatchable_generators[{g.id}].cost_curve: empty")
        prev_to, prev_price = 0.0, -np.inf
        for seg in g.cost_curve:
            _require(seg.to_MW > prev_to, f"dispatchable_generators[{g.id}].cost_curve: to_MW not increasing")
            _require(seg.price_per_MWh >= prev_price,
                     f"dispatchable_generators[{g.id}].cost_curve: prices must be non-decreasing (convex)")
            prev_to, prev_price = seg.to_MW, seg.price_per_MWh
        _require(abs(prev_to - g.p_max_MW) < 1e-9,
                 f"dispatchable_generators[{g.id}].cost_curve: last segment must end at p_max")
        _require(len(g.startup_cost_fn) >= 1, f"dispatchable_generators[{g.id}].startup_cost_fn: empty")
        prev_h = 0
        for step in g.startup_cost_fn:
            _require(step.hours_off_at_least > prev_h,
                     f"dispatchable_generators[{g.id}].startup_cost_fn: hours_off not increasing")
            prev_h = step.hours_off_at_least
    for w in case.wind_generators:
        _require(w.bus in idset, f"wind_generators[{w.id}].bus: bus {w.bus} not defined")
        _require(w.capacity_MW >= 0, f"wind_generators[{w.id}].capacity_MW: negative")
    _require(len(case.reference_buses) >= 1, "reference_buses: at least one required")
    for rb in case.reference_buses:
        _require(rb in idset, f"reference_buses: bus {rb} not defined")
    return case


def case_from_dict(doc):
    try:
        buses = tuple(Bus(int(b["id"]), float(b["peak_load_MW"]), str(b.get("load_profile_id", "default")))
                      for b in doc["buses"])
        lines = tuple(Line(int(l["id"]), int(l["from_bus"]), int(l["to_bus"]),
                           float(l["reactance_pu"]), float(l["flow_limit_MW"]))
                      for l in doc["lines"])
        gens = tuple(
            Generator(
                str(g["id"]), int(g["bus"]), float(g["p_min_MW"]), float(g["p_max_MW"]),
                float(g["ramp_up_MW_per_h"]), float(g["ramp_down_MW_per_h"]),
                int(g["min_up_h"]), int(g["min_down_h"]),
                tuple(CostSegment(float(s["to_MW"]), float(s["price_per_MWh"])) for s in g["cost_curve"]),
                tuple(StartupStep(int(s["hours_off_at_least"]), float(s["cost"])) for s in g["startup_cost_fn"]),
            )
            for g in doc["dispatchable_generators"]
        )
        wind = tuple(WindGenerator(str(w["id"]), int(w["bus"]), float(w["capacity_MW"]))
                     for w in doc["wind_generators"])
        prices = doc["prices"]
        case = GridCase(
            name=str(doc.get("name", "unnamed")),
            buses=buses,
            lines=lines,
            dispatchable_generators=gens,
            wind_generators=wind,
            reference_buses=frozenset(int(b) for b in doc["reference_buses"]),
            voll=float(prices["voll"]),
            wind_curtail_price=float(prices["wind_curtail_price"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed case document: {exc}") from exc
    return validate_case(case)


def load_case(path):
    """Load and validate a grid case from its JSON-compatible text file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return case_from_dict(doc)


# ---------------------------------------------------------------------------
# modifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Modification:
    kind: str
    args: dict


def load_modifications(path):
    try:
        doc = json.loads(Path(path).read_text())
        return [Modification(str(m["kind"]), dict(m["args"])) for m in doc]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def apply_modifications(case, mods):
    """Return a new case with the modifications applied, in order."""
    buses = list(case.buses)
    lines = list(case.lines)
    idx = {b.id: i for i, b in enumerate(buses)}
    for m in mods:
        if m.kind == "remove_line":
            lid = int(m.args["line_id"])
            keep = [ln for ln in lines if ln.id != lid]
            if len(keep) == len(lines):
                raise ValidationError(f"remove_line: line {lid} not defined")
            lines = keep
        elif m.kind == "move_load":
            src, dst = int(m.args["from_bus"]), int(m.args["to_bus"])
            if src not in idx:
                raise ValidationError(f"move_load: bus {src} not defined")
            if dst not in idx:
                raise ValidationError(f"move_load: bus {dst} not defined")
            moved = buses[idx[src]].peak_load_MW
            buses[idx[dst]] = replace(buses[idx[dst]], peak_load_MW=buses[idx[dst]].peak_load_MW + moved)
            buses[idx[src]] = replace(buses[idx[src]], peak_load_MW=0.0)
        elif m.kind == "scale_load":
            bid = int(m.args["bus"])
            if bid not in idx:
                raise ValidationError(f"scale_load: bus {bid} not defined")
            factor = float(m.args["factor"])
            buses[idx[bid]] = replace(buses[idx[bid]], peak_load_MW=buses[idx[bid]].peak_load_MW * factor)
        else:
            raise ValidationError(f"modification kind {m.kind!r} not supported")
    out = replace(case, buses=tuple(buses), lines=tuple(lines))
    return validate_case(out)


# ---------------------------------------------------------------------------
# DC matrices
# ---------------------------------------------------------------------------


def dc_matrices(case, topology, strict=False):
    """Build the linear DC coefficients from the in-service lines.

    With strict=True, raises SingularTopologyError when a load-carrying bus
    is disconnected from every reference bus.  The default tolerates such
    islands because maintenance outages may legitimately isolate a bus that
    then balances locally (shedding and local generation absorb it).
    """
    nb, nl = case.n_buses, case.n_lines
    if len(topology.line_status) != nl:
        raise ValidationError("topology: length does not match case line count")
    b_bus = np.zeros((nb, nb))
    b_f = np.zeros((nl, nb))
    for l, ln in enumerate(case.lines):
        if not topology.line_status[l]:
            continue
        i, j = case.bus_pos(ln.from_bus), case.bus_pos(ln.to_bus)
        b = 1.0 / ln.reactance_pu
        b_f[l, i] = b
        b_f[l, j] = -b
        b_bus[i, i] += b
        b_bus[j, j] += b
        b_bus[i, j] -= b
        b_bus[j, i] -= b
    if strict:
        comps = components(case, topology)
        ref_pos = {case.bus_pos(r) for r in case.reference_buses}
        for comp in comps:
            if comp & ref_pos:
                continue
            loaded = [case.buses[i].id for i in comp if case.buses[i].peak_load_MW > 0]
            if loaded:
                raise SingularTopologyError(
                    f"buses {loaded} carry load but are disconnected from all reference buses"
                )
    return DcMatrices(
        b_bus=b_bus,
        b_f=b_f,
        p_bus_shift=np.zeros(nb),
        p_f_shift=np.zeros(nl),
        g_sh=np.zeros(nb),
    )


def components(case, topology):
    """Connected components (sets of bus positions) of the in-service graph."""
    nb = case.n_buses
    adj = [[] for _ in range(nb)]
    for l, ln in enumerate(case.lines):
        if topology.line_status[l]:
            i, j = case.bus_pos(ln.from_bus), case.bus_pos(ln.to_bus)
            adj[i].append(j)
            adj[j].append(i)
    seen = [False] * nb
    comps = []
    for s in range(nb):
        if seen[s]:
            continue
        stack, comp = [s], set()
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.add(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(comp)
    return comps


def dc_flows(case, topology, injections_MW, tol_balance=1e-6):
    """Per-line DC flows at fixed nodal injections; None when no balanced flow.

    Each island must balance internally.  Angles are solved per island with
    one pinned bus, so the result is the unique physical flow pattern.
    """
    mats = dc_matrices(case, topology)
    nb = case.n_buses
    theta = np.zeros(nb)
    for comp in components(case, topology):
        members = sorted(comp)
        net = float(sum(injections_MW[i] for i in members))
        if abs(net) > tol_balance:
            return None
        if len(members) == 1:
            continue
        sub = np.ix_(members[1:], members[1:])
        rhs = injections_MW[np.asarray(members[1:], dtype=int)]
        try:
            theta_sub = np.linalg.solve(mats.b_bus[sub], rhs)
        except np.linalg.LinAlgError:
            return None
        for k, i in enumerate(members[1:]):
            theta[i] = theta_sub[k]
    return mats.b_f @ theta + mats.p_f_shift
