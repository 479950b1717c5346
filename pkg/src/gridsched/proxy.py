"""Nearest-neighbor proxy for the day-ahead commitment problem.

A dataset of solved instances covers the whole outage-topology set; a new
instance is answered by retrieving the stored solution with the closest
forecast conditions inside the exact same topology bucket.  Retrieval never
crosses buckets, so commitment decisions always come from the right network.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, MissingTopologyError, ParseError, ValidationError
from .grid import Topology
from .reliability import state_reliability
from .rt import rt_operating_cost, solve_rt
from .stochastic import (
    ProcessParams,
    SeasonalFactor,
    realization_at,
    sample_day_ahead,
    seasonal_step,
    step_hourly,
)
from .uc import UcSolution, solve_uc

KEY_LIMIT_BITS = 20


@dataclass(frozen=True)
class OutageKeyMap:
    """Maps topologies over the outage-candidate lines to bucket keys.

    Flat mode: a bitmask over candidate_lines (sorted by line id), bit set
    when the line is on outage.  Zonal mode adds zone groups that are never
    simultaneously active (exclusive month allocations), shrinking the key
    set from 2^(sum of zone lines + shared) to zones * 2^(zone + shared).
    """

    candidate_lines: tuple
    zones: tuple = ()  # tuple of line-id tuples; empty means flat
    shared_lines: tuple = ()

    def validate(self):
        if self.zones:
            zoned = [lid for z in self.zones for lid in z]
            if set(zoned) & set(self.shared_lines):
                raise ValidationError("keymap: a line cannot be both zoned and shared")
            if set(zoned) | set(self.shared_lines) != set(self.candidate_lines):
                raise ValidationError("keymap: zones plus shared must cover candidate_lines")
            widest = max(len(z) for z in self.zones) + len(self.shared_lines)
        else:
            widest = len(self.candidate_lines)
        if widest > KEY_LIMIT_BITS:
            raise CapacityError(f"keymap: {widest} candidate bits exceed limit {KEY_LIMIT_BITS}")
        return self

    def _mask(self, case, topology, lines):
        m = 0
        for i, lid in enumerate(sorted(lines)):
            if not topology.line_status[case.line_pos(lid)]:
                m |= 1 << i
        return m

    def key_of(self, case, topology):
        if not self.zones:
            return self._mask(case, topology, self.candidate_lines)
        shared = self._mask(case, topology, self.shared_lines)
        active, zmask = -1, 0
        for zi, z in enumerate(self.zones):
            m = self._mask(case, topology, z)
            if m:
                if active >= 0:
                    raise ValidationError("keymap: two zones active at once")
                active, zmask = zi, m
        return (active, zmask, shared)

    def all_keys(self):
        self.validate()
        if not self.zones:
            return list(range(2 ** len(self.candidate_lines)))
        keys = []
        for s in range(2 ** len(self.shared_lines)):
            keys.append((-1, 0, s))
            for zi, z in enumerate(self.zones):
                for m in range(1, 2 ** len(z)):
                    keys.append((zi, m, s))
        return keys

    def topology_for(self, case, key):
        """A topology realizing the key (unlisted lines in service)."""
        out = []
        if not self.zones:
            for i, lid in enumerate(sorted(self.candidate_lines)):
                if key >> i & 1:
                    out.append(lid)
        else:
            zi, zmask, smask = key
            if zi >= 0:
                for i, lid in enumerate(sorted(self.zones[zi])):
                    if zmask >> i & 1:
                        out.append(lid)
            for i, lid in enumerate(sorted(self.shared_lines)):
                if smask >> i & 1:
                    out.append(lid)
        return Topology.all_on(case).with_lines_out(case, out)

    def to_dict(self):
        return {
            "candidate_lines": list(self.candidate_lines),
            "zones": [list(z) for z in self.zones],
            "shared_lines": list(self.shared_lines),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            tuple(doc["candidate_lines"]),
            tuple(tuple(z) for z in doc.get("zones", [])),
            tuple(doc.get("shared_lines", [])),
        )


@dataclass(frozen=True)
class UcQuery:
    topology_key: object
    wind_forecast: np.ndarray
    load_forecast: np.ndarray
    month: int
    features: np.ndarray = None


def make_query(case, topology_key, wind_forecast, load_forecast, month, per_element=False):
    """Build a query with its normalized similarity features attached.

    Default features are system-level hourly wind and load profiles, each
    scaled by installed wind capacity and overall peak load; per_element
    switches to per-generator / per-bus features for ablation runs.
    """
    wind = np.atleast_2d(np.asarray(wind_forecast, dtype=float))
    load = np.atleast_2d(np.asarray(load_forecast, dtype=float))
    wcap = max(case.wind_capacities.sum(), 1e-9)
    pcap = max(case.total_peak_load_MW, 1e-9)
    if per_element:
        caps = np.maximum(case.wind_capacities[:, None], 1e-9)
        peaks = np.maximum(case.peak_loads[:, None], 1e-9)
        feats = np.concatenate([(wind / caps).ravel(), (load / peaks).ravel()])
    else:
        feats = np.concatenate([wind.sum(axis=0) / wcap, load.sum(axis=0) / pcap])
    return UcQuery(topology_key, wind, load, int(month), feats)


def distance(a, b):
    """Euclidean distance between two queries' normalized profile features."""
    if a.features.shape != b.features.shape:
        raise ValidationError("distance: feature dimensions differ")
    return float(np.linalg.norm(a.features - b.features))


@dataclass
class ProxyRecord:
    query: UcQuery
    solution: UcSolution


@dataclass
class ProxyDataset:
    case_hash: str
    keymap: OutageKeyMap
    process: ProcessParams
    min_bucket: int
    records: list = field(default_factory=list)
    buckets: dict = field(default_factory=dict)

    def add(self, record):
        self.buckets.setdefault(_hashable(record.query.topology_key), []).append(len(self.records))
        self.records.append(record)

    def bucket_sizes(self):
        return {k: len(v) for k, v in self.buckets.items()}

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps({
                "format": "gridsched-proxy-v1",
                "case_hash": self.case_hash,
                "keymap": self.keymap.to_dict(),
                "process": self.process.to_dict(),
                "min_bucket": self.min_bucket,
                "n_records": len(self.records),
            }) + "\n")
            for rec in self.records:
                fh.write(json.dumps({
                    "key": rec.query.topology_key if isinstance(rec.query.topology_key, int)
                    else list(rec.query.topology_key),
                    "month": rec.query.month,
                    "wind": rec.query.wind_forecast.tolist(),
                    "load": rec.query.load_forecast.tolist(),
                    "solution": rec.solution.to_dict(),
                }) + "\n")

    @classmethod
    def load(cls, path, case):
        with open(path) as fh:
            try:
                header = json.loads(fh.readline())
                if header.get("format") != "gridsched-proxy-v1":
                    raise ParseError(f"{path}: not a proxy dataset")
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}") from exc
            if header["case_hash"] != case.case_hash():
                raise ValidationError(
                    f"{path}: dataset built for case {header['case_hash']}, "
                    f"got {case.case_hash()}"
                )
            ds = cls(
                case_hash=header["case_hash"],
                keymap=OutageKeyMap.from_dict(header["keymap"]),
                process=ProcessParams.from_dict(header["process"]),
                min_bucket=int(header["min_bucket"]),
            )
            for line in fh:
                doc = json.loads(line)
                key = doc["key"] if isinstance(doc["key"], int) else tuple(doc["key"])
                q = make_query(case, key, np.array(doc["wind"]), np.array(doc["load"]),
                               doc["month"])
                ds.add(ProxyRecord(q, UcSolution.from_dict(doc["solution"])))
        return ds


def _hashable(key):
    return key if isinstance(key, int) else tuple(key)


def _sample_seasonal(process, month, rng):
    prev_month = 12 if month == 1 else month - 1
    prev = SeasonalFactor(process.monthly_wind_profile[prev_month - 1],
                          process.monthly_load_profile[prev_month - 1])
    return seasonal_step(prev, month, process, rng)


def sample_query_inputs(case, keymap, process, rng, month=None, key=None):
    """Training-distribution draw: uniform month, month-conditional forecast,
    independent uniform topology."""
    if month is None:
        month = int(rng.integers(1, 13))
    keys = keymap.all_keys()
    if key is None:
        key = keys[int(rng.integers(0, len(keys)))]
    J = _sample_seasonal(process, month, rng)
    day = 1 + sum((31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)[: month - 1])
    fc = sample_day_ahead(case, day, J, process, rng)
    return key, month, fc


def generate_dataset(case, keymap, n_records, process, rng, min_bucket=10,
                     gap_tol=1e-6):
    """Build the proxy dataset: solve n_records instances, bucket coverage
    balanced so every topology key holds at least min_bucket records.

    Uniform key sampling first; deficits are then topped up by re-keying the
    latest draws of the most-plentiful buckets, keeping exactly n_records.
    """
    keymap.validate()
    process.validate(case)
    keys = keymap.all_keys()
    if n_records < len(keys) * min_bucket:
        raise ValidationError(
            f"n_records {n_records} cannot give {len(keys)} buckets "
            f"of at least {min_bucket}"
        )
    drawn = [keys[int(rng.integers(0, len(keys)))] for _ in range(n_records)]
    counts = {_hashable(k): 0 for k in keys}
    for k in drawn:
        counts[_hashable(k)] += 1
    # re-key surplus draws into deficient buckets, newest surplus first
    for key in keys:
        hk = _hashable(key)
        while counts[hk] < min_bucket:
            donor = max(keys, key=lambda k: (counts[_hashable(k)], str(k)))
            if counts[_hashable(donor)] <= min_bucket:
                raise ValidationError("rebalancing failed; n_records too small")
            for i in range(n_records - 1, -1, -1):
                if _hashable(drawn[i]) == _hashable(donor):
                    drawn[i] = key
                    break
            counts[_hashable(donor)] -= 1
            counts[hk] += 1

    ds = ProxyDataset(case.case_hash(), keymap, process, min_bucket)
    for key in drawn:
        k, month, fc = sample_query_inputs(case, keymap, process, rng, key=key)
        topo = keymap.topology_for(case, key)
        sol = solve_uc(case, topo, fc, gap_tol=gap_tol)
        ds.add(ProxyRecord(make_query(case, key, fc.wind, fc.load, month), sol))
    return ds


def nn_lookup(ds, query):
    """Stored solution of the nearest stored query in the same topology bucket."""
    bucket = ds.buckets.get(_hashable(query.topology_key))
    if not bucket:
        raise MissingTopologyError(f"no records for topology key {query.topology_key}")
    best_i, best_d = bucket[0], np.inf
    for i in bucket:
        d = distance(query, ds.records[i].query)
        if d < best_d - 1e-15:
            best_i, best_d = i, d
    return ds.records[best_i].solution


def evaluate_proxy(case, ds, n_test, rng, months=12, csv_path=None):
    """Exact-vs-proxy gap report over fresh queries, one row per metric per month.

    Metrics mirror the proxy-validation figure: day-ahead cost, day-ahead
    shedding, downstream real-time operating cost, and mean reliability of a
    realized day operated with each baseline.  Test months are stratified
    deterministically so every month gets queries.
    """
    process = ds.process
    H = process.hours_per_day
    w_bounds = (np.zeros(case.n_wind), case.wind_capacities)
    d_bounds = (np.zeros(case.n_buses), np.full(case.n_buses, np.inf))
    samples = {m: [] for m in range(1, months + 1)}

    for q in range(n_test):
        month = (q % months) + 1
        key, month, fc = sample_query_inputs(case, ds.keymap, process, rng, month=month)
        topo = ds.keymap.topology_for(case, key)
        exact = solve_uc(case, topo, fc)
        query = make_query(case, key, fc.wind, fc.load, month)
        prox = nn_lookup(ds, query)

        # realized walk over the query's own day
        reals = [realization_at((fc.wind[:, 0], fc.load[:, 0]), (w_bounds, d_bounds))]
        for h in range(1, H):
            reals.append(step_hourly((fc.wind[:, h], fc.load[:, h]), reals[-1], process,
                                     (w_bounds, d_bounds), rng,
                                     day_start_forecast_MW=(fc.wind[:, 0], fc.load[:, 0])))
        row = {}
        for tag, baseline in (("exact", exact), ("proxy", prox)):
            prev = None
            cost = 0.0
            rel = []
            for h in range(H):
                dec = solve_rt(case, topo, reals[h], baseline, h, prev)
                cost += rt_operating_cost(dec)
                rel.append(state_reliability(case, topo, reals[h], dec))
                prev = dec
            row[f"rt_cost_{tag}"] = cost
            row[f"reliability_{tag}"] = float(np.mean(rel))
        row["da_cost_exact"] = exact.cost
        row["da_cost_proxy"] = prox.cost
        row["da_shed_exact"] = float(exact.load_shed_MW.sum())
        row["da_shed_proxy"] = float(prox.load_shed_MW.sum())
        samples[month].append(row)

    rows = []
    for metric in ("da_cost", "da_shed", "rt_cost", "reliability"):
        for m in range(1, months + 1):
            recs = samples[m]
            gaps = [r[f"{metric}_proxy"] - r[f"{metric}_exact"] for r in recs]
            rows.append({
                "metric": metric,
                "month": m,
                "n": len(recs),
                "mean_exact": float(np.mean([r[f"{metric}_exact"] for r in recs])) if recs else float("nan"),
                "mean_proxy": float(np.mean([r[f"{metric}_proxy"] for r in recs])) if recs else float("nan"),
                "gap_mean": float(np.mean(gaps)) if gaps else float("nan"),
                "gap_sd": float(np.std(gaps)) if gaps else float("nan"),
            })
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            wtr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            wtr.writeheader()
            wtr.writerows(rows)
    return rows
