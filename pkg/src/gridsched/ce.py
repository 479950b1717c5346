"""Cross-entropy optimization over outage schedules.

A probability matrix over (line, month) cells parameterizes the schedule
distribution.  Each iteration samples feasible schedules row-wise (month
combinations drawn proportionally to their probability product), scores
them with barrier-penalized assessed cost, and resets the matrix to the
elite-sample mean.  Convergence is declared when the matrix entropy falls
below a small threshold, i.e. the distribution has become deterministic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import MaxIterationsError, ValidationError

log = logging.getLogger(__name__)

MONTHS = 12


@dataclass(frozen=True)
class OutageRequirement:
    line_id: int
    count: int
    allowed_months: tuple = tuple(range(1, 13))

    def validate(self):
        if self.count not in (1, 2):
            raise ValidationError(f"requirement[{self.line_id}].count: must be 1 or 2")
        months = tuple(sorted(set(self.allowed_months)))
        if not months or any(not 1 <= m <= MONTHS for m in months):
            raise ValidationError(f"requirement[{self.line_id}].allowed_months: outside 1..12")
        if self.count > len(months):
            raise ValidationError(
                f"requirement[{self.line_id}]: count {self.count} exceeds "
                f"{len(months)} allowed months"
            )
        return self


@dataclass(frozen=True)
class OutageSchedule:
    """0/1 assignment matrix, rows following the requirement list order."""

    assignment: tuple  # tuple of 12-tuples

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat)
        return cls(tuple(tuple(int(v) for v in row) for row in mat))

    def as_matrix(self):
        return np.array(self.assignment, dtype=float)

    def months_of(self, row):
        return tuple(m + 1 for m, v in enumerate(self.assignment[row]) if v)

    def lines_out_in_month(self, reqs, month):
        return [r.line_id for i, r in enumerate(reqs) if self.assignment[i][month - 1]]

    def feasible(self, reqs):
        for i, r in enumerate(reqs):
            months = self.months_of(i)
            if len(months) != r.count:
                return False
            if any(m not in r.allowed_months for m in months):
                return False
        return True


@dataclass
class CeDistribution:
    p: np.ndarray  # |L| x 12 in [0, 1]

    @classmethod
    def initial(cls, n_rows):
        # every cell starts at a half, including never-allowed ones; the
        # first elite average zeroes the latter automatically
        return cls(np.full((n_rows, MONTHS), 0.5))

    def validate(self):
        if np.any(self.p < -1e-12) or np.any(self.p > 1 + 1e-12):
            raise ValidationError("distribution entries outside [0, 1]")
        return self


@dataclass(frozen=True)
class BarrierParams:
    """Increasing-slope penalty on empirical chance-constraint violations.

    barrier(x) = kappa * x + lam * x^2 with kappa tied to the cost scale,
    so a few percent of violation dominates ordinary cost differences.
    """

    kappa_factor: float = 10.0
    lambda_factor: float = 100.0
    kappa: float = None  # explicit override
    lam: float = None

    def evaluate(self, violation, cost_scale):
        if violation <= 0.0:
            return 0.0
        kappa = self.kappa if self.kappa is not None else self.kappa_factor * max(1.0, abs(cost_scale))
        lam = self.lam if self.lam is not None else self.lambda_factor * kappa
        return kappa * violation + lam * violation ** 2


@dataclass(frozen=True)
class CeParams:
    n_samples: int = 75
    rho: float = 0.15
    eps_entropy: float = None  # default 0.01 * |L| nats, set at run time
    max_iters: int = 30
    smoothing: float = 1.0  # 1.0 = raw elite mean

    def validate(self):
        if self.n_samples < 1:
            raise ValidationError("ce.n_samples: must be positive")
        if not 0.0 < self.rho <= 1.0:
            raise ValidationError("ce.rho: must be in (0, 1]")
        if self.n_samples < 1.0 / self.rho - 1e-9:
            raise ValidationError("ce.n_samples: fewer than 1/rho samples")
        if self.max_iters < 1:
            raise ValidationError("ce.max_iters: must be positive")
        if not 0.0 < self.smoothing <= 1.0:
            raise ValidationError("ce.smoothing: must be in (0, 1]")
        return self


def elite_count(rho, n):
    """ceil(rho * n) with protection against float crumbs like 0.15*20."""
    return max(1, math.ceil(rho * n - 1e-9))


def _row_combos(req):
    return list(combinations(sorted(req.allowed_months), req.count))


def sample_schedule(dist, reqs, rng):
    """Draw a feasible schedule: per row, one month combination with
    probability proportional to the product of its cell probabilities."""
    dist.validate()
    rows = []
    for i, req in enumerate(reqs):
        combos = _row_combos(req)
        weights = np.array([np.prod([dist.p[i, m - 1] for m in combo]) for combo in combos])
        total = weights.sum()
        if total <= 0.0:
            log.warning("degenerate row %d (all combo weights zero); falling back to uniform",
                        i)
            weights = np.ones(len(combos))
            total = weights.sum()
        pick = combos[int(rng.choice(len(combos), p=weights / total))]
        row = [0] * MONTHS
        for m in pick:
            row[m - 1] = 1
        rows.append(tuple(row))
    return OutageSchedule(tuple(rows))


def penalized_cost(metrics, thr, barrier=None):
    """Expected cost plus barriers on the two chance-constraint shortfalls."""
    if barrier is None:
        barrier = BarrierParams()
    shortfall_r = max(0.0, (1.0 - thr.alpha_r) - metrics.p_reliability_ok)
    shortfall_ls = max(0.0, (1.0 - thr.alpha_shed) - metrics.p_shed_ok)
    scale = metrics.expected_cost
    return (metrics.expected_cost
            + barrier.evaluate(shortfall_r, scale)
            + barrier.evaluate(shortfall_ls, scale))


def update_distribution(dist, samples, costs, rho):
    """Elite mean update: the new matrix is the average elite assignment."""
    if len(samples) != len(costs) or not samples:
        raise ValidationError("update: samples and costs must align and be non-empty")
    n_elite = elite_count(rho, len(samples))
    order = np.argsort(np.asarray(costs), kind="stable")  # ties keep sample order
    elite = order[:n_elite]
    mats = np.stack([samples[i].as_matrix() for i in elite])
    return CeDistribution(mats.mean(axis=0))


def entropy(dist):
    """Total binary entropy of the cell probabilities, in nats."""
    p = np.clip(dist.p, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log(p), 0.0)
              + np.where(p < 1, (1 - p) * np.log(1 - p), 0.0))
    return float(np.sum(h))


def argmax_schedule(dist, reqs):
    """Most likely schedule of the distribution: per-row best combination."""
    rows = []
    for i, req in enumerate(reqs):
        combos = _row_combos(req)
        weights = [np.prod([dist.p[i, m - 1] for m in combo]) for combo in combos]
        pick = combos[int(np.argmax(weights))]
        row = [0] * MONTHS
        for m in pick:
            row[m - 1] = 1
        rows.append(tuple(row))
    return OutageSchedule(tuple(rows))


@dataclass
class CeResult:
    schedule: OutageSchedule
    trace: list
    p_history: list
    best_sample: OutageSchedule
    best_cost: float
    converged: bool
    iterations: int


def _quartiles(values):
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(q1), float(med), float(q3)


def optimize(reqs, thr, ce_params, assess, rng, barrier=None):
    """Cross-entropy loop to a near-deterministic schedule distribution.

    ``assess`` is called once per iteration with (schedules, seed) and must
    return one ScheduleMetrics per schedule; the shared seed gives common
    random numbers across the iteration's candidates.  Raises
    MaxIterationsError (carrying the best result so far) when the entropy
    criterion is not met within max_iters.
    """
    reqs = [r.validate() for r in reqs]
    ce_params.validate()
    eps = ce_params.eps_entropy if ce_params.eps_entropy is not None else 0.01 * len(reqs)

    dist = CeDistribution.initial(len(reqs))
    trace = []
    p_history = [dist.p.copy()]
    best_sample, best_cost = None, np.inf
    converged = False
    it = 0

    for it in range(1, ce_params.max_iters + 1):
        schedules = [sample_schedule(dist, reqs, rng) for _ in range(ce_params.n_samples)]
        seed = int(rng.integers(2**62))
        metrics = assess(schedules, seed)
        pcosts = [penalized_cost(m, thr, barrier) for m in metrics]

        n_elite = elite_count(ce_params.rho, ce_params.n_samples)
        order = np.argsort(np.asarray(pcosts), kind="stable")
        elite = order[:n_elite]
        new_dist = update_distribution(dist, schedules, pcosts, ce_params.rho)
        if ce_params.smoothing < 1.0:
            new_dist = CeDistribution(ce_params.smoothing * new_dist.p
                                      + (1 - ce_params.smoothing) * dist.p)
        dist = new_dist

        i_best = int(order[0])
        if pcosts[i_best] < best_cost:
            best_cost = float(pcosts[i_best])
            best_sample = schedules[i_best]

        ec = [pcosts[i] for i in elite]
        er = [metrics[i].mean_reliability for i in elite]
        es = [metrics[i].mean_shed_frac for i in elite]
        cq1, cmed, cq3 = _quartiles(ec)
        rq1, rmed, rq3 = _quartiles(er)
        sq1, smed, sq3 = _quartiles(es)
        h = entropy(dist)
        trace.append({
            "iteration": it,
            "elite_cost_q1": cq1, "elite_cost_median": cmed, "elite_cost_q3": cq3,
            "elite_reliability_q1": rq1, "elite_reliability_median": rmed,
            "elite_reliability_q3": rq3,
            "elite_shed_q1": sq1, "elite_shed_median": smed, "elite_shed_q3": sq3,
            "entropy": h,
            "best_cost": best_cost,
        })
        p_history.append(dist.p.copy())
        log.info("iteration %d: elite median cost %.4g, entropy %.4g", it, cmed, h)
        if h < eps:
            converged = True
            break

    result = CeResult(
        schedule=argmax_schedule(dist, reqs),
        trace=trace,
        p_history=p_history,
        best_sample=best_sample,
        best_cost=best_cost,
        converged=converged,
        iterations=it,
    )
    if not converged:
        raise MaxIterationsError(
            f"entropy {trace[-1]['entropy']:.4g} still above {eps:.4g} "
            f"after {ce_params.max_iters} iterations", best=result)
    return result


def enumerate_schedules(reqs):
    """Every feasible schedule (small requirement sets only)."""
    reqs = [r.validate() for r in reqs]
    pools = [_row_combos(r) for r in reqs]

    def build(rows, depth):
        if depth == len(pools):
            yield OutageSchedule(tuple(rows))
            return
        for combo in pools[depth]:
            row = [0] * MONTHS
            for m in combo:
                row[m - 1] = 1
            yield from build(rows + [tuple(row)], depth + 1)

    return list(build([], 0))
