"""Self-contained LP / MILP engine for the commitment and redispatch models.

The LP core is a two-phase primal simplex on a dense tableau with general
variable bounds: nonbasic variables rest at either bound, so simple bounds
and ranged rows never consume tableau rows.  Binaries are handled by
best-first branch and bound with most-fractional branching.  A brute-force
enumerator over binary fixings doubles as the exact oracle used by tests.

Pivot selection defaults to Dantzig's rule and switches permanently to
Bland's rule once the objective stalls, which keeps the anti-cycling
termination guarantee while avoiding Bland's slow crawl on every solve.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CapacityError, NumericalError, ValidationError

RELATIONS = ("<=", ">=", "==", "in")

#: incremented by every solve_milp call; lets the harness verify that
#: proxy-mode assessment never touches the exact solver.
solve_stats = {"lp_solves": 0, "milp_solves": 0}


@dataclass(frozen=True)
class Constraint:
    """Sparse linear row: sum(val[k] * x[idx[k]])  <rel>  rhs.

    ``rel`` is one of ``<=``, ``>=``, ``==`` or the ranged extension ``in``,
    for which ``rhs`` is a ``(low, high)`` pair.
    """

    idx: tuple
    val: tuple
    rel: str
    rhs: object

    def activity(self, x):
        return float(np.dot(self.val, x[np.asarray(self.idx, dtype=int)])) if self.idx else 0.0

    def violation(self, x):
        a = self.activity(x)
        if self.rel == "<=":
            return max(0.0, a - self.rhs)
        if self.rel == ">=":
            return max(0.0, self.rhs - a)
        if self.rel == "==":
            return abs(a - self.rhs)
        lo, hi = self.rhs
        return max(0.0, a - hi, lo - a)


@dataclass
class LinearProgram:
    """min objective @ x subject to constraints and lo <= x <= hi."""

    objective: np.ndarray
    constraints: list
    lo: np.ndarray
    hi: np.ndarray
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if not self.names:
            self.names = [f"x{j}" for j in range(self.objective.size)]

    @property
    def n_vars(self):
        return self.objective.size

    def validate(self):
        n = self.n_vars
        if not np.all(np.isfinite(self.objective)):
            raise ValidationError("objective: non-finite coefficient")
        if self.lo.size != n or self.hi.size != n:
            raise ValidationError("bounds: length mismatch with objective")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValidationError("bounds: NaN entry")
        bad = np.where(self.lo > self.hi + 1e-12)[0]
        if bad.size:
            j = int(bad[0])
            raise ValidationError(f"bounds[{self.names[j]}]: lo {self.lo[j]} > hi {self.hi[j]}")
        if len(self.names) != n:
            raise ValidationError("names: length mismatch")
        for i, con in enumerate(self.constraints):
            if con.rel not in RELATIONS:
                raise ValidationError(f"constraints[{i}].rel: unknown relation {con.rel!r}")
            if len(con.idx) != len(con.val):
                raise ValidationError(f"constraints[{i}]: idx/val length mismatch")
            for j in con.idx:
                if not 0 <= j < n:
                    raise ValidationError(f"constraints[{i}]: variable index {j} out of range")
            if not np.all(np.isfinite(con.val)):
                raise ValidationError(f"constraints[{i}]: non-finite coefficient")
            if con.rel == "in":
                lo, hi = con.rhs
                if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                    raise ValidationError(f"constraints[{i}]: bad range rhs {con.rhs}")
            elif not np.isfinite(con.rhs):
                raise ValidationError(f"constraints[{i}]: non-finite rhs")


@dataclass
class MixedIntegerProgram:
    lp: LinearProgram
    binary_vars: tuple

    def validate(self):
        self.lp.validate()
        for j in self.binary_vars:
            if not 0 <= j < self.lp.n_vars:
                raise ValidationError(f"binary_vars: index {j} out of range")
            if self.lp.lo[j] < -1e-9 or self.lp.hi[j] > 1 + 1e-9:
                raise ValidationError(
                    f"binary_vars[{self.lp.names[j]}]: bounds must be within [0, 1]"
                )


@dataclass
class Solution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    values: np.ndarray
    objective: float
    duals: np.ndarray = None
    iterations: int = 0
    nodes: int = 0
    max_violation: float = 0.0
    incumbent_trace: tuple = ()


class LpBuilder:
    """Incremental construction of a LinearProgram with named variables."""

    def __init__(self):
        self.cost = []
        self.lo = []
        self.hi = []
        self.names = []
        self.constraints = []
        self._by_name = {}

    def add_var(self, name, lo=0.0, hi=np.inf, cost=0.0):
        j = len(self.cost)
        self.cost.append(cost)
        self.lo.append(lo)
        self.hi.append(hi)
        self.names.append(name)
        self._by_name[name] = j
        return j

    def add_constraint(self, pairs, rel, rhs):
        idx, val = [], []
        for j, c in pairs:
            if c != 0.0:
                idx.append(int(j))
                val.append(float(c))
        self.constraints.append(Constraint(tuple(idx), tuple(val), rel, rhs))

    def add_range(self, pairs, lo, hi):
        self.add_constraint(pairs, "in", (float(lo), float(hi)))

    def index_of(self, name):
        return self._by_name[name]

    def build(self):
        lp = LinearProgram(
            np.array(self.cost, dtype=float),
            list(self.constraints),
            np.array(self.lo, dtype=float),
            np.array(self.hi, dtype=float),
            list(self.names),
        )
        lp.validate()
        return lp


# ---------------------------------------------------------------------------
# simplex core
# ---------------------------------------------------------------------------

_PIV_TOL = 1e-9
_FEAS_TOL = 1e-7


def _iteration_cap(lp):
    return 50 * (lp.n_vars + len(lp.constraints))


class _Simplex:
    """Bounded-variable primal simplex over a dense tableau.

    Column layout: structural variables (with free variables split into a
    positive/negative pair), one slack per row, then artificials.  Row i is
    normalized to  a@x + s_i = rhs_i  where the slack bounds encode the
    relation:  <= gives s in [0, inf),  >= gives s in (-inf, 0],  == pins
    s at 0, and a ranged row gives s in [0, hi - lo] with rhs = hi.
    """

    def __init__(self, lp, lo, hi):
        lp_n = lp.n_vars
        # split free variables (both bounds infinite) into x+ - x-
        self.split = []
        ncol = lp_n
        for j in range(lp_n):
            if np.isneginf(lo[j]) and np.isposinf(hi[j]):
                self.split.append((j, ncol))
                ncol += 1
        m = len(lp.constraints)
        self.n_struct = lp_n
        self.m = m
        self.slack0 = ncol
        nart_max = m
        total = ncol + m + nart_max

        A = np.zeros((m, total))
        b = np.zeros(m)
        c = np.zeros(total)
        lof = np.full(total, -np.inf)
        hif = np.full(total, np.inf)

        c[:lp_n] = lp.objective
        lof[:lp_n] = lo
        hif[:lp_n] = hi
        for j, jm in self.split:
            lof[j], hif[j] = 0.0, np.inf
            lof[jm], hif[jm] = 0.0, np.inf
            c[jm] = -lp.objective[j]

        for i, con in enumerate(lp.constraints):
            for j, v in zip(con.idx, con.val):
                A[i, j] = v
            for j, jm in self.split:
                A[i, jm] = -A[i, j]
            s = self.slack0 + i
            A[i, s] = 1.0
            if con.rel == "<=":
                lof[s], hif[s] = 0.0, np.inf
                b[i] = con.rhs
            elif con.rel == ">=":
                lof[s], hif[s] = -np.inf, 0.0
                b[i] = con.rhs
            elif con.rel == "==":
                lof[s], hif[s] = 0.0, 0.0
                b[i] = con.rhs
            else:  # ranged
                rlo, rhi = con.rhs
                lof[s], hif[s] = 0.0, rhi - rlo
                b[i] = rhi

        # initial nonbasic rest point: lower bound when finite, else upper
        self.at_upper = np.zeros(total, dtype=bool)
        for j in range(self.slack0 + m):
            if not np.isfinite(lof[j]):
                self.at_upper[j] = True

        v0 = np.where(self.at_upper, hif, lof)
        v0[self.slack0 + m:] = 0.0
        resid = b - A[:, : self.slack0 + m] @ v0[: self.slack0 + m]

        basis = np.empty(m, dtype=int)
        xB = np.zeros(m)
        self.art_cols = []
        art_next = self.slack0 + m
        for i in range(m):
            s = self.slack0 + i
            s_target = v0[s] + resid[i]
            if lof[s] - 1e-12 <= s_target <= hif[s] + 1e-12:
                basis[i] = s
                xB[i] = s_target
            else:
                a = art_next
                art_next += 1
                A[i, a] = 1.0 if resid[i] >= 0 else -1.0
                lof[a], hif[a] = 0.0, np.inf
                basis[i] = a
                xB[i] = abs(resid[i])
                self.art_cols.append(a)

        ncols = art_next
        self.A = A[:, :ncols]
        self.lof = lof[:ncols]
        self.hif = hif[:ncols]
        self.c = c[:ncols]
        self.at_upper = self.at_upper[:ncols]
        self.b = b
        self.basis = basis
        self.xB = xB
        self.in_basis = np.zeros(ncols, dtype=bool)
        self.in_basis[basis] = True
        self.enterable = np.ones(ncols, dtype=bool)
        for a in self.art_cols:
            self.enterable[a] = False

        # tableau rows for artificial columns entered with coefficient -1
        # need a sign flip so the starting basis matrix is the identity
        self.T = self.A.copy()
        for i in range(m):
            if self.T[i, basis[i]] < 0:
                self.T[i, :] *= -1.0
        self.iterations = 0

    # -- helpers ----------------------------------------------------------

    def _nonbasic_values(self):
        v = np.where(self.at_upper, self.hif, self.lof)
        v[~np.isfinite(v)] = 0.0
        v[self.basis] = self.xB
        return v

    def reduced_costs(self, cost):
        d = cost - cost[self.basis] @ self.T
        d[self.basis] = 0.0
        return d

    def objective_value(self, cost):
        return float(cost @ self._nonbasic_values())

    # -- main loop --------------------------------------------------------

    def run(self, cost, cap, phase):
        """Iterate to optimality for the given cost vector.

        Returns "optimal" or "unbounded"; raises NumericalError past cap.
        """
        d = self.reduced_costs(cost)
        z = self.objective_value(cost)
        tol_d = 1e-9 * max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        bland = False
        stall = 0
        stall_limit = max(100, 2 * self.m)

        while True:
            movable = self.enterable & ~self.in_basis & (self.hif - self.lof > 1e-14)
            viol = np.where(self.at_upper, d, -d)
            viol[~movable] = -np.inf
            if bland:
                cand = np.where(viol > tol_d)[0]
                if cand.size == 0:
                    return "optimal"
                j = int(cand[0])
            else:
                j = int(np.argmax(viol))
                if viol[j] <= tol_d:
                    return "optimal"

            sigma = -1.0 if self.at_upper[j] else 1.0
            w = self.T[:, j]
            den = sigma * w
            lo_b = self.lof[self.basis]
            hi_b = self.hif[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.full(self.m, np.inf)
                pos = den > _PIV_TOL
                neg = den < -_PIV_TOL
                t[pos] = (self.xB[pos] - lo_b[pos]) / den[pos]
                t[neg] = (hi_b[neg] - self.xB[neg]) / (-den[neg])
            np.clip(t, 0.0, None, out=t)
            t_basic = float(t.min()) if self.m else np.inf
            t_flip = float(self.hif[j] - self.lof[j])
            t_star = min(t_basic, t_flip)

            if not np.isfinite(t_star):
                if phase == 1:
                    raise NumericalError("phase-1 objective unbounded; numerical failure")
                return "unbounded"

            self.xB -= den * t_star
            z += float(d[j]) * sigma * t_star

            if t_flip <= t_basic:
                self.at_upper[j] = not self.at_upper[j]
            else:
                near = np.where(t <= t_basic + 1e-12)[0]
                r = int(near[np.argmin(self.basis[near])])
                lv = self.basis[r]
                self.at_upper[lv] = den[r] < 0  # hit upper bound when moving up
                enter_val = (self.hif[j] if sigma < 0 else self.lof[j]) + sigma * t_star
                piv = self.T[r, j]
                prow = self.T[r, :] / piv
                col = self.T[:, j].copy()
                col[r] = 0.0
                self.T -= np.outer(col, prow)
                self.T[r, :] = prow
                d = d - d[j] * prow
                d[j] = 0.0
                self.in_basis[lv] = False
                self.in_basis[j] = True
                self.basis[r] = j
                self.xB[r] = enter_val

            self.iterations += 1
            if self.iterations > cap:
                raise NumericalError(f"simplex exceeded iteration cap {cap}")
            if t_star > 1e-12 * max(1.0, abs(z)):
                stall = 0
            else:
                stall += 1
                if stall >= stall_limit and not bland:
                    bland = True  # anti-cycling: finish under Bland's rule

    def drive_out_artificials(self):
        for r in range(self.m):
            a = self.basis[r]
            if a not in self.art_cols:
                continue
            row = self.T[r, :]
            pivot_j = -1
            for j in range(self.slack0 + self.m):
                if not self.in_basis[j] and abs(row[j]) > 1e-7:
                    pivot_j = j
                    break
            if pivot_j < 0:
                # redundant row: keep the artificial pinned at zero
                self.hif[a] = 0.0
                continue
            j = pivot_j
            enter_val = self.hif[j] if self.at_upper[j] else self.lof[j]
            piv = self.T[r, j]
            prow = self.T[r, :] / piv
            col = self.T[:, j].copy()
            col[r] = 0.0
            self.T -= np.outer(col, prow)
            self.T[r, :] = prow
            self.in_basis[a] = False
            self.in_basis[j] = True
            self.basis[r] = j
            self.xB[r] = enter_val
            self.at_upper[a] = False

    def extract(self, lp):
        v = self._nonbasic_values()
        x = v[: self.n_struct].copy()
        for j, jm in self.split:
            x[j] = v[j] - v[jm]
        duals = np.array([-d for d in self.dual_row()])
        return x, duals

    def dual_row(self):
        d2 = self.reduced_costs(self.c)
        return [d2[self.slack0 + i] for i in range(self.m)]


def _solve_lp_raw(lp, cap=None):
    lp.validate()
    cap = cap if cap is not None else _iteration_cap(lp)
    sx = _Simplex(lp, lp.lo, lp.hi)

    if sx.art_cols:
        c1 = np.zeros_like(sx.c)
        for a in sx.art_cols:
            c1[a] = 1.0
        sx.run(c1, cap, phase=1)
        z1 = sx.objective_value(c1)
        scale = max(1.0, float(np.max(np.abs(sx.b))) if sx.m else 1.0)
        if z1 > 1e-7 * scale:
            return Solution("infeasible", np.full(lp.n_vars, np.nan), np.nan,
                            iterations=sx.iterations)
        sx.drive_out_artificials()
        for a in sx.art_cols:
            sx.hif[a] = 0.0
            sx.lof[a] = 0.0

    status = sx.run(sx.c, cap, phase=2)
    if status == "unbounded":
        return Solution("unbounded", np.full(lp.n_vars, np.nan), -np.inf,
                        iterations=sx.iterations)

    x, duals = sx.extract(lp)
    np.clip(x, lp.lo, lp.hi, out=x)  # shave 1e-12 bound drift
    obj = float(lp.objective @ x)
    maxv = max((con.violation(x) for con in lp.constraints), default=0.0)
    if maxv > 1e-5:
        raise NumericalError(f"LP solution violates a constraint by {maxv:.3e}")
    return Solution("optimal", x, obj, duals=duals, iterations=sx.iterations,
                    max_violation=maxv)


def solve_lp(lp):
    """Solve a LinearProgram; status optimal / infeasible / unbounded."""
    solve_stats["lp_solves"] += 1
    return _solve_lp_raw(lp)


def _with_bounds(lp, fixes):
    lo = lp.lo.copy()
    hi = lp.hi.copy()
    for j, (l, h) in fixes.items():
        lo[j] = l
        hi[j] = h
    return replace(lp, lo=lo, hi=hi)


def _most_fractional(x, binaries, int_tol):
    best_j, best_f = -1, int_tol
    for j in binaries:
        f = abs(x[j] - round(x[j]))
        if f > best_f:
            best_j, best_f = j, f
    return best_j


def solve_milp(mip, gap_tol=1e-6, int_tol=1e-7):
    """Best-first branch and bound over the binary variables.

    The returned objective is within gap_tol * max(1, |obj|) of the true
    optimum; binary entries of the solution are within int_tol of {0, 1}.
    """
    solve_stats["milp_solves"] += 1
    mip.validate()
    if gap_tol < 0:
        raise ValidationError("gap_tol must be non-negative")
    lp = mip.lp
    binaries = tuple(sorted(mip.binary_vars))
    if not binaries:
        sol = _solve_lp_raw(lp)
        return replace(sol, nodes=1, incumbent_trace=(sol.objective,) if sol.status == "optimal" else ())

    nodes = 0
    incumbent = None
    trace = []

    def consider(sol):
        nonlocal incumbent
        if incumbent is None or sol.objective < incumbent.objective - 1e-12:
            incumbent = sol
            trace.append(sol.objective)

    root = _solve_lp_raw(lp)
    nodes += 1
    if root.status == "unbounded":
        return replace(root, nodes=nodes)
    if root.status == "infeasible":
        return Solution("infeasible", np.full(lp.n_vars, np.nan), np.nan, nodes=nodes)

    # rounding heuristic: fix binaries to the rounded relaxation for a fast
    # incumbent; failures are simply discarded
    fixes0 = {j: (float(round(root.values[j])),) * 2 for j in binaries}
    heur = _solve_lp_raw(_with_bounds(lp, fixes0))
    nodes += 1
    if heur.status == "optimal":
        consider(heur)

    counter = itertools.count()
    heap = []
    j0 = _most_fractional(root.values, binaries, int_tol)
    if j0 < 0:
        consider(root)
        return replace(incumbent, nodes=nodes, incumbent_trace=tuple(trace))
    heapq.heappush(heap, (root.objective, next(counter), {}, root))

    while heap:
        bound, _, fixes, sol = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent.objective - gap_tol * max(1.0, abs(incumbent.objective)):
            break  # best-first: every remaining node is at least as bad
        j = _most_fractional(sol.values, binaries, int_tol)
        if j < 0:
            consider(sol)
            continue
        for v in (0.0, 1.0):
            child_fixes = dict(fixes)
            child_fixes[j] = (v, v)
            child = _solve_lp_raw(_with_bounds(lp, child_fixes))
            nodes += 1
            if child.status != "optimal":
                continue
            if incumbent is not None and child.objective >= incumbent.objective - gap_tol * max(1.0, abs(incumbent.objective)):
                continue
            if _most_fractional(child.values, binaries, int_tol) < 0:
                consider(child)
            else:
                heapq.heappush(heap, (child.objective, next(counter), child_fixes, child))

    if incumbent is None:
        return Solution("infeasible", np.full(lp.n_vars, np.nan), np.nan, nodes=nodes)
    values = incumbent.values.copy()
    for j in binaries:
        values[j] = round(values[j])
    return replace(incumbent, values=values, nodes=nodes, incumbent_trace=tuple(trace))


def brute_force_milp(mip, cap_binaries=20):
    """Exact MILP optimum by enumerating every binary fixing.

    Test oracle: independent of the branch-and-bound path.  Fixings that
    violate a constraint supported entirely on binaries are skipped without
    an LP solve, which is safe because such LPs are infeasible.
    """
    mip.validate()
    binaries = tuple(sorted(mip.binary_vars))
    k = len(binaries)
    if k > cap_binaries:
        raise CapacityError(f"brute force capped at {cap_binaries} binaries, got {k}")
    lp = mip.lp
    if k == 0:
        return _solve_lp_raw(lp)

    bpos = {j: p for p, j in enumerate(binaries)}
    bset = set(binaries)
    pure = []
    for con in lp.constraints:
        if con.idx and all(j in bset for j in con.idx):
            pure.append((np.array([bpos[j] for j in con.idx]), np.array(con.val), con.rel, con.rhs))

    def pure_ok(a):
        for pos, val, rel, rhs in pure:
            act = float(val @ a[pos])
            if rel == "<=" and act > rhs + 1e-9:
                return False
            if rel == ">=" and act < rhs - 1e-9:
                return False
            if rel == "==" and abs(act - rhs) > 1e-9:
                return False
            if rel == "in" and not (rhs[0] - 1e-9 <= act <= rhs[1] + 1e-9):
                return False
        return True

    allowed = []
    for j in binaries:
        vals = [v for v in (0.0, 1.0) if lp.lo[j] - 1e-9 <= v <= lp.hi[j] + 1e-9]
        if not vals:
            return Solution("infeasible", np.full(lp.n_vars, np.nan), np.nan)
        allowed.append(vals)

    best = None
    n_solved = 0
    for assign in itertools.product(*allowed):
        a = np.array(assign)
        if not pure_ok(a):
            continue
        fixes = {j: (v, v) for j, v in zip(binaries, assign)}
        sol = _solve_lp_raw(_with_bounds(lp, fixes))
        n_solved += 1
        if sol.status != "optimal":
            continue
        if best is None or sol.objective < best.objective - 1e-12:
            best = sol
    if best is None:
        return Solution("infeasible", np.full(lp.n_vars, np.nan), np.nan, nodes=n_solved)
    values = best.values.copy()
    for j in binaries:
        values[j] = round(values[j])
    return replace(best, values=values, nodes=n_solved)


def write_lp(lp, path):
    """Dump in CPLEX LP text format for cross-checks with external solvers."""

    def term(c, name, first):
        sign = "-" if c < 0 else ("" if first else "+")
        return f"{sign} {abs(c):.12g} {name} "

    lines = ["Minimize", " obj: "]
    first = True
    for j, c in enumerate(lp.objective):
        if c != 0.0:
            lines[-1] += term(c, lp.names[j], first)
            first = False
    if first:
        lines[-1] += "0 x_dummy_obj"
    lines.append("Subject To")
    cid = 0
    for con in lp.constraints:
        rows = [(con.rel, con.rhs)] if con.rel != "in" else [(">=", con.rhs[0]), ("<=", con.rhs[1])]
        for rel, rhs in rows:
            body = ""
            first = True
            for j, v in zip(con.idx, con.val):
                body += term(v, lp.names[j], first)
                first = False
            op = {"<=": "<=", ">=": ">=", "==": "="}[rel]
            lines.append(f" c{cid}: {body}{op} {rhs:.12g}")
            cid += 1
    lines.append("Bounds")
    for j in range(lp.n_vars):
        lo = "-inf" if np.isneginf(lp.lo[j]) else f"{lp.lo[j]:.12g}"
        hi = "+inf" if np.isposinf(lp.hi[j]) else f"{lp.hi[j]:.12g}"
        lines.append(f" {lo} <= {lp.names[j]} <= {hi}")
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
