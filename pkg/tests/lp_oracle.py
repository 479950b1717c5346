"""Independent LP oracle: enumerate basic feasible points of small programs.

Every candidate vertex is the solution of n active equations chosen from the
constraint rows (at either end for ranged rows) and the variable bounds.
Intentionally brute force and separate from the simplex code path.
"""

import itertools

import numpy as np


def _rows(lp):
    rows = []
    for con in lp.constraints:
        a = np.zeros(lp.n_vars)
        for j, v in zip(con.idx, con.val):
            a[j] = v
        if con.rel == "in":
            rows.append((a, con.rhs[0]))
            rows.append((a, con.rhs[1]))
        else:
            rows.append((a, float(con.rhs)))
    return rows


def feasible(lp, x, tol=1e-7):
    if np.any(x < lp.lo - tol) or np.any(x > lp.hi + tol):
        return False
    return all(con.violation(x) <= tol for con in lp.constraints)


def lp_optimum_by_vertex_enumeration(lp, tol=1e-7):
    """Return (best objective, best x) over all basic feasible points.

    Requires a bounded feasible region (finite bounds on every variable).
    Returns (None, None) when no vertex is feasible.
    """
    n = lp.n_vars
    planes = _rows(lp)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lp.lo[j]):
            planes.append((e, float(lp.lo[j])))
        if np.isfinite(lp.hi[j]):
            planes.append((e, float(lp.hi[j])))

    best_obj, best_x = None, None
    for combo in itertools.combinations(range(len(planes)), n):
        A = np.stack([planes[i][0] for i in combo])
        b = np.array([planes[i][1] for i in combo])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        if not feasible(lp, x, tol):
            continue
        obj = float(lp.objective @ x)
        if best_obj is None or obj < best_obj:
            best_obj, best_x = obj, x
    return best_obj, best_x


def random_feasible_lp(rng, max_vars=8, max_cons=8):
    """Random bounded LP guaranteed feasible (a sampled point is kept inside)."""
    from gridsched.milp import Constraint, LinearProgram

    n = int(rng.integers(2, max_vars + 1))
    m = int(rng.integers(1, max_cons + 1))
    lo = np.round(rng.uniform(-3, 0, n), 2)
    hi = lo + np.round(rng.uniform(0.5, 6, n), 2)
    x0 = lo + (hi - lo) * rng.uniform(0.15, 0.85, n)
    c = np.round(rng.uniform(-5, 5, n), 2)
    cons = []
    for _ in range(m):
        k = int(rng.integers(1, n + 1))
        idx = tuple(int(j) for j in rng.choice(n, size=k, replace=False))
        val = tuple(float(v) for v in np.round(rng.uniform(-4, 4, k), 2))
        act = sum(v * x0[j] for j, v in zip(idx, val))
        rel = ("<=", ">=", "==", "in")[int(rng.integers(0, 4))]
        margin = float(np.round(rng.uniform(0.0, 2.0), 2))
        if rel == "<=":
            rhs = act + margin
        elif rel == ">=":
            rhs = act - margin
        elif rel == "==":
            rhs = act
        else:
            rhs = (act - margin, act + float(np.round(rng.uniform(0.0, 2.0), 2)))
        cons.append(Constraint(idx, val, rel, rhs))
    return LinearProgram(c, cons, lo, hi)


def random_feasible_milp(rng, max_vars=8, max_cons=6, max_binaries=10):
    """Random MILP whose LP part is feasible; binaries are a variable subset."""
    from gridsched.milp import MixedIntegerProgram

    lp = random_feasible_lp(rng, max_vars, max_cons)
    n = lp.n_vars
    nb = int(rng.integers(1, min(max_binaries, n) + 1))
    binaries = tuple(int(j) for j in sorted(rng.choice(n, size=nb, replace=False)))
    lo = lp.lo.copy()
    hi = lp.hi.copy()
    for j in binaries:
        lo[j], hi[j] = 0.0, 1.0
    lp.lo, lp.hi = lo, hi
    return MixedIntegerProgram(lp, binaries)


def check_dual_certificate(lp, sol, tol=1e-6):
    """Verify the returned duals certify optimality.

    Checks complementary slackness signs and the strong-duality identity
    obj = y.b + sum over nonbasic structural bounds of d_j * bound_j, using
    d = c - A^T y recomputed from scratch.
    """
    assert sol.status == "optimal" and sol.duals is not None
    m = len(lp.constraints)
    A = np.zeros((m, lp.n_vars))
    rhs_for_dual = np.zeros(m)
    for i, con in enumerate(lp.constraints):
        for j, v in zip(con.idx, con.val):
            A[i, j] = v
        rhs_for_dual[i] = con.rhs[1] if con.rel == "in" else con.rhs
    y = sol.duals
    d = lp.objective - A.T @ y
    x = sol.values
    scale = max(1.0, float(np.max(np.abs(lp.objective))), float(np.max(np.abs(x))))

    # reduced-cost complementarity on variables
    for j in range(lp.n_vars):
        if d[j] > tol * scale:
            assert x[j] <= lp.lo[j] + 1e-5, f"var {j}: d>0 but x not at lower bound"
        elif d[j] < -tol * scale:
            assert x[j] >= lp.hi[j] - 1e-5, f"var {j}: d<0 but x not at upper bound"

    # dual objective equals primal objective
    bound_term = 0.0
    for j in range(lp.n_vars):
        if d[j] > 0:
            bound_term += d[j] * lp.lo[j]
        elif d[j] < 0:
            bound_term += d[j] * lp.hi[j]
    slack_term = 0.0
    for i, con in enumerate(lp.constraints):
        # slack column reduced cost is -y_i with bounds encoding the relation
        if con.rel == "<=" and -y[i] < 0:
            raise AssertionError(f"row {i}: <= row with positive dual pressure")
        if con.rel == ">=" and -y[i] > 0:
            raise AssertionError(f"row {i}: >= row with negative dual pressure")
        if con.rel == "in":
            width = con.rhs[1] - con.rhs[0]
            if -y[i] < 0:
                slack_term += -y[i] * width  # slack at its upper end
    dual_obj = float(y @ rhs_for_dual) + bound_term + slack_term
    assert abs(dual_obj - sol.objective) <= 1e-5 * max(1.0, abs(sol.objective)), (
        f"duality gap {dual_obj} vs {sol.objective}"
    )
