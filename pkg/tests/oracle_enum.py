"""Reference satisfiability by exhaustive mode enumeration.

Each piecewise-linear constraint is restated here from scratch as a set
of linear modes; every combination of modes becomes one LP feasibility
problem solved with HiGHS. No solver code beyond the query data types is
used, so this is a fair second opinion for engine and preprocessor tests.
Exponential in the number of constraints; keep queries small.
"""

import itertools

import numpy as np
from scipy.optimize import linprog

from pwlsat.core import INF, Relation

# slightly forgiving mode boundaries; sign at exactly zero may take either
# value, matching the tolerance semantics used everywhere else
EDGE = 0.0


def _constraint_modes(con, n):
    """List of modes; a mode is (ub_rows, eq_rows, box) with rows as
    (coeff dict, rhs) meaning <= rhs / = rhs, box as var -> (lo, hi)."""
    if con.kind == "relu":
        return [
            ([({con.b: -1.0}, EDGE)], [({con.f: 1.0, con.b: -1.0}, 0.0)], {}),
            ([({con.b: 1.0}, EDGE)], [({con.f: 1.0}, 0.0)], {}),
        ]
    if con.kind == "leaky":
        return [
            ([({con.b: -1.0}, EDGE)], [({con.f: 1.0, con.b: -1.0}, 0.0)], {}),
            ([({con.b: 1.0}, EDGE)], [({con.f: 1.0, con.b: -con.alpha}, 0.0)], {}),
        ]
    if con.kind == "abs":
        return [
            ([({con.b: -1.0}, EDGE)], [({con.f: 1.0, con.b: -1.0}, 0.0)], {}),
            ([({con.b: 1.0}, EDGE)], [({con.f: 1.0, con.b: 1.0}, 0.0)], {}),
        ]
    if con.kind == "sign":
        return [
            ([({con.b: -1.0}, EDGE)], [], {con.f: (1.0, 1.0)}),
            ([({con.b: 1.0}, EDGE)], [], {con.f: (-1.0, -1.0)}),
        ]
    if con.kind == "max":
        modes = []
        for i, xi in enumerate(con.xs):
            ub = []
            for j, xj in enumerate(con.xs):
                if j != i:
                    row = {xj: 1.0}
                    row[xi] = row.get(xi, 0.0) - 1.0
                    if row:
                        ub.append((row, 0.0))
            modes.append((ub, [({con.f: 1.0, xi: -1.0}, 0.0)], {}))
        return modes
    if con.kind == "disj":
        modes = []
        for d in con.disjuncts:
            ub = []
            eq = []
            for expr, rel, rhs in d.inequalities:
                dd = rhs - expr.constant
                if rel is Relation.LE:
                    ub.append((dict(expr.terms), dd))
                elif rel is Relation.GE:
                    ub.append(({v: -c for v, c in expr.terms.items()}, -dd))
                else:
                    eq.append((dict(expr.terms), dd))
            modes.append((ub, eq, dict(d.var_bounds)))
        return modes
    raise ValueError(f"unknown constraint kind {con.kind}")


def _lp_feasible(n, box, ub_rows, eq_rows):
    for lo, hi in box:
        if lo > hi:
            return False, None
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for terms, rhs in ub_rows:
        if not terms:
            if 0.0 > rhs + 1e-9:
                return False, None
            continue
        row = np.zeros(n)
        for v, c in terms.items():
            row[v] += c
        A_ub.append(row)
        b_ub.append(rhs)
    for terms, rhs in eq_rows:
        if not terms:
            if abs(rhs) > 1e-9:
                return False, None
            continue
        row = np.zeros(n)
        for v, c in terms.items():
            row[v] += c
        A_eq.append(row)
        b_eq.append(rhs)
    if n == 0:
        return True, []
    res = linprog(
        c=np.zeros(n),
        A_ub=np.vstack(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.vstack(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=[(None if lo == -INF else lo, None if hi == INF else hi)
                for lo, hi in box],
        method="highs",
    )
    if res.status == 0:
        return True, list(res.x)
    if res.status == 2:
        return False, None
    raise RuntimeError(f"reference LP solve failed with status {res.status}")


def brute_force(query):
    """(sat, witness or None) by enumerating every mode combination."""
    n = query.num_variables
    base_box = [query.bounds.interval(v) for v in range(n)]
    base_ub, base_eq = [], []
    for e in query.equations:
        d = e.rhs - e.lhs.constant
        if e.relation is Relation.EQ:
            base_eq.append((dict(e.lhs.terms), d))
        elif e.relation is Relation.LE:
            base_ub.append((dict(e.lhs.terms), d))
        else:
            base_ub.append(({v: -c for v, c in e.lhs.terms.items()}, -d))

    all_modes = [_constraint_modes(con, n) for con in query.pl_constraints]
    for combo in itertools.product(*all_modes):
        box = list(base_box)
        ub = list(base_ub)
        eq = list(base_eq)
        for m_ub, m_eq, m_box in combo:
            ub.extend(m_ub)
            eq.extend(m_eq)
            for v, (lo, hi) in m_box.items():
                box[v] = (max(box[v][0], lo), min(box[v][1], hi))
        feasible, x = _lp_feasible(n, box, ub, eq)
        if feasible:
            return True, x
    return False, None
