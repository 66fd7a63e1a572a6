"""Query rewriting before search.

Pipeline: rewrite inequality rows to slack form and normalize the
piecewise-linear constraints, propagate bounds to a fixpoint, collapse
constraints whose phase is forced, merge syntactically equal variables,
eliminate fixed ones, and reindex. A report carries everything needed to
lift a satisfying assignment back to the original variable indices.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .core import (
    FEAS_TOL,
    INF,
    TIGHTEN_TOL,
    LinearExpression,
    Query,
    Relation,
    Side,
    TightenOutcome,
    _combine,
)

FIXPOINT_ROUND_LIMIT = 100

# rows are not used to tighten through near-zero coefficients
COEFF_EPS = 1e-9


@dataclass
class PreprocessReport:
    num_original_variables: int = 0
    eliminated_variables: dict[int, float] = field(default_factory=dict)
    merged_variables: dict[int, int] = field(default_factory=dict)
    index_mapping: dict[int, int] = field(default_factory=dict)
    collapsed_phases: dict[int, int] = field(default_factory=dict)
    fixpoint_rounds: int = 0
    infeasible: bool = False

    @property
    def collapsed_constraints(self) -> int:
        return len(self.collapsed_phases)


def lift_assignment(report: PreprocessReport, values) -> list[float]:
    """Assignment on the preprocessed query -> assignment on the original
    variable indices."""
    out = []
    for v in range(report.num_original_variables):
        r = v
        while r in report.merged_variables:
            r = report.merged_variables[r]
        if r in report.eliminated_variables:
            out.append(report.eliminated_variables[r])
        else:
            out.append(float(values[report.index_mapping[r]]))
    return out


def normalize_pl_constraints(query: Query) -> None:
    """Rewrite inequality rows as equalities over fresh slacks and let every
    constraint introduce its aux variables and entailed equations."""
    for eq in query.equations:
        if eq.relation is Relation.EQ:
            continue
        s = query.add_variable(lower=0.0)
        eq.lhs.add_term(s, 1.0 if eq.relation is Relation.LE else -1.0)
        eq.relation = Relation.EQ
    for con in query.pl_constraints:
        con.normalize(query)


def _row_tighten(query: Query, eq) -> tuple[TightenOutcome, list[int]]:
    """Interval-arithmetic pass over one equality row. Returns the combined
    outcome and the variables whose bounds changed."""
    store = query.bounds
    items = list(eq.lhs.terms.items())
    d = eq.rhs - eq.lhs.constant
    out = TightenOutcome.NO_CHANGE
    changed = []
    for j, (var, coeff) in enumerate(items):
        if abs(coeff) < COEFF_EPS:
            continue
        # range of the partner sum
        s_lo = 0.0
        s_hi = 0.0
        for k, (v, c) in enumerate(items):
            if k == j:
                continue
            lo, hi = store.interval(v)
            if c > 0:
                s_lo += c * lo if lo > -INF else -INF
                s_hi += c * hi if hi < INF else INF
            else:
                s_lo += c * hi if hi < INF else -INF
                s_hi += c * lo if lo > -INF else INF
            if s_lo == -INF and s_hi == INF:
                break
        cand_a = (d - s_lo) / coeff if s_lo > -INF else None
        cand_b = (d - s_hi) / coeff if s_hi < INF else None
        upper_cand = cand_a if coeff > 0 else cand_b
        lower_cand = cand_b if coeff > 0 else cand_a
        for side, cand in ((Side.UPPER, upper_cand), (Side.LOWER, lower_cand)):
            if cand is None:
                continue
            step = store.tighten(var, side, cand)
            out = _combine(out, step)
            if step is not TightenOutcome.NO_CHANGE:
                changed.append(var)
            if step is TightenOutcome.INFEASIBLE:
                return out, changed
    return out, changed


def propagate_bounds_fixpoint(query: Query,
                              round_limit: int = FIXPOINT_ROUND_LIMIT,
                              ) -> tuple[TightenOutcome, int]:
    """Alternate row and constraint tightening until a fixpoint, driven by
    per-variable dirty sets. Returns (outcome, rounds used)."""
    store = query.bounds
    eq_rows = [eq for eq in query.equations if eq.relation is Relation.EQ]
    eqs_of_var: dict[int, list[int]] = {}
    cons_of_var: dict[int, list[int]] = {}
    for i, eq in enumerate(eq_rows):
        for v in eq.lhs.terms:
            eqs_of_var.setdefault(v, []).append(i)
    for i, con in enumerate(query.pl_constraints):
        for v in con.variables():
            cons_of_var.setdefault(v, []).append(i)

    dirty_eqs = set(range(len(eq_rows)))
    dirty_cons = set(range(len(query.pl_constraints)))
    overall = TightenOutcome.NO_CHANGE
    rounds = 0
    while (dirty_eqs or dirty_cons) and rounds < round_limit:
        rounds += 1
        changed_vars: set[int] = set()
        for i in sorted(dirty_eqs):
            step, changed = _row_tighten(query, eq_rows[i])
            overall = _combine(overall, step)
            changed_vars.update(changed)
            if step is TightenOutcome.INFEASIBLE:
                return TightenOutcome.INFEASIBLE, rounds
        for i in sorted(dirty_cons):
            con = query.pl_constraints[i]
            before = {v: store.interval(v) for v in con.variables()}
            step = con.propagate(store)
            overall = _combine(overall, step)
            if step is TightenOutcome.INFEASIBLE:
                return TightenOutcome.INFEASIBLE, rounds
            if step is not TightenOutcome.NO_CHANGE:
                for v, iv in before.items():
                    if store.interval(v) != iv:
                        changed_vars.add(v)
        dirty_eqs = set()
        dirty_cons = set()
        for v in changed_vars:
            dirty_eqs.update(eqs_of_var.get(v, ()))
            dirty_cons.update(cons_of_var.get(v, ()))
    return overall, rounds


def collapse_fixed_constraints(query: Query, report: PreprocessReport) -> int:
    """Remove constraints with exactly one viable case, applying that case's
    bound updates. Aux equations stay; the updates make them enforce the
    surviving piece."""
    kept = []
    collapsed = 0
    for con in query.pl_constraints:
        viable = con.viable_cases(query.bounds)
        if not viable:
            report.infeasible = True
            kept.append(con)
            continue
        if len(viable) > 1:
            kept.append(con)
            continue
        case = viable[0]
        for upd in case.updates:
            if upd.apply(query.bounds) is TightenOutcome.INFEASIBLE:
                report.infeasible = True
        report.collapsed_phases[con.id] = case.case_index
        collapsed += 1
    query.pl_constraints = kept
    return collapsed


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, v: int) -> int:
        root = v
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(v, v) != v:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        rep, other = min(ra, rb), max(ra, rb)
        self.parent[other] = rep
        return rep


def merge_and_eliminate(query: Query, report: PreprocessReport) -> Query:
    """Merge x - y = 0 pairs, substitute fixed variables that no constraint
    references, and reindex densely."""
    store = query.bounds
    uf = _UnionFind()
    dead_rows: set[int] = set()

    for i, eq in enumerate(query.equations):
        terms = eq.lhs.terms
        if len(terms) != 2 or eq.rhs - eq.lhs.constant != 0.0:
            continue
        (va, ca), (vb, cb) = terms.items()
        if {ca, cb} != {1.0, -1.0}:
            continue
        uf.union(va, vb)
        dead_rows.add(i)

    # intersect bounds onto the representative of every merge class
    classes: dict[int, list[int]] = {}
    for v in set(uf.parent):
        classes.setdefault(uf.find(v), []).append(v)
    for rep, members in classes.items():
        lo, hi = store.interval(rep)
        for m in members:
            mlo, mhi = store.interval(m)
            lo, hi = max(lo, mlo), min(hi, mhi)
        if lo > hi + FEAS_TOL:
            report.infeasible = True
        if store.tighten(rep, Side.LOWER, lo) is TightenOutcome.INFEASIBLE:
            report.infeasible = True
        if store.tighten(rep, Side.UPPER, hi) is TightenOutcome.INFEASIBLE:
            report.infeasible = True

    # rewrite rows onto representatives
    rows: list[tuple[dict[int, float], float]] = []
    for i, eq in enumerate(query.equations):
        if i in dead_rows:
            continue
        terms: dict[int, float] = {}
        for v, c in eq.lhs.terms.items():
            r = uf.find(v)
            terms[r] = terms.get(r, 0.0) + c
            if terms[r] == 0.0:
                del terms[r]
        rows.append((terms, eq.rhs - eq.lhs.constant))
    for con in query.pl_constraints:
        con.remap_variables(uf.find)

    pl_referenced: set[int] = set()
    for con in query.pl_constraints:
        pl_referenced.update(con.variables())

    roots = [v for v in range(query.num_variables) if uf.find(v) == v]
    eliminated: dict[int, float] = {}
    for v in roots:
        lo, hi = store.interval(v)
        if hi - lo <= TIGHTEN_TOL and v not in pl_referenced:
            eliminated[v] = (lo + hi) / 2.0

    survivors = [v for v in roots if v not in eliminated]
    new_index = {v: i for i, v in enumerate(survivors)}

    out = Query(len(survivors))
    for v in survivors:
        lo, hi = store.interval(v)
        if lo > -INF:
            out.bounds.tighten(new_index[v], Side.LOWER, lo)
        if hi < INF:
            out.bounds.tighten(new_index[v], Side.UPPER, hi)
    for terms, d in rows:
        lhs = LinearExpression({})
        rhs = d
        for v, c in terms.items():
            if v in eliminated:
                rhs -= c * eliminated[v]
            else:
                lhs.add_term(new_index[v], c)
        if not lhs.terms:
            if abs(rhs) > FEAS_TOL:
                report.infeasible = True
            continue
        out.add_equation(lhs, Relation.EQ, rhs)
    for con in query.pl_constraints:
        con.remap_variables(lambda v: new_index[v])
        out.add_constraint(con)
    out.input_variables = [new_index[uf.find(v)] for v in query.input_variables
                           if uf.find(v) not in eliminated]
    out.output_variables = [new_index[uf.find(v)] for v in query.output_variables
                            if uf.find(v) not in eliminated]

    report.merged_variables = {v: uf.find(v) for v in range(query.num_variables)
                               if uf.find(v) != v}
    report.eliminated_variables = eliminated
    report.index_mapping = new_index
    out.index_mapping = dict(new_index)
    if store.is_infeasible():
        report.infeasible = True
    return out


def preprocess(query: Query, proof_mode: bool = False,
               ) -> tuple[Query, PreprocessReport]:
    """Full pipeline on a copy of the input; the original query is kept
    intact for result checking.

    In proof mode only normalization runs: later passes would tighten
    bounds or renumber equations without leaving a certifiable trace.
    """
    q = copy.deepcopy(query)
    report = PreprocessReport(num_original_variables=query.num_variables)
    normalize_pl_constraints(q)
    if proof_mode:
        report.index_mapping = {v: v for v in range(q.num_variables)}
        report.infeasible = q.bounds.is_infeasible()
        return q, report

    if q.bounds.is_infeasible():
        report.infeasible = True
        report.index_mapping = {v: v for v in range(q.num_variables)}
        return q, report

    for _ in range(len(q.pl_constraints) + 1):
        outcome, rounds = propagate_bounds_fixpoint(q)
        report.fixpoint_rounds += rounds
        if outcome is TightenOutcome.INFEASIBLE:
            report.infeasible = True
            break
        if collapse_fixed_constraints(q, report) == 0 or report.infeasible:
            break

    if report.infeasible:
        report.index_mapping = {v: v for v in range(q.num_variables)}
        return q, report

    q = merge_and_eliminate(q, report)
    if not report.infeasible:
        outcome, rounds = propagate_bounds_fixpoint(q)
        report.fixpoint_rounds += rounds
        if outcome is TightenOutcome.INFEASIBLE:
            report.infeasible = True
    return q, report
