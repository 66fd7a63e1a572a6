"""Core types: bounds with a backtracking trail, linear equations,
piecewise-linear constraints and their case splits, queries, results."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

FEAS_TOL = 1e-6      # semantic satisfaction tolerance
TIGHTEN_TOL = 1e-9   # a bound must improve by more than this to count

INF = math.inf


class Side(Enum):
    LOWER = "lo"
    UPPER = "up"


class Relation(Enum):
    EQ = "="
    LE = "<="
    GE = ">="


class TightenOutcome(Enum):
    TIGHTENED = "tightened"
    NO_CHANGE = "no_change"
    INFEASIBLE = "infeasible"


@dataclass
class LinearExpression:
    """Sum of coeff * variable plus a constant, terms keyed by variable index."""

    terms: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0

    def evaluate(self, values) -> float:
        return self.constant + sum(c * values[v] for v, c in self.terms.items())

    def add_term(self, var: int, coeff: float) -> None:
        if coeff == 0.0:
            return
        new = self.terms.get(var, 0.0) + coeff
        if new == 0.0:
            self.terms.pop(var, None)
        else:
            self.terms[var] = new

    def copy(self) -> "LinearExpression":
        return LinearExpression(dict(self.terms), self.constant)

    def variables(self):
        return self.terms.keys()


@dataclass
class Equation:
    """lhs <relation> rhs. The lhs constant is kept at zero; constants fold into rhs."""

    id: int
    lhs: LinearExpression
    relation: Relation
    rhs: float

    def residual(self, values) -> float:
        """Signed violation: 0 when satisfied, positive otherwise."""
        val = self.lhs.evaluate(values)
        if self.relation is Relation.EQ:
            return abs(val - self.rhs)
        if self.relation is Relation.LE:
            return max(0.0, val - self.rhs)
        return max(0.0, self.rhs - val)


class BoundStore:
    """Per-variable lower/upper bounds with context push/pop.

    Backtracking is O(changes since push): every accepted tightening records
    the displaced value on a trail, and pop rewinds the trail. Tightenings
    that do not improve a bound by more than TIGHTEN_TOL are dropped, so the
    trail never fills with no-ops. Crossing bounds (lower > upper + FEAS_TOL)
    mark the store infeasible; the mark rewinds with the trail.
    """

    def __init__(self, num_vars: int = 0):
        self._lower = [-INF] * num_vars
        self._upper = [INF] * num_vars
        self._trail: list[tuple[int, Side, float]] = []
        self._marks: list[int] = []
        self._infeasible_at: int | None = None  # trail length when marked

    @property
    def num_vars(self) -> int:
        return len(self._lower)

    @property
    def level(self) -> int:
        return len(self._marks)

    def add_variable(self, lower: float = -INF, upper: float = INF) -> int:
        if self._marks:
            raise ValueError("cannot add variables inside a pushed context")
        self._lower.append(lower)
        self._upper.append(upper)
        return len(self._lower) - 1

    def lower(self, var: int) -> float:
        return self._lower[var]

    def upper(self, var: int) -> float:
        return self._upper[var]

    def is_infeasible(self) -> bool:
        return self._infeasible_at is not None

    def push_context(self) -> int:
        self._marks.append(len(self._trail))
        return len(self._marks)

    def pop_context(self, target_level: int = -1) -> None:
        """Pop back to target_level (default: one level up)."""
        if target_level < 0:
            target_level = len(self._marks) - 1
        if target_level < 0 or target_level > len(self._marks):
            raise ValueError(f"bad pop target {target_level}")
        while len(self._marks) > target_level:
            mark = self._marks.pop()
            while len(self._trail) > mark:
                var, side, old = self._trail.pop()
                if side is Side.LOWER:
                    self._lower[var] = old
                else:
                    self._upper[var] = old
            if self._infeasible_at is not None and self._infeasible_at > mark:
                self._infeasible_at = None

    def tighten(self, var: int, side: Side, value: float) -> TightenOutcome:
        if side is Side.LOWER:
            old = self._lower[var]
            if value <= old + TIGHTEN_TOL:
                return TightenOutcome.NO_CHANGE
            self._trail.append((var, side, old))
            self._lower[var] = value
            if value > self._upper[var] + FEAS_TOL:
                if self._infeasible_at is None:
                    self._infeasible_at = len(self._trail)
                return TightenOutcome.INFEASIBLE
        else:
            old = self._upper[var]
            if value >= old - TIGHTEN_TOL:
                return TightenOutcome.NO_CHANGE
            self._trail.append((var, side, old))
            self._upper[var] = value
            if value < self._lower[var] - FEAS_TOL:
                if self._infeasible_at is None:
                    self._infeasible_at = len(self._trail)
                return TightenOutcome.INFEASIBLE
        return TightenOutcome.TIGHTENED

    def interval(self, var: int) -> tuple[float, float]:
        return self._lower[var], self._upper[var]

    def copy(self) -> "BoundStore":
        """Flat copy of the current state; the trail is not carried over."""
        out = BoundStore(0)
        out._lower = list(self._lower)
        out._upper = list(self._upper)
        out._infeasible_at = self._infeasible_at
        return out


@dataclass(frozen=True)
class BoundUpdate:
    var: int
    side: Side
    value: float

    def apply(self, store: BoundStore) -> TightenOutcome:
        return store.tighten(self.var, self.side, self.value)


@dataclass
class CaseSplit:
    """One case of a piecewise-linear constraint: a pure conjunction of bound updates."""

    constraint_id: int
    case_index: int
    updates: list[BoundUpdate]

    def viable(self, store: BoundStore) -> bool:
        """Would applying the updates keep every interval nonempty?"""
        for u in self.updates:
            lo, hi = store.interval(u.var)
            if u.side is Side.LOWER:
                lo = max(lo, u.value)
            else:
                hi = min(hi, u.value)
            if lo > hi + FEAS_TOL:
                return False
        return True


class PLConstraint:
    """Base class for piecewise-linear constraints.

    Constraints are built un-normalized; the preprocessor allocates aux
    variables and the defining equations (normalize()), after which cases()
    is available. Cases are pure bound updates: together with the aux
    equations their union is equisatisfiable with the exact semantics.
    """

    kind = "pl"

    def __init__(self, cid: int):
        self.id = cid
        self.aux: list[int] = []
        self.normalized = False

    def variables(self) -> list[int]:
        raise NotImplementedError

    def normalize(self, query: "Query") -> None:
        """Allocate aux variables and equations on the query; idempotent."""
        raise NotImplementedError

    def cases(self) -> list[CaseSplit]:
        if not self.normalized:
            raise ValueError(f"constraint {self.id} not normalized")
        return self._cases()

    def _cases(self) -> list[CaseSplit]:
        raise NotImplementedError

    def satisfied_by(self, values, tol: float = FEAS_TOL) -> bool:
        return self.violation(values) <= tol

    def violation(self, values) -> float:
        """Semantic residual: 0 on exact satisfaction."""
        raise NotImplementedError

    def viable_cases(self, store: BoundStore) -> list[CaseSplit]:
        return [c for c in self.cases() if c.viable(store)]

    def phase_fixed(self, store: BoundStore) -> int | None:
        """Case index when current bounds leave exactly one viable case."""
        viable = self.viable_cases(store)
        if len(viable) == 1:
            return viable[0].case_index
        return None

    def propagate(self, store: BoundStore) -> TightenOutcome:
        """Kind-specific interval tightening. Returns the strongest outcome seen."""
        return TightenOutcome.NO_CHANGE

    def remap_variables(self, mapping) -> None:
        """Apply an old->new index mapping to every referenced variable."""
        raise NotImplementedError


def _combine(outcome: TightenOutcome, step: TightenOutcome) -> TightenOutcome:
    if TightenOutcome.INFEASIBLE in (outcome, step):
        return TightenOutcome.INFEASIBLE
    if TightenOutcome.TIGHTENED in (outcome, step):
        return TightenOutcome.TIGHTENED
    return TightenOutcome.NO_CHANGE


class ReluConstraint(PLConstraint):
    """f = max(0, b), aux a = f - b."""

    kind = "relu"

    def __init__(self, cid: int, f: int, b: int):
        super().__init__(cid)
        self.f = f
        self.b = b

    def variables(self):
        return [self.f, self.b] + self.aux

    def normalize(self, query: "Query") -> None:
        if self.normalized:
            return
        a = query.add_variable(lower=0.0)
        self.aux = [a]
        lhs = LinearExpression({self.f: 1.0, self.b: -1.0, a: -1.0})
        query.add_equation(lhs, Relation.EQ, 0.0)
        query.bounds.tighten(self.f, Side.LOWER, 0.0)
        self.normalized = True

    def _cases(self):
        a = self.aux[0]
        return [
            CaseSplit(self.id, 0, [BoundUpdate(a, Side.UPPER, 0.0)]),       # active: f = b
            CaseSplit(self.id, 1, [BoundUpdate(self.f, Side.UPPER, 0.0)]),  # inactive: f = 0
        ]

    def violation(self, values) -> float:
        return abs(values[self.f] - max(0.0, values[self.b]))

    def propagate(self, store: BoundStore) -> TightenOutcome:
        out = TightenOutcome.NO_CHANGE
        lb, ub = store.interval(self.b)
        out = _combine(out, store.tighten(self.f, Side.LOWER, max(0.0, lb)))
        out = _combine(out, store.tighten(self.f, Side.UPPER, max(0.0, ub)))
        lf, uf = store.interval(self.f)
        # b <= f always; and f > 0 or f = 0 pin b's side
        out = _combine(out, store.tighten(self.b, Side.UPPER, uf))
        if uf <= 0.0:
            out = _combine(out, store.tighten(self.b, Side.UPPER, 0.0))
        if lf > FEAS_TOL:
            out = _combine(out, store.tighten(self.b, Side.LOWER, lf))
        return out

    def remap_variables(self, mapping):
        self.f = mapping(self.f)
        self.b = mapping(self.b)
        self.aux = [mapping(a) for a in self.aux]


class LeakyReluConstraint(PLConstraint):
    """f = b if b >= 0 else alpha * b, with 0 < alpha < 1.

    Aux: a = f - b >= 0 and c = f - alpha*b >= 0.
    """

    kind = "leaky"

    def __init__(self, cid: int, f: int, b: int, alpha: float):
        super().__init__(cid)
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"leaky slope must be in (0, 1), got {alpha}")
        self.f = f
        self.b = b
        self.alpha = alpha

    def variables(self):
        return [self.f, self.b] + self.aux

    def normalize(self, query: "Query") -> None:
        if self.normalized:
            return
        a = query.add_variable(lower=0.0)
        c = query.add_variable(lower=0.0)
        self.aux = [a, c]
        query.add_equation(
            LinearExpression({self.f: 1.0, self.b: -1.0, a: -1.0}), Relation.EQ, 0.0)
        query.add_equation(
            LinearExpression({self.f: 1.0, self.b: -self.alpha, c: -1.0}), Relation.EQ, 0.0)
        self.normalized = True

    def _cases(self):
        a, c = self.aux
        return [
            CaseSplit(self.id, 0, [BoundUpdate(a, Side.UPPER, 0.0),
                                   BoundUpdate(self.b, Side.LOWER, 0.0)]),  # active: f = b
            CaseSplit(self.id, 1, [BoundUpdate(c, Side.UPPER, 0.0),
                                   BoundUpdate(self.b, Side.UPPER, 0.0)]),  # inactive: f = alpha b
        ]

    def _fwd(self, x: float) -> float:
        return x if x >= 0.0 else self.alpha * x

    def _inv(self, y: float) -> float:
        return y if y >= 0.0 else y / self.alpha

    def violation(self, values) -> float:
        return abs(values[self.f] - self._fwd(values[self.b]))

    def propagate(self, store: BoundStore) -> TightenOutcome:
        # monotone bijection: both directions are interval maps
        out = TightenOutcome.NO_CHANGE
        lb, ub = store.interval(self.b)
        out = _combine(out, store.tighten(self.f, Side.LOWER, self._fwd(lb) if lb > -INF else -INF))
        out = _combine(out, store.tighten(self.f, Side.UPPER, self._fwd(ub) if ub < INF else INF))
        lf, uf = store.interval(self.f)
        if lf > -INF:
            out = _combine(out, store.tighten(self.b, Side.LOWER, self._inv(lf)))
        if uf < INF:
            out = _combine(out, store.tighten(self.b, Side.UPPER, self._inv(uf)))
        return out

    def remap_variables(self, mapping):
        self.f = mapping(self.f)
        self.b = mapping(self.b)
        self.aux = [mapping(a) for a in self.aux]


class AbsConstraint(PLConstraint):
    """f = |b|. Aux: p = f - b >= 0, n = f + b >= 0."""

    kind = "abs"

    def __init__(self, cid: int, f: int, b: int):
        super().__init__(cid)
        self.f = f
        self.b = b

    def variables(self):
        return [self.f, self.b] + self.aux

    def normalize(self, query: "Query") -> None:
        if self.normalized:
            return
        p = query.add_variable(lower=0.0)
        n = query.add_variable(lower=0.0)
        self.aux = [p, n]
        query.add_equation(
            LinearExpression({self.f: 1.0, self.b: -1.0, p: -1.0}), Relation.EQ, 0.0)
        query.add_equation(
            LinearExpression({self.f: 1.0, self.b: 1.0, n: -1.0}), Relation.EQ, 0.0)
        query.bounds.tighten(self.f, Side.LOWER, 0.0)
        self.normalized = True

    def _cases(self):
        p, n = self.aux
        return [
            CaseSplit(self.id, 0, [BoundUpdate(p, Side.UPPER, 0.0)]),  # positive: f = b
            CaseSplit(self.id, 1, [BoundUpdate(n, Side.UPPER, 0.0)]),  # negative: f = -b
        ]

    def violation(self, values) -> float:
        return abs(values[self.f] - abs(values[self.b]))

    def propagate(self, store: BoundStore) -> TightenOutcome:
        out = TightenOutcome.NO_CHANGE
        lb, ub = store.interval(self.b)
        # |b| over [lb, ub]
        if lb >= 0.0:
            lo, hi = lb, ub
        elif ub <= 0.0:
            lo, hi = -ub, -lb
        else:
            lo, hi = 0.0, max(ub, -lb)
        out = _combine(out, store.tighten(self.f, Side.LOWER, lo))
        if hi < INF:
            out = _combine(out, store.tighten(self.f, Side.UPPER, hi))
        uf = store.upper(self.f)
        if uf < INF:
            out = _combine(out, store.tighten(self.b, Side.UPPER, uf))
            out = _combine(out, store.tighten(self.b, Side.LOWER, -uf))
        return out

    def remap_variables(self, mapping):
        self.f = mapping(self.f)
        self.b = mapping(self.b)
        self.aux = [mapping(a) for a in self.aux]


class SignConstraint(PLConstraint):
    """f = +1 if b >= 0 else -1. No aux; cases are bound-only.

    satisfied_by treats |b| <= tol as accepting either output value, since an
    assignment that tiny a nudge away would be exact; evaluation elsewhere
    always uses sign(0) = +1.
    """

    kind = "sign"

    def __init__(self, cid: int, f: int, b: int):
        super().__init__(cid)
        self.f = f
        self.b = b

    def variables(self):
        return [self.f, self.b]

    def normalize(self, query: "Query") -> None:
        if self.normalized:
            return
        query.bounds.tighten(self.f, Side.LOWER, -1.0)
        query.bounds.tighten(self.f, Side.UPPER, 1.0)
        self.normalized = True

    def _cases(self):
        return [
            CaseSplit(self.id, 0, [BoundUpdate(self.f, Side.LOWER, 1.0),
                                   BoundUpdate(self.b, Side.LOWER, 0.0)]),   # positive
            CaseSplit(self.id, 1, [BoundUpdate(self.f, Side.UPPER, -1.0),
                                   BoundUpdate(self.b, Side.UPPER, 0.0)]),   # negative
        ]

    def violation(self, values) -> float:
        b = values[self.b]
        f = values[self.f]
        if b > FEAS_TOL:
            return abs(f - 1.0)
        if b < -FEAS_TOL:
            return abs(f + 1.0)
        return min(abs(f - 1.0), abs(f + 1.0))

    def propagate(self, store: BoundStore) -> TightenOutcome:
        out = TightenOutcome.NO_CHANGE
        out = _combine(out, store.tighten(self.f, Side.LOWER, -1.0))
        out = _combine(out, store.tighten(self.f, Side.UPPER, 1.0))
        lb, ub = store.interval(self.b)
        if lb >= 0.0:
            out = _combine(out, store.tighten(self.f, Side.LOWER, 1.0))
        if ub < 0.0:
            out = _combine(out, store.tighten(self.f, Side.UPPER, -1.0))
        lf, uf = store.interval(self.f)
        if lf > -1.0 + FEAS_TOL:
            out = _combine(out, store.tighten(self.b, Side.LOWER, 0.0))
        if uf < 1.0 - FEAS_TOL:
            out = _combine(out, store.tighten(self.b, Side.UPPER, 0.0))
        return out

    def remap_variables(self, mapping):
        self.f = mapping(self.f)
        self.b = mapping(self.b)


class MaxConstraint(PLConstraint):
    """f = max(x_1, ..., x_k). Aux: a_i = f - x_i >= 0; case i pins a_i = 0."""

    kind = "max"

    def __init__(self, cid: int, f: int, xs: list[int]):
        super().__init__(cid)
        if not xs:
            raise ValueError("max needs at least one input")
        self.f = f
        self.xs = list(xs)

    def variables(self):
        return [self.f] + self.xs + self.aux

    def normalize(self, query: "Query") -> None:
        if self.normalized:
            return
        self.aux = []
        for x in self.xs:
            a = query.add_variable(lower=0.0)
            self.aux.append(a)
            query.add_equation(
                LinearExpression({self.f: 1.0, x: -1.0, a: -1.0}), Relation.EQ, 0.0)
        self.normalized = True

    def _cases(self):
        return [
            CaseSplit(self.id, i, [BoundUpdate(a, Side.UPPER, 0.0)])
            for i, a in enumerate(self.aux)
        ]

    def violation(self, values) -> float:
        return abs(values[self.f] - max(values[x] for x in self.xs))

    def propagate(self, store: BoundStore) -> TightenOutcome:
        out = TightenOutcome.NO_CHANGE
        los = [store.lower(x) for x in self.xs]
        his = [store.upper(x) for x in self.xs]
        out = _combine(out, store.tighten(self.f, Side.LOWER, max(los)))
        if all(h < INF for h in his):
            out = _combine(out, store.tighten(self.f, Side.UPPER, max(his)))
        uf = store.upper(self.f)
        if uf < INF:
            for x in self.xs:
                out = _combine(out, store.tighten(x, Side.UPPER, uf))
        return out

    def remap_variables(self, mapping):
        self.f = mapping(self.f)
        self.xs = [mapping(x) for x in self.xs]
        self.aux = [mapping(a) for a in self.aux]


@dataclass
class Disjunct:
    """One disjunct: interval restrictions per variable, plus any linear
    inequalities not yet rewritten into slack-variable bounds."""

    var_bounds: dict[int, tuple[float, float]] = field(default_factory=dict)
    inequalities: list[tuple[LinearExpression, Relation, float]] = field(default_factory=list)

    def restrict(self, var: int, lo: float, hi: float) -> None:
        old_lo, old_hi = self.var_bounds.get(var, (-INF, INF))
        self.var_bounds[var] = (max(old_lo, lo), min(old_hi, hi))


class DisjunctionConstraint(PLConstraint):
    """At least one disjunct holds. Branch-only: one case per disjunct."""

    kind = "disj"

    def __init__(self, cid: int, disjuncts: list[Disjunct]):
        super().__init__(cid)
        if not disjuncts:
            raise ValueError("disjunction needs at least one disjunct")
        self.disjuncts = disjuncts

    def variables(self):
        seen = []
        for d in self.disjuncts:
            for v in d.var_bounds:
                if v not in seen:
                    seen.append(v)
            for expr, _, _ in d.inequalities:
                for v in expr.variables():
                    if v not in seen:
                        seen.append(v)
        return seen + self.aux

    def normalize(self, query: "Query") -> None:
        """Rewrite every raw inequality into a slack-variable bound.

        sum c x <= d becomes sum c x + s = d with the disjunct requiring
        s >= 0; the slack is globally unbounded so other disjuncts are
        unaffected.
        """
        if self.normalized:
            return
        for d in self.disjuncts:
            for expr, rel, rhs in d.inequalities:
                if rel is Relation.EQ:
                    # equality splits into two slack bounds
                    s = query.add_variable()
                    self.aux.append(s)
                    lhs = expr.copy()
                    lhs.add_term(s, 1.0)
                    query.add_equation(lhs, Relation.EQ, rhs)
                    d.restrict(s, 0.0, 0.0)
                    continue
                s = query.add_variable()
                self.aux.append(s)
                lhs = expr.copy()
                if rel is Relation.LE:
                    lhs.add_term(s, 1.0)
                else:
                    lhs.add_term(s, -1.0)
                query.add_equation(lhs, Relation.EQ, rhs)
                d.restrict(s, 0.0, INF)
            d.inequalities = []
        self.normalized = True

    def _cases(self):
        out = []
        for i, d in enumerate(self.disjuncts):
            updates = []
            for var in sorted(d.var_bounds):
                lo, hi = d.var_bounds[var]
                if lo > -INF:
                    updates.append(BoundUpdate(var, Side.LOWER, lo))
                if hi < INF:
                    updates.append(BoundUpdate(var, Side.UPPER, hi))
            out.append(CaseSplit(self.id, i, updates))
        return out

    def violation(self, values) -> float:
        best = INF
        for d in self.disjuncts:
            worst = 0.0
            for var, (lo, hi) in d.var_bounds.items():
                worst = max(worst, lo - values[var], values[var] - hi)
            for expr, rel, rhs in d.inequalities:
                worst = max(worst, Equation(-1, expr, rel, rhs).residual(values))
            best = min(best, worst)
        return max(0.0, best)

    def propagate(self, store: BoundStore) -> TightenOutcome:
        """Hull of the viable disjuncts, per variable."""
        if not self.normalized:
            return TightenOutcome.NO_CHANGE
        viable = self.viable_cases(store)
        if not viable:
            # every disjunct clashes with current bounds; the store itself is
            # untouched, callers act on the outcome
            return TightenOutcome.INFEASIBLE
        out = TightenOutcome.NO_CHANGE
        mentioned = set()
        for d in self.disjuncts:
            mentioned.update(d.var_bounds)
        live = [self.disjuncts[c.case_index] for c in viable]
        for var in sorted(mentioned):
            lo_hull = INF
            hi_hull = -INF
            cur_lo, cur_hi = store.interval(var)
            for d in live:
                lo, hi = d.var_bounds.get(var, (-INF, INF))
                lo_hull = min(lo_hull, max(lo, cur_lo))
                hi_hull = max(hi_hull, min(hi, cur_hi))
            if lo_hull > -INF:
                out = _combine(out, store.tighten(var, Side.LOWER, lo_hull))
            if hi_hull < INF:
                out = _combine(out, store.tighten(var, Side.UPPER, hi_hull))
        return out

    def remap_variables(self, mapping):
        for d in self.disjuncts:
            d.var_bounds = {mapping(v): bb for v, bb in d.var_bounds.items()}
            for expr, _, _ in d.inequalities:
                expr.terms = {mapping(v): c for v, c in expr.terms.items()}
        self.aux = [mapping(a) for a in self.aux]


class Query:
    """A verification query: variables with bounds, linear equations,
    piecewise-linear constraints, and designated input/output variables."""

    def __init__(self, num_variables: int = 0):
        self.bounds = BoundStore(num_variables)
        self.equations: list[Equation] = []
        self.pl_constraints: list[PLConstraint] = []
        self.input_variables: list[int] = []
        self.output_variables: list[int] = []
        self.index_mapping: dict[int, int] | None = None

    @property
    def num_variables(self) -> int:
        return self.bounds.num_vars

    def add_variable(self, lower: float = -INF, upper: float = INF) -> int:
        return self.bounds.add_variable(lower, upper)

    def add_equation(self, lhs: LinearExpression, relation: Relation, rhs: float) -> Equation:
        eq = Equation(len(self.equations), lhs, relation, rhs)
        self.equations.append(eq)
        return eq

    def add_constraint(self, con: PLConstraint) -> PLConstraint:
        self.pl_constraints.append(con)
        return con

    def next_constraint_id(self) -> int:
        return max((c.id for c in self.pl_constraints), default=-1) + 1

    def set_lower(self, var: int, value: float) -> TightenOutcome:
        return self.bounds.tighten(var, Side.LOWER, value)

    def set_upper(self, var: int, value: float) -> TightenOutcome:
        return self.bounds.tighten(var, Side.UPPER, value)

    def constraint_by_id(self, cid: int) -> PLConstraint:
        for c in self.pl_constraints:
            if c.id == cid:
                return c
        raise KeyError(f"no constraint with id {cid}")


@dataclass
class Assignment:
    values: list[float]

    def satisfies(self, query: Query, tol: float = FEAS_TOL) -> bool:
        return not self.violations(query, tol)

    def violations(self, query: Query, tol: float = FEAS_TOL) -> list[str]:
        """Human-readable list of everything violated beyond tol."""
        out = []
        v = self.values
        for i in range(query.num_variables):
            lo, hi = query.bounds.interval(i)
            if v[i] < lo - tol:
                out.append(f"x{i} = {v[i]} below lower bound {lo}")
            if v[i] > hi + tol:
                out.append(f"x{i} = {v[i]} above upper bound {hi}")
        for eq in query.equations:
            r = eq.residual(v)
            if r > tol:
                out.append(f"equation {eq.id} violated by {r}")
        for con in query.pl_constraints:
            r = con.violation(v)
            if r > tol:
                out.append(f"{con.kind} constraint {con.id} violated by {r}")
        return out


class SolveStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    TIMEOUT = "timeout"
    UNKNOWN = "unknown"


@dataclass
class Stats:
    splits: int = 0
    pivots: int = 0
    time_ms: float = 0.0
    tightenings: int = 0
    extra: dict = field(default_factory=dict)


@dataclass
class SolveResult:
    status: SolveStatus
    assignment: Assignment | None = None
    proof_tree: object | None = None
    stats: Stats = field(default_factory=Stats)
