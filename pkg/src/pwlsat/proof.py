"""Unsatisfiability certificates: construction during search, and an
independent checker.

A certificate is a tree mirroring the case-split search. Internal nodes name
a constraint and have one child per case; each node carries lemmas (bound
facts derived from a piecewise-linear constraint, justified by an explained
premise); each leaf carries a row-multiplier ray whose combined equation is
violated by the bounds alone.

Everything the checker trusts is recomputed here from core types: split
updates are replayed onto a fresh bound store, lemma premises are re-derived
from their rays, conclusions re-derived from a fixed rule table, and leaf
rays re-evaluated by interval arithmetic. The checker never touches the
simplex or the search engine.

Explanations are sparse multiplier vectors over the (all-equality) rows.
Because rows are equalities, any linear combination is again an equality,
so explanations compose by plain elimination; the producer-side
BoundExplainer keeps every stored ray fully composed, meaning its combined
row references only bounds the checker can see at that point (ground bounds,
split updates, lemma conclusions). Producers verify before recording.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    INF,
    BoundStore,
    Equation,
    Query,
    Side,
    TightenOutcome,
)
from .preprocessor import preprocess

EPS_PROOF = 1e-6
NOISE = 1e-11  # combined-row coefficients at or below this are roundoff


# -- data ---------------------------------------------------------------------


@dataclass
class Explanation:
    """A claimed bound plus the row multipliers that imply it.

    Empty ray: the bound is taken straight from the store the checker holds
    (a ground bound, a split update, or an earlier lemma conclusion).
    """

    var: int
    side: Side
    value: float
    ray: dict[int, float] = field(default_factory=dict)


@dataclass
class Lemma:
    """One constraint-derived bound: rule tag plus the premise explanation.

    The conclusion is a function of (rule, premise, store), so the checker
    recomputes it; the recorded form is kept for producer-side bookkeeping.
    """

    rule: str
    premise: Explanation
    constraint_id: int | None = None
    conclusion: tuple[int, Side, float] | None = None


@dataclass
class ProofNode:
    split: tuple[int, int] | None = None  # (constraint id, case index); None = root
    lemmas: list[Lemma] = field(default_factory=list)
    children: list["ProofNode"] | None = None
    ray: dict[int, float] | None = None  # leaf contradiction

    @property
    def is_leaf(self) -> bool:
        return self.children is None


@dataclass
class CheckOutcome:
    certified: bool
    path: tuple[int, ...] | None = None
    reason: str | None = None


def certified() -> CheckOutcome:
    return CheckOutcome(True)


def rejected(path, reason: str) -> CheckOutcome:
    return CheckOutcome(False, tuple(path), reason)


class ProofParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# -- row combination ----------------------------------------------------------


def _equation_map(equations) -> dict[int, Equation]:
    return {eq.id: eq for eq in equations}


def combine_ray(eq_map: dict[int, Equation], ray: dict[int, float]):
    """Sum of multiplier * row as (coefficients, right-hand side).

    Rows are equalities, so the combination asserts coeffs . x = rhs.
    Unknown equation ids yield None (malformed ray).
    """
    coeffs: dict[int, float] = {}
    rhs = 0.0
    for eid, mult in ray.items():
        eq = eq_map.get(eid)
        if eq is None:
            return None
        for v, c in eq.lhs.terms.items():
            coeffs[v] = coeffs.get(v, 0.0) + mult * c
        rhs += mult * (eq.rhs - eq.lhs.constant)
    return coeffs, rhs


def _box_extreme(coeffs, store: BoundStore, maximize: bool, skip: int | None = None):
    """Max (or min) of coeffs . x over the store's box; None when an
    unbounded side is needed."""
    total = 0.0
    for v, c in coeffs.items():
        if v == skip or abs(c) <= NOISE:
            continue
        lo, hi = store.interval(v)
        pick = hi if (c > 0.0) == maximize else lo
        if pick == INF or pick == -INF:
            return None
        total += c * pick
    return total


# -- checking primitives ------------------------------------------------------


def check_bound(eq_map, store: BoundStore, expl: Explanation,
                eps: float = EPS_PROOF) -> bool:
    """Does the explanation imply its claimed bound over the store's box?

    Empty ray: the store itself must already carry a bound at least as
    tight. Otherwise the combined row is solved for the variable and the
    residual is bounded by interval arithmetic over the OTHER variables.
    """
    if not expl.ray:
        lo, hi = store.interval(expl.var)
        if expl.side is Side.UPPER:
            return hi <= expl.value + eps
        return lo >= expl.value - eps

    combined = combine_ray(eq_map, expl.ray)
    if combined is None:
        return False
    coeffs, rhs = combined
    cv = coeffs.get(expl.var, 0.0)
    if abs(cv) <= NOISE:
        return False
    # v = (rhs - residual) / cv; bound the residual over the box
    want_upper = expl.side is Side.UPPER
    residual_extreme = _box_extreme(
        coeffs, store, maximize=(want_upper == (cv > 0.0)) is False, skip=expl.var)
    # upper bound of v needs the residual minimized when cv > 0
    if residual_extreme is None:
        return False
    implied = (rhs - residual_extreme) / cv
    if want_upper:
        return implied <= expl.value + eps
    return implied >= expl.value - eps


def check_contradiction(eq_map, store: BoundStore, ray: dict[int, float],
                        eps: float = EPS_PROOF) -> bool:
    """True iff the combined row is violated by the box with margin eps."""
    if not ray:
        return False
    combined = combine_ray(eq_map, ray)
    if combined is None:
        return False
    coeffs, rhs = combined
    hi = _box_extreme(coeffs, store, maximize=True)
    if hi is not None and hi < rhs - eps:
        return True
    lo = _box_extreme(coeffs, store, maximize=False)
    return lo is not None and lo > rhs + eps


# -- lemma rules ---------------------------------------------------------------

# Each entry: premise predicate on (explanation, constraint) plus a
# conclusion builder (explanation, constraint, store) -> (var, side, value)
# or None if the rule does not apply. Rules follow relu normalization
# f - b - aux = 0, f >= 0, aux >= 0, and max normalization aux_i = f - x_i.


def _r1_pre(expl, con):
    return expl.var == con.b and expl.side is Side.UPPER and expl.value <= 0.0


def _r1_conc(expl, con, store):
    return (con.f, Side.UPPER, 0.0)


def _r2_pre(expl, con):
    return expl.var == con.b and expl.side is Side.LOWER and expl.value >= 0.0


def _r2_conc(expl, con, store):
    return (con.aux[0], Side.UPPER, 0.0)


def _r3_pre(expl, con):
    return expl.var == con.f and expl.side is Side.LOWER and expl.value > 0.0


def _r4_pre(expl, con):
    return expl.var == con.b and expl.side is Side.UPPER and expl.value >= 0.0


def _r4_conc(expl, con, store):
    return (con.f, Side.UPPER, expl.value)


def _maxu_pre(expl, con):
    return expl.var in con.xs and expl.side is Side.UPPER


def _maxu_conc(expl, con, store):
    best = expl.value
    for x in con.xs:
        if x == expl.var:
            continue
        hi = store.upper(x)
        if hi == INF:
            return None
        best = max(best, hi)
    return (con.f, Side.UPPER, best)


def _maxl_pre(expl, con):
    return expl.var in con.xs and expl.side is Side.LOWER


def _maxl_conc(expl, con, store):
    best = expl.value
    for x in con.xs:
        if x != expl.var:
            best = max(best, store.lower(x))
    return (con.f, Side.LOWER, best)


RULES = {
    "R1": ("relu", _r1_pre, _r1_conc),
    "R2": ("relu", _r2_pre, _r2_conc),
    "R3": ("relu", _r3_pre, _r2_conc),
    "R4": ("relu", _r4_pre, _r4_conc),
    "MAXU": ("max", _maxu_pre, _maxu_conc),
    "MAXL": ("max", _maxl_pre, _maxl_conc),
}


def rule_conclusions(query: Query, rule: str, expl: Explanation,
                     store: BoundStore):
    """All conclusions the rule soundly yields for this premise.

    The wire format does not carry the constraint id, so every constraint
    matching the premise variable contributes; applying the full sound set
    keeps the intended conclusion among them.
    """
    if rule not in RULES:
        return None
    kind, pre, conc = RULES[rule]
    if rule == "R3":
        pre = _r3_pre
    out = []
    for con in query.pl_constraints:
        if con.kind != kind or not con.aux:
            continue
        if not pre(expl, con):
            continue
        c = conc(expl, con, store)
        if c is not None:
            out.append(c)
    return out


# -- tree checking --------------------------------------------------------------


def check_proof_tree(query: Query, tree: ProofNode,
                     eps: float = EPS_PROOF) -> CheckOutcome:
    """Replay the tree against a freshly normalized copy of the query.

    Split updates and verified lemma conclusions are the only bound changes;
    every lemma premise must pass check_bound against the state so far, and
    every leaf must either be infeasible by bounds alone or carry a ray that
    check_contradiction accepts.
    """
    q, report = preprocess(query, proof_mode=True)
    eq_map = _equation_map(q.equations)
    store = q.bounds
    if tree.split is not None:
        return rejected((), "root must not carry a split")

    def visit(node: ProofNode, path) -> CheckOutcome:
        for i, lemma in enumerate(node.lemmas):
            if lemma.rule not in RULES:
                return rejected(path, f"lemma {i}: unknown rule {lemma.rule}")
            if not check_bound(eq_map, store, lemma.premise, eps):
                return rejected(path, f"lemma {i}: premise not implied")
            concs = rule_conclusions(q, lemma.rule, lemma.premise, store)
            if not concs:
                return rejected(path, f"lemma {i}: rule does not apply")
            for var, side, value in concs:
                store.tighten(var, side, value)

        if node.is_leaf:
            if store.is_infeasible():
                return certified()
            if node.ray and check_contradiction(eq_map, store, node.ray, eps):
                return certified()
            if node.ray is None:
                return rejected(path, "leaf without contradiction ray")
            return rejected(path, "leaf ray does not certify")

        if not node.children:
            return rejected(path, "internal node without children")
        first = node.children[0].split
        if first is None:
            return rejected(path, "child missing split label")
        cid = first[0]
        try:
            con = q.constraint_by_id(cid)
        except KeyError:
            return rejected(path, f"unknown constraint {cid}")
        cases = con.cases()
        if len(node.children) != len(cases):
            return rejected(
                path, f"constraint {cid} has {len(cases)} cases, "
                f"{len(node.children)} children")
        for i, child in enumerate(node.children):
            if child.split != (cid, i):
                return rejected(path + (i,), "split label out of position")
            level = store.push_context()
            for upd in cases[i].updates:
                upd.apply(store)
            out = visit(child, path + (i,))
            store.pop_context(level)
            if not out.certified:
                return out
        return certified()

    if report.infeasible:
        # normalization alone exposed the conflict; any tree certifies it
        return certified()
    return visit(tree, ())


# -- serialization --------------------------------------------------------------


def _ray_tokens(ray: dict[int, float]) -> str:
    items = sorted(ray.items())
    parts = [str(len(items))]
    for eid, coeff in items:
        parts.append(str(eid))
        parts.append(repr(float(coeff)))
    return " ".join(parts)


def _parse_ray(tokens, lineno) -> dict[int, float]:
    if not tokens or tokens[0] != "ray:":
        raise ProofParseError("expected 'ray:'", lineno)
    try:
        k = int(tokens[1])
    except (IndexError, ValueError):
        raise ProofParseError("bad ray length", lineno)
    if len(tokens) != 2 + 2 * k:
        raise ProofParseError(f"ray wants {k} entries", lineno)
    ray = {}
    for i in range(k):
        try:
            eid = int(tokens[2 + 2 * i])
            coeff = float(tokens[3 + 2 * i])
        except ValueError:
            raise ProofParseError("bad ray entry", lineno)
        ray[eid] = coeff
    return ray


def serialize_proof(tree: ProofNode) -> str:
    """Depth-first pre-order text form; children appear in case order."""
    lines = []

    def emit(node: ProofNode, path):
        lines.append("node" + "".join(f" {c}:{i}" for c, i in path))
        for lemma in node.lemmas:
            p = lemma.premise
            side = "upper" if p.side is Side.UPPER else "lower"
            lines.append(
                f"lemma {lemma.rule} {p.var} {side} {repr(float(p.value))} "
                f"ray: {_ray_tokens(p.ray)}")
        if node.is_leaf:
            lines.append(f"leaf ray: {_ray_tokens(node.ray or {})}")
        else:
            for child in node.children:
                emit(child, path + [child.split])

    emit(tree, [])
    return "\n".join(lines) + "\n"


def parse_proof(text: str) -> ProofNode:
    nodes: dict[tuple, ProofNode] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        tag = tokens[0]
        if tag == "node":
            path = []
            for tok in tokens[1:]:
                try:
                    cid, _, idx = tok.partition(":")
                    path.append((int(cid), int(idx)))
                except ValueError:
                    raise ProofParseError(f"bad split token {tok!r}", lineno)
            path = tuple(path)
            node = ProofNode(split=path[-1] if path else None)
            if path in nodes:
                raise ProofParseError("duplicate node", lineno)
            if path:
                parent = nodes.get(path[:-1])
                if parent is None:
                    raise ProofParseError("orphan node", lineno)
                if parent.children is None:
                    parent.children = []
                if len(parent.children) != path[-1][1]:
                    raise ProofParseError(
                        "children out of pre-order", lineno)
                parent.children.append(node)
            nodes[path] = node
            current = node
        elif tag == "lemma":
            if current is None:
                raise ProofParseError("lemma before any node", lineno)
            if len(tokens) < 5:
                raise ProofParseError("short lemma line", lineno)
            rule, var_s, side_s, val_s = tokens[1:5]
            if side_s not in ("upper", "lower"):
                raise ProofParseError(f"bad side {side_s!r}", lineno)
            try:
                var = int(var_s)
                value = float(val_s)
            except ValueError:
                raise ProofParseError("bad lemma fields", lineno)
            ray = _parse_ray(tokens[5:], lineno)
            current.lemmas.append(Lemma(
                rule=rule,
                premise=Explanation(
                    var, Side.UPPER if side_s == "upper" else Side.LOWER,
                    value, ray)))
        elif tag == "leaf":
            if current is None:
                raise ProofParseError("leaf before any node", lineno)
            current.ray = _parse_ray(tokens[1:], lineno)
        else:
            raise ProofParseError(f"unknown record {tag!r}", lineno)
    root = nodes.get(())
    if root is None:
        raise ProofParseError("no root node")
    return root


# -- producer side ---------------------------------------------------------------


class BoundExplainer:
    """Tracks, per (variable, side), a fully composed multiplier ray for
    every bound not directly visible to the checker.

    Visible bounds (ground, split updates, lemma conclusions) carry no
    entry. Row-derived tightenings compose the defining row with the
    explanations of the bounds they consumed, so stored rays always reduce
    to checker-visible bounds. Callers verify before relying on a ray.
    """

    def __init__(self, query: Query):
        self.query = query
        self.eq_map = _equation_map(query.equations)
        self.store = query.bounds
        self._rays: dict[tuple[int, Side], dict[int, float]] = {}
        self._trail: list[list] = []

    # -- context ---------------------------------------------------------

    def push(self):
        self._trail.append([])

    def pop(self):
        for key, old in reversed(self._trail.pop()):
            if old is None:
                self._rays.pop(key, None)
            else:
                self._rays[key] = old

    def _set(self, key, ray):
        if self._trail:
            self._trail[-1].append((key, self._rays.get(key)))
        if ray is None:
            self._rays.pop(key, None)
        else:
            self._rays[key] = ray

    def ray_for(self, var: int, side: Side) -> dict[int, float]:
        return self._rays.get((var, side), {})

    # -- recording ---------------------------------------------------------

    def mark_visible(self, var: int, side: Side):
        """A split update or lemma conclusion now governs this bound."""
        if (var, side) in self._rays:
            self._set((var, side), None)

    def explain_row_tightening(self, eq: Equation, var: int, side: Side):
        """Compose the ray for a bound on var derived from eq by interval
        reasoning over the other variables. Returns the ray, or None when
        it fails self-verification (caller should then skip the tightening
        in proof mode)."""
        a_v = eq.lhs.terms.get(var, 0.0)
        if abs(a_v) <= NOISE:
            return None
        ray = {eq.id: 1.0 / a_v}
        # residual coefficient of w in v = (rhs - sum a_w w) / a_v is
        # -a_w / a_v; an upper bound on v consumed w's lower bound when that
        # coefficient is negative, i.e. when the combined coefficient is
        # positive. Substitution cancels w either way, so just fold in the
        # explanation of whichever side the interval pass used.
        for w, a_w in eq.lhs.terms.items():
            if w == var:
                continue
            cw = a_w / a_v
            if side is Side.UPPER:
                used = Side.LOWER if cw > 0.0 else Side.UPPER
            else:
                used = Side.UPPER if cw > 0.0 else Side.LOWER
            sub = self._rays.get((w, used))
            if sub:
                for eid, m in sub.items():
                    ray[eid] = ray.get(eid, 0.0) - cw * m
        return ray

    def record(self, var: int, side: Side, ray: dict[int, float]):
        self._set((var, side), dict(ray))

    def compose_contradiction(self, ray: dict[int, float], store=None):
        """Rewrite a contradiction ray so it only leans on visible bounds.

        Substitutes explanations for the bounds the max-side (then the
        min-side) evaluation would consume; the caller verifies the result.
        """
        store = store or self.store
        out = []
        for maximize in (True, False):
            cur = dict(ray)
            for _ in range(len(self._rays) + 1):
                combined = combine_ray(self.eq_map, cur)
                if combined is None:
                    break
                coeffs, _ = combined
                subbed = False
                for v, c in coeffs.items():
                    if abs(c) <= NOISE:
                        continue
                    side = Side.UPPER if (c > 0.0) == maximize else Side.LOWER
                    sub = self._rays.get((v, side))
                    if sub:
                        for eid, m in sub.items():
                            cur[eid] = cur.get(eid, 0.0) - c * m
                        subbed = True
                        break
                if not subbed:
                    break
            out.append(cur)
        return out

    def conflict_ray(self, var: int):
        """Ray for a store conflict lower(var) > upper(var), if the bounds
        involved have explanations; None when both are visible (the replay
        itself will show the conflict)."""
        r_lo = self._rays.get((var, Side.LOWER))
        r_up = self._rays.get((var, Side.UPPER))
        if not r_lo and not r_up:
            return None
        ray = dict(r_lo or {})
        for eid, m in (r_up or {}).items():
            ray[eid] = ray.get(eid, 0.0) - m
        return ray


# -- tree construction ------------------------------------------------------------


class ProofBuilder:
    """Mirrors the search stack while the engine runs in proof mode."""

    def __init__(self):
        self.root = ProofNode()
        self._stack = [self.root]

    @property
    def current(self) -> ProofNode:
        return self._stack[-1]

    def enter_case(self, cid: int, index: int):
        node = ProofNode(split=(cid, index))
        parent = self._stack[-1]
        if parent.children is None:
            parent.children = []
        assert len(parent.children) == index, "cases must be explored in order"
        parent.children.append(node)
        self._stack.append(node)

    def leave_case(self):
        self._stack.pop()

    def record_lemma(self, lemma: Lemma):
        self._stack[-1].lemmas.append(lemma)

    def set_leaf(self, ray: dict[int, float]):
        self._stack[-1].ray = ray
