"""Parsers and serializers: NNet networks, VNN-LIB properties, native
query files, and solver results.

All parsers are pure functions of their text input; errors carry the
offending line number. Floats are written with repr(), which round-trips
exactly (at most 17 significant digits).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .core import (
    INF,
    AbsConstraint,
    BoundUpdate,
    Disjunct,
    DisjunctionConstraint,
    Equation,
    LeakyReluConstraint,
    LinearExpression,
    MaxConstraint,
    Query,
    Relation,
    ReluConstraint,
    Side,
    SignConstraint,
    SolveStatus,
)


class ParseError(Exception):
    """Malformed input. Message includes the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFeature(ParseError):
    """Input is well-formed but uses a construct outside the supported subset."""


def format_float(v: float) -> str:
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return repr(float(v))


def _parse_float(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", line) from None


def _parse_int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", line) from None


# ---------------------------------------------------------------------------
# NNet


@dataclass
class NNetModel:
    """Feed-forward ReLU network in the NNet text format.

    weights[L] has shape (layer_sizes[L+1], layer_sizes[L]); hidden layers
    apply ReLU, the output layer is affine. Normalization metadata is kept
    verbatim and only applied when explicitly requested.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_mins: np.ndarray
    input_maxes: np.ndarray
    means: np.ndarray
    ranges: np.ndarray

    @property
    def num_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def evaluate(self, x, normalize: bool = False) -> np.ndarray:
        """Forward pass. With normalize, inputs are clipped to the stored
        box and scaled by (x - mean) / range, and outputs are rescaled."""
        v = np.asarray(x, dtype=float)
        if normalize:
            v = np.clip(v, self.input_mins, self.input_maxes)
            v = (v - self.means[:-1]) / self.ranges[:-1]
        last = self.num_layers - 1
        for L in range(self.num_layers):
            v = self.weights[L] @ v + self.biases[L]
            if L != last:
                v = np.maximum(v, 0.0)
        if normalize:
            v = v * self.ranges[-1] + self.means[-1]
        return v


def _nnet_lines(text: str):
    """Yield (line_number, payload) with comments and blank lines removed."""
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("//"):
            continue
        yield i, s


def _split_csv(payload: str, line: int) -> list[str]:
    toks = [t.strip() for t in payload.split(",")]
    if toks and toks[-1] == "":  # trailing comma
        toks.pop()
    if not toks or any(t == "" for t in toks):
        raise ParseError("empty field in comma-separated list", line)
    return toks


def _csv_floats(payload: str, line: int, expect: int | None = None,
                what: str = "values") -> np.ndarray:
    toks = _split_csv(payload, line)
    if expect is not None and len(toks) != expect:
        raise ParseError(f"expected {expect} {what}, got {len(toks)}", line)
    return np.array([_parse_float(t, line) for t in toks])


def parse_nnet(text: str) -> NNetModel:
    lines = _nnet_lines(text)

    def take(what: str):
        try:
            return next(lines)
        except StopIteration:
            raise ParseError(f"unexpected end of file, expected {what}") from None

    ln, payload = take("header counts")
    header = [_parse_int(t, ln) for t in _split_csv(payload, ln)]
    if len(header) != 4:
        raise ParseError("header must be numLayers,inputSize,outputSize,maxLayerSize", ln)
    num_layers, input_size, output_size, _max_layer = header

    ln, payload = take("layer sizes")
    sizes = [_parse_int(t, ln) for t in _split_csv(payload, ln)]
    if len(sizes) != num_layers + 1:
        raise ParseError(f"expected {num_layers + 1} layer sizes, got {len(sizes)}", ln)
    if sizes[0] != input_size or sizes[-1] != output_size:
        raise ParseError("layer sizes disagree with header input/output sizes", ln)

    take("unused flag line")  # legacy field, ignored

    ln, payload = take("input minimums")
    mins = _csv_floats(payload, ln, input_size, "input minimums")
    ln, payload = take("input maximums")
    maxes = _csv_floats(payload, ln, input_size, "input maximums")
    ln, payload = take("normalization means")
    means = _csv_floats(payload, ln, input_size + 1, "means")
    ln, payload = take("normalization ranges")
    ranges = _csv_floats(payload, ln, input_size + 1, "ranges")

    weights = []
    biases = []
    for L in range(num_layers):
        rows = []
        for _ in range(sizes[L + 1]):
            ln, payload = take(f"weight row of layer {L}")
            rows.append(_csv_floats(payload, ln, sizes[L], f"weights in layer {L}"))
        b = []
        for _ in range(sizes[L + 1]):
            ln, payload = take(f"bias of layer {L}")
            vals = _csv_floats(payload, ln, None)
            if len(vals) != 1:
                raise ParseError(f"expected a single bias value for layer {L}", ln)
            b.append(vals[0])
        weights.append(np.vstack(rows) if rows else np.zeros((0, sizes[L])))
        biases.append(np.array(b))

    for extra in lines:
        raise ParseError("trailing content after final bias", extra[0])

    return NNetModel(sizes, weights, biases, mins, maxes, means, ranges)


def network_to_query(model: NNetModel, normalize: bool = False) -> Query:
    """Encode a network as a query.

    Variable layout, in order: the inputs; then per hidden layer, per
    neuron, its pre-activation then post-activation; then the outputs.
    Each affine map becomes one equation per target neuron, each hidden
    neuron one ReLU constraint. Input bounds stay infinite unless
    normalize is set, in which case the stored input box applies and the
    mean/range scaling is folded into the first and last affine layers.
    """
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    if normalize:
        in_mean, in_range = model.means[:-1], model.ranges[:-1]
        biases[0] = biases[0] - weights[0] @ (in_mean / in_range)
        weights[0] = weights[0] / in_range
        weights[-1] = weights[-1] * model.ranges[-1]
        biases[-1] = biases[-1] * model.ranges[-1] + model.means[-1]

    query = Query()
    inputs = [query.add_variable() for _ in range(model.num_inputs)]
    if normalize:
        for i, v in enumerate(inputs):
            query.set_lower(v, float(model.input_mins[i]))
            query.set_upper(v, float(model.input_maxes[i]))
    query.input_variables = list(inputs)

    prev = inputs
    for L in range(model.num_layers - 1):
        posts = []
        for j in range(model.layer_sizes[L + 1]):
            pre = query.add_variable()
            post = query.add_variable()
            lhs = LinearExpression({pre: -1.0})
            for k, src in enumerate(prev):
                lhs.add_term(src, float(weights[L][j, k]))
            query.add_equation(lhs, Relation.EQ, -float(biases[L][j]))
            query.add_constraint(ReluConstraint(query.next_constraint_id(), post, pre))
            posts.append(post)
        prev = posts

    last = model.num_layers - 1
    outputs = []
    for j in range(model.num_outputs):
        y = query.add_variable()
        lhs = LinearExpression({y: -1.0})
        for k, src in enumerate(prev):
            lhs.add_term(src, float(weights[last][j, k]))
        query.add_equation(lhs, Relation.EQ, -float(biases[last][j]))
        outputs.append(y)
    query.output_variables = outputs
    return query


# ---------------------------------------------------------------------------
# VNN-LIB subset

_SYMBOL = re.compile(r"^([XY])_(\d+)$")


def _tokenize_sexpr(text: str) -> list[tuple[str, int]]:
    """Tokens with line numbers; ; starts a comment."""
    out = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0]
        line = line.replace("(", " ( ").replace(")", " ) ")
        for tok in line.split():
            out.append((tok, ln))
    return out


def _read_sexprs(tokens: list[tuple[str, int]]):
    """Parse a token stream into nested lists; atoms stay (token, line)."""
    pos = 0

    def read():
        nonlocal pos
        tok, ln = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while pos < len(tokens) and tokens[pos][0] != ")":
                items.append(read())
            if pos >= len(tokens):
                raise ParseError("unbalanced parenthesis", ln)
            pos += 1
            return items
        if tok == ")":
            raise ParseError("unexpected ')'", ln)
        return (tok, ln)

    exprs = []
    while pos < len(tokens):
        exprs.append(read())
    return exprs


def _expr_line(e) -> int:
    while isinstance(e, list):
        e = e[0]
    return e[1]


@dataclass
class ParsedProperty:
    """Property constraints in query-variable space."""

    bound_updates: list[BoundUpdate] = field(default_factory=list)
    inequalities: list[tuple[LinearExpression, Relation, float]] = field(default_factory=list)
    disjuncts: list[Disjunct] | None = None
    trivially_false: bool = False


class _VnnlibBuilder:
    def __init__(self, query: Query):
        self.query = query
        self.declared: dict[str, int] = {}
        self.prop = ParsedProperty()

    def var_for(self, name: str, line: int) -> int:
        if name not in self.declared:
            raise ParseError(f"undeclared symbol {name}", line)
        return self.declared[name]

    def declare(self, name: str, line: int) -> None:
        m = _SYMBOL.match(name)
        if not m:
            raise ParseError(f"cannot declare {name!r}, expected X_<i> or Y_<i>", line)
        kind, idx = m.group(1), int(m.group(2))
        pool = self.query.input_variables if kind == "X" else self.query.output_variables
        if idx >= len(pool):
            raise ParseError(f"{name} out of range, network has {len(pool)} "
                             f"{'inputs' if kind == 'X' else 'outputs'}", line)
        self.declared[name] = pool[idx]

    def linear_term(self, e) -> LinearExpression:
        if isinstance(e, tuple):
            tok, ln = e
            if _SYMBOL.match(tok):
                return LinearExpression({self.var_for(tok, ln): 1.0})
            return LinearExpression({}, _parse_float(tok, ln))
        if not e:
            raise ParseError("empty term")
        head, ln = e[0]
        args = e[1:]
        if head == "+":
            out = LinearExpression({})
            for a in args:
                sub = self.linear_term(a)
                for v, c in sub.terms.items():
                    out.add_term(v, c)
                out.constant += sub.constant
            return out
        if head == "-":
            if len(args) == 1:
                sub = self.linear_term(args[0])
                return LinearExpression({v: -c for v, c in sub.terms.items()}, -sub.constant)
            if len(args) == 2:
                a = self.linear_term(args[0])
                b = self.linear_term(args[1])
                for v, c in b.terms.items():
                    a.add_term(v, -c)
                a.constant -= b.constant
                return a
            raise ParseError("'-' takes one or two arguments", ln)
        if head == "*":
            if len(args) != 2:
                raise ParseError("'*' takes exactly two arguments", ln)
            a = self.linear_term(args[0])
            b = self.linear_term(args[1])
            if a.terms and b.terms:
                raise UnsupportedFeature("nonlinear product", ln)
            const, lin = (a.constant, b) if not a.terms else (b.constant, a)
            return LinearExpression({v: c * const for v, c in lin.terms.items()},
                                    lin.constant * const)
        raise ParseError(f"unknown term operator {head!r}", ln)

    def atom(self, e) -> tuple[LinearExpression, Relation, float]:
        """A comparison, normalized to (expr REL rhs) with constant on the right."""
        if not isinstance(e, list) or len(e) != 3 or not isinstance(e[0], tuple):
            raise ParseError("expected a comparison", _expr_line(e))
        op, ln = e[0]
        if op not in ("<=", ">=", "<", ">"):
            raise ParseError(f"expected a comparison operator, got {op!r}", ln)
        lhs = self.linear_term(e[1])
        rhs = self.linear_term(e[2])
        for v, c in rhs.terms.items():
            lhs.add_term(v, -c)
        rel = Relation.LE if op in ("<=", "<") else Relation.GE
        return lhs, rel, rhs.constant - lhs.constant

    def add_conjunct(self, expr, rel, rhs, line) -> None:
        """Route a top-level atom: single input variable becomes a bound."""
        if not expr.terms:
            sat = (0.0 <= rhs) if rel is Relation.LE else (0.0 >= rhs)
            if not sat:
                self.prop.trivially_false = True
            return
        if len(expr.terms) == 1:
            (v, c), = expr.terms.items()
            if v in self.query.input_variables and c != 0.0:
                val = rhs / c
                upper = (rel is Relation.LE) == (c > 0)
                self.prop.bound_updates.append(
                    BoundUpdate(v, Side.UPPER if upper else Side.LOWER, val))
                return
        self.prop.inequalities.append((expr, rel, rhs))

    def formula(self, e, depth_or: bool = False) -> None:
        if not isinstance(e, list) or not e or not isinstance(e[0], tuple):
            raise ParseError("expected a formula", _expr_line(e))
        head, ln = e[0]
        if head == "and":
            for sub in e[1:]:
                self.formula(sub)
            return
        if head == "or":
            if self.prop.disjuncts is not None:
                raise UnsupportedFeature("more than one disjunction", ln)
            self.prop.disjuncts = [self.disjunct(sub) for sub in e[1:]]
            if not self.prop.disjuncts:
                raise ParseError("empty disjunction", ln)
            return
        expr, rel, rhs = self.atom(e)
        self.add_conjunct(expr, rel, rhs, ln)

    def disjunct(self, e) -> Disjunct:
        if not isinstance(e, list) or not e or not isinstance(e[0], tuple):
            raise ParseError("expected a disjunct", _expr_line(e))
        head, ln = e[0]
        if head == "or":
            raise UnsupportedFeature("disjunction nested inside a disjunction", ln)
        atoms = e[1:] if head == "and" else [e]
        d = Disjunct()
        for a in atoms:
            if isinstance(a, list) and a and isinstance(a[0], tuple) and a[0][0] in ("and", "or"):
                raise UnsupportedFeature(
                    "disjuncts must be atoms or a single conjunction of atoms", a[0][1])
            expr, rel, rhs = self.atom(a)
            if len(expr.terms) == 1:
                (v, c), = expr.terms.items()
                if c != 0.0:
                    val = rhs / c
                    if (rel is Relation.LE) == (c > 0):
                        d.restrict(v, -INF, val)
                    else:
                        d.restrict(v, val, INF)
                    continue
            d.inequalities.append((expr, rel, rhs))
        return d


def parse_vnnlib(text: str, query: Query) -> ParsedProperty:
    """Parse the property against a query that already carries the network
    encoding; X_i / Y_i map to the query's input/output variables."""
    builder = _VnnlibBuilder(query)
    for e in _read_sexprs(_tokenize_sexpr(text)):
        if not isinstance(e, list) or not e or not isinstance(e[0], tuple):
            raise ParseError("expected a top-level command", _expr_line(e))
        head, ln = e[0]
        if head == "declare-const":
            if len(e) != 3 or not isinstance(e[1], tuple) or not isinstance(e[2], tuple):
                raise ParseError("malformed declare-const", ln)
            if e[2][0] != "Real":
                raise UnsupportedFeature(f"only Real sorts are supported, got {e[2][0]}", ln)
            builder.declare(e[1][0], e[1][1])
        elif head == "assert":
            if len(e) != 2:
                raise ParseError("assert takes exactly one formula", ln)
            builder.formula(e[1])
        else:
            raise UnsupportedFeature(f"unsupported command {head!r}", ln)
    return builder.prop


def apply_property(query: Query, prop: ParsedProperty) -> Query:
    """Add parsed property constraints to the query, in place.

    Disjunction inequalities are rewritten to slack bounds immediately so
    the resulting query serializes to the native format.
    """
    if prop.trivially_false:
        query.add_equation(LinearExpression({}), Relation.EQ, 1.0)
    for upd in prop.bound_updates:
        upd.apply(query.bounds)
    for expr, rel, rhs in prop.inequalities:
        query.add_equation(expr, rel, rhs)
    if prop.disjuncts is not None:
        con = DisjunctionConstraint(query.next_constraint_id(), prop.disjuncts)
        query.add_constraint(con)
        con.normalize(query)
    return query


# ---------------------------------------------------------------------------
# Native query format

_HEADER = "MQ1"

_REL_TOKENS = {Relation.EQ: "=", Relation.LE: "<=", Relation.GE: ">="}
_TOKEN_RELS = {v: k for k, v in _REL_TOKENS.items()}


def write_query_file(query: Query) -> str:
    """Serialize the declarative form of a query.

    Aux state introduced by constraint normalization is not represented;
    dump before normalizing (already-normalized disjunctions are fine,
    their case boxes serialize directly).
    """
    out = [_HEADER, f"vars {query.num_variables}"]
    if query.input_variables:
        out.append("input " + " ".join(
            [str(len(query.input_variables))] + [str(v) for v in query.input_variables]))
    if query.output_variables:
        out.append("output " + " ".join(
            [str(len(query.output_variables))] + [str(v) for v in query.output_variables]))
    for v in range(query.num_variables):
        lo, hi = query.bounds.interval(v)
        if lo > -INF or hi < INF:
            out.append(f"bound {v} {format_float(lo)} {format_float(hi)}")
    for eq in query.equations:
        items = sorted(eq.lhs.terms.items())
        parts = ["eq", _REL_TOKENS[eq.relation],
                 format_float(eq.rhs - eq.lhs.constant), str(len(items))]
        for v, c in items:
            parts.append(format_float(c))
            parts.append(str(v))
        out.append(" ".join(parts))
    for con in query.pl_constraints:
        if con.kind == "relu":
            out.append(f"relu {con.f} {con.b}")
        elif con.kind == "leaky":
            out.append(f"leaky {con.f} {con.b} {format_float(con.alpha)}")
        elif con.kind == "abs":
            out.append(f"abs {con.f} {con.b}")
        elif con.kind == "sign":
            out.append(f"sign {con.f} {con.b}")
        elif con.kind == "max":
            out.append(f"max {con.f} {len(con.xs)} " + " ".join(str(x) for x in con.xs))
        elif con.kind == "disj":
            if any(d.inequalities for d in con.disjuncts):
                raise ValueError(
                    "disjunction with raw inequalities cannot be serialized; "
                    "normalize it first")
            out.append(f"disj {len(con.disjuncts)}")
            for d in con.disjuncts:
                items = sorted(d.var_bounds.items())
                parts = ["case", str(len(items))]
                for v, (lo, hi) in items:
                    parts += [str(v), format_float(lo), format_float(hi)]
                out.append(" ".join(parts))
        else:
            raise ValueError(f"cannot serialize constraint kind {con.kind!r}")
    return "\n".join(out) + "\n"


class _QueryReader:
    def __init__(self):
        self.query: Query | None = None
        self.seen_input = False
        self.seen_output = False
        self.pending_cases = 0
        self.disjuncts: list[Disjunct] = []

    def var(self, tok: str, line: int) -> int:
        v = _parse_int(tok, line)
        if self.query is None or v < 0 or v >= self.query.num_variables:
            raise ParseError(f"variable index {v} out of range", line)
        return v

    def need_args(self, toks: list[str], n: int, line: int, tag: str) -> None:
        if len(toks) != n:
            raise ParseError(f"{tag} record takes {n} fields, got {len(toks)}", line)


def parse_query_file(text: str) -> Query:
    reader = _QueryReader()
    saw_header = False
    for ln, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        if not saw_header:
            if s != _HEADER:
                raise ParseError(f"expected {_HEADER} header, got {s!r}", ln)
            saw_header = True
            continue
        toks = s.split()
        tag, args = toks[0], toks[1:]
        q = reader.query

        if reader.pending_cases > 0:
            if tag != "case":
                raise ParseError("expected a case record inside disj", ln)
            if not args:
                raise ParseError("case record missing count", ln)
            k = _parse_int(args[0], ln)
            if len(args) != 1 + 3 * k:
                raise ParseError(f"case record expects {3 * k} fields after the count", ln)
            d = Disjunct()
            for i in range(k):
                v = reader.var(args[1 + 3 * i], ln)
                lo = _parse_float(args[2 + 3 * i], ln)
                hi = _parse_float(args[3 + 3 * i], ln)
                d.restrict(v, lo, hi)
            reader.disjuncts.append(d)
            reader.pending_cases -= 1
            if reader.pending_cases == 0:
                q.add_constraint(
                    DisjunctionConstraint(q.next_constraint_id(), reader.disjuncts))
                reader.disjuncts = []
            continue

        if tag == "vars":
            if q is not None:
                raise ParseError("duplicate vars record", ln)
            reader.need_args(args, 1, ln, "vars")
            n = _parse_int(args[0], ln)
            if n < 0:
                raise ParseError("vars count must be nonnegative", ln)
            reader.query = Query(n)
            continue
        if q is None:
            raise ParseError(f"{tag} record before vars", ln)

        if tag in ("input", "output"):
            if not args:
                raise ParseError(f"{tag} record missing count", ln)
            k = _parse_int(args[0], ln)
            if len(args) != 1 + k:
                raise ParseError(f"{tag} record expects {k} indices", ln)
            vs = [reader.var(t, ln) for t in args[1:]]
            if tag == "input":
                if reader.seen_input:
                    raise ParseError("duplicate input record", ln)
                reader.seen_input = True
                q.input_variables = vs
            else:
                if reader.seen_output:
                    raise ParseError("duplicate output record", ln)
                reader.seen_output = True
                q.output_variables = vs
        elif tag == "bound":
            reader.need_args(args, 3, ln, "bound")
            v = reader.var(args[0], ln)
            q.set_lower(v, _parse_float(args[1], ln))
            q.set_upper(v, _parse_float(args[2], ln))
        elif tag == "eq":
            if len(args) < 3:
                raise ParseError("eq record too short", ln)
            if args[0] not in _TOKEN_RELS:
                raise ParseError(f"unknown relation {args[0]!r}", ln)
            rel = _TOKEN_RELS[args[0]]
            rhs = _parse_float(args[1], ln)
            k = _parse_int(args[2], ln)
            if len(args) != 3 + 2 * k:
                raise ParseError(f"eq record expects {2 * k} fields after the count", ln)
            lhs = LinearExpression({})
            for i in range(k):
                c = _parse_float(args[3 + 2 * i], ln)
                v = reader.var(args[4 + 2 * i], ln)
                lhs.add_term(v, c)
            q.add_equation(lhs, rel, rhs)
        elif tag == "relu":
            reader.need_args(args, 2, ln, "relu")
            q.add_constraint(ReluConstraint(
                q.next_constraint_id(), reader.var(args[0], ln), reader.var(args[1], ln)))
        elif tag == "leaky":
            reader.need_args(args, 3, ln, "leaky")
            f, b = reader.var(args[0], ln), reader.var(args[1], ln)
            alpha = _parse_float(args[2], ln)
            if not 0.0 < alpha < 1.0:
                raise ParseError(f"leaky slope must be in (0, 1), got {alpha}", ln)
            q.add_constraint(LeakyReluConstraint(q.next_constraint_id(), f, b, alpha))
        elif tag == "abs":
            reader.need_args(args, 2, ln, "abs")
            q.add_constraint(AbsConstraint(
                q.next_constraint_id(), reader.var(args[0], ln), reader.var(args[1], ln)))
        elif tag == "sign":
            reader.need_args(args, 2, ln, "sign")
            q.add_constraint(SignConstraint(
                q.next_constraint_id(), reader.var(args[0], ln), reader.var(args[1], ln)))
        elif tag == "max":
            if len(args) < 2:
                raise ParseError("max record too short", ln)
            f = reader.var(args[0], ln)
            k = _parse_int(args[1], ln)
            if len(args) != 2 + k:
                raise ParseError(f"max record expects {k} inputs", ln)
            xs = [reader.var(t, ln) for t in args[2:]]
            q.add_constraint(MaxConstraint(q.next_constraint_id(), f, xs))
        elif tag == "disj":
            reader.need_args(args, 1, ln, "disj")
            m = _parse_int(args[0], ln)
            if m < 1:
                raise ParseError("disj needs at least one case", ln)
            reader.pending_cases = m
        else:
            raise ParseError(f"unknown record tag {tag!r}", ln)

    if not saw_header:
        raise ParseError(f"empty input, expected {_HEADER} header")
    if reader.query is None:
        raise ParseError("missing vars record")
    if reader.pending_cases > 0:
        raise ParseError(f"disj record missing {reader.pending_cases} case lines")
    return reader.query


# ---------------------------------------------------------------------------
# Results

_STATUS_WORDS = {s.value for s in SolveStatus}


def write_result(status: SolveStatus, values=None) -> str:
    """First line is the status; a sat result lists every variable as
    `x <index> <value>` in original indices."""
    out = [status.value]
    if status is SolveStatus.SAT:
        if values is None:
            raise ValueError("sat result requires an assignment")
        for i, v in enumerate(values):
            out.append(f"x {i} {format_float(v)}")
    return "\n".join(out) + "\n"


def parse_result(text: str) -> tuple[SolveStatus, dict[int, float] | None]:
    lines = [s.strip() for s in text.splitlines() if s.strip()]
    if not lines or lines[0] not in _STATUS_WORDS:
        raise ParseError("missing or unknown status line", 1)
    status = SolveStatus(lines[0])
    if status is not SolveStatus.SAT:
        return status, None
    values: dict[int, float] = {}
    for ln, s in enumerate(lines[1:], start=2):
        toks = s.split()
        if len(toks) != 3 or toks[0] != "x":
            raise ParseError(f"malformed assignment line {s!r}", ln)
        values[_parse_int(toks[1], ln)] = _parse_float(toks[2], ln)
    return status, values
