"""Parser and serializer tests.

Network fidelity is checked against a plain-loop forward evaluator kept
separate from the package; property semantics are checked by evaluating
the generator's own structured form, never the parser's output.
"""

import numpy as np
import pytest

from pwlsat.core import (
    INF,
    Assignment,
    Disjunct,
    DisjunctionConstraint,
    LinearExpression,
    Query,
    Relation,
    Side,
    SolveStatus,
)
from pwlsat.frontend import (
    NNetModel,
    ParseError,
    UnsupportedFeature,
    apply_property,
    network_to_query,
    parse_nnet,
    parse_query_file,
    parse_result,
    parse_vnnlib,
    write_query_file,
    write_result,
)
from pwlsat.core import (
    AbsConstraint,
    LeakyReluConstraint,
    MaxConstraint,
    ReluConstraint,
    SignConstraint,
)


# ---------------------------------------------------------------------------
# helpers

from conftest import complete_assignment


def loop_forward(weights, biases, x):
    """Reference forward pass with explicit Python loops."""
    v = [float(t) for t in x]
    for L in range(len(weights)):
        nxt = []
        for j in range(len(biases[L])):
            acc = float(biases[L][j])
            for k in range(len(v)):
                acc += float(weights[L][j][k]) * v[k]
            nxt.append(acc)
        if L != len(weights) - 1:
            nxt = [max(0.0, t) for t in nxt]
        v = nxt
    return v


def random_nnet(rng, with_comments=False, trailing_commas=True):
    """Random network rendered as NNet text, plus the raw matrices."""
    depth = int(rng.integers(1, 4))
    sizes = [int(rng.integers(1, 5)) for _ in range(depth + 1)]
    weights = [rng.normal(size=(sizes[L + 1], sizes[L])) for L in range(depth)]
    biases = [rng.normal(size=sizes[L + 1]) for L in range(depth)]
    mins = rng.normal(size=sizes[0]) - 5.0
    maxes = mins + np.abs(rng.normal(size=sizes[0])) + 0.5
    means = rng.normal(size=sizes[0] + 1)
    ranges = np.abs(rng.normal(size=sizes[0] + 1)) + 0.5

    tail = "," if trailing_commas else ""
    lines = []
    if with_comments:
        lines += ["// generated network", "// second comment line"]
    lines.append(f"{depth},{sizes[0]},{sizes[-1]},{max(sizes)}{tail}")
    lines.append(",".join(str(s) for s in sizes) + tail)
    lines.append("0" + tail)
    for vec in (mins, maxes, means, ranges):
        lines.append(",".join(repr(float(t)) for t in vec) + tail)
    for L in range(depth):
        for j in range(sizes[L + 1]):
            lines.append(",".join(repr(float(t)) for t in weights[L][j]) + tail)
        for j in range(sizes[L + 1]):
            lines.append(repr(float(biases[L][j])) + tail)
    text = "\n".join(lines) + "\n"
    return text, weights, biases, (mins, maxes, means, ranges)


IDENTITY_NNET = """\
// 1-1-1 identity: f(x) = relu(x)
2,1,1,1,
1,1,1,
0,
-100.0,
100.0,
0.0,0.0,
1.0,1.0,
1.0,
0.0,
1.0,
0.0,
"""


class TestNNet:
    def test_identity_network(self):
        model = parse_nnet(IDENTITY_NNET)
        assert model.layer_sizes == [1, 1, 1]
        assert model.evaluate([3.0])[0] == pytest.approx(3.0)
        assert model.evaluate([-2.0])[0] == pytest.approx(0.0)

    def test_comment_prefix_is_ignored(self, nprng):
        text, _, _, _ = random_nnet(nprng)
        plain = parse_nnet(text)
        commented = parse_nnet("// a\n//b\n" + text)
        for a, b in zip(plain.weights, commented.weights):
            assert np.array_equal(a, b)

    def test_wrong_row_count_names_layer(self):
        lines = IDENTITY_NNET.splitlines()
        del lines[8]  # drop the first weight row
        with pytest.raises(ParseError, match="layer"):
            parse_nnet("\n".join(lines))

    def test_non_numeric_token_reports_line(self):
        bad = IDENTITY_NNET.replace("100.0,", "ten,", 1)
        with pytest.raises(ParseError, match=r"line \d+"):
            parse_nnet(bad)

    def test_size_mismatch_in_header(self):
        bad = IDENTITY_NNET.replace("1,1,1,\n", "1,1,\n")
        with pytest.raises(ParseError):
            parse_nnet(bad)

    def test_forward_matches_loop_oracle(self, nprng):
        rng = nprng
        for _ in range(100):
            text, weights, biases, _ = random_nnet(
                rng, with_comments=bool(rng.integers(2)),
                trailing_commas=bool(rng.integers(2)))
            model = parse_nnet(text)
            for L in range(len(weights)):
                assert np.array_equal(model.weights[L], weights[L])
                assert np.array_equal(model.biases[L], biases[L])
            for _ in range(3):
                x = rng.normal(size=model.num_inputs) * 2.0
                got = model.evaluate(x)
                want = loop_forward(weights, biases, x)
                assert np.allclose(got, want, atol=1e-9, rtol=0.0)


class TestNetworkToQuery:
    def test_identity_encoding_counts(self):
        q = network_to_query(parse_nnet(IDENTITY_NNET))
        assert q.num_variables == 4  # x, h_pre, h_post, y
        assert len(q.equations) == 2
        assert len(q.pl_constraints) == 1
        assert q.pl_constraints[0].kind == "relu"
        assert q.input_variables == [0]
        assert q.output_variables == [3]

    def test_affine_only_network(self):
        text = "1,2,1,2,\n2,1,\n0,\n-1.0,-1.0,\n1.0,1.0,\n0.0,0.0,0.0,\n1.0,1.0,1.0,\n1.0,1.0,\n0.0,\n"
        q = network_to_query(parse_nnet(text))
        assert q.num_variables == 3
        assert len(q.equations) == 1
        assert not q.pl_constraints
        vals = complete_assignment(q, {0: 2.0, 1: 5.0})
        assert vals[q.output_variables[0]] == pytest.approx(7.0)

    def test_forward_values_satisfy_query(self, nprng):
        rng = nprng
        for _ in range(25):
            text, weights, biases, _ = random_nnet(rng)
            model = parse_nnet(text)
            q = network_to_query(model)
            hidden = sum(model.layer_sizes[1:-1])
            assert q.num_variables == (model.num_inputs + 2 * hidden
                                       + model.num_outputs)
            x = rng.normal(size=model.num_inputs) * 3.0
            known = {v: float(x[i]) for i, v in enumerate(q.input_variables)}
            vals = complete_assignment(q, known)
            assert Assignment(vals).satisfies(q)
            y = [vals[v] for v in q.output_variables]
            assert np.allclose(y, loop_forward(weights, biases, x), atol=1e-9)

    def test_normalize_flag(self, nprng):
        rng = nprng
        for _ in range(10):
            text, _, _, (mins, maxes, _, _) = random_nnet(rng)
            model = parse_nnet(text)
            q = network_to_query(model, normalize=True)
            for i, v in enumerate(q.input_variables):
                assert q.bounds.interval(v) == (mins[i], maxes[i])
            x = rng.uniform(mins, maxes)
            known = {v: float(x[i]) for i, v in enumerate(q.input_variables)}
            vals = complete_assignment(q, known)
            y = [vals[v] for v in q.output_variables]
            assert np.allclose(y, model.evaluate(x, normalize=True), atol=1e-7)

    def test_default_input_bounds_are_infinite(self):
        q = network_to_query(parse_nnet(IDENTITY_NNET))
        assert q.bounds.interval(0) == (-INF, INF)


# ---------------------------------------------------------------------------
# VNN-LIB

def declare_block(n_in, n_out):
    lines = [f"(declare-const X_{i} Real)" for i in range(n_in)]
    lines += [f"(declare-const Y_{i} Real)" for i in range(n_out)]
    return "\n".join(lines)


class TestVnnlibBasics:
    def _query(self, n_in=2, n_out=2):
        q = Query(n_in + n_out)
        q.input_variables = list(range(n_in))
        q.output_variables = list(range(n_in, n_in + n_out))
        return q

    def test_input_bound_and_output_inequality(self):
        q = self._query()
        text = declare_block(2, 2) + "\n(assert (<= X_0 0.5))\n(assert (>= Y_0 1.0))\n"
        prop = parse_vnnlib(text, q)
        assert len(prop.bound_updates) == 1
        upd = prop.bound_updates[0]
        assert (upd.var, upd.value) == (0, 0.5)
        assert len(prop.inequalities) == 1
        expr, rel, rhs = prop.inequalities[0]
        assert expr.terms == {2: 1.0} and rel is Relation.GE and rhs == 1.0
        apply_property(q, prop)
        assert q.bounds.upper(0) == 0.5
        assert len(q.equations) == 1

    def test_disjunction_of_conjunctions(self):
        q = self._query()
        text = declare_block(2, 2) + "\n(assert (or (and (<= Y_0 0)) (and (>= Y_0 1))))\n"
        prop = parse_vnnlib(text, q)
        assert prop.disjuncts is not None and len(prop.disjuncts) == 2
        apply_property(q, prop)
        con = q.pl_constraints[0]
        assert con.kind == "disj"
        assert con.disjuncts[0].var_bounds == {2: (-INF, 0.0)}
        assert con.disjuncts[1].var_bounds == {2: (1.0, INF)}

    def test_empty_property_changes_nothing(self):
        q = self._query()
        prop = parse_vnnlib(declare_block(2, 2), q)
        apply_property(q, prop)
        assert not q.equations and not q.pl_constraints
        assert all(q.bounds.interval(v) == (-INF, INF) for v in range(4))

    def test_undeclared_symbol_is_an_error(self):
        q = self._query()
        with pytest.raises(ParseError, match="undeclared"):
            parse_vnnlib("(assert (<= X_0 1))", q)

    def test_out_of_range_symbol(self):
        q = self._query(n_in=1)
        with pytest.raises(ParseError, match="out of range"):
            parse_vnnlib("(declare-const X_3 Real)", q)

    def test_nested_or_is_unsupported(self):
        q = self._query()
        text = declare_block(2, 2) + \
            "\n(assert (or (or (<= Y_0 0) (>= Y_0 1)) (<= Y_1 0)))\n"
        with pytest.raises(UnsupportedFeature):
            parse_vnnlib(text, q)

    def test_and_inside_disjunct_conjunction_is_unsupported(self):
        q = self._query()
        text = declare_block(2, 2) + \
            "\n(assert (or (and (and (<= Y_0 0)) (>= Y_1 0)) (<= Y_1 0)))\n"
        with pytest.raises(UnsupportedFeature):
            parse_vnnlib(text, q)

    def test_strict_inequality_is_weakened(self):
        q = self._query()
        text = declare_block(2, 2) + "\n(assert (< X_1 2.0))\n"
        prop = parse_vnnlib(text, q)
        assert prop.bound_updates[0].value == 2.0

    def test_arithmetic_terms(self):
        q = self._query()
        text = declare_block(2, 2) + \
            "\n(assert (<= (+ (* 2.0 Y_0) (- Y_1) (- X_0 X_1) 1.0) 3.0))\n"
        prop = parse_vnnlib(text, q)
        expr, rel, rhs = prop.inequalities[0]
        assert expr.terms == {2: 2.0, 3: -1.0, 0: 1.0, 1: -1.0}
        assert rel is Relation.LE
        assert rhs == pytest.approx(2.0)

    def test_negative_coefficient_flips_bound_side(self):
        q = self._query()
        text = declare_block(2, 2) + "\n(assert (<= (* -2.0 X_0) 4.0))\n"
        prop = parse_vnnlib(text, q)
        upd = prop.bound_updates[0]
        assert upd.side is Side.LOWER and upd.value == -2.0

    def test_constant_false_assert(self):
        q = self._query()
        prop = parse_vnnlib("(assert (<= 1.0 0.0))", q)
        assert prop.trivially_false
        apply_property(q, prop)
        assert len(q.equations) == 1  # unsatisfiable marker row


# random property agreement: build structured atoms, render text, compare
# the built query's verdict against direct evaluation of the structure.

def random_property(rng, n_in, n_out):
    atoms = []   # ("le"/"ge", coeffs: {("x",i)/("y",i): c}, rhs)
    box = {}
    for i in range(n_in):
        lo = float(rng.uniform(-2, 0))
        hi = float(rng.uniform(0.5, 2.5))
        box[i] = (lo, hi)
        atoms.append(("ge", {("x", i): 1.0}, lo))
        atoms.append(("le", {("x", i): 1.0}, hi))
    for _ in range(int(rng.integers(1, 3))):
        coeffs = {}
        for j in range(n_out):
            if rng.random() < 0.7:
                coeffs[("y", j)] = float(rng.normal())
        if rng.random() < 0.3:
            coeffs[("x", 0)] = float(rng.normal())
        if not coeffs:
            coeffs[("y", 0)] = 1.0
        atoms.append(("le" if rng.random() < 0.5 else "ge",
                      coeffs, float(rng.normal())))
    disjuncts = None
    if rng.random() < 0.5:
        disjuncts = []
        for _ in range(int(rng.integers(2, 4))):
            da = []
            for _ in range(int(rng.integers(1, 3))):
                sym = ("y", int(rng.integers(n_out))) if rng.random() < 0.7 \
                    else ("x", int(rng.integers(n_in)))
                extra = {}
                if rng.random() < 0.4:
                    extra[("y", int(rng.integers(n_out)))] = float(rng.normal())
                coeffs = {sym: float(rng.normal()) or 1.0}
                coeffs.update(extra)
                da.append(("le" if rng.random() < 0.5 else "ge",
                           coeffs, float(rng.normal())))
            disjuncts.append(da)
    return atoms, disjuncts, box


def term_text(coeffs, rng):
    parts = []
    for (kind, i), c in sorted(coeffs.items()):
        name = f"{'X' if kind == 'x' else 'Y'}_{i}"
        if c == 1.0 and rng.random() < 0.5:
            parts.append(name)
        else:
            parts.append(f"(* {repr(c)} {name})")
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def atom_text(atom, rng):
    rel, coeffs, rhs = atom
    op = "<=" if rel == "le" else ">="
    return f"({op} {term_text(coeffs, rng)} {repr(rhs)})"


def property_text(atoms, disjuncts, n_in, n_out, rng):
    lines = [declare_block(n_in, n_out)]
    for a in atoms:
        lines.append(f"(assert {atom_text(a, rng)})")
    if disjuncts is not None:
        ds = []
        for da in disjuncts:
            if len(da) == 1 and rng.random() < 0.5:
                ds.append(atom_text(da[0], rng))
            else:
                ds.append("(and " + " ".join(atom_text(a, rng) for a in da) + ")")
        lines.append("(assert (or " + " ".join(ds) + "))")
    return "\n".join(lines) + "\n"


def eval_structure(atoms, disjuncts, xs, ys):
    """Truth value plus distance to the nearest atom boundary."""
    def val(coeffs):
        return sum(c * (xs[i] if kind == "x" else ys[i])
                   for (kind, i), c in coeffs.items())

    margin = INF
    ok = True
    for rel, coeffs, rhs in atoms:
        v = val(coeffs)
        margin = min(margin, abs(v - rhs))
        if rel == "le" and v > rhs:
            ok = False
        if rel == "ge" and v < rhs:
            ok = False
    if disjuncts is not None:
        any_d = False
        for da in disjuncts:
            d_ok = True
            for rel, coeffs, rhs in da:
                v = val(coeffs)
                margin = min(margin, abs(v - rhs))
                if rel == "le" and v > rhs:
                    d_ok = False
                if rel == "ge" and v < rhs:
                    d_ok = False
            any_d = any_d or d_ok
        ok = ok and any_d
    return ok, margin


class TestVnnlibAgreement:
    def test_query_verdict_matches_formula_evaluation(self, nprng):
        rng = nprng
        checked = 0
        for _ in range(15):
            text, weights, biases, _ = random_nnet(rng)
            model = parse_nnet(text)
            q = network_to_query(model)
            atoms, disjuncts, box = random_property(
                rng, model.num_inputs, model.num_outputs)
            ptext = property_text(atoms, disjuncts,
                                  model.num_inputs, model.num_outputs, rng)
            apply_property(q, parse_vnnlib(ptext, q))
            for _ in range(20):
                x = [float(rng.uniform(lo - 0.5, hi + 0.5))
                     for lo, hi in box.values()]
                y = loop_forward(weights, biases, x)
                ok, margin = eval_structure(atoms, disjuncts, x, y)
                if margin < 1e-5:
                    continue
                known = {v: x[i] for i, v in enumerate(q.input_variables)}
                vals = complete_assignment(q, known)
                assert Assignment(vals).satisfies(q) == ok
                checked += 1
        assert checked > 100


# ---------------------------------------------------------------------------
# native query format

def random_query(rng):
    q = Query(int(rng.integers(3, 10)))
    n = q.num_variables
    for v in range(n):
        r = rng.random()
        if r < 0.4:
            lo = float(rng.normal())
            q.set_lower(v, lo)
            if r < 0.2:
                q.set_upper(v, lo + float(np.abs(rng.normal())) + 0.1)
        elif r < 0.6:
            q.set_upper(v, float(rng.normal()))
    if rng.random() < 0.7:
        k = int(rng.integers(1, min(4, n + 1)))
        q.input_variables = [int(t) for t in rng.choice(n, size=k, replace=False)]
    if rng.random() < 0.7:
        k = int(rng.integers(1, min(4, n + 1)))
        q.output_variables = [int(t) for t in rng.choice(n, size=k, replace=False)]
    for _ in range(int(rng.integers(0, 5))):
        lhs = LinearExpression({})
        for v in rng.choice(n, size=int(rng.integers(1, min(5, n + 1))), replace=False):
            lhs.add_term(int(v), float(rng.normal()))
        rel = [Relation.EQ, Relation.LE, Relation.GE][int(rng.integers(3))]
        q.add_equation(lhs, rel, float(rng.normal()))
    for _ in range(int(rng.integers(0, 4))):
        kind = int(rng.integers(6))
        pick = lambda m: [int(t) for t in rng.choice(n, size=m, replace=False)]
        cid = q.next_constraint_id()
        if kind == 0:
            f, b = pick(2)
            q.add_constraint(ReluConstraint(cid, f, b))
        elif kind == 1:
            f, b = pick(2)
            q.add_constraint(LeakyReluConstraint(cid, f, b, float(rng.uniform(0.01, 0.99))))
        elif kind == 2:
            f, b = pick(2)
            q.add_constraint(AbsConstraint(cid, f, b))
        elif kind == 3:
            f, b = pick(2)
            q.add_constraint(SignConstraint(cid, f, b))
        elif kind == 4:
            vs = pick(int(rng.integers(2, min(5, n + 1))))
            q.add_constraint(MaxConstraint(cid, vs[0], vs[1:]))
        else:
            ds = []
            for _ in range(int(rng.integers(2, 4))):
                d = Disjunct()
                for v in pick(int(rng.integers(1, 3))):
                    lo = float(rng.normal()) if rng.random() < 0.7 else -INF
                    hi = (max(lo, 0.0) + float(np.abs(rng.normal()))
                          if rng.random() < 0.7 else INF)
                    if lo == -INF and hi == INF:
                        lo = 0.0
                    d.restrict(v, lo, hi)
                ds.append(d)
            q.add_constraint(DisjunctionConstraint(cid, ds))
    return q


def assert_queries_equal(a, b):
    assert a.num_variables == b.num_variables
    for v in range(a.num_variables):
        assert a.bounds.interval(v) == b.bounds.interval(v)
    assert a.input_variables == b.input_variables
    assert a.output_variables == b.output_variables
    assert len(a.equations) == len(b.equations)
    for ea, eb in zip(a.equations, b.equations):
        assert ea.relation is eb.relation
        assert ea.rhs - ea.lhs.constant == eb.rhs - eb.lhs.constant
        assert ea.lhs.terms == eb.lhs.terms
    assert len(a.pl_constraints) == len(b.pl_constraints)
    for ca, cb in zip(a.pl_constraints, b.pl_constraints):
        assert ca.kind == cb.kind and ca.id == cb.id
        if ca.kind in ("relu", "leaky", "abs", "sign"):
            assert (ca.f, ca.b) == (cb.f, cb.b)
            if ca.kind == "leaky":
                assert ca.alpha == cb.alpha
        elif ca.kind == "max":
            assert ca.f == cb.f and ca.xs == cb.xs
        else:
            assert len(ca.disjuncts) == len(cb.disjuncts)
            for da, db in zip(ca.disjuncts, cb.disjuncts):
                assert da.var_bounds == db.var_bounds
                assert not da.inequalities and not db.inequalities


class TestQueryFormat:
    def test_round_trip_many(self, nprng):
        rng = nprng
        for _ in range(500):
            q = random_query(rng)
            assert_queries_equal(q, parse_query_file(write_query_file(q)))

    def test_minimal_document(self):
        q = parse_query_file("MQ1\nvars 1\nbound 0 0 1\n")
        assert q.num_variables == 1
        assert q.bounds.interval(0) == (0.0, 1.0)

    def test_infinite_bound_tokens(self):
        q = parse_query_file("MQ1\nvars 2\nbound 0 -inf 3.5\nbound 1 0.25 inf\n")
        assert q.bounds.interval(0) == (-INF, 3.5)
        assert q.bounds.interval(1) == (0.25, INF)

    def test_comments_and_blank_lines(self):
        text = "# preamble\n\nMQ1\n# mid\nvars 1\n\nbound 0 0 1\n# end\n"
        assert parse_query_file(text).num_variables == 1

    def test_index_out_of_range(self):
        with pytest.raises(ParseError, match="out of range"):
            parse_query_file("MQ1\nvars 2\nrelu 2 1\n")

    def test_unknown_tag(self):
        with pytest.raises(ParseError, match="unknown record tag"):
            parse_query_file("MQ1\nvars 1\nfrobnicate 0\n")

    def test_missing_header(self):
        with pytest.raises(ParseError, match="MQ1"):
            parse_query_file("vars 1\n")

    def test_record_before_vars(self):
        with pytest.raises(ParseError, match="before vars"):
            parse_query_file("MQ1\nbound 0 0 1\n")

    def test_disj_missing_cases(self):
        with pytest.raises(ParseError, match="case"):
            parse_query_file("MQ1\nvars 2\ndisj 2\ncase 1 0 0 1\n")

    def test_eq_field_count_error(self):
        with pytest.raises(ParseError, match="eq record"):
            parse_query_file("MQ1\nvars 2\neq = 1.0 2 1.0 0\n")

    def test_awkward_floats_survive(self):
        q = Query(3)
        q.set_lower(0, 0.1)
        q.set_upper(0, 1.0 / 3.0)
        q.set_lower(1, -1.7976931348623157e308)
        q.set_upper(2, 5e-324)
        lhs = LinearExpression({0: 0.30000000000000004, 2: -2.220446049250313e-16})
        q.add_equation(lhs, Relation.LE, 1e17 + 1.0)
        assert_queries_equal(q, parse_query_file(write_query_file(q)))

    def test_normalized_disjunction_serializes(self):
        q = Query(2)
        d1 = Disjunct()
        d1.inequalities.append((LinearExpression({0: 1.0, 1: 1.0}), Relation.LE, 1.0))
        d2 = Disjunct()
        d2.restrict(0, 2.0, INF)
        con = DisjunctionConstraint(0, [d1, d2])
        q.add_constraint(con)
        with pytest.raises(ValueError, match="normalize"):
            write_query_file(q)
        con.normalize(q)
        rt = parse_query_file(write_query_file(q))
        assert rt.num_variables == 3  # slack materialized
        assert len(rt.equations) == 1


class TestResultFormat:
    def test_sat_round_trip(self):
        text = write_result(SolveStatus.SAT, [0.5, -1.0, 3.25])
        status, values = parse_result(text)
        assert status is SolveStatus.SAT
        assert values == {0: 0.5, 1: -1.0, 2: 3.25}

    @pytest.mark.parametrize("status", [SolveStatus.UNSAT, SolveStatus.UNKNOWN,
                                        SolveStatus.TIMEOUT])
    def test_statuses_without_assignment(self, status):
        status2, values = parse_result(write_result(status))
        assert status2 is status and values is None

    def test_sat_without_values_is_an_error(self):
        with pytest.raises(ValueError):
            write_result(SolveStatus.SAT)

    def test_garbage_rejected(self):
        with pytest.raises(ParseError):
            parse_result("maybe\n")
