import random

import pytest

from pwlsat.core import (
    AbsConstraint,
    Disjunct,
    DisjunctionConstraint,
    LeakyReluConstraint,
    LinearExpression,
    MaxConstraint,
    Query,
    Relation,
    ReluConstraint,
    SignConstraint,
)


@pytest.fixture
def rng():
    return random.Random(20240817)


@pytest.fixture
def nprng():
    import numpy as np
    return np.random.default_rng(20240817)


def complete_assignment(query, known):
    """Extend input values to all variables by running equations and
    piecewise-linear semantics to a fixpoint. Test-side interpreter,
    independent of any solver code."""
    values = dict(known)
    eqs = list(query.equations)
    cons = list(query.pl_constraints)
    for _ in range(len(eqs) + len(cons) + 2):
        progress = False
        for eq in eqs:
            unknown = [v for v in eq.lhs.terms if v not in values]
            if len(unknown) != 1 or eq.relation is not Relation.EQ:
                continue
            u = unknown[0]
            rest = sum(c * values[v] for v, c in eq.lhs.terms.items() if v != u)
            values[u] = (eq.rhs - eq.lhs.constant - rest) / eq.lhs.terms[u]
            progress = True
        for con in cons:
            if con.kind == "relu" and con.b in values and con.f not in values:
                values[con.f] = max(0.0, values[con.b])
                progress = True
            elif con.kind == "leaky" and con.b in values and con.f not in values:
                b = values[con.b]
                values[con.f] = b if b >= 0 else con.alpha * b
                progress = True
            elif con.kind == "abs" and con.b in values and con.f not in values:
                values[con.f] = abs(values[con.b])
                progress = True
            elif con.kind == "sign" and con.b in values and con.f not in values:
                values[con.f] = 1.0 if values[con.b] >= 0 else -1.0
                progress = True
            elif con.kind == "max" and con.f not in values and all(
                    x in values for x in con.xs):
                values[con.f] = max(values[x] for x in con.xs)
                progress = True
        if not progress:
            break
    out = []
    for v in range(query.num_variables):
        if v not in values:
            raise AssertionError(f"variable {v} not determined by forward closure")
        out.append(values[v])
    return out


def make_layered_query(rng, n_inputs=2, layers=(("relu", 2),), n_outputs=1,
                       input_box=(-1.0, 1.0), weight_scale=2.0):
    """Random feed-forward query built directly on core types.

    layers: sequence of (kind, width); kind in relu/abs/leaky/sign/max.
    Max layers take per-neuron random fan-in from the previous layer and
    skip the affine step. Returns (query, forward) where forward(inputs)
    evaluates the generating network exactly.
    """
    q = Query()
    prev = [q.add_variable(input_box[0], input_box[1]) for _ in range(n_inputs)]
    q.input_variables = list(prev)
    program = [("input", None)]

    def rand_w():
        return round(rng.uniform(-weight_scale, weight_scale), 2)

    for kind, width in layers:
        if kind == "max":
            cur = []
            fanins = []
            for _ in range(width):
                k = rng.randint(2, min(3, len(prev)))
                fan = rng.sample(range(len(prev)), k)
                f = q.add_variable()
                q.add_constraint(MaxConstraint(q.next_constraint_id(), f, [prev[i] for i in fan]))
                cur.append(f)
                fanins.append(fan)
            program.append(("max", fanins))
            prev = cur
            continue
        weights = [[rand_w() for _ in prev] for _ in range(width)]
        biases = [rand_w() for _ in range(width)]
        pre = []
        for j in range(width):
            v = q.add_variable()
            lhs = LinearExpression({v: -1.0})
            for i, p in enumerate(prev):
                lhs.add_term(p, weights[j][i])
            q.add_equation(lhs, Relation.EQ, -biases[j])
            pre.append(v)
        cur = []
        alpha = 0.1
        for j in range(width):
            f = q.add_variable()
            cid = q.next_constraint_id()
            if kind == "relu":
                q.add_constraint(ReluConstraint(cid, f, pre[j]))
            elif kind == "abs":
                q.add_constraint(AbsConstraint(cid, f, pre[j]))
            elif kind == "leaky":
                q.add_constraint(LeakyReluConstraint(cid, f, pre[j], alpha))
            elif kind == "sign":
                q.add_constraint(SignConstraint(cid, f, pre[j]))
            else:
                raise ValueError(kind)
            cur.append(f)
        program.append((kind, (weights, biases, alpha)))
        prev = cur

    out_w = [[rand_w() for _ in prev] for _ in range(n_outputs)]
    out_b = [rand_w() for _ in range(n_outputs)]
    outs = []
    for j in range(n_outputs):
        v = q.add_variable()
        lhs = LinearExpression({v: -1.0})
        for i, p in enumerate(prev):
            lhs.add_term(p, out_w[j][i])
        q.add_equation(lhs, Relation.EQ, -out_b[j])
        outs.append(v)
    q.output_variables = outs
    program.append(("affine_out", (out_w, out_b)))

    def forward(xs):
        vals = list(xs)
        idx = 1
        for kind, payload in program[1:]:
            if kind == "max":
                vals = [max(vals[i] for i in fan) for fan in payload]
            elif kind == "affine_out":
                w, b = payload
                vals = [sum(wi * v for wi, v in zip(row, vals)) + bj
                        for row, bj in zip(w, b)]
            else:
                w, b, alpha = payload
                pre = [sum(wi * v for wi, v in zip(row, vals)) + bj
                       for row, bj in zip(w, b)]
                if kind == "relu":
                    vals = [max(0.0, p) for p in pre]
                elif kind == "abs":
                    vals = [abs(p) for p in pre]
                elif kind == "leaky":
                    vals = [p if p >= 0 else alpha * p for p in pre]
                elif kind == "sign":
                    vals = [1.0 if p >= 0 else -1.0 for p in pre]
            idx += 1
        return vals

    return q, forward


def add_output_property(rng, query, forward, n_samples=40, target="mixed"):
    """Attach a random linear output inequality.

    Thresholds are drawn from sampled output values so that both satisfiable
    and unsatisfiable queries occur; target='unsat_hard' pushes the threshold
    above everything seen to favor unsatisfiable instances that still need
    search.
    """
    coeffs = [round(rng.uniform(-1.5, 1.5), 2) or 1.0 for _ in query.output_variables]
    lo, hi = query.bounds.interval(query.input_variables[0])
    samples = []
    for _ in range(n_samples):
        xs = [rng.uniform(*query.bounds.interval(v)) for v in query.input_variables]
        ys = forward(xs)
        samples.append(sum(c * y for c, y in zip(coeffs, ys)))
    smin, smax = min(samples), max(samples)
    span = max(smax - smin, 0.5)
    if target == "mixed":
        t = rng.uniform(smin - 0.3 * span, smax + 0.3 * span)
    elif target == "sat":
        t = rng.uniform(smin, smax)
    else:  # unsat_hard
        t = smax + rng.uniform(0.05, 0.4) * span
    lhs = LinearExpression({v: c for v, c in zip(query.output_variables, coeffs) if c})
    query.add_equation(lhs, Relation.GE, t)
    return t


def make_disjunction_query(rng):
    """Small query with a 2-3 disjunct output disjunction."""
    q, forward = make_layered_query(
        rng, n_inputs=2, layers=(("relu", 2),), n_outputs=2)
    y0, y1 = q.output_variables
    n = rng.randint(2, 3)
    disjuncts = []
    for _ in range(n):
        d = Disjunct()
        if rng.random() < 0.5:
            d.var_bounds[y0] = (round(rng.uniform(-3, 1), 2), float("inf"))
        else:
            expr = LinearExpression({y0: 1.0, y1: round(rng.uniform(-1.5, 1.5), 2)})
            rel = Relation.LE if rng.random() < 0.5 else Relation.GE
            d.inequalities.append((expr, rel, round(rng.uniform(-2, 2), 2)))
        disjuncts.append(d)
    q.add_constraint(DisjunctionConstraint(q.next_constraint_id(), disjuncts))
    return q, forward
