"""Network-level reasoning: layer graph recovery and whole-network bound
tightening.

Queries built from feed-forward networks keep enough structure in their
rows and activation constraints to rebuild the layer graph. Once rebuilt,
layer-at-a-time analyses tighten variable bounds far beyond what single
constraint propagation can see: an interval sweep, forward affine envelopes
over the inputs, back-substitution, and LP probes of the linear relaxation.

Every analysis only ever *tightens* the store it is handed, so results stay
sound under search-time case splits: a restricted store simply produces
results at least as tight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    INF,
    LinearExpression,
    Query,
    Relation,
    Side,
    TightenOutcome,
)
from .simplex import LPStatus, Tableau

INPUT = "input"
AFFINE = "affine"
ACTIVATION_KINDS = ("relu", "leaky", "abs", "sign", "max")

# slack subtracted from LP optima before tightening, to stay on the sound
# side of simplex roundoff
LP_GUARD = 1e-9


@dataclass
class Layer:
    """One node of the recovered layer graph.

    variables maps neuron index to query variable. Affine layers carry one
    weight matrix per source layer plus a bias vector. Activation layers
    have a single source layer; neuron j reads source neuron src_neuron[j]
    (the identity when the stage is intact, a subset after preprocessing
    collapsed some phases), except max layers, whose per-neuron fan-in over
    the source layer is recorded explicitly.
    """

    id: int
    kind: str
    variables: list[int]
    sources: list[int] = field(default_factory=list)
    weights: dict[int, np.ndarray] | None = None
    bias: np.ndarray | None = None
    alphas: list[float] | None = None
    src_neuron: list[int] | None = None
    fanin: list[list[int]] | None = None

    @property
    def width(self) -> int:
        return len(self.variables)


@dataclass
class NetworkTopology:
    """Layer graph in topological order; layers[i].id == i."""

    layers: list[Layer]
    neuron_of: dict[int, tuple[int, int]]  # variable -> (layer id, neuron)

    @property
    def input_layer(self) -> Layer:
        return self.layers[0]

    def variables(self):
        for layer in self.layers:
            yield from layer.variables


# -- topology recovery -------------------------------------------------------


def infer_topology(query: Query) -> NetworkTopology | None:
    """Rebuild the layer graph, or None when the query does not expose one.

    Greedy: starting from the declared input variables, repeatedly absorb
    either a complete activation stage (constraints of one kind reading one
    finished layer) or an affine stage (variables each pinned by an equality
    row over finished variables). Auxiliary variables introduced by
    normalization never become neurons. Succeeds only when every declared
    output variable lands on some layer; anything left over stays outside
    the graph and is handled by ordinary constraint reasoning.
    """
    inputs = list(query.input_variables)
    if not inputs or len(set(inputs)) != len(inputs):
        return None

    aux: set[int] = set()
    for con in query.pl_constraints:
        aux.update(con.aux)
    if any(v in aux for v in inputs):
        return None

    neuron_of: dict[int, tuple[int, int]] = {}
    layers = [Layer(0, INPUT, list(inputs))]
    for i, v in enumerate(inputs):
        neuron_of[v] = (0, i)

    rows = [
        eq
        for eq in query.equations
        if eq.relation is Relation.EQ
        and eq.lhs.terms
        and not any(v in aux for v in eq.lhs.terms)
    ]
    cons = [c for c in query.pl_constraints if c.kind in ACTIVATION_KINDS]

    while True:
        layer = _next_activation_layer(len(layers), cons, neuron_of, layers)
        if layer is None:
            layer = _next_affine_layer(len(layers), rows, neuron_of, aux, layers)
        if layer is None:
            break
        for i, v in enumerate(layer.variables):
            neuron_of[v] = (layer.id, i)
        layers.append(layer)

    if any(v not in neuron_of for v in query.output_variables):
        return None
    return NetworkTopology(layers, neuron_of)


def _next_activation_layer(next_id, cons, neuron_of, layers):
    ready: dict[tuple[str, int], list] = {}
    for con in cons:
        if con.f in neuron_of:
            continue
        if con.kind == "max":
            if any(x not in neuron_of for x in con.xs):
                continue
            src_ids = {neuron_of[x][0] for x in con.xs}
            if len(src_ids) != 1:
                continue  # fan-in across layers stays engine-only
            ready.setdefault(("max", src_ids.pop()), []).append(con)
        else:
            if con.b not in neuron_of or con.b == con.f:
                continue
            ready.setdefault((con.kind, neuron_of[con.b][0]), []).append(con)

    for (kind, src), group in sorted(ready.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        source = layers[src]
        if kind == "max":
            group.sort(key=lambda c: c.f)
            return Layer(
                next_id,
                "max",
                [c.f for c in group],
                sources=[src],
                fanin=[[neuron_of[x][1] for x in c.xs] for c in group],
            )
        # unary activations: one neuron per constraint; partial coverage of
        # the source is fine (preprocessing may have collapsed some phases)
        ordered = sorted(group, key=lambda c: (neuron_of[c.b][1], c.f))
        layer = Layer(
            next_id,
            kind,
            [c.f for c in ordered],
            sources=[src],
            src_neuron=[neuron_of[c.b][1] for c in ordered],
        )
        if kind == "leaky":
            layer.alphas = [c.alpha for c in ordered]
        return layer
    return None


def _next_affine_layer(next_id, rows, neuron_of, aux, layers):
    defs: dict[int, object] = {}
    for eq in rows:
        pending = [v for v in eq.lhs.terms if v not in neuron_of]
        if len(pending) != 1:
            continue
        v = pending[0]
        if v in aux or v in defs:
            continue
        defs[v] = eq
    if not defs:
        return None

    variables = sorted(defs)
    src_ids = sorted(
        {neuron_of[u][0] for v in variables for u in defs[v].lhs.terms if u != v}
    )
    weights = {s: np.zeros((len(variables), layers[s].width)) for s in src_ids}
    bias = np.zeros(len(variables))
    for j, v in enumerate(variables):
        eq = defs[v]
        cv = eq.lhs.terms[v]
        bias[j] = (eq.rhs - eq.lhs.constant) / cv
        for u, cu in eq.lhs.terms.items():
            if u == v:
                continue
            s, i = neuron_of[u]
            weights[s][j, i] += -cu / cv
    return Layer(next_id, AFFINE, variables, sources=src_ids, weights=weights, bias=bias)


# -- forward evaluation ------------------------------------------------------


def evaluate(topology: NetworkTopology, input_values) -> dict[int, np.ndarray]:
    """Run the recovered network forward; returns values keyed by layer id."""
    x0 = np.asarray(input_values, dtype=float)
    if x0.shape != (topology.input_layer.width,):
        raise ValueError("input width mismatch")
    vals = {0: x0}
    for layer in topology.layers[1:]:
        if layer.kind == AFFINE:
            acc = layer.bias.copy()
            for s, w in layer.weights.items():
                acc = acc + w @ vals[s]
            vals[layer.id] = acc
        elif layer.kind == "max":
            src = vals[layer.sources[0]]
            vals[layer.id] = np.array([max(src[i] for i in fan) for fan in layer.fanin])
        else:
            src = vals[layer.sources[0]]
            vals[layer.id] = _act_forward(layer, src[layer.src_neuron])
    return vals


def _act_forward(layer: Layer, x: np.ndarray) -> np.ndarray:
    if layer.kind == "relu":
        return np.maximum(x, 0.0)
    if layer.kind == "abs":
        return np.abs(x)
    if layer.kind == "sign":
        return np.where(x >= 0.0, 1.0, -1.0)
    if layer.kind == "leaky":
        return np.where(x >= 0.0, x, np.asarray(layer.alphas) * x)
    raise ValueError(f"not an activation layer: {layer.kind}")


# -- shared helpers ----------------------------------------------------------


def _tighten_interval(store, var, lb, ub):
    """Push [lb, ub] into the store; returns (outcome, tightenings)."""
    n = 0
    if lb > -INF:
        r = store.tighten(var, Side.LOWER, lb)
        if r is TightenOutcome.INFEASIBLE:
            return r, n
        if r is TightenOutcome.TIGHTENED:
            n += 1
    if ub < INF:
        r = store.tighten(var, Side.UPPER, ub)
        if r is TightenOutcome.INFEASIBLE:
            return r, n
        if r is TightenOutcome.TIGHTENED:
            n += 1
    return TightenOutcome.NO_CHANGE, n


def _act_interval(kind, alpha, l, u):
    """Exact image of [l, u] under one activation."""
    if kind == "relu":
        return max(0.0, l), max(0.0, u)
    if kind == "abs":
        if l >= 0.0:
            return l, u
        if u <= 0.0:
            return -u, -l
        return 0.0, max(-l, u)
    if kind == "sign":
        if l >= 0.0:
            return 1.0, 1.0
        if u < 0.0:
            return -1.0, -1.0
        return -1.0, 1.0
    if kind == "leaky":
        return (l if l >= 0.0 else alpha * l), (u if u >= 0.0 else alpha * u)
    raise ValueError(kind)


def _act_relax(kind, alpha, l, u):
    """Single-slope bracket (lo_s, lo_c, up_s, up_c) with
    lo_s*x + lo_c <= g(x) <= up_s*x + up_c for x in [l, u].

    The phase-split cases are exact; the mixed cases use the chord above a
    convex piece and the steeper of the two piece slopes below, preferring
    slope one on ties. Requires finite l, u in the mixed cases.
    """
    if kind == "relu":
        if l >= 0.0:
            return 1.0, 0.0, 1.0, 0.0
        if u <= 0.0:
            return 0.0, 0.0, 0.0, 0.0
        su = u / (u - l)
        return (1.0 if u >= -l else 0.0), 0.0, su, -su * l
    if kind == "abs":
        if l >= 0.0:
            return 1.0, 0.0, 1.0, 0.0
        if u <= 0.0:
            return -1.0, 0.0, -1.0, 0.0
        s = (u + l) / (u - l)
        return 0.0, 0.0, s, u * (1.0 - s)
    if kind == "leaky":
        if l >= 0.0:
            return 1.0, 0.0, 1.0, 0.0
        if u <= 0.0:
            return alpha, 0.0, alpha, 0.0
        su = (u - alpha * l) / (u - l)
        return (1.0 if u >= -l else alpha), 0.0, su, u * (1.0 - su)
    if kind == "sign":
        if l >= 0.0:
            return 0.0, 1.0, 0.0, 1.0
        if u < 0.0:
            return 0.0, -1.0, 0.0, -1.0
        return 0.0, -1.0, 0.0, 1.0
    raise ValueError(kind)


def _finite_box(store, layer):
    lo = [store.lower(v) for v in layer.variables]
    hi = [store.upper(v) for v in layer.variables]
    if any(l <= -INF for l in lo) or any(h >= INF for h in hi):
        return None
    return lo, hi


# -- interval sweep ----------------------------------------------------------


def interval_bound_propagation(topology, store):
    """One forward interval sweep; every improvement lands in the store.

    Works with infinite bounds; each layer's working interval is the store
    interval after tightening, so restrictions already on the store sharpen
    everything downstream.
    """
    count = 0
    lo = {0: [store.lower(v) for v in topology.input_layer.variables]}
    hi = {0: [store.upper(v) for v in topology.input_layer.variables]}
    for layer in topology.layers[1:]:
        if layer.kind == AFFINE:
            cl, ch = _affine_interval(layer, lo, hi)
        elif layer.kind == "max":
            sl, sh = lo[layer.sources[0]], hi[layer.sources[0]]
            cl = [max(sl[i] for i in fan) for fan in layer.fanin]
            ch = [max(sh[i] for i in fan) for fan in layer.fanin]
        else:
            sl, sh = lo[layer.sources[0]], hi[layer.sources[0]]
            pairs = [
                _act_interval(layer.kind, layer.alphas[j] if layer.alphas else 0.0,
                              sl[sj], sh[sj])
                for j, sj in enumerate(layer.src_neuron)
            ]
            cl = [p[0] for p in pairs]
            ch = [p[1] for p in pairs]
        llo, lhi = [], []
        for j, v in enumerate(layer.variables):
            r, n = _tighten_interval(store, v, cl[j], ch[j])
            count += n
            if r is TightenOutcome.INFEASIBLE:
                return r, count
            a, b = store.interval(v)
            llo.append(a)
            lhi.append(b)
        lo[layer.id] = llo
        hi[layer.id] = lhi
    return (TightenOutcome.TIGHTENED if count else TightenOutcome.NO_CHANGE), count


def _affine_interval(layer, lo, hi):
    # sign-split products, written out to keep 0 * inf from poisoning sums
    cl = [float(b) for b in layer.bias]
    ch = [float(b) for b in layer.bias]
    for s, w in layer.weights.items():
        sl, sh = lo[s], hi[s]
        for j in range(layer.width):
            row = w[j]
            a, b = cl[j], ch[j]
            for i in range(len(sl)):
                wij = row[i]
                if wij > 0.0:
                    a += wij * sl[i]
                    b += wij * sh[i]
                elif wij < 0.0:
                    a += wij * sh[i]
                    b += wij * sl[i]
            cl[j], ch[j] = a, b
    return cl, ch


# -- forward affine envelopes ------------------------------------------------


def symbolic_bound_propagation(topology, store):
    """Forward pass carrying per-neuron affine envelopes over the inputs.

    Every neuron gets a lower and an upper affine function written directly
    over the input variables; activations relax to one slope per side and
    compose into the incoming envelope. Concretization against the input
    box yields the bounds. Needs a finite input box; returns unchanged
    otherwise.
    """
    box = _finite_box(store, topology.input_layer)
    if box is None:
        return TightenOutcome.NO_CHANGE, 0
    box_lo = np.array(box[0])
    box_hi = np.array(box[1])
    n_in = topology.input_layer.width

    count = 0
    eye = np.eye(n_in)
    zero = np.zeros(n_in)
    sym = {0: (eye, zero.copy(), eye.copy(), zero.copy())}
    conc = {0: (box[0], box[1])}

    for layer in topology.layers[1:]:
        if layer.kind == AFFINE:
            L = np.zeros((layer.width, n_in))
            U = np.zeros((layer.width, n_in))
            lc = np.array(layer.bias, dtype=float)
            uc = np.array(layer.bias, dtype=float)
            for s, w in layer.weights.items():
                SL, slc, SU, suc = sym[s]
                wp = np.clip(w, 0.0, None)
                wn = np.clip(w, None, 0.0)
                L += wp @ SL + wn @ SU
                lc += wp @ slc + wn @ suc
                U += wp @ SU + wn @ SL
                uc += wp @ suc + wn @ slc
        else:
            src = layer.sources[0]
            SL, slc, SU, suc = sym[src]
            scl, sch = conc[src]
            L = np.zeros((layer.width, n_in))
            U = np.zeros((layer.width, n_in))
            lc = np.zeros(layer.width)
            uc = np.zeros(layer.width)
            if layer.kind == "max":
                for j, fan in enumerate(layer.fanin):
                    i_lo = max(fan, key=lambda i: scl[i])
                    others = [sch[i] for i in fan if i != i_lo]
                    L[j], lc[j] = SL[i_lo], slc[i_lo]
                    if not others or scl[i_lo] >= max(others):
                        U[j], uc[j] = SU[i_lo], suc[i_lo]  # one input dominates
                    else:
                        uc[j] = max(sch[i] for i in fan)
            else:
                for j, sj in enumerate(layer.src_neuron):
                    alpha = layer.alphas[j] if layer.alphas else 0.0
                    s_lo, c_lo, s_up, c_up = _act_relax(layer.kind, alpha, scl[sj], sch[sj])
                    if layer.kind == "relu" and scl[sj] < 0.0 < sch[sj]:
                        s_lo = 0.0  # cheap variant: drop the lower envelope entirely
                    if s_lo >= 0.0:
                        L[j] = s_lo * SL[sj]
                        lc[j] = s_lo * slc[sj] + c_lo
                    else:
                        L[j] = s_lo * SU[sj]
                        lc[j] = s_lo * suc[sj] + c_lo
                    if s_up >= 0.0:
                        U[j] = s_up * SU[sj]
                        uc[j] = s_up * suc[sj] + c_up
                    else:
                        U[j] = s_up * SL[sj]
                        uc[j] = s_up * slc[sj] + c_up
        sym[layer.id] = (L, lc, U, uc)

        lp, ln = np.clip(L, 0.0, None), np.clip(L, None, 0.0)
        up, un = np.clip(U, 0.0, None), np.clip(U, None, 0.0)
        cl = lp @ box_lo + ln @ box_hi + lc
        ch = up @ box_hi + un @ box_lo + uc
        llo, lhi = [], []
        for j, v in enumerate(layer.variables):
            r, n = _tighten_interval(store, v, float(cl[j]), float(ch[j]))
            count += n
            if r is TightenOutcome.INFEASIBLE:
                return r, count
            a, b = store.interval(v)
            llo.append(a)
            lhi.append(b)
        conc[layer.id] = (llo, lhi)
    return (TightenOutcome.TIGHTENED if count else TightenOutcome.NO_CHANGE), count


# -- back-substitution -------------------------------------------------------


def deeppoly(topology, store):
    """Back-substitution analysis.

    Each neuron gets one affine lower and one affine upper relation over its
    source layer; concretization substitutes relations backwards toward the
    input box, keeping the tightest value seen at any substitution depth.
    Activation outputs are additionally clamped to the plain image of their
    source interval, so results are never looser than the interval sweep.
    Needs a finite input box; returns unchanged otherwise.
    """
    box = _finite_box(store, topology.input_layer)
    if box is None:
        return TightenOutcome.NO_CHANGE, 0

    conc = {0: (box[0], box[1])}
    rel_lo: dict[int, list] = {}
    rel_up: dict[int, list] = {}
    count = 0
    for layer in topology.layers[1:]:
        _build_relations(layer, conc, rel_lo, rel_up)
        llo, lhi = [], []
        for j, v in enumerate(layer.variables):
            cl = _backsub(rel_lo, rel_up, conc, layer.id, j, lower=True)
            ch = _backsub(rel_lo, rel_up, conc, layer.id, j, lower=False)
            if layer.kind == "max":
                scl, sch = conc[layer.sources[0]]
                fan = layer.fanin[j]
                cl = max(cl, max(scl[i] for i in fan))
                ch = min(ch, max(sch[i] for i in fan))
            elif layer.kind != AFFINE:
                scl, sch = conc[layer.sources[0]]
                sj = layer.src_neuron[j]
                alpha = layer.alphas[j] if layer.alphas else 0.0
                il, ih = _act_interval(layer.kind, alpha, scl[sj], sch[sj])
                cl = max(cl, il)
                ch = min(ch, ih)
            r, n = _tighten_interval(store, v, cl, ch)
            count += n
            if r is TightenOutcome.INFEASIBLE:
                return r, count
            a, b = store.interval(v)
            llo.append(a)
            lhi.append(b)
        conc[layer.id] = (llo, lhi)
    return (TightenOutcome.TIGHTENED if count else TightenOutcome.NO_CHANGE), count


def _build_relations(layer, conc, rel_lo, rel_up):
    los, ups = [], []
    if layer.kind == AFFINE:
        for j in range(layer.width):
            expr = ({s: w[j] for s, w in layer.weights.items()}, float(layer.bias[j]))
            los.append(expr)
            ups.append(expr)
    elif layer.kind == "max":
        src = layer.sources[0]
        scl, sch = conc[src]
        sw = len(scl)
        for fan in layer.fanin:
            i_lo = max(fan, key=lambda i: scl[i])
            vec = np.zeros(sw)
            vec[i_lo] = 1.0
            los.append(({src: vec}, 0.0))
            others = [sch[i] for i in fan if i != i_lo]
            if not others or scl[i_lo] >= max(others):
                ups.append(({src: vec}, 0.0))  # one input dominates
            else:
                ups.append(({}, max(sch[i] for i in fan)))
    else:
        src = layer.sources[0]
        scl, sch = conc[src]
        sw = len(scl)
        for j, sj in enumerate(layer.src_neuron):
            alpha = layer.alphas[j] if layer.alphas else 0.0
            s_lo, c_lo, s_up, c_up = _act_relax(layer.kind, alpha, scl[sj], sch[sj])
            vlo = np.zeros(sw)
            vlo[sj] = s_lo
            vup = np.zeros(sw)
            vup[sj] = s_up
            los.append(({src: vlo}, c_lo))
            ups.append(({src: vup}, c_up))
    rel_lo[layer.id] = los
    rel_up[layer.id] = ups


def _backsub(rel_lo, rel_up, conc, lid, j, lower):
    rel = (rel_lo if lower else rel_up)[lid][j]
    expr = {s: vec.copy() for s, vec in rel[0].items()}
    const = rel[1]
    best = _conc_value(expr, const, conc, lower)
    while True:
        pending = [s for s in expr if s != 0]
        if not pending:
            break
        m = max(pending)
        vec = expr.pop(m)
        for i, c in enumerate(vec):
            if c == 0.0:
                continue
            # lower bound keeps lower relations on positive coefficients
            sub = (rel_lo if (c > 0.0) == lower else rel_up)[m][i]
            for s2, v2 in sub[0].items():
                if s2 in expr:
                    expr[s2] = expr[s2] + c * v2
                else:
                    expr[s2] = c * v2
            const += c * sub[1]
        best = _pick(best, _conc_value(expr, const, conc, lower), lower)
    return best


def _pick(a, b, lower):
    return max(a, b) if lower else min(a, b)


def _conc_value(expr, const, conc, lower):
    total = const
    for s, vec in expr.items():
        clo, chi = conc[s]
        for i, c in enumerate(vec):
            if c > 0.0:
                total += c * (clo[i] if lower else chi[i])
            elif c < 0.0:
                total += c * (chi[i] if lower else clo[i])
    return total


# -- LP probing --------------------------------------------------------------


def lp_tightening(topology, query, store=None, targets=None):
    """Probe the linear relaxation with one LP per bound.

    The rows plus current bounds already relax the query soundly; the one
    extra ingredient is the cap aux <= -lb(b) on each unfixed relu, which
    holds exactly since aux = f - b = max(-b, 0). Minimizing then maximizing
    each target variable tightens its bounds to the relaxation's range. By
    default targets every affine neuron feeding an activation layer.

    Rows must all be equalities, i.e. the query must be normalized. An
    infeasible LP is reported upward, never swallowed.
    """
    if store is None:
        store = query.bounds
    count = 0
    for con in query.pl_constraints:
        if con.kind != "relu" or not con.aux:
            continue
        l, u = store.interval(con.b)
        if l > -INF and l < 0.0 < u:
            r = store.tighten(con.aux[0], Side.UPPER, -l)
            if r is TightenOutcome.INFEASIBLE:
                return r, count
            if r is TightenOutcome.TIGHTENED:
                count += 1
    if store.is_infeasible():
        return TightenOutcome.INFEASIBLE, count

    if targets is None:
        targets = pre_activation_variables(topology)
    if not targets:
        return (TightenOutcome.TIGHTENED if count else TightenOutcome.NO_CHANGE), count

    tab = Tableau(query.equations, store)
    for v in targets:
        for sign_, side in ((1.0, Side.LOWER), (-1.0, Side.UPPER)):
            res = tab.solve(LinearExpression({v: sign_}))
            if res.status is LPStatus.INFEASIBLE:
                return TightenOutcome.INFEASIBLE, count
            if res.status is not LPStatus.OPTIMAL:
                continue
            r = store.tighten(v, side, sign_ * res.objective - sign_ * LP_GUARD)
            if r is TightenOutcome.INFEASIBLE:
                return r, count
            if r is TightenOutcome.TIGHTENED:
                count += 1
                tab.notify_bound_update(v)
    return (TightenOutcome.TIGHTENED if count else TightenOutcome.NO_CHANGE), count


def pre_activation_variables(topology):
    """Affine-layer variables read by some activation layer."""
    feeds = set()
    for layer in topology.layers:
        if layer.kind in ACTIVATION_KINDS:
            feeds.update(layer.sources)
    out = []
    for lid in sorted(feeds):
        src = topology.layers[lid]
        if src.kind == AFFINE:
            out.extend(src.variables)
    return out


# -- default schedule --------------------------------------------------------


def tighten_bounds(topology, query, store=None, use_lp=False):
    """Interval sweep as a cheap warm-up, then back-substitution, then the
    optional LP probe. Returns (outcome, total tightenings)."""
    if store is None:
        store = query.bounds
    total = 0
    for step in (interval_bound_propagation, deeppoly):
        r, n = step(topology, store)
        total += n
        if r is TightenOutcome.INFEASIBLE:
            return r, total
    if use_lp:
        r, n = lp_tightening(topology, query, store)
        total += n
        if r is TightenOutcome.INFEASIBLE:
            return r, total
    return (TightenOutcome.TIGHTENED if total else TightenOutcome.NO_CHANGE), total
