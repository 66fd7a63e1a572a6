"""Bounded-variable simplex over a fixed row set.

The tableau is built once per query: rows are the EQ equations, columns are
the query variables plus one logical variable per row (bounds [0, 0], giving
the initial basis). It never gains or loses rows afterwards; case splits and
analysis tightenings only move bounds, and solve() restores feasibility from
the warm basis. Infeasibility comes with a Farkas ray over the equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import INF, LinearExpression, Relation

LP_FEAS_TOL = 1e-7   # basic variable bound violation considered real
DUAL_TOL = 1e-9      # reduced-cost / pricing threshold
PIVOT_TOL = 1e-9     # smallest acceptable pivot element
RAY_EPS = 1e-12      # drop ray entries below this
REFACTOR_EVERY = 50


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPNumericalError(Exception):
    pass


@dataclass
class LPResult:
    status: LPStatus
    values: list[float] | None = None
    objective: float | None = None
    ray: dict[int, float] | None = None
    pivots: int = 0
    unbounded_var: int | None = None
    unbounded_direction: int = 0


_BASIC, _AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2, 3


class Tableau:
    def __init__(self, equations, store):
        for eq in equations:
            if eq.relation is not Relation.EQ:
                raise ValueError(f"equation {eq.id} is not an equality")
        self._equations = list(equations)
        self._store = store
        self._n = store.num_vars
        m = len(self._equations)
        self._m = m
        n_total = self._n + m
        self._nt = n_total

        a = np.zeros((m, n_total))
        rhs = np.zeros(m)
        for i, eq in enumerate(self._equations):
            for var, coeff in eq.lhs.terms.items():
                if var >= self._n:
                    raise ValueError(f"equation {eq.id} references unknown variable {var}")
                a[i, var] = coeff
            a[i, self._n + i] = 1.0
            rhs[i] = eq.rhs - eq.lhs.constant
        self._a = a
        self._rhs = rhs

        self._basis = np.array([self._n + i for i in range(m)], dtype=int)
        self._in_basis_row = {self._n + i: i for i in range(m)}
        self._binv = np.eye(m)
        self._status = np.full(n_total, _AT_LOWER, dtype=int)
        self._status[self._basis] = _BASIC
        self._x = np.zeros(n_total)
        self._lo = np.zeros(n_total)
        self._up = np.zeros(n_total)
        self.total_pivots = 0
        self._pivots_since_refactor = 0
        self._degenerate_run = 0

    @property
    def num_rows(self) -> int:
        return self._m

    def notify_bound_update(self, var: int) -> None:
        """O(1) bookkeeping; the real refresh happens lazily at solve()."""
        if var >= self._n or self._status[var] == _BASIC:
            return
        lo, up = self._store.interval(var)
        self._x[var] = min(max(self._x[var], lo), up) if lo <= up else 0.5 * (lo + up)

    # -- bound snapshot ----------------------------------------------------

    def _snapshot_bounds(self):
        lo = self._lo
        up = self._up
        for v in range(self._n):
            l, u = self._store.interval(v)
            if l > u:
                # crossed within the feasibility tolerance: snap to midpoint
                l = u = 0.5 * (l + u)
            lo[v] = l
            up[v] = u
        lo[self._n:] = 0.0
        up[self._n:] = 0.0

    def _refresh(self):
        self._snapshot_bounds()
        x, lo, up, st = self._x, self._lo, self._up, self._status
        for v in range(self._nt):
            if st[v] == _BASIC:
                continue
            l, u = lo[v], up[v]
            if l == -INF and u == INF:
                st[v] = _FREE
            elif l == -INF:
                st[v] = _AT_UPPER
                x[v] = u
            elif u == INF:
                st[v] = _AT_LOWER
                x[v] = l
            elif x[v] - l <= u - x[v]:
                st[v] = _AT_LOWER
                x[v] = l
            else:
                st[v] = _AT_UPPER
                x[v] = u
        self._recompute_basics()

    def _recompute_basics(self):
        xn = self._x.copy()
        xn[self._basis] = 0.0
        r = self._rhs - self._a @ xn
        self._x[self._basis] = self._binv @ r

    def _refactorize(self):
        b = self._a[:, self._basis]
        try:
            self._binv = np.linalg.inv(b)
        except np.linalg.LinAlgError as exc:
            raise LPNumericalError("singular basis") from exc
        self._pivots_since_refactor = 0
        self._recompute_basics()

    # -- pivoting ----------------------------------------------------------

    def _column(self, j: int) -> np.ndarray:
        return self._binv @ self._a[:, j]

    def _ratio_test(self, j: int, t: int, d: np.ndarray, phase1: bool):
        """Smallest step before a bound is hit.

        Returns (delta, blocking row or -1 for the entering variable's own
        bound, side hit). delta may be INF when nothing blocks.
        """
        x, lo, up = self._x, self._lo, self._up
        best = INF
        best_row = -1
        best_side = _AT_UPPER if t > 0 else _AT_LOWER
        best_piv = 0.0
        if t > 0:
            own = up[j] - x[j] if up[j] < INF else INF
        else:
            own = x[j] - lo[j] if lo[j] > -INF else INF
        if own < best:
            best = own
        for i in range(self._m):
            rate = -d[i] * t
            if abs(rate) <= 1e-11:
                continue
            bi = self._basis[i]
            v = x[bi]
            l, u = lo[bi], up[bi]
            if phase1 and v < l - LP_FEAS_TOL:
                if rate > 0:
                    step = (l - v) / rate
                    side = _AT_LOWER
                else:
                    continue
            elif phase1 and v > u + LP_FEAS_TOL:
                if rate < 0:
                    step = (u - v) / rate
                    side = _AT_UPPER
                else:
                    continue
            elif rate > 0:
                if u == INF:
                    continue
                step = (u - v) / rate
                side = _AT_UPPER
            else:
                if l == -INF:
                    continue
                step = (l - v) / rate
                side = _AT_LOWER
            if step < 0.0:
                step = 0.0
            if step < best - 1e-12:
                take = True
            elif step <= best + 1e-12 and best_row >= 0:
                # tie among blocking rows: Bland wants the lowest variable
                # index, the default prefers a larger pivot element
                if self._degenerate_run > self._bland_threshold():
                    take = bi < self._basis[best_row]
                else:
                    take = abs(d[i]) > abs(best_piv)
            else:
                take = False
            if take:
                best = min(best, step)
                best_row = i
                best_side = side
                best_piv = d[i]
        return best, best_row, best_side

    def _bland_threshold(self) -> int:
        return 3 * (self._m + self._nt)

    def _apply_pivot(self, j: int, t: int, delta: float, row: int, side: int, d: np.ndarray):
        x = self._x
        if delta != 0.0:
            x[j] += t * delta
            x[self._basis] += (-d * t) * delta
        if row < 0:
            # bound flip, basis unchanged
            self._status[j] = side
            x[j] = self._up[j] if side == _AT_UPPER else self._lo[j]
            if delta <= 1e-12:
                self._degenerate_run += 1
            else:
                self._degenerate_run = 0
            return
        piv = d[row]
        if abs(piv) < PIVOT_TOL:
            raise LPNumericalError("tiny pivot slipped through")
        leaving = self._basis[row]
        self._status[leaving] = side
        x[leaving] = self._up[leaving] if side == _AT_UPPER else self._lo[leaving]
        self._status[j] = _BASIC
        self._basis[row] = j
        del self._in_basis_row[leaving]
        self._in_basis_row[j] = row
        # eta update of the explicit inverse
        self._binv[row, :] /= piv
        col = d.copy()
        col[row] = 0.0
        self._binv -= np.outer(col, self._binv[row, :])
        self.total_pivots += 1
        self._pivots_since_refactor += 1
        if delta <= 1e-12:
            self._degenerate_run += 1
        else:
            self._degenerate_run = 0
        if self._pivots_since_refactor >= REFACTOR_EVERY:
            self._refactorize()

    def _pick_entering(self, score: np.ndarray, banned: set[int]):
        """score[j] > 0 means increasing x_j improves, < 0 means decreasing.
        Returns (j, t) or (None, 0)."""
        st, lo, up = self._status, self._lo, self._up
        bland = self._degenerate_run > self._bland_threshold()
        best_j = None
        best_t = 0
        best_mag = DUAL_TOL
        for j in range(self._nt):
            s = st[j]
            if s == _BASIC or j in banned:
                continue
            if lo[j] == up[j]:
                continue
            z = score[j]
            if s == _AT_LOWER:
                ok = z > DUAL_TOL
                t = 1
            elif s == _AT_UPPER:
                ok = z < -DUAL_TOL
                t = -1
            else:  # free
                ok = abs(z) > DUAL_TOL
                t = 1 if z > 0 else -1
            if not ok:
                continue
            if bland:
                return j, t
            if abs(z) > best_mag:
                best_mag = abs(z)
                best_j = j
                best_t = t
        return best_j, best_t

    # -- phase 1: restore bound feasibility --------------------------------

    def _violation_signs(self):
        sigma = np.zeros(self._m)
        worst = 0.0
        x, lo, up = self._x, self._lo, self._up
        for i in range(self._m):
            bi = self._basis[i]
            v = x[bi]
            if v < lo[bi] - LP_FEAS_TOL:
                sigma[i] = -1.0
                worst = max(worst, lo[bi] - v)
            elif v > up[bi] + LP_FEAS_TOL:
                sigma[i] = 1.0
                worst = max(worst, v - up[bi])
        return sigma, worst

    def _phase1(self, budget: int):
        count = 0
        banned: set[int] = set()
        while True:
            sigma, worst = self._violation_signs()
            if worst <= LP_FEAS_TOL:
                return None
            if count > budget:
                raise LPNumericalError("phase-1 iteration budget exhausted")
            w = sigma @ self._binv
            # d(infeasibility)/dx_j = -(w . A_j); positive score = increase helps
            score = w @ self._a
            j, t = self._pick_entering(score, banned)
            if j is None:
                return self._farkas_ray(w)
            d = self._column(j)
            delta, row, side = self._ratio_test(j, t, d, phase1=True)
            if delta == INF:
                raise LPNumericalError("unblocked phase-1 direction")
            if row >= 0 and abs(d[row]) < PIVOT_TOL:
                self._refactorize()
                d = self._column(j)
                delta, row, side = self._ratio_test(j, t, d, phase1=True)
                if row >= 0 and abs(d[row]) < PIVOT_TOL:
                    banned.add(j)
                    continue
            banned.clear()
            self._apply_pivot(j, t, delta, row, side, d)
            count += 1

    def _farkas_ray(self, w: np.ndarray) -> dict[int, float]:
        """Ray over equations whose combination contradicts the bound box.

        Sanity-checked here: max of the combined row over the box must fall
        short of the combined rhs, else the stuck point was numerical noise.
        """
        ray = {}
        for i, eq in enumerate(self._equations):
            if abs(w[i]) > RAY_EPS:
                ray[eq.id] = float(w[i])
        c = w @ self._a
        d = float(w @ self._rhs)
        best = 0.0
        for j in range(self._nt):
            cj = c[j]
            if abs(cj) <= 1e-11:
                continue
            b = self._up[j] if cj > 0 else self._lo[j]
            if not np.isfinite(b):
                raise LPNumericalError("farkas ray needs an infinite bound")
            best += cj * b
        if not best < d - LP_FEAS_TOL / 2:
            raise LPNumericalError("farkas ray margin too small")
        return ray

    # -- phase 2: optimality ------------------------------------------------

    def _phase2(self, c: np.ndarray, budget: int):
        count = 0
        banned: set[int] = set()
        while True:
            if count > budget:
                raise LPNumericalError("phase-2 iteration budget exhausted")
            y = c[self._basis] @ self._binv
            z = c - y @ self._a
            # decreasing cost: increasing x_j helps when z_j < 0
            j, t = self._pick_entering(-z, banned)
            if j is None:
                return None
            d = self._column(j)
            delta, row, side = self._ratio_test(j, t, d, phase1=False)
            if delta == INF:
                return (j, t)
            if row >= 0 and abs(d[row]) < PIVOT_TOL:
                self._refactorize()
                d = self._column(j)
                delta, row, side = self._ratio_test(j, t, d, phase1=False)
                if row >= 0 and abs(d[row]) < PIVOT_TOL:
                    banned.add(j)
                    continue
            banned.clear()
            self._apply_pivot(j, t, delta, row, side, d)
            count += 1

    # -- public -------------------------------------------------------------

    def solve(self, objective: LinearExpression | None = None) -> LPResult:
        """Restore feasibility from the warm basis, then minimize objective.

        With objective None this is a pure feasibility call.
        """
        start_pivots = self.total_pivots
        self._degenerate_run = 0
        self._refresh()
        budget = 10000 + 50 * (self._m + self._nt)
        ray = self._phase1(budget)
        if ray is not None:
            return LPResult(
                status=LPStatus.INFEASIBLE,
                ray=ray,
                pivots=self.total_pivots - start_pivots,
            )
        obj_value = None
        if objective is not None:
            c = np.zeros(self._nt)
            for var, coeff in objective.terms.items():
                if var >= self._n:
                    raise ValueError(f"objective references unknown variable {var}")
                c[var] += coeff
            unbounded = self._phase2(c, budget)
            if unbounded is not None:
                j, t = unbounded
                return LPResult(
                    status=LPStatus.UNBOUNDED,
                    pivots=self.total_pivots - start_pivots,
                    unbounded_var=int(j) if j < self._n else None,
                    unbounded_direction=t,
                )
            obj_value = float(c @ self._x) + objective.constant
        return LPResult(
            status=LPStatus.OPTIMAL,
            values=[float(v) for v in self._x[: self._n]],
            objective=obj_value,
            pivots=self.total_pivots - start_pivots,
        )
