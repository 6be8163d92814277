"""Bounded-variable primal simplex for LP relaxations.

Rows are turned into an equality system by adding one slack per row; the
solver then runs a textbook two-phase simplex over the combined variable set
with individual lower/upper bounds.  Pivoting uses Dantzig pricing and falls
back to Bland's rule after a fixed number of iterations, which guarantees
termination.  A :class:`SimplexContext` keeps the expanded matrix and the last
basis so that repeated solves under changed variable bounds (dives, child
nodes) can warm start; warm results always agree with a cold solve and an
optional shadow check asserts exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import INF, MipModel

FEAS_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
DEFAULT_ITER_LIMIT = 20_000
BLAND_AFTER = 1_000  # Dantzig pricing before this many pivots, Bland after
REFACTOR_EVERY = 64

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITER_LIMIT = "iter_limit"


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int
    phase1_residual: float = 0.0


@dataclass(frozen=True)
class BoundState:
    """Per-variable bound overrides; tightenings intersect existing domains."""

    lower: np.ndarray
    upper: np.ndarray
    empty: bool = False

    @classmethod
    def from_model(cls, model: MipModel) -> "BoundState":
        return cls(lower=model.lower.copy(), upper=model.upper.copy())

    def tightened(self, j: int, lo=None, hi=None) -> "BoundState":
        lower = self.lower.copy()
        upper = self.upper.copy()
        if lo is not None:
            lower[j] = max(lower[j], lo)
        if hi is not None:
            upper[j] = min(upper[j], hi)
        empty = self.empty or bool(lower[j] > upper[j] + 1e-9)
        return BoundState(lower=lower, upper=upper, empty=empty)

    def fixed(self, j: int, value: float) -> "BoundState":
        return self.tightened(j, lo=value, hi=value)


def _slack_bounds(sense: str):
    if sense == "L":
        return 0.0, INF
    if sense == "G":
        return -INF, 0.0
    return 0.0, 0.0


class SimplexContext:
    """Reusable solver state for one model plus optional appended cut rows."""

    def __init__(self, model: MipModel, feas_tol: float = FEAS_TOL,
                 shadow_check: bool = False):
        self.model = model
        self.feas_tol = feas_tol
        self.shadow_check = shadow_check
        self._extra = []  # (cols, vals, sense, rhs)
        self._build()
        self._warm_basis = None
        self._warm_vstat = None

    def _build(self):
        model = self.model
        n = model.n
        senses = list(model.row_senses) + [row[2] for row in self._extra]
        rhs = list(model.rhs) + [row[3] for row in self._extra]
        m = len(rhs)
        A = np.zeros((m, n + m))
        for i, (idx, val) in enumerate(zip(model.row_cols, model.row_vals)):
            A[i, idx] = val
        for k, (cols, vals, _, _) in enumerate(self._extra):
            A[model.m + k, cols] = vals
        A[:, n:] = np.eye(m)
        self.n = n
        self.m = m
        self.A = A
        self.b = np.asarray(rhs, dtype=float)
        slo, sup = zip(*(_slack_bounds(s) for s in senses)) if m else ((), ())
        self.slack_lo = np.asarray(slo, dtype=float)
        self.slack_up = np.asarray(sup, dtype=float)
        self.cost = np.concatenate([model.c, np.zeros(m)])

    def add_cut_row(self, cols, vals, sense: str, rhs: float):
        """Append a valid inequality; invalidates any saved warm basis."""
        self._extra.append(
            (np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float),
             sense, float(rhs))
        )
        self._build()
        self._warm_basis = None
        self._warm_vstat = None

    @property
    def num_rows(self) -> int:
        return self.m

    def solve(self, bounds: BoundState, iter_limit: int = DEFAULT_ITER_LIMIT,
              warm: bool = True) -> LpResult:
        result = self._solve_inner(bounds, iter_limit, warm)
        if self.shadow_check and warm:
            cold = SimplexContext(self.model, feas_tol=self.feas_tol)
            for row in self._extra:
                cold._extra.append(row)
            cold._build()
            ref = cold._solve_inner(bounds, iter_limit, warm=False)
            assert ref.status == result.status, (
                f"warm/cold status mismatch: {result.status} vs {ref.status}"
            )
            if ref.status == LpStatus.OPTIMAL:
                scale = max(1.0, abs(ref.objective))
                assert abs(ref.objective - result.objective) <= 1e-7 * scale
        return result

    # ------------------------------------------------------------------
    # core solver
    # ------------------------------------------------------------------

    def _solve_inner(self, bounds, iter_limit, warm):
        if bounds.empty or np.any(bounds.lower > bounds.upper + 1e-9):
            gap = float(np.max(bounds.lower - bounds.upper)) if len(bounds.lower) else 0.0
            return LpResult(LpStatus.INFEASIBLE, None, INF, 0,
                            phase1_residual=gap if gap > 0 else INF)
        n, m = self.n, self.m
        nbase = n + m
        lo = np.concatenate([bounds.lower, self.slack_lo])
        up = np.concatenate([bounds.upper, self.slack_up])

        start = None
        if warm and self._warm_basis is not None:
            start = self._try_warm_start(lo, up)
        if start is None:
            start = self._cold_start(lo, up)
        basis, vstat, val, A, lo, up, phase1_cost, nart = start

        iters = 0
        if nart:
            status, iters = self._pivot_loop(
                A, lo, up, basis, vstat, val, phase1_cost, iter_limit, iters
            )
            if status is LpStatus.ITER_LIMIT:
                return LpResult(status, None, float("nan"), iters)
            resid = float(val[nbase:].sum())
            if resid > self.feas_tol:
                return LpResult(LpStatus.INFEASIBLE, None, INF, iters,
                                phase1_residual=resid)
            self._evict_artificials(A, basis, vstat, val, nbase)
            lo[nbase:] = 0.0
            up[nbase:] = 0.0
            val[nbase:] = 0.0

        cost = np.concatenate([self.cost, np.zeros(nart)]) if nart else self.cost
        status, iters = self._pivot_loop(
            A, lo, up, basis, vstat, val, cost, iter_limit, iters
        )
        if status is LpStatus.OPTIMAL:
            x = np.clip(val[:n].copy(), bounds.lower, bounds.upper)
            if not np.any(basis >= nbase):
                self._warm_basis = basis.copy()
                self._warm_vstat = vstat[:nbase].copy()
            else:
                self._warm_basis = None
                self._warm_vstat = None
            return LpResult(LpStatus.OPTIMAL, x, float(self.model.c @ x), iters)
        if status is LpStatus.UNBOUNDED:
            return LpResult(status, None, -INF, iters)
        return LpResult(status, None, float("nan"), iters)

    def _cold_start(self, lo, up):
        n, m = self.n, self.m
        nbase = n + m
        vstat = np.empty(nbase, dtype=np.int8)
        val = np.zeros(nbase)
        for j in range(n):
            if lo[j] > -INF:
                vstat[j], val[j] = AT_LOWER, lo[j]
            elif up[j] < INF:
                vstat[j], val[j] = AT_UPPER, up[j]
            else:
                vstat[j], val[j] = FREE, 0.0
        basis = np.arange(n, nbase, dtype=np.int64)
        vstat[n:] = BASIC
        resid = self.b - self.A[:, :n] @ val[:n]

        art_cols = []
        art_rows = []
        for i in range(m):
            s_lo, s_up = lo[n + i], up[n + i]
            s = min(max(resid[i], s_lo), s_up)
            left = resid[i] - s
            if abs(left) > self.feas_tol:
                # slack pinned at its nearest bound, artificial absorbs the rest
                vstat[n + i] = AT_LOWER if s == s_lo else AT_UPPER
                val[n + i] = s
                art_cols.append(np.sign(left))
                art_rows.append(i)
            else:
                val[n + i] = resid[i]
        nart = len(art_rows)
        if nart == 0:
            return basis, vstat, val, self.A, lo, up, None, 0

        A = np.zeros((m, nbase + nart))
        A[:, :nbase] = self.A
        aval = np.zeros(nart)
        for k, (i, sgn) in enumerate(zip(art_rows, art_cols)):
            A[i, nbase + k] = sgn
            aval[k] = abs(self.b[i] - self.A[i] @ val[:nbase])
            basis[i] = nbase + k
        lo = np.concatenate([lo, np.zeros(nart)])
        up = np.concatenate([up, np.full(nart, INF)])
        val = np.concatenate([val, aval])
        vstat = np.concatenate([vstat, np.full(nart, BASIC, dtype=np.int8)])
        phase1 = np.zeros(nbase + nart)
        phase1[nbase:] = 1.0
        return basis, vstat, val, A, lo, up, phase1, nart

    def _try_warm_start(self, lo, up):
        n, m = self.n, self.m
        nbase = n + m
        basis = self._warm_basis.copy()
        vstat = self._warm_vstat.copy()
        val = np.zeros(nbase)
        for j in range(nbase):
            if vstat[j] == BASIC:
                continue
            if vstat[j] == AT_LOWER and lo[j] == -INF:
                vstat[j] = AT_UPPER if up[j] < INF else FREE
            elif vstat[j] == AT_UPPER and up[j] == INF:
                vstat[j] = AT_LOWER if lo[j] > -INF else FREE
            elif vstat[j] == FREE and (lo[j] > -INF or up[j] < INF):
                vstat[j] = AT_LOWER if lo[j] > -INF else AT_UPPER
            val[j] = (lo[j] if vstat[j] == AT_LOWER
                      else up[j] if vstat[j] == AT_UPPER else 0.0)
        try:
            binv = np.linalg.inv(self.A[:, basis])
        except np.linalg.LinAlgError:
            return None
        nb_mask = vstat != BASIC
        xb = binv @ (self.b - self.A[:, nb_mask] @ val[nb_mask])
        if np.any(xb < lo[basis] - self.feas_tol) or np.any(xb > up[basis] + self.feas_tol):
            return None  # previous basis no longer primal feasible
        val[basis] = xb
        return basis, vstat, val, self.A, lo, up, None, 0

    def _evict_artificials(self, A, basis, vstat, val, nbase):
        binv = np.linalg.inv(A[:, basis])
        for r in range(len(basis)):
            if basis[r] < nbase:
                continue
            row = binv[r] @ A[:, :nbase]
            cands = np.nonzero((np.abs(row) > 1e-7) & (vstat[:nbase] != BASIC))[0]
            if cands.size == 0:
                continue  # redundant row, artificial stays basic at zero
            j = int(cands[0])
            old = basis[r]
            basis[r] = j
            vstat[old] = AT_LOWER
            val[old] = 0.0
            vstat[j] = BASIC
            binv = np.linalg.inv(A[:, basis])

    def _pivot_loop(self, A, lo, up, basis, vstat, val, cost, iter_limit, iters):
        m = len(basis)
        binv = np.linalg.inv(A[:, basis])
        since_refactor = 0
        while True:
            if iters >= iter_limit:
                return LpStatus.ITER_LIMIT, iters
            if since_refactor >= REFACTOR_EVERY:
                binv = np.linalg.inv(A[:, basis])
                nb_mask = vstat != BASIC
                val[basis] = binv @ (self.b - A[:, nb_mask] @ val[nb_mask])
                since_refactor = 0
            y = cost[basis] @ binv
            d = cost - y @ A
            movable = up - lo > 0
            elig = movable & (
                ((vstat == AT_LOWER) & (d < -DUAL_TOL))
                | ((vstat == AT_UPPER) & (d > DUAL_TOL))
                | ((vstat == FREE) & (np.abs(d) > DUAL_TOL))
            )
            cand = np.nonzero(elig)[0]
            if cand.size == 0:
                return LpStatus.OPTIMAL, iters
            if iters < BLAND_AFTER:
                scores = np.abs(d[cand])
                j = int(cand[int(np.argmax(scores))])
            else:
                j = int(cand[0])
            direction = 1.0 if (vstat[j] == AT_LOWER or d[j] < 0) else -1.0

            ycol = binv @ A[:, j]
            z = direction * ycol
            xb = val[basis]
            blo = lo[basis]
            bup = up[basis]
            ratios = np.full(m, INF)
            pos = z > PIVOT_TOL
            neg = z < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                ratios[pos] = (xb[pos] - blo[pos]) / z[pos]
                ratios[neg] = (bup[neg] - xb[neg]) / (-z[neg])
            ratios[np.isnan(ratios)] = INF  # infinite room

            own = up[j] - lo[j] if (lo[j] > -INF and up[j] < INF) else INF
            t_basic = ratios.min() if m else INF
            t = min(own, t_basic)
            if t == INF:
                return LpStatus.UNBOUNDED, iters
            t = max(t, 0.0)

            val[basis] = xb - t * z
            val[j] = val[j] + direction * t
            if own <= t_basic:
                # bound flip, basis unchanged
                vstat[j] = AT_UPPER if vstat[j] == AT_LOWER else AT_LOWER
            else:
                tied = np.nonzero(ratios <= t + 1e-12)[0]
                r = int(tied[int(np.argmin(basis[tied]))])
                leaving = int(basis[r])
                vstat[leaving] = AT_LOWER if z[r] > 0 else AT_UPPER
                val[leaving] = lo[leaving] if z[r] > 0 else up[leaving]
                basis[r] = j
                vstat[j] = BASIC
                piv = ycol[r]
                eta = binv[r] / piv
                binv -= np.outer(ycol, eta)
                binv[r] = eta
            iters += 1
            since_refactor += 1


def solve_lp(model: MipModel, bounds: BoundState,
             iter_limit: int = DEFAULT_ITER_LIMIT) -> LpResult:
    """One-shot LP relaxation solve under the given bound overrides."""
    return SimplexContext(model).solve(bounds, iter_limit=iter_limit, warm=False)


def resolve_with_bounds(ctx: SimplexContext, new_bounds: BoundState,
                        iter_limit: int = DEFAULT_ITER_LIMIT) -> LpResult:
    """Re-solve a context under new bounds, reusing the last basis if possible."""
    return ctx.solve(new_bounds, iter_limit=iter_limit, warm=True)
