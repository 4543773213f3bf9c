"""Dense two-phase simplex for small covering LPs.

Problems have the form ``min c.x  s.t.  G x >= h,  0 <= x <= u`` where ``u``
may be infinite. Bland's rule picks both the entering column (lowest index
with negative reduced cost) and the leaving row (lowest basic index among
minimum-ratio ties), so the method cannot cycle. Boxes become explicit rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cipround.errors import CipError, InfeasibleError, UnboundedError
from cipround.model import CipInstance, FractionalSolution, fractional_solution

PIVOT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``min objective.x`` subject to ``rows @ x >= rhs`` and ``0 <= x <= upper``."""

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    upper: np.ndarray | None = None
    cut_keys: tuple = field(default=(), compare=False)

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=np.float64)
        n = c.size
        G = np.asarray(self.rows, dtype=np.float64).reshape(-1, n)
        h = np.asarray(self.rhs, dtype=np.float64).reshape(-1)
        if G.shape[0] != h.size:
            raise ValueError("rows and rhs disagree in length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise ValueError("LP coefficients must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "rows", G)
        object.__setattr__(self, "rhs", h)
        if self.upper is not None:
            u = np.asarray(self.upper, dtype=np.float64).reshape(-1)
            if u.size != n:
                raise ValueError("upper bounds must have one entry per variable")
            object.__setattr__(self, "upper", u)

    @property
    def n(self) -> int:
        return self.objective.size

    def with_cuts(self, cuts) -> "LpProblem":
        cuts = list(cuts)
        if not cuts:
            return self
        extra = np.array([np.asarray(r, dtype=np.float64) for r, _ in cuts]).reshape(-1, self.n)
        extra_rhs = np.array([float(b) for _, b in cuts])
        return LpProblem(self.objective, np.vstack([self.rows, extra]),
                         np.concatenate([self.rhs, extra_rhs]), self.upper)


class _Tableau:
    """Tableau ``B^-1 [A | b]`` kept alongside the original ``[A | b]``.

    Every ``REFRESH`` pivots (and before declaring optimality) the tableau is
    rebuilt from the originals, so pivoting noise cannot accumulate.
    """

    REFRESH = 25

    def __init__(self, A, b, basis):
        self.A = np.hstack([A, b[:, None]])
        self.basis = list(basis)
        self.T = self.A.copy()
        self.refresh()

    def refresh(self):
        B = self.A[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.A)
        except np.linalg.LinAlgError:
            return  # keep the pivoted tableau
        # identity columns and a nonnegative rhs by construction
        self.T[:, self.basis] = np.eye(len(self.basis))
        np.maximum(self.T[:, -1], 0.0, out=self.T[:, -1])

    def reduced(self, cost):
        return cost - cost[self.basis] @ self.T

    def pivot(self, r, j):
        T = self.T
        pr = T[r] / T[r, j]
        col = T[:, j].copy()
        T -= np.outer(col, pr)
        T[r] = pr
        self.basis[r] = j

    def bland(self, cost, allowed, tol, max_iter):
        """Bland's rule; ``cost`` has the tableau's width (rhs slot included)."""
        since = 0
        for _ in range(max_iter):
            obj = self.reduced(cost)
            cand = np.flatnonzero(obj[:allowed] < -tol)
            if cand.size == 0:
                if since == 0:
                    return obj
                self.refresh()
                since = 0
                continue
            T = self.T
            j = int(cand[0])
            col = T[:, j]
            rows = np.flatnonzero(col > tol)
            if rows.size == 0:
                raise UnboundedError("LP is unbounded")
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)
            since += 1
            if since >= self.REFRESH:
                self.refresh()
                since = 0
        raise CipError("simplex iteration limit reached")

    def restrict(self, rows, cols):
        self.A = np.ascontiguousarray(self.A[np.ix_(rows, cols)])
        self.T = np.ascontiguousarray(self.T[np.ix_(rows, cols)])
        self.basis = [cols.index(c) for c in (self.basis[r] for r in rows)]


def simplex(problem: LpProblem, tol: float = PIVOT_TOL, max_iter: int | None = None):
    """Solve ``problem``; returns ``(x, value)``.

    Raises InfeasibleError or UnboundedError.
    """
    c, G, h = problem.objective, problem.rows, problem.rhs
    n = c.size
    upper = problem.upper if problem.upper is not None else np.full(n, np.inf)
    if np.any(upper < 0):
        raise InfeasibleError("negative upper bound")
    box = np.flatnonzero(np.isfinite(upper))
    mg, mb = G.shape[0], box.size
    M = mg + mb
    n_struct = n + mg + mb

    A0 = np.zeros((M, n_struct))
    b0 = np.zeros(M)
    A0[:mg, :n] = G
    A0[np.arange(mg), n + np.arange(mg)] = -1.0
    b0[:mg] = h
    A0[mg + np.arange(mb), box] = 1.0
    A0[mg + np.arange(mb), n + mg + np.arange(mb)] = 1.0
    b0[mg:] = upper[box]

    basis = [0] * M
    need_art = []
    for r in range(mg):
        if b0[r] <= 0:
            A0[r] *= -1.0
            b0[r] *= -1.0
            basis[r] = n + r
        else:
            need_art.append(r)
    for j in range(mb):
        basis[mg + j] = n + mg + j

    n_art = len(need_art)
    N = n_struct + n_art
    A1 = np.zeros((M, N))
    A1[:, :n_struct] = A0
    for t, r in enumerate(need_art):
        A1[r, n_struct + t] = 1.0
        basis[r] = n_struct + t
    if max_iter is None:
        max_iter = 50 * (M + N) + 1000
    tab = _Tableau(A1, b0, basis)
    struct_cols = list(range(n_struct)) + [N]

    if n_art:
        cost1 = np.zeros(N + 1)
        cost1[n_struct:N] = 1.0
        obj = tab.bland(cost1, N, tol, max_iter)
        infeas = -obj[-1]
        if infeas > 1e-8 * max(1.0, np.abs(b0).max(initial=0.0)):
            raise InfeasibleError("LP is infeasible")
        keep = []
        for r in range(M):
            if tab.basis[r] >= n_struct:
                nz = np.flatnonzero(np.abs(tab.T[r, :n_struct]) > tol)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                    keep.append(r)
                # otherwise the row is redundant and dropped
            else:
                keep.append(r)
        tab.restrict(keep, struct_cols)
        tab.refresh()
    else:
        tab.restrict(list(range(M)), struct_cols)

    cost2 = np.zeros(n_struct + 1)
    cost2[:n] = c
    tab.bland(cost2, n_struct, tol, max_iter)

    full = np.zeros(n_struct)
    full[tab.basis] = tab.T[:, -1]
    x = np.clip(full[:n], 0.0, upper)
    return x, float(c @ x)


def basic_lp_problem(inst: CipInstance, use_box: bool) -> LpProblem:
    upper = None
    if use_box:
        upper = np.where(np.isfinite(inst.d), inst.d, np.inf)
    return LpProblem(inst.cost, inst.to_dense(), inst.a, upper)


def solve_basic_lp(inst: CipInstance, use_box: bool = False) -> FractionalSolution:
    """Optimal fractional point of the basic LP (boxed by ``d`` if ``use_box``)."""
    problem = basic_lp_problem(inst, use_box)
    try:
        x, _ = simplex(problem)
    except UnboundedError as exc:  # objective >= 0 over x >= 0
        raise AssertionError("basic LP cannot be unbounded") from exc
    kind = "basic-boxed" if use_box else "basic-unbounded"
    return fractional_solution(inst, x, kind)


def solve_lp_with_cuts(base: LpProblem, cuts, inst: CipInstance | None = None,
                       lp_kind: str = "basic-boxed") -> FractionalSolution:
    """Optimum of ``base`` with extra ``(row, rhs)`` cuts meaning ``row.x >= rhs``.

    With ``inst`` the point is re-validated against that instance and all
    its objectives are evaluated; otherwise only ``base`` is checked.
    """
    problem = base.with_cuts(cuts)
    x, value = simplex(problem)
    viol = problem.rows @ x - problem.rhs
    if viol.size and viol.min() < -1e-7 * max(1.0, np.abs(problem.rhs).max()):
        raise CipError(f"LP solution violates a row by {-viol.min():.3g}")
    if inst is not None:
        return fractional_solution(inst, x, lp_kind)
    return FractionalSolution(x=x, objective_values=np.array([value]), lp_kind=lp_kind)
