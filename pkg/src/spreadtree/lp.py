"""Small dense linear programming with deterministic pivoting.

``solve_lp`` minimises ``c @ x`` over ``x >= 0`` subject to ``A_ub x <= b_ub``
and ``A_eq x = b_eq`` with a two-phase tableau simplex using Bland's rule, so
runs are deterministic and cycling is impossible.  The float path is
vectorised; passing ``exact=True`` runs the same algorithm over
``fractions.Fraction`` so feasibility verdicts carry no rounding ambiguity.

``enumerate_vertices`` lists the vertices of a low-dimensional polytope
exactly; it is meant for desk-scale instances only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = ["LPResult", "solve_lp", "enumerate_vertices"]

_FEAS_TOL = 1e-8


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list | None
    objective: float | Fraction | None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _to_float_result(res: LPResult) -> LPResult:
    if res.x is None:
        return res
    return LPResult(res.status, [float(v) for v in res.x], float(res.objective))


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, *, exact: bool = False) -> LPResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``,
    ``x >= 0``."""
    a_ub = [list(r) for r in (a_ub or [])]
    b_ub = list(b_ub or [])
    a_eq = [list(r) for r in (a_eq or [])]
    b_eq = list(b_eq or [])
    n = len(c)
    if exact:
        conv = lambda v: Fraction(v) if not isinstance(v, Fraction) else v
        c = [conv(v) for v in c]
        a_ub = [[conv(v) for v in r] for r in a_ub]
        b_ub = [conv(v) for v in b_ub]
        a_eq = [[conv(v) for v in r] for r in a_eq]
        b_eq = [conv(v) for v in b_eq]
        res = _simplex_exact(c, a_ub, b_ub, a_eq, b_eq)
        return _to_float_result(res)
    return _simplex_float(np.asarray(c, float), a_ub, b_ub, a_eq, b_eq)


# -- float path (vectorised tableau) ------------------------------------------------


def _simplex_float(c, a_ub, b_ub, a_eq, b_eq) -> LPResult:
    n = len(c)
    m_ub, m_eq = len(a_ub), len(a_eq)
    m = m_ub + m_eq
    # columns: n structural | m_ub slacks | m artificials | rhs
    width = n + m_ub + m + 1
    T = np.zeros((m, width))
    for i, row in enumerate(a_ub):
        T[i, :n] = row
        T[i, n + i] = 1.0
        T[i, -1] = b_ub[i]
    for j, row in enumerate(a_eq):
        T[m_ub + j, :n] = row
        T[m_ub + j, -1] = b_eq[j]
    neg = T[:, -1] < 0
    T[neg] *= -1.0
    art0 = n + m_ub
    basis = []
    for i in range(m):
        T[i, art0 + i] = 1.0
        basis.append(art0 + i)

    def pivot(T, basis, row, col):
        T[row] /= T[row, col]
        mask = np.arange(T.shape[0]) != row
        T[mask] -= np.outer(T[mask, col], T[row])
        basis[row] = col

    def reduced_costs(T, basis, cost):
        z = cost.astype(float).copy()
        for i, b in enumerate(basis):
            if cost[b] != 0.0:
                z -= cost[b] * T[i, :-1]
        return z

    def run(T, basis, cost, allowed):
        for _ in range(50000):
            z = reduced_costs(T, basis, cost)
            elig = np.where((z < -1e-9) & allowed)[0]
            if elig.size == 0:
                return "optimal"
            col = int(elig[0])  # Bland: smallest eligible index
            ratios = np.full(T.shape[0], np.inf)
            pos = T[:, col] > 1e-11
            ratios[pos] = T[pos, -1] / T[pos, col]
            if not np.isfinite(ratios).any():
                return "unbounded"
            best = ratios.min()
            rows = np.where(ratios <= best + 1e-12 * (1.0 + abs(best)))[0]
            row = int(min(rows, key=lambda r: basis[r]))  # Bland tie-break
            pivot(T, basis, row, col)
        raise RuntimeError("simplex iteration limit exceeded")

    n_cols = width - 1
    allowed_all = np.ones(n_cols, bool)
    phase1_cost = np.zeros(n_cols)
    phase1_cost[art0:] = 1.0
    status = run(T, basis, phase1_cost, allowed_all)
    if status != "optimal":
        return LPResult("infeasible", None, None)
    feas = sum(T[i, -1] for i, b in enumerate(basis) if b >= art0)
    if feas > _FEAS_TOL:
        return LPResult("infeasible", None, None)
    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= art0:
            cand = np.where(np.abs(T[i, :art0]) > 1e-9)[0]
            if cand.size:
                pivot(T, basis, i, int(cand[0]))
    allowed = np.ones(n_cols, bool)
    allowed[art0:] = False
    phase2_cost = np.zeros(n_cols)
    phase2_cost[:n] = c
    status = run(T, basis, phase2_cost, allowed)
    if status == "unbounded":
        return LPResult("unbounded", None, None)
    x = [0.0] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = float(T[i, -1])
    return LPResult("optimal", x, float(np.dot(c, x)))


# -- exact path (Fractions) ----------------------------------------------------------


def _simplex_exact(c, a_ub, b_ub, a_eq, b_eq) -> LPResult:
    zero, one = Fraction(0), Fraction(1)
    n = len(c)
    m_ub, m_eq = len(a_ub), len(a_eq)
    m = m_ub + m_eq
    width = n + m_ub + m + 1
    T = [[zero] * width for _ in range(m)]
    for i, row in enumerate(a_ub):
        for j, v in enumerate(row):
            T[i][j] = v
        T[i][n + i] = one
        T[i][-1] = b_ub[i]
    for k, row in enumerate(a_eq):
        for j, v in enumerate(row):
            T[m_ub + k][j] = v
        T[m_ub + k][-1] = b_eq[k]
    for i in range(m):
        if T[i][-1] < 0:
            T[i] = [-v for v in T[i]]
    art0 = n + m_ub
    basis = []
    for i in range(m):
        T[i][art0 + i] = one
        basis.append(art0 + i)

    def pivot(row, col):
        pv = T[row][col]
        T[row] = [v / pv for v in T[row]]
        for i in range(m):
            if i != row and T[i][col] != 0:
                f = T[i][col]
                T[i] = [a - f * b for a, b in zip(T[i], T[row])]
        basis[row] = col

    def reduced(cost):
        z = list(cost)
        obj = zero
        for i, b in enumerate(basis):
            if cost[b] != 0:
                f = cost[b]
                z = [a - f * v for a, v in zip(z, T[i][:-1])]
                obj -= f * T[i][-1]
        return z, obj

    def run(cost, allowed):
        while True:
            z, obj = reduced(cost)
            col = next((j for j in range(width - 1) if allowed[j] and z[j] < 0), None)
            if col is None:
                return "optimal"
            row, best = None, None
            for i in range(m):
                if T[i][col] > 0:
                    ratio = T[i][-1] / T[i][col]
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[row]):
                        row, best = i, ratio
            if row is None:
                return "unbounded"
            pivot(row, col)

    allowed = [True] * (width - 1)
    cost1 = [zero] * (width - 1)
    for j in range(art0, width - 1):
        cost1[j] = one
    if run(cost1, allowed) != "optimal":
        return LPResult("infeasible", None, None)
    if sum(T[i][-1] for i, b in enumerate(basis) if b >= art0) > 0:
        return LPResult("infeasible", None, None)
    for i in range(m):
        if basis[i] >= art0:
            col = next((j for j in range(art0) if T[i][j] != 0), None)
            if col is not None:
                pivot(i, col)
    allowed = [j < art0 for j in range(width - 1)]
    cost2 = [zero] * (width - 1)
    for j in range(n):
        cost2[j] = c[j]
    status = run(cost2, allowed)
    if status == "unbounded":
        return LPResult("unbounded", None, None)
    x = [zero] * n
    for i, b in enumerate(basis):
        if b < n:
            x[b] = T[i][-1]
    obj = sum(ci * xi for ci, xi in zip(c, x))
    return LPResult("optimal", x, obj)


# -- exact vertex enumeration ---------------------------------------------------------


def _exact_rref(rows):
    """Gauss-Jordan over Fractions; returns (pivot columns, reduced rows)."""
    rows = [list(r) for r in rows]
    m = len(rows)
    ncols = len(rows[0]) if m else 0
    pivots = []
    r = 0
    for col in range(ncols - 1):
        piv = next((i for i in range(r, m) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pv = rows[r][col]
        rows[r] = [v / pv for v in rows[r]]
        for i in range(m):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    return pivots, rows[:r], rows[r:]


def enumerate_vertices(a_ub, b_ub, a_eq=None, b_eq=None, *, max_dim: int = 8,
                       max_combinations: int = 200_000) -> list[list[float]]:
    """All vertices of ``{x : A_ub x <= b_ub, A_eq x = b_eq}`` (variables
    unrestricted beyond the rows given), computed exactly.

    The equalities are eliminated first; the free dimension after elimination
    must not exceed ``max_dim``.
    """
    conv = lambda v: v if isinstance(v, Fraction) else Fraction(v)
    a_ub = [[conv(v) for v in row] for row in a_ub]
    b_ub = [conv(v) for v in b_ub]
    a_eq = [[conv(v) for v in row] for row in (a_eq or [])]
    b_eq = [conv(v) for v in (b_eq or [])]
    n = len(a_ub[0]) if a_ub else len(a_eq[0])

    if a_eq:
        pivots, reduced, tail = _exact_rref([row + [b] for row, b in zip(a_eq, b_eq)])
        for row in tail:
            if row[-1] != 0:
                return []  # inconsistent equalities
        free = [j for j in range(n) if j not in pivots]
        x0 = [Fraction(0)] * n
        for prow, pcol in zip(reduced, pivots):
            x0[pcol] = prow[-1]
        basis_vecs = []
        for f in free:
            v = [Fraction(0)] * n
            v[f] = Fraction(1)
            for prow, pcol in zip(reduced, pivots):
                v[pcol] = -prow[f]
            basis_vecs.append(v)
    else:
        free = list(range(n))
        x0 = [Fraction(0)] * n
        basis_vecs = [[Fraction(1) if i == j else Fraction(0) for i in range(n)] for j in range(n)]

    d = len(basis_vecs)
    if d > max_dim:
        raise ValueError(f"free dimension {d} exceeds max_dim={max_dim}")
    # project inequalities into the free coordinates
    proj_rows = []
    proj_rhs = []
    for row, b in zip(a_ub, b_ub):
        coeffs = [sum(row[i] * vec[i] for i in range(n)) for vec in basis_vecs]
        rhs = b - sum(row[i] * x0[i] for i in range(n))
        proj_rows.append(coeffs)
        proj_rhs.append(rhs)
    m = len(proj_rows)
    from math import comb

    if d > 0 and comb(m, d) > max_combinations:
        raise ValueError(f"too many constraint combinations: C({m},{d})")
    vertices: list[list[Fraction]] = []
    seen = set()
    candidates = [()] if d == 0 else itertools.combinations(range(m), d)
    for combo in candidates:
        sub = [proj_rows[i] for i in combo]
        rhs = [proj_rhs[i] for i in combo]
        pivots, reduced, tail = _exact_rref([r + [b] for r, b in zip(sub, rhs)])
        if len(pivots) < d:
            continue
        y = [Fraction(0)] * d
        for prow, pcol in zip(reduced, pivots):
            y[pcol] = prow[-1]
        if any(sum(c * yi for c, yi in zip(proj_rows[i], y)) > proj_rhs[i] for i in range(m)):
            continue
        key = tuple(y)
        if key in seen:
            continue
        seen.add(key)
        x = [x0[i] + sum(vec[i] * yj for vec, yj in zip(basis_vecs, y)) for i in range(n)]
        vertices.append(x)
    return [[float(v) for v in x] for x in vertices]
