"""Consistent price systems on finite scenario trees.

A consistent price system for one model is a pair of node processes
``(z0, z1)``: ``z0`` is the strictly positive density process of a measure
under which the shadow price ``z1 / z0`` is a martingale, and the shadow
price stays inside the bid-ask spread of the model's price at every time.
On a finite tree both processes are piecewise constant between events with
left jumps only, so existence is a linear feasibility problem over one pair
of unknowns per information cell and layer.

The martingale identities are imposed cell by cell against the pre-event
partitions (what is known immediately before each event).  This is the
genuine martingale property in the tree's filtration: conditioning only on
the coarser post-event cells would admit certificates that misprice trades
placed immediately before an announced move.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError
from .lp import solve_lp
from .market import ModelFamily, Partition, ScenarioTree, cell_index
from .paths import LadlagPath, PathEvent

__all__ = ["ConsistentPriceSystem", "find_cps", "verify_cps", "cps_constraint_system"]


@dataclass(frozen=True)
class ConsistentPriceSystem:
    """Node values of the density and shadow-value processes, one pair per
    cell of each layer (time zero, then every event time)."""

    theta: str
    lambda_check: float
    delta: float
    horizon: float
    layer_times: tuple[float, ...]
    layer_partitions: tuple[Partition, ...]
    z0: tuple[tuple[float, ...], ...]
    z1: tuple[tuple[float, ...], ...]

    def shadow_price(self, layer: int, cell: int) -> float:
        return self.z1[layer][cell] / self.z0[layer][cell]

    def z0_terminal(self, scenario: int) -> float:
        return self.z0[-1][cell_index(self.layer_partitions[-1], scenario)]

    def measure_weights(self, tree: ScenarioTree) -> tuple[float, ...]:
        """The measure the terminal density induces: weight p * z0(T) per
        scenario; sums to one and is equivalent to the tree's measure."""
        return tuple(
            tree.probabilities[w] * self.z0_terminal(w) for w in range(tree.n_scenarios)
        )

    def _node_path(self, scenario: int, table) -> LadlagPath:
        values = [table[l][cell_index(p, scenario)] for l, p in enumerate(self.layer_partitions)]
        events = tuple(
            PathEvent(t, values[i + 1] - values[i], 0.0)
            for i, t in enumerate(self.layer_times[1:])
        )
        return LadlagPath(self.horizon, values[0], 0.0, events)

    def z0_path(self, scenario: int) -> LadlagPath:
        return self._node_path(scenario, self.z0)

    def z1_path(self, scenario: int) -> LadlagPath:
        return self._node_path(scenario, self.z1)

    def shadow_path(self, scenario: int) -> LadlagPath:
        ratios = [
            [a / b for a, b in zip(row1, row0)] for row0, row1 in zip(self.z0, self.z1)
        ]
        return self._node_path(scenario, ratios)

    def scaled(self, factor: float) -> "ConsistentPriceSystem":
        """Cone scaling (both processes multiplied); only factor 1 keeps the
        root normalisation."""
        scale = lambda tbl: tuple(tuple(factor * v for v in row) for row in tbl)
        return ConsistentPriceSystem(
            self.theta, self.lambda_check, self.delta * factor, self.horizon,
            self.layer_times, self.layer_partitions, scale(self.z0), scale(self.z1),
        )


def _layer_price_points(family: ModelFamily, theta: str) -> list[list[list[float]]]:
    """Per layer and per cell, the price values the shadow price must bracket:
    the price at the layer's time and its left limit at the next event (or its
    value at the horizon for the last layer)."""
    tree = family.tree
    points: list[list[list[float]]] = []
    times = tree.layer_times
    for l, (t, partition) in enumerate(zip(times, tree.layer_partitions)):
        per_cell = []
        for cell in partition:
            w = min(cell)
            S = family.price(theta, w)
            pts = [S.value_at(t)]
            if l + 1 < len(times):
                pts.append(S.left_limit_at(times[l + 1]))
            elif t < tree.horizon:
                pts.append(S.value_at(tree.horizon))
            per_cell.append(pts)
        points.append(per_cell)
    return points


def cps_constraint_system(family: ModelFamily, theta: str, lambda_check: float, delta: float):
    """Linear system cut out by the consistent-price-system conditions in the
    raw ``(z0, z1)`` node variables.

    Returns ``(index, n, a_eq, b_eq, a_ub, b_ub)`` where ``index[(kind, layer,
    cell)]`` maps a node to its column, equalities carry the root
    normalisation and the pre-event-cell martingale identities, and the
    inequalities carry the spread brackets plus ``z0 >= delta``.
    """
    tree = family.tree
    partitions = tree.layer_partitions
    index: dict[tuple[str, int, int], int] = {}
    n = 0
    for l, partition in enumerate(partitions):
        for c in range(len(partition)):
            index[("z0", l, c)] = n
            index[("z1", l, c)] = n + 1
            n += 2
    a_eq: list[list[float]] = []
    b_eq: list[float] = []
    a_ub: list[list[float]] = []
    b_ub: list[float] = []

    def row():
        return [0.0] * n

    for c in range(len(partitions[0])):
        r = row()
        r[index[("z0", 0, c)]] = 1.0
        a_eq.append(r)
        b_eq.append(1.0)
    for l in range(len(partitions) - 1):
        pre = tree.pre_partitions[l]  # pre partition of event l+1
        for cell in pre:
            parent = cell_index(partitions[l], min(cell))
            children = [
                (c, child) for c, child in enumerate(partitions[l + 1]) if child <= cell
            ]
            for kind in ("z0", "z1"):
                r = row()
                for c, child in children:
                    r[index[(kind, l + 1, c)]] = tree.prob_of(child)
                r[index[(kind, l, parent)]] -= tree.prob_of(cell)
                a_eq.append(r)
                b_eq.append(0.0)
    points = _layer_price_points(family, theta)
    for l, partition in enumerate(partitions):
        for c in range(len(partition)):
            for sp in points[l][c]:
                hi = row()
                hi[index[("z1", l, c)]] = 1.0
                hi[index[("z0", l, c)]] = -sp
                a_ub.append(hi)
                b_ub.append(0.0)
                lo = row()
                lo[index[("z0", l, c)]] = (1.0 - lambda_check) * sp
                lo[index[("z1", l, c)]] = -1.0
                a_ub.append(lo)
                b_ub.append(0.0)
            r = row()
            r[index[("z0", l, c)]] = -1.0
            a_ub.append(r)
            b_ub.append(-delta)
    return index, n, a_eq, b_eq, a_ub, b_ub


def _build_cps(family, theta, lambda_check, delta, index, x) -> ConsistentPriceSystem:
    tree = family.tree
    partitions = tree.layer_partitions
    z0 = tuple(
        tuple(x[index[("z0", l, c)]] for c in range(len(p))) for l, p in enumerate(partitions)
    )
    z1 = tuple(
        tuple(x[index[("z1", l, c)]] for c in range(len(p))) for l, p in enumerate(partitions)
    )
    return ConsistentPriceSystem(
        theta=theta,
        lambda_check=lambda_check,
        delta=delta,
        horizon=tree.horizon,
        layer_times=tree.layer_times,
        layer_partitions=partitions,
        z0=z0,
        z1=z1,
    )


def find_cps(family: ModelFamily, theta: str, lambda_check: float | None = None,
             delta: float = 1e-6, exact: bool = False,
             confirm_infeasible: bool = True) -> ConsistentPriceSystem | None:
    """Search for a consistent price system at cost level ``lambda_check``
    with density bounded below by ``delta``.

    Solved as a linear program maximising the smallest spread slack; any
    feasible point is acceptable.  Returns ``None`` when no such system
    exists, which signals an arbitrage-like structure at that cost level.
    The float solve is rerun in exact rational arithmetic whenever its
    verdict is marginal; ``confirm_infeasible=False`` skips the exact rerun
    on an infeasible float verdict (useful in searches where a false
    negative is harmless).
    """
    if lambda_check is None:
        lambda_check = family.transaction_cost
    if not 0.0 < lambda_check < 1.0:
        raise DomainError(f"cost level must lie in (0, 1), got {lambda_check}")
    if delta <= 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    index, n, a_eq, b_eq, a_ub, b_ub = cps_constraint_system(family, theta, lambda_check, delta)
    # shift z0 variables by delta so every variable is nonnegative, then
    # append the slack maximised by the objective
    z0_cols = {index[k] for k in index if k[0] == "z0"}

    def shift_rhs(rows, rhs):
        out = []
        for r, b in zip(rows, rhs):
            out.append(b - delta * sum(r[j] for j in z0_cols))
        return out

    slack_col = n
    eq_rows = [r + [0.0] for r in a_eq]
    eq_rhs = shift_rhs(a_eq, b_eq)
    ub_rows = []
    ub_rhs = shift_rhs(a_ub, b_ub)
    keep = []
    for i, r in enumerate(a_ub):
        # z0 >= delta rows become z0' >= 0 after the shift: drop them
        is_bound = sum(1 for v in r if v != 0.0) == 1 and any(r[j] == -1.0 for j in z0_cols)
        if is_bound:
            continue
        ub_rows.append(r + [1.0])
        keep.append(i)
    ub_rhs = [ub_rhs[i] for i in keep]
    cost = [0.0] * (n + 1)
    cost[slack_col] = -1.0
    res = solve_lp(cost, ub_rows, ub_rhs, eq_rows, eq_rhs, exact=exact)
    if not exact and res.status != "optimal":
        if not confirm_infeasible:
            return None
        return find_cps(family, theta, lambda_check, delta, exact=True)
    if res.status != "optimal":
        return None
    x = [v + delta if j in z0_cols else v for j, v in enumerate(res.x[:n])]
    cps = _build_cps(family, theta, lambda_check, delta, index, x)
    if not verify_cps(cps, family, theta, lambda_check):
        if not exact:
            return find_cps(family, theta, lambda_check, delta, exact=True)
        return None
    return cps


def verify_cps(cps: ConsistentPriceSystem, family: ModelFamily, theta: str | None = None,
               lambda_check: float | None = None, tol: float = 1e-9) -> bool:
    """Re-check every defining condition of a certificate directly against
    the family, independent of how it was produced."""
    tree = family.tree
    theta = cps.theta if theta is None else theta
    lam = cps.lambda_check if lambda_check is None else lambda_check
    if cps.layer_times != tree.layer_times or cps.layer_partitions != tree.layer_partitions:
        return False
    if cps.horizon != tree.horizon:
        return False
    partitions = tree.layer_partitions
    for c in range(len(partitions[0])):
        if abs(cps.z0[0][c] - 1.0) > tol:
            return False
    for l, partition in enumerate(partitions):
        for c in range(len(partition)):
            if cps.z0[l][c] < cps.delta - tol:
                return False
    for l in range(len(partitions) - 1):
        for conditioning in (tree.pre_partitions[l], partitions[l]):
            for cell in conditioning:
                p_cell = tree.prob_of(cell)
                for tbl in (cps.z0, cps.z1):
                    held = tbl[l][cell_index(partitions[l], min(cell))]
                    nxt = sum(
                        tree.probabilities[w] * tbl[l + 1][cell_index(partitions[l + 1], w)]
                        for w in cell
                    )
                    if abs(nxt - p_cell * held) > tol * max(1.0, abs(held)):
                        return False
    points = _layer_price_points(family, theta)
    for l, partition in enumerate(partitions):
        for c in range(len(partition)):
            z0v, z1v = cps.z0[l][c], cps.z1[l][c]
            for sp in points[l][c]:
                if z1v > sp * z0v + tol or z1v < (1.0 - lam) * sp * z0v - tol:
                    return False
    return True
