"""Structural verifiers built on consistent price systems.

* the wealth of any admissible self-financing strategy, marked at the shadow
  price and deflated by the density process, is an optional strong
  supermartingale, checked through one-step conditional inequalities;
* the terminal bond variation of any liquidated admissible strategy is
  bounded in expectation under the shadow measure through the surplus a
  cheaper-cost agent would accumulate on the same trades;
* superhedging prices of nonnegative claims solve a linear program whose
  dual values over consistent price systems never exceed the price, with
  equality at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cps import ConsistentPriceSystem, cps_constraint_system, verify_cps
from .errors import ContractViolation, DomainError
from .integration import integrate
from .lp import enumerate_vertices, solve_lp
from .market import (
    ModelFamily,
    ScenarioTree,
    Strategy,
    admissibility_checkpoints,
    bond_value,
    cell_index,
    is_admissible,
    liquidation_value,
    site_applied,
    site_price,
    strategy_from_vector,
    trade_sites,
)
from .paths import LadlagPath, PathEvent

__all__ = [
    "shadow_value_process",
    "deflated_value_process",
    "check_optional_strong_supermartingale",
    "VariationReport",
    "variation_bounds",
    "superhedge_price",
    "dual_bound",
    "best_dual_cps",
    "cps_polytope_vertices",
]


def _path_from_limits(horizon, x0, x0_right, event_rows, x_end=None) -> LadlagPath:
    """Assemble a path from its one-sided limits at the events; between
    events the values interpolate linearly (exact for pure-jump data)."""
    events, slopes = [], []
    prev_time, prev_right = 0.0, x0_right
    for t, left, value, right in event_rows:
        slopes.append((left - prev_right) / (t - prev_time))
        events.append(PathEvent(t, value - left, 0.0 if right is None else right - value))
        prev_time, prev_right = t, (value if right is None else right)
    if x_end is not None and prev_time < horizon:
        slopes.append((x_end - prev_right) / (horizon - prev_time))
    else:
        slopes.append(0.0)
    return LadlagPath(horizon, x0, x0_right - x0, tuple(events), tuple(slopes))


def _marked_value(strategy, family, theta, scenario, cps, t, kind, layer, deflate):
    h0 = bond_value(strategy, family, theta, scenario, t, kind)
    h1 = strategy.share_path(scenario).at(t, kind)
    c = cell_index(cps.layer_partitions[layer], scenario)
    s_tilde = cps.z1[layer][c] / cps.z0[layer][c]
    v = h0 + h1 * s_tilde
    return cps.z0[layer][c] * v if deflate else v


def _value_process(strategy, family, theta, scenario, cps, deflate) -> LadlagPath:
    tree = family.tree
    if cps.layer_times != tree.layer_times:
        raise ContractViolation("certificate does not match the tree's event times")
    val0 = _marked_value(strategy, family, theta, scenario, cps, 0.0, "value", 0, deflate)
    right0 = (
        _marked_value(strategy, family, theta, scenario, cps, 0.0, "right", 0, deflate)
        if tree.horizon > 0.0
        else val0
    )
    rows = []
    for i, t in enumerate(tree.event_times):
        left = _marked_value(strategy, family, theta, scenario, cps, t, "left", i, deflate)
        value = _marked_value(strategy, family, theta, scenario, cps, t, "value", i + 1, deflate)
        right = (
            _marked_value(strategy, family, theta, scenario, cps, t, "right", i + 1, deflate)
            if t < tree.horizon
            else None
        )
        rows.append((t, left, value, right))
    x_end = None
    if not tree.event_times or tree.event_times[-1] < tree.horizon:
        last = len(tree.layer_times) - 1
        x_end = _marked_value(
            strategy, family, theta, scenario, cps, tree.horizon, "value", last, deflate
        )
    return _path_from_limits(tree.horizon, val0, right0, rows, x_end)


def shadow_value_process(strategy: Strategy, cps: ConsistentPriceSystem, family: ModelFamily,
                         theta: str, scenario: int) -> LadlagPath:
    """Cash plus shares marked at the shadow price; dominates the liquidation
    value pointwise because the shadow price sits inside the spread."""
    return _value_process(strategy, family, theta, scenario, cps, deflate=False)


def deflated_value_process(strategy: Strategy, cps: ConsistentPriceSystem, family: ModelFamily,
                           theta: str, scenario: int) -> LadlagPath:
    """The shadow-marked wealth multiplied by the density process."""
    return _value_process(strategy, family, theta, scenario, cps, deflate=True)


def _moments(tree: ScenarioTree):
    """The chain of (time, kind, partition) evaluation points; each one-step
    conditional inequality conditions on the earlier moment's partition."""
    out = [(0.0, "value", tree.root_partition)]
    if tree.horizon > 0.0:
        out.append((0.0, "right", tree.root_partition))
    for i, t in enumerate(tree.event_times):
        out.append((t, "left", tree.pre_partitions[i]))
        out.append((t, "value", tree.post_partitions[i]))
        if t < tree.horizon:
            out.append((t, "right", tree.post_partitions[i]))
    if not tree.event_times or tree.event_times[-1] < tree.horizon:
        last = tree.post_partitions[-1] if tree.event_times else tree.root_partition
        out.append((tree.horizon, "value", last))
    return out


def check_optional_strong_supermartingale(x_paths, tree: ScenarioTree, tol: float = 1e-9
                                          ) -> tuple[bool, float]:
    """One-step verification of the two-stopping-time supermartingale
    inequality: across every transition (value, right limit, next left limit,
    next value) the conditional expectation given the partition then in force
    must not increase.  On a finite tree this chain is equivalent to the full
    property.  Returns (verdict, worst conditional slack)."""
    if len(x_paths) != tree.n_scenarios:
        raise ContractViolation("need one path per scenario")
    moments = _moments(tree)
    values = []
    for t, kind, partition in moments:
        row = [x_paths[w].at(t, kind) for w in range(tree.n_scenarios)]
        scale = max(1.0, max(abs(v) for v in row))
        for cell in partition:
            ref = row[min(cell)]
            if any(abs(row[w] - ref) > 1e-9 * scale for w in cell):
                raise ContractViolation(
                    f"process not adapted: values differ on a cell at t={t} ({kind})"
                )
        values.append(row)
    worst = float("inf")
    for m in range(len(moments) - 1):
        _, _, partition = moments[m]
        now = values[m]
        nxt = values[m + 1]
        for cell in partition:
            mass = tree.prob_of(cell)
            cond = sum(tree.probabilities[w] * nxt[w] for w in cell) / mass
            worst = min(worst, now[min(cell)] - cond)
    return worst >= -tol, worst


@dataclass(frozen=True)
class VariationReport:
    """Shadow-measure expectations of the terminal bond variation of a
    liquidated admissible strategy, against their a-priori bounds."""

    expected_up: float
    expected_total: float
    bound_up: float
    bound_total: float
    ok_up: bool
    ok_total: bool
    surplus: tuple[float, ...]  # per scenario, the cheaper-cost agent's extra cash

    @property
    def ok(self) -> bool:
        return self.ok_up and self.ok_total


def variation_bounds(strategy: Strategy, cps: ConsistentPriceSystem, family: ModelFamily,
                     theta_prime: str, lambda_prime: float | None = None,
                     tol: float = 1e-9) -> VariationReport:
    """Certify the expected terminal bond variation of a liquidated
    admissible strategy under the measure induced by the certificate.

    The certificate must hold at a cost level strictly below the market's;
    the surplus entries are what an agent paying only the lower cost would
    pocket on the same trades, the quantity driving the bound.
    """
    lam = family.transaction_cost
    lam_p = cps.lambda_check if lambda_prime is None else lambda_prime
    if not 0.0 < lam_p < lam:
        raise ContractViolation(f"reference cost {lam_p} must lie in (0, {lam})")
    if not verify_cps(cps, family, theta_prime, lam_p):
        raise ContractViolation("certificate fails verification at the reference cost")
    ok, violation = is_admissible(strategy, family)
    if not ok:
        raise ContractViolation(f"strategy not admissible: {violation}")
    tree = family.tree
    for w in range(tree.n_scenarios):
        if abs(strategy.share_path(w).value_at(tree.horizon)) > 1e-12:
            raise ContractViolation(f"strategy not liquidated in scenario {tree.labels[w]}")
    q = cps.measure_weights(tree)
    e_up = e_total = 0.0
    surplus = []
    for w in range(tree.n_scenarios):
        S = family.price(theta_prime, w)
        bond_up = (1.0 - lam) * integrate(S, strategy.share_down(w))
        bond_down = integrate(S, strategy.share_up(w))
        e_up += q[w] * bond_up
        e_total += q[w] * (bond_up + bond_down)
        surplus.append((lam - lam_p) / (1.0 - lam) * bond_up)
    x = strategy.initial_cash
    bound_up = x / (lam - lam_p)
    bound_total = x * (1.0 + 2.0 / (lam - lam_p))
    return VariationReport(
        expected_up=e_up,
        expected_total=e_total,
        bound_up=bound_up,
        bound_total=bound_total,
        ok_up=e_up <= bound_up + tol,
        ok_total=e_total <= bound_total + tol,
        surplus=tuple(surplus),
    )


def _single_model(family: ModelFamily, theta: str) -> ModelFamily:
    return ModelFamily(
        tree=family.tree,
        models={theta: family.models[theta]},
        transaction_cost=family.transaction_cost,
        reference_cost=family.reference_cost,
    )


def _superhedge_rows(family, theta, claim):
    """Constraint rows of the superhedging program: for every scenario and
    checkpoint the liquidation value, split into its bid leg and ask leg,
    must clear zero (or the claim at the horizon)."""
    tree = family.tree
    lam = family.transaction_cost
    sites = trade_sites(tree)
    n = 1 + 2 * len(sites)
    rows, rhs = [], []
    for w in range(tree.n_scenarios):
        S = family.price(theta, w)
        prices = [site_price(family, theta, w, s) for s in sites]
        for t, kind in admissibility_checkpoints(tree):
            s_val = S.left_limit_at(t) if kind == "left" else S.value_at(t)
            target = claim[w] if (t == tree.horizon and kind == "value") else 0.0
            for kappa in ((1.0 - lam), 1.0):
                row = [0.0] * n
                row[0] = -1.0
                for j, site in enumerate(sites):
                    if site_applied(site, t, kind) and w in site.cell:
                        p = prices[j]
                        row[1 + 2 * j] = -(-p + kappa * s_val)
                        row[2 + 2 * j] = -((1.0 - lam) * p - kappa * s_val)
                rows.append(row)
                rhs.append(-target)
    return sites, rows, rhs


def superhedge_price(claim, family: ModelFamily, theta: str,
                     exact: bool = False) -> tuple[float, Strategy]:
    """Smallest initial capital from which some admissible pure-jump strategy
    dominates the claim at the horizon, together with a witness strategy."""
    tree = family.tree
    claim = [float(g) for g in claim]
    if len(claim) != tree.n_scenarios:
        raise ContractViolation("need one claim value per scenario")
    if any(g < 0.0 for g in claim):
        raise DomainError("claims must be nonnegative")
    sites, rows, rhs = _superhedge_rows(family, theta, claim)
    cost = [0.0] * (1 + 2 * len(sites))
    cost[0] = 1.0
    res = solve_lp(cost, rows, rhs, exact=exact)
    if not res.ok:
        raise RuntimeError(f"superhedge program unexpectedly {res.status}")
    x_star = max(res.x[0], 0.0)
    increments = [v if v > 0.0 else 0.0 for v in res.x[1:]]
    witness = strategy_from_vector(tree, x_star, increments)
    sub = _single_model(family, theta)
    ok, _ = is_admissible(witness, sub, tol=1e-7)
    dominated = all(
        liquidation_value(witness, sub, theta, w, tree.horizon) >= claim[w] - 1e-7
        for w in range(tree.n_scenarios)
    )
    if not (ok and dominated):
        if exact:
            raise RuntimeError("superhedge witness failed verification")
        return superhedge_price(claim, family, theta, exact=True)
    return x_star, witness


def dual_bound(claim, family: ModelFamily, theta: str,
               duals: list[ConsistentPriceSystem]) -> float:
    """Largest expectation of the claim under the measures the supplied
    certificates induce; never exceeds the superhedging price (weak
    duality).  Every certificate must verify at the family's cost level."""
    tree = family.tree
    if not duals:
        raise ContractViolation("need at least one certificate")
    for cps in duals:
        if not verify_cps(cps, family, theta, family.transaction_cost):
            raise ContractViolation("a supplied certificate fails verification")
    best = -float("inf")
    for cps in duals:
        q = cps.measure_weights(tree)
        best = max(best, sum(qw * g for qw, g in zip(q, claim)))
    return best


def best_dual_cps(claim, family: ModelFamily, theta: str, lambda_check: float | None = None,
                  delta: float = 1e-9) -> tuple[float, ConsistentPriceSystem] | None:
    """Certificate maximising the claim's expectation over the consistent
    price systems at the given cost level; the optimum sits at a vertex of
    the feasibility polytope.  Returns None when no certificate exists."""
    from .cps import _build_cps  # shared construction of the result object

    tree = family.tree
    lam = family.transaction_cost if lambda_check is None else lambda_check
    index, n, a_eq, b_eq, a_ub, b_ub = cps_constraint_system(family, theta, lam, delta)
    z0_cols = {index[k] for k in index if k[0] == "z0"}
    obj = [0.0] * n
    last = len(tree.layer_partitions) - 1
    for c, cell in enumerate(tree.layer_partitions[last]):
        for w in cell:
            obj[index[("z0", last, c)]] -= tree.probabilities[w] * claim[w]

    def shift_rhs(rows_, rhs_):
        return [b - delta * sum(r[j] for j in z0_cols) for r, b in zip(rows_, rhs_)]

    ub_rows, keep = [], []
    for i, r in enumerate(a_ub):
        if sum(1 for v in r if v != 0.0) == 1 and any(r[j] == -1.0 for j in z0_cols):
            continue
        ub_rows.append(list(r))
        keep.append(i)
    ub_rhs = [shift_rhs(a_ub, b_ub)[i] for i in keep]
    eq_rhs = shift_rhs(a_eq, b_eq)
    res = solve_lp(obj, ub_rows, ub_rhs, [list(r) for r in a_eq], eq_rhs)
    if not res.ok:
        res = solve_lp(obj, ub_rows, ub_rhs, [list(r) for r in a_eq], eq_rhs, exact=True)
        if not res.ok:
            return None
    x = [v + delta if j in z0_cols else v for j, v in enumerate(res.x)]
    cps = _build_cps(family, theta, lam, delta, index, x)
    value = -res.objective
    return value, cps


def cps_polytope_vertices(family: ModelFamily, theta: str, lambda_check: float | None = None,
                          delta: float = 1e-9, max_dim: int = 8) -> list[ConsistentPriceSystem]:
    """All vertices of the certificate polytope, exactly; desk scale only."""
    from .cps import _build_cps

    lam = family.transaction_cost if lambda_check is None else lambda_check
    index, n, a_eq, b_eq, a_ub, b_ub = cps_constraint_system(family, theta, lam, delta)
    verts = enumerate_vertices(a_ub, b_ub, a_eq, b_eq, max_dim=max_dim)
    out = []
    for x in verts:
        cps = _build_cps(family, theta, lam, delta, index, x)
        if verify_cps(cps, family, theta, lam):
            out.append(cps)
    return out
