import numpy as np
import pytest

from spreadtree.errors import ContractViolation
from spreadtree.market import (
    ModelFamily,
    ScenarioTree,
    Strategy,
    bond_ledger,
    bond_value,
    check_self_financing,
    is_admissible,
    liquidation_value,
    trade_sites,
)
from spreadtree.paths import LadlagPath, PathEvent

from _gen import (
    binomial_family,
    binomial_tree,
    family_with_cps,
    flat_family,
    random_admissible_strategy,
    rng_for,
    single_scenario_family,
)


def test_tree_validation():
    with pytest.raises(ContractViolation):
        ScenarioTree.build(("a", "b"), (0.6, 0.3), 1.0, [(1.0, [["a", "b"]], [["a"], ["b"]])])
    with pytest.raises(ContractViolation):
        # post partition coarser than pre partition
        ScenarioTree.build(("a", "b"), (0.5, 0.5), 1.0, [(1.0, [["a"], ["b"]], [["a", "b"]])])


def test_family_validation_positive_and_adapted():
    tree = binomial_tree()
    bad = (
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, -1.0, 0.0),)),  # hits zero
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, -0.5, 0.0),)),
    )
    with pytest.raises(ContractViolation):
        ModelFamily(tree=tree, models={"m": bad}, transaction_cost=0.1)
    unadapted = (
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, 1.0, 0.0),)),
        LadlagPath(1.0, 2.0, 0.0, (PathEvent(1.0, -0.5, 0.0),)),  # initial differs on root cell
    )
    with pytest.raises(ContractViolation):
        ModelFamily(tree=tree, models={"m": unadapted}, transaction_cost=0.1)


def test_ledger_no_trades_is_cash():
    fam = binomial_family()
    strat = Strategy.no_trade(fam.tree, 7.0)
    for w in (0, 1):
        path = bond_ledger(strat, fam, "m0", w)
        for t in (0.0, 0.4, 1.0):
            assert path.value_at(t) == 7.0


def test_ledger_single_buy_at_zero():
    fam = single_scenario_family(s0=10.0, s_end=10.0)
    strat = Strategy.from_trades(fam.tree, 100.0, right={(0.0, ("w",)): (1.0, 0.0)})
    assert bond_value(strat, fam, "m0", 0, 0.0, "right") == 90.0
    assert bond_ledger(strat, fam, "m0", 0).right_limit_at(0.0) == 90.0


def test_ledger_round_trip_cost():
    fam = single_scenario_family(s0=10.0, s_end=10.0, lam=0.1)
    strat = Strategy.from_trades(
        fam.tree, 100.0,
        right={(0.0, ("w",)): (1.0, 0.0)},
        left={(1.0, ("w",)): (0.0, 1.0)},
    )
    assert abs(bond_value(strat, fam, "m0", 0, 1.0) - 99.0) < 1e-12
    assert abs(liquidation_value(strat, fam, "m0", 0, 1.0) - 99.0) < 1e-12


def test_liquidation_formula_cases():
    fam = single_scenario_family(s0=5.0, s_end=5.0, lam=0.1)
    long = Strategy.from_trades(fam.tree, 20.0, right={(0.0, ("w",)): (2.0, 0.0)})
    assert abs(liquidation_value(long, fam, "m0", 0, 1.0) - 19.0) < 1e-12
    short = Strategy.from_trades(fam.tree, 5.5, right={(0.0, ("w",)): (0.0, 1.0)})
    # cash 5.5 + 0.9*5 = 10, short 1 share closed at the ask 5
    assert abs(liquidation_value(short, fam, "m0", 0, 1.0) - 5.0) < 1e-12


def test_liquidation_case_split_identity():
    rng = rng_for(61)
    fam, _ = family_with_cps(rng, max_events=3, max_scenarios=6)
    lam = fam.transaction_cost
    for _ in range(25):
        strat = random_admissible_strategy(rng, fam)
        theta = fam.model_names[0]
        w = int(rng.integers(0, fam.tree.n_scenarios))
        t = float(rng.uniform(0, fam.tree.horizon))
        kind = "value" if t not in fam.tree.event_times else "left"
        v = liquidation_value(strat, fam, theta, w, t, kind)
        h0 = bond_value(strat, fam, theta, w, t, kind)
        h1 = strat.share_path(w).at(t, kind)
        S = fam.price(theta, w)
        s = S.left_limit_at(t) if kind == "left" else S.value_at(t)
        assert abs(v - (h0 + min((1.0 - lam) * s * h1, s * h1))) < 1e-12 * max(1.0, abs(v))


def test_admissibility_no_trades():
    fam = binomial_family()
    ok, violation = is_admissible(Strategy.no_trade(fam.tree, 1.0), fam)
    assert ok and violation is None


def test_admissibility_overleveraged_buy():
    fam = binomial_family(s0=1.0, up=2.0, down=0.5)
    # buying 11 shares with x=1 burns 1.1 on the spread: liquidation right
    # after the trade is 1 - 11 + 11*0.9 = -0.1
    strat = Strategy.from_trades(fam.tree, 1.0, right={(0.0, ("u", "d")): (11.0, 0.0)})
    ok, violation = is_admissible(strat, fam)
    assert not ok
    assert violation.time == 0.0 and violation.kind == "right"
    # moderate leverage only fails later, on the crash branch at the horizon
    mild = Strategy.from_trades(fam.tree, 1.0, right={(0.0, ("u", "d")): (3.0, 0.0)})
    ok, violation = is_admissible(mild, fam)
    assert not ok
    assert violation.scenario == "d" and violation.time == 1.0


def test_admissibility_names_failing_model():
    tree = binomial_tree()
    steady = (
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, 0.2, 0.0),)),
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, -0.1, 0.0),)),
    )
    crash = (
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, 0.2, 0.0),)),
        LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, -0.9, 0.0),)),
    )
    fam = ModelFamily(tree=tree, models={"calm": steady, "crash": crash}, transaction_cost=0.1)
    strat = Strategy.from_trades(tree, 1.0, right={(0.0, ("u", "d")): (1.8, 0.0)})
    calm_only = ModelFamily(tree=tree, models={"calm": steady}, transaction_cost=0.1)
    assert is_admissible(strat, calm_only)[0]
    ok, violation = is_admissible(strat, fam)
    assert not ok and violation.theta == "crash" and violation.scenario == "d"


def test_self_financing_roundtrip_and_perturbations():
    rng = rng_for(67)
    fam, _ = family_with_cps(rng, max_events=3, max_scenarios=5)
    strat = random_admissible_strategy(rng, fam)
    theta = fam.model_names[0]
    paths = [bond_ledger(strat, fam, theta, w) for w in range(fam.tree.n_scenarios)]
    assert check_self_financing(paths, strat, fam, theta)
    ev_time = fam.tree.event_times[0]
    bumped = list(paths)
    p = paths[0]
    bumped[0] = LadlagPath(
        p.horizon, p.initial_value, p.initial_right_jump,
        tuple(PathEvent(e.time, e.left_jump + (1.0 if e.time == ev_time else 0.0), e.right_jump) for e in p.events),
        p.slopes,
    )
    assert not check_self_financing(bumped, strat, fam, theta)
    burned = list(paths)
    burned[0] = LadlagPath(
        p.horizon, p.initial_value, p.initial_right_jump,
        tuple(PathEvent(e.time, e.left_jump - (1.0 if e.time == ev_time else 0.0), e.right_jump) for e in p.events),
        p.slopes,
    )
    assert check_self_financing(burned, strat, fam, theta)


def test_ledger_affine_in_strategy():
    rng = rng_for(71)
    fam, _ = family_with_cps(rng, max_events=3, max_scenarios=5)
    a = random_admissible_strategy(rng, fam)
    b = random_admissible_strategy(rng, fam)
    alpha = 0.375
    mix = a.blend(b, alpha)
    theta = fam.model_names[0]
    for w in range(fam.tree.n_scenarios):
        for t in [0.0] + list(fam.tree.event_times):
            for kind in ("value", "right") if t < fam.tree.horizon else ("value",):
                got = bond_value(mix, fam, theta, w, t, kind)
                want = alpha * bond_value(a, fam, theta, w, t, kind) + (1 - alpha) * bond_value(
                    b, fam, theta, w, t, kind
                )
                assert abs(got - want) < 1e-10 * max(1.0, abs(want))


def test_admissibility_preserved_under_blend():
    rng = rng_for(73)
    fam, _ = family_with_cps(rng, max_events=3, max_scenarios=5)
    for _ in range(5):
        a = random_admissible_strategy(rng, fam)
        b = random_admissible_strategy(rng, fam)
        mix = a.blend(b, float(rng.uniform(0, 1)))
        assert is_admissible(mix, fam, tol=1e-9)[0]


def test_liquidation_concave_in_holdings():
    # direct check of the case-split formula's concavity in (h0, h1)
    rng = rng_for(79)
    lam, s = 0.17, 3.1
    liq = lambda h0, h1: h0 + min((1 - lam) * s * h1, s * h1)
    for _ in range(200):
        a = rng.normal(size=2)
        b = rng.normal(size=2)
        al = float(rng.uniform(0, 1))
        mid = al * a + (1 - al) * b
        assert liq(*mid) >= al * liq(*a) + (1 - al) * liq(*b) - 1e-12
        c = float(rng.uniform(0.1, 3.0))
        assert abs(liq(c * a[0], c * a[1]) - c * liq(*a)) < 1e-12 * max(1.0, abs(liq(*a)))


def test_value_paths_respect_information_cells():
    rng = rng_for(83)
    fam, _ = family_with_cps(rng, max_events=3, max_scenarios=6, pre_refines=True)
    strat = random_admissible_strategy(rng, fam)
    tree = fam.tree
    theta = fam.model_names[0]
    for i, t in enumerate(tree.event_times):
        for cell in tree.pre_partitions[i]:
            vals = {round(liquidation_value(strat, fam, theta, w, t, "left"), 12) for w in cell}
            assert len(vals) == 1
        for cell in tree.post_partitions[i]:
            vals = {round(liquidation_value(strat, fam, theta, w, t, "value"), 12) for w in cell}
            assert len(vals) == 1
            if t < tree.horizon:
                vals = {round(liquidation_value(strat, fam, theta, w, t, "right"), 12) for w in cell}
                assert len(vals) == 1


def test_liquidated_strategy_closes_position():
    rng = rng_for(89)
    while True:
        fam, _ = family_with_cps(rng, max_events=3, max_scenarios=5)
        if fam.tree.event_times[-1] == fam.tree.horizon:
            break
    tree = fam.tree
    strat = random_admissible_strategy(rng, fam, liquidate=True)
    for w in range(tree.n_scenarios):
        assert abs(strat.share_path(w).value_at(tree.horizon)) < 1e-12


def test_rate_strategy_ledger_and_interior_check():
    # flat price so the ledger stays piecewise linear under a trading rate
    fam = single_scenario_family(s0=2.0, s_end=2.0, lam=0.1)
    strat = Strategy.from_trades(
        fam.tree, 1.0, rates={(0, ("w",)): (0.6, 0.0)},
        left={(1.0, ("w",)): (0.0, 0.6)},
    )
    path = bond_ledger(strat, fam, "m0", 0)
    assert abs(path.value_at(0.5) - (1.0 - 2.0 * 0.6 * 0.5)) < 1e-12
    assert check_self_financing([path], strat, fam, "m0")
    ok, _ = is_admissible(strat, fam)
    assert ok
    # spread losses accrue at 0.2 per share-unit traded: rate 6 over one unit
    # of time sinks the terminal liquidation value below zero
    heavy = Strategy.from_trades(fam.tree, 1.0, rates={(0, ("w",)): (6.0, 0.0)})
    ok, violation = is_admissible(heavy, fam)
    assert not ok


def test_interior_dip_is_caught():
    # rising price bought at a constant rate: the liquidation value is an
    # upward parabola in time, negative only strictly inside the interval
    tree = ScenarioTree.build(("w",), (1.0,), 1.0, [(1.0, [["w"]], [["w"]])])
    sloped = (LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, 0.0, 0.0),), (2.0, 0.0)),)
    fam = ModelFamily(tree=tree, models={"m0": sloped}, transaction_cost=0.1)
    strat = Strategy.from_trades(tree, 0.002, rates={(0, ("w",)): (1.0, 0.0)})
    assert liquidation_value(strat, fam, "m0", 0, 0.0, "right") > 0.0
    assert liquidation_value(strat, fam, "m0", 0, 1.0, "left") > 0.0
    ok, violation = is_admissible(strat, fam)
    assert not ok and violation.kind == "interior"
    assert 0.0 < violation.time < 0.2


def test_quadratic_ledger_is_refused():
    tree = ScenarioTree.build(("w",), (1.0,), 1.0, [(1.0, [["w"]], [["w"]])])
    sloped = (LadlagPath(1.0, 1.0, 0.0, (PathEvent(1.0, 0.0, 0.0),), (0.5, 0.0)),)
    fam = ModelFamily(tree=tree, models={"m0": sloped}, transaction_cost=0.1)
    strat = Strategy.from_trades(tree, 1.0, rates={(0, ("w",)): (0.1, 0.0)})
    with pytest.raises(ContractViolation):
        bond_ledger(strat, fam, "m0", 0)
    # exact evaluation still works everywhere
    assert bond_value(strat, fam, "m0", 0, 1.0) < 1.0
    assert is_admissible(strat, fam)[0]


def test_trade_site_enumeration_roundtrip():
    rng = rng_for(97)
    fam, _ = family_with_cps(rng, max_events=3, max_scenarios=5)
    sites = trade_sites(fam.tree)
    from spreadtree.market import strategy_from_vector

    h = rng.uniform(0.0, 0.3, size=2 * len(sites))
    strat = strategy_from_vector(fam.tree, 1.0, h.tolist())
    for j, site in enumerate(sites):
        w = min(site.cell)
        if site.kind == "left":
            buy, sell = strat.left_increments(w, site.time)
        else:
            buy, sell = strat.right_increments(w, site.time)
        assert (buy, sell) == (h[2 * j], h[2 * j + 1])
