import numpy as np
import pytest

from spreadtree.errors import ContractViolation, DomainError
from spreadtree.integration import certified_integral, flatten_eps, integrate, step_approximation
from spreadtree.paths import LadlagPath, PathEvent

from _gen import random_increasing_path, random_ladlag_path, rng_for
from _oracle import rs_sum


def test_unit_integrand_counts_jump_mass():
    one = LadlagPath.constant(1.0, 2.0)
    h = LadlagPath(2.0, 0.0, 0.0, (PathEvent(1.0, 2.0, 3.0),))
    assert integrate(one, h, 0.0, 2.0) == 5.0


def test_jump_pricing_convention():
    # price jumps 4 -> 6 at t=1; buys immediately before pay 4, at/after pay 6
    s = LadlagPath(2.0, 4.0, 0.0, (PathEvent(1.0, 2.0),))
    h = LadlagPath(2.0, 0.0, 0.0, (PathEvent(1.0, 1.0, 1.0),))
    assert integrate(s, h, 0.0, 2.0) == 4.0 * 1.0 + 6.0 * 1.0


def test_window_endpoint_conventions():
    s = LadlagPath(2.0, 3.0, 0.0, (PathEvent(1.0, 1.0),))
    h = LadlagPath(2.0, 0.0, 0.5, (PathEvent(1.0, 1.0, 1.0), PathEvent(2.0, 2.0, 0.0)))
    # window (1, 2]: the left jumps at 1 are excluded, the right jump at 1 and
    # the left jump at 2 are included
    assert integrate(s, h, 1.0, 2.0) == 4.0 * 1.0 + 4.0 * 2.0
    # window [0, 1): only the initial right jump
    assert integrate(s, h, 0.0, 1.0) == 3.0 * 0.5 + 3.0 * 1.0


def test_contract_checks():
    s = LadlagPath(1.0, 1.0, 0.5)  # not right-continuous
    h = LadlagPath(1.0, 0.0, 0.0, (PathEvent(0.5, 1.0),))
    with pytest.raises(ContractViolation):
        integrate(s, h)
    dec = LadlagPath(1.0, 0.0, 0.0, (PathEvent(0.5, -1.0),))
    with pytest.raises(ContractViolation):
        integrate(LadlagPath.constant(1.0, 1.0), dec)
    with pytest.raises(DomainError):
        integrate(LadlagPath.constant(1.0, 1.0), h, 0.7, 0.7)


def test_matches_riemann_stieltjes_oracle():
    rng = rng_for(31)
    for _ in range(40):
        s = random_ladlag_path(rng, max_events=6, cadlag=True, pure_jump=True, initial=2.0)
        h = random_increasing_path(rng, horizon=s.horizon, max_events=6, pure_jump=True)
        want = rs_sum(s, h, offsets_exp=24)
        got = integrate(s, h, 0.0, s.horizon)
        assert abs(got - want) < 1e-10 * max(1.0, abs(want))


def test_continuous_part_trapezoid_against_dense_grid():
    rng = rng_for(37)
    for _ in range(10):
        s = random_ladlag_path(rng, max_events=4, cadlag=True)
        slope = float(rng.uniform(0.2, 1.5))
        h = LadlagPath(s.horizon, 0.0, 0.0, (), (slope,))
        # integrate segment by segment on dense grids so no jump is smeared
        cuts = [0.0] + [t for t in s.event_times] + [s.horizon]
        want = 0.0
        for a, b in zip(cuts, cuts[1:]):
            ts = np.linspace(a, b, 400)
            vals = [s.value_at(float(t)) for t in ts[:-1]] + [s.left_limit_at(b)]
            want += slope * float(np.trapezoid(np.array(vals), ts))
        got = integrate(s, h)
        assert abs(got - want) < 1e-9 * max(1.0, abs(want))


def test_linearity_in_integrator():
    rng = rng_for(41)
    for _ in range(15):
        s = random_ladlag_path(rng, max_events=5, cadlag=True)
        g = random_increasing_path(rng, horizon=s.horizon, max_events=5)
        h = random_increasing_path(rng, horizon=s.horizon, max_events=5)
        a, b = float(rng.uniform(0, 2)), float(rng.uniform(0, 2))
        combo = a * g + b * h
        lhs = integrate(s, combo)
        rhs = a * integrate(s, g) + b * integrate(s, h)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))


def test_flatten_threshold_split():
    s = LadlagPath(2.0, 1.0, 0.0, (PathEvent(0.5, 0.5), PathEvent(1.0, 2.0)))
    flat, big = flatten_eps(s, 1.0)
    assert big == [(1.0, 2.0)]
    assert flat.left_jump_at(0.5) == 0.5 and flat.left_jump_at(1.0) == 0.0
    flat2, big2 = flatten_eps(s, 5.0)
    assert big2 == [] and flat2 == s


def test_flatten_reassembles():
    rng = rng_for(43)
    for _ in range(10):
        s = random_ladlag_path(rng, max_events=8, cadlag=True)
        flat, big = flatten_eps(s, 0.7)
        steps = LadlagPath.step(s.horizon, 0.0, big)
        back = flat + steps
        for t in list(rng.uniform(0, s.horizon, size=50)) + list(s.event_times) + [0.0, s.horizon]:
            t = float(t)
            assert abs(back.value_at(t) - s.value_at(t)) < 1e-12 * max(1.0, abs(s.value_at(t)))


def test_step_approximation_constant():
    s = LadlagPath.constant(3.0, 1.0)
    step = step_approximation(s, 0.5)
    assert step.times == (0.0, 1.0)
    assert step.levels == (3.0,)


def test_step_approximation_ramp():
    s = LadlagPath(1.0, 0.0, 0.0, (), (1.0,))
    step = step_approximation(s, 0.25)
    assert len(step.times) <= 6
    grid = np.linspace(0.0, 1.0, 10001)
    err = max(abs(s.value_at(float(t)) - step.value_at(float(t))) for t in grid)
    assert err <= 0.5 + 1e-12


def test_step_approximation_error_bound():
    rng = rng_for(47)
    for _ in range(10):
        raw = random_ladlag_path(rng, max_events=8, cadlag=True, jump_scale=0.3)
        eps = 0.4
        flat, _ = flatten_eps(raw, eps)
        step = step_approximation(flat, eps)
        grid = np.linspace(0.0, flat.horizon, 10001)
        err = max(abs(flat.value_at(float(t)) - step.value_at(float(t))) for t in grid)
        assert err <= 2.0 * eps + 1e-12


def test_certified_exact_regime():
    # piecewise-constant price whose jumps are all large: flattening leaves a
    # constant, the step approximation is exact
    s = LadlagPath.step(2.0, 1.0, [(0.5, 2.0), (1.5, -1.0)])
    h = LadlagPath(2.0, 0.0, 0.2, (PathEvent(0.75, 0.5, 0.0), PathEvent(1.9, 0.3, 0.1)))
    eps = 0.5
    val, bound = certified_integral(s, h, eps)
    assert bound == 4.0 * eps * h.total_variation()
    assert abs(val - integrate(s, h)) < 1e-12


def test_certified_bound_dominates_error():
    rng = rng_for(53)
    for _ in range(40):
        s = random_ladlag_path(rng, max_events=8, cadlag=True)
        h = random_increasing_path(rng, horizon=s.horizon, max_events=6)
        eps = float(rng.uniform(0.05, 1.0))
        val, bound = certified_integral(s, h, eps)
        true = integrate(s, h)
        assert abs(val - true) <= bound + 1e-12


def test_certified_sweep_tightens():
    rng = rng_for(59)
    s = random_ladlag_path(rng, max_events=8, cadlag=True)
    h = random_increasing_path(rng, horizon=s.horizon, max_events=6)
    true = integrate(s, h)
    errors, bounds = [], []
    for eps in (1.0, 0.1, 0.01):
        val, bound = certified_integral(s, h, eps)
        errors.append(abs(val - true))
        bounds.append(bound)
    assert bounds[0] > bounds[1] > bounds[2]
    assert all(e <= b for e, b in zip(errors, bounds))
    assert errors[2] <= max(errors[0], 1e-12)
