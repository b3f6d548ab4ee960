"""Pathwise Stieltjes integration of a right-continuous price against an
increasing integrator.

The integral over ``(s, t]``-style windows follows the trading convention:
left jumps of the integrator on ``(s, t]`` are priced at the price's left
limit, right jumps on ``[s, t)`` at the price's value, and the absolutely
continuous part is an exact segment-by-segment trapezoid (both paths are
piecewise linear, so no quadrature error enters).

``certified_integral`` evaluates the same integral through a jump-flattening
and step-function approximation of the price and returns a guaranteed error
bound proportional to the integrator's total variation.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

from .errors import ContractViolation, DomainError
from .paths import LadlagPath, PathEvent

__all__ = ["integrate", "flatten_eps", "step_approximation", "certified_integral", "StepPath"]


def integrate(price: LadlagPath, integrator: LadlagPath, start: float = 0.0, end: float | None = None) -> float:
    """Exact value of the price integrated against the integrator's moves
    on the window from ``start`` to ``end``.

    Left jumps are counted on ``(start, end]`` and priced at the price's
    left limit; right jumps are counted on ``[start, end)`` (including a
    right jump at time zero when ``start == 0``) and priced at the price's
    value.
    """
    S, H = price, integrator
    if end is None:
        end = H.horizon
    if S.horizon != H.horizon:
        raise ContractViolation("price and integrator must share one horizon")
    if not (0.0 <= start < end <= H.horizon):
        raise DomainError(f"need 0 <= start < end <= {H.horizon}, got [{start}, {end}]")
    if not S.is_cadlag:
        raise ContractViolation("price must be right-continuous (no right jumps)")
    if not H.is_increasing:
        raise ContractViolation("integrator must be increasing")

    total = 0.0
    if start == 0.0 and H.initial_right_jump != 0.0:
        total += S.value_at(0.0) * H.initial_right_jump
    for ev in H.events:
        if start < ev.time <= end and ev.left_jump != 0.0:
            total += S.left_limit_at(ev.time) * ev.left_jump
        if start <= ev.time < end and ev.right_jump != 0.0:
            total += S.value_at(ev.time) * ev.right_jump

    cuts = sorted(
        {start, end}
        | {t for t in S.event_times if start < t < end}
        | {t for t in H.event_times if start < t < end}
    )
    for a, b in zip(cuts, cuts[1:]):
        h_slope = H.slope_right_of(a)
        if h_slope != 0.0:
            total += h_slope * (b - a) * 0.5 * (S.value_at(a) + S.left_limit_at(b))
    return total


def flatten_eps(price: LadlagPath, eps: float) -> tuple[LadlagPath, list[tuple[float, float]]]:
    """Remove every jump of magnitude >= ``eps`` from a right-continuous
    price.

    Returns the flattened path (all remaining jumps strictly below ``eps``)
    together with the removed ``(time, jump)`` list; the original path is
    the flattened one plus the step path of the removed jumps.
    """
    if eps <= 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not price.is_cadlag:
        raise ContractViolation("flatten_eps expects a right-continuous price")
    big = [(ev.time, ev.left_jump) for ev in price.events if abs(ev.left_jump) >= eps]
    events = tuple(
        PathEvent(ev.time, 0.0 if abs(ev.left_jump) >= eps else ev.left_jump, 0.0)
        for ev in price.events
    )
    flat = LadlagPath(price.horizon, price.initial_value, 0.0, events, price.slopes)
    return flat, big


@dataclass(frozen=True)
class StepPath:
    """Piecewise-constant approximation: value ``levels[i]`` on
    ``(times[i], times[i+1]]`` and ``levels[0]`` at time zero."""

    horizon: float
    times: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.times) - 1:
            raise ContractViolation("need one level per interval between breakpoints")
        if self.times[0] != 0.0 or self.times[-1] != self.horizon:
            raise ContractViolation("breakpoints must start at 0 and end at the horizon")

    def value_at(self, t: float) -> float:
        if not (0.0 <= t <= self.horizon):
            raise DomainError(f"t must lie in [0, {self.horizon}], got {t}")
        if t == 0.0:
            return self.levels[0]
        return self.levels[bisect_left(self.times, t) - 1]


def _first_exceed(path: LadlagPath, sigma: float, ref: float, eps: float) -> float | None:
    """First time in ``(sigma, horizon]`` at which ``|path - ref|`` exceeds
    ``eps`` (infimum convention), or None if it never does."""
    a = sigma
    d = path.value_at(a) - ref
    times = path.event_times
    while True:
        i = bisect_left(times, a)
        while i < len(times) and times[i] <= a:
            i += 1
        b = times[i] if i < len(times) else path.horizon
        if b > a:
            m = path.slope_right_of(a)
            if m > 0.0 and d < eps:
                u = a + (eps - d) / m
                if a < u < b:
                    return u
            elif m < 0.0 and d > -eps:
                u = a + (-eps - d) / m
                if a < u < b:
                    return u
            elif abs(d) >= eps and m != 0.0 and ((d > 0 and m > 0) or (d < 0 and m < 0)):
                # already on the boundary and moving outward
                return a if a > sigma else None
            d = d + m * (b - a)
        if b >= path.horizon:
            d_end = path.value_at(path.horizon) - ref
            return path.horizon if abs(d_end) > eps else None
        d = d + path.left_jump_at(b)
        if abs(d) > eps:
            return b
        a = b


def step_approximation(flat_price: LadlagPath, eps: float) -> StepPath:
    """Step function within ``2 * eps`` of a price whose jumps are all
    smaller than ``eps``.

    Breakpoints are placed greedily at the first time the price has moved
    more than ``eps`` away from the level recorded at the previous
    breakpoint; small jumps can overshoot by at most another ``eps``.
    """
    if eps <= 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    if any(abs(ev.left_jump) >= eps for ev in flat_price.events) or not flat_price.is_cadlag:
        raise ContractViolation("step_approximation expects a right-continuous price with jumps below eps")
    times = [0.0]
    levels: list[float] = []
    sigma = 0.0
    ref = flat_price.value_at(0.0)
    while sigma < flat_price.horizon:
        nxt = _first_exceed(flat_price, sigma, ref, eps)
        if nxt is None:
            break
        times.append(nxt)
        levels.append(ref)
        sigma = nxt
        ref = flat_price.value_at(sigma)
    if times[-1] != flat_price.horizon:
        times.append(flat_price.horizon)
        levels.append(ref)
    return StepPath(flat_price.horizon, tuple(times), tuple(levels))


def certified_integral(price: LadlagPath, integrator: LadlagPath, eps: float) -> tuple[float, float]:
    """Approximate the integral via jump flattening plus a step function and
    return ``(value, error_bound)`` with the true error never exceeding the
    bound ``4 * eps * total_variation(integrator)``.

    Removed large jumps contribute exactly: integrating a unit step that
    switches on at ``tau`` against the integrator gives the integrator's
    increment from ``tau`` to the horizon.
    """
    if eps <= 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    H = integrator
    if not H.is_increasing:
        raise ContractViolation("integrator must be increasing")
    flat, big = flatten_eps(price, eps)
    step = step_approximation(flat, eps)
    value = 0.0
    for i, level in enumerate(step.levels):
        value += level * (H.value_at(step.times[i + 1]) - H.value_at(step.times[i]))
    h_end = H.value_at(H.horizon)
    for tau, jump in big:
        value += jump * (h_end - H.value_at(tau))
    bound = 4.0 * eps * H.total_variation()
    return value, bound
