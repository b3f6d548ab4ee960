"""Finite-variation paths on [0, T] with limits from both sides.

A path is piecewise linear between finitely many event times; at an event
it may jump from the left (value minus left limit) and from the right
(right limit minus value).  Right-continuous paths (all right jumps zero)
model quoted prices; paths with two-sided jumps model positions that change
immediately before, at, or immediately after an event.

Event times compare exactly as binary64 values: there is no epsilon merging
anywhere, so jump bookkeeping is deterministic.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .errors import ContractViolation, DomainError

__all__ = ["PathEvent", "LadlagPath"]


@dataclass(frozen=True)
class PathEvent:
    """Jump data at a single time: ``left_jump`` is value minus left limit,
    ``right_jump`` is right limit minus value."""

    time: float
    left_jump: float = 0.0
    right_jump: float = 0.0


def _as_event(item) -> PathEvent:
    if isinstance(item, PathEvent):
        return item
    return PathEvent(*item)


@dataclass(frozen=True)
class LadlagPath:
    """A finite-variation path on ``[0, horizon]``.

    The value at ``t`` between events is the right limit at the previous
    event plus the interval slope times the elapsed time; at an event the
    value includes the left jump but not the right jump.  ``slopes`` has one
    entry per inter-event interval, including ``[0, first event)`` and
    ``(last event, horizon]``; an empty tuple means all slopes are zero.
    """

    horizon: float
    initial_value: float = 0.0
    initial_right_jump: float = 0.0
    events: tuple[PathEvent, ...] = ()
    slopes: tuple[float, ...] = ()

    def __post_init__(self):
        if not (isinstance(self.horizon, (int, float)) and math.isfinite(self.horizon) and self.horizon > 0):
            raise ContractViolation(f"horizon must be a finite positive number, got {self.horizon!r}")
        object.__setattr__(self, "horizon", float(self.horizon))
        events = tuple(_as_event(e) for e in self.events)
        object.__setattr__(self, "events", events)
        slopes = tuple(float(s) for s in self.slopes)
        if not slopes:
            slopes = (0.0,) * (len(events) + 1)
        if len(slopes) != len(events) + 1:
            raise ContractViolation(
                f"need {len(events) + 1} slopes for {len(events)} events, got {len(slopes)}"
            )
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "initial_value", float(self.initial_value))
        object.__setattr__(self, "initial_right_jump", float(self.initial_right_jump))
        for x in (self.initial_value, self.initial_right_jump) + slopes:
            if not math.isfinite(x):
                raise ContractViolation("path data must be finite")
        prev = 0.0
        for ev in events:
            if not (math.isfinite(ev.time) and math.isfinite(ev.left_jump) and math.isfinite(ev.right_jump)):
                raise ContractViolation("event data must be finite")
            if not prev < ev.time <= self.horizon:
                raise ContractViolation(
                    f"event times must be strictly increasing in (0, {self.horizon}], got {ev.time}"
                )
            prev = ev.time
        if events and events[-1].time == self.horizon and events[-1].right_jump != 0.0:
            raise ContractViolation("a right jump at the horizon is not representable")

    # -- structure ---------------------------------------------------------

    @cached_property
    def event_times(self) -> tuple[float, ...]:
        return tuple(ev.time for ev in self.events)

    @cached_property
    def _by_time(self) -> dict[float, PathEvent]:
        return {ev.time: ev for ev in self.events}

    def left_jump_at(self, t: float) -> float:
        ev = self._by_time.get(t)
        return ev.left_jump if ev is not None else 0.0

    def right_jump_at(self, t: float) -> float:
        if t == 0.0:
            return self.initial_right_jump
        ev = self._by_time.get(t)
        return ev.right_jump if ev is not None else 0.0

    def slope_right_of(self, t: float) -> float:
        """Slope of the linear piece on the interval immediately right of ``t``."""
        return self.slopes[bisect_right(self.event_times, t)]

    @cached_property
    def is_cadlag(self) -> bool:
        return self.initial_right_jump == 0.0 and all(ev.right_jump == 0.0 for ev in self.events)

    @cached_property
    def is_increasing(self) -> bool:
        return (
            self.initial_right_jump >= 0.0
            and all(ev.left_jump >= 0.0 and ev.right_jump >= 0.0 for ev in self.events)
            and all(s >= 0.0 for s in self.slopes)
        )

    # -- evaluation --------------------------------------------------------

    def _check_range(self, t: float, lo: float, hi: float, what: str):
        if not (lo <= t <= hi):
            raise DomainError(f"{what} requires t in [{lo}, {hi}], got {t}")

    def _base_at(self, t: float) -> float:
        # Contribution of everything strictly left of t; equals the left
        # limit at t for t > 0.
        v = self.initial_value + self.initial_right_jump
        prev = 0.0
        idx = len(self.events)
        for i, ev in enumerate(self.events):
            if ev.time >= t:
                idx = i
                break
            v += self.slopes[i] * (ev.time - prev)
            v += ev.left_jump + ev.right_jump
            prev = ev.time
        v += self.slopes[idx] * (t - prev)
        return v

    def value_at(self, t: float) -> float:
        self._check_range(t, 0.0, self.horizon, "value_at")
        if t == 0.0:
            return self.initial_value
        return self._base_at(t) + self.left_jump_at(t)

    def left_limit_at(self, t: float) -> float:
        self._check_range(t, 0.0, self.horizon, "left_limit_at")
        if t == 0.0:
            raise DomainError("left_limit_at requires t > 0")
        return self._base_at(t)

    def right_limit_at(self, t: float) -> float:
        self._check_range(t, 0.0, self.horizon, "right_limit_at")
        if t == self.horizon:
            raise DomainError(f"right_limit_at requires t < horizon = {self.horizon}")
        return self.value_at(t) + self.right_jump_at(t)

    def at(self, t: float, kind: str = "value") -> float:
        """Evaluate at ``t`` with ``kind`` in ``{"left", "value", "right"}``."""
        if kind == "value":
            return self.value_at(t)
        if kind == "left":
            return self.left_limit_at(t)
        if kind == "right":
            return self.right_limit_at(t)
        raise DomainError(f"unknown limit kind {kind!r}")

    # -- decomposition -----------------------------------------------------

    def jordan_hahn(self) -> tuple["LadlagPath", "LadlagPath"]:
        """Minimal split into increasing parts: ``self = initial_value + up - down``
        and the total variation is ``up + down``.  Both parts start at zero."""
        up_events = tuple(
            PathEvent(ev.time, max(ev.left_jump, 0.0), max(ev.right_jump, 0.0)) for ev in self.events
        )
        dn_events = tuple(
            PathEvent(ev.time, max(-ev.left_jump, 0.0), max(-ev.right_jump, 0.0)) for ev in self.events
        )
        up = LadlagPath(
            self.horizon,
            0.0,
            max(self.initial_right_jump, 0.0),
            up_events,
            tuple(max(s, 0.0) for s in self.slopes),
        )
        dn = LadlagPath(
            self.horizon,
            0.0,
            max(-self.initial_right_jump, 0.0),
            dn_events,
            tuple(max(-s, 0.0) for s in self.slopes),
        )
        return up, dn

    def total_variation(self, t: float | None = None) -> float:
        """Total variation on ``[0, t]``; right jumps at ``t`` itself are not
        part of the variation up to ``t``."""
        if t is None:
            t = self.horizon
        self._check_range(t, 0.0, self.horizon, "total_variation")
        up, dn = self.jordan_hahn()
        return up.value_at(t) + dn.value_at(t)

    def decompose_parts(self) -> tuple["LadlagPath", "LadlagPath", "LadlagPath"]:
        """Split into (continuous, left-jump, right-jump) components.

        The continuous part starts at zero and carries the slopes; the
        left-jump part is the running sum of left jumps; the right-jump part
        is the right-continuous running sum of right jumps (so its value at
        an event already includes that event's right jump).  The original
        path is ``initial_value + continuous(t) + left_part(t) +
        right_part(t-)`` with the left limit of the right part read as zero
        at ``t = 0``.
        """
        continuous = LadlagPath(
            self.horizon,
            0.0,
            0.0,
            tuple(PathEvent(ev.time, 0.0, 0.0) for ev in self.events),
            self.slopes,
        )
        left_part = LadlagPath(
            self.horizon,
            0.0,
            0.0,
            tuple(PathEvent(ev.time, ev.left_jump, 0.0) for ev in self.events if ev.left_jump != 0.0),
        )
        right_part = LadlagPath(
            self.horizon,
            self.initial_right_jump,
            0.0,
            tuple(PathEvent(ev.time, ev.right_jump, 0.0) for ev in self.events if ev.right_jump != 0.0),
        )
        return continuous, left_part, right_part

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "LadlagPath") -> "LadlagPath":
        if not isinstance(other, LadlagPath):
            return NotImplemented
        if other.horizon != self.horizon:
            raise ContractViolation("cannot add paths with different horizons")
        times = sorted(set(self.event_times) | set(other.event_times))
        events = tuple(
            PathEvent(
                t,
                self.left_jump_at(t) + other.left_jump_at(t),
                (self.right_jump_at(t) + other.right_jump_at(t)) if t != 0.0 else 0.0,
            )
            for t in times
        )
        boundaries = [0.0] + times
        slopes = tuple(self.slope_right_of(b) + other.slope_right_of(b) for b in boundaries)
        return LadlagPath(
            self.horizon,
            self.initial_value + other.initial_value,
            self.initial_right_jump + other.initial_right_jump,
            events,
            slopes,
        )

    def __mul__(self, c: float) -> "LadlagPath":
        if not isinstance(c, (int, float)):
            return NotImplemented
        c = float(c)
        return LadlagPath(
            self.horizon,
            c * self.initial_value,
            c * self.initial_right_jump,
            tuple(PathEvent(ev.time, c * ev.left_jump, c * ev.right_jump) for ev in self.events),
            tuple(c * s for s in self.slopes),
        )

    __rmul__ = __mul__

    def __neg__(self) -> "LadlagPath":
        return self * -1.0

    def __sub__(self, other: "LadlagPath") -> "LadlagPath":
        return self + (-other)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value: float, horizon: float) -> "LadlagPath":
        return cls(horizon, value)

    @classmethod
    def step(cls, horizon: float, initial_value: float, jumps: Iterable[tuple[float, float]]) -> "LadlagPath":
        """Right-continuous piecewise-constant path with the given
        ``(time, left_jump)`` moves."""
        events = tuple(PathEvent(t, j, 0.0) for t, j in sorted(jumps))
        return cls(horizon, initial_value, 0.0, events)
