"""Finite scenario trees, adapted price families, predictable trading
strategies and self-financing cash ledgers under proportional costs.

Information is a chain of partitions of the scenario set: a root partition
at time zero, then for every event time a pre-event partition (what is known
immediately before the event) and a post-event partition (what is known from
the event on).  Later partitions refine earlier ones.  A strategy never sees
more than the partition in force: trades placed immediately before an event
are constant on pre-event cells, trades at or immediately after an event on
post-event cells, so predictability is structural rather than checked.

The cash ledger prices purchases at the ask and sales at the bid
``(1 - transaction_cost) * ask``, with trades immediately before an event
executed at the price's left limit and trades at or after it at its value.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import ContractViolation, DomainError
from .integration import integrate
from .paths import LadlagPath, PathEvent

__all__ = [
    "Partition",
    "ScenarioTree",
    "ModelFamily",
    "Strategy",
    "TradeSite",
    "Violation",
    "refines",
    "trade_sites",
    "strategy_from_vector",
    "bond_value",
    "bond_ledger",
    "liquidation_value",
    "is_admissible",
    "check_self_financing",
    "admissibility_checkpoints",
]

Partition = tuple[frozenset[int], ...]


def normalize_partition(cells: Iterable[Iterable[int]], n: int, where: str = "partition") -> Partition:
    out = tuple(sorted((frozenset(c) for c in cells), key=min))
    seen: set[int] = set()
    for cell in out:
        if not cell:
            raise ContractViolation(f"{where}: empty cell")
        if not all(isinstance(w, int) and 0 <= w < n for w in cell):
            raise ContractViolation(f"{where}: cell members must be scenario indices below {n}")
        if cell & seen:
            raise ContractViolation(f"{where}: cells overlap")
        seen |= cell
    if seen != set(range(n)):
        raise ContractViolation(f"{where}: cells must cover all {n} scenarios")
    return out


def refines(fine: Partition, coarse: Partition) -> bool:
    """True when every cell of ``fine`` is contained in a cell of ``coarse``."""
    return all(any(cell <= big for big in coarse) for cell in fine)


def cell_index(partition: Partition, scenario: int) -> int:
    for i, cell in enumerate(partition):
        if scenario in cell:
            return i
    raise DomainError(f"scenario {scenario} not in partition")


@dataclass(frozen=True)
class ScenarioTree:
    """Finite filtered scenario space: probabilities, event times and the
    refining chain root <= pre(t1) <= post(t1) <= pre(t2) <= ...  Event
    times live in (0, horizon]."""

    labels: tuple[str, ...]
    probabilities: tuple[float, ...]
    horizon: float
    event_times: tuple[float, ...]
    pre_partitions: tuple[Partition, ...]
    post_partitions: tuple[Partition, ...]
    root_partition: Partition

    def __post_init__(self):
        n = len(self.labels)
        if n == 0 or len(set(self.labels)) != n:
            raise ContractViolation("scenario labels must be nonempty and unique")
        if len(self.probabilities) != n:
            raise ContractViolation("need one probability per scenario")
        if any(p <= 0.0 for p in self.probabilities):
            raise ContractViolation("scenario probabilities must be strictly positive")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ContractViolation(f"probabilities sum to {sum(self.probabilities)!r}, expected 1")
        if self.horizon <= 0.0:
            raise ContractViolation("horizon must be positive")
        if not (len(self.event_times) == len(self.pre_partitions) == len(self.post_partitions)):
            raise ContractViolation("event times and partitions must align")
        prev = 0.0
        for t in self.event_times:
            if not prev < t <= self.horizon:
                raise ContractViolation("event times must be strictly increasing in (0, horizon]")
            prev = t
        object.__setattr__(self, "root_partition", normalize_partition(self.root_partition, n, "root"))
        pres = tuple(
            normalize_partition(p, n, f"pre partition at t={t}")
            for p, t in zip(self.pre_partitions, self.event_times)
        )
        posts = tuple(
            normalize_partition(p, n, f"post partition at t={t}")
            for p, t in zip(self.post_partitions, self.event_times)
        )
        object.__setattr__(self, "pre_partitions", pres)
        object.__setattr__(self, "post_partitions", posts)
        chain = [self.root_partition]
        for pre, post in zip(pres, posts):
            chain.extend([pre, post])
        for fine, coarse in zip(chain[1:], chain):
            if not refines(fine, coarse):
                raise ContractViolation("information partitions must refine monotonically")

    # -- structure helpers ---------------------------------------------------

    @property
    def n_scenarios(self) -> int:
        return len(self.labels)

    @cached_property
    def label_index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def prob_of(self, cell: frozenset[int]) -> float:
        return sum(self.probabilities[w] for w in cell)

    def post_partition_in_force(self, t: float) -> Partition:
        """Partition governing the interval [event, next event) containing ``t``."""
        idx = bisect_right(self.event_times, t)
        return self.root_partition if idx == 0 else self.post_partitions[idx - 1]

    @cached_property
    def layer_times(self) -> tuple[float, ...]:
        """Times carrying a post-event partition: 0 then every event time."""
        return (0.0,) + self.event_times

    @cached_property
    def layer_partitions(self) -> tuple[Partition, ...]:
        return (self.root_partition,) + self.post_partitions

    @classmethod
    def build(cls, labels, probabilities, horizon, events, root=None) -> "ScenarioTree":
        """Convenience constructor from label-based cells.

        ``events`` is a list of ``(time, pre_cells, post_cells)`` with cells
        given as iterables of labels.
        """
        labels = tuple(labels)
        index = {lab: i for i, lab in enumerate(labels)}

        def conv(cells):
            return tuple(frozenset(index[l] for l in cell) for cell in cells)

        times = tuple(t for t, _, _ in events)
        pres = tuple(conv(p) for _, p, _ in events)
        posts = tuple(conv(p) for _, _, p in events)
        root_cells = conv(root) if root is not None else (frozenset(range(len(labels))),)
        return cls(
            labels=labels,
            probabilities=tuple(float(p) for p in probabilities),
            horizon=float(horizon),
            event_times=times,
            pre_partitions=pres,
            post_partitions=posts,
            root_partition=root_cells,
        )


@dataclass(frozen=True)
class ModelFamily:
    """One strictly positive adapted price path per scenario for every model
    in an uncertainty set, sharing a single scenario tree and a proportional
    transaction cost in (0, 1)."""

    tree: ScenarioTree
    model_names: tuple[str, ...]
    price_paths: tuple[tuple[LadlagPath, ...], ...]
    transaction_cost: float
    reference_cost: float | None = None

    def __init__(self, tree, models: Mapping[str, Sequence[LadlagPath]] | None = None,
                 transaction_cost: float = 0.1, reference_cost: float | None = None,
                 model_names=None, price_paths=None):
        object.__setattr__(self, "tree", tree)
        if models is not None:
            model_names = tuple(models.keys())
            price_paths = tuple(tuple(models[name]) for name in model_names)
        object.__setattr__(self, "model_names", tuple(model_names))
        object.__setattr__(self, "price_paths", tuple(tuple(p) for p in price_paths))
        object.__setattr__(self, "transaction_cost", float(transaction_cost))
        object.__setattr__(self, "reference_cost", None if reference_cost is None else float(reference_cost))
        self._validate()

    def _validate(self):
        lam = self.transaction_cost
        if not 0.0 < lam < 1.0:
            raise ContractViolation(f"transaction cost must lie in (0, 1), got {lam}")
        if self.reference_cost is not None and not 0.0 < self.reference_cost < lam:
            raise ContractViolation("reference cost must lie in (0, transaction_cost)")
        if not self.model_names:
            raise ContractViolation("a model family needs at least one model")
        tree = self.tree
        for name, paths in zip(self.model_names, self.price_paths):
            if len(paths) != tree.n_scenarios:
                raise ContractViolation(f"model {name!r}: need one price path per scenario")
            for w, path in enumerate(paths):
                if path.horizon != tree.horizon:
                    raise ContractViolation(f"model {name!r}: path horizon differs from the tree")
                if not path.is_cadlag:
                    raise ContractViolation(f"model {name!r}: price paths must be right-continuous")
                if any(t not in tree.event_times for t in path.event_times):
                    raise ContractViolation(
                        f"model {name!r}: price jumps only allowed at tree event times"
                    )
            self._check_positive(name, paths)
            self._check_adapted(name, paths)

    def _check_positive(self, name, paths):
        for w, path in enumerate(paths):
            pts = [path.value_at(0.0), path.value_at(path.horizon)]
            for t in self.tree.event_times:
                pts.append(path.left_limit_at(t))
                pts.append(path.value_at(t))
            if min(pts) <= 0.0:
                raise ContractViolation(f"model {name!r}: price must stay strictly positive")

    def _check_adapted(self, name, paths):
        tree = self.tree
        for cell in tree.root_partition:
            vals = {paths[w].value_at(0.0) for w in cell}
            if len(vals) > 1:
                raise ContractViolation(f"model {name!r}: initial price must be constant on root cells")
        boundaries = (0.0,) + tree.event_times
        for i, start in enumerate(boundaries):
            partition = tree.root_partition if i == 0 else tree.post_partitions[i - 1]
            for cell in partition:
                slopes = {paths[w].slope_right_of(start) for w in cell}
                if len(slopes) > 1:
                    raise ContractViolation(
                        f"model {name!r}: slope after t={start} must be constant on information cells"
                    )
        for i, t in enumerate(tree.event_times):
            for cell in tree.post_partitions[i]:
                vals = {paths[w].value_at(t) for w in cell}
                if len(vals) > 1:
                    raise ContractViolation(
                        f"model {name!r}: price at t={t} must be constant on post-event cells"
                    )

    @property
    def models(self) -> dict[str, tuple[LadlagPath, ...]]:
        return dict(zip(self.model_names, self.price_paths))

    def price(self, theta: str, scenario: int) -> LadlagPath:
        try:
            j = self.model_names.index(theta)
        except ValueError:
            raise DomainError(f"unknown model {theta!r}") from None
        return self.price_paths[j][scenario]


def _right_site_times(tree: ScenarioTree) -> tuple[float, ...]:
    return (0.0,) + tuple(t for t in tree.event_times if t < tree.horizon)


def _right_site_partitions(tree: ScenarioTree) -> tuple[Partition, ...]:
    parts = [tree.root_partition]
    for i, t in enumerate(tree.event_times):
        if t < tree.horizon:
            parts.append(tree.post_partitions[i])
    return tuple(parts)


def _interval_partitions(tree: ScenarioTree) -> tuple[Partition, ...]:
    return (tree.root_partition,) + tree.post_partitions


@dataclass(frozen=True)
class Strategy:
    """Predictable trading plan: nonnegative buy/sell amounts attached to
    information cells.

    Trades immediately before event ``t`` live on pre-event cells of ``t``;
    trades at time zero or immediately after an event live on the post-event
    cells; optional continuous trading rates are constant per inter-event
    interval on the partition in force.  Share holdings start at zero, cash
    at ``initial_cash``.
    """

    tree: ScenarioTree
    initial_cash: float
    left_buys: tuple[tuple[float, ...], ...]
    left_sells: tuple[tuple[float, ...], ...]
    right_buys: tuple[tuple[float, ...], ...]
    right_sells: tuple[tuple[float, ...], ...]
    rate_buys: tuple[tuple[float, ...], ...]
    rate_sells: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        tree = self.tree
        if not self.initial_cash >= 0.0:
            raise ContractViolation("initial cash must be nonnegative")
        shapes = {
            "left_buys": (self.left_buys, [len(p) for p in tree.pre_partitions]),
            "left_sells": (self.left_sells, [len(p) for p in tree.pre_partitions]),
            "right_buys": (self.right_buys, [len(p) for p in _right_site_partitions(tree)]),
            "right_sells": (self.right_sells, [len(p) for p in _right_site_partitions(tree)]),
            "rate_buys": (self.rate_buys, [len(p) for p in _interval_partitions(tree)]),
            "rate_sells": (self.rate_sells, [len(p) for p in _interval_partitions(tree)]),
        }
        for what, (rows, want) in shapes.items():
            if [len(r) for r in rows] != want:
                raise ContractViolation(f"{what}: expected row sizes {want}")
            for row in rows:
                if any(v < 0.0 for v in row):
                    raise ContractViolation(f"{what}: increments must be nonnegative")

    # -- construction --------------------------------------------------------

    @classmethod
    def no_trade(cls, tree: ScenarioTree, initial_cash: float) -> "Strategy":
        z = lambda parts: tuple(tuple(0.0 for _ in p) for p in parts)
        return cls(
            tree,
            float(initial_cash),
            z(tree.pre_partitions),
            z(tree.pre_partitions),
            z(_right_site_partitions(tree)),
            z(_right_site_partitions(tree)),
            z(_interval_partitions(tree)),
            z(_interval_partitions(tree)),
        )

    @classmethod
    def from_trades(cls, tree, initial_cash, left=None, right=None, rates=None) -> "Strategy":
        """Build from sparse dictionaries.

        ``left``: ``{(event_time, cell): (buy, sell)}`` on pre-event cells;
        ``right``: ``{(site_time, cell): (buy, sell)}`` with site time 0 or an
        event time before the horizon, on the partition then in force;
        ``rates``: ``{(interval_index, cell): (buy_rate, sell_rate)}``.
        Cells are given as an index into the partition or as an iterable of
        scenario labels matching one cell exactly.
        """
        base = cls.no_trade(tree, initial_cash)
        lb = [list(r) for r in base.left_buys]
        ls = [list(r) for r in base.left_sells]
        rb = [list(r) for r in base.right_buys]
        rs = [list(r) for r in base.right_sells]
        qb = [list(r) for r in base.rate_buys]
        qs = [list(r) for r in base.rate_sells]
        site_times = _right_site_times(tree)
        site_parts = _right_site_partitions(tree)
        for (t, key), (buy, sell) in (left or {}).items():
            if t not in tree.event_times:
                raise ContractViolation(f"no event at time {t}")
            i = tree.event_times.index(t)
            c = _resolve_cell(tree, tree.pre_partitions[i], key)
            lb[i][c], ls[i][c] = float(buy), float(sell)
        for (t, key), (buy, sell) in (right or {}).items():
            if t not in site_times:
                raise ContractViolation(f"no post-event trading site at time {t}")
            i = site_times.index(t)
            c = _resolve_cell(tree, site_parts[i], key)
            rb[i][c], rs[i][c] = float(buy), float(sell)
        for (i, key), (buy, sell) in (rates or {}).items():
            parts = _interval_partitions(tree)
            if not 0 <= i < len(parts):
                raise ContractViolation(f"interval index {i} out of range")
            c = _resolve_cell(tree, parts[i], key)
            qb[i][c], qs[i][c] = float(buy), float(sell)
        return cls(
            tree,
            float(initial_cash),
            tuple(tuple(r) for r in lb),
            tuple(tuple(r) for r in ls),
            tuple(tuple(r) for r in rb),
            tuple(tuple(r) for r in rs),
            tuple(tuple(r) for r in qb),
            tuple(tuple(r) for r in qs),
        )

    # -- per-scenario views ----------------------------------------------------

    def left_increments(self, scenario: int, t: float) -> tuple[float, float]:
        if t in self.tree.event_times:
            i = self.tree.event_times.index(t)
            c = cell_index(self.tree.pre_partitions[i], scenario)
            return self.left_buys[i][c], self.left_sells[i][c]
        return 0.0, 0.0

    def right_increments(self, scenario: int, t: float) -> tuple[float, float]:
        site_times = _right_site_times(self.tree)
        if t in site_times:
            i = site_times.index(t)
            c = cell_index(_right_site_partitions(self.tree)[i], scenario)
            return self.right_buys[i][c], self.right_sells[i][c]
        return 0.0, 0.0

    def rates_for(self, scenario: int, interval: int) -> tuple[float, float]:
        c = cell_index(_interval_partitions(self.tree)[interval], scenario)
        return self.rate_buys[interval][c], self.rate_sells[interval][c]

    def _assemble(self, scenario: int, pick) -> LadlagPath:
        tree = self.tree
        events = []
        for i, t in enumerate(tree.event_times):
            lb, ls = self.left_increments(scenario, t)
            rb, rs = self.right_increments(scenario, t) if t < tree.horizon else (0.0, 0.0)
            events.append(PathEvent(t, pick(lb, ls), pick(rb, rs)))
        rb0, rs0 = self.right_increments(scenario, 0.0)
        slopes = []
        for i in range(len(tree.event_times) + 1):
            qb, qs = self.rates_for(scenario, i)
            slopes.append(pick(qb, qs))
        return LadlagPath(tree.horizon, 0.0, pick(rb0, rs0), tuple(events), tuple(slopes))

    def share_path(self, scenario: int) -> LadlagPath:
        """Net share holdings along one scenario."""
        return self._assemble(scenario, lambda b, s: b - s)

    def share_up(self, scenario: int) -> LadlagPath:
        """Cumulative purchases (increasing)."""
        return self._assemble(scenario, lambda b, s: b)

    def share_down(self, scenario: int) -> LadlagPath:
        """Cumulative sales (increasing)."""
        return self._assemble(scenario, lambda b, s: s)

    @cached_property
    def has_rates(self) -> bool:
        return any(any(v != 0.0 for v in row) for row in self.rate_buys + self.rate_sells)

    # -- algebra ----------------------------------------------------------------

    def blend(self, other: "Strategy", alpha: float) -> "Strategy":
        """Convex combination ``alpha * self + (1 - alpha) * other``."""
        if not 0.0 <= alpha <= 1.0:
            raise DomainError("blend weight must lie in [0, 1]")
        if other.tree is not self.tree and other.tree != self.tree:
            raise ContractViolation("strategies must share one tree")

        def mix(a, b):
            return tuple(
                tuple(alpha * x + (1.0 - alpha) * y for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
            )

        return Strategy(
            self.tree,
            alpha * self.initial_cash + (1.0 - alpha) * other.initial_cash,
            mix(self.left_buys, other.left_buys),
            mix(self.left_sells, other.left_sells),
            mix(self.right_buys, other.right_buys),
            mix(self.right_sells, other.right_sells),
            mix(self.rate_buys, other.rate_buys),
            mix(self.rate_sells, other.rate_sells),
        )

    def liquidated(self) -> "Strategy":
        """Replace the terminal pre-event trades so the share position at the
        horizon is exactly zero.  Requires an event at the horizon."""
        tree = self.tree
        if not tree.event_times or tree.event_times[-1] != tree.horizon:
            raise ContractViolation("liquidation needs an event at the horizon")
        k = len(tree.event_times) - 1
        lb = [list(r) for r in self.left_buys]
        ls = [list(r) for r in self.left_sells]
        lb[k] = [0.0] * len(lb[k])
        ls[k] = [0.0] * len(ls[k])
        interim = Strategy(
            tree,
            self.initial_cash,
            tuple(tuple(r) for r in lb),
            tuple(tuple(r) for r in ls),
            self.right_buys,
            self.right_sells,
            self.rate_buys,
            self.rate_sells,
        )
        for c, cell in enumerate(tree.pre_partitions[k]):
            pos = interim.share_path(min(cell)).left_limit_at(tree.horizon)
            lb[k][c] = max(-pos, 0.0)
            ls[k][c] = max(pos, 0.0)
        return Strategy(
            tree,
            self.initial_cash,
            tuple(tuple(r) for r in lb),
            tuple(tuple(r) for r in ls),
            self.right_buys,
            self.right_sells,
            self.rate_buys,
            self.rate_sells,
        )


def _resolve_cell(tree: ScenarioTree, partition: Partition, key) -> int:
    if isinstance(key, int):
        if not 0 <= key < len(partition):
            raise ContractViolation(f"cell index {key} out of range")
        return key
    members = frozenset(
        tree.label_index[k] if isinstance(k, str) else int(k) for k in key
    )
    for i, cell in enumerate(partition):
        if cell == members:
            return i
    raise ContractViolation(f"no cell {sorted(members)} in partition {partition}")


# -- trade sites (shared by the superhedging and maximin solvers) -----------------


class TradeSite(NamedTuple):
    kind: str  # "left" or "right"
    time: float
    cell: frozenset[int]
    slot: tuple[int, int]  # (row, column) into the strategy arrays


def trade_sites(tree: ScenarioTree) -> tuple[TradeSite, ...]:
    """Every (jump-trade) decision node of the tree in deterministic order."""
    sites = []
    for i, t in enumerate(tree.event_times):
        for c, cell in enumerate(tree.pre_partitions[i]):
            sites.append(TradeSite("left", t, cell, (i, c)))
    for i, t in enumerate(_right_site_times(tree)):
        for c, cell in enumerate(_right_site_partitions(tree)[i]):
            sites.append(TradeSite("right", t, cell, (i, c)))
    return tuple(sites)


def strategy_from_vector(tree: ScenarioTree, initial_cash: float, h: Sequence[float]) -> Strategy:
    """Inverse of the site enumeration: ``h`` holds ``(buy, sell)`` pairs in
    ``trade_sites`` order."""
    sites = trade_sites(tree)
    if len(h) != 2 * len(sites):
        raise ContractViolation(f"expected {2 * len(sites)} increments, got {len(h)}")
    base = Strategy.no_trade(tree, initial_cash)
    lb = [list(r) for r in base.left_buys]
    ls = [list(r) for r in base.left_sells]
    rb = [list(r) for r in base.right_buys]
    rs = [list(r) for r in base.right_sells]
    for j, site in enumerate(sites):
        i, c = site.slot
        if site.kind == "left":
            lb[i][c], ls[i][c] = float(h[2 * j]), float(h[2 * j + 1])
        else:
            rb[i][c], rs[i][c] = float(h[2 * j]), float(h[2 * j + 1])
    return Strategy(
        tree,
        float(initial_cash),
        tuple(tuple(r) for r in lb),
        tuple(tuple(r) for r in ls),
        tuple(tuple(r) for r in rb),
        tuple(tuple(r) for r in rs),
        base.rate_buys,
        base.rate_sells,
    )


def site_price(family: ModelFamily, theta: str, scenario: int, site: TradeSite) -> float:
    """Execution price of a trade site: left limit for pre-event trades,
    value for trades at or immediately after an event."""
    S = family.price(theta, scenario)
    return S.left_limit_at(site.time) if site.kind == "left" else S.value_at(site.time)


def site_applied(site: TradeSite, t: float, kind: str) -> bool:
    """Whether a site's trade is already part of the holdings at (t, kind)."""
    if site.time < t:
        return True
    if site.time > t:
        return False
    if site.kind == "left":
        return kind in ("value", "right")
    return kind == "right"


# -- ledgers and admissibility -----------------------------------------------------


def bond_value(strategy: Strategy, family: ModelFamily, theta: str, scenario: int,
               t: float, kind: str = "value") -> float:
    """Exact cash holdings along one scenario at time ``t`` (``kind`` one of
    ``"left"``, ``"value"``, ``"right"``), computed through the pathwise
    integral of the price against the gross trade flows."""
    lam = family.transaction_cost
    S = family.price(theta, scenario)
    if kind == "left" and t == 0.0:
        raise DomainError("no left limit at time zero")
    base = strategy.initial_cash
    if t > 0.0:
        up = strategy.share_up(scenario)
        down = strategy.share_down(scenario)
        base += (1.0 - lam) * integrate(S, down, 0.0, t) - integrate(S, up, 0.0, t)
    if kind == "value":
        return base
    if kind == "left":
        lb, ls = strategy.left_increments(scenario, t)
        return base - S.left_limit_at(t) * ((1.0 - lam) * ls - lb)
    if kind == "right":
        if t == strategy.tree.horizon:
            raise DomainError("no right limit at the horizon")
        rb, rs = strategy.right_increments(scenario, t)
        return base + S.value_at(t) * ((1.0 - lam) * rs - rb)
    raise DomainError(f"unknown limit kind {kind!r}")


def bond_ledger(strategy: Strategy, family: ModelFamily, theta: str, scenario: int) -> LadlagPath:
    """Cash holdings as a path.  Exact whenever each interval's ledger is
    linear in time, i.e. trading rates are zero or the price is flat there;
    otherwise the exact ledger is quadratic in time and not representable,
    and a :class:`ContractViolation` is raised."""
    lam = family.transaction_cost
    tree = strategy.tree
    S = family.price(theta, scenario)
    events = []
    for t in tree.event_times:
        lb, ls = strategy.left_increments(scenario, t)
        lj = S.left_limit_at(t) * ((1.0 - lam) * ls - lb)
        rj = 0.0
        if t < tree.horizon:
            rb, rs = strategy.right_increments(scenario, t)
            rj = S.value_at(t) * ((1.0 - lam) * rs - rb)
        events.append(PathEvent(t, lj, rj))
    rb0, rs0 = strategy.right_increments(scenario, 0.0)
    irj = S.value_at(0.0) * ((1.0 - lam) * rs0 - rb0)
    slopes = []
    boundaries = (0.0,) + tree.event_times
    for i, start in enumerate(boundaries):
        if i == len(boundaries) - 1 and start == tree.horizon:
            slopes.append(0.0)
            continue
        qb, qs = strategy.rates_for(scenario, i)
        cost_rate = qb - (1.0 - lam) * qs
        if cost_rate == 0.0:
            slopes.append(0.0)
            continue
        if S.slope_right_of(start) != 0.0:
            raise ContractViolation(
                "cash ledger is quadratic where a trading rate meets a sloped price; "
                "use pure-jump trades or a piecewise-constant price on that interval"
            )
        slopes.append(-cost_rate * S.value_at(start))
    return LadlagPath(tree.horizon, strategy.initial_cash, irj, tuple(events), tuple(slopes))


def liquidation_value(strategy: Strategy, family: ModelFamily, theta: str, scenario: int,
                      t: float, kind: str = "value") -> float:
    """Cash plus the value of closing the share position: long positions are
    sold at the bid, short positions bought back at the ask."""
    lam = family.transaction_cost
    S = family.price(theta, scenario)
    h0 = bond_value(strategy, family, theta, scenario, t, kind)
    h1 = strategy.share_path(scenario).at(t, kind)
    s = S.left_limit_at(t) if kind == "left" else S.value_at(t)
    return h0 + (1.0 - lam) * s * max(h1, 0.0) + s * min(h1, 0.0)


class Violation(NamedTuple):
    theta: str
    scenario: str
    time: float
    kind: str
    value: float


def admissibility_checkpoints(tree: ScenarioTree) -> tuple[tuple[float, str], ...]:
    """All (time, kind) pairs at which the liquidation value must be checked;
    between these points it is monotone-free linear for pure-jump strategies."""
    pts: list[tuple[float, str]] = [(0.0, "value"), (0.0, "right")]
    for t in tree.event_times:
        pts.append((t, "left"))
        pts.append((t, "value"))
        if t < tree.horizon:
            pts.append((t, "right"))
    if not tree.event_times or tree.event_times[-1] != tree.horizon:
        pts.append((tree.horizon, "value"))
    return tuple(pts)


def _interval_min_liq(strategy, family, theta, scenario, interval_idx, a, b, tol):
    """Exact minimum of the liquidation value on the open interval (a, b):
    with a trading rate and a sloped price it is piecewise quadratic in time,
    split at the zero crossing of the share position."""
    lam = family.transaction_cost
    S = family.price(theta, scenario)
    qb, qs = strategy.rates_for(scenario, interval_idx)
    cost_rate = qb - (1.0 - lam) * qs
    r = qb - qs
    h0a = bond_value(strategy, family, theta, scenario, a, "right" if a < strategy.tree.horizon else "value")
    ha = strategy.share_path(scenario).right_limit_at(a)
    sa = S.value_at(a)
    sig = S.slope_right_of(a)
    length = b - a
    cuts = [0.0, length]
    if r != 0.0:
        tz = -ha / r
        if 0.0 < tz < length:
            cuts = [0.0, tz, length]
    worst = (None, float("inf"))
    for p, q in zip(cuts, cuts[1:]):
        mid_h = ha + r * 0.5 * (p + q)
        kappa = (1.0 - lam) if mid_h >= 0.0 else 1.0
        A = h0a + kappa * sa * ha
        B = -cost_rate * sa + kappa * (sig * ha + sa * r)
        C = -cost_rate * sig * 0.5 + kappa * sig * r
        taus = [p, q]
        if C != 0.0:
            v = -B / (2.0 * C)
            if p < v < q:
                taus.append(v)
        for tau in taus:
            val = A + B * tau + C * tau * tau
            if val < worst[1]:
                worst = (a + tau, val)
    return worst


def is_admissible(strategy: Strategy, family: ModelFamily, tol: float = 1e-9
                  ) -> tuple[bool, Violation | None]:
    """Whether the liquidation value stays above ``-tol`` at every time under
    every model and scenario; on failure the first violation found is
    returned (models in family order, scenarios in tree order, time
    ascending)."""
    tree = strategy.tree
    pts = admissibility_checkpoints(tree)
    boundaries = [0.0] + [t for t in tree.event_times] + (
        [] if tree.event_times and tree.event_times[-1] == tree.horizon else [tree.horizon]
    )
    for theta in family.model_names:
        for w in range(tree.n_scenarios):
            for t, kind in pts:
                v = liquidation_value(strategy, family, theta, w, t, kind)
                if v < -tol:
                    return False, Violation(theta, tree.labels[w], t, kind, v)
            if strategy.has_rates:
                for i, (a, b) in enumerate(zip(boundaries, boundaries[1:])):
                    t_star, v = _interval_min_liq(strategy, family, theta, w, i, a, b, tol)
                    if v < -tol:
                        return False, Violation(theta, tree.labels[w], t_star, "interior", v)
    return True, None


def check_self_financing(bond_paths: Sequence[LadlagPath], strategy: Strategy,
                         family: ModelFamily, theta: str, tol: float = 1e-9) -> bool:
    """Verify that candidate cash paths never receive more than the trades
    release: jump for jump against the bid/ask prices, and in running rate on
    every interval.  The ledger produced by :func:`bond_ledger` satisfies all
    three families with equality."""
    lam = family.transaction_cost
    tree = strategy.tree
    if len(bond_paths) != tree.n_scenarios:
        raise ContractViolation("need one candidate cash path per scenario")
    for w, cand in enumerate(bond_paths):
        if cand.horizon != tree.horizon:
            raise ContractViolation("candidate cash path horizon differs from the tree")
        S = family.price(theta, w)
        rb0, rs0 = strategy.right_increments(w, 0.0)
        if cand.initial_right_jump > S.value_at(0.0) * ((1.0 - lam) * rs0 - rb0) + tol:
            return False
        times = sorted(set(tree.event_times) | set(cand.event_times))
        for t in times:
            lb, ls = strategy.left_increments(w, t)
            if cand.left_jump_at(t) > S.left_limit_at(t) * ((1.0 - lam) * ls - lb) + tol:
                return False
            if t < tree.horizon:
                rb, rs = strategy.right_increments(w, t)
                if cand.right_jump_at(t) > S.value_at(t) * ((1.0 - lam) * rs - rb) + tol:
                    return False
        bounds = [0.0] + [t for t in times if t < tree.horizon] + [tree.horizon]
        for a, b in zip(bounds, bounds[1:]):
            if b <= a:
                continue
            idx = bisect_right(tree.event_times, a)
            qb, qs = strategy.rates_for(w, idx)
            rate_cap_a = S.value_at(a) * ((1.0 - lam) * qs - qb)
            rate_cap_b = S.left_limit_at(b) * ((1.0 - lam) * qs - qb)
            if cand.slope_right_of(a) > min(rate_cap_a, rate_cap_b) + tol:
                return False
    return True
