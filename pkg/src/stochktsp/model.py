"""Instances, reward distributions and exact pmf arithmetic.

Every probability and expectation is a :class:`fractions.Fraction`; reward
values and the target ``k`` are Python ints, so targets like ``4**8`` or
larger need no special handling.
"""
from __future__ import annotations

import bisect
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Rational = Union[int, Fraction]

METRIC = "metric"
KNAPSACK = "knapsack"
OPEN = "open"
CLOSED = "closed"


class InstanceError(ValueError):
    """Raised for malformed instances, metrics or distributions."""


def to_fraction(x) -> Fraction:
    """Parse ``x`` exactly. Floats are rejected to keep parsing lossless."""
    if isinstance(x, float):
        raise InstanceError(f"refusing inexact float {x!r}; use a 'p/q' string")
    try:
        return Fraction(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InstanceError(f"cannot parse rational {x!r}") from exc


def fraction_str(x: Rational) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


# --------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class Metric:
    dist: tuple[tuple[Fraction, ...], ...]
    depot: int = 0

    def __post_init__(self) -> None:
        rows = tuple(tuple(to_fraction(x) for x in row) for row in self.dist)
        object.__setattr__(self, "dist", rows)
        n = len(rows)
        if n == 0:
            raise InstanceError("empty metric")
        if not 0 <= self.depot < n:
            raise InstanceError(f"depot {self.depot} out of range for {n} vertices")
        for u, row in enumerate(rows):
            if len(row) != n:
                raise InstanceError(f"distance row {u} has length {len(row)}, expected {n}")
            if row[u] != 0:
                raise InstanceError(f"dist[{u}][{u}] = {row[u]} is not zero")
            for v, d in enumerate(row):
                if d < 0:
                    raise InstanceError(f"negative distance dist[{u}][{v}] = {d}")
                if d != rows[v][u]:
                    raise InstanceError(f"asymmetric metric: dist[{u}][{v}] != dist[{v}][{u}]")
        for u in range(n):
            du = rows[u]
            for w in range(n):
                for v in range(n):
                    if du[v] > du[w] + rows[w][v]:
                        raise InstanceError(
                            f"triangle inequality violated by ({u}, {w}, {v}): "
                            f"d({u},{v}) = {du[v]} > d({u},{w}) + d({w},{v}) = {du[w] + rows[w][v]}"
                        )

    @property
    def n(self) -> int:
        return len(self.dist)

    def min_positive(self) -> Fraction | None:
        pos = [d for row in self.dist for d in row if d > 0]
        return min(pos) if pos else None


def normalize_metric(m: Metric) -> tuple[Metric, Fraction]:
    """Scale ``m`` so its minimum positive distance is exactly 1.

    Returns the scaled metric and the scale factor (original = scaled * scale).
    """
    scale = m.min_positive()
    if scale is None:
        raise InstanceError("degenerate metric: no positive distance")
    dist = tuple(tuple(d / scale for d in row) for row in m.dist)
    return Metric(dist, m.depot), scale


# --------------------------------------------------------------------------
# reward distributions


@dataclass(frozen=True)
class RewardDistribution:
    """Finite pmf over non-negative integer rewards, probabilities exact."""

    support: tuple[tuple[int, Fraction], ...]
    _cdf: tuple[float, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        merged: dict[int, Fraction] = {}
        for value, prob in self.support:
            if isinstance(value, bool) or not isinstance(value, int):
                if isinstance(value, Fraction) and value.denominator == 1:
                    value = value.numerator
                else:
                    raise InstanceError(f"reward value {value!r} is not an integer")
            if value < 0:
                raise InstanceError(f"negative reward value {value}")
            if value in merged:
                raise InstanceError(f"duplicate reward value {value}")
            prob = to_fraction(prob)
            if prob <= 0:
                raise InstanceError(f"non-positive probability {prob} for value {value}")
            merged[value] = prob
        if not merged:
            raise InstanceError("empty reward distribution")
        total = sum(merged.values())
        if total != 1:
            raise InstanceError(f"pmf mass ≠ 1 (sums to {total})")
        support = tuple(sorted(merged.items()))
        object.__setattr__(self, "support", support)
        acc, cdf = Fraction(0), []
        for _, p in support:
            acc += p
            cdf.append(float(acc))
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", tuple(cdf))

    @classmethod
    def point(cls, value: int) -> "RewardDistribution":
        return cls(((value, Fraction(1)),))

    @classmethod
    def from_pmf(cls, pmf: Mapping[int, Rational]) -> "RewardDistribution":
        return cls(tuple((v, Fraction(p)) for v, p in pmf.items() if p != 0))

    @classmethod
    def bernoulli(cls, value: int, prob: Rational) -> "RewardDistribution":
        prob = Fraction(prob)
        if prob == 1 or value == 0:
            return cls.point(value)
        return cls(((0, 1 - prob), (value, prob)))

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.support)

    def pmf(self) -> dict[int, Fraction]:
        return dict(self.support)

    @property
    def mean(self) -> Fraction:
        return sum((v * p for v, p in self.support), Fraction(0))

    @property
    def max_value(self) -> int:
        return self.support[-1][0]

    @property
    def min_value(self) -> int:
        return self.support[0][0]

    @property
    def is_zero(self) -> bool:
        return self.max_value == 0

    @property
    def is_deterministic(self) -> bool:
        return len(self.support) == 1

    def sample(self, rng: random.Random) -> int:
        if len(self.support) == 1:
            return self.support[0][0]
        return self.support[bisect.bisect_right(self._cdf, rng.random())][0]


def truncated_expectation(d: RewardDistribution, cap: Rational) -> Fraction:
    """E[min(R, cap)] computed exactly."""
    if cap < 0:
        raise ValueError("cap must be non-negative")
    cap = Fraction(cap)
    return sum((p * min(v, cap) for v, p in d.support), Fraction(0))


Pmf = dict  # value -> Fraction


def convolve_capped(a: Mapping, b: Mapping, cap: Rational) -> dict:
    """pmf of min(A + B, cap) for independent A, B given as pmfs."""
    out: dict = {}
    for x, px in a.items():
        for y, py in b.items():
            s = x + y
            if s > cap:
                s = cap
            out[s] = out.get(s, 0) + px * py
    return out


def capped_prefix_distribution(ds: Sequence[RewardDistribution | Mapping],
                               cap: Rational) -> list[dict]:
    """pmfs of min(R_1 + ... + R_j, cap) for j = 0 .. len(ds).

    Entry 0 is the point mass at zero (empty sum).
    """
    cur: dict = {0: Fraction(1)}
    out = [cur]
    for d in ds:
        pmf = d.pmf() if isinstance(d, RewardDistribution) else d
        cur = convolve_capped(cur, pmf, cap)
        out.append(cur)
    return out


# --------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class Instance:
    """Stochastic k-TSP instance.

    ``kind == "metric"``: vertices of ``metric``; moving u -> v costs dist[u][v].
    ``kind == "knapsack"``: the weighted star; visiting v costs ``costs[v]``
    wherever the walk currently is, and the depot has cost 0.
    """

    kind: str
    k: int
    rewards: tuple[RewardDistribution, ...]
    tour_mode: str = OPEN
    metric: Metric | None = None
    costs: tuple[int, ...] | None = None
    depot: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "rewards", tuple(self.rewards))
        if self.kind not in (METRIC, KNAPSACK):
            raise InstanceError(f"unknown instance kind {self.kind!r}")
        if self.tour_mode not in (OPEN, CLOSED):
            raise InstanceError(f"unknown tour mode {self.tour_mode!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise InstanceError(f"target k must be a non-negative integer, got {self.k!r}")
        n = len(self.rewards)
        if self.kind == METRIC:
            if self.metric is None:
                raise InstanceError("metric instance without distances")
            if self.metric.n != n:
                raise InstanceError(f"{n} reward distributions for {self.metric.n} vertices")
            if self.metric.depot != self.depot:
                raise InstanceError("metric depot disagrees with instance depot")
        else:
            if self.costs is None:
                raise InstanceError("knapsack instance without costs")
            costs = tuple(self.costs)
            object.__setattr__(self, "costs", costs)
            if len(costs) != n:
                raise InstanceError(f"{n} reward distributions for {len(costs)} costs")
            for c in costs:
                if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                    raise InstanceError(f"item cost {c!r} is not a non-negative integer")
            if costs[self.depot] != 0:
                raise InstanceError("depot must have cost 0")
        if not 0 <= self.depot < n:
            raise InstanceError(f"depot {self.depot} out of range")
        if not self.rewards[self.depot].is_zero:
            raise InstanceError("depot must have zero reward")
        for v, d in enumerate(self.rewards):
            if d.max_value > self.k:
                raise InstanceError(f"vertex {v} has reward {d.max_value} above k = {self.k}")

    @property
    def n(self) -> int:
        return len(self.rewards)

    @property
    def closed(self) -> bool:
        return self.tour_mode == CLOSED and self.kind == METRIC

    def travel(self, u: int, v: int) -> Rational:
        if self.kind == METRIC:
            return self.metric.dist[u][v]
        return 0 if v == self.depot else self.costs[v]

    def return_cost(self, v: int) -> Rational:
        """Return leg charged at the end of a walk (closed metric tours only)."""
        if self.closed:
            return self.metric.dist[v][self.depot]
        return 0

    def walk_length(self, walk: Sequence[int]) -> Fraction:
        """Length of a depot-rooted walk, including the return leg in closed mode."""
        total = Fraction(0)
        prev = self.depot
        for v in walk:
            if v == prev:
                continue
            total += self.travel(prev, v)
            prev = v
        return total + self.return_cost(prev)

    def positive_vertices(self) -> frozenset[int]:
        return frozenset(v for v, d in enumerate(self.rewards) if not d.is_zero)

    def with_tour_mode(self, mode: str) -> "Instance":
        return Instance(self.kind, self.k, self.rewards, mode, self.metric, self.costs,
                        self.depot, self.name)

    def span_bound(self) -> Fraction:
        """Length of some walk visiting every vertex (used for phase caps)."""
        order = [v for v in range(self.n) if v != self.depot]
        return self.walk_length(order)


@dataclass(frozen=True)
class PolicyState:
    """Visited set, observed rewards and their total."""

    sigma: tuple[tuple[int, int], ...] = ()

    @property
    def visited(self) -> frozenset[int]:
        return frozenset(v for v, _ in self.sigma)

    @property
    def k_sigma(self) -> int:
        return sum(x for _, x in self.sigma)

    def observe(self, v: int, reward: int) -> "PolicyState":
        if v in self.visited:
            return self
        return PolicyState(self.sigma + ((v, reward),))


# --------------------------------------------------------------------------
# serialization


def instance_to_dict(inst: Instance) -> dict:
    out: dict = {
        "kind": inst.kind,
        "n": inst.n,
        "k": str(inst.k),
        "depot": inst.depot,
        "tour_mode": inst.tour_mode,
    }
    if inst.name:
        out["name"] = inst.name
    if inst.kind == METRIC:
        out["distances"] = [[fraction_str(d) for d in row] for row in inst.metric.dist]
    else:
        out["costs"] = list(inst.costs)
    out["rewards"] = [
        {"values": [str(v) for v in d.values], "probs": [fraction_str(p) for _, p in d.support]}
        for d in inst.rewards
    ]
    return out


def serialize_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def _require(obj: dict, key: str, types):
    if key not in obj:
        raise InstanceError(f"missing field {key!r}")
    val = obj[key]
    if not isinstance(val, types) or isinstance(val, bool):
        raise InstanceError(f"field {key!r} has wrong type {type(val).__name__}")
    return val


def _parse_int(x, what: str) -> int:
    if isinstance(x, bool):
        raise InstanceError(f"{what}: expected integer, got {x!r}")
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        try:
            return int(x.strip())
        except ValueError:
            pass
    raise InstanceError(f"{what}: expected integer, got {x!r}")


def instance_from_dict(obj: dict) -> Instance:
    if not isinstance(obj, dict):
        raise InstanceError("instance must be a JSON object")
    kind = _require(obj, "kind", str)
    n = _require(obj, "n", int)
    k = _parse_int(_require(obj, "k", (str, int)), "k")
    depot = _require(obj, "depot", int)
    tour_mode = obj.get("tour_mode", OPEN)
    raw_rewards = _require(obj, "rewards", list)
    if len(raw_rewards) != n:
        raise InstanceError(f"n = {n} but {len(raw_rewards)} reward entries")
    rewards = []
    for v, entry in enumerate(raw_rewards):
        if not isinstance(entry, dict):
            raise InstanceError(f"reward entry {v} must be an object")
        values = _require(entry, "values", list)
        probs = _require(entry, "probs", list)
        if len(values) != len(probs):
            raise InstanceError(f"reward entry {v}: values/probs length mismatch")
        try:
            rewards.append(RewardDistribution(tuple(
                (_parse_int(x, f"reward {v} value"), to_fraction(p)) for x, p in zip(values, probs)
            )))
        except InstanceError as exc:
            raise InstanceError(f"reward entry {v}: {exc}") from None
    metric = costs = None
    if kind == METRIC:
        rows = _require(obj, "distances", list)
        if len(rows) != n or any(not isinstance(r, list) for r in rows):
            raise InstanceError("distances must be an n x n array")
        metric = Metric(tuple(tuple(to_fraction(x) for x in row) for row in rows), depot)
    elif kind == KNAPSACK:
        costs = tuple(_parse_int(c, "cost") for c in _require(obj, "costs", list))
    else:
        raise InstanceError(f"unknown instance kind {kind!r}")
    return Instance(kind, k, tuple(rewards), tour_mode, metric, costs, depot, obj.get("name", ""))


def parse_instance(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}") from None
    return instance_from_dict(obj)


def metric_instance(dist: Iterable[Iterable[Rational]], rewards: Sequence[RewardDistribution],
                    k: int, tour_mode: str = OPEN, depot: int = 0, name: str = "") -> Instance:
    m = Metric(tuple(tuple(Fraction(x) for x in row) for row in dist), depot)
    return Instance(METRIC, k, tuple(rewards), tour_mode, m, None, depot, name)


def knapsack_instance(costs: Sequence[int], rewards: Sequence[RewardDistribution], k: int,
                      name: str = "") -> Instance:
    """Knapsack-cover instance; vertex 0 is the depot (cost 0, reward 0)."""
    return Instance(KNAPSACK, k, (RewardDistribution.point(0), *rewards), OPEN, None,
                    (0, *costs), 0, name)
