"""Rooted orienteering oracles.

All solvers share one tie-break so that policy runs are reproducible: higher
profit first, then shorter length, then the lexicographically smallest sorted
tuple of profitable visited vertices.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .model import KNAPSACK, METRIC, Instance

EXACT_CAP = 16
BRUTE_FORCE_CAP = 8


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class OrienteeringProblem:
    instance: Instance
    budget: Fraction | None  # None means unbounded
    profits: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "profits", tuple(Fraction(p) for p in self.profits))
        if len(self.profits) != self.instance.n:
            raise ValueError("one profit per vertex required")
        if any(p < 0 for p in self.profits):
            raise ValueError("profits must be non-negative")
        if self.budget is not None:
            object.__setattr__(self, "budget", Fraction(self.budget))
            if self.budget < 0:
                raise ValueError("budget must be non-negative")

    @property
    def root(self) -> int:
        return self.instance.depot

    def candidates(self) -> list[int]:
        return [v for v, p in enumerate(self.profits) if p > 0 and v != self.root]


@dataclass(frozen=True)
class OracleResult:
    walk: tuple[int, ...]
    length: Fraction
    profit: Fraction
    rho: object = 1  # 1 for exact solvers, "empirical" for the heuristic
    exact_ratio: Fraction | None = None

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.walk[1:])


Oracle = Callable[[OrienteeringProblem], OracleResult]


def _lcm_denominator(values) -> int:
    out = 1
    for x in values:
        out = math.lcm(out, Fraction(x).denominator)
    return out


def _profit(p: OrienteeringProblem, vertices) -> Fraction:
    return sum((p.profits[v] for v in set(vertices) if v != p.root), Fraction(0))


def _result(p: OrienteeringProblem, walk: Sequence[int], rho=1) -> OracleResult:
    walk = (p.root, *walk)
    return OracleResult(walk, p.instance.walk_length(walk), _profit(p, walk), rho)


def _sort_key(profit, length, vset):
    return (-profit, length, tuple(sorted(vset)))


# --------------------------------------------------------------------------
# exact solvers


def solve_exact(p: OrienteeringProblem, cap: int = EXACT_CAP) -> OracleResult:
    """Bitmask DP over (visited subset, end vertex) on a metric instance.

    Zero-profit vertices are dropped: with the triangle inequality they can
    only lengthen a walk.
    """
    inst = p.instance
    if inst.kind != METRIC:
        raise ValueError("solve_exact needs a metric instance; use solve_knapsack")
    cand = p.candidates()
    m = len(cand)
    if m > cap:
        raise OracleSizeError(
            f"{m} profitable vertices exceed the exact cap {cap}; use solve_heuristic")
    if m == 0:
        return _result(p, ())
    root = p.root
    dist = inst.metric.dist
    nodes = [root, *cand]
    scale = _lcm_denominator(dist[a][b] for a in nodes for b in nodes)
    d = [[int(dist[a][b] * scale) for b in cand] for a in cand]
    start = [int(dist[root][b] * scale) for b in cand]
    ret = [int(dist[b][root] * scale) if inst.closed else 0 for b in cand]
    limit = None if p.budget is None else math.floor(p.budget * scale)
    big = sum(start) + sum(max(row) for row in d) + sum(ret) + 1
    dtype = np.int64 if big < 2**62 else object

    full = 1 << m
    dp = np.full((full, m), big, dtype=dtype)
    for j in range(m):
        dp[1 << j, j] = start[j]
    D = np.array(d, dtype=dtype)
    masks_by_size: list[list[int]] = [[] for _ in range(m + 1)]
    for mask in range(1, full):
        masks_by_size[bin(mask).count("1")].append(mask)
    for size in range(2, m + 1):
        masks = np.array(masks_by_size[size], dtype=np.int64)
        for j in range(m):
            sel = masks[(masks >> j) & 1 == 1]
            prev = sel ^ (1 << j)
            # dp[prev, i] + d[i][j], minimized over i
            best = (dp[prev] + D[:, j]).min(axis=1)
            dp[sel, j] = best

    total = dp + np.array(ret, dtype=dtype)
    lengths = total.min(axis=1)
    pscale = _lcm_denominator(p.profits[v] for v in cand)
    prof_int = [int(p.profits[v] * pscale) for v in cand]
    mask_profit = [0] * full
    for mask in range(1, full):
        low = (mask & -mask).bit_length() - 1
        mask_profit[mask] = mask_profit[mask & (mask - 1)] + prof_int[low]

    best_mask, best_key = 0, None
    for mask in range(1, full):
        length = lengths[mask]
        if limit is not None and length > limit:
            continue
        key = (-mask_profit[mask], int(length))
        if best_key is None or key < best_key or (
                key == best_key and _mask_tuple(mask, m) < _mask_tuple(best_mask, m)):
            best_key, best_mask = key, mask
    if best_key is None or best_key[0] == 0:
        return _result(p, ())

    # reconstruct: lowest-index end vertex, then lowest-index predecessor
    mask = best_mask
    j = min(range(m), key=lambda x: (total[mask, x] if (mask >> x) & 1 else big + 1, x))
    path = [j]
    while mask != (1 << j):
        prev = mask ^ (1 << j)
        target = dp[mask, j]
        i = next(i for i in range(m) if (prev >> i) & 1 and dp[prev, i] + d[i][j] == target)
        path.append(i)
        mask, j = prev, i
    walk = [cand[x] for x in reversed(path)]
    return _result(p, walk)


def _mask_tuple(mask: int, m: int) -> tuple[int, ...]:
    return tuple(i for i in range(m) if (mask >> i) & 1)


def solve_knapsack(p: OrienteeringProblem) -> OracleResult:
    """Exact 0/1 knapsack on the weighted star: maximize profit, cost <= budget."""
    inst = p.instance
    if inst.kind != KNAPSACK:
        raise ValueError("solve_knapsack needs a knapsack instance")
    if p.budget is not None and p.budget.denominator != 1:
        raise ValueError(f"knapsack budget must be an integer, got {p.budget}")
    costs = inst.costs
    items = [v for v in p.candidates() if p.budget is None or costs[v] <= p.budget]
    if not items:
        return _result(p, ())
    total_cost = sum(costs[v] for v in items)
    if p.budget is None or total_cost <= p.budget:
        return _result(p, items)
    g = 0
    for v in items:
        g = math.gcd(g, costs[v])
    w = [costs[v] // g for v in items]
    cap = min(int(p.budget) // g, sum(w))
    pscale = _lcm_denominator(p.profits[v] for v in items)
    val = [int(p.profits[v] * pscale) for v in items]
    m = len(items)
    # best[j][b]: best (profit, -cost) using items j.. with capacity b
    best = [[(0, 0)] * (cap + 1) for _ in range(m + 1)]
    for j in range(m - 1, -1, -1):
        nxt, row, wj, vj = best[j + 1], best[j], w[j], val[j]
        for b in range(cap + 1):
            skip = nxt[b]
            if wj <= b:
                q, c = nxt[b - wj]
                take = (q + vj, c - wj)
                row[b] = take if take > skip else skip
            else:
                row[b] = skip
    chosen, b = [], cap
    for j in range(m):
        target = best[j][b]
        if w[j] <= b:
            q, c = best[j + 1][b - w[j]]
            if (q + val[j], c - w[j]) == target:
                chosen.append(items[j])
                b -= w[j]
    return _result(p, chosen)


def brute_force(p: OrienteeringProblem, cap: int = BRUTE_FORCE_CAP) -> OracleResult:
    """Exhaustive search over ordered vertex subsets (test oracle)."""
    inst = p.instance
    if inst.n > cap:
        raise OracleSizeError(f"brute force limited to {cap} vertices, got {inst.n}")
    others = [v for v in range(inst.n) if v != p.root]
    best_key, best_walk = None, ()
    for r in range(len(others) + 1):
        for perm in itertools.permutations(others, r):
            length = inst.walk_length(perm)
            if p.budget is not None and length > p.budget:
                continue
            profitable = {v for v in perm if p.profits[v] > 0}
            key = (*_sort_key(_profit(p, perm), length, profitable), len(perm), perm)
            if best_key is None or key < best_key:
                best_key, best_walk = key, perm
    return _result(p, best_walk)


# --------------------------------------------------------------------------
# heuristic


def solve_heuristic(p: OrienteeringProblem, compare_exact: bool | None = None) -> OracleResult:
    """Greedy ratio insertion with 2-opt cleanup; any size.

    ``compare_exact=None`` attaches the profit ratio against the exact solver
    whenever the instance is small enough for it.
    """
    inst = p.instance
    cand = p.candidates()
    if inst.kind == KNAPSACK:
        walk = _greedy_knapsack(p, cand)
    else:
        walk = _greedy_metric(p, cand)
    res = _result(p, walk, rho="empirical")
    if compare_exact is None:
        compare_exact = len(cand) <= 12
    if compare_exact and (inst.kind == KNAPSACK or len(cand) <= EXACT_CAP):
        exact = solve_knapsack(p) if inst.kind == KNAPSACK else solve_exact(p)
        ratio = Fraction(1) if exact.profit == 0 else res.profit / exact.profit
        res = OracleResult(res.walk, res.length, res.profit, res.rho, ratio)
    return res


def _fits(p: OrienteeringProblem, length) -> bool:
    return p.budget is None or length <= p.budget


def _greedy_knapsack(p: OrienteeringProblem, cand: list[int]) -> list[int]:
    costs = p.instance.costs
    order = sorted(cand, key=lambda v: (-(p.profits[v] / costs[v]) if costs[v] else -math.inf, v))
    chosen, used = [], 0
    for v in order:
        if _fits(p, used + costs[v]):
            chosen.append(v)
            used += costs[v]
    single = max((v for v in cand if _fits(p, costs[v])),
                 key=lambda v: (p.profits[v], -v), default=None)
    if single is not None and p.profits[single] > _profit(p, chosen):
        chosen = [single]
    return sorted(chosen)


def _route_length(inst: Instance, route: list[int]) -> Fraction:
    return inst.walk_length(route)


def _two_opt(inst: Instance, route: list[int]) -> list[int]:
    improved = True
    best_len = _route_length(inst, route)
    while improved:
        improved = False
        for i in range(len(route) - 1):
            for j in range(i + 1, len(route)):
                cand = route[:i] + route[i:j + 1][::-1] + route[j + 1:]
                length = _route_length(inst, cand)
                if length < best_len:
                    route, best_len, improved = cand, length, True
    return route


def _greedy_metric(p: OrienteeringProblem, cand: list[int]) -> list[int]:
    inst = p.instance
    route: list[int] = []
    remaining = set(cand)
    while remaining:
        base = _route_length(inst, route)
        best = None
        for v in sorted(remaining):
            for pos in range(len(route) + 1):
                trial = route[:pos] + [v] + route[pos:]
                length = _route_length(inst, trial)
                if not _fits(p, length):
                    continue
                delta = length - base
                ratio = math.inf if delta == 0 else p.profits[v] / delta
                key = (ratio, -delta, -v)
                if best is None or key > best[0]:
                    best = (key, trial)
        if best is None:
            break
        route = _two_opt(inst, best[1])
        remaining = set(cand) - set(route)
    single = max((v for v in cand if _fits(p, _route_length(inst, [v]))),
                 key=lambda v: (p.profits[v], -v), default=None)
    if single is not None and p.profits[single] > _profit(p, route):
        route = [single]
    return route


def default_oracle(inst: Instance) -> Oracle:
    return solve_knapsack if inst.kind == KNAPSACK else solve_exact


def get_oracle(name: str, inst: Instance) -> Oracle:
    """Resolve an oracle name (exact|knapsack|heuristic|auto) for ``inst``."""
    if name == "auto":
        return default_oracle(inst)
    if name == "exact":
        if inst.kind != METRIC:
            raise ValueError("oracle 'exact' needs a metric instance")
        return solve_exact
    if name == "knapsack":
        if inst.kind != KNAPSACK:
            raise ValueError("oracle 'knapsack' needs a knapsack instance")
        return solve_knapsack
    if name == "heuristic":
        return lambda prob: solve_heuristic(prob, compare_exact=False)
    raise ValueError(f"unknown oracle {name!r}")
