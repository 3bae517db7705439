"""Exact optimal adaptive and non-adaptive policies for tiny instances."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .model import Instance

MAX_ADAPTIVE_VERTICES = 10
MAX_NONADAPTIVE_VERTICES = 8
MAX_STATES = 2_000_000


class StateSpaceError(ValueError):
    pass


@dataclass
class OptAdaptivePolicy:
    """Value table over (position, visited mask, capped reward).

    Masks index ``self.vertices`` (positive-reward vertices only; the others
    can never help). ``value`` is the expected remaining length.
    """

    inst: Instance
    vertices: tuple[int, ...]
    value: dict[tuple[int, int, int], Fraction] = field(default_factory=dict)
    choice: dict[tuple[int, int, int], int] = field(default_factory=dict)

    @property
    def opt(self) -> Fraction:
        return self.value[(self.inst.depot, 0, 0)]

    def terminal(self, mask: int, reward: int) -> bool:
        return reward >= self.inst.k or mask == (1 << len(self.vertices)) - 1

    def next_vertex(self, pos: int, mask: int, reward: int) -> int | None:
        if self.terminal(mask, reward):
            return None
        return self.choice[(pos, mask, reward)]


def optimal_adaptive(inst: Instance, max_vertices: int = MAX_ADAPTIVE_VERTICES,
                     max_states: int = MAX_STATES) -> OptAdaptivePolicy:
    """Backward induction; ties go to the lowest vertex index."""
    if inst.n > max_vertices:
        raise StateSpaceError(f"{inst.n} vertices exceed the limit {max_vertices}")
    verts = tuple(sorted(inst.positive_vertices()))
    pol = OptAdaptivePolicy(inst, verts)
    k = inst.k
    full = (1 << len(verts)) - 1
    value, choice = pol.value, pol.choice
    supports = [inst.rewards[v].support for v in verts]

    def solve(pos: int, mask: int, reward: int) -> Fraction:
        key = (pos, mask, reward)
        got = value.get(key)
        if got is not None:
            return got
        if reward >= k or mask == full:
            best = Fraction(inst.return_cost(pos))
        else:
            best, arg = None, None
            for idx, u in enumerate(verts):
                bit = 1 << idx
                if mask & bit:
                    continue
                cost = Fraction(inst.travel(pos, u))
                for x, px in supports[idx]:
                    cost += px * solve(u, mask | bit, min(reward + x, k))
                if best is None or cost < best:
                    best, arg = cost, u
            choice[key] = arg
        value[key] = best
        if len(value) > max_states:
            raise StateSpaceError(f"state space exceeded {max_states} states")
        return best

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * len(verts) + 1000))
    try:
        solve(inst.depot, 0, 0)
    finally:
        sys.setrecursionlimit(limit)
    return pol


@dataclass
class CompletionProfile:
    """Distribution of the distance at which a policy stops.

    ``beyond[i]`` = Pr[stop distance > 2^i]; ``completes_by[i]`` = 1 - beyond[i].
    """

    distances: dict[Fraction, Fraction]
    beyond: list[Fraction]

    @property
    def completes_by(self) -> list[Fraction]:
        return [1 - b for b in self.beyond]

    def u(self, i: int) -> Fraction:
        if i < len(self.beyond):
            return self.beyond[i]
        return Fraction(0)


def completion_distribution(policy: OptAdaptivePolicy,
                            condition: Mapping[int, int] | None = None,
                            max_states: int = MAX_STATES) -> dict[Fraction, Fraction]:
    """Exact law of the distance travelled when the policy stops (return leg
    excluded). ``condition`` pins the rewards of some vertices."""
    inst = policy.inst
    condition = dict(condition or {})
    index = {v: i for i, v in enumerate(policy.vertices)}
    layer: dict[tuple, Fraction] = {(inst.depot, 0, 0, Fraction(0)): Fraction(1)}
    out: dict[Fraction, Fraction] = {}
    while layer:
        nxt: dict[tuple, Fraction] = {}
        for (pos, mask, reward, dist), prob in layer.items():
            u = policy.next_vertex(pos, mask, reward)
            if u is None:
                out[dist] = out.get(dist, Fraction(0)) + prob
                continue
            d2 = dist + inst.travel(pos, u)
            bit = 1 << index[u]
            if u in condition:
                outcomes = ((condition[u], Fraction(1)),)
            else:
                outcomes = inst.rewards[u].support
            for x, px in outcomes:
                key = (u, mask | bit, min(reward + x, inst.k), d2)
                nxt[key] = nxt.get(key, Fraction(0)) + prob * px
        if len(nxt) > max_states:
            raise StateSpaceError(f"outcome enumeration exceeded {max_states} states")
        layer = nxt
    return out


def completion_profile(policy: OptAdaptivePolicy, inst: Instance | None = None,
                       condition: Mapping[int, int] | None = None) -> CompletionProfile:
    dist = completion_distribution(policy, condition)
    top = max(dist) if dist else Fraction(0)
    beyond = []
    i = 0
    while True:
        b = sum((p for d, p in dist.items() if d > 2**i), Fraction(0))
        beyond.append(b)
        if 2**i >= top:
            break
        i += 1
    return CompletionProfile(dist, beyond)


def optimal_nonadaptive(inst: Instance, max_vertices: int = MAX_NONADAPTIVE_VERTICES
                        ) -> tuple[tuple[int, ...], Fraction]:
    """Best fixed order by branch and bound over orderings of the
    positive-reward vertices. An order ends once it surely meets k or has
    visited every positive vertex. Returns (walk from depot, expected length).
    """
    verts = sorted(inst.positive_vertices())
    if len(verts) > max_vertices:
        raise StateSpaceError(f"{len(verts)} positive vertices exceed the limit {max_vertices}")
    k = inst.k
    depot = inst.depot
    if k <= 0 or not verts:
        return (depot,), Fraction(0)
    best: list = [None, None]

    def dfs(order: list[int], pmf: dict, p_cont: Fraction, acc: Fraction, prev: int,
            left: frozenset) -> None:
        if best[0] is not None and acc >= best[0]:
            return
        for u in verts:
            if u not in left:
                continue
            step = acc + p_cont * inst.travel(prev, u)
            if best[0] is not None and step >= best[0]:
                continue
            new: dict = {}
            for x, px in pmf.items():
                for y, py in inst.rewards[u].support:
                    s = min(x + y, k)
                    new[s] = new.get(s, 0) + px * py
            rest = left - {u}
            after = Fraction(0) if not rest else 1 - new.get(k, Fraction(0))
            step += (p_cont - after) * inst.return_cost(u)
            order.append(u)
            if after == 0:
                if best[0] is None or step < best[0]:
                    best[0], best[1] = step, tuple(order)
            else:
                dfs(order, new, after, step, u, rest)
            order.pop()

    dfs([], {0: Fraction(1)}, Fraction(1), Fraction(0), depot, frozenset(verts))
    return (depot, *best[1]), best[0]
