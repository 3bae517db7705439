"""Non-adaptive policy: a fixed vertex order built from orienteering walks
over a ladder of reward caps k/2^j, plus its exact and sampled evaluation."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .adaptive import RunTrace, alpha
from .model import Instance, truncated_expectation
from .orienteering import Oracle, OrienteeringProblem, default_oracle


@dataclass(frozen=True)
class NonAdaptiveConfig:
    rho: Fraction = Fraction(1)
    alpha_override: int | None = None
    max_phase: int | None = None
    skip_duplicates: bool = True


@dataclass(frozen=True)
class Segment:
    phase: int
    iteration: int
    cap_index: int
    appended: tuple[int, ...]


@dataclass
class NonAdaptiveTour:
    walk: tuple[int, ...]  # starts at the depot
    segments: list[Segment] = field(default_factory=list)
    build_alpha: int = 0
    levels: int = 0

    def phase_of_position(self) -> list[int]:
        """Phase of the segment that appended each position of ``walk``."""
        out = [0]
        for seg in self.segments:
            out.extend([seg.phase] * len(seg.appended))
        return out

    def to_dict(self) -> dict:
        return {
            "walk": list(self.walk),
            "alpha": self.build_alpha,
            "levels": self.levels,
            "segments": [
                {"phase": s.phase, "iteration": s.iteration, "cap_index": s.cap_index,
                 "appended": list(s.appended)}
                for s in self.segments
            ],
        }


def cap_levels(k: int) -> int:
    """1 + floor(log2 k)."""
    return max(k, 1).bit_length()


def build_nonadaptive(inst: Instance, oracle: Oracle | None = None,
                      cfg: NonAdaptiveConfig | None = None) -> NonAdaptiveTour:
    oracle = oracle or default_oracle(inst)
    cfg = cfg or NonAdaptiveConfig()
    a = cfg.alpha_override or alpha(inst.k, cfg.rho, factor=8)
    levels = cap_levels(inst.k)
    caps = [Fraction(inst.k, 2**j) for j in range(levels)]
    if cfg.max_phase is not None:
        max_phase = cfg.max_phase
    else:
        span = inst.span_bound()
        max_phase = (math.ceil(math.log2(span)) if span > 1 else 0) + 1
    positive = inst.positive_vertices()
    tour = NonAdaptiveTour((inst.depot,), [], a, levels)
    walk = [inst.depot]
    seen = {inst.depot}
    trunc: dict[tuple[int, int], Fraction] = {}

    def profits(j: int) -> tuple[Fraction, ...]:
        out = []
        for v, d in enumerate(inst.rewards):
            if v in seen:
                out.append(Fraction(0))
            else:
                w = trunc.get((v, j))
                if w is None:
                    w = trunc[(v, j)] = truncated_expectation(d, caps[j])
                out.append(w)
        return tuple(out)

    if inst.k <= 0 or positive <= seen:
        return tour
    for phase in range(max_phase + 1):
        budget = Fraction(2) ** phase
        for t in range(1, a + 1):
            grew = False
            for j in range(levels):
                res = oracle(OrienteeringProblem(inst, budget, profits(j)))
                pi = res.walk[1:]
                if cfg.skip_duplicates:
                    appended = tuple(v for v in pi if v not in seen)
                else:
                    appended = tuple(res.walk) if pi else ()
                if not appended:
                    continue
                grew = grew or any(v not in seen for v in appended)
                walk.extend(appended)
                seen.update(appended)
                tour.segments.append(Segment(phase, t, j, appended))
                if positive <= seen:
                    tour.walk = tuple(walk)
                    return tour
            if not grew:
                # the next round would see the same visited set and repeat
                break
    raise RuntimeError(
        f"non-adaptive build did not cover all profitable vertices within {max_phase} phases")


def expected_length_exact(inst: Instance, tour: NonAdaptiveTour | tuple) -> Fraction:
    """Exact expected length of executing the order until reward >= k.

    An edge into position j is paid iff the run is still going after j-1
    positions. The run also stops once every positive-reward vertex is seen.
    """
    walk = tour.walk if isinstance(tour, NonAdaptiveTour) else tuple(tour)
    k = inst.k
    if k <= 0:
        return Fraction(0)
    remaining = set(inst.positive_vertices())
    pmf: dict[int, Fraction] = {0: Fraction(1)}
    p_cont = Fraction(1) if remaining else Fraction(0)
    seen = {inst.depot}
    total = Fraction(0)
    prev = inst.depot
    for v in walk:
        if p_cont == 0:
            break
        if v != prev:
            total += p_cont * inst.travel(prev, v)
            prev = v
        if v in seen:
            continue
        seen.add(v)
        remaining.discard(v)
        d = inst.rewards[v]
        if not d.is_zero:
            new: dict[int, Fraction] = {}
            for x, px in pmf.items():
                for y, py in d.support:
                    s = min(x + y, k)
                    new[s] = new.get(s, 0) + px * py
            pmf = new
        after = Fraction(0) if not remaining else 1 - pmf.get(k, Fraction(0))
        total += (p_cont - after) * inst.return_cost(v)
        p_cont = after
    total += p_cont * inst.return_cost(prev)
    return total


class NonAdaptiveRunner:
    """Precompiled execution of one fixed order.

    Prefix lengths are kept as integers over a common denominator, so a run
    costs one reward draw per first visit and no rational arithmetic.
    """

    def __init__(self, inst: Instance, tour: NonAdaptiveTour | tuple):
        if isinstance(tour, NonAdaptiveTour):
            walk, phases, self.alpha = tour.walk, tour.phase_of_position(), tour.build_alpha
        else:
            walk, phases, self.alpha = tuple(tour), [0] * len(tour), 0
        self.inst = inst
        legs = []
        pos = inst.depot
        for v in walk:
            legs.append(Fraction(inst.travel(pos, v)) if v != pos else Fraction(0))
            pos = v
        rets = [Fraction(inst.return_cost(v)) for v in walk]
        self.den = math.lcm(1, *(x.denominator for x in legs + rets))
        positive = inst.positive_vertices()
        left = len(positive)
        seen = {inst.depot}
        cum = 0
        self.steps = []  # (vertex, distance so far, return cost, phase, rewards, covers all)
        for idx, v in enumerate(walk):
            cum += int(legs[idx] * self.den)
            if v in seen:
                continue
            seen.add(v)
            if v in positive:
                left -= 1
            self.steps.append((v, cum, int(rets[idx] * self.den), phases[idx] if idx < len(phases) else 0,
                               inst.rewards[v], left == 0))
        self.full = cum + (int(rets[-1] * self.den) if walk else 0)
        self.trivial = inst.k <= 0 or not positive

    def run(self, rng: random.Random | int | None = None,
            realization: Mapping[int, int] | None = None) -> RunTrace:
        inst = self.inst
        k = inst.k
        trace = RunTrace(k=k, alpha=self.alpha)
        if self.trivial:
            trace.completed, trace.target_met = True, k <= 0
            return trace
        if not isinstance(rng, random.Random):
            rng = random.Random(rng)
        reward = 0
        total = self.full
        for v, cum, ret, phase, d, last in self.steps:
            x = realization[v] if realization is not None else d.sample(rng)
            reward += x
            trace.visit_order.append(v)
            trace.final_phase = phase
            if reward >= k or last:
                trace.completed = True
                total = cum + ret
                break
        trace.total_length = Fraction(total, self.den)
        trace.total_reward = reward
        trace.target_met = reward >= k
        return trace


def execute_nonadaptive(inst: Instance, tour: NonAdaptiveTour | tuple,
                        rng: random.Random | int | None = None,
                        realization: Mapping[int, int] | None = None) -> RunTrace:
    """Walk the order once with sampled (or given) rewards."""
    return NonAdaptiveRunner(inst, tour).run(rng, realization)
