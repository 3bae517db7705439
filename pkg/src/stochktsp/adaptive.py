"""Adaptive policy: orienteering walks with doubling budgets and
residual-truncated profits."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import gmpy2
import mpmath

from .model import Instance, PolicyState, capped_prefix_distribution, truncated_expectation
from .orienteering import Oracle, OracleResult, OrienteeringProblem, default_oracle

EXACT_HARMONIC_LIMIT = 10**6
EULER_GAMMA = 0.57721566490153286


def _harmonic_split(a: int, b: int):
    # sum_{a <= t < b} 1/t as an unreduced (num, den) pair
    if b - a == 1:
        return gmpy2.mpz(1), gmpy2.mpz(a)
    mid = (a + b) // 2
    p1, q1 = _harmonic_split(a, mid)
    p2, q2 = _harmonic_split(mid, b)
    return p1 * q2 + p2 * q1, q1 * q2


@lru_cache(maxsize=256)
def harmonic(k: int):
    """k-th harmonic number.

    Exact ``Fraction`` for k <= 10**6. Beyond that a float
    ln k + gamma + 1/(2k), whose absolute error is below 1/(12 k^2).
    """
    if k < 1:
        raise ValueError(f"harmonic number needs k >= 1, got {k}")
    if k > EXACT_HARMONIC_LIMIT:
        return math.log(k) + EULER_GAMMA + 1 / (2 * k)
    p, q = _harmonic_split(1, k + 1)
    g = gmpy2.gcd(p, q)
    return Fraction(int(p // g), int(q // g))


def alpha(k: int, rho=1, factor: int = 4) -> int:
    """Inner iterations per phase: ceil(factor * rho * e/(e-1) * H_k).

    ``factor`` is 4 for the adaptive policy and 8 for the non-adaptive one.
    """
    if k < 1:
        k = 1
    rho = Fraction(rho)
    with mpmath.workdps(60):
        e = mpmath.e
        val = factor * mpmath.mpf(rho.numerator) / rho.denominator * e / (e - 1) * mpmath.harmonic(k)
        return int(mpmath.ceil(val))


def gain_of_state(inst: Instance, state: PolicyState, walk) -> Fraction:
    """Expected fraction of the residual target covered by visiting ``walk``."""
    residual = inst.k - state.k_sigma
    if residual <= 0:
        return Fraction(0)
    seen = state.visited
    new = []
    for v in walk:
        if v not in seen and v != inst.depot and v not in new:
            new.append(v)
    if not new:
        return Fraction(0)
    pmf = capped_prefix_distribution([inst.rewards[v] for v in new], residual)[-1]
    return sum((x * p for x, p in pmf.items()), Fraction(0)) / residual


@dataclass(frozen=True)
class AdaptiveConfig:
    rho: Fraction = Fraction(1)
    alpha_override: int | None = None
    early_stop: bool = True
    max_phase: int | None = None
    record_gain: bool = False


@dataclass
class IterationRecord:
    phase: int
    iteration: int
    budget: int
    walk: tuple[int, ...]
    planned_length: Fraction
    observed: tuple[tuple[int, int], ...]
    residual_before: int
    residual_after: int
    reward_gain: int  # J_t
    realized_gain: Fraction  # min(J_t, residual_before) / residual_before
    length: Fraction
    expected_gain: Fraction | None = None

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "iteration": self.iteration,
            "budget": self.budget,
            "walk": list(self.walk),
            "planned_length": str(self.planned_length),
            "observed": [[v, str(x)] for v, x in self.observed],
            "residual_before": str(self.residual_before),
            "residual_after": str(self.residual_after),
            "reward_gain": str(self.reward_gain),
            "realized_gain": str(self.realized_gain),
            "length": str(self.length),
            "expected_gain": None if self.expected_gain is None else str(self.expected_gain),
        }


@dataclass
class RunTrace:
    k: int
    alpha: int
    records: list[IterationRecord] = field(default_factory=list)
    total_length: Fraction = Fraction(0)
    total_reward: int = 0
    completed: bool = False
    target_met: bool = False
    final_phase: int = 0
    phase_gain: dict[int, Fraction] = field(default_factory=dict)
    visit_order: list[int] = field(default_factory=list)

    def phases(self) -> list[int]:
        return sorted({r.phase for r in self.records})


class AdaptivePolicy:
    """Runs the adaptive policy on one instance, caching oracle answers.

    The oracle input depends only on (budget, visited set, residual target),
    so answers are memoized across runs of the same policy object.
    """

    def __init__(self, inst: Instance, oracle: Oracle | None = None,
                 cfg: AdaptiveConfig | None = None):
        self.inst = inst
        self.oracle = oracle or default_oracle(inst)
        self.cfg = cfg or AdaptiveConfig()
        self.alpha = self.cfg.alpha_override or alpha(inst.k, self.cfg.rho)
        if self.alpha < 1:
            raise ValueError("alpha must be positive")
        if self.cfg.max_phase is not None:
            self.max_phase = self.cfg.max_phase
        else:
            span = inst.span_bound()
            self.max_phase = (math.ceil(math.log2(span)) if span > 1 else 0) + 1
        self._positive = inst.positive_vertices()
        self._walks: dict[tuple, OracleResult] = {}
        self._profit_cache: dict[tuple[int, int], Fraction] = {}

    def profits(self, visited: frozenset[int], residual: int) -> tuple[Fraction, ...]:
        out = []
        for v, d in enumerate(self.inst.rewards):
            if v in visited or v == self.inst.depot:
                out.append(Fraction(0))
                continue
            key = (v, residual)
            w = self._profit_cache.get(key)
            if w is None:
                w = self._profit_cache[key] = truncated_expectation(d, residual)
            out.append(w)
        return tuple(out)

    def plan(self, phase: int, visited: frozenset[int], residual: int) -> OracleResult:
        key = (phase, visited, residual)
        res = self._walks.get(key)
        if res is None:
            prob = OrienteeringProblem(self.inst, Fraction(2) ** phase,
                                       self.profits(visited, residual))
            res = self._walks[key] = self.oracle(prob)
        return res

    def run(self, rng: random.Random | int | None = None,
            realization: Mapping[int, int] | None = None, record: bool = True) -> RunTrace:
        """Execute once. Rewards come from ``realization`` when given, else
        are drawn lazily from ``rng`` the first time a vertex is visited."""
        inst, cfg = self.inst, self.cfg
        if not isinstance(rng, random.Random):
            rng = random.Random(rng)
        k = inst.k
        trace = RunTrace(k=k, alpha=self.alpha)
        visited = frozenset([inst.depot])
        sigma = PolicyState()
        reward = 0
        pos = inst.depot
        length = Fraction(0)
        left = len(self._positive - visited)
        if k <= 0 or left == 0:
            trace.completed, trace.target_met = True, reward >= k
            return trace

        for phase in range(self.max_phase + 1):
            budget = 2 ** phase
            trace.final_phase = phase
            for t in range(1, self.alpha + 1):
                residual = k - reward
                res = self.plan(phase, visited, residual)
                if not any(v not in visited for v in res.walk[1:]):
                    # same input for every remaining iteration of this phase
                    if record:
                        trace.records.append(IterationRecord(
                            phase, t, budget, res.walk, res.length, (), residual, residual,
                            0, Fraction(0), Fraction(0),
                            Fraction(0) if cfg.record_gain else None))
                    break
                expected = None
                if record and cfg.record_gain:
                    expected = gain_of_state(inst, sigma, res.walk)
                step_len = Fraction(0)
                observed = []
                for v in res.walk[1:]:
                    if v != pos:
                        step_len += inst.travel(pos, v)
                        pos = v
                    if v in visited:
                        continue
                    x = realization[v] if realization is not None else inst.rewards[v].sample(rng)
                    observed.append((v, x))
                    visited = visited | {v}
                    trace.visit_order.append(v)
                    if v in self._positive:
                        left -= 1
                    reward += x
                    if cfg.early_stop and reward >= k:
                        break
                length += step_len
                if record:
                    for v, x in observed:
                        sigma = sigma.observe(v, x)
                gained = reward - (k - residual)
                realized = Fraction(min(gained, residual), residual)
                trace.phase_gain[phase] = trace.phase_gain.get(phase, Fraction(0)) + realized
                if record:
                    trace.records.append(IterationRecord(
                        phase, t, budget, res.walk, res.length, tuple(observed), residual,
                        max(k - reward, 0), gained, realized, step_len, expected))
                if reward >= k or left == 0:
                    length += inst.return_cost(pos)
                    trace.total_length = length
                    trace.total_reward = reward
                    trace.completed = True
                    trace.target_met = reward >= k
                    return trace
        raise RuntimeError(
            f"adaptive policy did not terminate within {self.max_phase} phases "
            f"(reward {reward} of {k}, {left} profitable vertices unvisited); "
            "the oracle keeps returning walks without new vertices")


def run_adaptive(inst: Instance, oracle: Oracle | None = None, cfg: AdaptiveConfig | None = None,
                 rng: random.Random | int | None = None,
                 realization: Mapping[int, int] | None = None) -> RunTrace:
    return AdaptivePolicy(inst, oracle, cfg).run(rng, realization)
