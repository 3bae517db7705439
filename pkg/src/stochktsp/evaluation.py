"""Monte Carlo harness, per-phase statistics and executable forms of the
analysis inequalities."""
from __future__ import annotations

import csv
import hashlib
import io
import math
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath

from .adaptive import AdaptivePolicy, RunTrace, gain_of_state, harmonic
from .exact_opt import CompletionProfile, OptAdaptivePolicy, completion_profile
from .model import Instance, PolicyState, capped_prefix_distribution
from .nonadaptive import NonAdaptiveRunner, NonAdaptiveTour


def _constant_bracket() -> tuple[Fraction, Fraction]:
    with mpmath.workdps(80):
        c = 1 - 1 / mpmath.e
        num = int(mpmath.floor(c * mpmath.mpf(10) ** 60))
    return Fraction(num, 10**60), Fraction(num + 1, 10**60)


# 1 - 1/e lies strictly between these two rationals
ONE_MINUS_INV_E_LO, ONE_MINUS_INV_E_HI = _constant_bracket()


def derive_seed(master: int, trial: int) -> int:
    """Seed for trial ``trial``; depends only on (master, trial)."""
    h = hashlib.blake2b(f"{master}:{trial}".encode(), digest_size=16, person=b"stochktsp-trial")
    return int.from_bytes(h.digest(), "big")


@dataclass
class PhaseStats:
    trials: int
    u_hat: list[float]
    u_se: list[float]
    delta_hat: list[float]
    g_hat: dict[int, list[float]] = field(default_factory=dict)
    u_star: list[Fraction] | None = None

    def u(self, i: int) -> float:
        return self.u_hat[i] if i < len(self.u_hat) else 0.0

    def se(self, i: int) -> float:
        return self.u_se[i] if i < len(self.u_se) else 0.0


@dataclass
class MonteCarloSummary:
    trials: int
    mean: Fraction
    variance: float
    se: float
    ci95: tuple[float, float]
    stats: PhaseStats
    completion_rate: float

    @property
    def mean_float(self) -> float:
        return float(self.mean)


def _phase_stats(final_phases: Sequence[int], phase_gains: Sequence[Mapping[int, Fraction]],
                 g_sums: dict[int, list[Fraction]] | None, trials: int) -> PhaseStats:
    top = max(final_phases, default=0)
    u_hat, u_se, delta = [], [], []
    for i in range(top + 1):
        u = sum(1 for f in final_phases if f > i) / trials
        u_hat.append(u)
        u_se.append(math.sqrt(u * (1 - u) / trials))
        gains = Counter(g.get(i, 0) for g in phase_gains)
        delta.append(float(_exact_sum(gains) / trials))
    g_hat = {}
    if g_sums:
        g_hat = {i: [float(x / trials) for x in vals] for i, vals in sorted(g_sums.items())}
    return PhaseStats(trials, u_hat, u_se, delta, g_hat)


def _run_chunk(args):
    policy, inst, master, lo, hi, with_gain = args
    if isinstance(policy, NonAdaptiveTour):
        runner = NonAdaptiveRunner(inst, policy)
        return [runner.run(random.Random(derive_seed(master, j))) for j in range(lo, hi)]
    return [policy.run(random.Random(derive_seed(master, j)), record=with_gain)
            for j in range(lo, hi)]


def monte_carlo(inst: Instance, policy: AdaptivePolicy | NonAdaptiveTour, trials: int,
                seed: int = 0, workers: int = 1, gain_stats: bool = False) -> MonteCarloSummary:
    """Independent seeded executions aggregated in trial order.

    Trial j always uses ``derive_seed(seed, j)``, so the summary does not
    depend on ``workers``. ``gain_stats`` records the expected gain of every
    iteration (exact, slow) for the per-iteration averages.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    with_gain = gain_stats and isinstance(policy, AdaptivePolicy)
    if with_gain and not policy.cfg.record_gain:
        raise ValueError("gain_stats needs AdaptiveConfig(record_gain=True)")
    if workers <= 1:
        traces = _run_chunk((policy, inst, seed, 0, trials, with_gain))
    else:
        step = math.ceil(trials / workers)
        chunks = [(policy, inst, seed, lo, min(lo + step, trials), with_gain)
                  for lo in range(0, trials, step)]
        with ProcessPoolExecutor(workers) as pool:
            traces = [t for part in pool.map(_run_chunk, chunks) for t in part]
    return summarize(traces)


def _exact_sum(counts: Counter) -> Fraction:
    # lengths repeat heavily across trials; add each distinct value once
    return sum((Fraction(x) * c for x, c in counts.items()), Fraction(0))


def summarize(traces: Sequence[RunTrace]) -> MonteCarloSummary:
    n = len(traces)
    counts = Counter(t.total_length for t in traces)
    mean = _exact_sum(counts) / n
    mf = float(mean)
    var = sum(c * (float(x) - mf) ** 2 for x, c in counts.items()) / (n - 1) if n > 1 else 0.0
    se = math.sqrt(var / n)
    g_sums: dict[int, list[Fraction]] = {}
    for tr in traces:
        for r in tr.records:
            if r.expected_gain is None:
                continue
            row = g_sums.setdefault(r.phase, [])
            while len(row) < r.iteration:
                row.append(Fraction(0))
            row[r.iteration - 1] += r.expected_gain
    stats = _phase_stats([t.final_phase for t in traces], [t.phase_gain for t in traces],
                         g_sums, n)
    done = sum(1 for t in traces if t.target_met) / n
    return MonteCarloSummary(n, mean, var, se, (mf - 1.96 * se, mf + 1.96 * se), stats, done)


# --------------------------------------------------------------------------
# analysis checks


@dataclass
class PhaseVerdict:
    phase: int
    u: float
    u_prev: float
    u_star: Fraction | None
    slack: float
    ok: bool | None  # None when u* is unavailable

    @property
    def bound(self) -> float | None:
        if self.u_star is None:
            return None
        return self.u_prev / 4 + float(self.u_star) + self.slack


def check_lemma_main(stats: PhaseStats, profile: CompletionProfile | None,
                     slack: float | None = None, n_se: float = 4.0) -> list[PhaseVerdict]:
    """u_i <= u_{i-1}/4 + u*_i (+ slack) for every phase i >= 1.

    Default slack is ``n_se`` standard errors of u_i - u_{i-1}/4.
    """
    top = len(stats.u_hat)
    if profile is not None:
        top = max(top, len(profile.beyond))
    out = []
    for i in range(1, top):
        u, up = stats.u(i), stats.u(i - 1)
        s = slack if slack is not None else n_se * math.sqrt(stats.se(i) ** 2 + stats.se(i - 1) ** 2 / 16)
        if profile is None:
            out.append(PhaseVerdict(i, u, up, None, s, None))
            continue
        us = profile.u(i)
        out.append(PhaseVerdict(i, u, up, us, s, u <= up / 4 + float(us) + s))
    return out


def harmonic_lower(k: int) -> Fraction | float:
    """H_k exactly when feasible, else a value strictly below it."""
    h = harmonic(k)
    if isinstance(h, Fraction):
        return h
    return math.log(k) + 0.5772156649015328 - 1e-12


def check_harmonic_bound(trace: RunTrace) -> dict[int, bool]:
    """Per phase: sum of realized fractional gains <= H_k (no tolerance)."""
    if trace.k < 1:
        return {}
    hk = harmonic_lower(trace.k)
    gains = dict(trace.phase_gain)
    if trace.records:
        gains = {}
        for r in trace.records:
            gains[r.phase] = gains.get(r.phase, Fraction(0)) + r.realized_gain
    return {i: g <= hk for i, g in sorted(gains.items())}


def check_capped_sum(ds: Sequence[Mapping]) -> tuple[Fraction, Fraction, bool]:
    """Exact E[X], E[Y] for X = sum of independent [0,1] variables, Y = min(X, 1),
    and whether E[Y] >= (1 - 1/e) min(E[X], 1) holds (certified)."""
    pmfs = []
    for d in ds:
        pmf = {Fraction(x): Fraction(p) for x, p in d.items()}
        if any(x < 0 or x > 1 for x in pmf):
            raise ValueError("support must lie in [0, 1]")
        if sum(pmf.values()) != 1:
            raise ValueError("pmf mass ≠ 1")
        pmfs.append(pmf)
    ex = sum((sum((x * p for x, p in pmf.items()), Fraction(0)) for pmf in pmfs), Fraction(0))
    final = capped_prefix_distribution(pmfs, Fraction(1))[-1]
    ey = sum((x * p for x, p in final.items()), Fraction(0))
    return ex, ey, ey >= ONE_MINUS_INV_E_HI * min(ex, Fraction(1))


def alg_bound(stats: PhaseStats, alpha: int) -> float:
    """2 alpha sum_{i>=1} 2^i u_i + 4 alpha."""
    return 2 * alpha * sum(2**i * u for i, u in enumerate(stats.u_hat) if i >= 1) + 4 * alpha


@dataclass
class GainCheck:
    phase: int
    iteration: int
    gain: Fraction
    p_star: Fraction
    ok: bool


def check_gain_lower_bound(inst: Instance, trace: RunTrace, opt: OptAdaptivePolicy,
                           rho=1) -> list[GainCheck]:
    """Per recorded iteration: gain >= (1/rho)(1 - 1/e)(p*_i(sigma) - I(sigma)).

    p*_i(sigma) is the probability the optimal policy, conditioned on the
    rewards observed so far, stops within distance 2^i.
    """
    out = []
    sigma = PolicyState()
    cache: dict = {}
    for r in trace.records:
        key = (sigma.sigma, r.phase)
        if key not in cache:
            dist = completion_profile(opt, inst, dict(sigma.sigma)).distances
            cache[key] = sum((p for d, p in dist.items() if d <= 2**r.phase), Fraction(0))
        p_star = cache[key]
        gain = r.expected_gain if r.expected_gain is not None else gain_of_state(inst, sigma, r.walk)
        met = Fraction(int(sigma.k_sigma >= inst.k))
        ok = gain >= ONE_MINUS_INV_E_HI / Fraction(rho) * (p_star - met)
        out.append(GainCheck(r.phase, r.iteration, gain, p_star, ok))
        for v, x in r.observed:
            sigma = sigma.observe(v, x)
    return out


def phase_table(stats: PhaseStats, profile: CompletionProfile | None = None,
                verdicts: Sequence[PhaseVerdict] | None = None) -> str:
    """Delimiter-separated phase table with a header row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phase", "u_hat", "u_se", "u_star", "delta_hat", "lemma_bound", "lemma_ok"])
    by_phase = {v.phase: v for v in verdicts or ()}
    top = len(stats.u_hat)
    if profile is not None:
        top = max(top, len(profile.beyond))
    for i in range(top):
        v = by_phase.get(i)
        w.writerow([
            i,
            f"{stats.u(i):.6f}",
            f"{stats.se(i):.6f}",
            "" if profile is None else f"{float(profile.u(i)):.6f}",
            f"{stats.delta_hat[i]:.6f}" if i < len(stats.delta_hat) else "0.000000",
            "" if v is None or v.bound is None else f"{v.bound:.6f}",
            "" if v is None or v.ok is None else ("pass" if v.ok else "violated"),
        ])
    return buf.getvalue()
