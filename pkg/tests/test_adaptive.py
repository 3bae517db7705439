import math
import random
from fractions import Fraction as F

import pytest

from stochktsp.adaptive import (AdaptiveConfig, AdaptivePolicy, alpha, gain_of_state, harmonic,
                                run_adaptive)
from stochktsp.gap_bench import gen_example1, gen_gap_instance, gen_random
from stochktsp.model import PolicyState, RewardDistribution, knapsack_instance, metric_instance
from stochktsp.orienteering import solve_heuristic

Z = RewardDistribution.point(0)


def single(d, k, mode="open"):
    return metric_instance([[0, d], [d, 0]], [Z, RewardDistribution.point(k)], k, tour_mode=mode)


@pytest.mark.parametrize("k, h", [(1, F(1)), (2, F(3, 2)), (4, F(25, 12)), (10, F(7381, 2520))])
def test_harmonic_exact(k, h):
    assert harmonic(k) == h


def test_harmonic_matches_direct_sum():
    assert harmonic(300) == sum(F(1, t) for t in range(1, 301))


def test_harmonic_large_k_is_close():
    k = 10**7
    approx = harmonic(k)
    assert isinstance(approx, float)
    assert abs(approx - (math.log(k) + 0.5772156649015329)) < 1e-6


@pytest.mark.parametrize("k, rho, expect", [(1, 1, 7), (4, 1, 14), (4, 2, 27)])
def test_alpha(k, rho, expect):
    assert alpha(k, rho) == expect


def test_alpha_nonadaptive_factor():
    # 8 e/(e-1) = 12.6558...
    assert alpha(1, 1, factor=8) == 13


def test_gain_examples():
    inst = metric_instance([[0, 1], [1, 0]], [Z, RewardDistribution.from_pmf({0: F(1, 2), 4: F(1, 2)})], 4)
    st = PolicyState(((99, 2),))  # residual 2
    assert gain_of_state(inst, st, (0, 1)) == F(1, 2)
    assert gain_of_state(inst, PolicyState(), (0,)) == 0
    assert gain_of_state(inst, PolicyState(((1, 4),)), (0, 1)) == 0


def test_single_vertex_completes_in_phase_zero():
    tr = run_adaptive(single(1, 3), rng=0)
    assert tr.total_length == 1 and tr.final_phase == 0
    assert (tr.records[0].phase, tr.records[0].iteration) == (0, 1)
    assert tr.target_met


def test_distance_two_completes_in_phase_one():
    tr = run_adaptive(single(2, 3), rng=0)
    assert tr.total_length == 2 and tr.final_phase == 1
    assert tr.records[-1].phase == 1


def test_closed_mode_pays_return():
    tr = run_adaptive(single(1, 3, "closed"), rng=0)
    assert tr.total_length == 2 and tr.final_phase == 1


def test_example1_hand_trace():
    inst = gen_example1(4)
    tr = run_adaptive(inst, rng=0)
    assert tr.total_length == 28
    assert tr.final_phase == 2
    assert tr.target_met and tr.total_reward == 16
    costs = [inst.travel(0, v) for v in tr.visit_order]
    # all four cost-2^i items of phases 0 and 1, then phase 2 stops early
    assert costs[:4] == [1] * 4 and costs[4:8] == [2] * 4
    assert sum(costs[8:]) == 16


def test_early_stop_off_finishes_walk():
    inst = gen_example1(4)
    on = run_adaptive(inst, rng=0)
    off = run_adaptive(inst, cfg=AdaptiveConfig(early_stop=False), rng=0)
    assert off.total_length >= on.total_length
    assert off.total_reward >= 16


def test_realization_overrides_rng():
    inst = gen_gap_instance(2)
    rand = 1
    low = run_adaptive(inst, rng=0, realization={rand: 6, 2: 2, 3: 4})
    high = run_adaptive(inst, rng=0, realization={rand: 4, 2: 2, 3: 4})
    assert low.total_reward >= 8 and high.total_reward >= 8
    assert low.total_length <= high.total_length


def test_same_seed_same_trace():
    inst = gen_random(6, 10, seed=2)
    pol = AdaptivePolicy(inst)
    a, b = pol.run(123), pol.run(123)
    assert a.total_length == b.total_length and a.visit_order == b.visit_order


def test_trace_bookkeeping():
    inst = gen_random(7, 12, seed=8, backstop=True)
    pol = AdaptivePolicy(inst, cfg=AdaptiveConfig(record_gain=True))
    rng = random.Random(1)
    for _ in range(30):
        tr = pol.run(rng)
        assert tr.total_length == sum(r.length for r in tr.records) + inst.return_cost(tr.visit_order[-1])
        for r in tr.records:
            assert r.planned_length <= r.budget
            assert 0 <= r.realized_gain <= 1
            assert 0 <= r.expected_gain <= 1
            assert r.residual_after == max(r.residual_before - r.reward_gain, 0)
        if not tr.target_met:
            assert set(tr.visit_order) >= inst.positive_vertices()


def test_phase_progression_bounded_by_alpha():
    inst = gen_random(6, 8, seed=3)
    pol = AdaptivePolicy(inst, cfg=AdaptiveConfig(alpha_override=2))
    tr = pol.run(5)
    for phase in tr.phases():
        assert sum(1 for r in tr.records if r.phase == phase) <= 2


def test_heuristic_oracle_runs():
    inst = gen_random(6, 8, seed=6)
    tr = run_adaptive(inst, oracle=solve_heuristic, rng=1)
    assert tr.completed


def test_zero_rewards_visit_everything():
    inst = knapsack_instance([1, 2], [Z, Z], 3)
    tr = run_adaptive(inst, rng=0)
    assert tr.completed and not tr.target_met and tr.total_length == 0
