import itertools
import random
from fractions import Fraction as F

import pytest

from stochktsp.gap_bench import gen_example3, gen_random, gen_random_knapsack
from stochktsp.model import RewardDistribution, metric_instance
from stochktsp.nonadaptive import (NonAdaptiveConfig, build_nonadaptive, cap_levels,
                                   execute_nonadaptive, expected_length_exact)

Z = RewardDistribution.point(0)


def star(mode, k=4):
    d = RewardDistribution.from_pmf({0: F(1, 2), k: F(1, 2)})
    dist = [[0, 1, 1], [1, 0, 2], [1, 2, 0]]
    return metric_instance(dist, [Z, d, d], k, tour_mode=mode)


def enumerate_expectation(inst, walk):
    """Average of execute_nonadaptive over every joint realization."""
    verts = sorted({v for v in walk if v != inst.depot})
    total = F(0)
    for combo in itertools.product(*(inst.rewards[v].support for v in verts)):
        prob = F(1)
        real = {}
        for v, (x, p) in zip(verts, combo):
            prob *= p
            real[v] = x
        total += prob * execute_nonadaptive(inst, walk, realization=real).total_length
    return total


def test_cap_levels():
    assert [cap_levels(k) for k in (1, 2, 3, 4, 7, 8, 1024)] == [1, 2, 2, 3, 3, 4, 11]


def test_first_edge_always_walked():
    inst = metric_instance([[0, 1], [1, 0]], [Z, RewardDistribution.from_pmf({0: F(1, 3), 2: F(2, 3)})], 2)
    assert expected_length_exact(inst, (0, 1)) == 1


@pytest.mark.parametrize("mode, expect", [("open", 2), ("closed", 3)])
def test_two_leaf_star(mode, expect):
    assert expected_length_exact(star(mode), (0, 1, 2)) == expect


def test_exact_matches_enumeration():
    rng = random.Random(2)
    for _ in range(25):
        inst = gen_random(rng.randint(2, 6), rng.randint(1, 8), rng.randrange(10**6),
                          tour_mode=rng.choice(["open", "closed"]))
        tour = build_nonadaptive(inst)
        assert expected_length_exact(inst, tour) == enumerate_expectation(inst, tour.walk)


def test_deterministic_trace_equals_exact():
    inst = gen_random(6, 10, seed=1, max_support=1)
    tour = build_nonadaptive(inst)
    tr = execute_nonadaptive(inst, tour, rng=3)
    assert tr.total_length == expected_length_exact(inst, tour)


def test_zero_rewards_walk_everything():
    dist = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
    inst = metric_instance(dist, [Z, Z, Z], 3)
    tr = execute_nonadaptive(inst, (0, 1, 2), rng=0)
    assert not tr.target_met


def test_single_vertex_build():
    inst = metric_instance([[0, 1], [1, 0]], [Z, RewardDistribution.point(3)], 3)
    tour = build_nonadaptive(inst)
    assert tour.walk == (0, 1)
    assert (tour.segments[0].phase, tour.segments[0].iteration, tour.segments[0].cap_index) == (0, 1, 0)


def test_k1_single_level():
    inst = metric_instance([[0, 1], [1, 0]], [Z, RewardDistribution.bernoulli(1, F(1, 2))], 1)
    assert build_nonadaptive(inst).levels == 1


def test_example3_phases_take_whole_levels():
    l = 5
    inst = gen_example3(l)
    tour = build_nonadaptive(inst)
    by_phase = {}
    for seg in tour.segments:
        by_phase.setdefault(seg.phase, []).extend(seg.appended)
    for i in range(3):
        cheap = [v for v in by_phase[i] if inst.travel(0, v) == 2**i]
        assert len(cheap) == l * l


def test_tour_visits_each_vertex_once():
    inst = gen_random_knapsack(8, 12, seed=5)
    tour = build_nonadaptive(inst)
    assert len(tour.walk) == len(set(tour.walk))
    assert set(tour.walk) >= inst.positive_vertices()


def test_duplicates_kept_when_requested():
    inst = gen_random(5, 6, seed=9)
    plain = build_nonadaptive(inst)
    dup = build_nonadaptive(inst, cfg=NonAdaptiveConfig(skip_duplicates=False))
    assert len(dup.walk) >= len(plain.walk)
    assert expected_length_exact(inst, dup) >= 0


def test_monte_carlo_agrees_with_exact():
    inst = star("closed")
    rng = random.Random(0)
    xs = [float(execute_nonadaptive(inst, (0, 1, 2), rng).total_length) for _ in range(20000)]
    mean = sum(xs) / len(xs)
    sd = (sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)) ** 0.5
    assert abs(mean - 3) <= 4 * sd / len(xs) ** 0.5
