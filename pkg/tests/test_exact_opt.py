import itertools
import random
from fractions import Fraction as F

import pytest

from stochktsp.bidding import solve_bidding_lp
from stochktsp.exact_opt import (StateSpaceError, completion_distribution, completion_profile,
                                 optimal_adaptive, optimal_nonadaptive)
from stochktsp.gap_bench import gen_example1, gen_example2, gen_gap_instance, gen_random
from stochktsp.model import RewardDistribution, metric_instance
from stochktsp.nonadaptive import expected_length_exact

Z = RewardDistribution.point(0)


def deterministic_opt(inst):
    """Cheapest ordering whose rewards reach k (all values fixed)."""
    verts = sorted(inst.positive_vertices())
    best = None
    for r in range(1, len(verts) + 1):
        for perm in itertools.permutations(verts, r):
            if sum(inst.rewards[v].values[0] for v in perm) < inst.k:
                continue
            cost = inst.walk_length((inst.depot, *perm))
            best = cost if best is None else min(best, cost)
    return best


def test_k_zero():
    inst = metric_instance([[0, 1], [1, 0]], [Z, Z], 0)
    assert optimal_adaptive(inst).opt == 0


def test_single_vertex():
    inst = metric_instance([[0, 3], [3, 0]], [Z, RewardDistribution.point(2)], 2)
    assert optimal_adaptive(inst).opt == 3
    walk, val = optimal_nonadaptive(inst)
    assert walk == (0, 1) and val == 3


def test_gap_n2():
    inst = gen_gap_instance(2, [F(1, 2), F(1, 2)])
    pol = optimal_adaptive(inst)
    assert pol.opt == F(3, 2)
    prof = completion_profile(pol)
    assert prof.beyond == [F(1, 2), 0]
    assert prof.u(5) == 0
    walk, val = optimal_nonadaptive(inst)
    assert val == 2 and val / pol.opt == F(4, 3)


def test_conditioned_profile():
    inst = gen_gap_instance(2, [F(1, 2), F(1, 2)])
    dist = completion_distribution(optimal_adaptive(inst), {1: 6})
    assert dist == {F(1): F(1)}


def test_deterministic_profile_is_step():
    inst = gen_random(5, 6, seed=3, max_support=1, backstop=True)
    pol = optimal_adaptive(inst)
    prof = completion_profile(pol)
    assert len(prof.distances) == 1
    assert all(b in (0, 1) for b in prof.beyond)


def test_deterministic_matches_ordering_search():
    rng = random.Random(4)
    for _ in range(15):
        inst = gen_random(rng.randint(2, 6), rng.randint(1, 10), rng.randrange(10**6),
                          max_support=1, backstop=True, tour_mode=rng.choice(["open", "closed"]))
        expect = deterministic_opt(inst)
        assert optimal_adaptive(inst).opt == expect
        assert optimal_nonadaptive(inst)[1] == expect


def test_example1_small_opt():
    assert optimal_adaptive(gen_example1(2)).opt == 4


def test_example2_opt_visits_w():
    inst = gen_example2(1, 2)
    assert optimal_adaptive(inst, max_vertices=12).opt == 2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_gap_values(n):
    inst = gen_gap_instance(n)
    lp = solve_bidding_lp(n)
    pol = optimal_adaptive(inst)
    assert pol.opt == sum(i * p for i, p in enumerate(lp.p, start=1))
    assert optimal_nonadaptive(inst)[1] / pol.opt == lp.value


def test_nonadaptive_matches_permutation_search():
    rng = random.Random(6)
    for _ in range(12):
        inst = gen_random(rng.randint(2, 5), rng.randint(1, 8), rng.randrange(10**6),
                          tour_mode=rng.choice(["open", "closed"]))
        verts = sorted(inst.positive_vertices())
        best = min((expected_length_exact(inst, (inst.depot, *perm))
                    for perm in itertools.permutations(verts)), default=F(0))
        walk, val = optimal_nonadaptive(inst)
        assert val == best
        assert expected_length_exact(inst, walk) == val
        assert optimal_adaptive(inst).opt <= val


def test_size_gates():
    with pytest.raises(StateSpaceError):
        optimal_adaptive(gen_example1(3))
    with pytest.raises(StateSpaceError):
        optimal_nonadaptive(gen_example1(3))
