import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.optimize import linprog

from stochktsp.bidding import (bid_cost, bidding_matrix, enumerate_gamma, solve_bidding_lp,
                               verify_minimax)
from stochktsp.simplex import Unbounded, maximize


def min_max_value(C):
    """min over row mixtures pi of max_T E_pi[C(., T)] / T, solved directly:
    minimize beta s.t. sum_I pi_I C(I, T) <= beta T, sum pi = 1."""
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    T = np.arange(1, n + 1, dtype=float)
    res = linprog(np.r_[np.zeros(m), 1.0],
                  A_ub=np.c_[C.T, -T], b_ub=np.zeros(n),
                  A_eq=np.r_[np.ones(m), 0.0][None, :], b_eq=[1.0],
                  bounds=[(0, None)] * (m + 1), method="highs")
    return res.fun


@pytest.mark.parametrize("seq, t, expect", [((1, 2, 4), 3, 7), ((1, 2, 4), 1, 1), ((2,), 3, math.inf)])
def test_bid_cost(seq, t, expect):
    assert bid_cost(seq, t) == expect


def test_enumerate_gamma():
    assert enumerate_gamma(1) == [(1,)]
    assert sorted(enumerate_gamma(2)) == [(1,), (1, 2), (2,)]
    assert len(enumerate_gamma(3)) == 7
    assert len(enumerate_gamma(6)) == 63
    assert all(s[-1] == 5 for s in enumerate_gamma(5, coverage=True))
    assert len(enumerate_gamma(5, coverage=True)) == 16


def test_matrix_shape():
    gamma, C = bidding_matrix(3)
    assert len(C) == len(gamma) and all(len(row) == 3 for row in C)


def test_lp_small_values():
    assert solve_bidding_lp(1).value == 1
    r = solve_bidding_lp(2)
    assert r.value == F(4, 3) and r.p == [F(1, 2), F(1, 2)]
    assert r.gap == 0


def test_lp_n2_by_hand():
    # value = max over q of min(2, 1 + 2q) / (1 + q) with q = Pr[T = 2]
    qs = [F(i, 1000) for i in range(1001)]
    assert max(min(2 * (1 - q) + 2 * q, (1 - q) + 3 * q) / (1 + q) for q in qs) == F(4, 3)


def test_lp_sweep_monotone_below_e():
    vals = [solve_bidding_lp(n).value for n in range(1, 11)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert all(float(v) < math.e for v in vals)


def test_exact_and_float_paths_agree():
    for n in (3, 5, 7):
        a, b = solve_bidding_lp(n, exact=True), solve_bidding_lp(n, exact=False)
        assert abs(float(a.value) - float(b.value)) < 1e-9


def test_lp_bounds():
    with pytest.raises(ValueError):
        solve_bidding_lp(0)


def test_minimax_1x1():
    r = verify_minimax([[5]])
    assert r.lhs == 5 and r.rhs == 5 and r.verdict


def test_minimax_bidding_n2():
    _, C = bidding_matrix(2)
    r = verify_minimax(C)
    assert r.lhs == r.rhs == F(4, 3)


def test_minimax_random_matrices():
    rng = random.Random(1)
    for _ in range(200):
        C = [[rng.randint(0, 9) for _ in range(4)] for _ in range(8)]
        r = verify_minimax(C)
        assert r.verdict
        assert abs(float(r.rhs) - min_max_value(C)) < 1e-7


def test_minimax_rejects_negative():
    with pytest.raises(ValueError):
        verify_minimax([[1, -1]])


def test_simplex_matches_scipy():
    rng = random.Random(7)
    for _ in range(60):
        m, n = rng.randint(1, 5), rng.randint(1, 5)
        A = [[rng.randint(0, 6) for _ in range(n)] for _ in range(m)]
        b = [rng.randint(1, 10) for _ in range(m)]
        c = [rng.randint(-2, 5) for _ in range(n)]
        ref = linprog([-x for x in c], A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
        if ref.status == 3:
            with pytest.raises(Unbounded):
                maximize(c, A, b)
            continue
        sol = maximize(c, A, b)
        assert abs(float(sol.value) + ref.fun) < 1e-9
        assert sum(ci * xi for ci, xi in zip(c, sol.x)) == sol.value
        # dual objective equals primal objective
        assert sum(bi * yi for bi, yi in zip(b, sol.duals)) == sol.value
