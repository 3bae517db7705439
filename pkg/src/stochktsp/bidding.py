"""Online bidding LPs and the max-min / min-max duality check.

For a non-negative cost matrix C (rows: bid sequences, columns: thresholds
with weights w_T) the two quantities compared are

    lhs = max_p min_I  sum_T p_T C(I,T) / sum_T p_T w_T
    rhs = min_pi max_T sum_I pi_I C(I,T) / w_T

lhs is solved as ``max a  s.t.  a <= sum_T C(I,T) s_T,  sum_T w_T s_T <= 1``.
rhs is solved through the substitution y = pi / beta, which turns it into
``max sum_I y_I  s.t.  sum_I C(I,T) y_I <= w_T`` with value 1 / beta.
Both are origin-feasible, so the exact simplex applies directly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import simplex

EXACT_LIMIT = 8
MAX_N = 14
DUALITY_TOL = 1e-9


def bid_cost(seq: Sequence[int], threshold: int) -> float | int:
    """Sum of bids up to and including the first bid >= threshold (inf if none)."""
    total = 0
    for b in seq:
        total += b
        if b >= threshold:
            return total
    return math.inf


def enumerate_gamma(n: int, coverage: bool = False) -> list[tuple[int, ...]]:
    """Increasing non-empty bid sequences over 1..n.

    With ``coverage`` only sequences ending in n (finite cost for every
    threshold) are kept.
    """
    if n > 16:
        raise ValueError(f"n = {n} too large to enumerate (limit 16)")
    out = []
    for r in range(1, n + 1):
        for combo in itertools.combinations(range(1, n + 1), r):
            if coverage and combo[-1] != n:
                continue
            out.append(combo)
    return out


def bidding_matrix(n: int) -> tuple[list[tuple[int, ...]], list[list[int]]]:
    gamma = enumerate_gamma(n, coverage=True)
    return gamma, [[bid_cost(seq, t) for t in range(1, n + 1)] for seq in gamma]


@dataclass
class MinimaxResult:
    lhs: object  # Fraction when exact, float otherwise
    rhs: object
    p: list  # maximizing distribution over columns
    pi: list  # minimizing distribution over rows
    exact: bool

    @property
    def gap(self) -> float:
        return abs(float(self.lhs) - float(self.rhs))

    @property
    def verdict(self) -> bool:
        return self.gap <= DUALITY_TOL * max(1.0, abs(float(self.rhs)))


def _validate(C) -> None:
    for row in C:
        for x in row:
            if x < 0:
                raise ValueError(f"negative matrix entry {x}")


def _exact_sides(C, w) -> MinimaxResult:
    rows, cols = len(C), len(w)
    # lhs: variables (a, s_1..s_cols)
    c = [1] + [0] * cols
    A = [[1] + [-Fraction(C[i][j]) for j in range(cols)] for i in range(rows)]
    A.append([0] + [Fraction(x) for x in w])
    b = [0] * rows + [1]
    left = simplex.maximize(c, A, b)
    s = left.x[1:]
    ssum = sum(s)
    p = [x / ssum for x in s] if ssum else [Fraction(1, cols)] * cols
    # rhs: variables y_I
    A2 = [[Fraction(C[i][j]) for i in range(rows)] for j in range(cols)]
    try:
        right = simplex.maximize([1] * rows, A2, [Fraction(x) for x in w])
        rhs = 1 / right.value
        pi = [y / right.value for y in right.x]
    except simplex.Unbounded:
        # only possible when some row is identically zero
        rhs = Fraction(0)
        first = next(i for i in range(rows) if all(C[i][j] == 0 for j in range(cols)))
        pi = [Fraction(int(i == first)) for i in range(rows)]
    return MinimaxResult(left.value, rhs, p, pi, True)


def _float_sides(C, w) -> MinimaxResult:
    Cm = np.asarray(C, dtype=float)
    wv = np.asarray(w, dtype=float)
    rows, cols = Cm.shape
    # lhs: minimize -a
    c = np.zeros(cols + 1)
    c[0] = -1.0
    A = np.hstack([np.ones((rows, 1)), -Cm])
    A = np.vstack([A, np.concatenate([[0.0], wv])])
    b = np.zeros(rows + 1)
    b[-1] = 1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * (cols + 1), method="highs")
    if res.status != 0:
        raise RuntimeError(f"max-min LP failed: {res.message}")
    lhs = -res.fun
    s = res.x[1:]
    p = list(s / s.sum()) if s.sum() > 0 else [1.0 / cols] * cols
    res2 = linprog(-np.ones(rows), A_ub=Cm.T, b_ub=wv, bounds=[(0, None)] * rows, method="highs")
    if res2.status == 3:
        rhs, pi = 0.0, [0.0] * rows
    elif res2.status != 0:
        raise RuntimeError(f"min-max LP failed: {res2.message}")
    else:
        total = -res2.fun
        rhs = 1.0 / total
        pi = list(res2.x / total)
    return MinimaxResult(lhs, rhs, p, pi, False)


def verify_minimax(C, weights: Sequence | None = None, exact: bool | None = None) -> MinimaxResult:
    """Solve both sides of the max-min = min-max identity independently."""
    _validate(C)
    cols = len(C[0])
    w = list(weights) if weights is not None else list(range(1, cols + 1))
    if exact is None:
        exact = all(isinstance(x, (int, Fraction)) for row in C for x in row) and len(C) <= 2**EXACT_LIMIT
    return _exact_sides(C, w) if exact else _float_sides(C, w)


@dataclass
class BiddingLPResult:
    n: int
    value: object
    p: list
    pi: dict[tuple[int, ...], object]
    primal: object
    dual: object
    exact: bool

    @property
    def gap(self) -> float:
        return abs(float(self.primal) - float(self.dual))

    def to_record(self) -> dict:
        return {
            "n": self.n,
            "value": float(self.value),
            "value_exact": str(self.value) if self.exact else None,
            "p": [str(x) if self.exact else float(x) for x in self.p],
            "gap": self.gap,
        }


def solve_bidding_lp(n: int, exact: bool | None = None) -> BiddingLPResult:
    """Worst-case threshold distribution and optimal randomized bidding for [n]."""
    if n < 1 or n > MAX_N:
        raise ValueError(f"n must be in 1..{MAX_N}, got {n}")
    if exact is None:
        exact = n <= EXACT_LIMIT
    gamma, C = bidding_matrix(n)
    res = verify_minimax(C, list(range(1, n + 1)), exact=exact)
    if not res.verdict:
        raise RuntimeError(
            f"bidding LP duality gap {res.gap:.3e} at n={n} exceeds {DUALITY_TOL}")
    pi = {seq: x for seq, x in zip(gamma, res.pi) if x != 0}
    return BiddingLPResult(n, res.lhs, res.p, pi, res.rhs, res.lhs, exact)
