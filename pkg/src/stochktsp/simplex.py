"""Dense tableau simplex over exact rationals.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0`` (the origin is
feasible, so no phase one is needed). Bland's rule guarantees termination on
degenerate problems, which the bidding LPs are.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class Unbounded(Exception):
    pass


@dataclass
class LPSolution:
    value: Fraction
    x: list[Fraction]
    duals: list[Fraction]
    pivots: int


def maximize(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LPSolution:
    m, n = len(A), len(c)
    if any(Fraction(bi) < 0 for bi in b):
        raise ValueError("right-hand side must be non-negative")
    width = n + m + 1
    rows = []
    for i in range(m):
        row = [Fraction(a) for a in A[i]] + [Fraction(0)] * m + [Fraction(b[i])]
        row[n + i] = Fraction(1)
        rows.append(row)
    z = [-Fraction(x) for x in c] + [Fraction(0)] * (m + 1)
    basis = [n + i for i in range(m)]
    pivots = 0
    while True:
        enter = next((j for j in range(width - 1) if z[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            a = rows[i][enter]
            if a > 0:
                ratio = rows[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:
            raise Unbounded(f"objective unbounded along column {enter}")
        prow = rows[leave]
        piv = prow[enter]
        if piv != 1:
            prow = rows[leave] = [x / piv for x in prow]
        nz = [j for j, x in enumerate(prow) if x != 0]
        for i in range(m):
            if i == leave:
                continue
            f = rows[i][enter]
            if f != 0:
                r = rows[i]
                for j in nz:
                    r[j] -= f * prow[j]
        f = z[enter]
        for j in nz:
            z[j] -= f * prow[j]
        basis[leave] = enter
        pivots += 1
    x = [Fraction(0)] * n
    for i, bj in enumerate(basis):
        if bj < n:
            x[bj] = rows[i][-1]
    return LPSolution(z[-1], x, z[n:n + m], pivots)
