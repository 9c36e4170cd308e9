"""Exact feasibility of ``A p = b, p >= 0`` over the rationals.

Phase-one simplex on a dense :class:`Fraction` tableau with Bland's rule, so
it terminates and every answer is exact.  Infeasible systems come with a
Farkas certificate ``y`` such that ``y.A <= 0`` componentwise and
``y.b > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = ["FeasibilityResult", "solve_feasibility", "check_farkas"]


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    point: tuple[Fraction, ...] | None = None
    farkas: tuple[Fraction, ...] | None = None


def check_farkas(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction], y: Sequence[Fraction]) -> bool:
    cols = len(A[0]) if A else 0
    for j in range(cols):
        if sum(y[i] * A[i][j] for i in range(len(A))) > 0:
            return False
    return sum(yi * bi for yi, bi in zip(y, b)) > 0


def solve_feasibility(A: Sequence[Sequence], b: Sequence) -> FeasibilityResult:
    """Decide whether ``A p = b`` has a solution with ``p >= 0``."""
    m = len(A)
    n = len(A[0]) if m else 0
    if m == 0:
        return FeasibilityResult(True, tuple(Fraction(0) for _ in range(n)))
    flip = [Fraction(b[i]) < 0 for i in range(m)]
    # tableau rows: [original columns | artificial columns | rhs]
    T = []
    for i in range(m):
        s = -1 if flip[i] else 1
        row = [Fraction(A[i][j]) * s for j in range(n)]
        row += [Fraction(1 if k == i else 0) for k in range(m)]
        row.append(Fraction(b[i]) * s)
        T.append(row)
    basis = [n + i for i in range(m)]
    width = n + m
    # reduced-cost row for minimizing the sum of artificials
    z = [Fraction(0)] * (width + 1)
    for i in range(m):
        for j in range(width + 1):
            z[j] -= T[i][j]
    for k in range(m):
        z[n + k] += 1

    while True:
        enter = next((j for j in range(width) if z[j] < 0), None)
        if enter is None:
            break
        leave = None
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            break  # cannot happen: phase one is bounded below
        piv = T[leave][enter]
        prow = [v / piv for v in T[leave]]
        T[leave] = prow
        for i in range(m):
            if i != leave and T[i][enter] != 0:
                f = T[i][enter]
                row = T[i]
                T[i] = [row[j] - f * prow[j] for j in range(width + 1)]
        if z[enter] != 0:
            f = z[enter]
            z = [z[j] - f * prow[j] for j in range(width + 1)]
        basis[leave] = enter

    objective = -z[-1]
    if objective == 0:
        p = [Fraction(0)] * n
        for i, j in enumerate(basis):
            if j < n:
                p[j] = T[i][-1]
        return FeasibilityResult(True, tuple(p))
    # reduced cost of artificial k is 1 - y_k for the flipped system
    y = []
    for k in range(m):
        yk = 1 - z[n + k]
        y.append(-yk if flip[k] else yk)
    return FeasibilityResult(False, farkas=tuple(y))
