"""Named forms from the low-dimensional covering and packing-covering
record literature, for regression checks and the verify-known command.

Rational forms are stored exactly. The irrational ones (the Horvath
forms and the two d=6 records) are closed-form expressions in one
square root; we expose float evaluations plus the exact constants
needed to cross-check the reported densities.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .linalg import SymMatrix

__all__ = [
    "q7c", "ho4", "ho5", "e6star", "r1", "qc2_6", "qpc6",
    "ho4_gamma", "ho5_gamma", "qpc6_gamma", "qc2_6_theta",
    "named_forms",
]


def q7c() -> SymMatrix:
    """The rational 7-dimensional locally optimal covering form;
    mu = 15/2, det = 2 * 11**6."""
    return SymMatrix.from_rows([
        [12, 1, 1, 1, 1, 1, 5],
        [1, 12, 1, 1, 1, 1, 5],
        [1, 1, 12, 1, 1, 1, 5],
        [1, 1, 1, 12, 1, 1, 5],
        [1, 1, 1, 1, 12, 1, 5],
        [1, 1, 1, 1, 1, 12, -6],
        [5, 5, 5, 5, 5, -6, 14],
    ]).map(Fraction)


_HO4_A = [[2, 1, -1, -1], [1, 2, -1, -1], [-1, -1, 2, 0], [-1, -1, 0, 2]]
_HO4_B = [[4, 1, -2, -2], [1, 4, -2, -2], [-2, -2, 4, 1], [-2, -2, 1, 4]]

_HO5_A = [[2, 1, 0, -1, -1],
          [1, 2, -1, -1, 0],
          [0, -1, 2, 0, 0],
          [-1, -1, 0, 2, -1],
          [-1, 0, 0, -1, 2]]
_HO5_B = [[6, 3, -2, -2, -2],
          [3, 6, -2, -3, -2],
          [-2, -2, 6, -1, -1],
          [-2, -3, -1, 6, 0],
          [-2, -2, -1, 0, 6]]


def _combine(a: list, b: list, t: float) -> SymMatrix:
    n = len(a)
    return SymMatrix.from_rows([[a[i][j] + t * b[i][j] for j in range(n)]
                                for i in range(n)])


def ho4() -> SymMatrix:
    """Horvath's 4-dimensional packing-covering optimum (float); the
    first summand is the best packing form D4 on an extreme ray of its
    secondary cone."""
    return _combine(_HO4_A, _HO4_B, math.sqrt(3.0) / 3.0)


def ho5() -> SymMatrix:
    """Horvath's 5-dimensional packing-covering optimum (float)."""
    return _combine(_HO5_A, _HO5_B, (1.0 + math.sqrt(13.0)) / 6.0)


def e6star() -> SymMatrix:
    return SymMatrix.from_rows([
        [4, 1, 2, 2, -1, 1],
        [1, 4, 2, 2, 2, 1],
        [2, 2, 4, 1, 1, 2],
        [2, 2, 1, 4, 1, 2],
        [-1, 2, 1, 1, 4, 2],
        [1, 1, 2, 2, 2, 4],
    ]).map(Fraction)


def r1() -> SymMatrix:
    """Extreme ray paired with e6star in the invariant subspace that
    carries both 6-dimensional records."""
    return SymMatrix.from_rows([
        [12, 3, 6, 6, -3, 3],
        [3, 7, 4, 4, 3, 2],
        [6, 4, 8, 3, 1, 4],
        [6, 4, 3, 8, 1, 4],
        [-3, 3, 1, 1, 7, 3],
        [3, 2, 4, 4, 3, 7],
    ]).map(Fraction)


def qc2_6() -> SymMatrix:
    """Second-best known 6-dimensional covering record (float):
    e6star + (sqrt(1057) - 1)/88 * r1."""
    t = (math.sqrt(1057.0) - 1.0) / 88.0
    a = e6star().to_numpy()
    b = r1().to_numpy()
    return SymMatrix.from_rows((a + t * b).tolist())


def qpc6() -> SymMatrix:
    """6-dimensional packing-covering record (float):
    e6star + (sqrt(798) - 18)/79 * r1."""
    t = (math.sqrt(798.0) - 18.0) / 79.0
    a = e6star().to_numpy()
    b = r1().to_numpy()
    return SymMatrix.from_rows((a + t * b).tolist())


def ho4_gamma() -> float:
    return math.sqrt(2.0 * math.sqrt(3.0)) * (math.sqrt(3.0) - 1.0)


def ho5_gamma() -> float:
    return math.sqrt(1.5 + math.sqrt(13.0) / 6.0)


def qpc6_gamma() -> float:
    return 2.0 * math.sqrt(2.0 * math.sqrt(798.0) - 56.0)


def qc2_6_theta() -> float:
    """Covering density of qc2_6 from its closed form."""
    kappa6 = math.pi ** 3 / 6.0
    s = 1124895337698 * math.sqrt(1057.0) - 33713139497730
    return math.sqrt(s) / 3543122 * kappa6


def named_forms() -> dict:
    """Catalog used by the command line; values are (form, is_exact)."""
    return {
        "Q7c": (q7c(), True),
        "Ho4": (ho4(), False),
        "Ho5": (ho5(), False),
        "E6star": (e6star(), True),
        "Qc2-6-numeric": (qc2_6(), False),
        "Qpc6-numeric": (qpc6(), False),
    }
