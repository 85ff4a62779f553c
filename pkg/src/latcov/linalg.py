"""Exact rational linear algebra.

Symmetric matrices over `fractions.Fraction` (lower triangle, row-major),
fraction-free determinants, an LDL^T semidefiniteness test with symmetric
pivoting, exact inversion, and a two-phase rational simplex solver with
Bland's rule. Float mirrors exist only for the numeric optimization paths;
every certificate-facing computation stays rational.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import DimMismatch, SingularMatrix

Scalar = Union[Fraction, int, float]

LESS_EQ = "<="
GREATER_EQ = ">="
EQUAL = "="


def rat(x) -> Fraction:
    """Coerce ints, strings like "p/q", and floats (exactly) to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def rat_str(x: Fraction) -> str:
    return str(Fraction(x))


def tri_index(i: int, j: int) -> int:
    """Position of entry (i, j), i >= j, in the packed lower triangle."""
    if j > i:
        i, j = j, i
    return i * (i + 1) // 2 + j


def tri_pairs(dim: int) -> list[tuple[int, int]]:
    """Index pairs (i, j), i >= j, in packed order."""
    return [(i, j) for i in range(dim) for j in range(i + 1)]


class SymMatrix:
    """Immutable symmetric matrix; entries rational or float."""

    __slots__ = ("dim", "lower")

    def __init__(self, lower: Sequence[Sequence[Scalar]]):
        rows = tuple(tuple(row) for row in lower)
        for i, row in enumerate(rows):
            if len(row) != i + 1:
                raise DimMismatch("lower triangle rows must have lengths 1..dim")
        object.__setattr__(self, "dim", len(rows))
        object.__setattr__(self, "lower", rows)

    def __setattr__(self, *a):
        raise AttributeError("SymMatrix is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        one, zero = Fraction(1), Fraction(0)
        return cls([[one if i == j else zero for j in range(i + 1)] for i in range(dim)])

    @classmethod
    def zero(cls, dim: int) -> "SymMatrix":
        z = Fraction(0)
        return cls([[z] * (i + 1) for i in range(dim)])

    @classmethod
    def diagonal(cls, values: Sequence[Scalar]) -> "SymMatrix":
        z = Fraction(0)
        return cls([[values[i] if i == j else z for j in range(i + 1)]
                    for i in range(len(values))])

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Scalar]]) -> "SymMatrix":
        n = len(rows)
        for i in range(n):
            if len(rows[i]) != n:
                raise DimMismatch("matrix must be square")
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise DimMismatch("matrix must be symmetric")
        return cls([[rows[i][j] for j in range(i + 1)] for i in range(n)])

    @classmethod
    def from_entry_fn(cls, dim: int, fn: Callable[[int, int], Scalar]) -> "SymMatrix":
        return cls([[fn(i, j) for j in range(i + 1)] for i in range(dim)])

    # -- access ------------------------------------------------------------

    def __getitem__(self, ij: tuple[int, int]) -> Scalar:
        i, j = ij
        if j > i:
            i, j = j, i
        return self.lower[i][j]

    def row(self, i: int) -> tuple[Scalar, ...]:
        return tuple(self[i, j] for j in range(self.dim))

    def to_rows(self) -> list[list[Scalar]]:
        return [list(self.row(i)) for i in range(self.dim)]

    def packed(self) -> tuple[Scalar, ...]:
        return tuple(e for row in self.lower for e in row)

    def trace(self) -> Scalar:
        return sum(self.lower[i][i] for i in range(self.dim))

    @property
    def is_exact(self) -> bool:
        return all(isinstance(e, (Fraction, int)) for row in self.lower for e in row)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        if self.dim != other.dim:
            raise DimMismatch("dimension mismatch in addition")
        return SymMatrix([[a + b for a, b in zip(r1, r2)]
                          for r1, r2 in zip(self.lower, other.lower)])

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        return self + other.scale(-1)

    def __neg__(self) -> "SymMatrix":
        return self.scale(-1)

    def scale(self, a: Scalar) -> "SymMatrix":
        return SymMatrix([[a * e for e in row] for row in self.lower])

    def map(self, fn: Callable[[Scalar], Scalar]) -> "SymMatrix":
        return SymMatrix([[fn(e) for e in row] for row in self.lower])

    def apply(self, v: Sequence[Scalar]) -> tuple[Scalar, ...]:
        """Matrix-vector product Q v."""
        if len(v) != self.dim:
            raise DimMismatch("vector length mismatch")
        return tuple(sum(self[i, j] * v[j] for j in range(self.dim))
                     for i in range(self.dim))

    def bilinear(self, u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
        """u^T Q v."""
        return sum(u[i] * e for i, e in enumerate(self.apply(v)))

    def quad(self, v: Sequence[Scalar]) -> Scalar:
        """Q[v] = v^T Q v."""
        return self.bilinear(v, v)

    def congruent(self, u_cols: Sequence[Sequence[Scalar]]) -> "SymMatrix":
        """U^T Q U where u_cols[j] is the j-th column of U."""
        cols = [self.apply(c) for c in u_cols]
        return SymMatrix([[sum(u_cols[i][k] * cols[j][k] for k in range(self.dim))
                           for j in range(i + 1)] for i in range(len(u_cols))])

    # -- conversions ---------------------------------------------------------

    def to_fractions(self) -> "SymMatrix":
        return self.map(rat)

    def to_numpy(self) -> np.ndarray:
        out = np.empty((self.dim, self.dim), dtype=float)
        for i in range(self.dim):
            for j in range(i + 1):
                out[i, j] = out[j, i] = float(self.lower[i][j])
        return out

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "lower": [[rat_str(rat(e)) for e in row] for row in self.lower]}

    @classmethod
    def from_json(cls, obj: dict) -> "SymMatrix":
        rows = [[Fraction(e) for e in row] for row in obj["lower"]]
        m = cls(rows)
        if m.dim != obj["dim"]:
            raise DimMismatch("declared dim disagrees with lower triangle")
        return m

    # -- misc ----------------------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, SymMatrix) and self.lower == other.lower

    def __hash__(self) -> int:
        return hash(self.lower)

    def __repr__(self) -> str:
        return f"SymMatrix({[list(r) for r in self.lower]})"


def from_coordinate_normal(dim: int, coeffs: Sequence[Scalar]) -> SymMatrix:
    """Linear form sum_{i>=j} c_ij q_ij as a trace-pairing representative.

    The representative N satisfies trace_inner(N, Q) = sum c_ij q_ij; its
    off-diagonal entries carry the factor 1/2.
    """
    pairs = tri_pairs(dim)
    if len(coeffs) != len(pairs):
        raise DimMismatch("coefficient count mismatch")
    m = SymMatrix.zero(dim).to_rows()
    for (i, j), c in zip(pairs, coeffs):
        c = rat(c)
        m[i][j] = m[j][i] = c if i == j else c / 2
    return SymMatrix.from_rows(m)


def to_coordinate_normal(n: SymMatrix) -> tuple[Fraction, ...]:
    """Inverse of from_coordinate_normal."""
    return tuple(rat(n[i, j]) if i == j else 2 * rat(n[i, j])
                 for i, j in tri_pairs(n.dim))


def trace_inner(a: SymMatrix, b: SymMatrix) -> Scalar:
    """trace(a b) for symmetric a, b."""
    if a.dim != b.dim:
        raise DimMismatch("dimension mismatch in trace_inner")
    total = 0
    for i in range(a.dim):
        for j in range(i):
            total += 2 * a.lower[i][j] * b.lower[i][j]
        total += a.lower[i][i] * b.lower[i][i]
    return total


# ---------------------------------------------------------------------------
# determinants, inverses, linear solving
# ---------------------------------------------------------------------------


def _int_rows(rows: list[list[Fraction]]) -> tuple[list[list[int]], Fraction]:
    """Scale rows to integers; return (integer rows, product of row scales)."""
    out, scale = [], Fraction(1)
    for row in rows:
        mult = 1
        for e in row:
            mult = mult * e.denominator // gcd(mult, e.denominator)
        scale *= mult
        out.append([int(e * mult) for e in row])
    return out, scale


def _bareiss_det(m: list[list[int]]) -> int:
    """Fraction-free elimination determinant of an integer matrix."""
    n = len(m)
    if n == 0:
        return 1
    sign, denom = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = m[k][k]
        for i in range(k + 1, n):
            row_i, row_k = m[i], m[k]
            f = row_i[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * pivot - f * row_k[j]) // denom
            row_i[k] = 0
        denom = pivot
    return sign * m[n - 1][n - 1]


def det_exact(m: SymMatrix) -> Fraction:
    """Exact determinant via fraction-free elimination."""
    rows = [[rat(e) for e in m.row(i)] for i in range(m.dim)]
    return det_exact_rows(rows)


def det_exact_rows(rows: Sequence[Sequence[Scalar]]) -> Fraction:
    """Exact determinant of a square (not necessarily symmetric) matrix."""
    work = [[rat(e) for e in row] for row in rows]
    ints, scale = _int_rows(work)
    return Fraction(_bareiss_det(ints)) / scale


class PsdVerdict(enum.Enum):
    POSITIVE_DEFINITE = "positive_definite"
    POSITIVE_SEMIDEFINITE_SINGULAR = "positive_semidefinite_singular"
    INDEFINITE = "indefinite"


def psd_check_exact(m: SymMatrix) -> PsdVerdict:
    """Classify a rational symmetric matrix by LDL^T with symmetric pivoting.

    Pivots are chosen as the largest remaining diagonal entry. A zero pivot
    is accepted only when the entire residual block vanishes; a negative
    diagonal or a nonzero residual under a zero diagonal is indefinite.
    """
    n = m.dim
    a = [[rat(e) for e in m.row(i)] for i in range(n)]
    active = list(range(n))
    singular = False
    while active:
        p = max(active, key=lambda i: a[i][i])
        dmax = a[p][p]
        if dmax < 0:
            return PsdVerdict.INDEFINITE
        if dmax == 0:
            for i in active:
                for j in active:
                    if a[i][j] != 0:
                        return PsdVerdict.INDEFINITE
            singular = True
            break
        active.remove(p)
        for i in active:
            f = a[i][p] / dmax
            if f:
                row_i, row_p = a[i], a[p]
                for j in active:
                    row_i[j] -= f * row_p[j]
    if singular:
        return PsdVerdict.POSITIVE_SEMIDEFINITE_SINGULAR
    return PsdVerdict.POSITIVE_DEFINITE


def solve_exact(rows: Sequence[Sequence[Scalar]], rhs: Sequence[Scalar]) -> tuple[Fraction, ...]:
    """Solve a square rational system exactly; raises SingularMatrix."""
    n = len(rows)
    a = [[rat(e) for e in row] + [rat(rhs[i])] for i, row in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise SingularMatrix("system matrix is singular")
        a[col], a[piv] = a[piv], a[col]
        prow = a[col]
        inv = 1 / prow[col]
        a[col] = prow = [e * inv for e in prow]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [e - f * p for e, p in zip(a[r], prow)]
    return tuple(a[i][n] for i in range(n))


def inverse_exact(m: SymMatrix) -> SymMatrix:
    """Exact inverse of a rational symmetric matrix."""
    n = m.dim
    cols = []
    unit = [Fraction(0)] * n
    for j in range(n):
        unit[j] = Fraction(1)
        cols.append(solve_exact([m.row(i) for i in range(n)], unit))
        unit[j] = Fraction(0)
    return SymMatrix([[cols[j][i] for j in range(i + 1)] for i in range(n)])


def inverse_exact_rows(rows: Sequence[Sequence[Scalar]]) -> list:
    """Exact inverse of a square rational matrix given as rows."""
    n = len(rows)
    cols = []
    unit = [Fraction(0)] * n
    for j in range(n):
        unit[j] = Fraction(1)
        cols.append(solve_exact(rows, unit))
        unit[j] = Fraction(0)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def kernel_basis(rows: Sequence[Sequence[Scalar]], ncols: int) -> tuple:
    """Basis of the rational kernel of a (possibly rectangular) matrix,
    one vector per free column; empty when the kernel is trivial."""
    a = [[rat(e) for e in row] for row in rows]
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(a)) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        prow = a[r]
        inv = 1 / prow[col]
        a[r] = prow = [e * inv for e in prow]
        for i in range(len(a)):
            if i != r and a[i][col]:
                f = a[i][col]
                a[i] = [e - f * p for e, p in zip(a[i], prow)]
        pivots.append(col)
        r += 1
        if r == len(a):
            break
    out = []
    for f0 in (c for c in range(ncols) if c not in pivots):
        vec = [Fraction(0)] * ncols
        vec[f0] = Fraction(1)
        for rr, col in enumerate(pivots):
            vec[col] = -a[rr][f0]
        out.append(tuple(vec))
    return tuple(out)


def kernel_vector(rows: Sequence[Sequence[Scalar]], ncols: int) -> Optional[tuple[Fraction, ...]]:
    """One nonzero rational kernel vector of a (possibly rectangular) matrix,
    or None if the kernel is trivial."""
    basis = kernel_basis(rows, ncols)
    return basis[0] if basis else None


def primitive_scale(values: Iterable[Fraction]) -> tuple[int, ...]:
    """Scale rationals by a positive factor to coprime integers."""
    vals = [rat(v) for v in values]
    mult = 1
    for v in vals:
        mult = mult * v.denominator // gcd(mult, v.denominator)
    ints = [int(v * mult) for v in vals]
    g = 0
    for e in ints:
        g = gcd(g, abs(e))
    if g > 1:
        ints = [e // g for e in ints]
    return tuple(ints)


# ---------------------------------------------------------------------------
# exact linear programming
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinProgram:
    """min/max objective . x subject to row . x (rel) rhs; variables free."""

    objective: tuple
    constraints: tuple  # of (coeff tuple, relation, rhs)

    @staticmethod
    def build(objective, constraints) -> "LinProgram":
        obj = tuple(rat(c) for c in objective)
        cons = tuple((tuple(rat(c) for c in row), rel, rat(rhs))
                     for row, rel, rhs in constraints)
        n = len(obj)
        for row, rel, _ in cons:
            if len(row) != n:
                raise DimMismatch("constraint length mismatch")
            if rel not in (LESS_EQ, GREATER_EQ, EQUAL):
                raise ValueError(f"unknown relation {rel!r}")
        return LinProgram(obj, cons)


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    value: Optional[Fraction] = None
    point: Optional[tuple] = None


def _pivot(tableau: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    prow = tableau[row]
    inv = 1 / prow[col]
    tableau[row] = prow = [e * inv for e in prow]
    for r, trow in enumerate(tableau):
        if r != row and trow[col]:
            f = trow[col]
            tableau[r] = [e - f * p for e, p in zip(trow, prow)]
    basis[row] = col


def _bland_phase(tableau: list[list[Fraction]], basis: list[int], m: int,
                 allowed: int) -> bool:
    """Run simplex with Bland's rule; True on optimal, False on unbounded.

    The cost row is tableau[m]; columns >= allowed are never entered.
    """
    while True:
        cost = tableau[m]
        col = next((j for j in range(allowed) if cost[j] < 0), None)
        if col is None:
            return True
        best_row, best_ratio = None, None
        for r in range(m):
            a = tableau[r][col]
            if a > 0:
                ratio = tableau[r][-1] / a
                if (best_ratio is None or ratio < best_ratio
                        or (ratio == best_ratio and basis[r] < basis[best_row])):
                    best_row, best_ratio = r, ratio
        if best_row is None:
            return False
        _pivot(tableau, basis, best_row, col)


def lp_solve_exact(program: LinProgram, maximize: bool = False) -> LpResult:
    """Two-phase exact simplex with Bland's rule (no cycling).

    Free variables are split into positive and negative parts. Returns a
    vertex optimizer when one exists.
    """
    n = len(program.objective)
    cons = program.constraints
    m = len(cons)
    nsplit = 2 * n
    slack_rels = [rel for _, rel, _ in cons if rel != EQUAL]
    nslack = len(slack_rels)
    ncols = nsplit + nslack + m  # split vars, slacks, artificials

    tableau: list[list[Fraction]] = []
    zero = Fraction(0)
    si = 0
    for r, (row, rel, rhs) in enumerate(cons):
        line = [zero] * (ncols + 1)
        for j, c in enumerate(row):
            line[2 * j] = c
            line[2 * j + 1] = -c
        if rel != EQUAL:
            line[nsplit + si] = Fraction(1) if rel == LESS_EQ else Fraction(-1)
            si += 1
        line[-1] = rhs
        if rhs < 0:
            line = [-e for e in line]
        line[nsplit + nslack + r] = Fraction(1)
        tableau.append(line)

    # phase 1: minimize the artificial sum
    cost = [zero] * (ncols + 1)
    for j in range(nsplit + nslack, ncols):
        cost[j] = Fraction(1)
    tableau.append(cost)
    basis = [nsplit + nslack + r for r in range(m)]
    for r in range(m):
        f = tableau[m][basis[r]]
        if f:
            tableau[m] = [e - f * p for e, p in zip(tableau[m], tableau[r])]
    _bland_phase(tableau, basis, m, ncols)
    if tableau[m][-1] != 0:
        return LpResult(LpStatus.INFEASIBLE)

    # pivot artificials out of the basis; drop dependent rows
    keep_rows = []
    for r in range(m):
        if basis[r] >= nsplit + nslack:
            col = next((j for j in range(nsplit + nslack) if tableau[r][j] != 0), None)
            if col is None:
                continue  # redundant constraint row
            _pivot(tableau, basis, r, col)
        keep_rows.append(r)
    tableau = [tableau[r] for r in keep_rows]
    basis = [basis[r] for r in keep_rows]
    m2 = len(tableau)

    # phase 2
    sign = -1 if maximize else 1
    cost = [zero] * (ncols + 1)
    for j in range(n):
        cost[2 * j] = sign * program.objective[j]
        cost[2 * j + 1] = -sign * program.objective[j]
    tableau.append(cost)
    for r in range(m2):
        f = tableau[m2][basis[r]]
        if f:
            tableau[m2] = [e - f * p for e, p in zip(tableau[m2], tableau[r])]
    if not _bland_phase(tableau, basis, m2, nsplit + nslack):
        return LpResult(LpStatus.UNBOUNDED)

    values = [zero] * ncols
    for r, b in enumerate(basis):
        values[b] = tableau[r][-1]
    point = tuple(values[2 * j] - values[2 * j + 1] for j in range(n))
    objective = sum(c * x for c, x in zip(program.objective, point))
    return LpResult(LpStatus.OPTIMAL, objective, point)
