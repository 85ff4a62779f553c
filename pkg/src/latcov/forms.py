"""Positive definite quadratic forms and their lattice functionals.

A form Q is a rational symmetric matrix acting on Z^d by Q[x] = x^T Q x.
This module provides the principal form of the first kind, exact shortest
vector enumeration, and the normalized covering / packing-covering
functionals. The inhomogeneous minimum needs Delone machinery and lives
with it (`delone.inhomogeneous_min`).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import DimMismatch, NonPositiveMu
from .linalg import PsdVerdict, SymMatrix, det_exact, psd_check_exact, rat


def principal_form(dim: int) -> SymMatrix:
    """Form of the first kind: d on the diagonal, -1 off it.

    Its Delone subdivision is the triangulation whose secondary cone seeds
    the enumeration walk; the form itself is the scaled dual root lattice
    A_d^*.
    """
    if dim < 1:
        raise DimMismatch("dimension must be positive")
    return SymMatrix.from_entry_fn(
        dim, lambda i, j: Fraction(dim) if i == j else Fraction(-1))


def _box_candidates(q: SymMatrix, limit: float) -> list:
    """Nonzero integer vectors with float estimate Q[v] <= limit, by box
    enumeration on a float Cholesky factor; callers re-verify exactly."""
    d = q.dim
    r = np.linalg.cholesky(q.to_numpy()).T  # upper triangular, Q = r^T r
    out: list[tuple[int, ...]] = []
    x = [0] * d

    def recurse(level: int, residual: float, center: list[float]) -> None:
        # enumerate x[level] with r_ll^2 (x_l - center_l)^2 <= residual
        rll = r[level, level]
        span = math.sqrt(max(residual, 0.0)) / rll
        lo = math.ceil(-center[level] - span - 1e-9)
        hi = math.floor(-center[level] + span + 1e-9)
        for xv in range(lo, hi + 1):
            x[level] = xv
            t = rll * (xv + center[level])
            rem = residual - t * t
            if rem < -1e-9:
                continue
            if level == 0:
                v = tuple(x)
                if any(v):
                    out.append(v)
            else:
                nxt = center[:]
                for j in range(level):
                    nxt[j] += (r[j, level] / r[j, j]) * xv
                recurse(level - 1, rem, nxt)

    recurse(d - 1, limit, [0.0] * d)
    return out


def _canonical_both_signs(half: set) -> tuple:
    vectors = sorted(half) + sorted(tuple(-e for e in v) for v in half)
    return tuple(sorted(vectors))


def lambda_min(q: SymMatrix) -> tuple[Fraction, tuple[tuple[int, ...], ...]]:
    """Homogeneous minimum and all its integer minimizers (both signs).

    Box enumeration bounded by the smallest diagonal entry, with every
    candidate re-verified in exact arithmetic.
    """
    if not q.is_exact:
        raise DimMismatch("lambda_min needs a rational form")
    if psd_check_exact(q) != PsdVerdict.POSITIVE_DEFINITE:
        raise NonPositiveMu("form must be positive definite")
    bound = min(rat(q[i, i]) for i in range(q.dim))
    limit = float(bound) * (1.0 + 1e-9) + 1e-12
    best = bound
    half: set = set()
    for v in _box_candidates(q, limit):
        val = q.quad(v)
        if val > best:
            continue
        lead = next(e for e in v if e)
        canon = v if lead > 0 else tuple(-e for e in v)
        if val < best:
            best = val
            half = {canon}
        else:
            half.add(canon)
    return best, _canonical_both_signs(half)


def short_vectors(q: SymMatrix, bound) -> tuple:
    """All nonzero integer vectors with Q[v] <= bound (both signs).

    The inflated float enumeration is filtered exactly, so the result is
    the exact level set; in particular short_vectors(q, lambda_min(q)[0])
    returns precisely the shortest vectors.
    """
    if not q.is_exact:
        raise DimMismatch("short_vectors needs a rational form")
    if psd_check_exact(q) != PsdVerdict.POSITIVE_DEFINITE:
        raise NonPositiveMu("form must be positive definite")
    bound = rat(bound)
    if bound <= 0:
        return ()
    limit = float(bound) * (1.0 + 1e-9) + 1e-12
    half = set()
    for v in _box_candidates(q, limit):
        if q.quad(v) <= bound:
            lead = next(e for e in v if e)
            half.add(v if lead > 0 else tuple(-e for e in v))
    return _canonical_both_signs(half)


def unit_ball_volume(dim: int) -> float:
    """Volume of the d-dimensional unit ball."""
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def density_ratio(q: SymMatrix, mu: Fraction) -> Fraction:
    """Exact scale-free part mu^d / det Q of the covering density."""
    mu = rat(mu)
    if mu <= 0:
        raise NonPositiveMu("inhomogeneous minimum must be positive")
    return mu ** q.dim / det_exact(q)


def covering_density(q: SymMatrix, mu) -> float:
    """Normalized covering density sqrt(mu^d / det Q) * kappa_d (float)."""
    if q.is_exact and isinstance(mu, (Fraction, int)):
        ratio = float(density_ratio(q, mu))
    else:
        det = float(np.linalg.det(q.to_numpy()))
        ratio = float(mu) ** q.dim / det
    return math.sqrt(ratio) * unit_ball_volume(q.dim)


def packcov_constant(mu, lam) -> float:
    """Packing-covering constant 2 sqrt(mu / lambda) (float)."""
    if float(mu) <= 0 or float(lam) <= 0:
        raise NonPositiveMu("minima must be positive")
    return 2.0 * math.sqrt(float(mu) / float(lam))


def astar_theta(dim: int) -> float:
    """Covering density of A_d^*, the best known in low dimensions."""
    d = dim
    ratio = Fraction(d * (d + 2), 12 * (d + 1)) ** d * (d + 1)
    return math.sqrt(float(ratio)) * unit_ball_volume(d)
