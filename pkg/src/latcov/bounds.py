"""Moment-of-inertia lower bounds for covering and packing-covering.

For a triangulation t the mean moment of inertia of the origin's star,
I_t(Q) = trace(F Q), is linear in Q with a positive definite coefficient
form F. Since the circumradius of a simplex is at least its moment about
the centroid, mu(Q) >= I_t(Q)/(d+1) on the closed cone of t, which turns
into closed-form lower bounds on the covering density and on the
packing-covering ratio that hold on the whole cone. These are the pruning
bounds used by the enumeration and the record search.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .delone import Simplex, Triangulation, validate_triangulation, vec_sub
from .errors import UnboundedProgram
from .forms import unit_ball_volume
from .linalg import (
    GREATER_EQ,
    LinProgram,
    LpStatus,
    SymMatrix,
    det_exact,
    inverse_exact,
    lp_solve_exact,
    rat,
    to_coordinate_normal,
    trace_inner,
    tri_pairs,
)


@dataclass(frozen=True)
class InertiaForm:
    F: SymMatrix
    n_star: int

    def value(self, q: SymMatrix):
        return trace_inner(self.F, q)


def point_moment(s: Simplex, q: SymMatrix, x) -> Fraction:
    """Moment of inertia of the vertex set about the point x."""
    return sum(rat(q.quad(tuple(rat(v[k]) - rat(x[k]) for k in range(q.dim))))
               for v in s.vertices)


def centroid(s: Simplex) -> tuple:
    n = len(s.vertices)
    return tuple(Fraction(sum(v[k] for v in s.vertices), n)
                 for k in range(len(s.vertices[0])))


def simplex_moment(s: Simplex, q: SymMatrix) -> Fraction:
    """Moment about the centroid, via the pairwise-distance formula
    I_m = (1/(d+1)) sum_{v<w} Q[v-w]."""
    n = len(s.vertices)
    total = Fraction(0)
    for i in range(n):
        for j in range(i):
            total += rat(q.quad(vec_sub(s.vertices[i], s.vertices[j])))
    return total / n


def inertia_form(t: Triangulation) -> InertiaForm:
    """Trace representative F of the star-averaged moment I_t(Q)."""
    validate_triangulation(t)
    d = t.dim
    star = t.star_simplices()
    n = len(star)
    acc = [[Fraction(0)] * (i + 1) for i in range(d)]
    for s in star:
        vs = s.vertices
        for a in range(len(vs)):
            for b in range(a):
                u = vec_sub(vs[a], vs[b])
                for i in range(d):
                    for j in range(i + 1):
                        acc[i][j] += Fraction(u[i] * u[j])
    w = Fraction(1, n * (d + 1))
    return InertiaForm(SymMatrix([[e * w for e in row] for row in acc]), n)


def mu_lower_bound(t: Triangulation, q: SymMatrix) -> Fraction:
    """mu(q) >= I_t(q)/(d+1) whenever t refines the subdivision of q."""
    return rat(inertia_form(t).value(q.to_fractions())) / (t.dim + 1)


@dataclass(frozen=True)
class ThetaBound:
    value: float           # sqrt(exact) * kappa_d
    exact: Fraction        # (d/(d+1))^d * det F
    minimizer: SymMatrix   # F^{-1}; the bound is attained there up to scale


@dataclass(frozen=True)
class GammaBound:
    value: float
    exact_sq: Fraction     # gamma_*^2 = 4 <F, Q*> / ((d+1) lambda)
    minimizer: SymMatrix


def theta_star(t: Triangulation) -> ThetaBound:
    d = t.dim
    f = inertia_form(t).F
    exact = Fraction(d, d + 1) ** d * rat(det_exact(f))
    value = float(exact) ** 0.5 * unit_ball_volume(d)
    return ThetaBound(value, exact, inverse_exact(f))


def gamma_star(t: Triangulation, lam=1) -> GammaBound:
    """Exact LP: minimize <F, Q> over Q[v] >= lambda for all star edges."""
    lam = rat(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    d = t.dim
    f = inertia_form(t).F
    cons = []
    for v in t.star_edges():
        row = tuple(Fraction(v[i] * v[j] * (1 if i == j else 2))
                    for i, j in tri_pairs(d))
        cons.append((row, GREATER_EQ, lam))
    res = lp_solve_exact(LinProgram.build(to_coordinate_normal(f), cons))
    if res.status == LpStatus.UNBOUNDED:
        raise UnboundedProgram("star-edge constraints do not bound the moment")
    assert res.status == LpStatus.OPTIMAL
    it = iter(res.point)
    qstar = SymMatrix([[next(it) for _ in range(i + 1)] for i in range(d)])
    exact_sq = 4 * rat(res.value) / ((d + 1) * lam)
    return GammaBound(float(exact_sq) ** 0.5, exact_sq, qstar)


@dataclass(frozen=True)
class BoundReport:
    theta: ThetaBound
    gamma: GammaBound
    n_star: int


def bound_report(t: Triangulation, lam=1) -> BoundReport:
    return BoundReport(theta_star(t), gamma_star(t, lam), inertia_form(t).n_star)
