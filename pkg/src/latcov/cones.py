"""Secondary cones of Delone triangulations and bistellar flips.

A triangulation t determines the open polyhedral cone of forms whose
Delone subdivision equals t. The cone is cut out by the regulators: one
linear inequality rho(Q) = sum_i alpha_i Q[v_i] > 0 per translation class
of interior facets, where alpha is the affine relation on the d+2 vertices
of the two simplices sharing the facet, normalized to alpha_1 = 1 on the
first apex. Flipping across a facet of the cone yields the neighboring
triangulation; walls whose normal is positive semidefinite cannot vanish
at any positive definite form and are dropped as vacuous.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .delone import Simplex, Triangulation, facet_incidences, normalize_vertices, \
    validate_triangulation, vec_sub
from .errors import EmptyCone, FlipProducedInvalid, InvalidTriangulation, NotAFacet
from .linalg import (
    GREATER_EQ,
    LESS_EQ,
    LinProgram,
    LpStatus,
    PsdVerdict,
    SymMatrix,
    kernel_vector,
    lp_solve_exact,
    primitive_scale,
    psd_check_exact,
    rat,
    to_coordinate_normal,
    trace_inner,
    tri_pairs,
)


@dataclass(frozen=True)
class Regulator:
    """Wall inequality <normal, Q> > 0 with its defining simplex pair."""

    normal: SymMatrix  # primitive integer matrix, trace pairing
    pair: tuple        # (simplex with apex1, simplex with apex2), common position
    facet: tuple       # shared facet vertices
    relation: tuple    # alpha_1..alpha_{d+2}, alpha_1 = 1, over (apex1, facet..., apex2)

    def value(self, q: SymMatrix):
        return trace_inner(self.normal, q)


def relation_of_circuit(points) -> tuple:
    """Unique affine relation on d+2 points spanning R^d, scaled to
    alpha_1 = 1: sum alpha_i points_i = 0 and sum alpha_i = 0."""
    d = len(points[0])
    rows = [[rat(p[k]) for p in points] for k in range(d)]
    rows.append([rat(1)] * len(points))
    alpha = kernel_vector(rows, len(points))
    if alpha is None or alpha[0] == 0:
        raise InvalidTriangulation("facet pair has no apex-normalized relation")
    a0 = alpha[0]
    return tuple(a / a0 for a in alpha)


def _normal_from_relation(points, alpha, dim: int) -> SymMatrix:
    """Primitive integer trace-pairing normal of sum alpha_i Q[v_i]."""
    n = [[Fraction(0)] * (i + 1) for i in range(dim)]
    for p, a in zip(points, alpha):
        if a:
            for i in range(dim):
                for j in range(i + 1):
                    n[i][j] += a * p[i] * p[j]
    packed = [e for row in n for e in row]
    prim = primitive_scale(packed)
    it = iter(prim)
    return SymMatrix([[next(it) for _ in range(i + 1)] for i in range(dim)])


@lru_cache(maxsize=4)
def _pair_data(t: Triangulation):
    """Per facet class: the realized pair geometry, relation, and normal."""
    out = []
    for key, inc in sorted(facet_incidences(t).items()):
        if len(inc) != 2:
            raise InvalidTriangulation(
                f"facet class lies in {len(inc)} simplices, want 2")
        (c1, k1, s1), (c2, k2, s2) = inc
        simp1 = t.classes[c1].shifted(s1)
        simp2 = t.classes[c2].shifted(s2)
        points = (simp1.vertices[k1],) + key + (simp2.vertices[k2],)
        alpha = relation_of_circuit(points)
        normal = _normal_from_relation(points, alpha, t.dim)
        out.append((key, points, alpha, normal, simp1, simp2))
    return tuple(out)


def regulators_of(t: Triangulation) -> tuple:
    """Deduped regulators of t, one per primitive wall normal.

    Normals that are positive semidefinite are strictly positive at every
    positive definite form, so they never bound the cone inside the PD set
    and are omitted (in d=1 this leaves nothing).
    """
    validate_triangulation(t)
    by_normal: dict = {}
    for key, points, alpha, normal, simp1, simp2 in _pair_data(t):
        if normal in by_normal:
            continue
        if psd_check_exact(normal.to_fractions()) != PsdVerdict.INDEFINITE:
            by_normal[normal] = None
            continue
        by_normal[normal] = Regulator(normal, (simp1, simp2), key, alpha)
    regs = [r for r in by_normal.values() if r is not None]
    regs.sort(key=lambda r: r.normal.packed())
    return tuple(regs)


# ---------------------------------------------------------------------------
# flips
# ---------------------------------------------------------------------------


def flip(t: Triangulation, facet_regulator: Regulator) -> Triangulation:
    """Bistellar neighbor across a wall of the secondary cone.

    Every repartitioning polytope whose regulator has the given primitive
    normal is re-triangulated: simplices dropping a vertex with alpha > 0
    are replaced by those dropping a vertex with alpha < 0.
    """
    target = facet_regulator.normal
    polys: dict = {}
    for key, points, alpha, normal, _s1, _s2 in _pair_data(t):
        if normal != target:
            continue
        mins = tuple(min(p[k] for p in points) for k in range(t.dim))
        shifted = [vec_sub(p, mins) for p in points]
        pkey = tuple(sorted(shifted))
        polys[pkey] = tuple(zip(shifted, alpha))
    if not polys:
        raise NotAFacet("no repartitioning polytope carries this normal")

    classes = set(t.classes)
    removed: set = set()
    added: set = set()
    for pkey, point_alpha in polys.items():
        pts = [p for p, _ in point_alpha]
        plus = [Simplex(normalize_vertices([p for p in pts if p != v]))
                for v, a in point_alpha if a > 0]
        minus = [Simplex(normalize_vertices([p for p in pts if p != v]))
                 for v, a in point_alpha if a < 0]
        for s in plus:
            if s not in classes:
                raise NotAFacet("repartitioning complex is not a subcomplex")
        removed.update(plus)
        added.update(minus)

    result = Triangulation(t.dim, tuple(sorted((classes - removed) | added,
                                               key=lambda s: s.vertices)))
    try:
        validate_triangulation(result)
    except InvalidTriangulation as e:
        raise FlipProducedInvalid(str(e)) from e
    return result


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondaryCone:
    triangulation: Triangulation
    all_regulators: tuple
    facets: tuple          # irredundant subset of all_regulators
    interior_point: SymMatrix

    def to_json(self) -> dict:
        return {"dim": self.triangulation.dim,
                "facets": [[[int(e) for e in row] for row in f.normal.lower]
                           for f in self.facets]}


def _is_redundant(normal: SymMatrix, others: list) -> bool:
    """Exact LP: rho is redundant iff the others force <normal, Q> >= 0."""
    row = to_coordinate_normal(normal)
    cons = [(to_coordinate_normal(o), GREATER_EQ, Fraction(0)) for o in others]
    cons.append((row, GREATER_EQ, Fraction(-1)))
    res = lp_solve_exact(LinProgram.build(row, cons))
    assert res.status == LpStatus.OPTIMAL
    return res.value == 0


def _interior_lp(facet_normals: list, dim: int):
    """Maximize uniform slack s over <N_f, Q> >= s with Q trace-bounded."""
    nvars = dim * (dim + 1) // 2
    cons = []
    for nm in facet_normals:
        cons.append((to_coordinate_normal(nm) + (Fraction(-1),), GREATER_EQ, Fraction(0)))
    diag = tuple(Fraction(1) if i == j else Fraction(0) for i, j in tri_pairs(dim))
    cons.append((diag + (Fraction(0),), LESS_EQ, Fraction(4 * dim * dim)))
    cons.append(((Fraction(0),) * nvars + (Fraction(1),), LESS_EQ, Fraction(1)))
    obj = (Fraction(0),) * nvars + (Fraction(-1),)
    res = lp_solve_exact(LinProgram.build(obj, cons))
    if res.status != LpStatus.OPTIMAL or -res.value <= 0:
        return None
    packed = res.point[:nvars]
    it = iter(packed)
    return SymMatrix([[next(it) for _ in range(i + 1)] for i in range(dim)])


def secondary_cone(t: Triangulation) -> SecondaryCone:
    """Cone with irredundant facet list and a rational interior point."""
    regs = regulators_of(t)
    kept = list(regs)
    for reg in list(kept):
        others = [r.normal for r in kept if r is not reg]
        if others and _is_redundant(reg.normal, others):
            kept.remove(reg)
    if regs:
        interior = _interior_lp([r.normal for r in kept], t.dim)
        if interior is None:
            raise EmptyCone("no strictly positive point for the regulators")
        if psd_check_exact(interior) != PsdVerdict.POSITIVE_DEFINITE:
            raise EmptyCone("interior point is not positive definite")
    else:
        interior = SymMatrix.identity(t.dim)
    return SecondaryCone(t, regs, tuple(kept), interior)


class MembershipKind(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Membership:
    kind: MembershipKind
    zeros: tuple = ()


def cone_membership(c: SecondaryCone, q: SymMatrix) -> Membership:
    """Locate q relative to the closed cone using the facet regulators."""
    qr = q.to_fractions()
    zeros = []
    for f in c.facets:
        v = f.value(qr)
        if v < 0:
            return Membership(MembershipKind.OUTSIDE)
        if v == 0:
            zeros.append(f)
    if zeros:
        return Membership(MembershipKind.BOUNDARY, tuple(zeros))
    return Membership(MembershipKind.INTERIOR)
