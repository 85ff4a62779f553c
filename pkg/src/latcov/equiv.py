"""Equivalence of triangulations under the integer linear group.

Two periodic triangulations are equivalent when a unimodular integer
matrix maps the translation classes of one onto the other. Candidate maps
are generated from vertex-difference bases: any equivalence must send a
fixed simplex of the first triangulation to some simplex of the second,
so it is determined by the images of d difference vectors. Fingerprints
built from cheap invariants short-circuit most non-equivalent pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Optional

from .delone import Triangulation, facet_incidences, validate_triangulation, vec_sub
from .errors import DimMismatch
from .linalg import det_exact, det_exact_rows, inverse_exact_rows, rat


def apply_unimodular(u_rows, t: Triangulation) -> Triangulation:
    """Image of t under v -> U v, classes renormalized."""
    d = t.dim
    return Triangulation.from_simplices(d, [
        [tuple(sum(u_rows[i][k] * v[k] for k in range(d)) for i in range(d))
         for v in s.vertices]
        for s in t.classes])


def _difference_basis(vertices, order):
    base = vertices[order[0]]
    return [vec_sub(vertices[order[k]], base) for k in range(1, len(order))]


def equivalent(t1: Triangulation, t2: Triangulation) -> Optional[tuple]:
    """A unimodular matrix U (tuple of rows) with U . t1 = t2, or None.

    The first class of t1 must map to a class of t2 of the same volume;
    every ordered vertex-difference basis of such a class yields one
    candidate U = B2 B1^{-1}, kept when it is integral with determinant
    +-1 and maps the class set bijectively.
    """
    if t1.dim != t2.dim:
        raise DimMismatch("triangulations of different dimensions")
    d = t1.dim
    if len(t1.classes) != len(t2.classes):
        return None
    if sorted(s.volume_det() for s in t1.classes) != \
            sorted(s.volume_det() for s in t2.classes):
        return None

    # anchor on a class whose volume is rarest in t2
    vol_count: dict = {}
    for s in t2.classes:
        vol_count[s.volume_det()] = vol_count.get(s.volume_det(), 0) + 1
    sigma = min(t1.classes, key=lambda s: (vol_count[s.volume_det()], s.vertices))
    b1 = _difference_basis(sigma.vertices, tuple(range(d + 1)))
    # columns of B1 are the difference vectors
    b1_cols = [[rat(b1[j][i]) for j in range(d)] for i in range(d)]
    b1_inv = inverse_exact_rows(b1_cols)

    classes2 = set(t2.classes)
    want = sigma.volume_det()
    for tau in t2.classes:
        if tau.volume_det() != want:
            continue
        for order in permutations(range(d + 1)):
            b2 = _difference_basis(tau.vertices, order)
            u = [[sum(b2[k][i] * b1_inv[k][j] for k in range(d))
                  for j in range(d)] for i in range(d)]
            if any(e.denominator != 1 for row in u for e in row):
                continue
            u_rows = tuple(tuple(int(e) for e in row) for row in u)
            if abs(det_exact_rows(u_rows)) != 1:
                continue
            image = apply_unimodular(u_rows, t1)
            if set(image.classes) == classes2:
                return u_rows
    return None


@dataclass(frozen=True)
class CanonicalKey:
    invariant_vector: tuple
    certificate: Optional[tuple] = None

    def matches(self, other: "CanonicalKey") -> bool:
        return self.invariant_vector == other.invariant_vector


def canonical_key(t: Triangulation) -> CanonicalKey:
    """Fingerprint invariant under unimodular maps and translations.

    Equal fingerprints are necessary for equivalence, so the full search
    only runs inside a fingerprint bucket. Components: class count, the
    per-class volume with sorted facet-neighbor volumes, the multiset of
    wall relation types, and the determinant of the inertia form.
    """
    from . import bounds, cones

    validate_triangulation(t)
    inc = facet_incidences(t)
    vols = [s.volume_det() for s in t.classes]
    neighbor: dict = {}
    for _key, pairs in inc.items():
        (c1, k1, _), (c2, k2, _) = pairs
        neighbor.setdefault(c1, []).append(vols[c2])
        neighbor.setdefault(c2, []).append(vols[c1])
    per_class = tuple(sorted(
        (vols[c], tuple(sorted(neighbor[c]))) for c in range(len(t.classes))))
    wall_types = tuple(sorted(
        tuple(sorted(abs(a) for a in alpha))
        for _k, _pts, alpha, _n, _s1, _s2 in cones._pair_data(t)))
    det_f = rat(det_exact(bounds.inertia_form(t).F))
    vec = (t.dim, len(t.classes), per_class, wall_types,
           len(t.star_edges()), det_f)
    return CanonicalKey(vec)
