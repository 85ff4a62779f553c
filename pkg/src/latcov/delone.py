"""Periodic Delone triangulations of Z^d.

A triangulation is stored as the finite set of translation classes of its
d-simplices. Each class is normalized: the vertex list is translated so the
componentwise minimum is the zero vector and then sorted lexicographically.
Adjacency, stars, and edge classes are all derived from this data.

The subdivision of a concrete form is computed by walking the segment from
the principal form to the target and flipping across each wall crossed;
float inputs are first replaced by their exact binary rational value.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import (
    ConeMembershipViolated,
    DegenerateSimplex,
    DimMismatch,
    InvalidTriangulation,
    NonPositiveMu,
    WalkStalled,
)
from .linalg import (
    PsdVerdict,
    SymMatrix,
    det_exact_rows,
    psd_check_exact,
    rat,
    solve_exact,
    trace_inner,
)

Vertex = tuple


def vec_add(u: Vertex, v: Vertex) -> Vertex:
    return tuple(a + b for a, b in zip(u, v))


def vec_sub(u: Vertex, v: Vertex) -> Vertex:
    return tuple(a - b for a, b in zip(u, v))


def vec_neg(u: Vertex) -> Vertex:
    return tuple(-a for a in u)


def normalize_vertices(vertices) -> tuple[Vertex, ...]:
    """Canonical translation-class representative: componentwise-min vertex
    at the origin, vertex list sorted lexicographically."""
    vs = [tuple(v) for v in vertices]
    mins = tuple(min(v[k] for v in vs) for k in range(len(vs[0])))
    return tuple(sorted(vec_sub(v, mins) for v in vs))


@dataclass(frozen=True)
class Simplex:
    """d+1 integer points, affinely independent."""

    vertices: tuple

    @staticmethod
    def of(vertices) -> "Simplex":
        return Simplex(tuple(tuple(v) for v in vertices))

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def normalized(self) -> "Simplex":
        return Simplex(normalize_vertices(self.vertices))

    def shifted(self, t: Vertex) -> "Simplex":
        return Simplex(tuple(vec_add(v, t) for v in self.vertices))

    def edge_rows(self) -> list:
        v0 = self.vertices[0]
        return [list(vec_sub(v, v0)) for v in self.vertices[1:]]

    def volume_det(self) -> int:
        """|det| of the edge matrix; d! times the Euclidean volume."""
        return abs(int(det_exact_rows(self.edge_rows())))

    def facets(self):
        """(dropped index, remaining vertices) for each of the d+1 facets."""
        vs = self.vertices
        return [(k, vs[:k] + vs[k + 1:]) for k in range(len(vs))]


@dataclass(frozen=True)
class CircumData:
    r2: Fraction
    center: tuple


@dataclass(frozen=True)
class Triangulation:
    dim: int
    classes: tuple

    @staticmethod
    def from_simplices(dim: int, simplices) -> "Triangulation":
        seen = {}
        for s in simplices:
            if not isinstance(s, Simplex):
                s = Simplex.of(s)
            if len(s.vertices) != dim + 1:
                raise DimMismatch("simplex vertex count must be dim + 1")
            seen[s.normalized()] = None
        return Triangulation(dim, tuple(sorted(seen, key=lambda s: s.vertices)))

    def star_simplices(self):
        """All simplices having the origin as a vertex, (d+1) per class."""
        out = []
        for s in self.classes:
            for v in s.vertices:
                out.append(s.shifted(vec_neg(v)))
        return out

    def star_edges(self):
        """Translation classes of edges [0, v], one representative per +-pair."""
        seen = set()
        for s in self.classes:
            for a, b in itertools.combinations(s.vertices, 2):
                e = vec_sub(b, a)
                lead = next(x for x in e if x)
                seen.add(e if lead > 0 else vec_neg(e))
        return tuple(sorted(seen))

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "classes": [[list(v) for v in s.vertices] for s in self.classes]}

    @staticmethod
    def from_json(obj: dict) -> "Triangulation":
        return Triangulation.from_simplices(
            obj["dim"], [Simplex.of(vs) for vs in obj["classes"]])


@lru_cache(maxsize=16)
def facet_incidences(t: Triangulation):
    """Map canonical facet class -> list of (class index, dropped index, shift).

    `shift` translates the class simplex so that its facet coincides with
    the canonical representative.
    """
    out: dict = {}
    for ci, s in enumerate(t.classes):
        for k, rest in s.facets():
            mins = tuple(min(v[j] for v in rest) for j in range(t.dim))
            key = tuple(sorted(vec_sub(v, mins) for v in rest))
            out.setdefault(key, []).append((ci, k, vec_neg(mins)))
    return out


def validate_triangulation(t: Triangulation) -> None:
    """Check the classes tile space face-to-face under translation.

    Volume identity: the class volumes sum to 1 (i.e. sum |det| = d!).
    Facet identity: every facet class lies in exactly two simplices.
    """
    if not t.classes:
        raise InvalidTriangulation("no simplex classes")
    total = 0
    for s in t.classes:
        if len(set(s.vertices)) != t.dim + 1:
            raise InvalidTriangulation("repeated vertex in a simplex")
        det = s.volume_det()
        if det == 0:
            raise InvalidTriangulation("degenerate simplex class")
        total += det
    if total != math.factorial(t.dim):
        raise InvalidTriangulation(
            f"class volumes sum to {total}/{math.factorial(t.dim)} of a unit cell")
    for key, inc in facet_incidences(t).items():
        if len(inc) != 2:
            raise InvalidTriangulation(
                f"facet class {key} lies in {len(inc)} simplices, want 2")


def principal_triangulation(dim: int) -> Triangulation:
    """Delone triangulation of the principal form of the first kind.

    Simplices are the chains of partial sums of e_{pi(1)}, ..., e_{pi(d+1)}
    with e_{d+1} = -(e_1 + ... + e_d); there are d! translation classes.
    """
    basis = [tuple(1 if k == i else 0 for k in range(dim)) for i in range(dim)]
    basis.append(tuple(-1 for _ in range(dim)))
    simplices = []
    for perm in itertools.permutations(range(dim + 1)):
        acc = tuple(0 for _ in range(dim))
        verts = [acc]
        for idx in perm[:-1]:
            acc = vec_add(acc, basis[idx])
            verts.append(acc)
        simplices.append(verts)
    t = Triangulation.from_simplices(dim, simplices)
    validate_triangulation(t)
    return t


def circumradius_sq(s: Simplex, q: SymMatrix) -> CircumData:
    """Squared circumradius and circumcenter of a simplex under Q.

    The center c solves (v_i - v_0, c - v_0) = Q[v_i - v_0] / 2 in the
    bilinear form induced by Q; the squared radius is Q[c - v_0].
    """
    if not q.is_exact:
        raise DimMismatch("circumradius needs a rational form")
    v0 = s.vertices[0]
    diffs = [vec_sub(v, v0) for v in s.vertices[1:]]
    rows = [q.apply(u) for u in diffs]
    rhs = [rat(q.quad(u)) / 2 for u in diffs]
    try:
        c = solve_exact(rows, rhs)
    except Exception as e:
        raise DegenerateSimplex(f"affinely dependent vertices: {s.vertices}") from e
    r2 = rat(q.quad(c))
    center = tuple(ci + vi for ci, vi in zip(c, v0))
    return CircumData(r2, center)


def br_matrix(s: Simplex, q: SymMatrix) -> SymMatrix:
    """(d+1) x (d+1) matrix whose positive semidefiniteness says the
    circumradius of s under Q is at most 1.

    Corner 4, border Q[w_i], body (w_i, w_j), where w_i runs over the
    vertices translated so the first one sits at the origin.
    """
    v0 = s.vertices[0]
    w = [vec_sub(v, v0) for v in s.vertices[1:]]
    qw = [q.apply(u) for u in w]
    n = len(w)

    def entry(i, j):
        if i == 0 and j == 0:
            return rat(4) if q.is_exact else 4.0
        if j == 0:
            u = w[i - 1]
            return sum(a * b for a, b in zip(u, qw[i - 1]))
        return sum(a * b for a, b in zip(w[i - 1], qw[j - 1]))

    return SymMatrix.from_entry_fn(n + 1, entry)


def max_circumradius(t: Triangulation, q: SymMatrix) -> Fraction:
    return max(circumradius_sq(s, q).r2 for s in t.classes)


def inhomogeneous_min(t: Triangulation, q: SymMatrix) -> Fraction:
    """Largest squared circumradius over the simplex classes.

    This equals the inhomogeneous minimum of q when t refines Del(q); the
    membership of q in the closed secondary cone of t is checked first.
    """
    from . import cones

    qr = q.to_fractions()
    for reg in cones.regulators_of(t):
        if trace_inner(reg.normal, qr) < 0:
            raise ConeMembershipViolated(
                "form lies outside the closed secondary cone")
    return max_circumradius(t, qr)


# ---------------------------------------------------------------------------
# segment walk
# ---------------------------------------------------------------------------


_WALK_MAX_FLIPS = 200000
_WALK_MAX_RETRIES = 48


def _segment_walk(q0: SymMatrix, q1: SymMatrix, trace=None):
    """Walk from Del(q0) = principal triangulation toward q1.

    Returns the triangulation whose closed cone contains q1, or None when a
    wall crossing is degenerate (two walls at one parameter). Linearity of
    the regulators along the segment makes each crossing a single exact
    root computation.
    """
    from . import cones

    tri = principal_triangulation(q0.dim)
    regs = cones.regulators_of(tri)
    tcur = Fraction(0)
    for _ in range(_WALK_MAX_FLIPS):
        best_t, best_reg, tie = None, None, False
        for reg in regs:
            a = trace_inner(reg.normal, q0)
            b = trace_inner(reg.normal, q1)
            if b >= 0:
                continue
            root = Fraction(a, a - b)
            if root <= tcur:
                # leaving through a wall we are sitting on: degenerate
                if root == tcur:
                    return None
                continue
            if root >= 1:
                continue
            if best_t is None or root < best_t:
                best_t, best_reg, tie = root, reg, False
            elif root == best_t:
                tie = True
        if best_t is None:
            if trace is not None:
                trace.append(tcur)
            return tri
        if tie:
            return None
        tri = cones.flip(tri, best_reg)
        regs = cones.regulators_of(tri)
        tcur = best_t
        if trace is not None:
            trace.append(tcur)
    raise WalkStalled("wall crossing budget exhausted")


def delone_subdivision(q: SymMatrix):
    """Delone subdivision of a positive definite form.

    Returns (triangulation, vanishing regulators): a triangulation refining
    Del(q) together with the regulators of it that vanish at q. The list is
    empty exactly when Del(q) is the triangulation itself.

    Degenerate wall crossings are resolved by retrying with the target
    nudged by eps = 1/2^j times a seeded random symmetric direction (a
    shift along the segment itself would leave any tie in place), and
    re-verifying that the true target lies in the final closed cone.
    """
    from . import cones

    qr = q.to_fractions()
    if psd_check_exact(qr) != PsdVerdict.POSITIVE_DEFINITE:
        raise NonPositiveMu("form must be positive definite")
    q0 = principal_form_cached(qr.dim)
    scale = max(rat(qr[i, i]) for i in range(qr.dim))
    for j in range(_WALK_MAX_RETRIES):
        if j == 0:
            target = qr
        else:
            rng = random.Random(j * 9176 + qr.dim)
            pert = SymMatrix.from_entry_fn(
                qr.dim,
                lambda i, k: Fraction(rng.randint(1, 64) if i == k
                                      else rng.randint(-64, 64), 64))
            target = qr + pert.scale(scale * Fraction(1, 2 ** j))
            if psd_check_exact(target) != PsdVerdict.POSITIVE_DEFINITE:
                continue
        tri = _segment_walk(q0, target)
        if tri is None:
            continue
        regs = cones.regulators_of(tri)
        vals = [trace_inner(reg.normal, qr) for reg in regs]
        if any(v < 0 for v in vals):
            continue  # perturbation overshot a wall; retry smaller
        zeros = tuple(r for r, v in zip(regs, vals) if v == 0)
        return tri, zeros
    raise WalkStalled("could not resolve degenerate crossings")


@lru_cache(maxsize=None)
def principal_form_cached(dim: int) -> SymMatrix:
    from .forms import principal_form

    return principal_form(dim)
