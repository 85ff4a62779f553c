import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latcov import delone
from latcov.delone import (
    Simplex,
    Triangulation,
    br_matrix,
    circumradius_sq,
    delone_subdivision,
    facet_incidences,
    inhomogeneous_min,
    principal_triangulation,
    validate_triangulation,
)
from latcov.errors import (
    ConeMembershipViolated,
    DegenerateSimplex,
    InvalidTriangulation,
    NonPositiveMu,
)
from latcov.forms import principal_form
from latcov.linalg import PsdVerdict, SymMatrix, psd_check_exact, rat


def hexagonal():
    return SymMatrix.from_rows([[2, -1], [-1, 2]])


def random_pd(rng, d, spread=2):
    b = [[rng.randint(-spread, spread) for _ in range(d)] for _ in range(d)]
    return SymMatrix.from_entry_fn(
        d, lambda i, j: sum(b[k][i] * b[k][j] for k in range(d)) + (3 if i == j else 0))


class TestTriangulationBasics:
    def test_normalization_dedups_translates(self):
        t = Triangulation.from_simplices(2, [
            [(0, 0), (1, 0), (1, 1)],
            [(5, 5), (6, 5), (6, 6)],
            [(0, 0), (0, 1), (1, 1)],
        ])
        assert len(t.classes) == 2

    def test_principal_class_counts(self):
        for d in range(1, 6):
            t = principal_triangulation(d)
            assert len(t.classes) == math.factorial(d)

    def test_principal_d1(self):
        t = principal_triangulation(1)
        assert t.classes == (Simplex.of([(0,), (1,)]),)

    def test_principal_d2_classes(self):
        t = principal_triangulation(2)
        assert set(t.classes) == {
            Simplex.of([(0, 0), (1, 0), (1, 1)]),
            Simplex.of([(0, 0), (0, 1), (1, 1)]),
        }

    def test_star_simplices_contain_origin(self):
        t = principal_triangulation(3)
        star = t.star_simplices()
        assert len(star) == 4 * len(t.classes)
        for s in star:
            assert (0, 0, 0) in s.vertices

    def test_star_edges_d2(self):
        t = principal_triangulation(2)
        assert set(t.star_edges()) == {(0, 1), (1, 0), (1, 1)}

    def test_json_roundtrip(self):
        t = principal_triangulation(3)
        assert Triangulation.from_json(t.to_json()) == t

    def test_volume_identity_fails_on_missing_class(self):
        t = principal_triangulation(2)
        broken = Triangulation(2, t.classes[:1])
        with pytest.raises(InvalidTriangulation):
            validate_triangulation(broken)

    def test_degenerate_class_rejected(self):
        flat = Triangulation(2, (Simplex.of([(0, 0), (1, 0), (2, 0)]),
                                 Simplex.of([(0, 0), (0, 1), (1, 1)])))
        with pytest.raises(InvalidTriangulation):
            validate_triangulation(flat)

    def test_facet_pairing_of_principal(self):
        # every facet class lies in exactly two simplices
        for d in (2, 3, 4):
            inc = facet_incidences(principal_triangulation(d))
            assert all(len(v) == 2 for v in inc.values())


class TestCircumradius:
    def test_right_triangle_identity(self):
        s = Simplex.of([(0, 0), (1, 0), (1, 1)])
        data = circumradius_sq(s, SymMatrix.identity(2))
        assert data.r2 == Fraction(1, 2)
        assert data.center == (Fraction(1, 2), Fraction(1, 2))

    def test_hexagonal_simplex(self):
        s = Simplex.of([(0, 0), (1, 0), (1, 1)])
        data = circumradius_sq(s, hexagonal())
        assert data.r2 == Fraction(2, 3)
        assert data.center == (Fraction(2, 3), Fraction(1, 3))

    def test_degenerate_raises(self):
        s = Simplex.of([(0, 0), (1, 0), (2, 0)])
        with pytest.raises(DegenerateSimplex):
            circumradius_sq(s, SymMatrix.identity(2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_center_is_equidistant(self, seed):
        rng = random.Random(seed)
        d = rng.choice([2, 3])
        q = random_pd(rng, d)
        s = next(iter(principal_triangulation(d).classes))
        data = circumradius_sq(s, q)
        v0 = s.vertices[0]
        for v in s.vertices:
            diff = tuple(rat(c) - rat(x) for c, x in zip(data.center, v))
            assert q.quad(diff) == data.r2


class TestBrMatrix:
    def test_entries_2d(self):
        # corner 4, border Q[w_i], body (w_i, w_j) for w = v_i - v_0
        q = SymMatrix.from_rows([[rat(3), rat(1)], [rat(1), rat(2)]])
        s = Simplex.of([(0, 0), (1, 0), (1, 1)])
        m = br_matrix(s, q)
        assert m[0, 0] == 4
        assert m[1, 0] == q.quad((1, 0)) == 3
        assert m[2, 0] == q.quad((1, 1)) == 7
        assert m[1, 1] == 3 and m[2, 2] == 7
        assert m[2, 1] == q.bilinear((1, 0), (1, 1)) == 4

    def test_psd_iff_radius_at_most_one(self):
        rng = random.Random(3)
        for _ in range(60):
            d = rng.choice([2, 3])
            q = random_pd(rng, d)
            s = rng.choice(principal_triangulation(d).classes)
            r2 = circumradius_sq(s, q).r2
            verdict = psd_check_exact(br_matrix(s, q))
            if r2 < 1:
                assert verdict == PsdVerdict.POSITIVE_DEFINITE
            elif r2 == 1:
                assert verdict == PsdVerdict.POSITIVE_SEMIDEFINITE_SINGULAR
            else:
                assert verdict == PsdVerdict.INDEFINITE

    def test_scaled_hexagonal_hits_radius_one(self):
        # (3/2) * hexagonal has circumradius exactly 1 on its simplices
        q = hexagonal().scale(Fraction(3, 2))
        s = Simplex.of([(0, 0), (1, 0), (1, 1)])
        assert circumradius_sq(s, q).r2 == 1
        assert psd_check_exact(br_matrix(s, q)) == PsdVerdict.POSITIVE_SEMIDEFINITE_SINGULAR


class TestSubdivision:
    def test_principal_form_is_interior(self):
        for d in (2, 3):
            tri, zeros = delone_subdivision(principal_form(d))
            assert tri == principal_triangulation(d)
            assert zeros == ()

    def test_identity_2d_on_wall(self):
        tri, zeros = delone_subdivision(SymMatrix.identity(2))
        assert len(tri.classes) == 2
        assert len(zeros) == 1
        n = zeros[0].normal
        # the vanishing wall is the sign of q_12
        assert n.lower in (((0,), (-1, 0)), ((0,), (1, 0)))

    def test_hexagonal_interior(self):
        tri, zeros = delone_subdivision(hexagonal())
        assert tri == principal_triangulation(2)
        assert zeros == ()

    def test_rejects_indefinite(self):
        with pytest.raises(NonPositiveMu):
            delone_subdivision(SymMatrix.from_rows([[1, 2], [2, 1]]))

    def test_float_input_is_exactified(self):
        tri, _ = delone_subdivision(SymMatrix.from_rows([[2.0, -0.5], [-0.5, 2.0]]))
        assert tri == principal_triangulation(2)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_walk_lands_in_closed_cone(self, seed):
        from latcov import cones

        rng = random.Random(seed)
        q = random_pd(rng, 3)
        tri, zeros = delone_subdivision(q)
        validate_triangulation(tri)
        for reg in cones.regulators_of(tri):
            assert reg.value(q.to_fractions()) >= 0
        for z in zeros:
            assert z.value(q.to_fractions()) == 0


class TestInhomogeneousMin:
    def test_unit_interval(self):
        assert inhomogeneous_min(principal_triangulation(1), SymMatrix.identity(1)) == Fraction(1, 4)

    def test_identity_2d(self):
        tri, _ = delone_subdivision(SymMatrix.identity(2))
        assert inhomogeneous_min(tri, SymMatrix.identity(2)) == Fraction(1, 2)

    def test_hexagonal(self):
        assert inhomogeneous_min(principal_triangulation(2), hexagonal()) == Fraction(2, 3)

    def test_principal_closed_form(self):
        # mu = d (d + 2) / 12 for the principal form
        for d in (1, 2, 3, 4):
            got = inhomogeneous_min(principal_triangulation(d), principal_form(d))
            assert got == Fraction(d * (d + 2), 12)

    def test_membership_guard(self):
        q = SymMatrix.from_rows([[1, 1], [1, 3]])  # q_12 > 0
        with pytest.raises(ConeMembershipViolated):
            inhomogeneous_min(principal_triangulation(2), q)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_scaling_covariance(self, seed):
        rng = random.Random(seed)
        q = random_pd(rng, 3)
        tri, _ = delone_subdivision(q)
        c = Fraction(rng.randint(1, 9), rng.randint(1, 9))
        assert inhomogeneous_min(tri, q.scale(c)) == c * inhomogeneous_min(tri, q)
