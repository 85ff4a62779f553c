import json
import math
import random
from dataclasses import replace
from fractions import Fraction

import pytest

from latcov import catalog, certify, cones, delone, maxdet
from latcov.certify import (
    FacetStatus,
    GapCertificate,
    IsolationKind,
    VerdictKind,
    boundary_certificates,
    br_gradient,
    br_hessian,
    isolated_test,
    isolation_search,
    local_opt_covering,
    local_opt_packcov,
    log_bounds,
    rationalize_and_verify,
    verify_certificate,
)
from latcov.delone import br_matrix, delone_subdivision, inhomogeneous_min
from latcov.errors import MuNotOne, NumericalFailure, RoundingInfeasible
from latcov.forms import unit_ball_volume
from latcov.linalg import SymMatrix, det_exact, rat, trace_inner, tri_pairs

F = Fraction

HEX = SymMatrix.from_rows([[2, -1], [-1, 2]])
HEX1 = HEX.scale(F(3, 2))        # scaled to inhomogeneous minimum 1
TWO_I = SymMatrix.identity(2).scale(F(2))   # square lattice at mu = 1


def principal_cone(d):
    tri = delone.principal_triangulation(d)
    return tri, cones.secondary_cone(tri)


def solved(kind, d, tol=1e-8):
    _, cone = principal_cone(d)
    build = maxdet.build_covering_problem if kind == "covering" \
        else maxdet.build_packcov_problem
    p = build(cone)
    r = maxdet.solve(p, tol=tol)
    return p, r, rationalize_and_verify(r, p)


def lagrange_coeffs(f, deg):
    """Monomial coefficients of a polynomial h -> f(h) of degree <= deg,
    by solving the Vandermonde system exactly; independent of the
    module's own interpolation helper."""
    nodes = [F(t) for t in range(deg + 1)]
    vals = [rat(f(t)) for t in nodes]
    n = deg + 1
    a = [[nodes[i] ** j for j in range(n)] + [vals[i]] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col])
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [e * inv for e in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                fac = a[r][col]
                a[r] = [e - fac * p for e, p in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def random_pd_form(rng, d):
    b = [[rng.randint(-2, 2) for _ in range(d)] for _ in range(d)]
    rows = [[F(sum(b[k][i] * b[k][j] for k in range(d))) +
             (2 if i == j else 0) for j in range(d)] for i in range(d)]
    return SymMatrix.from_rows(rows)


def random_direction(rng, d):
    ent = {}
    for i in range(d):
        for j in range(i + 1):
            ent[(i, j)] = F(rng.randint(-3, 3))
    return SymMatrix.from_entry_fn(d, lambda i, j: ent[(max(i, j), min(i, j))])


# ---------------------------------------------------------------------------
# interval logarithms
# ---------------------------------------------------------------------------


class TestLogBounds:
    def test_encloses_float_log(self):
        rng = random.Random(3)
        for _ in range(50):
            x = F(rng.randint(1, 10 ** 9), rng.randint(1, 10 ** 9))
            lo, hi = log_bounds(x)
            assert lo <= hi
            assert float(lo) <= math.log(x) + 1e-12
            assert float(hi) >= math.log(x) - 1e-12
            assert hi - lo < F(1, 2 ** 100)

    def test_value_one(self):
        lo, hi = log_bounds(F(1))
        assert lo <= 0 <= hi
        assert hi - lo < F(1, 2 ** 100)

    def test_extreme_magnitudes(self):
        for x in (F(1, 10 ** 40), F(10 ** 40), F(3, 2) ** 200):
            lo, hi = log_bounds(x)
            assert lo <= hi and hi - lo < F(1, 2 ** 90)
            assert abs(float(lo) - math.log(x)) < 1e-9 * abs(math.log(x))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            log_bounds(F(0))
        with pytest.raises(ValueError):
            log_bounds(F(-3, 7))


# ---------------------------------------------------------------------------
# rational certificates
# ---------------------------------------------------------------------------


class TestRationalize:
    def test_covering_d2_sandwiches_true_value(self):
        # the optimum over this cone has det 27/4 at mu = 1
        _, _, cert = solved("covering", 2)
        assert cert.gap <= F(1, 10 ** 6)
        lo, hi = log_bounds(F(27, 4))
        assert cert.lower <= -hi
        assert cert.upper >= -lo
        theta_lo = math.exp(float(cert.lower) / 2) * unit_ball_volume(2)
        theta_hi = math.exp(float(cert.upper) / 2) * unit_ball_volume(2)
        assert theta_lo <= 1.209199 + 1e-5
        assert theta_hi >= 1.209199 - 1e-5

    def test_packcov_d2_sandwiches_exact_value(self):
        # optimal homogeneous minimum at mu <= 1 is exactly 3
        _, _, cert = solved("packcov", 2)
        assert cert.lower <= -3 <= cert.upper
        assert cert.gap <= F(1, 10 ** 6)
        gamma = 2 / math.sqrt(3)
        assert 2 / math.sqrt(-float(cert.lower)) >= gamma - 1e-6
        assert 2 / math.sqrt(-float(cert.upper)) <= gamma + 1e-6

    def test_certificate_reverifies(self):
        p, _, cert = solved("covering", 2)
        verify_certificate(cert, p)  # must not raise

    def test_covering_d3_certificate(self):
        _, _, cert = solved("covering", 3)
        assert cert.gap <= F(1, 10 ** 6)
        theta = math.exp(float(cert.upper) / 2) * unit_ball_volume(3)
        assert theta == pytest.approx(1.463505, abs=1e-5)

    def test_corrupted_solver_dual_is_never_trusted(self):
        # zeroing the float dual forces the central-dual fallback; the
        # result must still be a verified sandwich, or an honest failure
        p, r, _ = solved("covering", 2)
        bad = replace(r, dual=maxdet.DualPoint(
            r.dual.W * 0.0, tuple(z * 0.0 for z in r.dual.Z)))
        cert = rationalize_and_verify(bad, p)
        lo, hi = log_bounds(F(27, 4))
        assert cert.lower <= -hi and cert.upper >= -lo

    def test_tiny_den_limit_fails_honestly(self):
        p, r, _ = solved("covering", 2)
        with pytest.raises(RoundingInfeasible):
            rationalize_and_verify(r, p, den_limit=1)
        with pytest.raises(RoundingInfeasible):
            rationalize_and_verify(r, p, den_limit=0)

    def test_json_shape(self):
        _, _, cert = solved("covering", 2)
        blob = json.loads(json.dumps(cert.to_json()))
        assert set(blob) == {"kind", "x", "w", "z", "lower", "upper"}
        assert blob["kind"] == "covering"
        assert F(blob["lower"]) == cert.lower
        assert len(blob["z"]) == len(cert.Z_rat)


class TestVerifyRejectsTampering:
    def test_bumped_lower_bound(self):
        p, _, cert = solved("covering", 2)
        with pytest.raises(ValueError):
            verify_certificate(replace(cert, lower=cert.upper + 1), p)

    def test_lowered_upper_bound(self):
        p, _, cert = solved("covering", 2)
        with pytest.raises(ValueError):
            verify_certificate(replace(cert, upper=cert.lower - 1), p)

    def test_perturbed_dual_matrix(self):
        p, _, cert = solved("covering", 2)
        bump = SymMatrix.from_entry_fn(
            cert.W_rat.dim,
            lambda i, j: rat(cert.W_rat[i, j]) +
            (F(1, 997) if (i, j) == (0, 0) else F(0)))
        with pytest.raises(ValueError):
            verify_certificate(replace(cert, W_rat=bump), p)

    def test_fuzzed_data_never_sandwiches_wrongly(self):
        # soundness: whatever data verify_certificate accepts, the stored
        # bounds must still bracket the true optimal value
        p, _, cert = solved("covering", 2)
        lo, hi = log_bounds(F(27, 4))
        rng = random.Random(17)
        accepted = 0
        for _ in range(40):
            which = rng.randrange(3)
            x, w, zs = cert.x_rat, cert.W_rat, cert.Z_rat
            eps = F(rng.randint(-50, 50), 10 ** rng.randint(6, 10))
            if which == 0:
                k = rng.randrange(len(x))
                x = x[:k] + (x[k] + eps,) + x[k + 1:]
            elif which == 1:
                w = SymMatrix.from_entry_fn(
                    w.dim, lambda i, j, e=eps: rat(cert.W_rat[i, j]) +
                    (e if i == j == 0 else F(0)))
            else:
                k = rng.randrange(len(zs))
                old = zs[k]
                pert = SymMatrix.from_entry_fn(
                    old.dim, lambda i, j, e=eps, o=old: rat(o[i, j]) +
                    (e if i == j == 0 else F(0)))
                zs = zs[:k] + (pert,) + zs[k + 1:]
            # recompute the bounds the same way production does
            try:
                g_x = certify._affine_value(p.g_coeffs, x)
                cx = sum(ci * xi for ci, xi in zip(p.c, x))
                lg_lo, _ = log_bounds(det_exact(g_x))
                lw_lo, _ = log_bounds(det_exact(w))
                s = (F(p.m) - trace_inner(p.g_coeffs[0], w) -
                     sum(trace_inner(blk.coeffs[0], z)
                         for blk, z in zip(p.f_blocks, zs)))
                cand = GapCertificate(p.kind, x, w, zs, lw_lo + s, cx - lg_lo)
                verify_certificate(cand, p)
            except ValueError:
                continue
            accepted += 1
            assert cand.lower <= -lo
            assert cand.upper >= -hi
        assert accepted  # the fuzz must exercise the accepting path too


# ---------------------------------------------------------------------------
# circumradius surface derivatives
# ---------------------------------------------------------------------------


class TestBrDerivatives:
    def test_gradient_matches_interpolated_linear_term(self):
        rng = random.Random(29)
        for d in (2, 3):
            tri = delone.principal_triangulation(d)
            for s in tri.classes:
                for _ in range(3):
                    q = random_pd_form(rng, d)
                    e = random_direction(rng, d)
                    coeffs = lagrange_coeffs(
                        lambda t: det_exact(br_matrix(s, q + e.scale(t))),
                        d + 1)
                    assert coeffs[1] == trace_inner(br_gradient(s, q), e)

    def test_hessian_consistent_with_gradient(self):
        rng = random.Random(31)
        for d in (2, 3):
            tri = delone.principal_triangulation(d)
            s = tri.classes[0]
            pairs = tri_pairs(d)
            for _ in range(3):
                q = random_pd_form(rng, d)
                e1 = random_direction(rng, d)
                e2 = random_direction(rng, d)
                h = br_hessian(s, q)
                c1 = [rat(e1[i, j]) for i, j in pairs]
                c2 = [rat(e2[i, j]) for i, j in pairs]
                quad = sum(c1[a] * h[a][b] * c2[b]
                           for a in range(len(pairs))
                           for b in range(len(pairs)))
                coeffs = lagrange_coeffs(
                    lambda t: trace_inner(
                        br_gradient(s, q + e2.scale(t)), e1), d)
                assert coeffs[1] == quad

    def test_gradient_ignores_translation(self):
        tri = delone.principal_triangulation(2)
        s = tri.classes[0]
        q = HEX1
        assert br_gradient(s.shifted((3, -2)), q) == br_gradient(s, q)

    def test_hex_tight_simplices_have_zero_det_nonzero_gradient(self):
        tri, _ = delone_subdivision(HEX1)
        assert inhomogeneous_min(tri, HEX1) == 1
        for s in tri.classes:
            assert det_exact(br_matrix(s, HEX1)) == 0
            g = br_gradient(s, HEX1)
            assert any(rat(g[i, j]) for i, j in tri_pairs(2))


# ---------------------------------------------------------------------------
# local optimality
# ---------------------------------------------------------------------------


class TestLocalOptCovering:
    def test_hexagonal_is_interior_local_opt(self):
        v = local_opt_covering(HEX1)
        assert v.kind is VerdictKind.INTERIOR_LOCAL_OPT
        assert v.exact
        assert len(v.witness) == 1
        assert v.witness[0].holds()

    def test_square_lattice_is_refuted(self):
        v = local_opt_covering(TWO_I)
        assert v.kind is VerdictKind.NOT_LOCAL_OPT
        assert v.exact

    def test_requires_unit_inhomogeneous_minimum(self):
        with pytest.raises(MuNotOne):
            local_opt_covering(HEX)

    def test_numeric_path_rescales_and_agrees(self):
        v = local_opt_covering(HEX1.scale(F(7, 2)), numeric_tol=1e-9)
        assert v.kind is VerdictKind.INTERIOR_LOCAL_OPT
        assert not v.exact


class TestLocalOptPackcov:
    def test_hexagonal_is_interior_local_opt(self):
        v = local_opt_packcov(HEX1)
        assert v.kind is VerdictKind.INTERIOR_LOCAL_OPT
        assert v.exact
        assert all(w.holds() for w in v.witness)

    def test_square_lattice_refuted_with_better_point(self):
        v = local_opt_packcov(TWO_I)
        assert v.kind is VerdictKind.NOT_LOCAL_OPT
        assert v.witness, "wall refutation should exhibit a better form"
        better = v.witness[0]
        assert better.packing_value > 2
        assert better.form.dim == 2

    def test_ho4_numeric_interior_local_opt(self):
        v = local_opt_packcov(catalog.ho4(), numeric_tol=1e-9)
        assert v.kind is VerdictKind.INTERIOR_LOCAL_OPT
        assert not v.exact


# ---------------------------------------------------------------------------
# isolation
# ---------------------------------------------------------------------------


class TestIsolationSearch:
    def test_witness_found_in_open_pattern(self):
        kind, coords = isolation_search(
            [(F(1), F(0))], [(F(0), F(1))],
            [((F(1), F(0)), (F(0), F(1)))], 2)
        assert kind is IsolationKind.NOT_ISOLATED
        assert coords[1] > 0

    def test_relaxation_pins_to_zero(self):
        kind, coords = isolation_search(
            [(F(1), F(0)), (F(-1), F(0)), (F(0), F(-1))],
            [(F(0), F(1))], [((F(1), F(0)), (F(0), F(1)))], 2)
        assert kind is IsolationKind.ISOLATED
        assert coords is None

    def test_forced_active_rows_prune_witness(self):
        # without forcing, s = (1, 0) is a witness; forcing the gradient
        # row active adds its kernel row s_1 = 0 and pins S to zero
        rows = ([(F(1), F(0))], [(F(0), F(1))], [((F(1), F(0)),)])
        kind, _ = isolation_search(*rows, 2)
        assert kind is IsolationKind.NOT_ISOLATED
        kind, _ = isolation_search(*rows, 2, g_active=(0,))
        assert kind is IsolationKind.ISOLATED


class TestIsolatedForms:
    def test_hexagonal_isolated(self):
        r = isolated_test(HEX1)
        assert r.kind is IsolationKind.ISOLATED
        assert r.exact

    def test_wall_form_undecided(self):
        r = isolated_test(TWO_I)
        assert r.kind is IsolationKind.UNDECIDED

    def test_ho4_isolated_numeric(self):
        r = isolated_test(catalog.ho4(), numeric_tol=1e-9)
        assert r.kind is IsolationKind.ISOLATED
        assert not r.exact

    @pytest.mark.extended
    def test_ho5_isolated_numeric(self):
        r = isolated_test(catalog.ho5(), numeric_tol=1e-9)
        assert r.kind is IsolationKind.ISOLATED
        assert not r.exact


# ---------------------------------------------------------------------------
# facet certificates
# ---------------------------------------------------------------------------


class TestBoundaryCertificates:
    def test_hexagonal_optimum_off_every_wall(self):
        _, cone = principal_cone(2)
        p = maxdet.build_covering_problem(cone)
        cert = rationalize_and_verify(maxdet.solve(p, tol=1e-8), p)
        bc = boundary_certificates(cone, cert)
        assert len(bc) == len(cone.facets) == 3
        assert all(c.status is FacetStatus.OFF_FACET for c in bc)
        assert all(c.bounds is not None for c in bc)
        assert {c.facet for c in bc} == set(cone.facets)

    def test_status_thresholds(self):
        _, cone = principal_cone(2)
        p = maxdet.build_covering_problem(cone)
        cert = rationalize_and_verify(maxdet.solve(p, tol=1e-8), p)
        bc = boundary_certificates(cone, cert)
        flip_lo = min(c.bounds[0] for c in bc)
        flip_hi = max(c.bounds[1] for c in bc)
        # a best value certified below every flipped window: walls prove off
        # a best window straddling the flipped values: no claim either way
        wide = replace(cert, lower=flip_lo - 1, upper=flip_hi + 1)
        assert all(c.status is FacetStatus.UNKNOWN
                   for c in boundary_certificates(cone, wide))
        # a best value certified above the flipped optima: on the wall
        high = replace(cert, lower=flip_hi + 1, upper=flip_hi + 2)
        assert all(c.status is FacetStatus.ON_FACET
                   for c in boundary_certificates(cone, high))

    def test_solver_failure_reports_unknown(self, monkeypatch):
        _, cone = principal_cone(2)
        p = maxdet.build_covering_problem(cone)
        cert = rationalize_and_verify(maxdet.solve(p, tol=1e-8), p)

        def boom(*a, **k):
            raise NumericalFailure("forced failure")

        monkeypatch.setattr(maxdet, "solve", boom)
        bc = boundary_certificates(cone, cert)
        assert all(c.status is FacetStatus.UNKNOWN for c in bc)
        assert all(c.bounds is None for c in bc)
