"""Rational certificates and local-optimality tests.

The float solver in `maxdet` reports near-optimal points, but the claims we
ultimately want (this form is a covering optimum on its cone, the optimum
lies off every wall, the form is an isolated local optimum) are exact
statements, so everything here runs in rational arithmetic:

* `rationalize_and_verify` rounds a solver result to rationals, repairs the
  dual equality constraints exactly, and returns two rational numbers that
  sandwich the optimum. Logarithms are enclosed by a software interval log
  with outward dyadic rounding; all other steps are exact.
* `boundary_certificates` re-solves each facet's flipped-halfspace problem
  and turns the bound comparisons into on/off-facet verdicts.
* `local_opt_covering` / `local_opt_packcov` decide local optimality through
  the normal-cone intersection criteria: the inverse form (covering) or the
  shortest-vector normals (packing-covering) must admit an exact nonnegative
  combination of circumradius-surface gradients, plus facet normals when the
  form sits on walls of the secondary fan.
* `isolated_test` searches for a flat direction along which a
  packing-covering optimum could slide, using exact gradients and Hessians
  of the circumradius surfaces.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from . import cones as _cones
from . import maxdet as _maxdet
from .cones import SecondaryCone, cone_membership, secondary_cone
from .delone import (Simplex, br_matrix, circumradius_sq, delone_subdivision,
                     inhomogeneous_min, vec_sub)
from .errors import (DegenerateSimplex, LatcovError, LimitReached, MuNotOne,
                     RepairSingular, RoundingInfeasible)
from .forms import lambda_min, short_vectors
from .linalg import (EQUAL, GREATER_EQ, LESS_EQ, LinProgram, LpStatus,
                     PsdVerdict, SymMatrix, det_exact, inverse_exact,
                     kernel_basis, lp_solve_exact, primitive_scale,
                     psd_check_exact, rat, solve_exact, to_coordinate_normal,
                     trace_inner, tri_pairs)

# ---------------------------------------------------------------------------
# rational interval logarithm
# ---------------------------------------------------------------------------

_LOG_PREC = 128  # dyadic bits kept between interval steps


def _round_down(x: Fraction, prec: int = _LOG_PREC) -> Fraction:
    return Fraction((x.numerator << prec) // x.denominator, 1 << prec)


def _round_up(x: Fraction, prec: int = _LOG_PREC) -> Fraction:
    return Fraction(-(((-x.numerator) << prec) // x.denominator), 1 << prec)


def _atanh_partial(u: Fraction, rounding, terms: int):
    """Directed-rounded partial sum of atanh's odd series at u >= 0.

    Returns (sum, power) where power is the rounded u^(2 terms + 1) needed
    for the tail bound. All terms are nonnegative, so rounding every
    intermediate in one direction bounds the true partial sum in that
    direction.
    """
    acc = Fraction(0)
    upow = rounding(u)
    usq = rounding(u * u)
    for j in range(terms):
        acc = rounding(acc + rounding(upow / (2 * j + 1)))
        upow = rounding(upow * usq)
    return acc, upow


def _atanh_bounds(u: Fraction, terms: int) -> tuple[Fraction, Fraction]:
    """Enclosure of atanh(u) for |u| < 1/2; geometric tail bound."""
    if u < 0:
        lo, hi = _atanh_bounds(-u, terms)
        return -hi, -lo
    lo, _ = _atanh_partial(u, _round_down, terms)
    hi, upow = _atanh_partial(u, _round_up, terms)
    usq_hi = _round_up(u * u)
    tail = _round_up(upow / ((2 * terms + 1) * (1 - usq_hi)))
    return lo, hi + tail


@lru_cache(maxsize=1)
def _ln2_bounds() -> tuple[Fraction, Fraction]:
    lo, hi = _atanh_bounds(Fraction(1, 3), terms=44)
    return 2 * lo, 2 * hi


def log_bounds(x) -> tuple[Fraction, Fraction]:
    """Rational lo <= ln(x) <= hi for rational x > 0.

    Argument reduction x = 2^k y with y in [3/4, 3/2), then
    ln y = 2 atanh((y-1)/(y+1)) with |u| <= 1/5, summed with outward
    dyadic rounding. The enclosure width is far below 2^-100, which is
    negligible against the duality gaps it wraps.
    """
    x = rat(x)
    if x <= 0:
        raise ValueError("log_bounds needs a positive argument")
    k = x.numerator.bit_length() - x.denominator.bit_length()
    y = x / Fraction(2) ** k
    if y < Fraction(3, 4):
        k -= 1
        y = 2 * y
    elif y >= Fraction(3, 2):
        k += 1
        y = y / 2
    alo, ahi = _atanh_bounds((y - 1) / (y + 1), terms=32)
    l2lo, l2hi = _ln2_bounds()
    if k >= 0:
        klo, khi = k * l2lo, k * l2hi
    else:
        klo, khi = k * l2hi, k * l2lo
    return _round_down(klo + 2 * alo), _round_up(khi + 2 * ahi)


# ---------------------------------------------------------------------------
# duality-gap certificates
# ---------------------------------------------------------------------------


def _affine_value(coeffs, x) -> SymMatrix:
    """coeffs[0] + sum x_i coeffs[i+1], exactly."""
    acc = coeffs[0].to_fractions()
    for xi, m in zip(x, coeffs[1:]):
        if xi:
            acc = acc + m.scale(xi)
    return acc


def _is_psd(m: SymMatrix) -> bool:
    return psd_check_exact(m) != PsdVerdict.INDEFINITE


@dataclass(frozen=True)
class GapCertificate:
    """Rational primal/dual pair with verified bounds  lower <= p* <= upper.

    The pair need not be optimal or centered; feasibility plus the exact
    dual equalities are all that weak duality requires, so each bound is a
    theorem once `verify_certificate` passes.
    """

    kind: str        # "covering" | "packcov"
    x_rat: tuple
    W_rat: SymMatrix
    Z_rat: tuple     # per F block, same order as the problem
    lower: Fraction
    upper: Fraction

    @property
    def gap(self) -> Fraction:
        return self.upper - self.lower

    def form(self, dim: int) -> SymMatrix:
        return _maxdet.unpack_form(self.x_rat[:dim * (dim + 1) // 2], dim)

    def to_json(self) -> dict:
        def mat(s):
            return [[str(e) for e in row] for row in s.lower]
        return {"kind": self.kind,
                "x": [str(e) for e in self.x_rat],
                "w": mat(self.W_rat),
                "z": [mat(z) for z in self.Z_rat],
                "lower": str(self.lower),
                "upper": str(self.upper)}


def verify_certificate(cert: GapCertificate, p: _maxdet.MaxdetProblem) -> None:
    """Exact re-check of every certificate invariant; raises ValueError.

    Confirms primal strict/weak cone feasibility, the dual equality
    constraints, dual cone feasibility, and that the stored bounds are
    implied by the stored data (with fresh interval logs)."""
    g_x = _affine_value(p.g_coeffs, cert.x_rat)
    if psd_check_exact(g_x) != PsdVerdict.POSITIVE_DEFINITE:
        raise ValueError("certificate primal leaves the open PD cone")
    for blk, z in zip(p.f_blocks, cert.Z_rat):
        if not _is_psd(_affine_value(blk.coeffs, cert.x_rat)):
            raise ValueError("certificate primal violates an F block")
        if not _is_psd(z):
            raise ValueError("certificate dual Z block not PSD")
    if psd_check_exact(cert.W_rat) != PsdVerdict.POSITIVE_DEFINITE:
        raise ValueError("certificate dual W not positive definite")
    for v in range(1, p.nvars + 1):
        tot = trace_inner(p.g_coeffs[v], cert.W_rat)
        for blk, z in zip(p.f_blocks, cert.Z_rat):
            tot += trace_inner(blk.coeffs[v], z)
        if tot != p.c[v - 1]:
            raise ValueError("dual equality constraint violated")
    cx = sum(ci * xi for ci, xi in zip(p.c, cert.x_rat))
    lg_lo, lg_hi = log_bounds(det_exact(g_x))
    if cert.upper < cx - lg_lo:
        raise ValueError("stored upper bound below the primal value")
    lw_lo, _ = log_bounds(det_exact(cert.W_rat))
    s = (Fraction(p.m) - trace_inner(p.g_coeffs[0], cert.W_rat)
         - sum(trace_inner(blk.coeffs[0], z)
               for blk, z in zip(p.f_blocks, cert.Z_rat)))
    if cert.lower > lw_lo + s:
        raise ValueError("stored lower bound above the dual value")
    if cert.lower > cert.upper:
        raise ValueError("bounds are crossed")


def _dual_residual(p, w: SymMatrix, z_blocks: list) -> list:
    out = []
    for v in range(1, p.nvars + 1):
        tot = trace_inner(p.g_coeffs[v], w)
        for blk, z in zip(p.f_blocks, z_blocks):
            tot += trace_inner(blk.coeffs[v], z)
        out.append(p.c[v - 1] - tot)
    return out


def _greedy_columns(n: int, cols: list, strict_rank: bool):
    """Greedy exact elimination picking n independent columns; each item
    of cols is (key, priority, column). The priority breaks ties toward
    columns whose dual coordinate has room to move, but rank decisions
    are exact. Returns the chosen (key, column) list or None; raises
    RepairSingular instead when strict_rank is set."""
    chosen: list = []
    reduced: list = []  # (pivot row, reduced column)
    remaining = list(cols)
    while len(chosen) < n:
        best = None
        for item in remaining:
            key, priority, col = item
            work = list(col)
            for prow, pcol in reduced:
                if work[prow]:
                    f = work[prow] / pcol[prow]
                    for r in range(n):
                        work[r] -= f * pcol[r]
            score = max(abs(e) for e in work)
            if score and (best is None or priority * score > best[0]):
                best = (priority * score, item, work)
        if best is None:
            if strict_rank:
                raise RepairSingular(
                    "dual equality map has rank below the variable count")
            return None
        _, item, work = best
        remaining.remove(item)
        chosen.append((item[0], item[2]))
        reduced.append((max(range(n), key=lambda r: abs(work[r])), work))
    return chosen


EPS_PRIORITY = Fraction(1, 10 ** 30)


def _coordinate_repair(p, resid: list, z_blocks: list) -> Optional[list]:
    """Correct single Z entries. The pivot priority is the diagonal
    headroom at each coordinate, so the correction prefers entries whose
    block can absorb it without leaving the PSD cone."""
    n = p.nvars
    cols = []
    for bi, blk in enumerate(p.f_blocks):
        z = z_blocks[bi]
        for (i, j) in tri_pairs(blk.size):
            col = tuple(rat(blk.coeffs[v][i, j]) if i == j
                        else 2 * rat(blk.coeffs[v][i, j])
                        for v in range(1, n + 1))
            if any(col):
                head = rat(z[i, i]) if i == j else min(rat(z[i, i]),
                                                       rat(z[j, j]))
                cols.append(((bi, i, j), max(head, Fraction(0)) + EPS_PRIORITY,
                             col))
    chosen = _greedy_columns(n, cols, strict_rank=True)
    rows = [[col[v] for _, col in chosen] for v in range(n)]
    delta = solve_exact(rows, resid)
    fixed = list(z_blocks)
    for ((bi, i, j), _), dk in zip(chosen, delta):
        if not dk:
            continue
        rows_b = fixed[bi].to_rows()
        rows_b[i][j] += dk
        if i != j:
            rows_b[j][i] += dk
        fixed[bi] = SymMatrix.from_rows(rows_b)
    return fixed


def _block_repair(p, resid: list, z_blocks: list) -> Optional[list]:
    """Correct whole blocks: Z_b -> (1 + alpha_b) Z_b. Scaling a PSD block
    stays PSD for alpha_b >= -1, so this absorbs residuals far larger
    than the smallest eigenvalues that defeat entrywise corrections."""
    if not all(_is_psd(z) for z in z_blocks):
        return None
    n = p.nvars
    cols = []
    for bi, blk in enumerate(p.f_blocks):
        z = z_blocks[bi]
        col = tuple(trace_inner(blk.coeffs[v], z) for v in range(1, n + 1))
        if any(col):
            norm = max(abs(e) for e in col)
            cols.append((bi, norm, col))
    chosen = _greedy_columns(n, cols, strict_rank=False)
    if chosen is None:
        return None
    rows = [[col[v] for _, col in chosen] for v in range(n)]
    alpha = solve_exact(rows, resid)
    if any(a <= -1 for a in alpha):
        return None
    fixed = list(z_blocks)
    for (bi, _), a in zip(chosen, alpha):
        if a:
            fixed[bi] = fixed[bi].scale(1 + a)
    return fixed


def _repair_dual(p, w: SymMatrix, z_blocks: list) -> Optional[list]:
    """Make the dual equalities hold exactly by correcting Z, trying the
    entrywise repair first and block scaling second; returns an exactly
    feasible PSD block list or None."""
    resid = _dual_residual(p, w, z_blocks)
    if not any(resid):
        return z_blocks if all(_is_psd(z) for z in z_blocks) else None
    for strategy in (_coordinate_repair, _block_repair):
        fixed = strategy(p, resid, z_blocks)
        if fixed is not None and all(_is_psd(z) for z in fixed):
            return fixed
    return None


def _round_sym(rows, dim: int, den_limit: int) -> SymMatrix:
    def ent(i, j):
        return Fraction((float(rows[i][j]) + float(rows[j][i])) / 2.0) \
            .limit_denominator(den_limit)
    return SymMatrix.from_entry_fn(dim, ent)


def _round_sym_exact(m: SymMatrix, den_limit: int) -> SymMatrix:
    return SymMatrix.from_entry_fn(
        m.dim, lambda i, j: rat(m[i, j]).limit_denominator(den_limit))


def rationalize_and_verify(r: _maxdet.SolveResult, p: _maxdet.MaxdetProblem,
                           den_limit: int = 10 ** 12) -> GapCertificate:
    """Turn a float solve into a rational certificate.

    The primal point is rounded by continued fractions to denominators at
    most den_limit and re-checked for strict feasibility. Dual candidates
    are tried in order: the solver's (W, Z) rounded the same way, the
    exactly reconstructed central dual W = G(x)^-1, Z = F(x)^-1 / t at the
    rounded primal (rounded to den_limit, then unrounded, whose exact
    denominators may exceed den_limit). Each candidate has its equality
    residual repaired exactly and is kept only if it stays PSD. Both
    bounds then follow from weak duality with interval logs.
    """
    if den_limit < 1:
        raise RoundingInfeasible("den_limit must be at least 1")
    x_rat = tuple(Fraction(xi).limit_denominator(den_limit) for xi in r.x)
    g_x = _affine_value(p.g_coeffs, x_rat)
    if psd_check_exact(g_x) != PsdVerdict.POSITIVE_DEFINITE:
        raise RoundingInfeasible(
            "rounded primal leaves the open PD cone; increase den_limit")
    f_x = [_affine_value(blk.coeffs, x_rat) for blk in p.f_blocks]
    if not all(_is_psd(f) for f in f_x):
        raise RoundingInfeasible(
            "rounded primal violates a semidefinite block; increase den_limit")

    t_rat = Fraction(r.history[-1][0])

    def candidates():
        yield (_round_sym(r.dual.W, p.m, den_limit),
               [_round_sym(z, blk.size, den_limit)
                for blk, z in zip(p.f_blocks, r.dual.Z)])
        if all(psd_check_exact(f) == PsdVerdict.POSITIVE_DEFINITE
               for f in f_x):
            w_c = inverse_exact(g_x)
            z_c = [inverse_exact(f).scale(1 / t_rat) for f in f_x]
            yield (_round_sym_exact(w_c, den_limit),
                   [_round_sym_exact(z, den_limit) for z in z_c])
            yield (w_c, z_c)

    for w, z0 in candidates():
        if psd_check_exact(w) != PsdVerdict.POSITIVE_DEFINITE:
            continue
        z = _repair_dual(p, w, z0)
        if z is None:
            continue
        cx = sum(ci * xi for ci, xi in zip(p.c, x_rat))
        lg_lo, _ = log_bounds(det_exact(g_x))
        upper = cx - lg_lo
        lw_lo, _ = log_bounds(det_exact(w))
        s = (Fraction(p.m) - trace_inner(p.g_coeffs[0], w)
             - sum(trace_inner(blk.coeffs[0], zb)
                   for blk, zb in zip(p.f_blocks, z)))
        cert = GapCertificate(p.kind, x_rat, w, tuple(z), lw_lo + s, upper)
        verify_certificate(cert, p)
        return cert
    raise RoundingInfeasible(
        "no rounded dual stayed inside the PSD cone; increase den_limit")


# ---------------------------------------------------------------------------
# circumradius surface derivatives
# ---------------------------------------------------------------------------


def _adjugate_rows(rows: list) -> list:
    """Adjugate of a square rational matrix by the Faddeev-LeVerrier
    recursion; exact, and well defined at singular matrices."""
    n = len(rows)
    a = [[rat(e) for e in row] for row in rows]
    m = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for k in range(1, n):
        am = [[sum(a[i][l] * m[l][j] for l in range(n)) for j in range(n)]
              for i in range(n)]
        ck = -sum(am[i][i] for i in range(n)) / k
        m = [[am[i][j] + (ck if i == j else 0) for j in range(n)]
             for i in range(n)]
    if n % 2 == 0:
        m = [[-e for e in row] for row in m]
    return m


def _br_partial(w, a: int, b: int, size: int) -> list:
    """d(BR)/dq_ab as dense rows; w is the list of edge vectors."""
    rows = [[Fraction(0)] * size for _ in range(size)]
    for i in range(1, size):
        wi = w[i - 1]
        border = (2 if a != b else 1) * Fraction(wi[a] * wi[b])
        rows[i][0] = rows[0][i] = border
        for j in range(1, i + 1):
            wj = w[j - 1]
            if a == b:
                e = Fraction(wi[a] * wj[a])
            else:
                e = Fraction(wi[a] * wj[b] + wi[b] * wj[a])
            rows[i][j] = rows[j][i] = e
    return rows


def br_gradient(l: Simplex, q: SymMatrix) -> SymMatrix:
    """Exact gradient of Q |-> det BR_l(Q) in the trace pairing.

    Chain rule through the adjugate: the derivative in direction E is
    tr(adj(BR) dBR[E]), assembled per coordinate q_ab. Only vertex
    differences enter BR, so the gradient ignores translations of l.
    """
    if l.volume_det() == 0:
        raise DegenerateSimplex(f"flat simplex {l.vertices}")
    d = q.dim
    v0 = l.vertices[0]
    w = [vec_sub(v, v0) for v in l.vertices[1:]]
    size = len(w) + 1
    adj = _adjugate_rows(br_matrix(l, q).to_rows())
    entries = {}
    for (a, b) in tri_pairs(d):
        part = _br_partial(w, a, b, size)
        p_ab = sum(adj[i][j] * part[j][i]
                   for i in range(size) for j in range(size))
        entries[(a, b)] = p_ab if a == b else p_ab / 2
    return SymMatrix.from_entry_fn(d, lambda i, j: entries[(i, j)])


def _single_direction_quadratic(l: Simplex, q: SymMatrix,
                                e: SymMatrix) -> Fraction:
    """Coefficient of eps^2 in det BR_l(q + eps e), by exact interpolation
    on integer nodes (the polynomial has degree at most l.dim + 1)."""
    deg = l.dim + 1
    nodes = [Fraction(k) for k in range(deg + 1)]
    values = [det_exact(br_matrix(l, q + e.scale(t))) for t in nodes]
    # Newton's divided differences give the monomial coefficients exactly
    coeffs = _monomial_coeffs(nodes, values)
    return coeffs[2] if len(coeffs) > 2 else Fraction(0)


def _monomial_coeffs(nodes: list, values: list) -> list:
    n = len(nodes)
    table = list(values)
    newton = []
    for k in range(n):
        newton.append(table[0])
        table = [(table[i + 1] - table[i]) / (nodes[i + 1 + k] - nodes[i])
                 for i in range(len(table) - 1)]
    # expand the Newton form into monomials
    poly = [Fraction(0)] * n
    basis = [Fraction(1)] + [Fraction(0)] * (n - 1)
    for k in range(n):
        for i in range(n):
            poly[i] += newton[k] * basis[i]
        if k + 1 < n:
            shifted = [Fraction(0)] * n
            for i in range(n - 1):
                shifted[i + 1] += basis[i]
                shifted[i] -= nodes[k] * basis[i]
            basis = shifted
    return poly


def br_hessian(l: Simplex, q: SymMatrix) -> tuple:
    """Exact Hessian of det BR_l at q over the packed coordinates.

    H[a][b] = d^2 det / ds_a ds_b in the basis of unit coordinate
    matrices; recovered from the quadratic coefficients of univariate
    restrictions via the polarization identity.
    """
    if l.volume_det() == 0:
        raise DegenerateSimplex(f"flat simplex {l.vertices}")
    d = q.dim
    pairs = tri_pairs(d)
    units = [_maxdet.basis_sym(d, i, j) for i, j in pairs]
    diag = [2 * _single_direction_quadratic(l, q, e) for e in units]
    n = len(pairs)
    h = [[Fraction(0)] * n for _ in range(n)]
    for a in range(n):
        h[a][a] = diag[a]
        for b in range(a + 1, n):
            mixed = 2 * _single_direction_quadratic(l, q, units[a] + units[b])
            h[a][b] = h[b][a] = (mixed - diag[a] - diag[b]) / 2
    return tuple(tuple(row) for row in h)


# ---------------------------------------------------------------------------
# local optimality via normal cones
# ---------------------------------------------------------------------------


class VerdictKind(enum.Enum):
    INTERIOR_LOCAL_OPT = "InteriorLocalOpt"
    BOUNDARY_LOCAL_OPT = "BoundaryLocalOpt"
    NOT_LOCAL_OPT = "NotLocalOpt"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class NormalConeWitness:
    """Nonnegative combination  sum multipliers[k] generators[k] = target."""

    generators: tuple
    multipliers: tuple
    target: SymMatrix

    def holds(self, slack: Fraction = Fraction(0)) -> bool:
        """Exact re-check; pass the slack used by a tolerance verdict to
        re-check an approximate witness instead."""
        if any(m < 0 for m in self.multipliers) or \
                not any(m > 0 for m in self.multipliers):
            return False
        acc = SymMatrix.zero(self.target.dim).to_fractions()
        for m, g in zip(self.multipliers, self.generators):
            if m:
                acc = acc + g.scale(m)
        return all(abs(a - b) <= slack for a, b in
                   zip(acc.packed(), self.target.to_fractions().packed()))


@dataclass(frozen=True)
class BetterPoint:
    """Refutation witness: a form in an incident closed cone whose packing
    constraint value beats the candidate's homogeneous minimum, so the
    segment toward it improves the packing-covering quotient immediately."""

    form: SymMatrix
    packing_value: Fraction


@dataclass(frozen=True)
class LocalityVerdict:
    kind: VerdictKind
    witness: tuple
    exact: bool = True


_INCIDENT_CONE_CAP = 256


def _incident_cones(q: SymMatrix):
    """All secondary cones whose closure contains q, found by flipping
    across the walls through q; each entry is (cone, vanishing facets)."""
    tri, _ = delone_subdivision(q)
    first = secondary_cone(tri)
    mem = cone_membership(first, q)
    out = [(first, mem.zeros)]
    if not mem.zeros:
        return out
    seen = {tri.classes}
    queue = [(first, mem.zeros)]
    while queue:
        cur, zeros = queue.pop()
        for f in zeros:
            t2 = _cones.flip(cur.triangulation, f)
            if t2.classes in seen:
                continue
            seen.add(t2.classes)
            c2 = secondary_cone(t2)
            m2 = cone_membership(c2, q)
            if m2.kind == _cones.MembershipKind.OUTSIDE:
                raise LatcovError("flip across a vanishing wall left the form")
            out.append((c2, m2.zeros))
            queue.append((c2, m2.zeros))
            if len(out) > _INCIDENT_CONE_CAP:
                raise LimitReached(
                    "too many secondary cones meet at this form")
    return out


def _tight_simplices(cone: SecondaryCone, q: SymMatrix, tol) -> list:
    out = []
    for s in cone.triangulation.classes:
        r2 = circumradius_sq(s, q).r2
        if (r2 == 1) if tol is None else (abs(r2 - 1) <= tol):
            out.append(s)
    return out


def _conic_lp(generators: list, target: SymMatrix, slack: Fraction):
    """Multipliers lam >= 0 with sum lam_k gen_k = target, the equality
    relaxed to +-slack per coordinate when slack > 0. Returns the
    multiplier tuple or None."""
    n = len(generators)
    if n == 0:
        return None
    dim = target.dim
    rows = []
    for (i, j) in tri_pairs(dim):
        coeff = tuple(rat(g[i, j]) for g in generators)
        rhs = rat(target[i, j])
        if slack:
            rows.append((coeff, LESS_EQ, rhs + slack))
            rows.append((coeff, GREATER_EQ, rhs - slack))
        else:
            rows.append((coeff, EQUAL, rhs))
    unit = [Fraction(0)] * n
    for k in range(n):
        unit[k] = Fraction(1)
        rows.append((tuple(unit), GREATER_EQ, Fraction(0)))
        unit[k] = Fraction(0)
    res = lp_solve_exact(LinProgram.build((Fraction(0),) * n, rows))
    if res.status != LpStatus.OPTIMAL:
        return None
    return res.point


def _numeric_setup(q: SymMatrix, numeric_tol):
    """Exactify a float form and rescale so the inhomogeneous minimum is
    exactly 1; rescaling by the exact minimum is what makes the tolerance
    path sound for irrational optima given in floats."""
    if numeric_tol is None:
        if not q.is_exact:
            raise MuNotOne("float input needs numeric_tol")
        tri, _ = delone_subdivision(q)
        if inhomogeneous_min(tri, q) != 1:
            raise MuNotOne("rescale the form so the circumradius maximum is 1")
        return q, None
    qe = q.to_fractions() if q.is_exact else SymMatrix.from_entry_fn(
        q.dim, lambda i, j: Fraction(float(q[i, j])))
    tri, _ = delone_subdivision(qe)
    mu = inhomogeneous_min(tri, qe)
    return qe.scale(1 / mu), rat(numeric_tol)


def local_opt_covering(q: SymMatrix, *, numeric_tol=None) -> LocalityVerdict:
    """Decide local optimality for the covering problem at q with mu(q)=1.

    The inverse form must be a nonnegative combination of the negated
    circumradius-surface gradients of the tight simplices; on walls the
    combination may also draw on the negated facet normals, cone by
    cone, and every incident cone must admit one. Both directions of the
    criterion hold, so an infeasible combination refutes local optimality.
    """
    q, tol = _numeric_setup(q, numeric_tol)
    incident = _incident_cones(q)
    target = inverse_exact(q)
    slack = Fraction(0) if tol is None else \
        tol * max(1, max(abs(e) for e in target.packed()))
    witnesses = []
    for cone, zeros in incident:
        gens = [-br_gradient(s, q) for s in _tight_simplices(cone, q, tol)]
        gens += [-f.normal.to_fractions() for f in zeros]
        mult = _conic_lp(gens, target, slack)
        if mult is None:
            return LocalityVerdict(VerdictKind.NOT_LOCAL_OPT, (),
                                   exact=tol is None)
        witnesses.append(NormalConeWitness(tuple(gens), tuple(mult), target))
    kind = VerdictKind.INTERIOR_LOCAL_OPT if len(incident) == 1 \
        and not incident[0][1] else VerdictKind.BOUNDARY_LOCAL_OPT
    return LocalityVerdict(kind, tuple(witnesses), exact=tol is None)


def _shortest_vector_gens(q: SymMatrix, tol):
    lam, vectors = lambda_min(q)
    if tol is not None:
        # admit the almost-shortest vectors of a perturbed irrational form
        vectors = short_vectors(q, lam * (1 + tol))
    half = [v for v in vectors if next(e for e in v if e) > 0]
    gens = [SymMatrix.from_entry_fn(
        q.dim, lambda i, j, _v=v: Fraction(_v[i] * _v[j])) for v in half]
    return lam, gens


def local_opt_packcov(q: SymMatrix, *, numeric_tol=None,
                      refute_tol: float = 1e-7,
                      refute_den_limit: int = 10 ** 10) -> LocalityVerdict:
    """Decide local optimality for the packing-covering problem at q.

    Interior forms: the cone over the shortest-vector normals must meet
    the negated gradient cone; the criterion is two-sided, so failure
    refutes. On walls the matching criterion is only sufficient; when it
    fails we try to refute by solving the packing-covering problem on
    each incident closed cone and looking for a certified better form
    (any such form beats q arbitrarily nearby along the segment, by
    convexity of the constraints), and otherwise return Undecided.
    """
    q, tol = _numeric_setup(q, numeric_tol)
    lam, vv = _shortest_vector_gens(q, tol)
    incident = _incident_cones(q)
    zero = SymMatrix.zero(q.dim)
    slack = Fraction(0) if tol is None else tol
    interior = len(incident) == 1 and not incident[0][1]

    grad_groups = []
    for cone, zeros in incident:
        gens = [br_gradient(s, q) for s in _tight_simplices(cone, q, tol)]
        gens += [f.normal.to_fractions() for f in zeros]
        grad_groups.append(gens)

    # common point: sum lam_v V_v + sum nu_L g_L^(cone) = 0 per cone,
    # with the V multipliers shared and normalized to sum 1
    nvv = len(vv)
    sizes = [len(g) for g in grad_groups]
    gens_all = list(vv)
    padded = []
    offset = nvv
    for gi, gens in enumerate(grad_groups):
        padded.append((offset, gens))
        gens_all += gens
        offset += len(gens)
    ntot = offset
    dim = q.dim
    rows = []
    for ci, (off, gens) in enumerate(padded):
        for (i, j) in tri_pairs(dim):
            coeff = [Fraction(0)] * ntot
            for k, g in enumerate(vv):
                coeff[k] = rat(g[i, j])
            for k, g in enumerate(gens):
                coeff[off + k] = rat(g[i, j])
            if slack:
                rows.append((tuple(coeff), LESS_EQ, slack))
                rows.append((tuple(coeff), GREATER_EQ, -slack))
            else:
                rows.append((tuple(coeff), EQUAL, Fraction(0)))
    ones = tuple(Fraction(int(k < nvv)) for k in range(ntot))
    rows.append((ones, EQUAL, Fraction(1)))
    unit = [Fraction(0)] * ntot
    for k in range(ntot):
        unit[k] = Fraction(1)
        rows.append((tuple(unit), GREATER_EQ, Fraction(0)))
        unit[k] = Fraction(0)
    res = lp_solve_exact(LinProgram.build((Fraction(0),) * ntot, rows))
    if res.status == LpStatus.OPTIMAL:
        mult = res.point
        witnesses = []
        for off, gens in padded:
            witnesses.append(NormalConeWitness(
                tuple(vv) + tuple(gens),
                tuple(mult[:nvv]) + tuple(mult[off:off + len(gens)]),
                zero))
        kind = VerdictKind.INTERIOR_LOCAL_OPT if interior \
            else VerdictKind.BOUNDARY_LOCAL_OPT
        return LocalityVerdict(kind, tuple(witnesses), exact=tol is None)

    if interior:
        return LocalityVerdict(VerdictKind.NOT_LOCAL_OPT, (),
                               exact=tol is None)

    # boundary criterion is sufficient only: look for a certified better
    # form on an incident closed cone before giving up
    if tol is None:
        for cone, _ in incident:
            better = _packcov_refutation(cone, lam, refute_tol,
                                         refute_den_limit)
            if better is not None:
                return LocalityVerdict(VerdictKind.NOT_LOCAL_OPT, (better,))
    return LocalityVerdict(VerdictKind.UNDECIDED, (), exact=tol is None)


def _packcov_refutation(cone: SecondaryCone, lam: Fraction,
                        tol: float, den_limit: int) -> Optional[BetterPoint]:
    try:
        p = _maxdet.build_packcov_problem(cone)
        cert = rationalize_and_verify(_maxdet.solve(p, tol=tol), p, den_limit)
    except LatcovError:
        return None
    c_val = cert.x_rat[-1]
    if c_val <= lam:
        return None
    return BetterPoint(cert.form(cone.triangulation.dim), c_val)


# ---------------------------------------------------------------------------
# isolation of packing-covering optima
# ---------------------------------------------------------------------------


class IsolationKind(enum.Enum):
    ISOLATED = "Isolated"
    NOT_ISOLATED = "NotIsolated"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class IsolationResult:
    kind: IsolationKind
    witness: Optional[SymMatrix] = None
    exact: bool = True


_PATTERN_CAP = 2 ** 15


def isolation_search(v_rows: list, g_rows: list, hessians: list,
                     ncoords: int, cap: int = _PATTERN_CAP,
                     v_active=(), g_active=()):
    """Core search for a nonzero direction S with v_rows . S >= 0,
    g_rows . S >= 0, and hessians[k] S = 0 whenever g_rows[k] . S = 0.

    All inputs are packed coordinate rows; the kernel conditions are
    handled by enumerating the activity pattern of the gradient
    constraints, one exact LP per pattern (strict inequalities become
    >= 1 by homogeneity). Indices in v_active / g_active are forced to
    equality (with their kernel rows): at a local optimum the multiplier
    identity sum lam_v V_v + sum nu_L g_L = 0 pairs with any witness to
    zero, so rows carrying a positive multiplier are active in every
    witness. The forced equalities are eliminated once, up front, and
    every LP runs in the coordinates of their kernel; that keeps the
    programs small even when the active set carries hundreds of rows.
    Returns (IsolationKind, coords or None).
    """
    v_active = set(v_active)
    g_active = set(g_active)
    forced = [v_rows[i] for i in sorted(v_active)]
    for i in sorted(g_active):
        forced.append(g_rows[i])
        forced.extend(hessians[i])
    basis = kernel_basis(forced, ncoords) if forced else tuple(
        tuple(Fraction(int(r == c)) for c in range(ncoords))
        for r in range(ncoords))
    if not basis:
        # the forced equalities alone pin S to zero
        return IsolationKind.ISOLATED, None
    nred = len(basis)

    def reduce_row(row):
        red = [sum(a * b for a, b in zip(row, vec)) for vec in basis]
        if not any(red):
            return None
        return tuple(Fraction(e) for e in primitive_scale(red))

    def unreduce(y):
        return tuple(sum(c * vec[k] for c, vec in zip(y, basis))
                     for k in range(ncoords))

    base = []
    for i, row in enumerate(v_rows):
        if i in v_active:
            continue
        red = reduce_row(row)
        if red is not None:
            base.append((red, GREATER_EQ, Fraction(0)))
    free = [i for i in range(len(g_rows)) if i not in g_active]
    red_g = {i: reduce_row(g_rows[i]) for i in free}

    def feasible(rows, force_nonzero):
        if not force_nonzero:
            res = lp_solve_exact(LinProgram.build(
                (Fraction(0),) * nred, rows))
            return res.point if res.status == LpStatus.OPTIMAL else None
        unit = [Fraction(0)] * nred
        for k in range(nred):
            for sign in (Fraction(1), Fraction(-1)):
                unit[k] = Fraction(1)
                pinned = rows + [(tuple(unit), EQUAL, sign)]
                unit[k] = Fraction(0)
                res = lp_solve_exact(LinProgram.build(
                    (Fraction(0),) * nred, pinned))
                if res.status == LpStatus.OPTIMAL:
                    return res.point
        return None

    # the relaxation without the free kernel conditions over-approximates
    # every pattern; if it already pins S to zero the optimum is isolated
    relaxed = base + [(red_g[i], GREATER_EQ, Fraction(0))
                      for i in free if red_g[i] is not None]
    if feasible(relaxed, True) is None:
        return IsolationKind.ISOLATED, None

    k = len(free)
    if 2 ** k > cap:
        return IsolationKind.UNDECIDED, None
    for mask in range(2 ** k):
        rows = list(base)
        strict = False
        dead = False
        for b in range(k):
            i = free[b]
            red = red_g[i]
            if mask >> b & 1:
                if red is not None:
                    rows.append((red, EQUAL, Fraction(0)))
                for hrow in hessians[i]:
                    hred = reduce_row(hrow)
                    if hred is not None:
                        rows.append((hred, EQUAL, Fraction(0)))
            else:
                if red is None:
                    dead = True  # identically zero row cannot be >= 1
                    break
                rows.append((red, GREATER_EQ, Fraction(1)))
                strict = True
        if dead:
            continue
        y = feasible(rows, not strict)
        if y is None:
            continue
        point = unreduce(y)
        if _isolation_witness_ok(point, v_rows, g_rows, hessians):
            return IsolationKind.NOT_ISOLATED, point
    return IsolationKind.ISOLATED, None


def _isolation_witness_ok(coords, v_rows, g_rows, hessians) -> bool:
    if not any(coords):
        return False
    for row in v_rows:
        if sum(a * b for a, b in zip(row, coords)) < 0:
            return False
    for row, h in zip(g_rows, hessians):
        val = sum(a * b for a, b in zip(row, coords))
        if val < 0:
            return False
        if val == 0:
            for hrow in h:
                if sum(a * b for a, b in zip(hrow, coords)):
                    return False
    return True


def _interior_multipliers(vv: list, gens: list, dim: int, slack: Fraction):
    """Multipliers (lam, nu) >= 0 with sum lam = 1 and
    sum lam_v V_v + sum nu_L g_L = 0 (within slack), or None."""
    ntot = len(vv) + len(gens)
    rows = []
    for (i, j) in tri_pairs(dim):
        coeff = tuple(rat(g[i, j]) for g in vv) + \
            tuple(rat(g[i, j]) for g in gens)
        if slack:
            rows.append((coeff, LESS_EQ, slack))
            rows.append((coeff, GREATER_EQ, -slack))
        else:
            rows.append((coeff, EQUAL, Fraction(0)))
    ones = tuple(Fraction(int(k < len(vv))) for k in range(ntot))
    rows.append((ones, EQUAL, Fraction(1)))
    unit = [Fraction(0)] * ntot
    for k in range(ntot):
        unit[k] = Fraction(1)
        rows.append((tuple(unit), GREATER_EQ, Fraction(0)))
        unit[k] = Fraction(0)
    res = lp_solve_exact(LinProgram.build((Fraction(0),) * ntot, rows))
    if res.status != LpStatus.OPTIMAL:
        return None
    return res.point[:len(vv)], res.point[len(vv):]


def isolated_test(q: SymMatrix, *, numeric_tol=None,
                  cap: int = _PATTERN_CAP) -> IsolationResult:
    """Is the packing-covering optimum at q isolated?

    Searches for a segment direction that stays on the packing boundary
    (shortest-vector values non-decreasing) and on the covering boundary
    (gradients nonnegative, with curvature vanishing where a gradient
    constraint is active). The local-optimality multipliers at q force
    their support rows to be active in any witness, which both prunes
    the pattern enumeration and, on the numeric path, discards the
    spurious near-orthogonal witnesses a perturbed irrational form
    would otherwise produce. Forms that are not certified interior
    local optima, and wall forms, come back Undecided.
    """
    q, tol = _numeric_setup(q, numeric_tol)
    incident = _incident_cones(q)
    if len(incident) != 1 or incident[0][1]:
        return IsolationResult(IsolationKind.UNDECIDED, exact=tol is None)
    cone = incident[0][0]
    _, vv = _shortest_vector_gens(q, tol)
    tight = _tight_simplices(cone, q, tol)
    grads = [br_gradient(s, q) for s in tight]
    slack = Fraction(0) if tol is None else tol
    mult = _interior_multipliers(vv, grads, q.dim, slack)
    if mult is None:
        return IsolationResult(IsolationKind.UNDECIDED, exact=tol is None)
    lam_m, nu_m = mult
    thr = Fraction(0) if tol is None else 1000 * tol
    v_active = tuple(i for i, m in enumerate(lam_m) if m > thr)
    g_active = tuple(i for i, m in enumerate(nu_m) if m > thr)
    v_rows = [to_coordinate_normal(g) for g in vv]
    g_rows = [to_coordinate_normal(g) for g in grads]
    hessians = [br_hessian(s, q) for s in tight]
    kind, coords = isolation_search(
        v_rows, g_rows, hessians, len(tri_pairs(q.dim)), cap,
        v_active=v_active, g_active=g_active)
    witness = None
    if coords is not None:
        it = iter(coords)
        witness = SymMatrix([[next(it) for _ in range(i + 1)]
                             for i in range(q.dim)])
    return IsolationResult(kind, witness, exact=tol is None)


# ---------------------------------------------------------------------------
# facet certificates for the cone optimum
# ---------------------------------------------------------------------------


class FacetStatus(enum.Enum):
    ON_FACET = "OnFacet"
    OFF_FACET = "OffFacet"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class FacetCertificate:
    facet: object            # the facet's Regulator
    status: FacetStatus
    bounds: Optional[tuple]  # certified (lower, upper) of the flipped solve


def _flipped_problem(p: _maxdet.MaxdetProblem, facet) -> _maxdet.MaxdetProblem:
    blocks = []
    for blk in p.f_blocks:
        if blk.kind == "regulator" and blk.ref is facet:
            blocks.append(_maxdet.FBlock(
                blk.kind, blk.ref, tuple(-c for c in blk.coeffs)))
        else:
            blocks.append(blk)
    return _maxdet.MaxdetProblem(p.kind, p.nvars, p.c, p.g_coeffs,
                                 tuple(blocks), p.cone)


def _flipped_start(cone: SecondaryCone, facet, kind: str) -> tuple:
    """Strictly feasible point just across one wall: move from a relative
    interior point of the wall toward the neighboring cone, then scale
    until every circumradius block is strictly inside."""
    dim = cone.triangulation.dim
    pairs = tri_pairs(dim)
    n = len(pairs)
    rows = []
    for f in cone.facets:
        coeff = to_coordinate_normal(f.normal)
        if f is facet:
            rows.append((coeff + (Fraction(0),), EQUAL, Fraction(0)))
        else:
            rows.append((coeff + (Fraction(-1),), GREATER_EQ, Fraction(0)))
    trace_row = tuple(Fraction(int(i == j)) for i, j in pairs) + (Fraction(0),)
    rows.append((trace_row, LESS_EQ, Fraction(4 * dim * dim)))
    slack_row = (Fraction(0),) * n + (Fraction(1),)
    rows.append((slack_row, LESS_EQ, Fraction(1)))
    rows.append((slack_row, GREATER_EQ, Fraction(0)))
    objective = (Fraction(0),) * n + (Fraction(-1),)
    res = lp_solve_exact(LinProgram.build(objective, rows))
    if res.status != LpStatus.OPTIMAL or res.value >= 0:
        raise LatcovError("wall has no relative interior point")
    wall_q = _maxdet.unpack_form(res.point[:n], dim)

    t2 = _cones.flip(cone.triangulation, facet)
    other = secondary_cone(t2).interior_point
    vals_w = {f: trace_inner(f.normal, wall_q) for f in cone.facets}
    vals_o = {f: trace_inner(f.normal, other) for f in cone.facets}
    eps = Fraction(1)
    for f in cone.facets:
        if f is facet:
            continue
        if vals_o[f] < vals_w[f]:
            eps = min(eps, vals_w[f] / (vals_w[f] - vals_o[f]))
    start_q = wall_q.scale(1 - eps / 2) + other.scale(eps / 2)
    if trace_inner(facet.normal, start_q) >= 0:
        raise LatcovError("step across the wall did not leave the cone")

    mu = max(circumradius_sq(s, start_q).r2
             for s in cone.triangulation.classes)
    if mu <= 0:
        raise LatcovError("crossed point has no usable circumradius scale")
    start_q = start_q.scale(1 / (mu * (1 + _maxdet._START_MARGIN)))
    x = start_q.packed()
    if kind == "packcov":
        shortest = min(rat(start_q.quad(v))
                       for v in cone.triangulation.star_edges())
        x = x + (shortest / (1 + _maxdet._START_MARGIN),)
    return x


def _facet_verdict(p, facet, best, tol, den_limit) -> FacetCertificate:
    try:
        start = _flipped_start(p.cone, facet, p.kind)
        flipped = _flipped_problem(p, facet)
        cert = rationalize_and_verify(
            _maxdet.solve(flipped, tol=tol, start=start), flipped, den_limit)
    except LatcovError:
        return FacetCertificate(facet, FacetStatus.UNKNOWN, None)
    if cert.upper < best.lower:
        status = FacetStatus.ON_FACET
    elif cert.lower > best.upper:
        status = FacetStatus.OFF_FACET
    else:
        status = FacetStatus.UNKNOWN
    return FacetCertificate(facet, status, (cert.lower, cert.upper))


def default_thread_count() -> int:
    env = os.environ.get("LATCOV_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def boundary_certificates(cone: SecondaryCone, best: GapCertificate, *,
                          tol: float = 1e-8,
                          den_limit: int = 10 ** 12) -> tuple:
    """Per-facet location of the cone optimum relative to each wall.

    Each facet's halfspace is flipped and the problem re-solved: a
    certified flipped upper bound below best.lower proves the optimum sits
    on that wall; a certified flipped lower bound above best.upper proves
    it stays off the wall; anything else (including solver failures on the
    flipped side) is Unknown, never a claim.
    """
    p = _maxdet.build_covering_problem(cone) if best.kind == "covering" \
        else _maxdet.build_packcov_problem(cone)
    facets = cone.facets
    if not facets:
        return ()
    workers = min(default_thread_count(), len(facets))
    if workers == 1:
        return tuple(_facet_verdict(p, f, best, tol, den_limit)
                     for f in facets)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_facet_verdict, p, f, best, tol, den_limit)
                for f in facets]
        return tuple(f.result() for f in futs)
