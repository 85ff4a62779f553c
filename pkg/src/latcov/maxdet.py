"""Determinant maximization over a secondary cone.

The covering problem on a cone: maximize det Q subject to Q in the closed
cone and every simplex circumradius at most 1. The packing-covering
problem: maximize C subject to the same plus Q[v] >= C on the edge
classes. Both are instances of

    minimize  c^T x - log det G(x)   subject to  F(x) >= 0,

with G, F affine in x and F block-diagonal: one scalar block per cone
facet, one (d+1) x (d+1) circumradius block per simplex class, and (for
packing-covering) one scalar block per edge class. The solver is damped
Newton path-following on the joint log barrier with geometric growth of
the path parameter; at a central point the matrices W = G(x)^-1 and
Z = F(x)^-1 / t satisfy the dual equality constraints, giving the
sandwich  log det W - tr(G0 W) - tr(F0 Z) + m  <=  p*  <=  c^T x - log det G(x)
with width (total F dimension) / t.

Problem data is built exactly in rationals; only `solve` works in floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .cones import SecondaryCone
from .delone import inhomogeneous_min, vec_sub
from .errors import NoStrictlyFeasibleStart, NumericalFailure
from .linalg import SymMatrix, rat, to_coordinate_normal, tri_pairs


def basis_sym(dim: int, i: int, j: int) -> SymMatrix:
    """Coordinate matrix E_ij with Q = sum q_ij E_ij over packed pairs."""
    return SymMatrix.from_entry_fn(
        dim, lambda a, b: rat(1) if (a, b) == (i, j) else rat(0))


@dataclass(frozen=True)
class FBlock:
    kind: str      # "regulator" | "circumradius" | "edge"
    ref: object    # Regulator | Simplex | edge vector
    coeffs: tuple  # B_0, B_1, ..., B_n exact symmetric matrices

    @property
    def size(self) -> int:
        return self.coeffs[0].dim


@dataclass(frozen=True)
class MaxdetProblem:
    kind: str            # "covering" | "packcov"
    nvars: int
    c: tuple             # exact objective coefficients
    g_coeffs: tuple      # G_0, G_1, ..., G_n exact symmetric matrices
    f_blocks: tuple
    cone: SecondaryCone

    @property
    def m(self) -> int:
        return self.g_coeffs[0].dim

    @property
    def n_f(self) -> int:
        return sum(b.size for b in self.f_blocks)

    def to_json(self) -> dict:
        def mat(s):
            return [[str(e) for e in row] for row in s.lower]
        return {"kind": self.kind, "nvars": self.nvars,
                "c": [str(e) for e in self.c],
                "g": [mat(g) for g in self.g_coeffs],
                "blocks": [{"kind": b.kind, "size": b.size,
                            "coeffs": [mat(m) for m in b.coeffs]}
                           for b in self.f_blocks]}


def _br_block(s, var_mats) -> FBlock:
    v0 = s.vertices[0]
    w = [vec_sub(v, v0) for v in s.vertices[1:]]
    size = len(w) + 1
    coeffs = [SymMatrix.from_entry_fn(
        size, lambda i, j: rat(4) if i == j == 0 else rat(0))]
    for e in var_mats:
        if e is None:
            coeffs.append(SymMatrix.zero(size))
            continue
        ew = [e.apply(u) for u in w]

        def entry(i, j, _ew=ew):
            if i == 0 and j == 0:
                return rat(0)
            if j == 0:
                return sum(a * b for a, b in zip(w[i - 1], _ew[i - 1]))
            return sum(a * b for a, b in zip(w[i - 1], _ew[j - 1]))

        coeffs.append(SymMatrix.from_entry_fn(size, entry))
    return FBlock("circumradius", s, tuple(coeffs))


def _scalar_block(kind, ref, row) -> FBlock:
    return FBlock(kind, ref, tuple(SymMatrix([[rat(e)]]) for e in row))


def build_covering_problem(cone: SecondaryCone) -> MaxdetProblem:
    """Variables are the packed entries of Q; F stacks the facet scalars
    and one circumradius block per simplex class."""
    t = cone.triangulation
    d = t.dim
    pairs = tri_pairs(d)
    n = len(pairs)
    var_mats = [basis_sym(d, i, j) for i, j in pairs]
    g_coeffs = (SymMatrix.zero(d),) + tuple(var_mats)
    blocks = []
    for reg in cone.facets:
        row = (Fraction(0),) + to_coordinate_normal(reg.normal)
        blocks.append(_scalar_block("regulator", reg, row))
    for s in t.classes:
        blocks.append(_br_block(s, var_mats))
    return MaxdetProblem("covering", n, (Fraction(0),) * n,
                         g_coeffs, tuple(blocks), cone)


def build_packcov_problem(cone: SecondaryCone) -> MaxdetProblem:
    """Variables (packed Q, C); G is the constant 1 x 1 identity, so the
    objective is the linear -C and the program is a pure SDP."""
    t = cone.triangulation
    d = t.dim
    pairs = tri_pairs(d)
    n = len(pairs) + 1
    var_mats = [basis_sym(d, i, j) for i, j in pairs]
    g_coeffs = (SymMatrix.identity(1),) + (SymMatrix.zero(1),) * n
    blocks = []
    for reg in cone.facets:
        row = (Fraction(0),) + to_coordinate_normal(reg.normal) + (Fraction(0),)
        blocks.append(_scalar_block("regulator", reg, row))
    for s in t.classes:
        blocks.append(_br_block(s, var_mats + [None]))
    for v in t.star_edges():
        row = ((Fraction(0),)
               + tuple(e.quad(v) for e in var_mats)
               + (Fraction(-1),))
        blocks.append(_scalar_block("edge", v, row))
    c = (Fraction(0),) * (n - 1) + (Fraction(-1),)
    return MaxdetProblem("packcov", n, c, g_coeffs, tuple(blocks), cone)


_START_MARGIN = Fraction(1, 1000)


def feasible_start(cone: SecondaryCone) -> tuple:
    """Strictly feasible covering start: the cone's interior point scaled
    so every circumradius is 1/(1 + margin)."""
    q = cone.interior_point
    mu = inhomogeneous_min(cone.triangulation, q)
    scaled = q.scale(1 / (mu * (1 + _START_MARGIN)))
    return scaled.packed()


def packcov_start(cone: SecondaryCone) -> tuple:
    """Covering start extended with a strictly feasible C."""
    x = feasible_start(cone)
    it = iter(x)
    d = cone.triangulation.dim
    q = SymMatrix([[next(it) for _ in range(i + 1)] for i in range(d)])
    shortest = min(rat(q.quad(v)) for v in cone.triangulation.star_edges())
    return x + (shortest / (1 + _START_MARGIN),)


def unpack_form(x, dim: int) -> SymMatrix:
    it = iter(x)
    return SymMatrix([[it.__next__() for _ in range(i + 1)] for i in range(dim)])


@dataclass(frozen=True)
class DualPoint:
    W: np.ndarray
    Z: tuple  # per F block, same order as the problem's blocks

    def residuals(self, p: MaxdetProblem) -> np.ndarray:
        """Violation of tr(G_i W) + tr(F_i Z) = c_i per variable."""
        res = []
        for i in range(1, p.nvars + 1):
            tot = float(np.sum(_np_sym(p.g_coeffs[i]) * self.W))
            for blk, z in zip(p.f_blocks, self.Z):
                tot += float(np.sum(_np_sym(blk.coeffs[i]) * z))
            res.append(tot - float(p.c[i - 1]))
        return np.array(res)


@dataclass(frozen=True)
class SolveResult:
    x: tuple
    primal_value: float
    dual: DualPoint
    gap: float
    history: tuple  # (t, upper, lower) at each centered point


def _np_sym(s: SymMatrix) -> np.ndarray:
    return s.to_numpy()


class _Affine:
    """Stacked float coefficients of one group of equal-size blocks."""

    def __init__(self, blocks, nvars):
        self.size = blocks[0][1].size
        self.index = [i for i, _ in blocks]
        # tensor[v, k, a, b]: coefficient of variable v in block k
        self.tensor = np.array([[_np_sym(b.coeffs[v]) for _, b in blocks]
                                for v in range(nvars + 1)])

    def value(self, x):
        return self.tensor[0] + np.tensordot(x, self.tensor[1:], axes=(0, 0))


def _chol_or_none(a):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None


def _logdet_from_chol(l):
    if l.ndim == 2:
        return 2.0 * float(np.sum(np.log(np.diag(l))))
    return 2.0 * float(np.sum(np.log(np.diagonal(l, axis1=-2, axis2=-1))))


def solve(p: MaxdetProblem, tol: float = 1e-9,
          start: Optional[tuple] = None, t0: float = 1.0) -> SolveResult:
    """Path-following with damped Newton centering.

    Terminates when the sandwich width n_F / t drops below tol and the
    last centering converged; the returned dual satisfies the equality
    constraints to the solver's float precision.
    """
    n = p.nvars
    if start is None:
        start = feasible_start(p.cone) if p.kind == "covering" \
            else packcov_start(p.cone)
    x = np.array([float(e) for e in start])
    if len(x) != n:
        raise NoStrictlyFeasibleStart("start has wrong length")

    c = np.array([float(e) for e in p.c])
    g_tensor = np.array([_np_sym(g) for g in p.g_coeffs])
    groups = {}
    for i, b in enumerate(p.f_blocks):
        groups.setdefault(b.size, []).append((i, b))
    affs = [_Affine(bs, n) for bs in groups.values()]
    g_constant = not g_tensor[1:].any()

    def feas(xv):
        mats = [a.value(xv) for a in affs]
        chols = [_chol_or_none(m) for m in mats]
        if any(ch is None for ch in chols):
            return None
        gch = _chol_or_none(g_tensor[0] + np.tensordot(xv, g_tensor[1:], axes=(0, 0)))
        if gch is None:
            return None
        return mats, chols, gch

    state = feas(x)
    if state is None:
        raise NoStrictlyFeasibleStart("start violates strict cone feasibility")

    n_f = float(p.n_f)

    def grad_hess(t, st):
        mats, chols, gch = st
        grad = t * c.copy()
        hess = np.zeros((n, n))
        if not g_constant:
            ginv = np.linalg.inv(gch @ gch.T)
            gk = g_tensor[1:]
            grad -= t * np.einsum("ab,vba->v", ginv, gk)
            mg = np.einsum("ab,vbc->vac", ginv, gk)
            hess += t * np.einsum("vab,wba->vw", mg, mg)
        for a in affs:
            finv = np.linalg.inv(a.value_cache)
            fk = a.tensor[1:]
            grad -= np.einsum("kab,vkba->v", finv, fk)
            mf = np.einsum("kab,vkbc->vkac", finv, fk)
            hess += np.einsum("vkab,wkba->vw", mf, mf)
        return grad, hess

    def sandwich(t, xv, st):
        """Bounds at a centered point: the dual W = G^-1, Z = F^-1/t
        turns the lower-bound formula into exactly upper - n_F/t there.
        Evaluating the formula in floats instead loses to the O(t)
        condition number of the active F blocks, so the closed form is
        the more accurate of the two; the exact statement is certify's.
        """
        mats, chols, gch = st
        upper = float(c @ xv) - _logdet_from_chol(gch)
        return upper, upper - n_f / t

    history = []
    t = t0
    max_outer = 80
    for _outer in range(max_outer):
        # damped Newton centering at parameter t: full steps inside the
        # quadratic-convergence region, 1/(1+lambda) damping outside it,
        # backtracking only to restore cone feasibility
        prev_dec2 = math.inf
        for _inner in range(300):
            mats, chols, gch = state
            for a, mt in zip(affs, mats):
                a.value_cache = mt
            grad, hess = grad_hess(t, state)
            # badly conditioned problems (e.g. skew unimodular images)
            # can make the float Hessian numerically singular; a ridge
            # keeps the step a descent direction, merely less than a
            # full Newton step
            step = None
            ridge = 0.0
            scale = float(np.trace(hess)) / max(1, n)
            for _ in range(6):
                try:
                    h = hess + ridge * scale * np.eye(n) if ridge else hess
                    cand = np.linalg.solve(h, -grad)
                except np.linalg.LinAlgError:
                    cand = None
                if cand is not None and np.all(np.isfinite(cand)):
                    step = cand
                    break
                ridge = 1e-14 if ridge == 0.0 else ridge * 100.0
            if step is None:
                raise NumericalFailure("singular Newton system")
            dec2 = float(-grad @ step)
            if dec2 <= 1e-22 * max(1.0, t):
                break
            if dec2 < 1e-20 * max(1.0, t) and dec2 > 0.5 * prev_dec2:
                break  # stagnating at the float noise floor
            prev_dec2 = dec2
            lam = math.sqrt(max(dec2, 0.0))
            alpha = 1.0 if lam < 0.25 else 1.0 / (1.0 + lam)
            moved = False
            for _ in range(70):
                stn = feas(x + alpha * step)
                if stn is not None:
                    x, state = x + alpha * step, stn
                    moved = True
                    break
                alpha *= 0.5
            if not moved:
                if dec2 < 1e-16 * max(1.0, t):
                    break  # at numerical centering accuracy
                raise NumericalFailure("line search failed to make progress")
        upper, lower = sandwich(t, x, state)
        history.append((t, upper, lower))
        if n_f / t <= tol:
            break
        t *= 10.0
    else:
        raise NumericalFailure("path parameter schedule exhausted")

    mats, chols, gch = state
    ginv = np.linalg.inv(gch @ gch.T)
    z_list: list = [None] * len(p.f_blocks)
    for a, mt in zip(affs, mats):
        finv = np.linalg.inv(mt)
        for pos, idx in enumerate(a.index):
            z_list[idx] = finv[pos] / t
    dual = DualPoint(ginv, tuple(z_list))
    upper, lower = history[-1][1], history[-1][2]
    return SolveResult(tuple(float(e) for e in x), upper, dual,
                       upper - lower, tuple(history))
