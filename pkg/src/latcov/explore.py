"""Flip-graph exploration.

Three strategies over the graph of triangulations connected by bistellar
flips: complete enumeration up to unimodular equivalence (breadth first
with canonical-key buckets), a seeded random-walk-plus-greedy heuristic
ranked by the moment bound, and a depth-first branch-and-bound over the
alternative triangulations of non-simplex cells with rigorous
determinant pruning.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
import random
from typing import Optional, Sequence

from . import maxdet as _maxdet
from .bounds import ThetaBound, theta_star
from .certify import log_bounds, rationalize_and_verify
from .cones import SecondaryCone, flip, secondary_cone
from .delone import (Simplex, Triangulation, circumradius_sq,
                     principal_triangulation)
from .equiv import CanonicalKey, canonical_key, equivalent
from .errors import LatcovError
from .linalg import SymMatrix, rat, tri_pairs


@dataclass(frozen=True)
class RegistryEntry:
    triangulation: Triangulation
    key: CanonicalKey
    cone: SecondaryCone


@dataclass(frozen=True)
class Registry:
    """Representatives of the equivalence classes reached so far.

    complete is True only when the breadth-first closure finished; a
    limited run returns the partial registry with complete False.
    """

    dim: int
    entries: tuple
    complete: bool

    def __len__(self) -> int:
        return len(self.entries)


def _expand(entry: RegistryEntry) -> list:
    out = []
    for facet in entry.cone.facets:
        t2 = flip(entry.triangulation, facet)
        out.append((t2, canonical_key(t2)))
    return out


def enumerate_all(d: int, limit: Optional[int] = None,
                  threads: int = 1) -> Registry:
    """All inequivalent triangulations of dimension d, by breadth-first
    closure under flips starting from the principal one.

    Neighbor expansion (flips and fingerprints) is distributed over
    threads; registry lookups and insertions stay serialized, so the
    discovery order and the chosen representatives are deterministic
    regardless of thread count. When limit is set the search stops after
    registering that many classes and flags the registry incomplete
    instead of raising.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    t0 = principal_triangulation(d)
    entries = [RegistryEntry(t0, canonical_key(t0), secondary_cone(t0))]
    buckets = {entries[0].key.invariant_vector: [0]}
    frontier = [entries[0]]
    truncated = False

    def register(t2, key2) -> bool:
        bucket = buckets.setdefault(key2.invariant_vector, [])
        for idx in bucket:
            if equivalent(t2, entries[idx].triangulation) is not None:
                return False
        entry = RegistryEntry(t2, key2, secondary_cone(t2))
        bucket.append(len(entries))
        entries.append(entry)
        frontier.append(entry)
        return True

    while frontier and not truncated:
        wave, frontier = frontier, []
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                expansions = list(pool.map(_expand, wave))
        else:
            expansions = [_expand(e) for e in wave]
        for neighbors in expansions:
            for t2, key2 in neighbors:
                register(t2, key2)
                if limit is not None and len(entries) >= limit:
                    truncated = True
                    break
            if truncated:
                break
    return Registry(d, tuple(entries), complete=not truncated)


# ---------------------------------------------------------------------------
# heuristic search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchVisit:
    triangulation: Triangulation
    theta: ThetaBound
    step: int
    phase: str   # "walk" | "descent"


def heuristic_search(d: int, walk_len: int = 50, seed: int = 0,
                     steps: int = 100) -> tuple:
    """Random walk of walk_len uniform facet flips, then greedy descent
    to the flip neighbor with the smallest moment bound until no
    neighbor improves or steps run out. Returns every visited
    triangulation with its bound, best first; ties keep visit order.
    The trajectory is a pure function of the seed.
    """
    if d < 2:
        raise ValueError("heuristic search needs dimension at least 2")
    rng = random.Random(seed)
    visits = []
    t = principal_triangulation(d)
    step = 0
    for _ in range(walk_len):
        visits.append(SearchVisit(t, theta_star(t), step, "walk"))
        step += 1
        t = flip(t, rng.choice(secondary_cone(t).facets))

    cur, cur_bound = t, theta_star(t)
    for _ in range(steps):
        visits.append(SearchVisit(cur, cur_bound, step, "descent"))
        step += 1
        best = None
        for facet in secondary_cone(cur).facets:
            t2 = flip(cur, facet)
            b2 = theta_star(t2)
            if best is None or b2.exact < best[1].exact:
                best = (t2, b2)
        if best is None or best[1].exact >= cur_bound.exact:
            break
        cur, cur_bound = best
    else:
        # every budgeted step improved; the endpoint is still unrecorded
        visits.append(SearchVisit(cur, cur_bound, step, "descent"))
    return tuple(sorted(visits, key=lambda v: (v.theta.exact, v.step)))


# ---------------------------------------------------------------------------
# refinement branch and bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RefineResult:
    leaves: tuple           # surviving full simplex choices
    nodes_per_depth: tuple  # nodes expanded at each cell depth
    pruned: int


def _relaxed_det_problem(simplices: Sequence[Simplex],
                         dim: int) -> _maxdet.MaxdetProblem:
    pairs = tri_pairs(dim)
    var_mats = [_maxdet.basis_sym(dim, i, j) for i, j in pairs]
    g_coeffs = (SymMatrix.zero(dim),) + tuple(var_mats)
    blocks = tuple(_maxdet._br_block(s, var_mats) for s in simplices)
    return _maxdet.MaxdetProblem("covering", len(pairs),
                                 (Fraction(0),) * len(pairs),
                                 g_coeffs, blocks, None)


def _relaxed_start(simplices: Sequence[Simplex], dim: int) -> tuple:
    q = SymMatrix.identity(dim)
    mu = max(circumradius_sq(s, q).r2 for s in simplices)
    return q.scale(1 / (mu * (1 + _maxdet._START_MARGIN))).packed()


def _det_below_cutoff(simplices, dim, log_cut_lo, tol, den_limit) -> bool:
    """True only when the certified maximal determinant over the chosen
    circumradius constraints is provably below the cutoff.

    Rounding the dual of a pure circumradius relaxation is touchy (there
    are no scalar blocks to absorb the repair), so failed certifications
    retry at looser tolerances before giving up un-pruned.
    """
    p = _relaxed_det_problem(simplices, dim)
    start = _relaxed_start(simplices, dim)
    for f in (1, 10, 100):
        try:
            r = _maxdet.solve(p, tol=tol * f, start=start)
            cert = rationalize_and_verify(r, p, den_limit)
        except LatcovError:
            continue
        # det <= exp(-lower); the branch is dead once -lower < log(cutoff),
        # checked through the exact log enclosure
        return -cert.lower < log_cut_lo
    return False


def refine_branch_bound(cells: Sequence, dim: int, cutoff=None,
                        tol: float = 1e-8,
                        den_limit: int = 10 ** 12) -> RefineResult:
    """Depth-first choice of one triangulation per cell.

    cells[k] lists the alternative triangulations of cell k, each a
    sequence of simplices. A node's relaxation keeps only the
    circumradius constraints of the simplices chosen so far, so its
    certified determinant bound dominates every completion; the node is
    pruned when that bound falls below cutoff (a determinant threshold).
    Without a cutoff, or when the relaxation fails to solve, nothing is
    pruned.
    """
    log_cut_lo = log_bounds(rat(cutoff))[0] if cutoff is not None else None
    counts = [0] * len(cells)
    leaves: list = []
    pruned = 0

    def descend(depth: int, chosen: list) -> None:
        nonlocal pruned
        if depth == len(cells):
            leaves.append(tuple(chosen))
            return
        for alt in cells[depth]:
            nxt = chosen + [s if isinstance(s, Simplex) else Simplex.of(s)
                            for s in alt]
            counts[depth] += 1
            if log_cut_lo is not None and _det_below_cutoff(
                    nxt, dim, log_cut_lo, tol, den_limit):
                pruned += 1
                continue
            descend(depth + 1, nxt)

    descend(0, [])
    return RefineResult(tuple(leaves), tuple(counts), pruned)
