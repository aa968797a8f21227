"""Coarse-block survival detectors and embedded-collision counting.

The backbone is read in coarse blocks of delta_n levels. Within a block
the detectors look for a rigid pattern: near each end exactly one side
tree survives two further coarse levels, and from each survivor a chain
of unique surviving descendants continues coarse level by coarse level.
When the pattern holds and every designated vertex stays within
diffusive range of its predecessor, the block carries two designated
subtrees whose embeddings can land on the same space-time sites; the
number of such collisions is the observable the scanning experiments
track. A standalone two-tree variant counts the same collisions between
independent trees planted at nearby origins, which is the form the
large scans actually sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.typing import NDArray

from .branching import CondTree, ProgenyLaw, sample_backbone_tree
from .trace import TraceGraph, _vertex_positions
from .walk import StepLaw, norm_sq

# lcm of every window denominator used below (quarters for the gate
# windows, sixths and twelfths for the collision windows), so each
# fractional block boundary is an exact integer level
LEVEL_DIVISOR = 24


class BlockRangeError(ValueError):
    """A vertex height or block index falls outside the coarse grid."""


class BlockNotGoodError(ValueError):
    """Collision enumeration was requested for a block that is not good."""


# ---------------------------------------------------------------------------
# Parameters and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockParams:
    """Coarse-grid geometry for block detection on a backbone tree.

    k is the block length in coarse units and delta_n the coarse level
    width. The backbone length splits as

        n = full_blocks * k * delta_n + k_prime * delta_n + n_tilde

    with 0 <= k_prime < k and delta_n <= n_tilde < 2 * delta_n, and the
    detectors accept block starts i = 0, k, ..., (full_blocks - 1) * k.
    c0_prime scales the heavy-block collision threshold; n_star is the
    safety margin at the top of the extra-collision branch window.
    """

    k: int
    delta_n: int
    n: int
    m: int
    c0_prime: float
    n_star: int = 1

    def __post_init__(self) -> None:
        for name in ("k", "delta_n", "n", "m", "n_star"):
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, "c0_prime", float(self.c0_prime))
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.delta_n < 1:
            raise ValueError("delta_n must be positive")
        if self.delta_n % LEVEL_DIVISOR:
            raise ValueError(
                f"delta_n={self.delta_n} must be divisible by {LEVEL_DIVISOR} "
                "so every window boundary is an exact level"
            )
        if 2 * self.k * self.delta_n > self.n:
            raise ValueError(
                f"k*delta_n={self.k * self.delta_n} may not exceed n/2={self.n / 2:g}"
            )
        if self.m < 2 * self.n:
            raise ValueError(f"m={self.m} must be at least 2n={2 * self.n}")
        if not self.c0_prime > 0:
            raise ValueError("c0_prime must be positive")
        if self.n_star < 1:
            raise ValueError("n_star must be at least 1")

    @property
    def delta(self) -> Fraction:
        return Fraction(self.delta_n, self.n)

    @property
    def full_blocks(self) -> int:
        return (self.n - self.delta_n) // (self.k * self.delta_n)

    @property
    def k_prime(self) -> int:
        rem = self.n - self.full_blocks * self.k * self.delta_n
        return (rem - self.delta_n) // self.delta_n

    @property
    def n_tilde(self) -> int:
        rem = self.n - self.full_blocks * self.k * self.delta_n
        return rem - self.k_prime * self.delta_n

    @property
    def block_starts(self) -> tuple[int, ...]:
        return tuple(range(0, self.full_blocks * self.k, self.k))

    def b_prime_threshold(self, progeny: ProgenyLaw, law: StepLaw) -> float:
        """Collision count a block must reach to be flagged heavy."""
        return (
            self.c0_prime
            * progeny.sigma_sq**2
            / law.ddet**law.dim
            * math.log(self.delta_n)
        )


@dataclass
class BlockReport:
    """Findings for one block: four survival flags, two spacing flags,
    the gate levels, the survivor chains, and the collision summary.

    Gates are backbone levels; chain entries are tree-vertex ids.
    chain1 holds the survivors at coarse levels i+1 .. i+k+1 (as far as
    uniqueness carried), chain2 those at i+k and i+k+1.
    """

    block_index: int
    gate1_unique: bool = False  # (1) one qualifying side tree, inside the first window
    chain1_complete: bool = False  # (2) unique survivor chain through k coarse levels
    gate2_unique: bool = False  # (3) as (1), near the top of the block
    chain2_complete: bool = False  # (4) both chains extend one coarse level further
    backbone_spaced: bool | None = None  # (5) gates diffusively close to the corners
    chains_spaced: bool | None = None  # (6) survivor chains diffusively tight
    gate1: int | None = None
    gate2: int | None = None
    gate1_child: int | None = None  # first off-backbone vertex toward chain1
    gate2_child: int | None = None
    chain1: tuple[int, ...] = ()
    chain2: tuple[int, ...] = ()
    good: bool | None = None
    intersection_count: int | None = None
    b_prime: bool | None = None

    @property
    def tree_good(self) -> bool:
        return (
            self.gate1_unique
            and self.chain1_complete
            and self.gate2_unique
            and self.chain2_complete
        )

    def to_json(self) -> dict:
        return {
            "block": self.block_index,
            "conditions": {
                "1": self.gate1_unique,
                "2": self.chain1_complete,
                "3": self.gate2_unique,
                "4": self.chain2_complete,
                "5": self.backbone_spaced,
                "6": self.chains_spaced,
            },
            "gate1": self.gate1,
            "gate2": self.gate2,
            "gate1_child": self.gate1_child,
            "gate2_child": self.gate2_child,
            "chain1": list(self.chain1),
            "chain2": list(self.chain2),
            "good": self.good,
            "intersections": self.intersection_count,
            "b_prime": self.b_prime,
        }


@dataclass(frozen=True)
class IntersectionPair:
    """One recorded collision: vertices u1, u2 share the embedded site at
    the given height; forks are where each branched off the line leading
    to its designated continuation."""

    u1: int
    u2: int
    height: int
    fork1: int
    fork2: int
    fork1_child: int
    fork2_child: int
    site: tuple[int, ...]
    primed: bool

    def to_json(self) -> dict:
        return {
            "u1": self.u1,
            "u2": self.u2,
            "height": self.height,
            "fork1": self.fork1,
            "fork2": self.fork2,
            "fork1_child": self.fork1_child,
            "fork2_child": self.fork2_child,
            "site": list(self.site),
            "primed": self.primed,
        }


@dataclass
class IntersectionRecord:
    """Exact collision enumeration for one block (or one tree pair)."""

    block_index: int
    primed: bool
    count: int
    threshold: float
    b_prime: bool
    pairs: tuple[IntersectionPair, ...]

    def to_json(self) -> dict:
        return {
            "block": self.block_index,
            "primed": self.primed,
            "count": self.count,
            "threshold": self.threshold,
            "b_prime": self.b_prime,
            "pairs": [p.to_json() for p in self.pairs],
        }


# ---------------------------------------------------------------------------
# Elementary queries
# ---------------------------------------------------------------------------


def common_ancestor(tree, u: int, w: int) -> int:
    """Deepest vertex lying on both ancestral lines.

    Plain parent walk; heights drop by exactly one per step, so the two
    walks can be brought level and then advanced in lockstep.
    """
    a, b = int(u), int(w)
    ha, hb = int(tree.height[a]), int(tree.height[b])
    while ha > hb:
        a = int(tree.parent[a])
        ha -= 1
    while hb > ha:
        b = int(tree.parent[b])
        hb -= 1
    while a != b:
        a = int(tree.parent[a])
        b = int(tree.parent[b])
    return a


def vertex_sites(graph: TraceGraph) -> NDArray[np.int64]:
    """Per-tree-vertex lattice positions of an embedded trace."""
    if graph.vertex_point is None:
        raise ValueError("graph carries no vertex map (read back from a file?)")
    return graph.coords[graph.vertex_point]


def has_udp(tree: CondTree, vertex: int, delta_n: int) -> bool:
    """Whether exactly one descendant of the vertex one coarse level down
    survives through the following coarse level.

    For a backbone vertex only its own side tree is inspected, so the
    backbone continuation never supplies the survivor; in particular a
    backbone vertex with an empty side tree fails. Any other vertex must
    sit exactly on a coarse level, and all its descendants count.
    """
    if delta_n < 1:
        raise ValueError("delta_n must be positive")
    v = int(vertex)
    if not 0 <= v < tree.num_vertices:
        raise BlockRangeError(f"vertex {v} out of range")
    h = int(tree.height[v])
    on_backbone = tree.side_root[v] < 0
    if not on_backbone and h % delta_n:
        raise BlockRangeError(
            f"off-backbone vertex at height {h} is not on the coarse grid {delta_n}"
        )
    low = (h // delta_n + 1) * delta_n
    high = low + delta_n
    maxdesc = tree.max_descendant_height()
    if on_backbone:
        cand = np.nonzero((tree.side_root == v) & (tree.height == low))[0]
    else:
        sub = tree.subtree_vertices(v, max_height=low)
        cand = sub[tree.height[sub] == low]
    return int(np.count_nonzero(maxdesc[cand] >= high)) == 1


def typically_spaced(tree, pos, law: StepLaw, u: int, w: int) -> bool:
    """Whether a descendant sits within diffusive range of an ancestor:
    squared covariance-norm displacement at most the height gap, with
    the boundary counting as spaced."""
    pos = np.asarray(pos)
    hu, hw = int(tree.height[u]), int(tree.height[w])
    if hw <= hu or tree.ancestor_at_height(int(w), hu) != int(u):
        raise ValueError(f"vertex {w} is not a strict descendant of {u}")
    return bool(norm_sq(law, pos[int(w)] - pos[int(u)]) <= hw - hu)


# ---------------------------------------------------------------------------
# Block detection
# ---------------------------------------------------------------------------


def _require_whole_tree(tree, params: BlockParams) -> None:
    if tree.n != params.n or tree.m != params.m:
        raise ValueError(
            f"tree geometry (n={tree.n}, m={tree.m}) does not match "
            f"params (n={params.n}, m={params.m})"
        )
    if tree.side_window is not None:
        raise ValueError("block detection needs every side tree; resample without side_window")
    if tree.max_height_sampled < tree.m - 1:
        raise ValueError("block detection needs full heights; resample without max_height")


def _check_sites(tree, pos, law: StepLaw) -> NDArray[np.int64]:
    pos = np.asarray(pos, dtype=np.int64)
    if pos.shape != (tree.num_vertices, law.dim):
        raise ValueError(
            f"site map has shape {pos.shape}, expected ({tree.num_vertices}, {law.dim})"
        )
    return pos


def _side_reach(tree: CondTree) -> NDArray[np.int64]:
    """Greatest height in each backbone vertex's side tree (the level
    itself when the side tree is empty)."""
    top = np.arange(tree.n + 1, dtype=np.int64)
    side = tree.side_root >= 0
    np.maximum.at(top, tree.side_root[side], tree.height[side].astype(np.int64))
    return top


def _unique_gate(side_top, lo: int, hi: int, target: int) -> tuple[int | None, bool]:
    hits = np.nonzero(side_top[lo:hi] >= target)[0]
    if len(hits) == 1:
        return int(hits[0]) + lo, True
    return None, False


def _survivor_chain(tree, maxdesc, cand, level: int, last_level: int, dn: int) -> list[int]:
    """Follow unique surviving descendants from one coarse level to the
    next; stops as soon as the survivor at a level is not unique."""
    chain: list[int] = []
    while len(cand) == 1:
        v = int(cand[0])
        chain.append(v)
        if level == last_level:
            break
        level += dn
        sub = tree.subtree_vertices(v, max_height=level)
        at_level = sub[tree.height[sub] == level]
        cand = at_level[maxdesc[at_level] >= level + dn]
    return chain


def detect_tree_good(tree: CondTree, i: int, params: BlockParams) -> BlockReport:
    """Evaluate the four survival conditions for the block starting at
    coarse index i. Gates and chains are recorded as far as they are
    defined even when a flag fails; the result depends on the tree
    alone, so repeated calls agree exactly.
    """
    _require_whole_tree(tree, params)
    if i not in params.block_starts:
        raise BlockRangeError(f"block start {i} not among {params.block_starts}")
    dn, k = params.delta_n, params.k
    quarter = dn // 4
    rep = BlockReport(block_index=i)
    maxdesc = tree.max_descendant_height()
    side_top = _side_reach(tree)

    gate1, unique1 = _unique_gate(side_top, i * dn, (i + 1) * dn, (i + 2) * dn)
    rep.gate1 = gate1
    if unique1:
        rep.gate1_unique = i * dn + quarter <= gate1 <= i * dn + 3 * quarter
        first = (i + 1) * dn
        cand = np.nonzero((tree.side_root == gate1) & (tree.height == first))[0]
        cand = cand[maxdesc[cand] >= first + dn]
        chain = _survivor_chain(tree, maxdesc, cand, first, (i + k + 1) * dn, dn)
        rep.chain1 = tuple(chain)
        rep.chain1_complete = len(chain) >= k
        if chain:
            rep.gate1_child = tree.ancestor_at_height(chain[0], gate1 + 1)

    gate2, unique2 = _unique_gate(
        side_top, (i + k - 1) * dn, (i + k) * dn, (i + k + 1) * dn
    )
    rep.gate2 = gate2
    if unique2:
        rep.gate2_unique = (
            (i + k - 1) * dn + quarter <= gate2 <= (i + k - 1) * dn + 3 * quarter
        )
        first = (i + k) * dn
        cand = np.nonzero((tree.side_root == gate2) & (tree.height == first))[0]
        cand = cand[maxdesc[cand] >= first + dn]
        chain = _survivor_chain(tree, maxdesc, cand, first, (i + k + 1) * dn, dn)
        rep.chain2 = tuple(chain)
        if chain:
            rep.gate2_child = tree.ancestor_at_height(chain[0], gate2 + 1)
    # the top extensions come as a package: both chains must clear one
    # more coarse level
    rep.chain2_complete = len(rep.chain2) == 2 and len(rep.chain1) == k + 1
    return rep


def detect_spatially_good(
    tree: CondTree,
    pos,
    law: StepLaw,
    report: BlockReport,
    params: BlockParams,
) -> BlockReport:
    """Evaluate the two spacing conditions on an embedded tree and settle
    the block's goodness.

    The spacing flags stay False whenever the vertices they would test
    were never designated (a failed survival condition), which keeps the
    goodness flag a plain conjunction of all six.
    """
    _require_whole_tree(tree, params)
    pos = _check_sites(tree, pos, law)
    i = report.block_index
    dn, k = params.delta_n, params.k
    spaced_backbone = False
    spaced_chains = False
    if report.tree_good:
        g1, g2 = report.gate1, report.gate2
        corners = [(i + j) * dn for j in range(k + 1)]  # backbone ids equal levels
        ts_pairs = [(corners[0], g1), (g1 + 1, corners[1])]
        ts_pairs += [(corners[j], corners[j + 1]) for j in range(1, k - 1)]
        ts_pairs += [(corners[k - 1], g2), (g2 + 1, corners[k])]
        spaced_backbone = all(
            typically_spaced(tree, pos, law, a, b) for a, b in ts_pairs
        )
        c1, c2 = report.chain1, report.chain2
        ts_pairs = [(report.gate1_child, c1[0])]
        ts_pairs += [(c1[j], c1[j + 1]) for j in range(k - 1)]
        ts_pairs += [(report.gate2_child, c2[0])]
        spaced_chains = all(
            typically_spaced(tree, pos, law, a, b) for a, b in ts_pairs
        ) and bool(norm_sq(law, pos[c2[0]] - pos[c1[k - 1]]) <= dn)
    report.backbone_spaced = spaced_backbone
    report.chains_spaced = spaced_chains
    report.good = report.tree_good and spaced_backbone and spaced_chains
    return report


# ---------------------------------------------------------------------------
# Collision enumeration inside a good block
# ---------------------------------------------------------------------------


def _block_candidates(tree, pos, law, root: int, guide: int, base: int, dn: int):
    """Strict descendants of root in the collision height window whose
    fork off the line to guide lands in the fork window and who pass
    both spacing tests. Returns (vertex, fork, fork_child, primed)."""
    h_lo = base + (5 * dn) // 6
    h_hi = base + dn
    z_lo = base + dn // 2
    z_hi = base + (2 * dn) // 3
    out = []
    for v in tree.subtree_vertices(root, max_height=h_hi):
        v = int(v)
        h = int(tree.height[v])
        if v == root or not h_lo <= h <= h_hi:
            continue
        fork = common_ancestor(tree, v, guide)
        hz = int(tree.height[fork])
        if not z_lo <= hz <= z_hi:
            continue
        if norm_sq(law, pos[fork] - pos[root]) > hz - base:
            continue
        fork_child = tree.ancestor_at_height(v, hz + 1)
        gap = norm_sq(law, pos[v] - pos[fork_child])
        if gap > h - hz - 1:
            continue
        primed = bool(12 * (h - base) <= 11 * dn and 4.0 * gap <= h - hz - 1)
        out.append((v, fork, fork_child, primed))
    return out


def enumerate_intersections(
    tree: CondTree,
    pos,
    law: StepLaw,
    progeny: ProgenyLaw,
    report: BlockReport,
    params: BlockParams,
    primed: bool = False,
) -> IntersectionRecord:
    """Exact collision enumeration between the two designated subtrees of
    a good block.

    primed=True keeps only pairs meeting the tighter height and spacing
    restrictions (always a subset of the plain enumeration). The plain
    call also writes the count and the heavy flag back into the report.
    """
    _require_whole_tree(tree, params)
    pos = _check_sites(tree, pos, law)
    if not report.good:
        raise BlockNotGoodError(
            f"block {report.block_index} is not good; collision counting is undefined"
        )
    i, dn, k = report.block_index, params.delta_n, params.k
    base = (i + k) * dn
    # u1 ranges over the top gate's subtree, u2 over the long chain's
    first = _block_candidates(tree, pos, law, report.chain2[0], report.chain2[1], base, dn)
    second = _block_candidates(
        tree, pos, law, report.chain1[k - 1], report.chain1[k], base, dn
    )
    by_site: dict[tuple, list] = {}
    for v, fork, child, pr in second:
        key = (int(tree.height[v]), tuple(int(c) for c in pos[v]))
        by_site.setdefault(key, []).append((v, fork, child, pr))
    pairs = []
    for v, fork, child, pr in first:
        key = (int(tree.height[v]), tuple(int(c) for c in pos[v]))
        for w, wfork, wchild, wpr in by_site.get(key, ()):
            both = pr and wpr
            if primed and not both:
                continue
            pairs.append(
                IntersectionPair(
                    u1=v,
                    u2=w,
                    height=key[0],
                    fork1=fork,
                    fork2=wfork,
                    fork1_child=child,
                    fork2_child=wchild,
                    site=key[1],
                    primed=both,
                )
            )
    pairs.sort(key=lambda p: (p.u1, p.u2))
    threshold = params.b_prime_threshold(progeny, law)
    record = IntersectionRecord(
        block_index=i,
        primed=primed,
        count=len(pairs),
        threshold=threshold,
        b_prime=len(pairs) >= threshold,
        pairs=tuple(pairs),
    )
    if not primed:
        report.intersection_count = record.count
        report.b_prime = record.b_prime
    return record


# ---------------------------------------------------------------------------
# The two-tree experiment
# ---------------------------------------------------------------------------


@dataclass
class TwoTreeResult:
    """Collision counts between two independently grown embedded trees,
    with enough context kept to count extra collisions above any pair."""

    delta_n: int
    law: StepLaw
    count: int
    primed_count: int
    records: tuple[IntersectionPair, ...] | None
    trees: tuple[CondTree, CondTree]
    positions: tuple[NDArray[np.int64], NDArray[np.int64]]
    offset: NDArray[np.int64]


def _window_candidates(tree, pos, law, dn: int):
    """Side vertices in the collision window of one tree: attach level in
    the middle band, height in the top band, both spacing tests against
    the root and the attach fork. All comparisons are integer-exact."""
    side = np.nonzero(tree.side_root >= 0)[0]
    h = tree.height[side].astype(np.int64)
    ell = tree.side_root[side].astype(np.int64)
    keep = (6 * h >= 5 * dn) & (h <= dn) & (2 * ell >= dn) & (3 * ell <= 2 * dn)
    side, h, ell = side[keep], h[keep], ell[keep]
    child = tree.anchor[side].astype(np.int64)
    spine_gap = norm_sq(law, pos[ell] - pos[0])  # attach vertex id equals its level
    child_gap = norm_sq(law, pos[side] - pos[child])
    keep = (spine_gap <= ell) & (child_gap <= h - ell - 1)
    side, h, ell, child, child_gap = (
        side[keep],
        h[keep],
        ell[keep],
        child[keep],
        child_gap[keep],
    )
    primed = (12 * h <= 11 * dn) & (4.0 * child_gap <= h - ell - 1)
    return side, h, ell, child, primed


def _site_keys(h, pos, ids, dim: int) -> NDArray[np.int64]:
    if not len(ids):
        return np.empty((0, 1 + dim), dtype=np.int64)
    return np.column_stack([h, pos[ids]]).astype(np.int64)


def two_tree_experiment(
    p: ProgenyLaw,
    law: StepLaw,
    delta_n: int,
    x,
    rng: np.random.Generator,
    *,
    records: str = "all",
) -> TwoTreeResult:
    """Grow two independent backbone trees of length delta_n (deadline
    2*delta_n), embed them with the step law planting the second at
    offset x, and count embedded collisions between qualifying side
    vertices of the two.

    Only side trees attached in the middle level band can host
    qualifying vertices and every window tops out at height delta_n, so
    sampling is restricted to that band and capped there; the counts'
    law is unchanged. The offset is not range-checked: a far offset
    simply yields zero collisions. records selects which pairs are
    materialized ("all", "primed", or "none"); the counts are identical
    either way.
    """
    dn = int(delta_n)
    if dn < 3:
        raise ValueError("delta_n must be at least 3 for a nonempty attach window")
    if records not in ("all", "primed", "none"):
        raise ValueError("records must be 'all', 'primed', or 'none'")
    off = np.asarray(x, dtype=np.int64).reshape(-1)
    if off.shape != (law.dim,):
        raise ValueError(f"offset has {off.size} coordinates, law has {law.dim}")
    lo = (dn + 1) // 2
    hi = (2 * dn) // 3
    t1 = sample_backbone_tree(p, dn, 2 * dn, rng, max_height=dn, side_window=(lo, hi))
    t2 = sample_backbone_tree(p, dn, 2 * dn, rng, max_height=dn, side_window=(lo, hi))
    d1 = law.sample_steps(rng, max(t1.num_vertices - 1, 1))[: t1.num_vertices - 1]
    d2 = law.sample_steps(rng, max(t2.num_vertices - 1, 1))[: t2.num_vertices - 1]
    pos1 = _vertex_positions(t1, d1)
    pos2 = _vertex_positions(t2, d2) + off[None, :]

    ids1, h1, l1, c1, pm1 = _window_candidates(t1, pos1, law, dn)
    ids2, h2, l2, c2, pm2 = _window_candidates(t2, pos2, law, dn)
    key1 = _site_keys(h1, pos1, ids1, law.dim)
    key2 = _site_keys(h2, pos2, ids2, law.dim)
    uniq, inverse = np.unique(np.vstack([key1, key2]), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    inv1, inv2 = inverse[: len(key1)], inverse[len(key1) :]
    n_sites = len(uniq)
    tally1 = np.bincount(inv1, minlength=n_sites)
    tally2 = np.bincount(inv2, minlength=n_sites)
    count = int(tally1 @ tally2)
    tally1p = np.bincount(inv1[pm1], minlength=n_sites)
    tally2p = np.bincount(inv2[pm2], minlength=n_sites)
    primed_count = int(tally1p @ tally2p)

    out: tuple[IntersectionPair, ...] | None
    if records == "none":
        out = None
    else:
        if records == "primed":
            keep1 = pm1
            keep2 = pm2
        else:
            keep1 = np.ones(len(ids1), dtype=bool)
            keep2 = np.ones(len(ids2), dtype=bool)
        matched = (tally1 > 0) & (tally2 > 0)
        built = []
        idx2: dict[int, list[int]] = {}
        for j in np.nonzero(keep2 & matched[inv2])[0]:
            idx2.setdefault(int(inv2[j]), []).append(int(j))
        for a in np.nonzero(keep1 & matched[inv1])[0]:
            for b in idx2.get(int(inv1[a]), ()):
                built.append(
                    IntersectionPair(
                        u1=int(ids1[a]),
                        u2=int(ids2[b]),
                        height=int(h1[a]),
                        fork1=int(l1[a]),
                        fork2=int(l2[b]),
                        fork1_child=int(c1[a]),
                        fork2_child=int(c2[b]),
                        site=tuple(int(v) for v in pos1[ids1[a]]),
                        primed=bool(pm1[a] and pm2[b]),
                    )
                )
        built.sort(key=lambda q: (q.u1, q.u2))
        out = tuple(built)
    return TwoTreeResult(
        delta_n=dn,
        law=law,
        count=count,
        primed_count=primed_count,
        records=out,
        trees=(t1, t2),
        positions=(pos1, pos2),
        offset=off,
    )


def _limb_candidates(tree, pos, law, dn, u, fork, fork_child, hu, r0):
    """Key rows (height, site) for the vertices of one fork limb that can
    pair above a recorded collision: at or above its height, branching
    off its trunk no lower than r0, not strictly below the collision
    vertex, and spaced against the fork child."""
    group = np.nonzero(tree.anchor == tree.anchor[int(u)])[0]
    h = tree.height[group].astype(np.int64)
    keep = (h >= hu) & (h <= dn)
    group, h = group[keep], h[keep]
    if not len(group):
        return np.empty((0, 1 + law.dim), dtype=np.int64)
    cur = group.astype(np.int64)
    ch = h.copy()
    while True:
        lift = ch > hu
        if not lift.any():
            break
        cur[lift] = tree.parent[cur[lift]]
        ch[lift] -= 1
    below_u = (h > hu) & (cur == int(u))
    while True:
        lift = ch > r0
        if not lift.any():
            break
        cur[lift] = tree.parent[cur[lift]]
        ch[lift] -= 1
    shared = cur == tree.ancestor_at_height(int(u), r0)
    ell = int(tree.height[int(fork)])
    gap = norm_sq(law, pos[group] - pos[int(fork_child)])
    keep = shared & ~below_u & (gap <= h - ell - 1)
    group, h = group[keep], h[keep]
    return _site_keys(h, pos, group, law.dim)


def extra_intersections(
    result: TwoTreeResult, pair: IntersectionPair, *, n_star: int = 1
) -> int:
    """Collisions between the two fork limbs of one recorded pair at the
    pair's height or above, counting only vertices whose branch off the
    pair's trunk happens past three-quarter depth.

    The pair itself qualifies, so the count is at least 1 whenever the
    branch window is nonempty; an empty window returns 0. Meaningful for
    pairs carrying the primed flag (the caller's filter), though nothing
    is enforced.
    """
    if n_star < 1:
        raise ValueError("n_star must be at least 1")
    dn = result.delta_n
    r0 = -((-3 * dn) // 4)
    if r0 > pair.height - n_star:
        return 0
    t1, t2 = result.trees
    s1, s2 = result.positions
    k1 = _limb_candidates(
        t1, s1, result.law, dn, pair.u1, pair.fork1, pair.fork1_child, pair.height, r0
    )
    k2 = _limb_candidates(
        t2, s2, result.law, dn, pair.u2, pair.fork2, pair.fork2_child, pair.height, r0
    )
    if not len(k1) or not len(k2):
        return 0
    uniq, inverse = np.unique(np.vstack([k1, k2]), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    tally1 = np.bincount(inverse[: len(k1)], minlength=len(uniq))
    tally2 = np.bincount(inverse[len(k1) :], minlength=len(uniq))
    return int(tally1 @ tally2)
