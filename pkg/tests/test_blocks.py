"""Block detectors, collision enumeration, and the two-tree experiment.

The hand-built trees use delta_n=24, k=2, n=96, m=192, so exactly one
block starts at index 0. Its gate windows are [6,18] and [30,42], the
collision height window is [68,72], and the fork height window [60,64].
Every expected value below is settled by hand from those windows before
the assertions freeze it.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from brwlab import blocks, trace
from brwlab.blocks import (
    BlockNotGoodError,
    BlockParams,
    BlockRangeError,
    common_ancestor,
    detect_spatially_good,
    detect_tree_good,
    enumerate_intersections,
    extra_intersections,
    has_udp,
    two_tree_experiment,
    typically_spaced,
    vertex_sites,
)
from brwlab.branching import CondTree, progeny_preset, sample_backbone_tree
from brwlab.walk import norm_sq, step_preset

BINARY = progeny_preset("binary")
GEOMETRIC = progeny_preset("geometric")
D1 = step_preset("srw_d1")
D2 = step_preset("srw_d2")

PARAMS = BlockParams(k=2, delta_n=24, n=96, m=192, c0_prime=0.1)


# ---------------------------------------------------------------------------
# Hand-built trees
# ---------------------------------------------------------------------------


class HandTree:
    """Incrementally grown backbone tree with hand-assigned embedding sites."""

    def __init__(self, n: int, m: int, dim: int = 1):
        self.n, self.m, self.dim = n, m, dim
        self.parent = list(range(-1, n))
        self.height = list(range(n + 1))
        self.side_root = [-1] * (n + 1)
        self.anchor = [-1] * (n + 1)
        self.site = [np.zeros(dim, dtype=np.int64) for _ in range(n + 1)]

    def grow(self, attach: int, sites) -> list[int]:
        """Append a path above `attach`; sites[j] is the embedded site of
        the j-th new vertex (heights attach+1, attach+2, ...)."""
        ids = []
        prev = int(attach)
        for s in sites:
            v = len(self.parent)
            self.parent.append(prev)
            self.height.append(self.height[prev] + 1)
            if self.side_root[prev] < 0:
                self.side_root.append(prev)
                self.anchor.append(v)
            else:
                self.side_root.append(self.side_root[prev])
                self.anchor.append(self.anchor[prev])
            self.site.append(np.atleast_1d(np.asarray(s, dtype=np.int64)))
            ids.append(v)
            prev = v
        return ids

    def chain(self, attach: int, top: int, site=0) -> list[int]:
        """Single path from `attach` up to height `top`, all at one site."""
        return self.grow(attach, [site] * (top - self.height[attach]))

    def build(self) -> tuple[CondTree, np.ndarray]:
        tree = CondTree(
            n=self.n,
            m=self.m,
            parent=np.asarray(self.parent, dtype=np.int32),
            height=np.asarray(self.height, dtype=np.int32),
            side_root=np.asarray(self.side_root, dtype=np.int32),
            anchor=np.asarray(self.anchor, dtype=np.int32),
            max_height_sampled=self.m - 1,
        )
        return tree, np.vstack(self.site)


def at_height(hb: HandTree, ids: list[int], h: int) -> int:
    return next(v for v in ids if hb.height[v] == h)


def good_block():
    """One fully good block: gates at 12 and 36, single survivor chains to
    height 96, plus one branch near the top of each designated subtree.
    The branches run at sites +1 and -1 and only their tips (height 70)
    land on a common site, so the block holds exactly one collision."""
    hb = HandTree(96, 192)
    long1 = hb.chain(12, 96)  # survivors at 24, 48, 72
    long2 = hb.chain(36, 96)  # survivors at 48, 72
    b1 = hb.grow(at_height(hb, long2, 62), [1] * 7 + [0])
    b2 = hb.grow(at_height(hb, long1, 61), [-1] * 8 + [0])
    return hb, long1, long2, b1, b2


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def test_params_decomposition_hand_values():
    # n = 96: one full block, then 96 - 48 = 48 = 1*24 + 24
    assert PARAMS.full_blocks == 1
    assert PARAMS.k_prime == 1
    assert PARAMS.n_tilde == 24
    assert PARAMS.block_starts == (0,)
    assert PARAMS.delta == Fraction(1, 4)
    # n = 120: two full blocks, remainder 24 splits as 0*24 + 24
    q = BlockParams(k=2, delta_n=24, n=120, m=240, c0_prime=1.0)
    assert (q.full_blocks, q.k_prime, q.n_tilde) == (2, 0, 24)
    assert q.block_starts == (0, 2)
    # n = 240: four full blocks, remainder 48 splits as 1*24 + 24
    q = BlockParams(k=2, delta_n=24, n=240, m=480, c0_prime=1.0)
    assert (q.full_blocks, q.k_prime, q.n_tilde) == (4, 1, 24)
    assert q.block_starts == (0, 2, 4, 6)


def test_params_decomposition_identity():
    for k, dn, n in [(2, 24, 96), (2, 24, 250), (3, 24, 1000), (4, 48, 3000)]:
        q = BlockParams(k=k, delta_n=dn, n=n, m=2 * n, c0_prime=1.0)
        assert (
            q.full_blocks * k * dn + q.k_prime * dn + q.n_tilde == n
        )
        assert 0 <= q.k_prime < k
        assert dn <= q.n_tilde < 2 * dn
        assert q.full_blocks >= 1


def test_params_validation():
    with pytest.raises(ValueError):
        BlockParams(k=1, delta_n=24, n=96, m=192, c0_prime=1.0)
    with pytest.raises(ValueError):
        BlockParams(k=2, delta_n=36, n=144, m=288, c0_prime=1.0)  # not 24-divisible
    with pytest.raises(ValueError):
        BlockParams(k=2, delta_n=0, n=96, m=192, c0_prime=1.0)
    with pytest.raises(ValueError):
        BlockParams(k=2, delta_n=24, n=95, m=190, c0_prime=1.0)  # k*dn > n/2
    with pytest.raises(ValueError):
        BlockParams(k=2, delta_n=24, n=96, m=191, c0_prime=1.0)  # m < 2n
    with pytest.raises(ValueError):
        BlockParams(k=2, delta_n=24, n=96, m=192, c0_prime=0.0)
    with pytest.raises(ValueError):
        BlockParams(k=2, delta_n=24, n=96, m=192, c0_prime=1.0, n_star=0)


def test_b_prime_threshold_frozen():
    # geometric progeny has variance 2, d=1 walk has unit covariance:
    # 0.1 * 2^2 * log 24 = 1.2712215321391783
    q = BlockParams(k=2, delta_n=24, n=96, m=192, c0_prime=0.1)
    assert math.isclose(
        q.b_prime_threshold(GEOMETRIC, D1), 1.2712215321391783, rel_tol=1e-12
    )
    # binary progeny has variance 1; the d=6 walk's covariance is I/6, so
    # the determinant factor contributes 6^3 = 216:
    # 0.1 * 1 * 216 * log 24 = 68.64596273551563
    assert math.isclose(
        q.b_prime_threshold(BINARY, step_preset("srw_d6")),
        68.64596273551563,
        rel_tol=1e-12,
    )


# ---------------------------------------------------------------------------
# Unique-survivor queries
# ---------------------------------------------------------------------------


def test_has_udp_engineered_tree():
    hb, long1, long2, b1, b2 = good_block()
    tree, _ = hb.build()
    assert has_udp(tree, 12, 24)  # one side descendant at 24 survives to 48
    assert has_udp(tree, 36, 24)
    assert not has_udp(tree, 0, 24)  # empty side tree
    assert has_udp(tree, at_height(hb, long1, 24), 24)
    assert has_udp(tree, at_height(hb, long1, 48), 24)


def test_has_udp_bare_backbone_has_none():
    # the backbone continuation never counts as the survivor, so a spine
    # without side trees fails everywhere
    tree, _ = HandTree(96, 192).build()
    for v in (0, 12, 24, 48):
        assert not has_udp(tree, v, 24)


def test_has_udp_leaf_is_false():
    hb = HandTree(96, 192)
    leaf = hb.grow(47, [0])[0]  # single side vertex at height 48
    tree, _ = hb.build()
    assert not has_udp(tree, leaf, 24)


def test_has_udp_two_survivors_is_false():
    hb = HandTree(96, 192)
    hb.chain(12, 96)
    hb.chain(12, 50)  # a second branch of the same side tree reaching 48
    tree, _ = hb.build()
    assert not has_udp(tree, 12, 24)


def test_has_udp_errors():
    hb, long1, *_ = good_block()
    tree, _ = hb.build()
    off_grid = at_height(hb, long1, 13)
    with pytest.raises(BlockRangeError):
        has_udp(tree, off_grid, 24)
    with pytest.raises(BlockRangeError):
        has_udp(tree, tree.num_vertices, 24)
    with pytest.raises(ValueError):
        has_udp(tree, 0, 0)


def test_typically_spaced_inclusive_boundary():
    hb = HandTree(96, 192)
    ids = hb.grow(0, [0, 0, 2, 2])  # heights 1..4
    tree, pos = hb.build()
    assert typically_spaced(tree, pos, D1, 0, ids[0])  # gap 0 <= 1
    assert not typically_spaced(tree, pos, D1, 0, ids[2])  # gap 4 > 3
    assert typically_spaced(tree, pos, D1, 0, ids[3])  # gap 4 <= 4, boundary holds


def test_typically_spaced_d2_boundary():
    hb = HandTree(96, 192, dim=2)
    ids = hb.grow(0, [(0, 0), (1, 1)])  # heights 1, 2; site (1,1) has norm 2
    tree, pos = hb.build()
    assert typically_spaced(tree, pos, D2, 0, ids[1])
    assert not typically_spaced(tree, pos, D2, ids[0], ids[1])  # gap 2 > 1


def test_typically_spaced_requires_strict_descendant():
    hb, long1, long2, *_ = good_block()
    tree, pos = hb.build()
    with pytest.raises(ValueError):
        typically_spaced(tree, pos, D1, long1[0], long2[5])  # unrelated lines
    with pytest.raises(ValueError):
        typically_spaced(tree, pos, D1, long1[0], long1[0])
    with pytest.raises(ValueError):
        typically_spaced(tree, pos, D1, long1[3], long1[0])  # reversed


# ---------------------------------------------------------------------------
# Tree-goodness detection
# ---------------------------------------------------------------------------


def test_detect_tree_good_engineered():
    hb, long1, long2, *_ = good_block()
    tree, _ = hb.build()
    rep = detect_tree_good(tree, 0, PARAMS)
    assert rep.gate1_unique and rep.chain1_complete
    assert rep.gate2_unique and rep.chain2_complete
    assert rep.tree_good
    assert rep.gate1 == 12 and rep.gate2 == 36
    assert rep.chain1 == tuple(at_height(hb, long1, h) for h in (24, 48, 72))
    assert rep.chain2 == tuple(at_height(hb, long2, h) for h in (48, 72))
    assert rep.gate1_child == long1[0]
    assert rep.gate2_child == long2[0]
    # goodness not yet settled: the spacing conditions were not evaluated
    assert rep.good is None and rep.backbone_spaced is None


def test_detect_tree_good_is_deterministic():
    tree, _ = good_block()[0].build()
    assert detect_tree_good(tree, 0, PARAMS) == detect_tree_good(tree, 0, PARAMS)


def test_detect_bare_backbone_fails_first_gate():
    tree, pos = HandTree(96, 192).build()
    rep = detect_tree_good(tree, 0, PARAMS)
    assert rep.gate1 is None and not rep.gate1_unique
    assert rep.chain1 == () and not rep.tree_good
    rep = detect_spatially_good(tree, pos, D1, rep, PARAMS)
    assert rep.good is False
    with pytest.raises(BlockNotGoodError):
        enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS)


def test_detect_two_reaching_side_trees_breaks_uniqueness():
    hb, *_ = good_block()
    hb.chain(15, 50)  # a second side tree in the first window reaching 48
    tree, _ = hb.build()
    rep = detect_tree_good(tree, 0, PARAMS)
    assert rep.gate1 is None and not rep.gate1_unique


def test_detect_gate_outside_window():
    hb = HandTree(96, 192)
    hb.chain(3, 96)  # unique but below the quarter mark at level 6
    hb.chain(36, 96)
    tree, _ = hb.build()
    rep = detect_tree_good(tree, 0, PARAMS)
    assert rep.gate1 == 3 and not rep.gate1_unique


def test_detect_chain_break_second_survivor():
    hb, long1, *_ = good_block()
    # branch off the first chain at height 30 and keep it alive to 72: the
    # survivor at level 48 is no longer unique
    hb.chain(at_height(hb, long1, 30), 72)
    tree, _ = hb.build()
    rep = detect_tree_good(tree, 0, PARAMS)
    assert rep.gate1_unique
    assert len(rep.chain1) == 1 and not rep.chain1_complete
    assert not rep.chain2_complete


def test_detect_missing_top_extension():
    hb = HandTree(96, 192)
    hb.chain(12, 95)  # survivors at 24 and 48, but level 72 dies before 96
    hb.chain(36, 96)
    tree, _ = hb.build()
    rep = detect_tree_good(tree, 0, PARAMS)
    assert rep.gate1_unique and rep.chain1_complete  # chain reached level 48
    assert len(rep.chain1) == 2
    assert rep.gate2_unique and not rep.chain2_complete
    assert not rep.tree_good


def test_detect_block_range_and_tree_checks():
    tree, _ = good_block()[0].build()
    with pytest.raises(BlockRangeError):
        detect_tree_good(tree, 1, PARAMS)
    with pytest.raises(BlockRangeError):
        detect_tree_good(tree, 2, PARAMS)  # only one full block fits
    other = BlockParams(k=2, delta_n=24, n=120, m=240, c0_prime=1.0)
    with pytest.raises(ValueError):
        detect_tree_good(tree, 0, other)
    rng = np.random.default_rng(0)
    windowed = sample_backbone_tree(BINARY, 96, 192, rng, side_window=(6, 18))
    with pytest.raises(ValueError):
        detect_tree_good(windowed, 0, PARAMS)
    capped = sample_backbone_tree(BINARY, 96, 192, rng, max_height=96)
    with pytest.raises(ValueError):
        detect_tree_good(capped, 0, PARAMS)


def test_detect_on_sampled_trees_matches_direct_recount():
    # gate flags recomputed naively from per-level side-tree reach
    for seed in range(25):
        rng = np.random.default_rng(seed)
        tree = sample_backbone_tree(GEOMETRIC, 96, 192, rng)
        rep = detect_tree_good(tree, 0, PARAMS)
        reach = []
        for ell in range(24):
            ids = np.nonzero(tree.side_root == ell)[0]
            top = int(tree.height[ids].max()) if len(ids) else ell
            reach.append(top >= 48)
        hits = [ell for ell, r in enumerate(reach) if r]
        if len(hits) == 1:
            assert rep.gate1 == hits[0]
            assert rep.gate1_unique == (6 <= hits[0] <= 18)
        else:
            assert rep.gate1 is None and not rep.gate1_unique


# ---------------------------------------------------------------------------
# Spatial goodness
# ---------------------------------------------------------------------------


def good_report():
    hb, long1, long2, b1, b2 = good_block()
    tree, pos = hb.build()
    rep = detect_tree_good(tree, 0, PARAMS)
    rep = detect_spatially_good(tree, pos, D1, rep, PARAMS)
    return hb, tree, pos, rep, long1, long2, b1, b2


def test_spatially_good_engineered():
    _, _, _, rep, *_ = good_report()
    assert rep.backbone_spaced and rep.chains_spaced and rep.good


def test_spatial_backbone_violation():
    hb, *_ = good_block()
    tree, pos = hb.build()
    pos[24] = 10  # corner drifts 10 sites in 11 steps from the gate child
    rep = detect_tree_good(tree, 0, PARAMS)
    rep = detect_spatially_good(tree, pos, D1, rep, PARAMS)
    assert not rep.backbone_spaced
    assert rep.chains_spaced  # the chains never touch the corner
    assert rep.good is False


def test_spatial_chain_violation():
    hb, long1, *_ = good_block()
    tree, pos = hb.build()
    pos[at_height(hb, long1, 24)] = 5  # 25 > 24 - 13 from the gate child
    rep = detect_spatially_good(tree, pos, D1, detect_tree_good(tree, 0, PARAMS), PARAMS)
    assert rep.backbone_spaced and not rep.chains_spaced and not rep.good


def test_spatial_endpoint_proximity_violation():
    # each chain hop stays diffusive but the two designated level-48
    # vertices end up 6 apart: 36 > 24 fails only the endpoint test
    hb, long1, long2, *_ = good_block()
    tree, pos = hb.build()
    pos[at_height(hb, long1, 24)] = 3
    for v in long1:
        if hb.height[v] >= 48:
            pos[v] = 6
    pos[at_height(hb, long1, 24)] = 3
    rep = detect_spatially_good(tree, pos, D1, detect_tree_good(tree, 0, PARAMS), PARAMS)
    assert rep.backbone_spaced
    assert not rep.chains_spaced
    assert not rep.good


# ---------------------------------------------------------------------------
# Collision enumeration inside a block
# ---------------------------------------------------------------------------


def _ancestor_list(tree, v):
    out = [int(v)]
    while tree.parent[out[-1]] >= 0:
        out.append(int(tree.parent[out[-1]]))
    return out


def _brute_lca(tree, u, w):
    other = set(_ancestor_list(tree, w))
    for a in _ancestor_list(tree, u):
        if a in other:
            return a
    raise AssertionError("disconnected tree")


def _brute_block_candidates(tree, pos, law, root, guide, base, dn):
    keep = []
    for v in range(tree.num_vertices):
        if v == root:
            continue
        anc = _ancestor_list(tree, v)
        if root not in anc:
            continue
        h = int(tree.height[v])
        if not Fraction(5, 6) * dn <= h - base <= dn:
            continue
        z = _brute_lca(tree, v, guide)
        hz = int(tree.height[z])
        if not Fraction(1, 2) * dn <= hz - base <= Fraction(2, 3) * dn:
            continue
        if norm_sq(law, pos[z] - pos[root]) > hz - base:
            continue
        zc = anc[h - hz - 1]  # the ancestor one level above the fork
        gap = norm_sq(law, pos[v] - pos[zc])
        if gap > h - hz - 1:
            continue
        primed = (h - base <= Fraction(11, 12) * dn) and 4 * gap <= h - hz - 1
        keep.append((v, h, tuple(int(c) for c in pos[v]), primed))
    return keep


def _brute_block_pairs(tree, pos, law, rep, params):
    dn, k = params.delta_n, params.k
    base = (rep.block_index + k) * dn
    first = _brute_block_candidates(tree, pos, law, rep.chain2[0], rep.chain2[1], base, dn)
    second = _brute_block_candidates(
        tree, pos, law, rep.chain1[k - 1], rep.chain1[k], base, dn
    )
    out = []
    for v1, h1, s1, p1 in first:
        for v2, h2, s2, p2 in second:
            if h1 == h2 and s1 == s2:
                out.append((v1, v2, p1 and p2))
    return sorted(out)


def test_enumerate_engineered_single_collision():
    hb, tree, pos, rep, long1, long2, b1, b2 = good_report()
    record = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS)
    assert record.count == 1
    pair = record.pairs[0]
    assert pair.u1 == b1[-1] and pair.u2 == b2[-1]
    assert pair.height == 70 and pair.site == (0,)
    assert pair.fork1 == at_height(hb, long2, 62)
    assert pair.fork2 == at_height(hb, long1, 61)
    assert pair.fork1_child == b1[0]
    assert pair.fork2_child == b2[0]
    # height 70 sits exactly on the tighter boundary (12*22 == 11*24) and
    # both branch gaps are small, so the pair is primed too
    assert pair.primed
    # report fields were written back
    assert rep.intersection_count == 1
    assert rep.b_prime is True  # 1 >= 0.1 * log 24
    # a large threshold flips the heavy flag
    strict = BlockParams(k=2, delta_n=24, n=96, m=192, c0_prime=10.0)
    record = enumerate_intersections(tree, pos, D1, BINARY, rep, strict)
    assert record.b_prime is False


def test_enumerate_disjoint_sites_no_collision():
    hb, long1, long2, b1, b2 = good_block()
    tree, pos = hb.build()
    for v in b2:
        pos[v] += 50  # push the second branch far away
    rep = detect_spatially_good(tree, pos, D1, detect_tree_good(tree, 0, PARAMS), PARAMS)
    assert rep.good
    record = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS)
    assert record.count == 0 and record.pairs == ()
    assert rep.b_prime is False


def test_enumerate_primed_subset():
    _, tree, pos, rep, *_ = good_report()
    full = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS)
    primed = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS, primed=True)
    plain_keys = {(p.u1, p.u2) for p in full.pairs}
    primed_keys = {(p.u1, p.u2) for p in primed.pairs}
    assert primed_keys <= plain_keys
    assert primed.count == sum(p.primed for p in full.pairs)


def _decorated_good_block(rng):
    """The engineered block plus random branches inside both designated
    subtrees, kept below level 72 so every survivor stays unique."""
    hb, long1, long2, b1, b2 = good_block()
    for host in (long1, long2):
        hosts = [v for v in host if 49 <= hb.height[v] <= 69]
        for _ in range(rng.integers(2, 7)):
            attach = hosts[rng.integers(len(hosts))]
            top = int(rng.integers(hb.height[attach] + 1, 72))
            steps = rng.choice([-1, 1], size=top - hb.height[attach])
            base_site = int(hb.site[attach][0])
            new = hb.grow(attach, list(base_site + np.cumsum(steps)))
            hosts.extend(v for v in new if hb.height[v] <= 69)
    tree, pos = hb.build()
    rep = detect_spatially_good(tree, pos, D1, detect_tree_good(tree, 0, PARAMS), PARAMS)
    assert rep.good, "decorations must not break the block"
    return tree, pos, rep


def test_enumerate_matches_brute_force_on_decorated_blocks():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        tree, pos, rep = _decorated_good_block(rng)
        record = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS)
        expected = _brute_block_pairs(tree, pos, D1, rep, PARAMS)
        got = sorted((p.u1, p.u2, p.primed) for p in record.pairs)
        assert got == expected
        primed = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS, primed=True)
        assert sorted((p.u1, p.u2, True) for p in primed.pairs) == [
            t for t in expected if t[2]
        ]


# ---------------------------------------------------------------------------
# Common ancestors
# ---------------------------------------------------------------------------


def test_common_ancestor_against_ancestor_sets():
    rng = np.random.default_rng(3)
    for seed in range(10):
        tree = sample_backbone_tree(BINARY, 48, 96, np.random.default_rng(seed))
        nv = tree.num_vertices
        for _ in range(50):
            u, w = int(rng.integers(nv)), int(rng.integers(nv))
            assert common_ancestor(tree, u, w) == _brute_lca(tree, u, w)


def test_common_ancestor_side_tree_identities():
    tree = sample_backbone_tree(GEOMETRIC, 48, 96, np.random.default_rng(11))
    side = np.nonzero(tree.side_root >= 0)[0]
    for v in side[:200]:
        v = int(v)
        # walking toward the backbone tip always meets at the attach vertex
        assert common_ancestor(tree, v, tree.n) == int(tree.side_root[v])
        assert common_ancestor(tree, v, v) == v
        assert common_ancestor(tree, v, int(tree.anchor[v])) == int(tree.anchor[v])


# ---------------------------------------------------------------------------
# Two-tree experiment
# ---------------------------------------------------------------------------


def _brute_two_tree_candidates(tree, pos, law, dn, skip=()):
    out = []
    for v in range(tree.num_vertices):
        h = int(tree.height[v])
        anc = _ancestor_list(tree, v)
        z = next(a for a in anc if tree.side_root[a] < 0)  # deepest backbone ancestor
        hz = int(tree.height[z])
        if h <= hz:
            continue  # backbone vertices have no fork above the guide line
        if "height_window" not in skip and not Fraction(5, 6) * dn <= h <= dn:
            continue
        if "fork_window" not in skip and not Fraction(1, 2) * dn <= hz <= Fraction(2, 3) * dn:
            continue
        if "root_spacing" not in skip and norm_sq(law, pos[z] - pos[0]) > hz:
            continue
        zc = anc[h - hz - 1]
        gap = norm_sq(law, pos[v] - pos[zc])
        if "child_spacing" not in skip and gap > h - hz - 1:
            continue
        primed = h <= Fraction(11, 12) * dn and 4 * gap <= h - hz - 1
        out.append((v, h, tuple(int(c) for c in pos[v]), primed))
    return out


def _brute_two_tree_pairs(result, skip=()):
    c1 = _brute_two_tree_candidates(
        result.trees[0], result.positions[0], result.law, result.delta_n, skip
    )
    c2 = _brute_two_tree_candidates(
        result.trees[1], result.positions[1], result.law, result.delta_n, skip
    )
    out = []
    for v1, h1, s1, p1 in c1:
        for v2, h2, s2, p2 in c2:
            if h1 != h2:
                continue
            if "site" not in skip and s1 != s2:
                continue
            out.append((v1, v2, p1 and p2))
    return sorted(out)


def test_two_tree_matches_brute_force():
    cases = (
        [(12, BINARY, D1)] * 12
        + [(24, BINARY, D1)] * 12
        + [(24, GEOMETRIC, D1)] * 8
        + [(24, BINARY, D2)] * 6
        + [(36, GEOMETRIC, D1)] * 4
    )
    for seed, (dn, progeny, law) in enumerate(cases):
        rng = np.random.default_rng(1000 + seed)
        res = two_tree_experiment(progeny, law, dn, [0] * law.dim, rng)
        expected = _brute_two_tree_pairs(res)
        got = sorted((p.u1, p.u2, p.primed) for p in res.records)
        assert got == expected
        assert res.count == len(expected)
        assert res.primed_count == sum(t[2] for t in expected)


def test_two_tree_primed_never_exceeds_plain():
    for seed in range(40):
        rng = np.random.default_rng(seed)
        res = two_tree_experiment(BINARY, D1, 24, [0], rng, records="none")
        assert 0 <= res.primed_count <= res.count


def test_two_tree_dropping_any_condition_never_reduces_count():
    conditions = ("height_window", "fork_window", "root_spacing", "child_spacing", "site")
    checked = 0
    for seed in range(30):
        rng = np.random.default_rng(2000 + seed)
        res = two_tree_experiment(BINARY, D1, 12, [0], rng)
        full = len(_brute_two_tree_pairs(res))
        for cond in conditions:
            assert len(_brute_two_tree_pairs(res, skip=(cond,))) >= full
        checked += res.count
    assert checked > 0  # the comparison saw real collisions, not just zeros


def test_two_tree_unreachable_offset_counts_nothing():
    # beyond 2*delta_n steps of maximal length nothing can meet
    far = int(2 * 24 * D1.max_step_norm) + 1
    for seed in range(10):
        rng = np.random.default_rng(seed)
        res = two_tree_experiment(BINARY, D1, 24, [far], rng, records="none")
        assert res.count == 0 and res.primed_count == 0


def test_two_tree_determinism_and_record_modes():
    a = two_tree_experiment(GEOMETRIC, D1, 24, [1], np.random.default_rng(42))
    b = two_tree_experiment(GEOMETRIC, D1, 24, [1], np.random.default_rng(42))
    assert a.count == b.count and a.records == b.records
    primed = two_tree_experiment(GEOMETRIC, D1, 24, [1], np.random.default_rng(42), records="primed")
    none = two_tree_experiment(GEOMETRIC, D1, 24, [1], np.random.default_rng(42), records="none")
    assert primed.count == a.count and none.count == a.count
    assert none.records is None
    assert primed.records == tuple(p for p in a.records if p.primed)
    assert len(primed.records) == a.primed_count


def test_two_tree_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        two_tree_experiment(BINARY, D1, 24, [0, 0], rng)  # offset dimension
    with pytest.raises(ValueError):
        two_tree_experiment(BINARY, D1, 2, [0], rng)  # degenerate window
    with pytest.raises(ValueError):
        two_tree_experiment(BINARY, D1, 24, [0], rng, records="some")


# ---------------------------------------------------------------------------
# Extra collisions above a recorded pair
# ---------------------------------------------------------------------------


def _brute_extra(result, pair, n_star=1):
    dn = result.delta_n
    law = result.law
    r0 = -((-3 * dn) // 4)
    if r0 > pair.height - n_star:
        return 0
    sides = []
    for tree, pos, u, fork, child in (
        (result.trees[0], result.positions[0], pair.u1, pair.fork1, pair.fork1_child),
        (result.trees[1], result.positions[1], pair.u2, pair.fork2, pair.fork2_child),
    ):
        anc_u = _ancestor_list(tree, u)
        hu = pair.height
        ell = int(tree.height[fork])
        keep = []
        for y in range(tree.num_vertices):
            hy = int(tree.height[y])
            if not hu <= hy <= dn:
                continue
            anc_y = _ancestor_list(tree, y)
            if child not in anc_y:
                continue  # outside the fork limb
            if hy > hu and anc_y[hy - hu] == u:
                continue  # strictly below the recorded vertex
            shared = any(
                anc_y[hy - r] == anc_u[hu - r] for r in range(r0, hu - n_star + 1)
            )
            if not shared:
                continue
            if norm_sq(law, pos[y] - pos[child]) > hy - ell - 1:
                continue
            keep.append((hy, tuple(int(c) for c in pos[y])))
        sides.append(keep)
    return sum(
        1 for a in sides[0] for b in sides[1] if a == b
    )


def test_extra_collisions_match_brute_and_include_seed():
    found = 0
    seed = 0
    while found < 8 and seed < 4000:
        rng = np.random.default_rng(seed)
        seed += 1
        res = two_tree_experiment(BINARY, D1, 24, [0], rng, records="primed")
        for pair in res.records:
            got = extra_intersections(res, pair)
            assert got == _brute_extra(res, pair)
            assert got >= 1  # the pair itself always qualifies here
            assert extra_intersections(res, pair, n_star=2) == _brute_extra(res, pair, n_star=2)
            found += 1
    assert found >= 8, "not enough primed pairs sampled for the comparison"


def test_extra_collisions_empty_window():
    rng = np.random.default_rng(1)
    while True:
        res = two_tree_experiment(BINARY, D1, 24, [0], rng, records="primed")
        if res.records:
            pair = res.records[0]
            break
    # for delta_n=24 the branch window is [18, height - n_star]; a margin
    # beyond height - 18 empties it
    assert extra_intersections(res, pair, n_star=pair.height - 17) == 0
    with pytest.raises(ValueError):
        extra_intersections(res, pair, n_star=0)


# ---------------------------------------------------------------------------
# Embedded-site helper and serialization
# ---------------------------------------------------------------------------


def test_vertex_sites_reads_back_the_embedding():
    rng = np.random.default_rng(5)
    tree = sample_backbone_tree(BINARY, 16, 32, rng)
    graph = trace.embed(tree, D2, rng)
    sites = vertex_sites(graph)
    assert sites.shape == (tree.num_vertices, 2)
    assert np.array_equal(sites[0], [0, 0])
    # backbone heights climb by one per level, and each vertex's site is a
    # single step away from its parent's
    for v in range(1, tree.num_vertices):
        assert D2.reachable(sites[v] - sites[int(tree.parent[v])], 1)


def test_reports_serialize_to_plain_json():
    import json

    _, tree, pos, rep, *_ = good_report()
    record = enumerate_intersections(tree, pos, D1, BINARY, rep, PARAMS)
    blob = json.dumps([rep.to_json(), record.to_json()])
    back = json.loads(blob)
    assert back[0]["good"] is True
    assert back[0]["conditions"]["5"] is True
    assert back[1]["count"] == 1
    assert back[1]["pairs"][0]["site"] == [0]
