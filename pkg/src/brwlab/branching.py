"""Critical offspring laws and conditioned family trees.

This module owns the discrete-probability side of the laboratory: offspring
laws with their derived moments, the size-biased law that governs the first
generation hanging off a backbone vertex, extinction probabilities under a
hard deadline, the exact conditioned offspring laws obtained from them, and
level-synchronous samplers for single trees, forests and backbone trees.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.special
from numpy.typing import NDArray

MASS_ATOL = 1e-12
DEFAULT_VERTEX_LIMIT = 100_000_000


class ConditioningError(ValueError):
    """The requested conditioning event has probability zero."""


class TreeSizeError(RuntimeError):
    """A sample exceeded the configured vertex budget."""


@dataclass(frozen=True)
class ProgenyLaw:
    """Offspring distribution with finite support {0, ..., K}.

    pmf[k] is the probability of k children. Probabilities must be
    non-negative and sum to 1 within 1e-12; trailing zeros are trimmed so
    equal laws compare equal.
    """

    pmf: tuple[float, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        pmf = tuple(float(p) for p in self.pmf)
        if len(pmf) == 0:
            raise ValueError("empty pmf")
        if min(pmf) < 0.0:
            raise ValueError(f"negative probability in pmf: {min(pmf)}")
        total = float(np.sum(pmf))
        if abs(total - 1.0) > MASS_ATOL:
            raise ValueError(f"pmf sums to {total!r}, not 1 within {MASS_ATOL}")
        while len(pmf) > 1 and pmf[-1] == 0.0:
            pmf = pmf[:-1]
        object.__setattr__(self, "pmf", pmf)

    @property
    def max_children(self) -> int:
        return len(self.pmf) - 1

    @property
    def mean(self) -> float:
        k = np.arange(len(self.pmf))
        return float(np.dot(k, self.pmf))

    @property
    def sigma_sq(self) -> float:
        """Second factorial moment sum k(k-1) pmf[k]; equals the variance
        when the law is critical."""
        k = np.arange(len(self.pmf))
        return float(np.dot(k * (k - 1), self.pmf))

    @property
    def third_moment(self) -> float:
        """Third factorial moment sum k(k-1)(k-2) pmf[k]."""
        k = np.arange(len(self.pmf))
        return float(np.dot(k * (k - 1) * (k - 2), self.pmf))

    def is_critical(self, atol: float = MASS_ATOL) -> bool:
        return abs(self.mean - 1.0) <= atol

    def require_critical(self) -> None:
        if not self.is_critical():
            raise ValueError(
                f"law {self.name or self.pmf} has mean {self.mean!r}, expected 1"
            )

    def pgf(self, s: float) -> float:
        """Probability generating function sum_k pmf[k] s^k."""
        return float(np.polyval(list(reversed(self.pmf)), s))

    def as_array(self) -> NDArray[np.float64]:
        return np.asarray(self.pmf, dtype=np.float64)


def size_bias(law: ProgenyLaw) -> ProgenyLaw:
    """First-generation law off the backbone: q(k) = (k+1) p(k+1).

    Requires a critical law; the result is again a probability law and its
    mean equals sigma_sq of the input.
    """
    law.require_critical()
    p = law.as_array()
    k = np.arange(1, len(p))
    biased = k * p[1:]
    if len(biased) == 0:
        # p(0) = 1 would be mean 0, rejected above; unreachable but explicit.
        raise ValueError("law has no positive offspring mass")
    return ProgenyLaw(tuple(biased), name=f"size_bias({law.name})" if law.name else "")


def truncate(law: ProgenyLaw, max_children: int) -> ProgenyLaw:
    """Truncate a critical law to support {0, ..., max_children}.

    All mass above the cutoff is folded onto the cutoff, then the lost mean
    is restored by moving that amount of probability from 0 to 1 children.
    The result has sum 1 and mean 1 exactly (up to float rounding) and its
    third moment never exceeds the input's.
    """
    law.require_critical()
    if max_children < 1:
        raise ValueError("max_children must be >= 1")
    p = law.as_array()
    if len(p) <= max_children + 1:
        return law
    folded = p[: max_children + 1].copy()
    folded[max_children] += p[max_children + 1 :].sum()
    k = np.arange(len(folded))
    lost_mean = 1.0 - float(np.dot(k, folded))
    # lost_mean >= 0 since folding only pulls the mean down, and for a
    # critical law E(X - M)+ = 1 - E min(X, M) <= p(0), so the rebalance
    # below cannot go negative except by float rounding.
    if folded[0] < lost_mean - MASS_ATOL:
        raise ConditioningError(
            f"cannot rebalance: p(0)={folded[0]!r} < lost mean {lost_mean!r} "
            f"at cutoff {max_children}"
        )
    folded[0] = max(folded[0] - lost_mean, 0.0)
    folded[1] += lost_mean
    return ProgenyLaw(tuple(folded), name=f"{law.name}|<= {max_children}" if law.name else "")


def extinction_probs(law: ProgenyLaw, horizon: int) -> NDArray[np.float64]:
    """q[t] = P(tree of `law` is extinct within t generations), t = 0..horizon.

    q[0] = 0 and q[t+1] = f(q[t]) with f the generating function. Monotone
    nondecreasing in t.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    q = np.zeros(horizon + 1)
    for t in range(horizon):
        q[t + 1] = law.pgf(q[t])
    return q


def conditioned_offspring(
    law: ProgenyLaw, q: NDArray[np.float64], t: int
) -> ProgenyLaw:
    """Offspring law conditioned on extinction within t further generations.

    p_t(k) = p(k) q[t-1]^k / q[t]. Sums to 1 exactly because
    q[t] = f(q[t-1]).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if t >= len(q):
        raise ValueError(f"extinction table too short: need q[{t}]")
    if q[t] <= 0.0:
        raise ConditioningError(f"extinction within {t} generations has probability 0")
    p = law.as_array()
    k = np.arange(len(p))
    weights = p * np.power(q[t - 1], k)  # 0^0 == 1 as needed at t=1
    return ProgenyLaw(tuple(weights / weights.sum()))


# ---------------------------------------------------------------------------
# Conditioned sampling tables
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=128)
def _cond_tables(pmf: tuple[float, ...], horizon: int):
    """Extinction table and per-budget conditioned offspring CDFs.

    Returns (q, cdf) where q has length horizon+1 and cdf[s] is the CDF of
    the offspring law conditioned on extinction within s more generations
    (rows for s=0 and for impossible budgets are all zero and flagged in
    the companion validity mask).
    """
    law = ProgenyLaw(pmf)
    q = extinction_probs(law, horizon)
    p = law.as_array()
    k = np.arange(len(p))
    cdf = np.zeros((horizon + 1, len(p)))
    valid = np.zeros(horizon + 1, dtype=bool)
    for s in range(1, horizon + 1):
        if q[s] <= 0.0:
            continue
        w = p * np.power(q[s - 1], k)
        cdf[s] = np.cumsum(w / w.sum())
        valid[s] = True
    return q, cdf, valid


def _draw_counts(cdf_row: NDArray[np.float64], rng: np.random.Generator, size: int):
    """Inverse-CDF draw of offspring counts, vectorized."""
    u = rng.random(size)
    idx = np.searchsorted(cdf_row, u, side="right")
    return np.minimum(idx, len(cdf_row) - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------


@dataclass
class GWTree:
    """A sampled family tree; vertex 0 is the root, parents precede children."""

    parent: NDArray[np.int32]
    height: NDArray[np.int32]

    @property
    def num_vertices(self) -> int:
        return len(self.parent)

    @property
    def max_height(self) -> int:
        return int(self.height.max())

    def shape_key(self) -> tuple:
        """Canonical nested-tuple encoding of the ordered tree shape."""
        children: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for v in range(1, self.num_vertices):
            children[self.parent[v]].append(v)

        def enc(v: int) -> tuple:
            return tuple(enc(c) for c in children[v])

        return enc(0)


@dataclass
class CondTree:
    """Backbone tree: a spine of n+1 vertices with conditioned side trees.

    Vertices 0..n are the backbone (vertex i at height i). Side vertices
    follow in level-synchronous order. side_root[v] is the backbone index
    whose side tree contains v (-1 on the backbone); anchor[v] is the first
    off-backbone ancestor of v (itself for a first-generation side vertex,
    -1 on the backbone).
    """

    n: int
    m: int
    parent: NDArray[np.int32]
    height: NDArray[np.int32]
    side_root: NDArray[np.int32]
    anchor: NDArray[np.int32]
    max_height_sampled: int = -1  # heights above this were deliberately not sampled
    side_window: tuple[int, int] | None = None  # only these side trees were sampled

    @property
    def num_vertices(self) -> int:
        return len(self.parent)

    @property
    def backbone(self) -> NDArray[np.int32]:
        return np.arange(self.n + 1, dtype=np.int32)

    def children_lists(self) -> tuple[NDArray[np.int32], NDArray[np.int32]]:
        """CSR-style children adjacency: (offsets, child_ids)."""
        order = np.argsort(self.parent[1:], kind="stable") + 1
        sorted_parents = self.parent[order]
        counts = np.bincount(sorted_parents[sorted_parents >= 0], minlength=self.num_vertices)
        offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return offsets, order[sorted_parents >= 0].astype(np.int32)

    def max_descendant_height(self) -> NDArray[np.int32]:
        """For each vertex, the greatest height among its descendants (incl. itself)."""
        out = self.height.astype(np.int32).copy()
        # children always carry larger heights, so one sweep from the deepest
        # level upward settles everything.
        order = np.argsort(self.height, kind="stable")[::-1]
        for v in order:
            p = self.parent[v]
            if p >= 0 and out[p] < out[v]:
                out[p] = out[v]
        return out

    def subtree_vertices(self, v: int, max_height: int | None = None) -> NDArray[np.int32]:
        """All descendants of v including v, optionally capped in height."""
        offsets, kids = self.children_lists()
        out = [v]
        stack = [v]
        while stack:
            u = stack.pop()
            for c in kids[offsets[u] : offsets[u + 1]]:
                if max_height is not None and self.height[c] > max_height:
                    continue
                out.append(int(c))
                stack.append(int(c))
        return np.asarray(sorted(out), dtype=np.int32)

    def ancestor_at_height(self, v: int, h: int) -> int:
        """The ancestor of v at height h (v itself if heights match)."""
        if self.height[v] < h:
            raise ValueError("vertex lies below the requested height")
        u = v
        while self.height[u] > h:
            u = int(self.parent[u])
        return u


def _max_descendant_height_fast(parent, height) -> NDArray[np.int32]:
    out = np.asarray(height, dtype=np.int32).copy()
    order = np.argsort(height, kind="stable")[::-1]
    ps = np.asarray(parent)
    for v in order:
        p = ps[v]
        if p >= 0 and out[p] < out[v]:
            out[p] = out[v]
    return out


def subtree_off_backbone(tree: CondTree, ell: int) -> NDArray[np.int32]:
    """Vertex ids of the side tree emanating from backbone vertex ell,
    including the backbone vertex itself.

    The subtrees for ell = 0..n partition the vertex set.
    """
    if not 0 <= ell <= tree.n:
        raise ValueError(f"backbone index {ell} out of range 0..{tree.n}")
    ids = np.nonzero(tree.side_root == ell)[0].astype(np.int32)
    return np.concatenate(([np.int32(ell)], ids))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _forest_level_sync(
    body: ProgenyLaw,
    root_heights: NDArray[np.int64],
    root_first_gen: ProgenyLaw | None,
    deadline: int | None,
    rng: np.random.Generator,
    max_height: int | None,
    limit: int,
):
    """Shared level-synchronous forest engine.

    Roots are external: the returned vertices all have parents, either a
    root index (encoded as -(r+1) in the parent column, translated by the
    caller) or another new vertex. Root r sits at root_heights[r]; its
    children are drawn from root_first_gen (or body if None), conditioned
    to die out by the absolute deadline when one is given. All deeper draws
    use body under the same absolute deadline.

    Returns (parent, height, tree_id, anchor_local) arrays where parent<0
    encodes "child of root -(parent+1)" and anchor_local is the index of the
    vertex's first-generation ancestor within the new arrays.
    """
    first_gen = root_first_gen if root_first_gen is not None else body
    horizon = deadline if deadline is not None else 0
    if deadline is not None:
        q, body_cdf, body_valid = _cond_tables(body.pmf, horizon)
        fg = first_gen.as_array()
        kk = np.arange(len(fg))
    else:
        plain_cdf = np.cumsum(body.as_array())
        fg_cdf = np.cumsum(first_gen.as_array())

    heights = np.asarray(root_heights, dtype=np.int64)
    if deadline is not None and np.any(heights >= deadline):
        raise ValueError("root at or above the deadline height")

    out_parent: list[NDArray] = []
    out_height: list[NDArray] = []
    out_tree: list[NDArray] = []
    out_anchor: list[NDArray] = []
    total = 0

    # Active cohort for the level about to give birth.
    act_ids: NDArray[np.int64] = np.empty(0, dtype=np.int64)  # global new-vertex ids
    act_tree: NDArray[np.int64] = np.empty(0, dtype=np.int64)
    act_anchor: NDArray[np.int64] = np.empty(0, dtype=np.int64)

    h_min = int(heights.min()) if len(heights) else 0
    h_stop = max_height if max_height is not None else (deadline - 1 if deadline is not None else None)
    if h_stop is None:
        raise ValueError("need a deadline or a max_height to bound sampling")

    for h in range(h_min + 1, h_stop + 1):
        new_parent = []
        new_tree = []
        new_anchor = []
        # births from roots sitting at h-1
        root_mask = heights == h - 1
        if np.any(root_mask):
            roots = np.nonzero(root_mask)[0]
            if deadline is not None:
                t = deadline - (h - 1)
                w = fg * np.power(q[t - 1], kk)
                norm = w.sum()
                if norm <= 0.0:
                    raise ConditioningError(
                        f"first generation cannot die out within {t} generations"
                    )
                counts = _draw_counts(np.cumsum(w / norm), rng, len(roots))
            else:
                counts = _draw_counts(fg_cdf, rng, len(roots))
            rep = np.repeat(roots, counts)
            new_parent.append(-(rep + 1))
            new_tree.append(rep)
            new_anchor.append(np.full(len(rep), -1, dtype=np.int64))  # fixed below
        # births from the active side cohort at h-1
        if len(act_ids):
            if deadline is not None:
                s = deadline - (h - 1)
                if not body_valid[s]:
                    raise ConditioningError(
                        f"extinction within {s} generations has probability 0"
                    )
                counts = _draw_counts(body_cdf[s], rng, len(act_ids))
            else:
                counts = _draw_counts(plain_cdf, rng, len(act_ids))
            rep = np.repeat(np.arange(len(act_ids)), counts)
            new_parent.append(act_ids[rep])
            new_tree.append(act_tree[rep])
            new_anchor.append(act_anchor[rep])
        if not new_parent:
            act_ids = np.empty(0, dtype=np.int64)
            if not np.any(heights >= h):
                break
            continue
        parent_h = np.concatenate(new_parent)
        tree_h = np.concatenate(new_tree)
        anchor_h = np.concatenate(new_anchor)
        ids_h = total + np.arange(len(parent_h), dtype=np.int64)
        # first-generation vertices anchor to themselves
        first_gen_mask = anchor_h < 0
        anchor_h = np.where(first_gen_mask, ids_h, anchor_h)
        total += len(parent_h)
        if total > limit:
            raise TreeSizeError(f"sample exceeded vertex limit {limit}")
        out_parent.append(parent_h)
        out_height.append(np.full(len(parent_h), h, dtype=np.int64))
        out_tree.append(tree_h)
        out_anchor.append(anchor_h)
        act_ids, act_tree, act_anchor = ids_h, tree_h, anchor_h
        if len(act_ids) == 0 and not np.any(heights >= h):
            break

    # Roots at deadline-1 are forced childless; that is only consistent if
    # the first-generation law allows zero children. The loop above never
    # reaches their birth level, so check here.
    if (
        deadline is not None
        and np.any(heights == deadline - 1)
        and first_gen.pmf[0] == 0.0
    ):
        raise ConditioningError("first generation cannot die out within 1 generation")

    if total == 0:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), z.copy(), z.copy()
    return (
        np.concatenate(out_parent),
        np.concatenate(out_height),
        np.concatenate(out_tree),
        np.concatenate(out_anchor),
    )


def sample_conditioned_gw(
    first_gen: ProgenyLaw,
    body: ProgenyLaw,
    deadline: int,
    rng: np.random.Generator,
    limit: int = DEFAULT_VERTEX_LIMIT,
) -> GWTree:
    """Sample one tree, first generation from first_gen and later ones from
    body, conditioned to die out within `deadline` generations (no vertex at
    generation `deadline`). The exact conditional law is sampled via the
    extinction-probability tilt, no rejection involved.
    """
    if deadline < 1:
        raise ValueError("deadline must be >= 1")
    parent, height, _, _ = _forest_level_sync(
        body,
        np.zeros(1, dtype=np.int64),
        first_gen,
        deadline,
        rng,
        None,
        limit,
    )
    # root id 0, sampled vertices shift up by one
    par = np.concatenate(([-1], np.where(parent < 0, 0, parent + 1))).astype(np.int32)
    hei = np.concatenate(([0], height)).astype(np.int32)
    return GWTree(parent=par, height=hei)


def sample_gw_forest(
    first_gen: ProgenyLaw,
    body: ProgenyLaw,
    deadline: int | None,
    count: int,
    rng: np.random.Generator,
    max_height: int | None = None,
    limit: int = DEFAULT_VERTEX_LIMIT,
):
    """Sample `count` independent trees at once (for frequency tests).

    With deadline=None the trees are unconditioned but must be capped by
    max_height. Returns (parent, height, tree_id) covering non-root
    vertices only; roots are implicit (one per tree at height 0).
    """
    parent, height, tree_id, _ = _forest_level_sync(
        body,
        np.zeros(count, dtype=np.int64),
        first_gen,
        deadline,
        rng,
        max_height,
        limit,
    )
    return parent, height, tree_id


def sample_backbone_tree(
    p: ProgenyLaw,
    n: int,
    m: int,
    rng: np.random.Generator,
    max_height: int | None = None,
    side_window: tuple[int, int] | None = None,
    limit: int = DEFAULT_VERTEX_LIMIT,
) -> CondTree:
    """Sample the finite backbone approximation of the incipient tree.

    Backbone vertices V_0..V_n at heights 0..n; each V_i carries a side
    tree whose first generation follows the size-biased law and later
    generations follow p, conditioned to die out by absolute time m (no
    vertex at height m).

    max_height truncates sampling above that height; the result is then a
    bit-identical prefix of the full sample for the same generator state.
    side_window=(lo, hi) samples only the side trees rooted at backbone
    indices lo..hi inclusive (different draws, same marginal law for the
    sampled part).
    """
    p.require_critical()
    if n < 0:
        raise ValueError("n must be >= 0")
    if m < 2 * n:
        raise ValueError(f"m={m} must be at least 2n={2 * n}")
    if m < 1:
        raise ValueError("m must be >= 1")
    p_tilde = size_bias(p)

    lo, hi = (0, n) if side_window is None else side_window
    if not (0 <= lo <= hi <= n):
        raise ValueError(f"side window {side_window} out of range 0..{n}")
    root_ids = np.arange(lo, hi + 1, dtype=np.int64)
    parent, height, tree_id, anchor = _forest_level_sync(
        p,
        root_ids,  # heights equal backbone indices
        p_tilde,
        m,
        rng,
        max_height,
        limit,
    )
    nb = n + 1
    v_parent = np.concatenate(
        (
            np.arange(-1, n, dtype=np.int64),
            np.where(parent < 0, -parent - 1 + lo, parent + nb),
        )
    ).astype(np.int32)
    v_height = np.concatenate((np.arange(nb, dtype=np.int64), height)).astype(np.int32)
    v_side = np.concatenate(
        (np.full(nb, -1, dtype=np.int64), tree_id + lo)
    ).astype(np.int32)
    v_anchor = np.concatenate(
        (np.full(nb, -1, dtype=np.int64), anchor + nb)
    ).astype(np.int32)
    return CondTree(
        n=n,
        m=m,
        parent=v_parent,
        height=v_height,
        side_root=v_side,
        anchor=v_anchor,
        max_height_sampled=m - 1 if max_height is None else min(max_height, m - 1),
        side_window=None if side_window is None else (lo, hi),
    )


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def _geometric_half(max_children: int = 64) -> ProgenyLaw:
    # Tail beyond k=79 is 2^-80, far below the validation tolerance; truncate()
    # folds the tail and restores the mean exactly.
    k = np.arange(80)
    raw = ProgenyLaw(tuple(0.5 ** (k + 1)), name="geometric")
    return truncate(raw, max_children)


def _poisson_one(max_children: int = 32) -> ProgenyLaw:
    k = np.arange(48)
    logp = -1.0 - scipy.special.gammaln(k + 1)
    raw = ProgenyLaw(tuple(np.exp(logp)), name="poisson1")
    return truncate(raw, max_children)


PROGENY_PRESETS: dict[str, ProgenyLaw] = {
    "binary": ProgenyLaw((0.5, 0.0, 0.5), name="binary"),
    "geometric": _geometric_half(),
    "poisson1": _poisson_one(),
    "degenerate_path": ProgenyLaw((0.0, 1.0), name="degenerate_path"),
}


def progeny_preset(name: str) -> ProgenyLaw:
    try:
        return PROGENY_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown progeny preset {name!r}; choose from {sorted(PROGENY_PRESETS)}"
        ) from None
