"""Space-time embedding of sampled trees and the trace multigraph.

A tree vertex at height t maps to the point (x, t) reached by summing
independent step-law displacements along its ancestral line. The trace
keeps one record per space-time point but one edge per tree edge, so
parallel edges survive; collapsing them would change every resistance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .walk import StepLaw, sample_bridge


@dataclass
class TraceGraph:
    """Multigraph of space-time points visited by an embedded tree.

    Points are lexicographically sorted with time as the leading key, so
    each level is a contiguous index range. Edges are stored per source
    tree edge (edge_id is the child tree-vertex id); identical point
    pairs therefore appear once per parallel edge. vertex_point is the
    embedding map: tree vertex id -> point index (None for graphs read
    back from files, which carry no tree).
    """

    dim: int
    n: int
    times: NDArray[np.int64]
    coords: NDArray[np.int64]
    edge_tail: NDArray[np.int64]
    edge_head: NDArray[np.int64]
    edge_id: NDArray[np.int64]
    vertex_point: NDArray[np.int64] | None
    root_point: int

    @property
    def num_points(self) -> int:
        return len(self.times)

    @property
    def num_edges(self) -> int:
        return len(self.edge_tail)

    @property
    def max_time(self) -> int:
        return int(self.times[-1]) if len(self.times) else 0

    def level_points(self, t: int) -> NDArray[np.int64]:
        """Indices of the points at time t (contiguous by construction)."""
        if not 0 <= t <= self.max_time:
            raise ValueError(f"level {t} outside [0, {self.max_time}]")
        lo, hi = np.searchsorted(self.times, [t, t + 1])
        return np.arange(lo, hi, dtype=np.int64)

    def point_of_vertex(self, v: int) -> int:
        if self.vertex_point is None:
            raise ValueError("this graph was not built from a tree")
        return int(self.vertex_point[v])

    def collapsed_edges(self) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
        """Parallel edges merged into (tail, head, multiplicity) triples.

        Only for consumers that weight by multiplicity (conductances);
        the graph itself never collapses.
        """
        pairs = np.column_stack([self.edge_tail, self.edge_head])
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        return uniq[:, 0], uniq[:, 1], counts

    def write_edge_list(self, path: str) -> None:
        """One line per edge: t_tail x_tail.. t_head x_head.. edge_id."""
        d = self.dim
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# trace dim={d} n={self.n} points={self.num_points} edges={self.num_edges}\n")
            fh.write("# columns: t_tail x_tail[0..d) t_head x_head[0..d) edge_id\n")
            block = np.column_stack(
                [
                    self.times[self.edge_tail, None],
                    self.coords[self.edge_tail],
                    self.times[self.edge_head, None],
                    self.coords[self.edge_head],
                    self.edge_id[:, None],
                ]
            )
            np.savetxt(fh, block, fmt="%d")


def _vertex_positions(tree, disp: NDArray[np.int64], backbone_path=None) -> NDArray[np.int64]:
    """Positions of all tree vertices, accumulated level by level.

    disp[v-1] is the displacement of the edge into vertex v. When a
    backbone_path is given, vertices 0..n take those positions instead
    and their displacement draws are ignored.
    """
    height = np.asarray(tree.height)
    parent = np.asarray(tree.parent)
    nv = len(height)
    d = disp.shape[1]
    pos = np.zeros((nv, d), dtype=np.int64)
    fixed = np.zeros(nv, dtype=bool)
    if backbone_path is not None:
        nb = len(backbone_path)
        pos[:nb] = backbone_path
        fixed[:nb] = True
    order = np.argsort(height, kind="stable")
    sorted_h = height[order]
    bounds = np.searchsorted(sorted_h, np.arange(sorted_h[-1] + 2))
    for h in range(1, int(sorted_h[-1]) + 1):
        ids = order[bounds[h] : bounds[h + 1]]
        ids = ids[~fixed[ids]]
        if len(ids):
            pos[ids] = pos[parent[ids]] + disp[ids - 1]
    return pos


def _build(tree, dim: int, pos: NDArray[np.int64]) -> TraceGraph:
    height = np.asarray(tree.height, dtype=np.int64)
    parent = np.asarray(tree.parent)
    keyed = np.column_stack([height, pos])
    points, inverse = np.unique(keyed, axis=0, return_inverse=True)
    inverse = inverse.astype(np.int64).ravel()
    nv = len(height)
    return TraceGraph(
        dim=dim,
        n=getattr(tree, "n", int(height.max(initial=0))),
        times=points[:, 0].copy(),
        coords=points[:, 1:].copy(),
        edge_tail=inverse[parent[1:]],
        edge_head=inverse[1:],
        edge_id=np.arange(1, nv, dtype=np.int64),
        vertex_point=inverse,
        root_point=int(inverse[0]),
    )


def embed(tree, law: StepLaw, rng: np.random.Generator, origin=None) -> TraceGraph:
    """Embed a tree with iid step-law displacements on every edge.

    Displacements are drawn in one vectorized call indexed by child
    vertex id, so the result depends only on (tree, law, rng state), not
    on traversal order, and a height-truncated sample of the same tree
    embeds to the identical prefix.
    """
    nv = tree.num_vertices
    disp = law.sample_steps(rng, max(nv - 1, 1))[: nv - 1]
    pos = _vertex_positions(tree, disp)
    if origin is not None:
        pos = pos + np.asarray(origin, dtype=np.int64)[None, :]
    return _build(tree, law.dim, pos)


def embed_bridge(tree, law: StepLaw, endpoint, rng: np.random.Generator) -> TraceGraph:
    """Embed with the backbone conditioned to land on (endpoint, n).

    The backbone image follows the exact walk bridge; all off-backbone
    edges keep the unconditioned step law. The tree must expose a
    backbone (vertices 0..n), which CondTree does.
    """
    n = tree.n
    path = sample_bridge(law, n, endpoint, rng)
    nv = tree.num_vertices
    disp = law.sample_steps(rng, max(nv - 1, 1))[: nv - 1]
    pos = _vertex_positions(tree, disp, backbone_path=path)
    return _build(tree, law.dim, pos)


def read_edge_list(path: str) -> TraceGraph:
    """Rebuild a TraceGraph from the edge-list file format.

    The tree itself is gone, so vertex_point is None; points are
    recovered from edge endpoints (the root is the unique time-0 point).
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# trace dim="):
            raise ValueError(f"not a trace edge-list file: {path}")
        meta = dict(kv.split("=") for kv in header[2:].split() if "=" in kv)
        fh.readline()  # column comment
        body = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    d = int(meta["dim"])
    if body.shape[1] != 2 * (d + 1) + 1:
        raise ValueError("column count does not match declared dimension")
    tails = body[:, : d + 1]
    heads = body[:, d + 1 : 2 * (d + 1)]
    edge_id = body[:, -1]
    allpts = np.vstack([tails, heads])
    points, inverse = np.unique(allpts, axis=0, return_inverse=True)
    inverse = inverse.astype(np.int64).ravel()
    ne = len(body)
    times = points[:, 0].copy()
    root_candidates = np.flatnonzero(times == 0)
    if len(root_candidates) != 1:
        raise ValueError("expected exactly one time-0 point")
    return TraceGraph(
        dim=d,
        n=int(meta["n"]),
        times=times,
        coords=points[:, 1:].copy(),
        edge_tail=inverse[:ne],
        edge_head=inverse[ne:],
        edge_id=edge_id.copy(),
        vertex_point=None,
        root_point=int(root_candidates[0]),
    )
