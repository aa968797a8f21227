"""Effective resistance on unit-conductance multigraphs.

Parallel edges contribute integer multiplicity to the conductance. The
two-terminal solver is conjugate gradient on the grounded Laplacian with
Jacobi preconditioning; a dense pseudoinverse route serves as an
independent oracle and a sparse direct factorization covers very large
traces. Root-to-level resistance shorts the level by index remapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg
from numpy.typing import NDArray

from .trace import TraceGraph

CG_RTOL = 1e-10
CG_ITER_FACTOR = 20
DIRECT_THRESHOLD = 20_000
PINV_NODE_CAP = 2_000


class SolverError(RuntimeError):
    """Iterative solve failed to reach the required residual."""


class DisconnectedError(ValueError):
    """The two terminals lie in different components."""


@dataclass
class ResistanceResult:
    value: float
    iterations: int
    residual: float
    method: str

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)


@dataclass
class Network:
    """Weighted multigraph: parallel edges folded into integer weights."""

    num_nodes: int
    tail: NDArray[np.int64]
    head: NDArray[np.int64]
    weight: NDArray[np.float64]

    def __post_init__(self) -> None:
        self.tail = np.asarray(self.tail, dtype=np.int64)
        self.head = np.asarray(self.head, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (len(self.tail) == len(self.head) == len(self.weight)):
            raise ValueError("edge arrays must share a length")
        if len(self.tail) and (
            self.tail.min() < 0
            or self.head.min() < 0
            or max(self.tail.max(), self.head.max()) >= self.num_nodes
        ):
            raise ValueError("edge endpoint out of range")
        if np.any(self.tail == self.head):
            raise ValueError("self-loops are not allowed")
        if len(self.weight) and self.weight.min() <= 0:
            raise ValueError("conductances must be positive")

    @classmethod
    def from_trace(cls, trace: TraceGraph) -> "Network":
        tail, head, mult = trace.collapsed_edges()
        return cls(trace.num_points, tail, head, mult.astype(np.float64))

    @classmethod
    def from_edge_pairs(cls, num_nodes: int, pairs) -> "Network":
        """Build from (tail, head) pairs; repeats become multiplicity."""
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        canon = np.sort(arr, axis=1)
        uniq, counts = np.unique(canon, axis=0, return_counts=True)
        return cls(num_nodes, uniq[:, 0], uniq[:, 1], counts.astype(np.float64))

    @property
    def num_edges(self) -> int:
        """Edges counted with multiplicity."""
        return int(round(self.weight.sum()))

    def laplacian(self) -> scipy.sparse.csr_matrix:
        n = self.num_nodes
        i = np.concatenate([self.tail, self.head, self.tail, self.head])
        j = np.concatenate([self.head, self.tail, self.tail, self.head])
        v = np.concatenate([-self.weight, -self.weight, self.weight, self.weight])
        return scipy.sparse.coo_matrix((v, (i, j)), shape=(n, n)).tocsr()

    def component_labels(self) -> NDArray[np.int64]:
        adj = scipy.sparse.coo_matrix(
            (np.ones(len(self.tail)), (self.tail, self.head)),
            shape=(self.num_nodes, self.num_nodes),
        )
        _, labels = scipy.sparse.csgraph.connected_components(adj, directed=False)
        return labels

    def same_component(self, a: int, b: int) -> bool:
        labels = self.component_labels()
        return bool(labels[a] == labels[b])


def _as_network(graph) -> Network:
    if isinstance(graph, Network):
        return graph
    if isinstance(graph, TraceGraph):
        return Network.from_trace(graph)
    raise TypeError(f"cannot compute resistance on {type(graph).__name__}")


def _jacobi_cg(
    lap: scipy.sparse.csr_matrix, ground: int, rhs: NDArray[np.float64]
) -> tuple[NDArray[np.float64], int, float]:
    """Solve the grounded Laplacian system by preconditioned CG.

    Returns (solution embedded with 0 at ground, iterations, relative
    residual). Raises SolverError if the iteration cap is hit.
    """
    n = lap.shape[0]
    keep = np.flatnonzero(np.arange(n) != ground)
    a = lap[keep][:, keep].tocsr()
    b = rhs[keep]
    dinv = 1.0 / a.diagonal()
    x = np.zeros(len(b))
    r = b - a @ x
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    z = dinv * r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    cap = CG_ITER_FACTOR * n
    while True:
        res = float(np.linalg.norm(r)) / bnorm
        if res <= CG_RTOL:
            break
        if it >= cap:
            raise SolverError(f"CG hit iteration cap {cap} at residual {res:.2e}")
        ap = a @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = dinv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    out = np.zeros(n)
    out[keep] = x
    return out, it, res


def effective_resistance(
    graph,
    a: int,
    b: int,
    method: str = "auto",
    allow_infinite: bool = False,
) -> ResistanceResult:
    """Two-terminal effective resistance between nodes a and b.

    method: 'cg' (default for moderate graphs), 'direct' (sparse LU,
    default above DIRECT_THRESHOLD nodes), or 'pinv' (dense pseudoinverse
    oracle, small graphs only). Disconnected terminals raise unless
    allow_infinite is set, in which case a distinguished infinite result
    is returned.
    """
    net = _as_network(graph)
    if not (0 <= a < net.num_nodes and 0 <= b < net.num_nodes):
        raise ValueError("terminal out of range")
    if a == b:
        return ResistanceResult(0.0, 0, 0.0, "trivial")
    labels = net.component_labels()
    if labels[a] != labels[b]:
        if allow_infinite:
            return ResistanceResult(math.inf, 0, 0.0, "disconnected")
        raise DisconnectedError(f"nodes {a} and {b} are not connected")
    # solve only on the component holding the terminals; other components
    # (including isolated nodes) would make the grounded system singular
    mask = labels == labels[a]
    if not mask.all():
        idx = np.cumsum(mask) - 1
        emask = mask[net.tail]
        net = Network(
            int(mask.sum()),
            idx[net.tail[emask]],
            idx[net.head[emask]],
            net.weight[emask],
        )
        a, b = int(idx[a]), int(idx[b])
    if method == "auto":
        method = "direct" if net.num_nodes > DIRECT_THRESHOLD else "cg"

    lap = net.laplacian()
    rhs = np.zeros(net.num_nodes)
    rhs[a] = 1.0
    rhs[b] = -1.0

    if method == "pinv":
        if net.num_nodes > PINV_NODE_CAP:
            raise ValueError("pinv oracle restricted to small graphs")
        minv = np.linalg.pinv(lap.toarray())
        value = float(minv[a, a] + minv[b, b] - 2 * minv[a, b])
        return ResistanceResult(value, 0, 0.0, "pinv")
    if method == "cg":
        x, it, res = _jacobi_cg(lap, ground=b, rhs=rhs)
        return ResistanceResult(float(x[a] - x[b]), it, res, "cg")
    if method == "direct":
        keep = np.flatnonzero(np.arange(net.num_nodes) != b)
        sub = lap[keep][:, keep].tocsc()
        lu = scipy.sparse.linalg.splu(sub)
        x = lu.solve(rhs[keep])
        res = float(np.linalg.norm(sub @ x - rhs[keep]) / np.linalg.norm(rhs[keep]))
        pos = int(np.searchsorted(keep, a))
        return ResistanceResult(float(x[pos]), 0, res, "direct")
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Root-to-level resistance on traces
# ---------------------------------------------------------------------------


def _level_shorted_network(trace: TraceGraph, n: int) -> tuple[Network, int, int]:
    """Network with all level-n points merged; nodes above n dropped.

    Branches strictly above the shorted level hang off a single node and
    carry no current, so removing them changes nothing.
    """
    if n < 1 or n > trace.max_time:
        raise ValueError(f"level {n} out of range [1, {trace.max_time}]")
    level_n = trace.level_points(n)
    if len(level_n) == 0:
        raise ValueError(f"level {n} is empty")
    first_n = int(level_n[0])
    num_below = first_n  # points sorted by time: ids < first_n have t < n
    super_id = num_below
    node_map = np.full(trace.num_points, -1, dtype=np.int64)
    node_map[:first_n] = np.arange(num_below)
    node_map[level_n] = super_id
    emask = trace.times[trace.edge_tail] < n
    tail = node_map[trace.edge_tail[emask]]
    head = node_map[trace.edge_head[emask]]
    pairs = np.column_stack([tail, head])
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    net = Network(super_id + 1, uniq[:, 0], uniq[:, 1], counts.astype(np.float64))
    return net, int(node_map[trace.root_point]), super_id


def resistance_to_level(trace: TraceGraph, n: int, method: str = "auto") -> ResistanceResult:
    """R(n): effective resistance from the root to level n shorted."""
    net, root, super_id = _level_shorted_network(trace, n)
    return effective_resistance(net, root, super_id, method=method)


def nash_williams_lower(trace: TraceGraph, n: int) -> float:
    """Cutset bound sum_k 1/|E_k| with E_k the level-k to k+1 edges.

    Edges are counted with multiplicity (each tree edge is a unit
    conductor), which keeps the bound valid for the multigraph.
    """
    if n < 1 or n > trace.max_time:
        raise ValueError(f"level {n} out of range [1, {trace.max_time}]")
    counts = np.bincount(trace.times[trace.edge_tail], minlength=n)[:n]
    if np.any(counts == 0):
        raise ValueError("a level below n has no outgoing edges")
    return float(np.sum(1.0 / counts))


def resistance_profile(trace: TraceGraph, n: int) -> NDArray[np.float64]:
    """R(k) for k = 1..n in one upward sweep.

    Maintains the Schur complement of everything below the current level
    onto {root} + current level; eliminating level by level costs only
    dense operations of the level width. R(k) is read off the complement
    because shorting the level collapses it to a two-node network.
    """
    if n < 1 or n > trace.max_time:
        raise ValueError(f"level {n} out of range [1, {trace.max_time}]")
    tail, head, w = trace.collapsed_edges()
    times = trace.times
    etime = times[tail]
    order = np.argsort(etime, kind="stable")
    tail, head, w, etime = tail[order], head[order], w[order], etime[order]
    ebounds = np.searchsorted(etime, np.arange(n + 1))
    lstart = np.searchsorted(times, np.arange(n + 2))
    if trace.root_point != 0:
        raise ValueError("expected the root to be point 0 (single time-0 point)")

    s = np.zeros((1, 1))
    out = np.empty(n)
    for k in range(n):
        lo, hi = ebounds[k], ebounds[k + 1]
        ek_t, ek_h, ek_w = tail[lo:hi], head[lo:hi], w[lo:hi]
        width_next = int(lstart[k + 2] - lstart[k + 1])
        nb = s.shape[0]
        # boundary rows: root is 0; level-k points follow in point order
        rows = np.zeros(len(ek_t), dtype=np.int64) if k == 0 else ek_t - lstart[k] + 1
        cols = ek_h - lstart[k + 1]
        wmat = np.zeros((nb, width_next))
        np.add.at(wmat, (rows, cols), ek_w)
        tot = nb + width_next
        m = np.zeros((tot, tot))
        m[:nb, :nb] = s
        m[np.arange(nb), np.arange(nb)] += wmat.sum(axis=1)
        m[:nb, nb:] -= wmat
        m[nb:, :nb] -= wmat.T
        m[np.arange(nb, tot), np.arange(nb, tot)] += wmat.sum(axis=0)
        keep = np.r_[0, np.arange(nb, tot)]
        elim = np.arange(1, nb)
        if len(elim):
            kb = m[np.ix_(elim, elim)]
            x = scipy.linalg.solve(kb, m[np.ix_(elim, keep)], assume_a="pos")
            s = m[np.ix_(keep, keep)] - m[np.ix_(keep, elim)] @ x
        else:
            s = m[np.ix_(keep, keep)]
        out[k] = 1.0 / float(-s[0, 1:].sum())
    return out


# ---------------------------------------------------------------------------
# Resistance laws as checkable operations
# ---------------------------------------------------------------------------


def check_parallel_law(
    g1: Network, g2: Network, a: int, b: int
) -> tuple[float, float, float]:
    """Resistance of the edge-union against the harmonic-mean chain.

    Asserts R(union) <= (1/R1 + 1/R2)^{-1} <= (R1 + R2)/4. The caller
    promises the two parts are distinct physical edges; in the weighted
    multigraph representation overlapping vertex pairs simply add
    conductance, so no overlap check is possible or needed. A part that
    does not connect a to b contributes zero conductance.
    """
    if g1.num_nodes != g2.num_nodes:
        raise ValueError("graphs must share a vertex set")
    union = Network(
        g1.num_nodes,
        np.concatenate([g1.tail, g2.tail]),
        np.concatenate([g1.head, g2.head]),
        np.concatenate([g1.weight, g2.weight]),
    )
    r1 = effective_resistance(g1, a, b, allow_infinite=True).value
    r2 = effective_resistance(g2, a, b, allow_infinite=True).value
    r = effective_resistance(union, a, b, allow_infinite=True).value
    inv = (0.0 if math.isinf(r1) else 1 / r1) + (0.0 if math.isinf(r2) else 1 / r2)
    harmonic = math.inf if inv == 0.0 else 1.0 / inv
    assert r <= harmonic + 1e-9, (r, harmonic)
    if not (math.isinf(r1) or math.isinf(r2)):
        assert harmonic <= (r1 + r2) / 4 + 1e-9, (harmonic, r1, r2)
    return r, r1, r2


def check_triangle(graph, x: int, y: int, z: int) -> tuple[bool, float, float, float]:
    """Triangle inequality R(x,z) <= R(x,y) + R(y,z); returns the values."""
    r_xz = effective_resistance(graph, x, z).value
    r_xy = effective_resistance(graph, x, y).value
    r_yz = effective_resistance(graph, y, z).value
    ok = r_xz <= r_xy + r_yz + 1e-9
    assert ok, (r_xz, r_xy, r_yz)
    return ok, r_xz, r_xy, r_yz


def resistance_row(trace: TraceGraph, n: int | None = None, method: str = "auto") -> dict:
    """One CSV-ready record for a trace: n, R, NW bound, sizes, iterations."""
    if n is None:
        n = trace.n
    result = resistance_to_level(trace, n, method=method)
    return {
        "n": n,
        "R": result.value,
        "NW_bound": nash_williams_lower(trace, n),
        "nodes": trace.num_points,
        "edges": trace.num_edges,
        "iterations": result.iterations,
    }
