"""Symmetric lattice step laws and exact random walk computations.

Step laws live on Z^d with finite support. The module provides the
covariance norm, exact n-step transition grids by convolution, local-CLT
comparisons, Green function partial sums, and exact bridge sampling.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.signal
import scipy.special
from numpy.typing import NDArray

MASS_ATOL = 1e-12
DEFAULT_PRUNE = 1e-16
DEFAULT_MAX_POINTS = 5_000_000
# dense d-dimensional convolution grids allowed up to this many cells
DENSE_CELL_CAP = 4_000_000


class WalkGridError(RuntimeError):
    """An exact pmf grid would exceed its configured size cap."""


class UnreachableError(ValueError):
    """Conditioning on an endpoint the walk cannot reach."""


# ---------------------------------------------------------------------------
# Step laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepLaw:
    """Finitely supported symmetric step distribution on Z^d.

    support[i] is a lattice vector with probability probs[i]. Validation
    enforces symmetry (x and -x carry equal mass), total mass 1, and that
    the support generates Z^d as a group. The covariance matrix Q, its
    inverse, D = det(Q)^(1/2d) and the walk period are precomputed.
    """

    support: tuple[tuple[int, ...], ...]
    probs: tuple[float, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        pts = np.asarray(self.support, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("support must be a non-empty list of lattice vectors")
        pr = np.asarray(self.probs, dtype=np.float64)
        if pr.shape != (pts.shape[0],):
            raise ValueError("probs length must match support length")
        if np.min(pr) <= 0.0:
            raise ValueError("support probabilities must be positive")
        if abs(pr.sum() - 1.0) > MASS_ATOL:
            raise ValueError(f"probabilities sum to {pr.sum()!r}, not 1")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("duplicate support points")

        # symmetry: each point's mirror carries the same probability
        order = np.lexsort(pts.T)
        morder = np.lexsort((-pts).T)
        if not np.array_equal(pts[order], -pts[morder]) or not np.allclose(
            pr[order], pr[morder], rtol=0.0, atol=MASS_ATOL
        ):
            raise ValueError("step law is not symmetric")

        if not _generates_lattice(pts):
            raise ValueError("support does not generate Z^d as a group")

        q = (pr[:, None, None] * (pts[:, :, None] * pts[:, None, :])).sum(axis=0)
        # symmetry makes the mean zero automatically, so q is the covariance
        eigs = np.linalg.eigvalsh(q)
        if eigs.min() <= 1e-14:
            raise ValueError("degenerate covariance matrix")

        object.__setattr__(self, "support", tuple(map(tuple, pts.tolist())))
        object.__setattr__(self, "probs", tuple(pr.tolist()))
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_pr", pr)
        object.__setattr__(self, "_cdf", np.cumsum(pr))
        object.__setattr__(self, "_q", q)
        object.__setattr__(self, "_q_inv", np.linalg.inv(q))
        d = pts.shape[1]
        object.__setattr__(self, "_ddet", float(np.linalg.det(q)) ** (1.0 / (2 * d)))
        object.__setattr__(self, "_parity", _parity_vector(pts))

    @property
    def dim(self) -> int:
        return self._pts.shape[1]

    @property
    def q_matrix(self) -> NDArray[np.float64]:
        return self._q

    @property
    def q_inv(self) -> NDArray[np.float64]:
        return self._q_inv

    @property
    def ddet(self) -> float:
        """D = det(Q)^(1/2d)."""
        return self._ddet

    @property
    def period(self) -> int:
        return 2 if self._parity is not None else 1

    @property
    def parity_vector(self) -> NDArray[np.int64] | None:
        """a in {0,1}^d with a.x odd for every step, when the period is 2."""
        return self._parity

    @property
    def max_step_norm(self) -> float:
        return float(np.sqrt(norm_sq(self, self._pts).max()))

    def points(self) -> NDArray[np.int64]:
        return self._pts

    def probabilities(self) -> NDArray[np.float64]:
        return self._pr

    def reachable(self, y, n: int) -> bool:
        """Parity test: can S(n) = y hold for some walk realization?

        Necessary and sufficient once n is at least large enough to cover
        the distance; here only the parity class is checked.
        """
        y = np.asarray(y, dtype=np.int64)
        if self._parity is None:
            return True
        return bool((int(self._parity @ y) - n) % 2 == 0)

    def sample_steps(self, rng: np.random.Generator, size: int) -> NDArray[np.int64]:
        idx = np.searchsorted(self._cdf, rng.random(size), side="right")
        return self._pts[np.minimum(idx, len(self._pts) - 1)]


def _generates_lattice(pts: NDArray[np.int64]) -> bool:
    """True iff the integer row vectors generate Z^d as a group.

    Integer row elimination (Hermite-style): the generated lattice equals
    Z^d iff after reduction we find d pivots whose product is +-1.
    """
    m = [list(map(int, row)) for row in pts]
    d = pts.shape[1]
    det = 1
    for col in range(d):
        rows = [r for r in range(col, len(m))]
        # gcd-reduce entries of this column below the pivot row
        pivot = None
        for r in rows:
            if m[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            return False
        m[col], m[pivot] = m[pivot], m[col]
        changed = True
        while changed:
            changed = False
            for r in range(col + 1, len(m)):
                if m[r][col] == 0:
                    continue
                if abs(m[r][col]) < abs(m[col][col]):
                    m[col], m[r] = m[r], m[col]
                    changed = True
                qout = m[r][col] // m[col][col] if m[col][col] != 0 else 0
                if qout != 0:
                    m[r] = [a - qout * b for a, b in zip(m[r], m[col])]
                    changed = changed or m[r][col] != 0
        det *= m[col][col]
    return abs(det) == 1


def _parity_vector(pts: NDArray[np.int64]) -> NDArray[np.int64] | None:
    """A nonzero a in {0,1}^d with a.x odd for all support points, if any.

    Existence is equivalent to the walk having period 2. For a generating
    support the solution space has rank at most 1, so returning the first
    hit is canonical.
    """
    d = pts.shape[1]
    mod = np.asarray(pts % 2, dtype=np.int64)
    for mask in range(1, 2**d):
        a = np.array([(mask >> j) & 1 for j in range(d)], dtype=np.int64)
        if np.all((mod @ a) % 2 == 1):
            return a
    return None


# ---------------------------------------------------------------------------
# Norm
# ---------------------------------------------------------------------------


def norm_sq(law: StepLaw, x) -> NDArray[np.float64]:
    """Squared covariance norm (1/d) x^T Q^{-1} x, vectorized over rows."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[-1] != law.dim:
        raise ValueError(f"dimension mismatch: law is d={law.dim}, x has {arr.shape[-1]}")
    vals = np.einsum("ij,jk,ik->i", arr, law.q_inv, arr) / law.dim
    vals = np.maximum(vals, 0.0)  # guard float dust at x = 0
    return vals[0] if single else vals


def covariance_norm(law: StepLaw, x) -> float | NDArray[np.float64]:
    """The norm sqrt((1/d) x^T Q^{-1} x) used throughout."""
    return np.sqrt(norm_sq(law, x))


# ---------------------------------------------------------------------------
# Exact n-step pmf grids
# ---------------------------------------------------------------------------


@dataclass
class PmfGrid:
    """Sparse exact n-step transition pmf from the origin.

    points are lexicographically sorted lattice vectors; deficit is the
    total mass removed by pruning (documented, never silently lost).
    """

    n: int
    points: NDArray[np.int64]
    probs: NDArray[np.float64]
    deficit: float = 0.0

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    def __len__(self) -> int:
        return len(self.points)

    def prob(self, y) -> float | NDArray[np.float64]:
        """Probability of the point(s) y; 0 off the stored support."""
        arr = np.asarray(y, dtype=np.int64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        idx = _lex_find(self.points, arr)
        out = np.where(idx >= 0, self.probs[np.maximum(idx, 0)], 0.0)
        return float(out[0]) if single else out

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.int64]:
        cdf = np.cumsum(self.probs)
        u = rng.random(size) * cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
        return self.points[idx]

    def moment_norm_sq(self, law: StepLaw) -> float:
        """E of the squared covariance norm under this (renormalized) pmf."""
        return float(np.dot(norm_sq(law, self.points), self.probs) / self.total_mass)

    def to_csv(self, path: str) -> None:
        header = ",".join([f"x{i}" for i in range(self.dim)] + ["probability"])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n={self.n} deficit={self.deficit:.3e}\n")
            fh.write(header + "\n")
            for pt, pr in zip(self.points, self.probs):
                fh.write(",".join(str(int(c)) for c in pt) + f",{float(pr)!r}\n")


def _lex_sort(points, probs):
    order = np.lexsort(points.T[::-1])
    return points[order], probs[order]


def _lex_find(haystack: NDArray[np.int64], needles: NDArray[np.int64]):
    """Indices of needles in a lexsorted point array; -1 when absent."""
    if len(haystack) == 0:
        return np.full(len(needles), -1, dtype=np.int64)
    # compare tuple-wise via searchsorted on a structured view
    hv = haystack.view([("", haystack.dtype)] * haystack.shape[1]).ravel()
    nv = np.ascontiguousarray(needles).view([("", needles.dtype)] * needles.shape[1]).ravel()
    pos = np.searchsorted(hv, nv)
    pos = np.minimum(pos, len(hv) - 1)
    hit = hv[pos] == nv
    return np.where(hit, pos, -1)


def n_step_pmf(
    law: StepLaw,
    n: int,
    prune: float = DEFAULT_PRUNE,
    max_points: int = DEFAULT_MAX_POINTS,
) -> PmfGrid:
    """Exact n-step pmf by iterated convolution.

    Dense FFT squaring when the bounding grid is small enough (always for
    moderate n in d <= 2), sparse stepwise aggregation otherwise. Mass
    pruned below `prune` is accumulated into the grid's deficit.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    d = law.dim
    if n == 0:
        return PmfGrid(0, np.zeros((1, d), dtype=np.int64), np.ones(1))

    max_coord = int(np.abs(law.points()).max())
    side = 2 * n * max_coord + 1
    if side**d <= DENSE_CELL_CAP:
        return _dense_pmf(law, n, prune)
    return _sparse_pmf(law, n, prune, max_points)


def _dense_pmf(law: StepLaw, n: int, prune: float) -> PmfGrid:
    d = law.dim
    max_coord = int(np.abs(law.points()).max())
    half = n * max_coord
    kside = 2 * max_coord + 1
    kernel = np.zeros((kside,) * d)
    for pt, pr in zip(law.points(), law.probabilities()):
        kernel[tuple(int(c) + max_coord for c in pt)] = pr

    # binary exponentiation of the convolution power
    result = None
    base = kernel
    bits = n
    while bits:
        if bits & 1:
            result = base if result is None else scipy.signal.fftconvolve(result, base)
        bits >>= 1
        if bits:
            base = scipy.signal.fftconvolve(base, base)
    assert result is not None
    result = np.maximum(result, 0.0)  # FFT dust

    offset = (np.asarray(result.shape) - 1) // 2
    keep = result >= prune
    pts = np.argwhere(keep).astype(np.int64) - offset
    probs = result[keep]
    deficit = float(result.sum() - probs.sum()) + max(0.0, 1.0 - float(result.sum()))
    assert np.all(np.abs(pts) <= half)
    pts, probs = _lex_sort(pts, probs)
    return PmfGrid(n, pts, probs, deficit=max(deficit, 0.0))


def _sparse_pmf(law: StepLaw, n: int, prune: float, max_points: int) -> PmfGrid:
    d = law.dim
    max_coord = int(np.abs(law.points()).max())
    span = 2 * n * max_coord + 1
    if float(span) ** d >= 2**62:
        raise WalkGridError(f"lattice span {span}^{d} not encodable; reduce n")
    strides = np.array([span**i for i in range(d)], dtype=np.int64)

    sup = law.points()
    sup_pr = law.probabilities()
    pts = np.zeros((1, d), dtype=np.int64)
    probs = np.ones(1)
    deficit = 0.0
    for _ in range(n):
        cand = (pts[:, None, :] + sup[None, :, :]).reshape(-1, d)
        w = (probs[:, None] * sup_pr[None, :]).reshape(-1)
        keys = cand @ strides
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        w = w[order]
        cand = cand[order]
        boundary = np.empty(len(keys), dtype=bool)
        boundary[0] = True
        boundary[1:] = keys[1:] != keys[:-1]
        idx = np.cumsum(boundary) - 1
        agg = np.zeros(int(idx[-1]) + 1)
        np.add.at(agg, idx, w)
        pts = cand[boundary]
        probs = agg
        small = probs < prune
        if np.any(small):
            deficit += float(probs[small].sum())
            pts, probs = pts[~small], probs[~small]
        if len(pts) > max_points:
            raise WalkGridError(
                f"pmf support {len(pts)} exceeds cap {max_points} at d={d}"
            )
    pts, probs = _lex_sort(pts, probs)
    return PmfGrid(n, pts, probs, deficit=deficit)


@functools.lru_cache(maxsize=64)
def _cached_pmf(law: StepLaw, n: int, prune: float) -> PmfGrid:
    return n_step_pmf(law, n, prune=prune)


# ---------------------------------------------------------------------------
# Local CLT comparison
# ---------------------------------------------------------------------------


@dataclass
class LcltComparison:
    exact: float
    reference: float
    ratio: float
    parity_ok: bool


def lclt_compare(law: StepLaw, n: int, y) -> LcltComparison:
    """Exact pmf value against the Gaussian local-limit reference.

    The reference is (2 pi n)^{-d/2} D^{-d} exp(-d ||y||^2 / (2n)), doubled
    on the reachable parity class for period-2 walks. Zero-probability
    parity mismatches are flagged rather than treated as errors.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    y = np.asarray(y, dtype=np.int64)
    d = law.dim
    grid = _cached_pmf(law, n, DEFAULT_PRUNE)
    exact = float(grid.prob(y))
    ref = (
        law.period
        * (2 * math.pi * n) ** (-d / 2)
        * law.ddet ** (-d)
        * math.exp(-d * float(norm_sq(law, y)) / (2 * n))
    )
    parity_ok = law.reachable(y, n)
    if not parity_ok:
        ref = 0.0
    ratio = exact / ref if ref > 0 else math.inf if exact > 0 else math.nan
    return LcltComparison(exact=exact, reference=ref, ratio=ratio, parity_ok=parity_ok)


# ---------------------------------------------------------------------------
# Green function
# ---------------------------------------------------------------------------


def _is_axis_srw(law: StepLaw) -> bool:
    pts = law.points()
    if len(pts) != 2 * law.dim or int(np.abs(pts).max()) != 1:
        return False
    if not np.all(np.abs(pts).sum(axis=1) == 1):
        return False
    return bool(np.allclose(law.probabilities(), 1.0 / (2 * law.dim)))


def _one_d_point_probs(a: int, horizon: int) -> NDArray[np.float64]:
    """p^t(0, a) for the 1-d simple walk, t = 0..horizon, stably."""
    a = abs(int(a))
    out = np.zeros(horizon + 1)
    lg = scipy.special.gammaln(np.arange(horizon + 2, dtype=np.float64))
    for t in range(a, horizon + 1, 2):
        k = (t - a) // 2
        out[t] = math.exp(lg[t + 1] - lg[k + 1] - lg[t - k + 1] - t * math.log(2.0))
    return out


def _srw_point_probs(d: int, z, horizon: int) -> NDArray[np.float64]:
    """p^t(o, z) for t = 0..horizon for the d-dim axis-step walk, exactly.

    Each step moves one uniformly chosen coordinate, so conditionally on
    how the t steps split across coordinates the coordinates are
    independent 1-d walks. Merging one coordinate at a time,
        p_{j+1}(t) = sum_s Binomial(t, j/(j+1))(s) p_j(s) q(t - s),
    keeps every factor in [0, 1]; a direct generating-function product
    would underflow long before horizon 2000.
    """
    z = np.asarray(z, dtype=np.int64)
    t_grid = np.arange(horizon + 1, dtype=np.float64)
    lg = scipy.special.gammaln(t_grid + 1.0)
    merged = _one_d_point_probs(int(z[0]), horizon)
    for j in range(1, d):
        nxt = _one_d_point_probs(int(z[j]), horizon)
        theta = j / (j + 1.0)
        # W[t, s] = Binomial(t, theta) pmf at s, zero above the diagonal
        logw = (
            lg[:, None]
            - lg[None, :]
            - lg[np.maximum(t_grid[:, None] - t_grid[None, :], 0.0).astype(np.int64)]
            + t_grid[None, :] * math.log(theta)
            + np.maximum(t_grid[:, None] - t_grid[None, :], 0.0) * math.log1p(-theta)
        )
        mask = t_grid[None, :] <= t_grid[:, None]
        w = np.where(mask, np.exp(np.where(mask, logw, 0.0)), 0.0)
        # B[t] = sum_s W[t,s] merged[s] nxt[t-s]: fold nxt into the matrix
        diffs = (t_grid[:, None] - t_grid[None, :]).astype(np.int64)
        nxt_mat = np.where(mask, nxt[np.maximum(diffs, 0)], 0.0)
        merged = (w * nxt_mat) @ merged
    return merged


def green_function(law: StepLaw, x, horizon: int) -> float:
    """Partial sum sum_{t<=horizon} p^t(o, x), exact.

    Axis simple random walks use an exact series identity good to large
    horizons in any dimension; other laws fall back to stepwise sparse
    convolution and are limited by grid growth.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (law.dim,):
        raise ValueError("dimension mismatch")
    if _is_axis_srw(law):
        return float(_srw_point_probs(law.dim, x, horizon).sum())
    total = 1.0 if not np.any(x) else 0.0
    grid = PmfGrid(0, np.zeros((1, law.dim), dtype=np.int64), np.ones(1))
    for t in range(1, horizon + 1):
        grid = _convolve_grid_step(law, grid)
        total += float(grid.prob(x))
    return total


def _convolve_grid_step(law: StepLaw, grid: PmfGrid) -> PmfGrid:
    d = law.dim
    sup = law.points()
    cand = (grid.points[:, None, :] + sup[None, :, :]).reshape(-1, d)
    w = (grid.probs[:, None] * law.probabilities()[None, :]).reshape(-1)
    span = int(np.abs(cand).max()) * 2 + 1
    if float(span) ** d >= 2**62:
        raise WalkGridError("grid span too large to encode")
    strides = np.array([span**i for i in range(d)], dtype=np.int64)
    keys = cand @ strides
    order = np.argsort(keys, kind="stable")
    keys, w, cand = keys[order], w[order], cand[order]
    boundary = np.empty(len(keys), dtype=bool)
    boundary[0] = True
    boundary[1:] = keys[1:] != keys[:-1]
    idx = np.cumsum(boundary) - 1
    agg = np.zeros(int(idx[-1]) + 1)
    np.add.at(agg, idx, w)
    pts, probs = _lex_sort(cand[boundary], agg)
    return PmfGrid(grid.n + 1, pts, probs, deficit=grid.deficit)


# ---------------------------------------------------------------------------
# Bridges and conditional moments
# ---------------------------------------------------------------------------


def bridge_midpoint_weights(
    law: StepLaw, k: int, n: int, x
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Exact law of S(k) given S(n) = x: support points and probabilities."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    x = np.asarray(x, dtype=np.int64)
    gk = _cached_pmf(law, k, DEFAULT_PRUNE)
    grest = _cached_pmf(law, n - k, DEFAULT_PRUNE)
    w = gk.probs * grest.prob(x[None, :] - gk.points)
    total = w.sum()
    if total <= 0.0:
        raise UnreachableError(f"endpoint {x.tolist()} unreachable at time {n}")
    keep = w > 0
    return gk.points[keep], w[keep] / total


def conditional_second_moment(
    law: StepLaw,
    k: int,
    n: int,
    x=None,
    replicates: int = 0,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """E[ ||S(k)||^2 | S(n) = x ] with its standard error.

    With replicates = 0 the expectation is computed exactly from the
    bridge midpoint law (se 0). x = None drops the conditioning and uses
    the unconditioned k-step law instead.
    """
    if x is None:
        grid = _cached_pmf(law, k, DEFAULT_PRUNE)
        pts, wts = grid.points, grid.probs / grid.total_mass
    else:
        pts, wts = bridge_midpoint_weights(law, k, n, x)
    vals = norm_sq(law, pts)
    if replicates <= 0:
        return float(np.dot(vals, wts)), 0.0
    if rng is None:
        raise ValueError("replicates > 0 needs an rng")
    cdf = np.cumsum(wts)
    idx = np.minimum(np.searchsorted(cdf, rng.random(replicates) * cdf[-1]), len(cdf) - 1)
    draws = vals[idx]
    return float(draws.mean()), float(draws.std(ddof=1) / math.sqrt(replicates))


def sample_bridge(
    law: StepLaw, n: int, x, rng: np.random.Generator
) -> NDArray[np.int64]:
    """One exact bridge path S(0) = o, ..., S(n) = x.

    Sequential sampling: the step from time t weights each candidate y by
    p1(step) * p^{n-t-1}(y, x), with the remaining-time grids cached. Grid
    deficits only rescale the weights uniformly at the pruning level, and
    each step renormalizes.
    """
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (law.dim,):
        raise ValueError("dimension mismatch")
    if float(_cached_pmf(law, n, DEFAULT_PRUNE).prob(x)) <= 0.0:
        raise UnreachableError(f"endpoint {x.tolist()} unreachable at time {n}")
    path = np.zeros((n + 1, law.dim), dtype=np.int64)
    sup = law.points()
    sup_pr = law.probabilities()
    pos = np.zeros(law.dim, dtype=np.int64)
    for t in range(n):
        rest = _cached_pmf(law, n - t - 1, DEFAULT_PRUNE)
        cand = pos[None, :] + sup
        w = sup_pr * rest.prob(x[None, :] - cand)
        total = w.sum()
        if total <= 0.0:
            raise UnreachableError("bridge stranded; endpoint unreachable mid-path")
        cdf = np.cumsum(w)
        j = int(np.searchsorted(cdf, rng.random() * total))
        pos = cand[min(j, len(cand) - 1)]
        path[t + 1] = pos
    assert np.array_equal(pos, x)
    return path


def sample_endpoints(
    law: StepLaw, n: int, rng: np.random.Generator, size: int
) -> NDArray[np.int64]:
    """Monte Carlo endpoints S(n) for `size` independent walks."""
    pos = np.zeros((size, law.dim), dtype=np.int64)
    for _ in range(n):
        pos += law.sample_steps(rng, size)
    return pos


# ---------------------------------------------------------------------------
# Lattice ball volumes
# ---------------------------------------------------------------------------


def ball_point_count(law: StepLaw, radius: float) -> int:
    """Number of lattice points with covariance norm at most `radius`.

    Supported for isotropic laws (Q proportional to the identity), which
    covers the presets; the norm ball is then a Euclidean ball and the
    count reduces to a d-fold convolution of squared-coordinate counts.
    """
    q = law.q_matrix
    c = q[0, 0]
    if not np.allclose(q, c * np.eye(law.dim), rtol=0.0, atol=1e-12):
        raise NotImplementedError("ball counting implemented for isotropic Q only")
    # ||x||^2 = |x|^2 / (d c) <= r^2  <=>  |x|^2 <= r^2 d c
    bound = radius * radius * law.dim * c
    max_sq = int(math.floor(bound + 1e-9))
    if max_sq < 0:
        return 0
    xmax = int(math.isqrt(max_sq))
    one_d = np.zeros(max_sq + 1)
    for a in range(-xmax, xmax + 1):
        if a * a <= max_sq:
            one_d[a * a] += 1
    counts = one_d
    for _ in range(law.dim - 1):
        counts = np.convolve(counts, one_d)[: max_sq + 1]
    return int(round(counts.sum()))


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def _axis_vectors(d: int) -> list[tuple[int, ...]]:
    out = []
    for i in range(d):
        for s in (1, -1):
            v = [0] * d
            v[i] = s
            out.append(tuple(v))
    return out


def _srw(d: int) -> StepLaw:
    pts = _axis_vectors(d)
    return StepLaw(tuple(pts), tuple([1.0 / len(pts)] * len(pts)), name=f"srw_d{d}")


def _lazy(d: int) -> StepLaw:
    pts = [tuple([0] * d)] + _axis_vectors(d)
    pr = [0.5] + [0.5 / (2 * d)] * (2 * d)
    return StepLaw(tuple(pts), tuple(pr), name=f"lazy_d{d}")


def _twostep(d: int) -> StepLaw:
    # axis steps of size 1 and 2; aperiodic, isotropic, non-SRW
    pts = []
    pr = []
    for i in range(d):
        for s in (1, -1):
            v = [0] * d
            v[i] = s
            pts.append(tuple(v))
            pr.append(3.0 / (8 * d))
            v2 = [0] * d
            v2[i] = 2 * s
            pts.append(tuple(v2))
            pr.append(1.0 / (8 * d))
    return StepLaw(tuple(pts), tuple(pr), name=f"twostep_d{d}")


STEP_PRESETS: dict[str, StepLaw] = {}
for _d in range(1, 9):
    STEP_PRESETS[f"srw_d{_d}"] = _srw(_d)
    STEP_PRESETS[f"lazy_d{_d}"] = _lazy(_d)
    STEP_PRESETS[f"twostep_d{_d}"] = _twostep(_d)


def step_preset(name: str) -> StepLaw:
    try:
        return STEP_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown step preset {name!r}; choose from {sorted(STEP_PRESETS)}"
        ) from None
