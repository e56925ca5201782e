"""Clustering primitives for the voting election.

kmeans() runs Lloyd iterations from caller-supplied centroids with no
re-seeding, because the election's whole point is that each voter brings
its own centroid construction. choose_k() picks a cluster count with the
gap statistic (uniform reference draws in the data bounding box).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import RngStream


@dataclass
class ClusteringResult:
    assignments: np.ndarray   # (n,) cluster index per point
    centroids: np.ndarray     # (k, d)
    inertia: float            # within-cluster sum of squares
    n_iter: int


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(points: np.ndarray, init_centroids: np.ndarray,
           max_iter: int = 100, tol: float = 1e-6) -> ClusteringResult:
    """Lloyd's algorithm from the given centroids.

    Stops when the largest centroid shift drops below tol or after
    max_iter iterations. A cluster left empty by an assignment step is
    re-seeded to the point farthest from that cluster's centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(init_centroids, dtype=np.float64).copy()
    k = len(centroids)
    if k < 1 or k > len(points):
        raise ParameterError(f"need 1 <= k <= n points, got k={k}, n={len(points)}")
    assignments = np.zeros(len(points), dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        assignments = _assign_with_reseed(points, centroids)
        new_centroids = centroids.copy()
        for c in range(k):
            members = assignments == c
            if members.any():
                new_centroids[c] = points[members].mean(axis=0)
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol:
            break
    assignments = _assign_with_reseed(points, centroids)
    inertia = float(((points - centroids[assignments]) ** 2).sum())
    return ClusteringResult(assignments, centroids, inertia, n_iter)


def _assign_with_reseed(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid assignment, moving empty clusters onto far points.

    Mutates centroids in place when a re-seed happens.
    """
    k = len(centroids)
    assignments = _sq_dists(points, centroids).argmin(axis=1)
    taken: set[int] = set()
    for c in range(k):
        if (assignments == c).any():
            continue
        d = ((points - centroids[c]) ** 2).sum(axis=1)
        for used in taken:
            d[used] = -1.0
        far = int(d.argmax())
        taken.add(far)
        centroids[c] = points[far]
        assignments = _sq_dists(points, centroids).argmin(axis=1)
    return assignments


CH_SENTINEL = np.inf


def ch_score(points: np.ndarray, result: ClusteringResult) -> float:
    """Calinski-Harabasz ratio of between- to within-cluster dispersion.

    Degenerate clusterings (fewer than two non-empty clusters, or zero
    within-cluster scatter) return an infinite sentinel; callers clamp it
    before normalizing.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = result.assignments
    present = np.unique(labels)
    k = len(present)
    n = len(points)
    if k < 2 or n <= k:
        return CH_SENTINEL
    overall = points.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in present:
        members = points[labels == c]
        mu = members.mean(axis=0)
        between += len(members) * float(((mu - overall) ** 2).sum())
        within += float(((members - mu) ** 2).sum())
    if within == 0.0:
        return CH_SENTINEL
    return (between / (k - 1)) / (within / (n - k))


def minmax_normalize(scores) -> np.ndarray:
    """Scale scores into [0, 1]; all-equal inputs map to all ones.

    Infinite sentinels are first clamped to the largest finite score
    observed (to 1.0 when nothing is finite).
    """
    s = np.asarray(scores, dtype=np.float64).copy()
    if s.size == 0:
        raise ParameterError("need at least one score")
    finite = np.isfinite(s)
    if not finite.all():
        s[~finite] = s[finite].max() if finite.any() else 1.0
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.ones_like(s)
    return (s - lo) / (hi - lo)


def kmeans_fit(points: np.ndarray, k: int, rng: RngStream, n_init: int = 4) -> ClusteringResult:
    """K-means with k-means++ seeding, best of n_init restarts.

    Internal helper for the gap statistic, where no voter-specific
    centroid construction applies.
    """
    best: ClusteringResult | None = None
    for trial in range(n_init):
        gen = rng.derive("init", trial).generator()
        centroids = _kmeanspp(points, k, gen)
        res = kmeans(points, centroids)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def _kmeanspp(points: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = len(points)
    first = int(gen.integers(n))
    chosen = [first]
    d = ((points - points[first]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        total = d.sum()
        if total <= 0:
            pick = int(gen.integers(n))
        else:
            pick = int(gen.choice(n, p=d / total))
        chosen.append(pick)
        d = np.minimum(d, ((points - points[pick]) ** 2).sum(axis=1))
    return points[chosen].copy()


def gap_statistic(points: np.ndarray, rng: RngStream, k_min: int = 2, k_max: int = 15,
                  b_ref: int = 10) -> int:
    """Pick a cluster count by comparing log-dispersion to uniform references.

    Gap(k) = mean_b log W*_kb - log W_k over b_ref uniform draws in the
    data's bounding box; returns the smallest k with
    Gap(k) >= Gap(k+1) - s_{k+1}, clamped to [k_min, min(k_max, n)].
    All-identical points short-circuit to k_min.
    """
    points = np.asarray(points, dtype=np.float64)
    if k_min < 1 or k_max < k_min:
        raise ParameterError("need 1 <= k_min <= k_max")
    if np.ptp(points, axis=0).max(initial=0.0) == 0.0:
        return k_min
    k_hi = min(k_max, len(points))
    ks = list(range(k_min, k_hi + 1))
    lo, hi = points.min(axis=0), points.max(axis=0)
    n, d = points.shape

    def log_w(pts: np.ndarray, k: int, stream: RngStream) -> float:
        inertia = kmeans_fit(pts, k, stream).inertia
        return float(np.log(max(inertia, 1e-300)))

    log_wk = np.array([log_w(points, k, rng.derive("data", k)) for k in ks])
    ref_log = np.empty((b_ref, len(ks)))
    for b in range(b_ref):
        ref = rng.derive("ref", b).generator().uniform(lo, hi, size=(n, d))
        for j, k in enumerate(ks):
            ref_log[b, j] = log_w(ref, k, rng.derive("ref-fit", b * 1000 + k))
    gap = ref_log.mean(axis=0) - log_wk
    sk = ref_log.std(axis=0) * np.sqrt(1.0 + 1.0 / b_ref)
    for j in range(len(ks) - 1):
        if gap[j] >= gap[j + 1] - sk[j + 1]:
            return ks[j]
    return ks[-1]
