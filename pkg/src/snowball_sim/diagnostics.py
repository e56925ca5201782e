"""Distance diagnostics over update populations.

These back two kinds of checks: the algebraic identity relating the
benign-to-all vs infected-to-all expected squared distances to the three
pair-class means, and per-round monitoring of whether benign updates sit
closer to each other than to infected ones.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def _as_matrix(vectors) -> np.ndarray:
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim != 2:
        raise ParameterError("expected a (n, d) matrix of update vectors")
    return m


def pair_mean_stats(vectors, infected: np.ndarray) -> tuple[float, float, float]:
    """Mean squared pair distances (benign-benign, benign-infected, infected-infected).

    Pairs are i != j; classes with no pair yield nan for that statistic.
    """
    m = _as_matrix(vectors)
    infected = np.asarray(infected, dtype=bool)
    sq = ((m[:, None, :] - m[None, :, :]) ** 2).sum(axis=2)
    ben = ~infected

    def mean_over(mask_a, mask_b):
        block = sq[np.ix_(mask_a, mask_b)]
        if mask_a is mask_b or (mask_a == mask_b).all():
            total = block.sum()
            count = mask_a.sum() * (mask_a.sum() - 1)
        else:
            total = block.sum()
            count = mask_a.sum() * mask_b.sum()
        return float(total / count) if count else float("nan")

    a = mean_over(ben, ben)
    b = mean_over(ben, infected)
    c = mean_over(infected, infected)
    return a, b, c


def distance_gap_sides(a: float, b: float, c: float, n: int, w: int) -> tuple[float, float]:
    """Both sides of the benign-vs-infected expected-distance gap.

    Left: the gap assembled from per-class expectations,
    ((n-w)A + wB) - ((n-w)B + wC); right: its factored form
    (n-w)A - (n-2w)B - wC. They agree identically.
    """
    lhs = ((n - w) * a + w * b) - ((n - w) * b + w * c)
    rhs = (n - w) * a - (n - 2 * w) * b - w * c
    return lhs, rhs


def mean_pairwise_distance(vectors, mask_a, mask_b, squared: bool = False) -> float:
    """Mean distance over pairs (i in mask_a, j in mask_b, i != j)."""
    m = _as_matrix(vectors)
    mask_a = np.asarray(mask_a, dtype=bool)
    mask_b = np.asarray(mask_b, dtype=bool)
    sq = ((m[mask_a][:, None, :] - m[mask_b][None, :, :]) ** 2).sum(axis=2)
    d = sq if squared else np.sqrt(sq)
    same = (mask_a == mask_b).all()
    total = d.sum() - (0.0 if not same else np.trace(d))
    count = mask_a.sum() * mask_b.sum() - (mask_a.sum() if same else 0)
    return float(total / count) if count > 0 else float("nan")


def benign_to_all_gap(vectors, infected: np.ndarray) -> tuple[float, float]:
    """(mean sq dist benign-to-all, infected-to-all), self-pairs excluded."""
    m = _as_matrix(vectors)
    infected = np.asarray(infected, dtype=bool)
    if infected.all() or (~infected).any() is False:
        raise ParameterError("need at least one benign update")
    sq = ((m[:, None, :] - m[None, :, :]) ** 2).sum(axis=2)
    n = len(m)
    row_means = sq.sum(axis=1) / (n - 1)
    benign_mean = float(row_means[~infected].mean())
    infected_mean = float(row_means[infected].mean()) if infected.any() else float("nan")
    return benign_mean, infected_mean
