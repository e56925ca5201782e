"""Bottom-up election: per-update K-means voting.

Each update acts as a voter: it clusters all updates' layer slices
starting from centroids built out of the slices farthest from itself
plus a zero vector, then adds its (CH-weighted, min-max normalized)
score to every update landing in its own cluster, itself included.
Voting runs once per selected layer; the top vote-getters become the
initial selectees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import ch_score, kmeans, minmax_normalize
from .errors import ParameterError
from .updates import CandidateUpdate


@dataclass(frozen=True)
class LayerPolicy:
    """Which layers the elections look at.

    mode "all" uses every layer, "first_last" the first and last, and
    "top_divergence" the top_k layers whose slices differ the most
    across updates (mean pairwise distance over slice dimension).
    """

    mode: str
    top_k: int = 2

    def __post_init__(self):
        if self.mode not in ("all", "first_last", "top_divergence"):
            raise ParameterError(f"unknown layer policy {self.mode!r}")
        if self.top_k < 1:
            raise ParameterError("top_k must be >= 1")


@dataclass
class VoteTally:
    """Accumulated vote counters plus the per-layer audit trail."""

    counters: dict[int, float]
    layer_contributions: dict[int, dict[int, float]] = field(default_factory=dict)


def select_layers(updates: list[CandidateUpdate], policy: LayerPolicy) -> list[int]:
    """Resolve a LayerPolicy to concrete layer ids (ascending)."""
    if not updates:
        raise ParameterError("need at least one update")
    layer_ids = updates[0].delta.layer_ids
    if policy.mode == "all":
        return list(layer_ids)
    if policy.mode == "first_last":
        return sorted({layer_ids[0], layer_ids[-1]})
    if policy.top_k > len(layer_ids):
        raise ParameterError(f"policy asks {policy.top_k} layers, model has {len(layer_ids)}")
    if len(updates) < 2:
        raise ParameterError("top_divergence needs >= 2 updates")
    scores = []
    for m in layer_ids:
        slices = np.stack([u.delta.layer(m) for u in updates])
        n = len(slices)
        total = 0.0
        for i in range(n):
            total += np.sqrt(((slices[i + 1:] - slices[i]) ** 2).sum(axis=1)).sum()
        mean_pair = total / (n * (n - 1) / 2)
        scores.append((-(mean_pair / slices.shape[1]), m))
    scores.sort()
    return sorted(m for _, m in scores[:policy.top_k])


def init_centroids(voter_slice: np.ndarray, candidates: list[tuple[int, np.ndarray]],
                   k: int) -> np.ndarray:
    """Centroids for one voter: k-1 farthest candidate slices plus a zero vector.

    Distance is squared L2 from the voter's own slice; ties prefer the
    lower client id.
    """
    if len(candidates) < k - 1:
        raise ParameterError(f"need >= {k - 1} candidates for k={k}, got {len(candidates)}")
    ranked = sorted(
        candidates,
        key=lambda c: (-float(((c[1] - voter_slice) ** 2).sum()), c[0]),
    )
    rows = [s for _, s in ranked[:k - 1]]
    rows.append(np.zeros_like(voter_slice))
    return np.stack(rows)


def bottom_up_election(updates: list[CandidateUpdate], n_selectees: int, k_clusters: int,
                       layer_ids: list[int]) -> tuple[list[int], VoteTally, dict]:
    """Run the layer-wise vote and return the n_selectees winners.

    Returns (selectee ids ascending, tally, audit record). Vote ties are
    broken toward the lower client id.
    """
    if n_selectees < 1 or n_selectees > len(updates):
        raise ParameterError(f"need 1 <= n_selectees <= {len(updates)}, got {n_selectees}")
    if k_clusters < 1 or k_clusters > len(updates):
        raise ParameterError(f"need 1 <= k_clusters <= {len(updates)}, got {k_clusters}")
    updates = sorted(updates, key=lambda u: u.client_id)
    ids = [u.client_id for u in updates]
    n = len(updates)
    tally = VoteTally({i: 0.0 for i in ids})
    audit_layers = []
    for m in layer_ids:
        points = np.stack([u.delta.layer(m) for u in updates])
        results = []
        ch = np.empty(n)
        for vi in range(n):
            candidates = [(ids[j], points[j]) for j in range(n) if j != vi]
            centroids = init_centroids(points[vi], candidates, k_clusters)
            res = kmeans(points, centroids)
            results.append(res)
            ch[vi] = ch_score(points, res)
        scores = minmax_normalize(ch)
        contributions = {i: 0.0 for i in ids}
        voter_audit = []
        for vi in range(n):
            r = results[vi].assignments
            mates = np.flatnonzero(r == r[vi])
            for j in mates:
                contributions[ids[j]] += float(scores[vi])
            sizes = np.bincount(r, minlength=k_clusters)
            voter_audit.append({
                "voter": ids[vi],
                "ch": None if not np.isfinite(ch[vi]) else float(ch[vi]),
                "score": float(scores[vi]),
                "cluster_sizes": sizes.tolist(),
                "own_cluster_size": int(len(mates)),
            })
        for i in ids:
            tally.counters[i] += contributions[i]
        tally.layer_contributions[m] = contributions
        audit_layers.append({"layer": int(m), "voters": voter_audit,
                             "contributions": {str(i): contributions[i] for i in ids}})
    ranked = sorted(ids, key=lambda i: (-tally.counters[i], i))
    selectees = sorted(ranked[:n_selectees])
    audit = {
        "kind": "bottom_up",
        "k_clusters": int(k_clusters),
        "layer_ids": [int(m) for m in layer_ids],
        "votes": {str(i): tally.counters[i] for i in ids},
        "selectees": selectees,
        "layers": audit_layers,
    }
    return selectees, tally, audit
