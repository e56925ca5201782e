"""Reference selection strategies: FedAvg (keep all), multi-Krum, Ideal.

Krum works on the full flattened update vector. Ideal is the evaluation
oracle: it is the only selector allowed to see ground truth and exists
as an upper reference, not a deployable defense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import ParameterError
from .updates import CandidateUpdate, ModelUpdate


@dataclass
class SelectionResult:
    selected: list[int]
    scores: dict[int, float] = field(default_factory=dict)


def fedavg_select(updates: list[CandidateUpdate]) -> SelectionResult:
    """No filtering: every received update, ascending client id."""
    ids = sorted(u.client_id for u in updates)
    return SelectionResult(ids, {i: 0.0 for i in ids})


def krum_select(updates: list[CandidateUpdate], m: int, f_ratio: float = 0.3) -> SelectionResult:
    """Multi-Krum: keep the m updates with the smallest Krum scores.

    score(i) = sum of squared distances to i's n-f-2 nearest peers,
    f = ceil(f_ratio * n). Ties prefer the lower client id.
    """
    n = len(updates)
    f = ceil(f_ratio * n)
    n_near = n - f - 2
    if n_near < 1:
        raise ParameterError(f"krum needs n - ceil(f_ratio*n) - 2 >= 1, got n={n}, f={f}")
    if not 1 <= m <= n:
        raise ParameterError(f"need 1 <= m <= {n}, got m={m}")
    updates = sorted(updates, key=lambda u: u.client_id)
    vecs = np.stack([u.delta.concat() for u in updates])
    sq = ((vecs[:, None, :] - vecs[None, :, :]) ** 2).sum(axis=2)
    scores = {}
    for i, u in enumerate(updates):
        others = np.delete(sq[i], i)
        others.sort()
        scores[u.client_id] = float(others[:n_near].sum())
    ranked = sorted(scores, key=lambda cid: (scores[cid], cid))
    return SelectionResult(sorted(ranked[:m]), scores)


def ideal_select(updates: list[ModelUpdate]) -> SelectionResult:
    """Oracle: exactly the non-infected updates."""
    ids = sorted(u.client_id for u in updates if not u.infected)
    return SelectionResult(ids, {i: 0.0 for i in ids})
