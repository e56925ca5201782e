"""Model-update containers passed between engine and defenses.

ModelUpdate carries the evaluation-only ground truth (infected flag);
CandidateUpdate is the stripped view handed to defenses, so no selection
code path can read the flag even by accident. Only the ideal oracle
baseline receives ModelUpdates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .layered import LayeredVector


@dataclass(frozen=True)
class ModelUpdate:
    client_id: int
    delta: LayeredVector
    n_samples: int
    infected: bool


@dataclass(frozen=True)
class CandidateUpdate:
    client_id: int
    delta: LayeredVector
    n_samples: int


def strip_for_defense(updates: list[ModelUpdate]) -> list[CandidateUpdate]:
    """Drop ground truth before updates reach any defense."""
    return [CandidateUpdate(u.client_id, u.delta, u.n_samples) for u in updates]
