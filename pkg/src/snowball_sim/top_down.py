"""Top-down election: VAE-scored progressive enlargement of the selectees.

A fresh VAE learns the pairwise differences among current selectees,
then candidates are scored by how well their differences against every
selectee reconstruct; the lowest-error candidates join, the difference
set is rebuilt and the VAE re-tuned, until the target count is reached.

The selection direction follows the prose rule (add the LOWEST
reconstruction errors): well-reconstructed differences look like
benign-to-benign ones, while infected updates are the ones pushed out
with high error. See README for the resolved wording discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .nn import SgdState
from .rng import RngStream
from .updates import CandidateUpdate
from .vae import VAEModel, init_vae, reconstruction_errors, train_vae


@dataclass
class DifferenceSet:
    """All ordered pairwise differences u_(i,j) of the selectee vectors."""

    vectors: np.ndarray              # (m*(m-1), dim)
    pairs: list[tuple[int, int]]     # provenance, (i, j) client ids


@dataclass(frozen=True)
class CandidateScore:
    candidate_id: int
    score: float                     # sum of recon errors against all selectees


@dataclass(frozen=True)
class VAESettings:
    hidden_dim: int = 64
    latent_dim: int = 16
    lr: float = 1e-3
    batch_size: int = 32


def election_vector(update: CandidateUpdate, layer_ids: list[int]) -> np.ndarray:
    """Concatenated selected-layer slices of one update."""
    return update.delta.concat(layer_ids)


def build_difference_set(selectees: list[CandidateUpdate], layer_ids: list[int]) -> DifferenceSet:
    if len(selectees) < 2:
        raise ParameterError(f"need >= 2 selectees, got {len(selectees)}")
    selectees = sorted(selectees, key=lambda u: u.client_id)
    ids = [u.client_id for u in selectees]
    vecs = np.stack([election_vector(u, layer_ids) for u in selectees])
    rows, pairs = [], []
    for a in range(len(ids)):
        for b in range(len(ids)):
            if a == b:
                continue
            rows.append(vecs[a] - vecs[b])
            pairs.append((ids[a], ids[b]))
    return DifferenceSet(np.stack(rows), pairs)


def _pairwise_diffs(selectee_vecs: np.ndarray) -> np.ndarray:
    m = len(selectee_vecs)
    rows = []
    for a in range(m):
        for b in range(m):
            if a != b:
                rows.append(selectee_vecs[a] - selectee_vecs[b])
    return np.stack(rows)


def score_candidate(model: VAEModel, candidate: CandidateUpdate,
                    selectees: list[CandidateUpdate], layer_ids: list[int]) -> CandidateScore:
    """Sum of eval-mode reconstruction errors of (selectee - candidate) diffs."""
    if any(s.client_id == candidate.client_id for s in selectees):
        raise ParameterError(f"candidate {candidate.client_id} is already a selectee")
    cand = election_vector(candidate, layer_ids)
    sel = np.stack([election_vector(s, layer_ids) for s in selectees])
    errors = reconstruction_errors(model, sel - cand)
    return CandidateScore(candidate.client_id, float(errors.sum()))


def top_down_election(selectees: list[CandidateUpdate], all_updates: list[CandidateUpdate],
                      target_count: int, step_count: int, epochs_init: int, epochs_tune: int,
                      settings: VAESettings, rng: RngStream,
                      layer_ids: list[int] | None = None) -> tuple[list[int], dict]:
    """Enlarge the selectee set to target_count members.

    Returns (selectee ids ascending, audit). If the set is already large
    enough it is returned untouched with no VAE work. The final step adds
    fewer than step_count members when that lands exactly on the target.
    Difference vectors concatenate the given layers (all by default).
    """
    if target_count > len(all_updates):
        raise ParameterError(f"target_count {target_count} exceeds {len(all_updates)} updates")
    if step_count < 1:
        raise ParameterError("step_count must be >= 1")
    selected = {u.client_id for u in selectees}
    if len(selected) >= target_count:
        return sorted(selected), {"kind": "top_down", "steps": []}
    if len(selectees) < 2:
        raise ParameterError(f"need >= 2 selectees to start, got {len(selectees)}")

    by_id = {u.client_id: u for u in all_updates}
    if layer_ids is None:
        layer_ids = list(selectees[0].delta.layer_ids)
    vectors = {i: election_vector(u, layer_ids) for i, u in by_id.items()}
    dim = len(next(iter(vectors.values())))

    model = init_vae(dim, settings.hidden_dim, settings.latent_dim, rng.derive("vae-init"))

    def phase(epochs: int, tag: str, index: int) -> float:
        nonlocal model
        u_set = _pairwise_diffs(np.stack([vectors[i] for i in sorted(selected)]))
        state = SgdState(learning_rate=settings.lr)
        model, history = train_vae(model, u_set, epochs, state, rng.derive(tag, index),
                                   batch_size=settings.batch_size)
        return history[-1]

    phase(epochs_init, "train", 0)
    steps = []
    step = 0
    while len(selected) < target_count:
        step += 1
        mean_j = phase(epochs_tune, "tune", step)
        sel_vecs = np.stack([vectors[i] for i in sorted(selected)])
        scores: list[CandidateScore] = []
        for cid in sorted(i for i in by_id if i not in selected):
            errors = reconstruction_errors(model, sel_vecs - vectors[cid])
            scores.append(CandidateScore(cid, float(errors.sum())))
        n_add = min(step_count, target_count - len(selected))
        scores.sort(key=lambda s: (s.score, s.candidate_id))
        added = scores[:n_add]
        selected.update(s.candidate_id for s in added)
        steps.append({
            "n_selectees": len(selected),
            "added": [{"id": s.candidate_id, "score": s.score} for s in added],
            "scores": {str(s.candidate_id): s.score for s in scores},
            "mean_j": mean_j,
        })
    return sorted(selected), {"kind": "top_down", "steps": steps}
