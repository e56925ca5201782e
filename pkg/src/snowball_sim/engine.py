"""Federated round loop: sampling, local training, defense, aggregation.

One experiment is a pure function of its ExperimentConfig: every random
choice flows from the config seed through tagged RngStream paths, so a
rerun is bit-identical except for measured wall-clock fields.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import datagen
from .baselines import fedavg_select, ideal_select, krum_select
from .bottom_up import LayerPolicy, bottom_up_election, select_layers
from .clustering import gap_statistic
from .diagnostics import mean_pairwise_distance
from .errors import AggregationError, ConfigError, NumericError, ParameterError
from .layered import LayeredVector
from .nn import MLPModel, SgdState, accuracy, build_classifier, mlp_backward, mlp_forward, \
    predict, sgd_step, softmax_cross_entropy
from .rng import RngStream
from .top_down import VAESettings, top_down_election
from .updates import CandidateUpdate, ModelUpdate, strip_for_defense

log = logging.getLogger(__name__)

DEFENSES = ("snowball", "snowball_minus", "fedavg", "krum", "ideal")
ATTACKS = ("none", "cba", "dba")
PARTITIONS = ("dirichlet_label_skew", "feature_shift")
LAYER_POLICIES = ("all", "first_last", "top_divergence")


@dataclass
class ExperimentConfig:
    # population and schedule
    n_clients: int = 40
    k_participants: int = 20
    t_rounds: int = 40
    e_local: int = 5
    batch_size: int = 10
    # local SGD
    lr0: float = 0.01
    lr_decay: float = 0.99
    momentum: float = 0.9
    weight_decay: float = 5e-4
    # attack
    attack: str = "cba"
    mcr: float = 0.2
    pdr: float = 0.3
    target_class: int = 0
    trigger_len: int = 9
    trigger_value: float = 3.0
    trigger_parts: int = 3
    attackers_always_sampled: bool = False
    # data
    data_csv: str = ""
    label_column: str = "label"
    test_fraction: float = 0.1
    n_features: int = 32
    n_classes: int = 4
    class_sep: float = 6.0
    n_train: int = 8000
    n_test: int = 1000
    partition: str = "dirichlet_label_skew"
    alpha: float = 0.5
    shift_sigma: float = 1.0
    # model
    hidden_dims: tuple[int, ...] = (64,)
    # defense
    defense: str = "snowball"
    m_initial: int = 2        # bottom-up selectee count
    m_final: int = 10         # total updates aggregated after enlargement
    m_step: int = 1           # candidates added per top-down step
    t_topdown: int = 10       # top-down election active for rounds t > t_topdown
    n_vote_clusters: int | None = None   # None: gap statistic on round-1 updates
    layer_policy: str = "top_divergence"
    layer_top_k: int = 2
    vae_epochs_init: int = 60
    vae_epochs_tune: int = 10
    vae_hidden: int = 64
    vae_latent: int = 16
    vae_lr: float = 1e-3
    vae_batch: int = 32
    krum_f_ratio: float = 0.3
    krum_m: int | None = None            # None: use m_final
    # evaluation
    ba_exclude_target_class: bool = False
    seed: int = 0

    def validate(self) -> None:
        def need(cond: bool, msg: str):
            if not cond:
                raise ConfigError(msg)

        need(self.n_clients >= 1, "n_clients must be >= 1")
        need(1 <= self.k_participants <= self.n_clients, "k_participants must satisfy 1 <= K <= n_clients")
        need(self.t_rounds >= 0, "t_rounds must be >= 0")
        need(self.e_local >= 0, "e_local must be >= 0")
        need(self.batch_size >= 1, "batch_size must be >= 1")
        need(self.lr0 > 0, "lr0 must be > 0")
        need(0 < self.lr_decay <= 1, "lr_decay must be in (0, 1]")
        need(0 <= self.momentum < 1, "momentum must be in [0, 1)")
        need(self.weight_decay >= 0, "weight_decay must be >= 0")
        need(self.attack in ATTACKS, f"attack must be one of {ATTACKS}")
        need(0 <= self.mcr < 0.5, "mcr must satisfy 0 <= mcr < 0.5")
        need(0 <= self.pdr <= 1, "pdr must be in [0, 1]")
        need(self.defense in DEFENSES, f"defense must be one of {DEFENSES}")
        need(self.partition in PARTITIONS, f"partition must be one of {PARTITIONS}")
        need(self.alpha > 0, "alpha must be > 0")
        need(self.shift_sigma >= 0, "shift_sigma must be >= 0")
        need(self.m_initial >= 1, "m_initial must be >= 1")
        need(self.m_initial <= self.m_final <= self.k_participants,
             "must satisfy m_initial <= m_final <= k_participants")
        need(self.m_step >= 1, "m_step must be >= 1")
        need(self.t_topdown < self.t_rounds, "t_topdown must be < t_rounds")
        if self.defense == "snowball":
            need(self.m_initial >= 2, "defense snowball needs m_initial >= 2")
        if self.n_vote_clusters is not None:
            need(self.n_vote_clusters >= 2, "n_vote_clusters must be >= 2 (or auto)")
        need(self.layer_policy in LAYER_POLICIES, f"layer_policy must be one of {LAYER_POLICIES}")
        need(self.layer_top_k >= 1, "layer_top_k must be >= 1")
        need(self.vae_epochs_init >= 0 and self.vae_epochs_tune >= 0, "VAE epochs must be >= 0")
        need(self.vae_hidden >= 1 and self.vae_latent >= 1, "VAE dims must be >= 1")
        need(self.vae_lr > 0, "vae_lr must be > 0")
        need(self.vae_batch >= 1, "vae_batch must be >= 1")
        need(0 < self.krum_f_ratio < 1, "krum_f_ratio must be in (0, 1)")
        if self.krum_m is not None:
            need(self.krum_m >= 1, "krum_m must be >= 1 (or auto)")
        need(0 < self.test_fraction < 1, "test_fraction must be in (0, 1)")
        need(all(h >= 1 for h in self.hidden_dims), "hidden_dims must be positive")
        need(self.trigger_parts >= 1, "trigger_parts must be >= 1")
        if not self.data_csv:
            need(self.n_classes >= 2, "n_classes must be >= 2")
            need(self.n_features >= self.n_classes, "n_features must be >= n_classes")
            need(self.class_sep > 0, "class_sep must be > 0")
            need(self.n_train >= 1 and self.n_test >= 1, "n_train and n_test must be >= 1")
            need(0 <= self.target_class < self.n_classes, "target_class must be in [0, n_classes)")
            need(1 <= self.trigger_len <= self.n_features, "trigger_len must be in [1, n_features]")
            if self.attack == "dba":
                need(self.trigger_len % self.trigger_parts == 0,
                     "dba needs trigger_len divisible by trigger_parts")


@dataclass
class MetricsRecord:
    ma: float
    ba: float
    fpr: float
    fnr: float
    n_selected: int
    n_infected_selected: int
    wallclock_ms: float


@dataclass
class RoundRecord:
    round: int
    participants: list[int]
    selectees: list[int]
    metrics: MetricsRecord
    benign_dist: float = float("nan")   # mean pairwise distance among benign updates
    cross_dist: float = float("nan")    # mean benign-to-infected distance
    audits: list[dict] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RoundRecord]
    summary: dict


def sample_participants(n_clients: int, k: int, rng: RngStream) -> list[int]:
    """K distinct client ids, uniform without replacement."""
    if k > n_clients:
        raise ParameterError(f"cannot sample {k} of {n_clients} clients")
    gen = rng.generator()
    return sorted(int(i) for i in gen.choice(n_clients, size=k, replace=False))


def local_train(global_model: MLPModel, dataset: datagen.Dataset, epochs: int,
                sgd: SgdState, rng: RngStream, client_id: int = 0,
                infected: bool = False, batch_size: int = 10) -> ModelUpdate:
    """E epochs of mini-batch SGD; delta is trained minus global parameters."""
    if len(dataset) == 0:
        raise ParameterError(f"client {client_id}: empty dataset")
    params = global_model.params
    model = global_model
    gen = rng.generator()
    n = len(dataset)
    for _ in range(epochs):
        perm = gen.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            logits, cache = mlp_forward(model, dataset.features[idx])
            loss, grad_logits = softmax_cross_entropy(logits, dataset.labels[idx])
            if not np.isfinite(loss):
                raise NumericError(f"client {client_id}: non-finite training loss")
            grad = mlp_backward(model, cache, grad_logits)
            params = sgd_step(params, grad, sgd)
            model = model.with_params(params)
    delta = params - global_model.params
    return ModelUpdate(client_id, delta, len(dataset), infected)


def aggregate(selectees: list[ModelUpdate]) -> LayeredVector:
    """Sample-count weighted mean of the selectee deltas."""
    if not selectees:
        raise AggregationError("no selectees to aggregate")
    total = sum(u.n_samples for u in selectees)
    if total <= 0:
        raise AggregationError("selectees carry no samples")
    out = selectees[0].delta.scale(selectees[0].n_samples / total)
    for u in selectees[1:]:
        out = out + u.delta.scale(u.n_samples / total)
    return out


def evaluate(model: MLPModel, clean_test: datagen.Dataset, triggered_test: datagen.Dataset,
             target_class: int, exclude_target_class: bool = False) -> tuple[float, float]:
    """(main accuracy on clean test, trigger-to-target rate on triggered test)."""
    if len(clean_test) == 0 or len(triggered_test) == 0:
        raise ParameterError("test sets must be non-empty")
    ma = accuracy(model, clean_test.features, clean_test.labels)
    preds = predict(model, triggered_test.features)
    if exclude_target_class:
        keep = triggered_test.labels != target_class
        ba = float((preds[keep] == target_class).mean()) if keep.any() else 0.0
    else:
        ba = float((preds == target_class).mean())
    return ma, ba


def selection_metrics(updates: list[ModelUpdate], selected_ids: list[int]) -> tuple[float, float, int, int]:
    """(fpr, fnr, n_selected, n_infected_selected), benign updates as positives.

    fpr = infected selected / infected present, fnr = benign excluded /
    benign present, each 0 when its denominator is 0.
    """
    selected = set(selected_ids)
    n_infected = sum(u.infected for u in updates)
    n_benign = len(updates) - n_infected
    n_infected_selected = sum(u.infected and u.client_id in selected for u in updates)
    n_benign_excluded = sum((not u.infected) and u.client_id not in selected for u in updates)
    fpr = n_infected_selected / n_infected if n_infected else 0.0
    fnr = n_benign_excluded / n_benign if n_benign else 0.0
    return float(fpr), float(fnr), len(selected), n_infected_selected


@dataclass
class _SnowballState:
    """Quantities frozen on the first round's updates."""

    layer_ids: list[int] | None = None
    k_clusters: int | None = None


def _freeze_snowball_params(cfg: ExperimentConfig, state: _SnowballState,
                            candidates: list[CandidateUpdate], rng: RngStream) -> None:
    policy = LayerPolicy(cfg.layer_policy, cfg.layer_top_k)
    state.layer_ids = select_layers(candidates, policy)
    if cfg.n_vote_clusters is not None:
        k = cfg.n_vote_clusters
    else:
        per_layer = []
        for m in state.layer_ids:
            points = np.stack([u.delta.layer(m) for u in candidates])
            per_layer.append(gap_statistic(points, rng.derive("gap", m)))
        k = int(np.floor(np.mean(per_layer) + 0.5))
    state.k_clusters = max(2, min(k, len(candidates)))


def _select(cfg: ExperimentConfig, state: _SnowballState, t: int,
            updates: list[ModelUpdate], rng: RngStream) -> tuple[list[int], list[dict]]:
    """Dispatch to the configured defense; only ideal sees ground truth."""
    candidates = strip_for_defense(updates)
    if cfg.defense == "fedavg":
        return fedavg_select(candidates).selected, []
    if cfg.defense == "ideal":
        return ideal_select(updates).selected, []
    if cfg.defense == "krum":
        m = cfg.krum_m if cfg.krum_m is not None else cfg.m_final
        res = krum_select(candidates, m=min(m, len(candidates)), f_ratio=cfg.krum_f_ratio)
        return res.selected, [{"kind": "krum", "scores": {str(k): v for k, v in res.scores.items()}}]
    # snowball / snowball_minus
    if state.layer_ids is None:
        _freeze_snowball_params(cfg, state, candidates, rng.derive("freeze"))
    ids, _tally, bu_audit = bottom_up_election(
        candidates, cfg.m_initial, state.k_clusters, state.layer_ids)
    audits = [bu_audit]
    if cfg.defense == "snowball" and t > cfg.t_topdown:
        selectees = [u for u in candidates if u.client_id in ids]
        settings = VAESettings(cfg.vae_hidden, cfg.vae_latent, cfg.vae_lr, cfg.vae_batch)
        ids, td_audit = top_down_election(
            selectees, candidates, cfg.m_final, cfg.m_step,
            cfg.vae_epochs_init, cfg.vae_epochs_tune, settings,
            rng.derive("topdown"), layer_ids=state.layer_ids)
        audits.append(td_audit)
    return ids, audits


def _build_data(cfg: ExperimentConfig, root: RngStream):
    if cfg.data_csv:
        full = datagen.load_csv_dataset(cfg.data_csv, cfg.label_column)
        train, test = datagen.train_test_split(full, cfg.test_fraction, root.derive("split"))
    else:
        full = datagen.generate_synthetic(cfg.n_train + cfg.n_test, cfg.n_features,
                                          cfg.n_classes, cfg.class_sep, root.derive("data"))
        train = full.subset(np.arange(cfg.n_train))
        test = full.subset(np.arange(cfg.n_train, cfg.n_train + cfg.n_test))
    return train, test


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    root = RngStream(cfg.seed)
    train, clean_test = _build_data(cfg, root)
    n_features = train.n_features
    n_classes = int(max(train.labels.max(), clean_test.labels.max())) + 1

    pspec = datagen.PartitionSpec(cfg.partition, cfg.n_clients, cfg.alpha, cfg.shift_sigma)
    if cfg.partition == "dirichlet_label_skew":
        client_data = datagen.dirichlet_partition(train, pspec, root.derive("partition"))
    else:
        client_data = datagen.feature_shift_partition(train, pspec, root.derive("partition"))

    n_attackers = int(np.floor(cfg.mcr * cfg.n_clients))
    attackers = set()
    if cfg.attack != "none" and n_attackers > 0:
        gen = root.derive("attackers").generator()
        attackers = {int(i) for i in gen.choice(cfg.n_clients, size=n_attackers, replace=False)}

    trigger = None
    triggered_test = clean_test
    local_data = list(client_data)
    if cfg.attack != "none":
        slots = tuple(range(n_features - cfg.trigger_len, n_features))
        trigger = datagen.TriggerSpec(cfg.attack, slots, cfg.trigger_value,
                                      cfg.target_class, cfg.pdr, cfg.trigger_parts)
        part_gen = root.derive("dba-parts").generator()
        for cid in sorted(attackers):
            part = int(part_gen.integers(cfg.trigger_parts)) if cfg.attack == "dba" else None
            local_data[cid] = datagen.inject_trigger(
                client_data[cid], trigger, root.derive("poison", cid), attacker_part=part)
        triggered_test = datagen.apply_full_trigger(clean_test, trigger)

    model = build_classifier([n_features, *cfg.hidden_dims, n_classes], root.derive("model-init"))
    snow = _SnowballState()
    records: list[RoundRecord] = []
    wall_total_start = time.perf_counter()

    for t in range(1, cfg.t_rounds + 1):
        t0 = time.perf_counter()
        rng_round = root.derive("round", t)
        if cfg.attackers_always_sampled and attackers:
            forced = sorted(attackers)[:cfg.k_participants]
            rest = [i for i in range(cfg.n_clients) if i not in attackers]
            n_fill = cfg.k_participants - len(forced)
            fill = rng_round.derive("sample").generator().choice(
                len(rest), size=n_fill, replace=False) if n_fill else []
            participants = sorted(forced + [rest[int(i)] for i in fill])
        else:
            participants = sample_participants(cfg.n_clients, cfg.k_participants,
                                               rng_round.derive("sample"))
        lr_t = cfg.lr0 * cfg.lr_decay ** (t - 1)
        updates = []
        for cid in participants:
            sgd = SgdState(lr_t, cfg.momentum, cfg.weight_decay)
            is_attacker = cid in attackers and cfg.attack != "none"
            try:
                upd = local_train(model, local_data[cid], cfg.e_local, sgd,
                                  rng_round.derive("train", cid), client_id=cid,
                                  infected=is_attacker, batch_size=cfg.batch_size)
            except NumericError as e:
                raise NumericError(f"round {t}: {e}") from e
            updates.append(upd)

        selected_ids, audits = _select(cfg, snow, t, updates, rng_round.derive("defense"))
        selectees = [u for u in updates if u.client_id in set(selected_ids)]
        if selectees:
            delta = aggregate(selectees)
            model = model.with_params(model.params + delta)
        else:
            log.warning("round %d: empty selectee set, global model unchanged", t)

        ma, ba = evaluate(model, clean_test, triggered_test, cfg.target_class,
                          cfg.ba_exclude_target_class)
        fpr, fnr, n_sel, n_inf_sel = selection_metrics(updates, selected_ids)

        vectors = np.stack([u.delta.concat() for u in updates])
        infected_mask = np.array([u.infected for u in updates])
        benign_dist = mean_pairwise_distance(vectors, ~infected_mask, ~infected_mask)
        cross_dist = mean_pairwise_distance(vectors, ~infected_mask, infected_mask) \
            if infected_mask.any() else float("nan")

        wall_ms = (time.perf_counter() - t0) * 1000.0
        records.append(RoundRecord(
            t, participants, sorted(selected_ids),
            MetricsRecord(ma, ba, fpr, fnr, n_sel, n_inf_sel, wall_ms),
            benign_dist, cross_dist, audits))

    if records:
        best = max(range(len(records)),
                   key=lambda i: (records[i].metrics.ma, -records[i].round))
        summary_ma = records[best].metrics.ma
        summary_ba = records[best].metrics.ba
        best_round = records[best].round
    else:
        summary_ma, summary_ba = evaluate(model, clean_test, triggered_test, cfg.target_class,
                                          cfg.ba_exclude_target_class)
        best_round = 0
    summary = {
        "ma": summary_ma,
        "ba": summary_ba,
        "best_round": best_round,
        "n_rounds": len(records),
        "wallclock_ms_total": (time.perf_counter() - wall_total_start) * 1000.0,
    }
    return ExperimentResult(cfg, records, summary)
