"""Dataset synthesis, non-IID partitioning, and backdoor triggers.

The synthetic task is Gaussian class blobs with guaranteed mean
separation, a vector stand-in for the image benchmarks. Triggers
overwrite a fixed set of feature slots with a fixed value, the vector
analog of a small pixel patch in a fixed corner: "cba" poisons the whole
pattern from every attacker, "dba" splits the slots into parts and each
attacker poisons only its own part.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError
from .rng import RngStream


@dataclass
class Dataset:
    features: np.ndarray          # (n, d) float64
    labels: np.ndarray            # (n,) int64
    triggered: np.ndarray = None  # (n,) bool, rows carrying a trigger

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 2:
            f = f.reshape(0, f.size) if len(self.labels) == 0 else f.reshape(len(self.labels), -1)
        self.features = f
        if self.triggered is None:
            self.triggered = np.zeros(len(self.labels), dtype=bool)
        self.triggered = np.asarray(self.triggered, dtype=bool)
        if not (len(self.features) == len(self.labels) == len(self.triggered)):
            raise ParameterError("features, labels and triggered must have equal row counts")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1] if len(self) else 0

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.triggered[idx])

    def copy(self) -> "Dataset":
        return Dataset(self.features.copy(), self.labels.copy(), self.triggered.copy())


@dataclass(frozen=True)
class PartitionSpec:
    scheme: str                   # "dirichlet_label_skew" | "feature_shift"
    n_clients: int
    alpha: float = 0.5            # Dirichlet concentration (label skew)
    shift_sigma: float = 1.0      # std of per-client feature offsets (feature shift)

    def __post_init__(self):
        if self.scheme not in ("dirichlet_label_skew", "feature_shift"):
            raise ParameterError(f"unknown partition scheme {self.scheme!r}")
        if self.n_clients < 1:
            raise ParameterError("n_clients must be >= 1")
        if self.alpha <= 0:
            raise ParameterError("alpha must be > 0")
        if self.shift_sigma < 0:
            raise ParameterError("shift_sigma must be >= 0")


@dataclass(frozen=True)
class TriggerSpec:
    mode: str                     # "cba" | "dba"
    slot_indices: tuple[int, ...]
    pattern_value: float
    target_class: int
    pdr: float
    n_parts: int = 3

    def __post_init__(self):
        if self.mode not in ("cba", "dba"):
            raise ParameterError(f"unknown trigger mode {self.mode!r}")
        if len(set(self.slot_indices)) != len(self.slot_indices):
            raise ParameterError("slot_indices must be distinct")
        if any(s < 0 for s in self.slot_indices):
            raise ParameterError("slot_indices must be non-negative")
        if not 0.0 <= self.pdr <= 1.0:
            raise ParameterError("pdr must be in [0, 1]")
        if self.mode == "dba" and len(self.slot_indices) % self.n_parts != 0:
            raise ParameterError("dba requires slot count divisible by n_parts")

    def part_slots(self, part: int) -> tuple[int, ...]:
        """Slots owned by one attacker part under dba."""
        if not 0 <= part < self.n_parts:
            raise ParameterError(f"part must be in [0, {self.n_parts}), got {part}")
        size = len(self.slot_indices) // self.n_parts
        return self.slot_indices[part * size:(part + 1) * size]


def generate_synthetic(n_samples: int, n_features: int, n_classes: int,
                       class_sep: float, rng: RngStream) -> Dataset:
    """Gaussian blobs: class c is N(mu_c, I) with ||mu_a - mu_b|| = class_sep.

    Means sit on scaled coordinate axes, so n_features >= n_classes is
    required. Labels are near-balanced (round-robin, then shuffled).
    """
    if n_classes < 2 or n_features < n_classes:
        raise ParameterError(f"need n_features >= n_classes >= 2, got {n_features}/{n_classes}")
    if class_sep <= 0:
        raise ParameterError("class_sep must be > 0")
    means = np.zeros((n_classes, n_features))
    np.fill_diagonal(means[:, :n_classes], class_sep / np.sqrt(2.0))
    if n_samples == 0:
        return Dataset(np.zeros((0, n_features)), np.zeros(0, dtype=np.int64))
    gen = rng.generator()
    labels = gen.permutation(np.arange(n_samples) % n_classes).astype(np.int64)
    features = means[labels] + gen.standard_normal((n_samples, n_features))
    return Dataset(features, labels)


def train_test_split(ds: Dataset, test_fraction: float, rng: RngStream) -> tuple[Dataset, Dataset]:
    """Shuffled split; default convention elsewhere in the package is 9:1."""
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError("test_fraction must be in (0, 1)")
    perm = rng.generator().permutation(len(ds))
    n_test = int(round(test_fraction * len(ds)))
    return ds.subset(perm[n_test:]), ds.subset(perm[:n_test])


_MAX_PARTITION_RETRIES = 100


def dirichlet_partition(ds: Dataset, spec: PartitionSpec, rng: RngStream) -> list[Dataset]:
    """Label-skewed split: per class, client shares are drawn Dir(alpha * 1_N).

    The union of the parts is exactly the input; draws leaving any client
    empty are retried a bounded number of times.
    """
    if spec.scheme != "dirichlet_label_skew":
        raise ParameterError("dirichlet_partition requires scheme dirichlet_label_skew")
    n = spec.n_clients
    if n == 1:
        return [ds.copy()]
    if len(ds) < n:
        raise ParameterError(f"cannot give {n} clients >= 1 sample from {len(ds)}")
    gen = rng.generator()
    classes = np.unique(ds.labels)
    for _ in range(_MAX_PARTITION_RETRIES):
        assignments: list[list[np.ndarray]] = [[] for _ in range(n)]
        for c in classes:
            idx = np.flatnonzero(ds.labels == c)
            idx = gen.permutation(idx)
            shares = gen.dirichlet(np.full(n, spec.alpha))
            bounds = np.floor(np.cumsum(shares) * len(idx)).astype(int)
            bounds[-1] = len(idx)
            start = 0
            for i, stop in enumerate(bounds):
                assignments[i].append(idx[start:stop])
                start = stop
        sizes = [sum(len(a) for a in parts) for parts in assignments]
        if min(sizes) > 0:
            return [ds.subset(np.concatenate(parts)) for parts in assignments]
    raise ParameterError(
        f"failed to give every client >= 1 sample after {_MAX_PARTITION_RETRIES} draws; "
        "increase alpha or the dataset size"
    )


def feature_shift_partition(ds: Dataset, spec: PartitionSpec, rng: RngStream) -> list[Dataset]:
    """Uniform split with a per-client feature-mean offset ~ N(0, sigma^2 I)."""
    if spec.scheme != "feature_shift":
        raise ParameterError("feature_shift_partition requires scheme feature_shift")
    n = spec.n_clients
    if len(ds) < n:
        raise ParameterError(f"cannot give {n} clients >= 1 sample from {len(ds)}")
    gen = rng.generator()
    perm = gen.permutation(len(ds))
    parts = np.array_split(perm, n)
    offsets = gen.standard_normal((n, ds.n_features)) * spec.shift_sigma
    out = []
    for i, part in enumerate(parts):
        sub = ds.subset(part)
        sub.features = sub.features + offsets[i]
        out.append(sub)
    return out


def inject_trigger(ds: Dataset, spec: TriggerSpec, rng: RngStream,
                   attacker_part: int | None = None) -> Dataset:
    """Poison floor(pdr * n) uniformly chosen rows.

    Chosen rows get the trigger slots (all of them under cba, only
    attacker_part's share under dba) overwritten with pattern_value, the
    label set to target_class, and the triggered flag raised.
    """
    if len(ds) and max(spec.slot_indices, default=-1) >= ds.n_features:
        raise ParameterError("slot_indices exceed feature dimension")
    if spec.mode == "dba":
        if attacker_part is None:
            raise ParameterError("dba injection requires attacker_part")
        slots = spec.part_slots(attacker_part)
    else:
        slots = spec.slot_indices
    out = ds.copy()
    n_poison = int(np.floor(spec.pdr * len(ds)))
    if n_poison == 0:
        return out
    rows = rng.generator().choice(len(ds), size=n_poison, replace=False)
    out.features[np.ix_(rows, np.asarray(slots))] = spec.pattern_value
    out.labels[rows] = spec.target_class
    out.triggered[rows] = True
    return out


def apply_full_trigger(ds: Dataset, spec: TriggerSpec) -> Dataset:
    """Stamp the assembled full trigger on every row, labels untouched.

    This is the backdoor-accuracy test set: under dba it is the union of
    all parts, i.e. the same pattern as cba.
    """
    if len(ds) and max(spec.slot_indices, default=-1) >= ds.n_features:
        raise ParameterError("slot_indices exceed feature dimension")
    out = ds.copy()
    out.features[:, np.asarray(spec.slot_indices)] = spec.pattern_value
    out.triggered[:] = True
    return out


def load_csv_dataset(path: str, label_column: str) -> Dataset:
    """Read a headered numeric CSV; labels are remapped to contiguous [0, O)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParameterError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ParameterError(f"{path}: no column named {label_column!r} in header")
        label_pos = header.index(label_column)
        feature_pos = [i for i in range(len(header)) if i != label_pos]
        rows, labels = [], []
        for r, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParameterError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                bad = next(i for i, c in enumerate(row) if not _is_number(c))
                raise ParameterError(
                    f"{path}: non-numeric cell at row {r}, column {header[bad]!r}"
                ) from None
            rows.append([values[i] for i in feature_pos])
            labels.append(values[label_pos])
    if not rows:
        return Dataset(np.zeros((0, len(feature_pos))), np.zeros(0, dtype=np.int64))
    raw = np.asarray(labels)
    uniq = np.unique(raw)
    remapped = np.searchsorted(uniq, raw)
    return Dataset(np.asarray(rows), remapped.astype(np.int64))


def save_csv_dataset(ds: Dataset, path: str, label_column: str = "label") -> None:
    """Write features as f0..f{d-1} plus the label column; load_csv_dataset inverse."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(ds.n_features)] + [label_column])
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False
