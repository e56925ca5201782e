"""Layer-indexed parameter vectors.

A LayeredVector holds a model's parameters (or an update delta) as one
flat float64 array per layer. The per-layer arrays are the geometric
objects the elections cluster and score, so all arithmetic here is
defined layer-wise and validated against mismatched shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass
class LayeredVector:
    layer_ids: tuple[int, ...]
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.layer_ids) != len(self.values):
            raise ShapeError("layer_ids and values must have equal length")
        if not self.layer_ids:
            raise ShapeError("a LayeredVector needs at least one layer")
        if any(b <= a for a, b in zip(self.layer_ids, self.layer_ids[1:])):
            raise ShapeError(f"layer_ids must be strictly increasing, got {self.layer_ids}")
        vals = []
        for lid, arr in zip(self.layer_ids, self.values):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0:
                raise ShapeError(f"layer {lid} must be a non-empty 1-D array")
            vals.append(arr)
        object.__setattr__(self, "values", tuple(vals))

    @classmethod
    def from_arrays(cls, arrays) -> "LayeredVector":
        """Build from a sequence of per-layer arrays, ids 0..L-1."""
        return cls(tuple(range(len(arrays))), tuple(np.asarray(a, dtype=np.float64) for a in arrays))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.values)

    def layer(self, layer_id: int) -> np.ndarray:
        try:
            i = self.layer_ids.index(layer_id)
        except ValueError:
            raise ShapeError(f"no layer with id {layer_id}") from None
        return self.values[i]

    def concat(self, layer_ids=None) -> np.ndarray:
        """Concatenate the given layers (all layers by default) into one vector."""
        if layer_ids is None:
            return np.concatenate(self.values)
        return np.concatenate([self.layer(m) for m in layer_ids])

    def _check_compatible(self, other: "LayeredVector"):
        if self.layer_ids != other.layer_ids or self.dims != other.dims:
            raise ShapeError(
                f"incompatible LayeredVectors: ids {self.layer_ids}/{other.layer_ids}, "
                f"dims {self.dims}/{other.dims}"
            )

    def __add__(self, other: "LayeredVector") -> "LayeredVector":
        self._check_compatible(other)
        return LayeredVector(self.layer_ids, tuple(a + b for a, b in zip(self.values, other.values)))

    def __sub__(self, other: "LayeredVector") -> "LayeredVector":
        self._check_compatible(other)
        return LayeredVector(self.layer_ids, tuple(a - b for a, b in zip(self.values, other.values)))

    def scale(self, factor: float) -> "LayeredVector":
        return LayeredVector(self.layer_ids, tuple(v * factor for v in self.values))

    def zeros_like(self) -> "LayeredVector":
        return LayeredVector(self.layer_ids, tuple(np.zeros_like(v) for v in self.values))

    def copy(self) -> "LayeredVector":
        return LayeredVector(self.layer_ids, tuple(v.copy() for v in self.values))

    def norm(self) -> float:
        return float(np.sqrt(sum(float(v @ v) for v in self.values)))

    def allfinite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.values)

    @property
    def size(self) -> int:
        return sum(self.dims)
