"""Seeded, forkable randomness.

Every stochastic choice in the simulator draws from an RngStream derived
from the single run seed, so a run is a pure function of its config.
Substreams are addressed by a path of (tag, index) pairs; deriving the
same path twice yields the same stream, and sibling derivations are
independent of each other and of derivation order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible source of pseudo-random numbers."""

    master_seed: int
    path: tuple[tuple[str, int], ...] = ()

    def derive(self, tag: str, index: int = 0) -> "RngStream":
        """Return the substream addressed by (tag, index) under this one."""
        return RngStream(self.master_seed, self.path + ((tag, int(index)),))

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream.

        Calling twice returns generators that produce identical sequences.
        """
        key: list[int] = []
        for tag, index in self.path:
            key.append(zlib.crc32(tag.encode("utf-8")))
            key.append(index & _MASK64)
        seq = np.random.SeedSequence(self.master_seed & _MASK64, spawn_key=tuple(key))
        return np.random.default_rng(seq)


def derive_rng(stream: RngStream, tag: str, index: int = 0) -> RngStream:
    """Functional form of RngStream.derive."""
    return stream.derive(tag, index)
