"""Counter-based seeded random source.

Every draw is derived from SHA-256 of (seed, counter), so a stream can be
restored exactly by re-creating the source with the same seed and position.
That property is what makes interrupted runs resumable without replaying the
decision sequence: only the draw counter needs to be persisted.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

T = TypeVar("T")

_FLOAT_DENOM = float(1 << 53)


class CountingRng:
    """Deterministic uniform source with an explicit, restorable position."""

    def __init__(self, seed: int, position: int = 0) -> None:
        self._seed_bytes = int(seed).to_bytes(16, "big", signed=True)
        self._position = int(position)

    @property
    def seed_bytes(self) -> bytes:
        return self._seed_bytes

    @property
    def position(self) -> int:
        """Number of draws consumed so far."""
        return self._position

    def _next_digest(self) -> bytes:
        digest = hashlib.sha256(
            self._seed_bytes + self._position.to_bytes(16, "big")
        ).digest()
        self._position += 1
        return digest

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        word = int.from_bytes(self._next_digest()[:8], "big")
        return (word >> 11) / _FLOAT_DENOM

    def randrange(self, n: int) -> int:
        """Uniform int in [0, n). Modulo bias is below 2**-64 for any sane n."""
        if n <= 0:
            raise ValueError(f"randrange bound must be positive, got {n}")
        return int.from_bytes(self._next_digest()[:16], "big") % n

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise IndexError("cannot choose from an empty sequence")
        return seq[self.randrange(len(seq))]
