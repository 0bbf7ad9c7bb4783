"""Reproducible standard normal streams.

Each stream is keyed by ``(seed, stream_id)`` and positioned by a draw
counter. Raw 64-bit words come from Philox4x64 (counter based, so any
position can be reached without replaying the sequence); every word is
turned into exactly one normal deviate through the inverse normal CDF.
Consequently draw ``k`` of a stream depends only on ``(seed, stream_id, k)``.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Philox, SeedSequence
from scipy.special import ndtri

from .errors import DomainError, UsageError

RNG_DESCRIPTION = "philox4x64+ndtri(53-bit midpoint uniforms)"

# Substream tag reserved for annealing noise; split() children use 0..k-1.
NOISE_TAG = 0x7A657461


def _philox_key(seed, stream_id):
    words = SeedSequence(entropy=int(seed), spawn_key=tuple(stream_id)).generate_state(2, np.uint64)
    return words


class GaussianStream:
    """Counter-based i.i.d. N(0, 1) generator.

    >>> s = GaussianStream(7)
    >>> x = s.next_vector(3)
    >>> s.counter
    3
    """

    def __init__(self, seed, stream_id=(), counter=0):
        if isinstance(stream_id, int):
            stream_id = (stream_id,)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = tuple(int(i) for i in stream_id)
        self._key = _philox_key(self.seed, self.stream_id)
        self._split = False
        self.seek(int(counter))

    def seek(self, counter):
        """Reposition so the next draw is draw number ``counter``."""
        if counter < 0:
            raise DomainError("counter must be non-negative")
        block, offset = divmod(counter, 4)
        ctr = np.zeros(4, dtype=np.uint64)
        ctr[0] = block & 0xFFFFFFFFFFFFFFFF
        ctr[1] = block >> 64
        # Philox with counter c emits raw words 4c, 4c+1, ...
        self._bitgen = Philox(key=self._key, counter=ctr)
        if offset:
            self._bitgen.random_raw(offset)
        self.counter = counter

    def __repr__(self):
        return f"GaussianStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def _check_live(self):
        if self._split:
            raise UsageError(f"stream {self.stream_id} was split and can no longer be drawn from")

    def next_vector(self, length):
        """Return ``length`` standard normal draws and advance the counter."""
        self._check_live()
        length = int(length)
        if length < 1:
            raise DomainError("length must be >= 1")
        raw = self._bitgen.random_raw(length)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        self.counter += length
        return ndtri(u)

    def next_matrix(self, rows, cols):
        """Row-major block of draws; row ``i`` equals the i-th ``next_vector(cols)``."""
        return self.next_vector(int(rows) * int(cols)).reshape(int(rows), int(cols))

    def at(self, counter):
        """Fresh stream with the same key, positioned at ``counter``."""
        return GaussianStream(self.seed, self.stream_id, counter)

    def split(self, k):
        """Hand out ``k`` independent child streams; this stream becomes unusable."""
        self._check_live()
        k = int(k)
        if k < 1:
            raise DomainError("k must be >= 1")
        self._split = True
        return [GaussianStream(self.seed, self.stream_id + (i,)) for i in range(k)]

    def noise_stream(self):
        """Companion stream for annealing noise, independent of this one.

        Unlike :meth:`split` the parent stays usable, so the same stream can
        drive both an estimator and the optimiser noise it is paired with.
        """
        return GaussianStream(self.seed, self.stream_id + (NOISE_TAG,))

    def metadata(self):
        return {
            "seed": self.seed,
            "stream_id": "/".join(str(i) for i in self.stream_id) or "root",
            "rng": RNG_DESCRIPTION,
        }
