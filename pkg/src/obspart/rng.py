"""Counter-addressable SplitMix64 streams.

SplitMix64 (Steele, Lea & Flood 2014; the seeding generator of the xoshiro
family) advances its state by a fixed odd constant and hashes it, so the
j-th draw of a stream is computable directly:

    state0(seed, stream) = mix64(mix64(seed) + GAMMA * (stream + 1))
    draw(seed, stream, j) = mix64(state0 + GAMMA * (j + 1))
    uniform = (draw >> 11) * 2**-53            # in [0, 1)

All arithmetic is modulo 2**64. Because any (stream, j) can be addressed
without generating its predecessors, rounds can be simulated in any order or
batch size with identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(state: int, n: int) -> list[int]:
    """First ``n`` outputs of plain SplitMix64 started from ``state``."""
    with np.errstate(over="ignore"):
        steps = np.uint64(state & _MASK) + GAMMA * np.arange(1, n + 1, dtype=np.uint64)
    return [int(x) for x in mix64(steps)]


def stream_states(seed: int, streams) -> np.ndarray:
    with np.errstate(over="ignore"):
        base = mix64(np.array([seed & _MASK], dtype=np.uint64))[0]
        s = np.asarray(streams, dtype=np.uint64)
        return mix64(base + GAMMA * (s + np.uint64(1)))


def uniforms(seed: int, streams, j: int) -> np.ndarray:
    """The j-th uniform double of each stream in ``streams``."""
    with np.errstate(over="ignore"):
        st = stream_states(seed, streams)
        z = mix64(st + GAMMA * np.uint64(j + 1))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class SeededGenerator:
    seed: int
    stream: int = 0

    algorithm = "splitmix64"

    def uniform(self, j: int) -> float:
        return float(uniforms(self.seed, [self.stream], j)[0])

    def raw(self, j: int) -> int:
        """The j-th raw 64-bit output of this stream."""
        with np.errstate(over="ignore"):
            st = stream_states(self.seed, [self.stream])
            return int(mix64(st + GAMMA * np.uint64(j + 1))[0])

    def substream(self, index: int) -> SeededGenerator:
        return SeededGenerator(self.seed, index)
