"""Depolarizing noise sampling and small-weight error enumeration.

Every error instance draws from its own counter-based Philox stream keyed by
``(seed, stream_index)``, so an instance is reproducible on its own no matter
how trials are chunked or distributed over workers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import PauliFrame, ToricLattice

__all__ = [
    "NoiseSpec",
    "stream_rng",
    "sample_depolarizing",
    "sample_depolarizing_planes",
    "enumerate_errors",
    "enumeration_size",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 5_000_000
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseSpec:
    p_err: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_err <= 1.0) or math.isnan(self.p_err):
            raise ValueError(f"p_err must lie in [0, 1], got {self.p_err}")
        if not 0 <= self.seed <= _SEED_MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")


def stream_rng(seed: int, stream_index: int) -> np.random.Generator:
    """Independent generator for one (seed, stream) pair.

    The 128-bit Philox key is ``seed | stream_index << 64``; distinct keys give
    independent streams.
    """
    if not 0 <= stream_index <= _SEED_MASK:
        raise ValueError("stream_index must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=(int(seed) & _SEED_MASK) | (int(stream_index) << 64)))


def _codes_from_uniforms(u: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    third = p / 3.0
    # u < p/3 -> X, < 2p/3 -> Y, < p -> Z
    is_x = u < third
    is_y = (u >= third) & (u < 2 * third)
    is_z = (u >= 2 * third) & (u < p)
    x = (is_x | is_y).astype(np.uint8)
    z = (is_y | is_z).astype(np.uint8)
    return x, z


def sample_depolarizing_planes(
    spec: NoiseSpec, lat: ToricLattice, start: int, count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Frames for streams ``start .. start+count-1`` as ``(count, 2L^2)`` bit arrays."""
    n = lat.n_qubits
    u = np.empty((count, n), dtype=np.float64)
    for i in range(count):
        u[i] = stream_rng(spec.seed, start + i).random(n)
    return _codes_from_uniforms(u, spec.p_err)


def sample_depolarizing(spec: NoiseSpec, lat: ToricLattice, stream_index: int) -> PauliFrame:
    x, z = sample_depolarizing_planes(spec, lat, stream_index, 1)
    return PauliFrame(x[0], z[0])


def enumeration_size(lat: ToricLattice, max_weight: int) -> int:
    n = lat.n_qubits
    return sum(3**w * math.comb(n, w) for w in range(max_weight + 1))


def enumerate_errors(lat: ToricLattice, max_weight: int, cap: int = DEFAULT_ENUMERATION_CAP):
    """Yield every frame of weight <= ``max_weight`` exactly once.

    Raises ValueError up front if the count would exceed ``cap``.
    """
    if max_weight < 0:
        raise ValueError("max_weight must be nonnegative")
    total = enumeration_size(lat, max_weight)
    if total > cap:
        raise ValueError(f"{total} frames exceed the enumeration cap of {cap}")
    return _enumerate(lat.n_qubits, max_weight)


def _enumerate(n: int, max_weight: int):
    for w in range(max_weight + 1):
        for support in itertools.combinations(range(n), w):
            for paulis in itertools.product((1, 2, 3), repeat=w):
                codes = np.zeros(n, dtype=np.uint8)
                codes[list(support)] = paulis
                yield PauliFrame.from_codes(codes)
