"""Divide-and-conquer decoding of the toric code under depolarizing noise.

A small dense network corrects short-range errors around every defect, and a
union-find decoder resolves whatever syndrome is left.
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    LogicalClass,
    PauliFrame,
    Syndrome,
    ToricLattice,
    compute_syndrome,
    decode_succeeded,
    logical_class,
)
from .noise import NoiseSpec, enumerate_errors, sample_depolarizing  # noqa: E402
from .uf import BACKEND, uf_decode, uf_decode_plane  # noqa: E402

__all__ = [
    "__version__",
    "BACKEND",
    "LogicalClass",
    "NoiseSpec",
    "PauliFrame",
    "Syndrome",
    "ToricLattice",
    "compute_syndrome",
    "decode_succeeded",
    "enumerate_errors",
    "logical_class",
    "sample_depolarizing",
    "uf_decode",
    "uf_decode_plane",
]
