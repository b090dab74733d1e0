"""Union-find decoding of toric-code syndromes.

Each defect plane is decoded independently: vertex defects on the primal
lattice give the Z part of the correction, plaquette defects on the dual
lattice give the X part.  Growth is synchronous (every odd cluster grows by a
half-edge per round, smallest cluster first), merges happen at the end of a
round, and the correction is peeled from a BFS spanning forest of the fully
grown edges in reverse BFS order.

The kernel comes from the compiled ``_ufcore`` extension when it is importable
and from the pure-Python ``_ufpy`` module otherwise.  Set
``DCQEC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from . import _ufpy
from ._ufpy import ClusterForest
from .lattice import PauliFrame, Syndrome, ToricLattice

__all__ = ["BACKEND", "ClusterForest", "uf_decode", "uf_decode_plane", "uf_decode_planes", "plane_decoder", "max_growth_rounds"]

if os.environ.get("DCQEC_PURE_PYTHON"):
    _kernel = _ufpy
    BACKEND = "python"
else:
    try:
        from . import _ufcore as _kernel

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _kernel = _ufpy
        BACKEND = "python"

PRIMAL = "primal"
DUAL = "dual"


def max_growth_rounds(lat: ToricLattice) -> int:
    return 2 * lat.L


@lru_cache(maxsize=None)
def _decoder(L: int, plane: str, backend: str):
    lat = ToricLattice(L)
    module = _ufpy if backend == "python" else _kernel
    if plane == PRIMAL:
        return module.PlaneDecoder(lat.vertex_edges, lat.edge_vertices)
    if plane == DUAL:
        return module.PlaneDecoder(lat.plaquette_edges, lat.edge_plaquettes)
    raise ValueError(f"unknown plane {plane!r}")


def plane_decoder(lat: ToricLattice, plane: str = PRIMAL, backend: str | None = None):
    """Cached decoder with its scratch buffers for one lattice plane.

    Instances are not reentrant; each worker process gets its own cache.
    """
    return _decoder(lat.L, plane, backend or BACKEND)


def uf_decode_plane(defects, lat: ToricLattice, plane: str = PRIMAL, backend: str | None = None) -> np.ndarray:
    """Correction support (edge bits) reproducing ``defects`` on one plane.

    ``plane='primal'`` treats the bits as vertex defects, ``'dual'`` as
    plaquette defects.  Raises ValueError for an odd defect count.
    """
    defects = np.asarray(defects, dtype=np.uint8)
    if defects.shape != (lat.n_vertices,):
        raise ValueError(f"expected {lat.n_vertices} defect bits, got shape {defects.shape}")
    return plane_decoder(lat, plane, backend).decode(defects, max_growth_rounds(lat))


def uf_decode_planes(vertex_defects, plaquette_defects, lat: ToricLattice, backend: str | None = None):
    """Batch decode: ``(B, L^2)`` defect arrays to ``(B, 2L^2)`` X and Z correction parts."""
    rounds = max_growth_rounds(lat)
    z = plane_decoder(lat, PRIMAL, backend).decode_batch(np.asarray(vertex_defects, dtype=np.uint8), rounds)
    x = plane_decoder(lat, DUAL, backend).decode_batch(np.asarray(plaquette_defects, dtype=np.uint8), rounds)
    return x, z


def uf_decode(syn: Syndrome, lat: ToricLattice, backend: str | None = None) -> PauliFrame:
    z = uf_decode_plane(syn.vertex_defects, lat, PRIMAL, backend)
    x = uf_decode_plane(syn.plaquette_defects, lat, DUAL, backend)
    return PauliFrame(x, z)
