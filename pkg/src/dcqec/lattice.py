"""Toric-code geometry, Pauli frames, syndromes and homology classes.

Qubits live on the 2L^2 edges of an L x L periodic square lattice.  Edge
``orientation * L*L + row * L + col`` is

* horizontal (orientation 0): joins vertex (row, col) to vertex (row, col+1)
* vertical (orientation 1): joins vertex (row, col) to vertex (row+1, col)

Plaquette (row, col) is the face whose top-left corner is vertex (row, col);
its boundary is h(row, col), h(row+1, col), v(row, col), v(row, col+1).

Vertex stabilizers X_v detect the Z component of an error, plaquette
stabilizers Z_p detect the X component.  Defects are stored as bits
(1 means the stabilizer reads -1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "ToricLattice",
    "PauliFrame",
    "Syndrome",
    "LogicalClass",
    "compute_syndrome",
    "syndrome_planes",
    "logical_class",
    "logical_planes",
    "decode_succeeded",
    "InvalidSyndromeError",
]

HORIZONTAL = 0
VERTICAL = 1

PAULI_LABELS = ("I", "X", "Y", "Z")


class InvalidSyndromeError(ValueError):
    """A frame was expected to have trivial syndrome but does not."""


@dataclass(frozen=True)
class ToricLattice:
    L: int

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L < 2:
            raise ValueError(f"lattice size must be an integer >= 2, got {self.L!r}")

    @property
    def n_qubits(self) -> int:
        return 2 * self.L * self.L

    @property
    def n_vertices(self) -> int:
        return self.L * self.L

    @property
    def n_plaquettes(self) -> int:
        return self.L * self.L

    def edge_index(self, orientation: int, row: int, col: int) -> int:
        L = self.L
        return orientation * L * L + (row % L) * L + (col % L)

    def edge_coords(self, edge: int) -> tuple[int, int, int]:
        """Inverse of :meth:`edge_index`: ``(orientation, row, col)``."""
        if not 0 <= edge < self.n_qubits:
            raise IndexError(f"edge {edge} out of range for L={self.L}")
        L2 = self.L * self.L
        orientation, rem = divmod(int(edge), L2)
        row, col = divmod(rem, self.L)
        return orientation, row, col

    # Incidence tables are cached per L and shared; never mutate them.
    @property
    def vertex_edges(self) -> np.ndarray:
        return _geometry(self.L)[0]

    @property
    def plaquette_edges(self) -> np.ndarray:
        return _geometry(self.L)[1]

    @property
    def edge_vertices(self) -> np.ndarray:
        return _geometry(self.L)[2]

    @property
    def edge_plaquettes(self) -> np.ndarray:
        return _geometry(self.L)[3]


@lru_cache(maxsize=None)
def _geometry(L: int):
    r, c = np.divmod(np.arange(L * L), L)
    L2 = L * L

    def h(rr, cc):
        return (rr % L) * L + (cc % L)

    def v(rr, cc):
        return L2 + (rr % L) * L + (cc % L)

    # Order within each row is fixed; the UF spanning forest depends on it.
    vertex_edges = np.stack([h(r, c), h(r, c - 1), v(r, c), v(r - 1, c)], axis=1)
    plaquette_edges = np.stack([h(r, c), h(r + 1, c), v(r, c), v(r, c + 1)], axis=1)

    edge_vertices = np.empty((2 * L2, 2), dtype=np.intp)
    edge_vertices[:L2, 0] = r * L + c
    edge_vertices[:L2, 1] = r * L + (c + 1) % L
    edge_vertices[L2:, 0] = r * L + c
    edge_vertices[L2:, 1] = ((r + 1) % L) * L + c

    # h(r,c) separates p(r-1,c) above from p(r,c) below; v(r,c) separates p(r,c-1) and p(r,c).
    edge_plaquettes = np.empty((2 * L2, 2), dtype=np.intp)
    edge_plaquettes[:L2, 0] = ((r - 1) % L) * L + c
    edge_plaquettes[:L2, 1] = r * L + c
    edge_plaquettes[L2:, 0] = r * L + (c - 1) % L
    edge_plaquettes[L2:, 1] = r * L + c

    tables = (vertex_edges.astype(np.intp), plaquette_edges.astype(np.intp), edge_vertices, edge_plaquettes)
    for t in tables:
        t.setflags(write=False)
    return tables


def _bits(a, length: int, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.uint8)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise ValueError(f"{name} must be a bit vector of length {length}, got shape {arr.shape}")
    if arr.size and arr.max() > 1:
        raise ValueError(f"{name} must contain only 0/1")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PauliFrame:
    """Pauli operator on all qubits, up to phase, as two bit-planes.

    ``(x, z)`` per qubit: (0,0)=I, (1,0)=X, (0,1)=Z, (1,1)=Y.
    """

    x_part: np.ndarray
    z_part: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.x_part).shape[0] if np.ndim(self.x_part) == 1 else -1
        object.__setattr__(self, "x_part", _bits(self.x_part, n, "x_part"))
        object.__setattr__(self, "z_part", _bits(self.z_part, n, "z_part"))

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliFrame":
        zeros = np.zeros(n_qubits, dtype=np.uint8)
        return cls(zeros, zeros)

    @classmethod
    def from_labels(cls, labels) -> "PauliFrame":
        """Build from a sequence of 'I'/'X'/'Y'/'Z' or class indices 0..3."""
        codes = np.array([PAULI_LABELS.index(s) if isinstance(s, str) else int(s) for s in labels], dtype=np.uint8)
        return cls.from_codes(codes)

    @classmethod
    def from_codes(cls, codes) -> "PauliFrame":
        """Class index per qubit in the order (I, X, Y, Z)."""
        codes = np.asarray(codes, dtype=np.uint8)
        if codes.size and codes.max() > 3:
            raise ValueError("Pauli codes must be in 0..3")
        return cls((codes == 1) | (codes == 2), (codes == 2) | (codes == 3))

    @classmethod
    def single(cls, n_qubits: int, qubit: int, pauli: str) -> "PauliFrame":
        codes = np.zeros(n_qubits, dtype=np.uint8)
        codes[qubit] = PAULI_LABELS.index(pauli)
        return cls.from_codes(codes)

    @property
    def n_qubits(self) -> int:
        return self.x_part.shape[0]

    def codes(self) -> np.ndarray:
        """Per-qubit class index (I=0, X=1, Y=2, Z=3)."""
        x = self.x_part.astype(np.uint8)
        z = self.z_part.astype(np.uint8)
        return np.where(x & z, 2, np.where(x, 1, np.where(z, 3, 0))).astype(np.uint8)

    def weight(self) -> int:
        return int(np.count_nonzero(self.x_part | self.z_part))

    def __xor__(self, other: "PauliFrame") -> "PauliFrame":
        if self.n_qubits != other.n_qubits:
            raise ValueError("frames act on different numbers of qubits")
        return PauliFrame(self.x_part ^ other.x_part, self.z_part ^ other.z_part)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliFrame):
            return NotImplemented
        return np.array_equal(self.x_part, other.x_part) and np.array_equal(self.z_part, other.z_part)

    def __hash__(self):
        return hash((self.x_part.tobytes(), self.z_part.tobytes()))

    def __repr__(self):
        return f"PauliFrame({''.join(PAULI_LABELS[c] for c in self.codes())})"


@dataclass(frozen=True, eq=False)
class Syndrome:
    vertex_defects: np.ndarray
    plaquette_defects: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.vertex_defects).shape[0] if np.ndim(self.vertex_defects) == 1 else -1
        object.__setattr__(self, "vertex_defects", _bits(self.vertex_defects, n, "vertex_defects"))
        object.__setattr__(self, "plaquette_defects", _bits(self.plaquette_defects, n, "plaquette_defects"))

    @classmethod
    def trivial(cls, lat: ToricLattice) -> "Syndrome":
        zeros = np.zeros(lat.n_vertices, dtype=np.uint8)
        return cls(zeros, zeros)

    def is_trivial(self) -> bool:
        return not (self.vertex_defects.any() or self.plaquette_defects.any())

    def defect_count(self) -> int:
        return int(self.vertex_defects.sum()) + int(self.plaquette_defects.sum())

    def __xor__(self, other: "Syndrome") -> "Syndrome":
        return Syndrome(self.vertex_defects ^ other.vertex_defects, self.plaquette_defects ^ other.plaquette_defects)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Syndrome):
            return NotImplemented
        return np.array_equal(self.vertex_defects, other.vertex_defects) and np.array_equal(
            self.plaquette_defects, other.plaquette_defects
        )

    def __hash__(self):
        return hash((self.vertex_defects.tobytes(), self.plaquette_defects.tobytes()))


class LogicalClass(NamedTuple):
    """Winding parities of a syndrome-free frame.

    ``z_horizontal``/``z_vertical``: Z support wrapping the torus along rows / columns.
    ``x_horizontal``/``x_vertical``: the same for X support on the dual lattice.
    """

    z_horizontal: int
    z_vertical: int
    x_horizontal: int
    x_vertical: int

    def is_trivial(self) -> bool:
        return not any(self)


def syndrome_planes(x: np.ndarray, z: np.ndarray, lat: ToricLattice) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised syndrome over arbitrary leading batch axes.

    ``x`` and ``z`` have shape ``(..., 2L^2)``; returns vertex and plaquette
    defect arrays of shape ``(..., L^2)`` (uint8).
    """
    z = np.asarray(z, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    if z.shape[-1] != lat.n_qubits or x.shape[-1] != lat.n_qubits:
        raise ValueError(f"frame length must be {lat.n_qubits} for L={lat.L}")
    ve, pe = lat.vertex_edges, lat.plaquette_edges
    vd = z[..., ve[:, 0]] ^ z[..., ve[:, 1]] ^ z[..., ve[:, 2]] ^ z[..., ve[:, 3]]
    pd = x[..., pe[:, 0]] ^ x[..., pe[:, 1]] ^ x[..., pe[:, 2]] ^ x[..., pe[:, 3]]
    return vd, pd


def compute_syndrome(frame: PauliFrame, lat: ToricLattice) -> Syndrome:
    if frame.n_qubits != lat.n_qubits:
        raise ValueError(f"frame has {frame.n_qubits} qubits, lattice L={lat.L} has {lat.n_qubits}")
    vd, pd = syndrome_planes(frame.x_part, frame.z_part, lat)
    return Syndrome(vd, pd)


def logical_planes(x: np.ndarray, z: np.ndarray, lat: ToricLattice, row: int = 0, col: int = 0) -> np.ndarray:
    """Winding parities over leading batch axes, shape ``(..., 4)``.

    Assumes trivial syndrome; the caller is responsible for checking.  The cut
    position (``row``, ``col``) is irrelevant for syndrome-free input.
    """
    L = lat.L
    L2 = L * L
    rows = np.arange(L)
    h_col = rows * L + (col % L)  # h(r, col) for all r
    v_row = L2 + (row % L) * L + rows  # v(row, c) for all c
    v_col = L2 + rows * L + (col % L)  # v(r, col) for all r
    h_row = (row % L) * L + rows  # h(row, c) for all c
    z = np.asarray(z, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    out = np.stack(
        [
            z[..., h_col].sum(axis=-1) & 1,
            z[..., v_row].sum(axis=-1) & 1,
            x[..., v_col].sum(axis=-1) & 1,
            x[..., h_row].sum(axis=-1) & 1,
        ],
        axis=-1,
    )
    return out.astype(np.uint8)


def logical_class(frame: PauliFrame, lat: ToricLattice, row: int = 0, col: int = 0) -> LogicalClass:
    """Homology class of a frame with trivial syndrome.

    Raises :class:`InvalidSyndromeError` if the frame has any defect, since its
    class is then not defined.
    """
    if not compute_syndrome(frame, lat).is_trivial():
        raise InvalidSyndromeError("logical class undefined for a frame with nontrivial syndrome")
    bits = logical_planes(frame.x_part, frame.z_part, lat, row, col)
    return LogicalClass(*(int(b) for b in bits))


def decode_succeeded(error: PauliFrame, correction: PauliFrame, lat: ToricLattice) -> bool:
    residual = error ^ correction
    if not compute_syndrome(residual, lat).is_trivial():
        raise InvalidSyndromeError("correction does not reproduce the error syndrome")
    return logical_class(residual, lat).is_trivial()
