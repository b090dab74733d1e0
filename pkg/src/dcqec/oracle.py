"""Brute-force reference decoders for small instances.

These are ground truth for tests and deliberately unoptimised:
``exact_mwpm`` tries every perfect matching of the defects, and
``exhaustive_ml_decode`` sums the depolarizing probability of every frame in
each of the 16 logical cosets consistent with a syndrome.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import PauliFrame, Syndrome, ToricLattice

__all__ = [
    "DefectGraph",
    "torus_distance",
    "defect_graph",
    "exact_mwpm",
    "coset_probabilities",
    "exhaustive_ml_decode",
    "logical_representatives",
    "MAX_MATCHING_DEFECTS",
    "MAX_ML_SIZE",
]

MAX_MATCHING_DEFECTS = 12
MAX_ML_SIZE = 3


def torus_distance(a: int, b: int, L: int) -> int:
    """Manhattan distance with wraparound between sites ``a`` and ``b`` (index row*L+col)."""
    ra, ca = divmod(a, L)
    rb, cb = divmod(b, L)
    dr = abs(ra - rb)
    dc = abs(ca - cb)
    return min(dr, L - dr) + min(dc, L - dc)


@dataclass(frozen=True)
class DefectGraph:
    defects: tuple[int, ...]
    distances: np.ndarray


def defect_graph(defects, lat: ToricLattice) -> DefectGraph:
    idx = tuple(int(i) for i in np.flatnonzero(np.asarray(defects)))
    d = np.array([[torus_distance(a, b, lat.L) for b in idx] for a in idx], dtype=np.int64).reshape(len(idx), len(idx))
    return DefectGraph(idx, d)


def _pairings(items):
    """All perfect matchings, in lexicographic order of (first, partner) choices."""
    if not items:
        yield ()
        return
    first = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1 :]
        for tail in _pairings(rest):
            yield ((first, items[k]),) + tail


def _step_edge(lat: ToricLattice, plane: str, site: int, axis: int, step: int) -> int:
    """Edge crossed moving one step from ``site`` along ``axis`` (0 rows, 1 cols) in direction ``step``."""
    L = lat.L
    r, c = divmod(site, L)
    if plane == "primal":
        if axis == 1:
            return lat.edge_index(0, r, c if step > 0 else c - 1)
        return lat.edge_index(1, r if step > 0 else r - 1, c)
    # dual: plaquette (r,c) is bounded by h(r,c) above, h(r+1,c) below, v(r,c) left, v(r,c+1) right
    if axis == 1:
        return lat.edge_index(1, r, c + 1 if step > 0 else c)
    return lat.edge_index(0, r + 1 if step > 0 else r, c)


def _shortest_path(lat: ToricLattice, plane: str, a: int, b: int) -> list[int]:
    """Columns first, then rows; each axis takes the shorter way round (forward on a tie)."""
    L = lat.L
    ra, ca = divmod(a, L)
    rb, cb = divmod(b, L)
    edges = []
    r, c = ra, ca
    fwd = (cb - ca) % L
    step, count = (1, fwd) if fwd <= L - fwd else (-1, L - fwd)
    for _ in range(count):
        edges.append(_step_edge(lat, plane, r * L + c, 1, step))
        c = (c + step) % L
    fwd = (rb - ra) % L
    step, count = (1, fwd) if fwd <= L - fwd else (-1, L - fwd)
    for _ in range(count):
        edges.append(_step_edge(lat, plane, r * L + c, 0, step))
        r = (r + step) % L
    return edges


def exact_mwpm(defects, lat: ToricLattice, plane: str = "primal", return_weight: bool = False):
    """Minimum-weight correction by enumerating every pairing.

    Returns the edge bit vector (and the matching weight if requested).  Ties
    keep the first pairing in lexicographic order.
    """
    g = defect_graph(defects, lat)
    k = len(g.defects)
    if k % 2:
        raise ValueError("odd number of defects")
    if k > MAX_MATCHING_DEFECTS:
        raise ValueError(f"{k} defects exceed the enumeration limit of {MAX_MATCHING_DEFECTS}")
    pos = {d: i for i, d in enumerate(g.defects)}
    best, best_w = (), None
    for pairing in _pairings(list(g.defects)):
        w = sum(int(g.distances[pos[a], pos[b]]) for a, b in pairing)
        if best_w is None or w < best_w:
            best, best_w = pairing, w
    correction = np.zeros(lat.n_qubits, dtype=np.uint8)
    for a, b in best:
        for e in _shortest_path(lat, plane, a, b):
            correction[e] ^= 1
    if return_weight:
        return correction, int(best_w or 0)
    return correction


def _pack(x: np.ndarray, z: np.ndarray) -> int:
    bits = np.concatenate([x, z]).astype(np.uint64)
    return int((bits << np.arange(bits.size, dtype=np.uint64)).sum())


def logical_representatives(lat: ToricLattice) -> list[PauliFrame]:
    """One frame per logical class, indexed by the class bits (zh, zv, xh, xv) read as a binary number."""
    L, n = lat.L, lat.n_qubits
    gens = []
    z = np.zeros(n, np.uint8); z[[lat.edge_index(0, 0, c) for c in range(L)]] = 1
    gens.append(PauliFrame(np.zeros(n, np.uint8), z))
    z = np.zeros(n, np.uint8); z[[lat.edge_index(1, r, 0) for r in range(L)]] = 1
    gens.append(PauliFrame(np.zeros(n, np.uint8), z))
    x = np.zeros(n, np.uint8); x[[lat.edge_index(1, 0, c) for c in range(L)]] = 1
    gens.append(PauliFrame(x, np.zeros(n, np.uint8)))
    x = np.zeros(n, np.uint8); x[[lat.edge_index(0, r, 0) for r in range(L)]] = 1
    gens.append(PauliFrame(x, np.zeros(n, np.uint8)))
    reps = []
    for cls in range(16):
        f = PauliFrame.identity(n)
        for bit in range(4):
            if cls >> (3 - bit) & 1:
                f = f ^ gens[bit]
        reps.append(f)
    return reps


@lru_cache(maxsize=None)
def _stabilizer_group(L: int) -> np.ndarray:
    lat = ToricLattice(L)
    n = lat.n_qubits
    group = np.zeros(1, dtype=np.uint64)
    gens = []
    for v in range(lat.n_vertices - 1):  # the last generator is the product of the others
        x = np.zeros(n, np.uint8); x[lat.vertex_edges[v]] ^= 1
        gens.append(_pack(x, np.zeros(n, np.uint8)))
    for p in range(lat.n_plaquettes - 1):
        z = np.zeros(n, np.uint8); z[lat.plaquette_edges[p]] ^= 1
        gens.append(_pack(np.zeros(n, np.uint8), z))
    for g in gens:
        group = np.concatenate([group, group ^ np.uint64(g)])
    return group


def _reference_frame(syn: Syndrome, lat: ToricLattice) -> PauliFrame:
    z = exact_mwpm(syn.vertex_defects, lat, "primal")
    x = exact_mwpm(syn.plaquette_defects, lat, "dual")
    return PauliFrame(x, z)


def coset_probabilities(syn: Syndrome, lat: ToricLattice, p_err: float) -> np.ndarray:
    """Total depolarizing probability of each of the 16 logical cosets consistent with ``syn``."""
    if lat.L > MAX_ML_SIZE:
        raise ValueError(f"exhaustive decoding limited to L <= {MAX_ML_SIZE}")
    probs = _coset_probabilities(lat.L, syn.vertex_defects.tobytes(), syn.plaquette_defects.tobytes(), float(p_err))
    return probs.copy()


@lru_cache(maxsize=65536)
def _coset_probabilities(L: int, vertex_bytes: bytes, plaquette_bytes: bytes, p_err: float) -> np.ndarray:
    lat = ToricLattice(L)
    syn = Syndrome(np.frombuffer(vertex_bytes, np.uint8), np.frombuffer(plaquette_bytes, np.uint8))
    n = lat.n_qubits
    group = _stabilizer_group(lat.L)
    base = _reference_frame(syn, lat)
    low = np.uint64((1 << n) - 1)
    probs = np.empty(16)
    for cls, rep in enumerate(logical_representatives(lat)):
        f = base ^ rep
        frames = group ^ np.uint64(_pack(f.x_part, f.z_part))
        support = (frames & low) | (frames >> np.uint64(n))
        w = np.bitwise_count(support).astype(np.int64)
        counts = np.bincount(w, minlength=n + 1)
        k = np.arange(n + 1)
        probs[cls] = float(np.sum(counts * (p_err / 3.0) ** k * (1.0 - p_err) ** (n - k)))
    return probs


def exhaustive_ml_decode(syn: Syndrome, lat: ToricLattice, p_err: float) -> PauliFrame:
    """A frame from the most probable logical coset (lowest class index on ties)."""
    probs = coset_probabilities(syn, lat, p_err)
    best = int(np.argmax(probs))
    return _reference_frame(syn, lat) ^ logical_representatives(lat)[best]
