"""Two-stage decoding: local network corrections, then union-find on what is left.

The network looks at every qubit touching at least one defect, always reading
the syndrome as measured (all decisions are simultaneous, single pass), and
applies its argmax Pauli wherever that is not I.  The residual syndrome is
then handed to the union-find decoder.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .lattice import PauliFrame, Syndrome, ToricLattice, logical_planes, syndrome_planes
from .neural import MlpModel, extract_masks, forward_batch
from .noise import NoiseSpec, sample_depolarizing_planes
from .uf import uf_decode, uf_decode_planes

__all__ = [
    "DecodeOutcome",
    "EffectiveRatePoint",
    "candidate_qubits",
    "candidate_planes",
    "ml_preprocess",
    "ml_preprocess_planes",
    "decode_two_stage",
    "decode_planes",
    "measure_effective_rate",
    "DECODERS",
]

DECODERS = ("uf", "ml+uf")

# windows per forward pass; bounds activation memory for large batches
FORWARD_CHUNK = 1 << 15


@dataclass
class DecodeOutcome:
    correction: PauliFrame
    succeeded: bool | None
    ml_corrections_applied: int
    defects_before: int
    defects_after: int
    ml_us: float
    uf_us: float
    total_us: float


@dataclass(frozen=True)
class EffectiveRatePoint:
    p_err: float
    p_eff: float
    trials: int

    @property
    def ratio(self) -> float | None:
        return self.p_err / self.p_eff if self.p_eff > 0 else None


def candidate_planes(vertex_defects, plaquette_defects, lat: ToricLattice) -> np.ndarray:
    """Boolean ``(..., 2L^2)``: edge touches a defective vertex or plaquette."""
    vd = np.asarray(vertex_defects, dtype=np.uint8)
    pd = np.asarray(plaquette_defects, dtype=np.uint8)
    ev, ep = lat.edge_vertices, lat.edge_plaquettes
    return (vd[..., ev[:, 0]] | vd[..., ev[:, 1]] | pd[..., ep[:, 0]] | pd[..., ep[:, 1]]).astype(bool)


def candidate_qubits(syn: Syndrome, lat: ToricLattice) -> np.ndarray:
    return np.flatnonzero(candidate_planes(syn.vertex_defects, syn.plaquette_defects, lat))


def _classes_to_planes(classes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = ((classes == 1) | (classes == 2)).astype(np.uint8)
    z = ((classes == 2) | (classes == 3)).astype(np.uint8)
    return x, z


def ml_preprocess_planes(vertex_defects, plaquette_defects, model: MlpModel, lat: ToricLattice):
    """Batched preprocessing over ``(B, L^2)`` defect arrays.

    Returns ``(x, z, residual_vertex, residual_plaquette, n_applied)`` where
    ``x``/``z`` are ``(B, 2L^2)`` partial corrections and ``n_applied`` counts
    non-identity predictions per instance.
    """
    vd = np.atleast_2d(np.asarray(vertex_defects, dtype=np.uint8))
    pd = np.atleast_2d(np.asarray(plaquette_defects, dtype=np.uint8))
    l_input = model.config.l_input
    if l_input > lat.L:
        raise ValueError(f"model window {l_input} exceeds lattice size L={lat.L}")
    B, n = vd.shape[0], lat.n_qubits
    x = np.zeros((B, n), dtype=np.uint8)
    z = np.zeros((B, n), dtype=np.uint8)
    inst, q = np.nonzero(candidate_planes(vd, pd, lat))
    applied = np.zeros(B, dtype=np.int64)
    if inst.size:
        classes = np.empty(inst.size, dtype=np.intp)
        for lo in range(0, inst.size, FORWARD_CHUNK):
            hi = lo + FORWARD_CHUNK
            probs = forward_batch(model, extract_masks(vd, pd, lat, inst[lo:hi], q[lo:hi], l_input))
            # np.argmax returns the first maximum: ties resolve in the order I, X, Y, Z
            classes[lo:hi] = probs.argmax(axis=1)
        hit = classes != 0
        xs, zs = _classes_to_planes(classes[hit])
        x[inst[hit], q[hit]] = xs
        z[inst[hit], q[hit]] = zs
        applied = np.bincount(inst[hit], minlength=B)
    dv, dp = syndrome_planes(x, z, lat)
    return x, z, vd ^ dv, pd ^ dp, applied


def ml_preprocess(syn: Syndrome, model: MlpModel, lat: ToricLattice) -> tuple[PauliFrame, Syndrome]:
    x, z, rv, rp, _ = ml_preprocess_planes(syn.vertex_defects[None], syn.plaquette_defects[None], model, lat)
    return PauliFrame(x[0], z[0]), Syndrome(rv[0], rp[0])


def decode_two_stage(syn: Syndrome, model: MlpModel, lat: ToricLattice, error: PauliFrame | None = None) -> DecodeOutcome:
    """Decode one syndrome; ``succeeded`` is filled in only when the true ``error`` is given."""
    t0 = time.perf_counter_ns()
    partial, residual = ml_preprocess(syn, model, lat)
    t1 = time.perf_counter_ns()
    correction = partial ^ uf_decode(residual, lat)
    t2 = time.perf_counter_ns()
    succeeded = None
    if error is not None:
        r = error ^ correction
        succeeded = not logical_planes(r.x_part, r.z_part, lat).any()
    return DecodeOutcome(
        correction=correction,
        succeeded=succeeded,
        ml_corrections_applied=partial.weight(),
        defects_before=syn.defect_count(),
        defects_after=residual.defect_count(),
        ml_us=(t1 - t0) / 1e3,
        uf_us=(t2 - t1) / 1e3,
        total_us=(t2 - t0) / 1e3,
    )


def decode_planes(decoder: str, vertex_defects, plaquette_defects, lat: ToricLattice, model: MlpModel | None = None):
    """Batch decode with ``'uf'`` or ``'ml+uf'``; returns the ``(x, z)`` correction planes."""
    if decoder == "uf":
        return uf_decode_planes(vertex_defects, plaquette_defects, lat)
    if decoder == "ml+uf":
        if model is None:
            raise ValueError("the ml+uf decoder needs a model")
        px, pz, rv, rp, _ = ml_preprocess_planes(vertex_defects, plaquette_defects, model, lat)
        ux, uz = uf_decode_planes(rv, rp, lat)
        return px ^ ux, pz ^ uz
    raise ValueError(f"unknown decoder {decoder!r}; expected one of {DECODERS}")


def measure_effective_rate(p_err: float, model: MlpModel, lat: ToricLattice, trials: int,
                           seed: int = 0, chunk: int = 256) -> EffectiveRatePoint:
    """Mean residual error density after the network stage alone."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = NoiseSpec(p_err, seed)
    residual_weight = 0
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        x, z = sample_depolarizing_planes(spec, lat, start, count)
        vd, pd = syndrome_planes(x, z, lat)
        px, pz, *_ = ml_preprocess_planes(vd, pd, model, lat)
        residual_weight += int(np.count_nonzero((x ^ px) | (z ^ pz)))
    return EffectiveRatePoint(p_err, residual_weight / (trials * lat.n_qubits), trials)
