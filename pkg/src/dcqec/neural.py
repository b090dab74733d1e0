"""Dense feed-forward classifier for local syndrome windows.

The network maps the signed syndrome window around one examination qubit to
a distribution over the qubit's Pauli error (I, X, Y, Z).  Everything here is
plain numpy: forward pass, backpropagation, Adam, on-the-fly batch
generation on a small training lattice, and a versioned ``.npz`` model file.

Window geometry
---------------
With ``k = l_input // 2`` the window entry ``(i, j)`` of a horizontal edge
h(r, c) reads vertex and plaquette ``(r + i - k, c + j - k)``.  A vertical
edge v(r, c) uses the transposed window, entry ``(i, j)`` reading
``(r + j - k, c + i - k)``.  Transposition is a symmetry of the toric lattice
that maps vertical edges to horizontal ones, so in both cases the two
endpoint vertices sit at ``(k, k)`` and ``(k, k+1)`` and the two adjacent
plaquettes at ``(k-1, k)`` and ``(k, k)``.  Entries are +1 for a satisfied
stabilizer and -1 for a defect; 0 (unmeasured) never occurs on the torus.
The convention tag is stored in every model file.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import threading
import zipfile
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .lattice import Syndrome, ToricLattice, syndrome_planes
from .noise import _codes_from_uniforms, stream_rng

__all__ = [
    "MASK_CONVENTION",
    "N_CLASSES",
    "MlpConfig",
    "MlpModel",
    "TrainSpec",
    "MaskInput",
    "TrainingBatch",
    "TrainResult",
    "Adam",
    "ModelFileError",
    "TrainingDivergedError",
    "count_parameters",
    "mask_index_table",
    "extract_mask",
    "extract_masks",
    "forward",
    "forward_batch",
    "loss_and_gradients",
    "generate_training_batch",
    "train",
    "save_model",
    "load_model",
]

log = logging.getLogger(__name__)

MASK_CONVENTION = "hv-transpose-v1"
N_CLASSES = 4
MODEL_FORMAT = "dcqec-mlp"
MODEL_VERSION = 1


class ModelFileError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpConfig:
    l_input: int
    hidden_layers: int
    hidden_nodes: int

    def __post_init__(self):
        if self.l_input < 1 or self.l_input % 2 == 0:
            raise ValueError(f"l_input must be a positive odd integer, got {self.l_input}")
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.hidden_nodes < 1:
            raise ValueError("hidden_nodes must be >= 1")

    @property
    def input_dim(self) -> int:
        return 2 * self.l_input**2

    @property
    def output_dim(self) -> int:
        return N_CLASSES

    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.hidden_nodes] * self.hidden_layers + [N_CLASSES]


def count_parameters(config: MlpConfig) -> int:
    h = config.hidden_nodes
    return (
        config.input_dim * h
        + h
        + (config.hidden_layers - 1) * (h * h + h)
        + h * N_CLASSES
        + N_CLASSES
    )


@dataclass
class MlpModel:
    """Weights ``W[i]`` have shape ``(fan_in, fan_out)``; ReLU between layers, softmax on output."""

    config: MlpConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = self.config.layer_sizes()
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError(f"expected {len(sizes) - 1} layers")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(
                    f"layer {i}: expected W{(sizes[i], sizes[i + 1])}, b({sizes[i + 1]},), "
                    f"got W{W.shape}, b{b.shape}"
                )

    @classmethod
    def initialize(cls, config: MlpConfig, seed: int = 0) -> "MlpModel":
        """Seeded uniform init scaled by fan-in.

        ReLU layers use the He limit sqrt(6 / fan_in).  The output layer is
        1% of the LeCun limit so the initial prediction is close to uniform
        (loss near ln 4).
        """
        rng = np.random.default_rng(seed)
        sizes = config.layer_sizes()
        weights, biases = [], []
        for i in range(len(sizes) - 1):
            fan_in = sizes[i]
            if i < len(sizes) - 2:
                limit = math.sqrt(6.0 / fan_in)
            else:
                limit = 0.01 * math.sqrt(3.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, sizes[i + 1])))
            biases.append(np.zeros(sizes[i + 1]))
        return cls(config, weights, biases, {"init_seed": int(seed)})

    @classmethod
    def zeros(cls, config: MlpConfig) -> "MlpModel":
        sizes = config.layer_sizes()
        return cls(
            config,
            [np.zeros((sizes[i], sizes[i + 1])) for i in range(len(sizes) - 1)],
            [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)],
        )

    @classmethod
    def constant(cls, config: MlpConfig, pauli_class: int = 0) -> "MlpModel":
        """A model that predicts one fixed class for every input (class 0 = I)."""
        model = cls.zeros(config)
        model.biases[-1][pauli_class] = 1.0
        model.metadata["stub"] = f"constant-{pauli_class}"
        return model

    def parameters(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


@dataclass(frozen=True)
class TrainSpec:
    batch_size: int = 512
    epochs: int = 1_000_000
    learning_rate: float = 0.001
    optimizer: str = "adam"
    loss: str = "categorical_crossentropy"
    l_train: int = 7
    p_train: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.optimizer != "adam":
            raise ValueError("only the Adam optimizer is supported")
        if self.loss != "categorical_crossentropy":
            raise ValueError("only categorical cross-entropy is supported")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.p_train <= 1.0:
            raise ValueError("p_train must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class MaskInput:
    values: np.ndarray
    l_input: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int8)
        if v.shape != (2 * self.l_input**2,):
            raise ValueError(f"mask must have {2 * self.l_input**2} entries, got shape {v.shape}")
        if not np.isin(v, (-1, 0, 1)).all():
            raise ValueError("mask entries must be -1, 0 or +1")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def vertex_channel(self) -> np.ndarray:
        return self.values[: self.l_input**2].reshape(self.l_input, self.l_input)

    @property
    def plaquette_channel(self) -> np.ndarray:
        return self.values[self.l_input**2 :].reshape(self.l_input, self.l_input)

    def __eq__(self, other):
        if not isinstance(other, MaskInput):
            return NotImplemented
        return self.l_input == other.l_input and np.array_equal(self.values, other.values)


@lru_cache(maxsize=16)
def mask_index_table(L: int, l_input: int) -> np.ndarray:
    """``(2L^2, 2 l_input^2)`` gather indices into ``concat(vertex_defects, plaquette_defects)``."""
    if l_input > L:
        raise ValueError(f"l_input={l_input} exceeds lattice size L={L}")
    L2 = L * L
    k = l_input // 2
    q = np.arange(2 * L2)
    orient, rem = np.divmod(q, L2)
    r, c = np.divmod(rem, L)
    i, j = np.divmod(np.arange(l_input * l_input), l_input)
    di = i - k
    dj = j - k
    horiz = (orient == 0)[:, None]
    rows = r[:, None] + np.where(horiz, di[None, :], dj[None, :])
    cols = c[:, None] + np.where(horiz, dj[None, :], di[None, :])
    site = (rows % L) * L + (cols % L)
    table = np.concatenate([site, site + L2], axis=1).astype(np.intp)
    table.setflags(write=False)
    return table


def extract_masks(vertex_defects, plaquette_defects, lat: ToricLattice, instance, qubits, l_input: int) -> np.ndarray:
    """Windows for many (instance, qubit) pairs at once, shape ``(N, 2 l_input^2)`` int8.

    ``vertex_defects``/``plaquette_defects`` are ``(B, L^2)``; ``instance`` and
    ``qubits`` are equal-length index arrays.
    """
    table = mask_index_table(lat.L, l_input)
    synd = np.concatenate([np.asarray(vertex_defects, dtype=np.int8), np.asarray(plaquette_defects, dtype=np.int8)], axis=-1)
    bits = synd[np.asarray(instance)[:, None], table[np.asarray(qubits)]]
    return (1 - 2 * bits).astype(np.int8)


def extract_mask(syn: Syndrome, lat: ToricLattice, qubit: int, l_input: int) -> MaskInput:
    if l_input < 1 or l_input % 2 == 0:
        raise ValueError("l_input must be a positive odd integer")
    if l_input > lat.L:
        raise ValueError(f"l_input={l_input} exceeds lattice size L={lat.L}")
    if not 0 <= qubit < lat.n_qubits:
        raise IndexError(f"qubit {qubit} out of range")
    vals = extract_masks(syn.vertex_defects[None], syn.plaquette_defects[None], lat, [0], [qubit], l_input)[0]
    return MaskInput(vals, l_input)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _activations(model: MlpModel, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    a = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts


def forward_batch(model: MlpModel, inputs) -> np.ndarray:
    """Class probabilities ``(N, 4)`` for ``(N, input_dim)`` windows (or a list of MaskInput)."""
    if isinstance(inputs, (list, tuple)):
        if not inputs:
            return np.zeros((0, N_CLASSES))
        inputs = np.stack([m.values if isinstance(m, MaskInput) else np.asarray(m) for m in inputs])
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ValueError(f"expected inputs of shape (N, {model.config.input_dim}), got {X.shape}")
    if X.shape[0] == 0:
        return np.zeros((0, N_CLASSES))
    return _softmax(_activations(model, X)[-1])


def forward(model: MlpModel, mask) -> np.ndarray:
    values = mask.values if isinstance(mask, MaskInput) else np.asarray(mask)
    if values.shape != (model.config.input_dim,):
        raise ValueError(f"expected a window of {model.config.input_dim} entries, got shape {values.shape}")
    probs = forward_batch(model, values[None, :])[0]
    assert abs(probs.sum() - 1.0) < 1e-6
    return probs


def loss_and_gradients(model: MlpModel, X: np.ndarray, labels: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean categorical cross-entropy and its gradient, ordered like ``model.parameters()``."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    n = X.shape[0]
    acts = _activations(model, X)
    probs = _softmax(acts[-1])
    loss = -float(np.mean(np.log(np.clip(probs[np.arange(n), labels], 1e-300, None))))
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads: list[np.ndarray] = []
    for i in range(len(model.weights) - 1, -1, -1):
        a_prev = acts[i]
        gW = a_prev.T @ delta
        gb = delta.sum(axis=0)
        grads.append(gb)
        grads.append(gW)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    grads.reverse()
    return loss, grads


class Adam:
    def __init__(self, params: list[np.ndarray], learning_rate: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * math.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        eps_t = self.eps * math.sqrt(1 - b2**self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            p -= lr_t * m / (np.sqrt(v) + eps_t)


class TrainingBatch(NamedTuple):
    inputs: np.ndarray  # (batch_size, 2 l_input^2) int8
    labels: np.ndarray  # (batch_size,) class index I=0, X=1, Y=2, Z=3


def generate_training_batch(spec: TrainSpec, lat: ToricLattice, batch_index: int,
                            l_input: int = 5, chunk: int = 16) -> TrainingBatch:
    """Fresh (window, true Pauli) pairs for defect-adjacent qubits.

    Instances are sampled at ``spec.p_train`` from the stream
    ``(spec.seed, batch_index)`` until ``spec.batch_size`` pairs are collected,
    taking qubits in (instance, ascending edge) order.
    """
    if lat.L != spec.l_train:
        raise ValueError(f"training lattice must have L={spec.l_train}, got {lat.L}")
    if spec.p_train <= 0.0:
        raise ValueError("p_train = 0 produces no defects; cannot fill a training batch")
    rng = stream_rng(spec.seed, batch_index)
    n = lat.n_qubits
    ev, ep = lat.edge_vertices, lat.edge_plaquettes
    inputs, labels, have = [], [], 0
    for _ in range(10_000):
        x, z = _codes_from_uniforms(rng.random((chunk, n)), spec.p_train)
        vd, pd = syndrome_planes(x, z, lat)
        adjacent = vd[:, ev[:, 0]] | vd[:, ev[:, 1]] | pd[:, ep[:, 0]] | pd[:, ep[:, 1]]
        inst, q = np.nonzero(adjacent)
        if inst.size:
            take = min(inst.size, spec.batch_size - have)
            inst, q = inst[:take], q[:take]
            inputs.append(extract_masks(vd, pd, lat, inst, q, l_input))
            xb, zb = x[inst, q], z[inst, q]
            labels.append(np.where(xb & zb, 2, np.where(xb, 1, np.where(zb, 3, 0))).astype(np.int64))
            have += take
        if have >= spec.batch_size:
            return TrainingBatch(np.concatenate(inputs), np.concatenate(labels))
    raise RuntimeError("could not fill a training batch; p_train too small")


class TrainResult(NamedTuple):
    model: MlpModel
    losses: np.ndarray


def _batches(spec, lat, l_input, start, stop, prefetch):
    if prefetch < 1:
        for b in range(start, stop):
            yield generate_training_batch(spec, lat, b, l_input)
        return
    q: queue.Queue = queue.Queue(maxsize=prefetch)
    stop_flag = threading.Event()

    def produce():
        try:
            for b in range(start, stop):
                if stop_flag.is_set():
                    return
                q.put(generate_training_batch(spec, lat, b, l_input))
        except BaseException as exc:  # surface producer failures in the consumer
            q.put(exc)

    t = threading.Thread(target=produce, daemon=True)
    t.start()
    try:
        for _ in range(start, stop):
            item = q.get()
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop_flag.set()
        while t.is_alive():
            try:
                q.get_nowait()
            except queue.Empty:
                t.join(timeout=0.01)


def train(spec: TrainSpec, config: MlpConfig, model: MlpModel | None = None,
          prefetch: int = 2, progress: Callable[[int, float], None] | None = None,
          log_every: int = 10_000) -> TrainResult:
    """Run ``spec.epochs`` Adam steps, one freshly generated batch each.

    Returns the model and the per-iteration training loss.  Raises
    :class:`TrainingDivergedError` on a non-finite loss.
    """
    if config.l_input > spec.l_train:
        raise ValueError("l_input cannot exceed the training lattice size")
    lat = ToricLattice(spec.l_train)
    if model is None:
        model = MlpModel.initialize(config, seed=spec.seed)
    elif model.config != config:
        raise ValueError("model config does not match")
    opt = Adam(model.parameters(), spec.learning_rate)
    losses = np.empty(spec.epochs)
    for it, batch in enumerate(_batches(spec, lat, config.l_input, 0, spec.epochs, prefetch)):
        loss, grads = loss_and_gradients(model, batch.inputs, batch.labels)
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss {loss} at iteration {it}")
        opt.step(grads)
        losses[it] = loss
        if progress is not None:
            progress(it, loss)
        if log_every and (it + 1) % log_every == 0:
            log.info("iteration %d: mean loss over last %d = %.4f", it + 1, log_every, losses[it + 1 - log_every : it + 1].mean())
    model.metadata.update(
        {"train_spec": asdict(spec), "iterations": int(spec.epochs),
         "final_loss": float(losses[-100:].mean()) if spec.epochs else None}
    )
    return TrainResult(model, losses)


def save_model(model: MlpModel, path) -> Path:
    """Write ``model`` as an ``.npz`` archive.

    Layout: a ``header`` entry holding UTF-8 JSON (format, version, config,
    mask convention, metadata) and float64 arrays ``W0, b0, W1, b1, ...``
    stored row-major in native binary, so every value round-trips exactly.
    """
    path = Path(path)
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(model.config),
        "mask_convention": MASK_CONVENTION,
        "layers": len(model.weights),
        "metadata": model.metadata,
    }
    arrays = {"header": np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)}
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i}"] = np.ascontiguousarray(W, dtype=np.float64)
        arrays[f"b{i}"] = np.ascontiguousarray(b, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_model(path) -> MlpModel:
    try:
        with np.load(Path(path), allow_pickle=False) as data:
            contents = {k: data[k] for k in data.files}
    except (OSError, ValueError, zipfile.BadZipFile, EOFError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if "header" not in contents:
        raise ModelFileError("model file has no header")
    try:
        header = json.loads(contents["header"].tobytes().decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"corrupt model header: {exc}") from exc
    if header.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"not a {MODEL_FORMAT} file")
    if header.get("version") != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {header.get('version')}, expected {MODEL_VERSION}")
    if header.get("mask_convention") != MASK_CONVENTION:
        raise ModelFileError(f"model uses mask convention {header.get('mask_convention')!r}, expected {MASK_CONVENTION!r}")
    try:
        config = MlpConfig(**header["config"])
        n_layers = int(header["layers"])
        weights = [contents[f"W{i}"] for i in range(n_layers)]
        biases = [contents[f"b{i}"] for i in range(n_layers)]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"incomplete model file: {exc}") from exc
    for arr in weights + biases:
        if arr.dtype != np.float64:
            raise ModelFileError(f"parameters must be float64, found {arr.dtype}")
        if not np.isfinite(arr).all():
            raise ModelFileError("model contains non-finite parameters")
    try:
        return MlpModel(config, weights, biases, header.get("metadata", {}))
    except ValueError as exc:
        raise ModelFileError(f"inconsistent layer dimensions: {exc}") from exc
