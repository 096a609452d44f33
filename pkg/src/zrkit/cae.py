"""
Correspondence autoencoder.

A tanh MLP is first pretrained layer by layer as a stack of autoencoders on
all training frames, then fine-tuned to map each frame of an aligned
same-word frame pair onto its partner. Features are read off the last
hidden layer.

All arithmetic is float64. Minibatch gradients are summed, not averaged,
over the examples in a batch. Inputs (and fine-tuning targets) are
standardized per dimension with statistics of the pretraining frames, which
are stored with the model.
"""

import csv
import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np

from . import corpus_io
from .corpus_io import FeatureSequence
from .errors import FormatError, ZrkitError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaeConfig:
    hidden_dims: tuple = (100,) * 8 + (39,)
    pretrain_epochs: int = 5
    pretrain_lr: float = 2.5e-4
    finetune_epochs: int = 60
    finetune_lr: float = 2.5e-5
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ZrkitError("hidden_dims must be a nonempty list of positive sizes")
        if not (self.pretrain_lr > 0 and self.finetune_lr > 0):
            raise ZrkitError("learning rates must be positive")
        if self.pretrain_epochs < 1 or self.finetune_epochs < 1:
            raise ZrkitError("epoch counts must be >= 1")
        if self.batch_size < 1:
            raise ZrkitError("batch_size must be >= 1")


@dataclass
class MlpModel:
    """Affine layers; tanh on every layer but the last, which is linear."""

    weights: list   # W[l] has shape (dims[l+1], dims[l])
    biases: list
    input_shift: np.ndarray = None
    input_scale: np.ndarray = None

    def __post_init__(self):
        d = self.weights[0].shape[1] if self.weights else 0
        if self.input_shift is None:
            self.input_shift = np.zeros(d)
        if self.input_scale is None:
            self.input_scale = np.ones(d)
        if self.input_shift.shape != (d,) or self.input_scale.shape != (d,):
            raise ZrkitError("input normalization must match the input dimension")
        if not np.all(self.input_scale > 0):
            raise ZrkitError("input scales must be positive")
        if not self.weights or len(self.weights) != len(self.biases):
            raise ZrkitError("need one bias per weight matrix")
        for n, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ZrkitError(f"layer {n + 1}: weight {w.shape} / bias {b.shape} mismatch")
            if n and w.shape[1] != self.weights[n - 1].shape[0]:
                raise ZrkitError(f"layer {n + 1} input size does not match layer {n} output")

    @property
    def layer_dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self):
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.input_shift.copy(), self.input_scale.copy())

    def normalize(self, x):
        """Map raw input-space vectors into the network's standardized space."""
        return (np.asarray(x, dtype=np.float64) - self.input_shift) / self.input_scale

    def checksum(self):
        h = hashlib.sha256()
        for w, b in zip(self.weights, self.biases):
            h.update(np.ascontiguousarray(w, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(b, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


@dataclass
class TrainLog:
    mean_losses: list = field(default_factory=list)
    checksums: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    initial_loss: float = None
    config: dict = field(default_factory=dict)

    def record(self, stage, loss, model):
        if not np.isfinite(loss):
            raise ZrkitError(f"{stage}: training diverged (loss {loss})")
        self.stages.append(stage)
        self.mean_losses.append(float(loss))
        self.checksums.append(model.checksum())

    def losses_for(self, stage):
        return [l for s, l in zip(self.stages, self.mean_losses) if s == stage]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "stage", "mean_loss", "checksum"])
            rows = zip(self.stages, self.mean_losses, self.checksums)
            for n, (stage, loss, cs) in enumerate(rows, start=1):
                writer.writerow([n, stage, repr(loss), cs])


def init_mlp(layer_dims, seed):
    """Glorot-uniform weights from a seeded generator; zero biases."""
    layer_dims = [int(d) for d in layer_dims]
    if len(layer_dims) < 2:
        raise ZrkitError("an MLP needs at least an input and an output size")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def forward(model, x):
    """Run the network on a batch (N x D) or a single vector.

    Returns ``(output, activations)`` where ``activations[0]`` is the input
    (after standardization) and ``activations[l]`` the output of layer ``l``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != model.layer_dims[0]:
        raise ZrkitError(f"input dim {h.shape[1]} != model input dim {model.layer_dims[0]}")
    h = model.normalize(h)
    acts = [h]
    last = model.n_layers - 1
    for n, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        h = z if n == last else np.tanh(z)
        acts.append(h)
    if single:
        acts = [a[0] for a in acts]
    return acts[-1], acts


def loss_and_gradients(model, x, target, n_trainable=None):
    """Summed loss ``0.5 * ||forward(x) - target||^2`` and its gradients.

    With `n_trainable`, gradients are only computed for the last
    `n_trainable` layers (the rest come back as None).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    out, acts = forward(model, x)
    if target.shape != out.shape:
        raise ZrkitError(f"target shape {target.shape} != output shape {out.shape}")
    err = out - target
    loss = 0.5 * float(np.sum(err * err))
    L = model.n_layers
    first = 0 if n_trainable is None else L - n_trainable
    grad_w = [None] * L
    grad_b = [None] * L
    delta = err
    for n in range(L - 1, first - 1, -1):
        grad_w[n] = delta.T @ acts[n]
        grad_b[n] = delta.sum(axis=0)
        if n > first:
            delta = (delta @ model.weights[n]) * (1.0 - acts[n] ** 2)
    return loss, (grad_w, grad_b)


def sgd_step(model, grads, lr):
    grad_w, grad_b = grads
    for n, (gw, gb) in enumerate(zip(grad_w, grad_b)):
        if gw is not None:
            model.weights[n] -= lr * gw
            model.biases[n] -= lr * gb


def _run_epochs(model, inputs, targets, epochs, lr, batch_size, rng, stage, train_log,
                n_trainable=None):
    n = len(inputs)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            loss, grads = loss_and_gradients(model, inputs[idx], targets[idx], n_trainable)
            sgd_step(model, grads, lr)
            total += loss
        train_log.record(stage, total / n, model)
        log.info("%s epoch %d: mean loss %.6f", stage, epoch + 1, total / n)


def _seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def pretrain_layerwise(frames, config=CaeConfig()):
    """Greedy layer-wise autoencoder pretraining.

    Layer ``l`` is trained together with a temporary linear decoder to
    reconstruct its own input (the frozen output of layers ``< l``). The
    returned model is the encoder stack plus a fresh linear output layer of
    the input size.

    Returns ``(model, train_log)``.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ZrkitError("pretraining needs a nonempty N x D frame matrix")
    shift, scale = standardization(x)
    x = (x - shift) / scale
    dims = [x.shape[1]] + list(config.hidden_dims)
    seeds = _seeds(config.seed, len(dims) + 1)
    rng = np.random.default_rng(seeds[0])
    train_log = TrainLog(config={"pretrain_epochs": config.pretrain_epochs,
                                 "pretrain_lr": config.pretrain_lr,
                                 "batch_size": config.batch_size, "seed": config.seed})
    encoder_w, encoder_b = [], []
    h = x
    for layer, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:]), start=1):
        ae = init_mlp([d_in, d_out, d_in], seeds[layer])
        _run_epochs(ae, h, h, config.pretrain_epochs, config.pretrain_lr, config.batch_size,
                    rng, f"pretrain-{layer}", train_log)
        encoder_w.append(ae.weights[0])
        encoder_b.append(ae.biases[0])
        h = np.tanh(h @ ae.weights[0].T + ae.biases[0])
    head = init_mlp([dims[-1], dims[0]], seeds[-1])
    model = MlpModel(encoder_w + head.weights, encoder_b + head.biases, shift, scale)
    return model, train_log


def standardization(frames, min_scale=1e-8):
    """Per-dimension mean and standard deviation (floored) of `frames`."""
    frames = np.asarray(frames, dtype=np.float64)
    return frames.mean(axis=0), np.maximum(frames.std(axis=0), min_scale)


def mean_pair_loss(model, inputs, targets, batch_size=4096):
    total = 0.0
    for lo in range(0, len(inputs), batch_size):
        out, _ = forward(model, inputs[lo:lo + batch_size])
        total += 0.5 * float(np.sum((out - targets[lo:lo + batch_size]) ** 2))
    return total / len(inputs)


def finetune_correspondence(model, frame_pairs, config=CaeConfig()):
    """Train input -> aligned partner frame with minibatch SGD.

    Targets are standardized with the model's input statistics, so the
    output layer lives in the same space as the normalized input.

    Returns ``(model, train_log)``; the input model is not modified.
    """
    inputs = np.asarray(frame_pairs.inputs, dtype=np.float64)
    targets = np.asarray(frame_pairs.targets, dtype=np.float64)
    if len(inputs) == 0:
        raise ZrkitError("no frame pairs to train on")
    if inputs.shape[1] != model.layer_dims[0] or targets.shape[1] != model.layer_dims[-1]:
        raise ZrkitError(f"frame pairs of dim {inputs.shape[1]} do not fit model "
                         f"{model.layer_dims}")
    if model.layer_dims[0] != model.layer_dims[-1]:
        raise ZrkitError("correspondence training needs equal input and output sizes")
    targets = model.normalize(targets)
    model = model.copy()
    rng = np.random.default_rng(_seeds(config.seed, 2)[1])
    train_log = TrainLog(config={"finetune_epochs": config.finetune_epochs,
                                 "finetune_lr": config.finetune_lr,
                                 "batch_size": config.batch_size, "seed": config.seed})
    train_log.initial_loss = mean_pair_loss(model, inputs, targets)
    _run_epochs(model, inputs, targets, config.finetune_epochs, config.finetune_lr,
                config.batch_size, rng, "finetune", train_log)
    return model, train_log


def encode_frames(model, frames, layer=None):
    """Activations of hidden layer `layer` (1-based; default the last hidden)."""
    if layer is None:
        layer = model.n_layers - 1
    if not 1 <= layer <= model.n_layers:
        raise ZrkitError(f"layer must lie in 1..{model.n_layers}")
    _, acts = forward(model, np.atleast_2d(frames))
    return acts[layer]


def encode(model, sequence, layer=None):
    frames = np.asarray(sequence.frames, dtype=np.float64)
    return FeatureSequence(sequence.utterance_id, encode_frames(model, frames, layer),
                           sequence.frame_shift, sequence.frame_length)


def encode_archive(model, archive, layer=None):
    return [encode(model, s, layer) for s in archive]


# ---------------------------------------------------------------------------
# serialization

def write_model(model, path):
    records = [("__layer_dims__", np.array([model.layer_dims], dtype=np.float64), 0.0, 0.0),
               ("__input_shift__", model.input_shift[None, :], 0.0, 0.0),
               ("__input_scale__", model.input_scale[None, :], 0.0, 0.0)]
    for n, (w, b) in enumerate(zip(model.weights, model.biases), start=1):
        records.append((f"W{n}", w, 0.0, 0.0))
        records.append((f"b{n}", b[None, :], 0.0, 0.0))
    corpus_io.write_records(records, path)


def read_model(path):
    records = corpus_io.read_records(path)
    if not records or records[0][0] != "__layer_dims__":
        raise FormatError("model container must start with a __layer_dims__ record", path)
    dims = [int(d) for d in records[0][1].ravel()]
    mats = {r[0]: r[1].astype(np.float64) for r in records[1:]}
    weights, biases = [], []
    shift = mats.get("__input_shift__")
    scale = mats.get("__input_scale__")
    for n in range(1, len(dims)):
        try:
            weights.append(mats[f"W{n}"])
            biases.append(mats[f"b{n}"].ravel())
        except KeyError as exc:
            raise FormatError(f"model container lacks record {exc}", path) from None
    model = MlpModel(weights, biases,
                     None if shift is None else shift.ravel(),
                     None if scale is None else scale.ravel())
    if model.layer_dims != dims:
        raise FormatError(f"layer dims {model.layer_dims} contradict header {dims}", path)
    return model
