"""Dense feed-forward networks with one or two input branches.

A network is a list of affine layers in a fixed order: the hidden layers
of branch 0, then those of branch 1 (if any), then the fusion layers
applied after concatenating the branch outputs, then a single sigmoid
output unit. Every hidden layer is affine -> ReLU -> dropout.

Dropout masks are drawn in layer order, one ``batch x width`` block of
uniforms per hidden layer (row-major); a unit survives when its uniform
is ``>= dropout_rate`` and survivors are scaled by ``1 / (1 - rate)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DimensionError, TrainingError
from .rng import Xoshiro256, derive_seed

OUTPUT_CLIP = 1e-12


@dataclass(frozen=True)
class ArchSpec:
    input_dims: tuple[int, ...]
    branch_hidden: tuple[tuple[int, ...], ...]
    fusion_hidden: tuple[int, ...] = ()
    dropout_rate: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        object.__setattr__(self, "branch_hidden", tuple(tuple(int(w) for w in b) for b in self.branch_hidden))
        object.__setattr__(self, "fusion_hidden", tuple(int(w) for w in self.fusion_hidden))
        nb = len(self.input_dims)
        if nb not in (1, 2) or len(self.branch_hidden) != nb:
            raise ConfigError("an architecture has one or two branches, each with its own hidden list")
        if nb == 1 and self.fusion_hidden:
            raise ConfigError("a single-branch model has no fusion layers")
        if nb == 2 and not self.fusion_hidden:
            raise ConfigError("a two-branch model needs at least one fusion layer")
        widths = list(self.input_dims) + [w for b in self.branch_hidden for w in b] + list(self.fusion_hidden)
        if any(w < 1 for w in widths):
            raise ConfigError("every width must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate {self.dropout_rate} outside [0, 1)")

    @property
    def n_branches(self) -> int:
        return len(self.input_dims)

    def branch_out(self, b: int) -> int:
        hid = self.branch_hidden[b]
        return hid[-1] if hid else self.input_dims[b]

    def layer_shapes(self) -> list[tuple[int, int]]:
        """``(out, in)`` for every layer in canonical order."""
        shapes = []
        for d, hid in zip(self.input_dims, self.branch_hidden):
            prev = d
            for w in hid:
                shapes.append((w, prev))
                prev = w
        prev = sum(self.branch_out(b) for b in range(self.n_branches))
        for w in self.fusion_hidden:
            shapes.append((w, prev))
            prev = w
        shapes.append((1, prev))
        return shapes

    def to_dict(self) -> dict:
        return {
            "input_dims": list(self.input_dims),
            "branch_hidden": [list(b) for b in self.branch_hidden],
            "fusion_hidden": list(self.fusion_hidden),
            "dropout_rate": self.dropout_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(tuple(d["input_dims"]), tuple(tuple(b) for b in d["branch_hidden"]),
                   tuple(d["fusion_hidden"]), float(d["dropout_rate"]))


@dataclass
class ModelParams:
    """Weights (out x in) and biases per layer, in ``arch.layer_shapes()`` order.

    Gradients use the same container.
    """

    arch: ArchSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        shapes = self.arch.layer_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise DimensionError(f"expected {len(shapes)} layers")
        for (o, i), w, b in zip(shapes, self.weights, self.biases):
            if w.shape != (o, i) or b.shape != (o,):
                raise DimensionError(f"layer shape {w.shape}/{b.shape} does not match ({o}, {i})")

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_dict(self) -> dict:
        return {
            "arch": self.arch.to_dict(),
            "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        arch = ArchSpec.from_dict(d["arch"])
        ws = [np.array(layer["weight"], dtype=float).reshape(-1, s[1]) for layer, s in zip(d["layers"], arch.layer_shapes())]
        bs = [np.array(layer["bias"], dtype=float) for layer in d["layers"]]
        return cls(arch, ws, bs)

    def save(self, path) -> None:
        from .serialize import dumps

        Path(path).write_text(dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelParams":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    weight_decay: float = 5e-6
    epochs: int = 20
    batch_size: int = 16
    dropout_rate: float = 0.2
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    prob_clip_eps: float = 1e-7

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0, 1)")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        tensors = params.weights + params.biases
        return cls([np.zeros_like(x) for x in tensors], [np.zeros_like(x) for x in tensors], 0)


@dataclass
class ForwardCache:
    arch: ArchSpec
    layer_inputs: list[np.ndarray] = field(default_factory=list)
    pre_acts: list[np.ndarray] = field(default_factory=list)
    masks: list[Optional[np.ndarray]] = field(default_factory=list)
    prob: Optional[np.ndarray] = None


def init_params(arch: ArchSpec, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    rng = Xoshiro256(seed)
    ws, bs = [], []
    for o, i in arch.layer_shapes():
        bound = np.sqrt(6.0 / (i + o))
        ws.append(rng.uniform(-bound, bound, (o, i)))
        bs.append(np.zeros(o))
    return ModelParams(arch, ws, bs)


def _as_batches(arch: ArchSpec, inputs) -> list[np.ndarray]:
    if isinstance(inputs, np.ndarray):
        inputs = [inputs]
    if len(inputs) != arch.n_branches:
        raise DimensionError(f"model has {arch.n_branches} branches, got {len(inputs)} inputs")
    out = []
    for d, x in zip(arch.input_dims, inputs):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != d:
            raise DimensionError(f"input of shape {x.shape} does not match width {d}")
        out.append(x)
    if len({x.shape[0] for x in out}) != 1:
        raise DimensionError("branch inputs have different row counts")
    return out


def forward(params: ModelParams, inputs, train: bool = False, rng: Optional[Xoshiro256] = None):
    """Return ``(probs, cache)``; probs has one entry per input row."""
    arch = params.arch
    xs = _as_batches(arch, inputs)
    rate = arch.dropout_rate
    use_dropout = train and rate > 0
    if use_dropout and rng is None:
        raise ValueError("train-mode dropout needs an rng")
    cache = ForwardCache(arch)
    k = 0

    def hidden(h):
        nonlocal k
        w, b = params.weights[k], params.biases[k]
        z = h @ w.T + b
        a = np.maximum(z, 0.0)
        mask = None
        if use_dropout:
            mask = (rng.random(z.shape) >= rate) / (1.0 - rate)
            a = a * mask
        cache.layer_inputs.append(h)
        cache.pre_acts.append(z)
        cache.masks.append(mask)
        k += 1
        return a

    ends = []
    for x, hid in zip(xs, arch.branch_hidden):
        h = x
        for _ in hid:
            h = hidden(h)
        ends.append(h)
    h = ends[0] if len(ends) == 1 else np.concatenate(ends, axis=1)
    for _ in arch.fusion_hidden:
        h = hidden(h)
    z = h @ params.weights[k].T + params.biases[k]
    cache.layer_inputs.append(h)
    cache.pre_acts.append(z)
    cache.masks.append(None)
    cache.prob = expit(z[:, 0])
    return cache.prob, cache


def bce_loss(prob, label, eps: float = 1e-7):
    p = np.clip(prob, eps, 1.0 - eps)
    y = np.asarray(label, dtype=float)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(loss) if np.ndim(loss) == 0 else loss


def backward(params: ModelParams, cache: ForwardCache, labels) -> ModelParams:
    """Gradients of the batch-mean BCE with respect to every weight and bias."""
    arch = params.arch
    if cache.arch != arch or len(cache.pre_acts) != len(params.weights):
        raise DimensionError("cache was produced by a different architecture")
    y = np.atleast_1d(np.asarray(labels, dtype=float))
    p = cache.prob
    if y.shape != p.shape:
        raise DimensionError(f"{y.shape[0]} labels for {p.shape[0]} predictions")
    nl = len(params.weights)
    gw: list = [None] * nl
    gb: list = [None] * nl

    dz = ((p - y) / p.shape[0])[:, None]
    k = nl - 1
    gw[k] = dz.T @ cache.layer_inputs[k]
    gb[k] = dz.sum(axis=0)
    dh = dz @ params.weights[k]

    def back_hidden(k, dh):
        da = dh if cache.masks[k] is None else dh * cache.masks[k]
        dz = da * (cache.pre_acts[k] > 0)
        gw[k] = dz.T @ cache.layer_inputs[k]
        gb[k] = dz.sum(axis=0)
        return dz @ params.weights[k]

    for _ in arch.fusion_hidden:
        k -= 1
        dh = back_hidden(k, dh)

    # split the concatenated gradient back into the branches
    widths = [arch.branch_out(b) for b in range(arch.n_branches)]
    parts = np.split(dh, np.cumsum(widths)[:-1], axis=1)
    starts = np.cumsum([0] + [len(h) for h in arch.branch_hidden])
    for b in reversed(range(arch.n_branches)):
        g = parts[b]
        for k in reversed(range(starts[b], starts[b + 1])):
            g = back_hidden(k, g)
    return ModelParams(arch, gw, gb)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, config: TrainConfig):
    """One Adam update with L2 decay on weights (not biases). Returns new ``(params, state)``."""
    nw = len(params.weights)
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    thetas = params.weights + params.biases
    gs = grads.weights + grads.biases
    new_theta, new_m, new_v = [], [], []
    for j, (th, g, m, v) in enumerate(zip(thetas, gs, state.m, state.v)):
        if j < nw and config.weight_decay:
            g = g + config.weight_decay * th
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_theta.append(th - config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.adam_eps))
        new_m.append(m)
        new_v.append(v)
    return (ModelParams(params.arch, new_theta[:nw], new_theta[nw:]),
            AdamState(new_m, new_v, t))


def train(
    inputs: Sequence[np.ndarray],
    labels,
    arch: ArchSpec,
    config: TrainConfig,
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> ModelParams:
    """Mini-batch Adam on batch-mean BCE.

    Initial weights come from ``derive_seed(config.seed, "init")`` and the
    epoch shuffles plus dropout masks from ``derive_seed(config.seed, "train")``.
    ``on_epoch(epoch, mean_loss)`` receives the mean train-mode loss per epoch.
    """
    xs = _as_batches(arch, inputs)
    y = np.asarray(labels, dtype=float)
    n = xs[0].shape[0]
    if n == 0:
        raise TrainingError("cannot train on an empty dataset")
    if y.shape != (n,):
        raise DimensionError(f"{y.shape} labels for {n} rows")
    params = init_params(arch, derive_seed(config.seed, "init"))
    state = AdamState.zeros_like(params)
    rng = Xoshiro256(derive_seed(config.seed, "train"))
    bs = config.batch_size
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            prob, cache = forward(params, [x[idx] for x in xs], train=True, rng=rng)
            if on_epoch is not None:
                total += float(np.sum(bce_loss(prob, y[idx], config.prob_clip_eps)))
            grads = backward(params, cache, y[idx])
            params, state = adam_step(params, grads, state, config)
        if on_epoch is not None:
            on_epoch(epoch, total / n)
    return params


def predict(params: ModelParams, inputs) -> np.ndarray:
    prob, _ = forward(params, inputs, train=False)
    return np.clip(prob, OUTPUT_CLIP, 1.0 - OUTPUT_CLIP)


def with_dropout(arch: ArchSpec, rate: float) -> ArchSpec:
    return replace(arch, dropout_rate=rate)
