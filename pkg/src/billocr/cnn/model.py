"""The six-layer encoder-decoder enhancement network.

Stack: five conv+BN+ReLU blocks with channel widths 32-64-64-64-32 followed by
a 1-channel conv with sigmoid output. All convolutions are 3x3, stride 1,
same padding, so spatial dimensions are preserved end to end (the enhanced
output feeds OCR directly). Model files are versioned little-endian binary
with magic "BFN1".
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import (
    BatchNormLayer,
    ConvLayer,
    bn_backward,
    bn_forward,
    conv_backward,
    conv_forward,
    relu_backward,
    relu_forward,
    sigmoid,
)

__all__ = [
    "CHANNELS",
    "EnhanceModel",
    "UntrainedModelError",
    "build_model",
    "parameters",
    "forward",
    "forward_batch",
    "backward",
    "save_model",
    "load_model",
]

# Channel widths through the stack; six convolutions in total.
CHANNELS = (1, 32, 64, 64, 64, 32, 1)

_MAGIC = b"BFN1"
_VERSION = 1


class UntrainedModelError(ValueError):
    """Inference was requested from a model without batch-norm statistics."""


@dataclass
class EnhanceModel:
    convs: list[ConvLayer]
    bns: list[BatchNormLayer]
    training_mode: bool = field(default=False)

    def __post_init__(self) -> None:
        if not self.convs:
            raise ValueError("model needs at least one conv layer")
        if len(self.bns) != len(self.convs) - 1:
            raise ValueError("every conv except the output layer carries batch norm")
        if self.convs[0].in_channels != 1 or self.convs[-1].out_channels != 1:
            raise ValueError("model must map 1 channel to 1 channel")
        for prev, nxt in zip(self.convs, self.convs[1:]):
            if nxt.in_channels != prev.out_channels:
                raise ValueError(
                    f"channel chain broken: {prev.out_channels} -> {nxt.in_channels}"
                )
        for conv, bn in zip(self.convs, self.bns):
            if bn.gamma.shape != (conv.out_channels,):
                raise ValueError("batch norm width must match its conv output")

    @property
    def trained(self) -> bool:
        return all(bn.has_statistics for bn in self.bns)


def build_model(seed: int = 0, channels: tuple[int, ...] = CHANNELS) -> EnhanceModel:
    """Fresh model with Kaiming fan-in initialization and unit-gamma batch norm."""
    rng = np.random.default_rng(seed)
    convs = []
    bns = []
    pairs = list(zip(channels, channels[1:]))
    for i, (cin, cout) in enumerate(pairs):
        std = np.sqrt(2.0 / (cin * 9))
        convs.append(
            ConvLayer(
                kernels=rng.normal(0.0, std, size=(cout, cin, 3, 3)),
                biases=np.zeros(cout),
            )
        )
        if i < len(pairs) - 1:
            bns.append(BatchNormLayer(gamma=np.ones(cout), beta=np.zeros(cout)))
    return EnhanceModel(convs=convs, bns=bns)


def parameters(model: EnhanceModel) -> list[np.ndarray]:
    """All trainable arrays in a fixed deterministic order."""
    params: list[np.ndarray] = []
    for i, conv in enumerate(model.convs):
        params.append(conv.kernels)
        params.append(conv.biases)
        if i < len(model.bns):
            params.append(model.bns[i].gamma)
            params.append(model.bns[i].beta)
    return params


def forward_batch(
    model: EnhanceModel, x: np.ndarray, training: bool
) -> tuple[np.ndarray, list | None]:
    """Run a (N, 1, H, W) batch through the stack.

    Returns the sigmoid output in (0, 1) and, in training mode, the caches
    needed by `backward`.
    """
    expected_c = model.convs[0].in_channels
    if x.ndim != 4 or x.shape[1] != expected_c:
        raise ValueError(f"expected (N, {expected_c}, H, W) input, got {x.shape}")
    caches: list = []
    out = x
    for i, conv in enumerate(model.convs[:-1]):
        z, xp = conv_forward(out, conv)
        z_bn, bn_cache = bn_forward(z, model.bns[i], training)
        out = relu_forward(z_bn)
        if training:
            caches.append((xp, bn_cache, z_bn))
    z, xp = conv_forward(out, model.convs[-1])
    y = sigmoid(z)
    if training:
        caches.append((xp, None, y))
        return y, caches
    return y, None


def forward(
    model: EnhanceModel, x: np.ndarray, training: bool = False
) -> tuple[np.ndarray, list | None]:
    """Single-image forward pass; `x` has shape (1, H, W)."""
    if x.ndim != 3:
        raise ValueError(f"expected a (C, H, W) tensor, got shape {x.shape}")
    y, cache = forward_batch(model, x[None, ...], training)
    return y[0], cache


def backward(model: EnhanceModel, caches: list, grad_out: np.ndarray) -> list[np.ndarray]:
    """Backpropagate through a cached forward pass.

    `grad_out` is the loss gradient at the sigmoid output; the return value
    is aligned with `parameters(model)`.
    """
    if len(caches) != len(model.convs):
        raise ValueError("cache does not match the model stack")
    grads: dict[int, tuple[np.ndarray, ...]] = {}

    xp, _, y = caches[-1]
    grad = grad_out * y * (1.0 - y)  # through the sigmoid
    grad, gk, gb = conv_backward(grad, xp, model.convs[-1])
    grads[len(model.convs) - 1] = (gk, gb)

    for i in range(len(model.convs) - 2, -1, -1):
        xp, bn_cache, z_bn = caches[i]
        grad = relu_backward(grad, z_bn)
        grad, g_gamma, g_beta = bn_backward(grad, bn_cache)
        grad, gk, gb = conv_backward(grad, xp, model.convs[i])
        grads[i] = (gk, gb, g_gamma, g_beta)

    flat: list[np.ndarray] = []
    for i in range(len(model.convs)):
        flat.extend(grads[i])
    return flat


def save_model(model: EnhanceModel, path: str | Path) -> None:
    """Serialize to versioned little-endian binary (magic "BFN1")."""
    parts = [
        _MAGIC,
        struct.pack("<II", _VERSION, len(model.convs)),
    ]
    for i, conv in enumerate(model.convs):
        parts.append(struct.pack("<II", conv.out_channels, conv.in_channels))
        parts.append(conv.kernels.astype("<f8").tobytes())
        parts.append(conv.biases.astype("<f8").tobytes())
        has_bn = i < len(model.bns)
        parts.append(struct.pack("<B", int(has_bn)))
        if has_bn:
            bn = model.bns[i]
            parts.append(struct.pack("<BddI", int(bn.has_statistics), bn.momentum, bn.eps, len(bn.gamma)))
            parts.append(bn.gamma.astype("<f8").tobytes())
            parts.append(bn.beta.astype("<f8").tobytes())
            if bn.has_statistics:
                parts.append(bn.running_mean.astype("<f8").tobytes())
                parts.append(bn.running_var.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> EnhanceModel:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    version, n_convs = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    pos = 12

    def take(count: int) -> np.ndarray:
        nonlocal pos
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos += count * 8
        return arr

    convs: list[ConvLayer] = []
    bns: list[BatchNormLayer] = []
    for _ in range(n_convs):
        out_c, in_c = struct.unpack_from("<II", data, pos)
        pos += 8
        kernels = take(out_c * in_c * 9).reshape(out_c, in_c, 3, 3)
        biases = take(out_c)
        convs.append(ConvLayer(kernels=kernels, biases=biases))
        (has_bn,) = struct.unpack_from("<B", data, pos)
        pos += 1
        if has_bn:
            has_stats, momentum, eps, channels = struct.unpack_from("<BddI", data, pos)
            pos += 21
            gamma = take(channels)
            beta = take(channels)
            mean = take(channels) if has_stats else None
            var = take(channels) if has_stats else None
            bns.append(
                BatchNormLayer(
                    gamma=gamma, beta=beta, running_mean=mean, running_var=var,
                    momentum=momentum, eps=eps,
                )
            )
    return EnhanceModel(convs=convs, bns=bns)
