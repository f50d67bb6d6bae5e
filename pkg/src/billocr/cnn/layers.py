"""Layer primitives for the enhancement network: 3x3 same-padding convolution,
batch normalization, ReLU and sigmoid, with full backward passes.

All tensors are float64 batches of shape (N, C, H, W).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvLayer",
    "BatchNormLayer",
    "conv_forward",
    "conv_backward",
    "bn_forward",
    "bn_backward",
    "relu_forward",
    "relu_backward",
    "sigmoid",
]


@dataclass
class ConvLayer:
    """3x3 convolution weights: kernels (out_c, in_c, 3, 3) and biases (out_c,)."""

    kernels: np.ndarray
    biases: np.ndarray

    def __post_init__(self) -> None:
        if self.kernels.ndim != 4 or self.kernels.shape[2:] != (3, 3):
            raise ValueError(f"expected (out, in, 3, 3) kernels, got {self.kernels.shape}")
        if self.biases.shape != (self.kernels.shape[0],):
            raise ValueError("bias count must match output channels")

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]


@dataclass
class BatchNormLayer:
    """Per-channel batch normalization.

    Running statistics start out missing; they exist only after at least one
    training-mode forward pass, which is how an untrained model is detected.
    """

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None
    momentum: float = 0.9
    eps: float = 1e-5

    @property
    def has_statistics(self) -> bool:
        return self.running_mean is not None and self.running_var is not None


def conv_forward(x: np.ndarray, layer: ConvLayer) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1, zero-padded (same) 3x3 convolution.

    Returns the output and the padded input kept for the backward pass.
    """
    n, c, h, w = x.shape
    if c != layer.in_channels:
        raise ValueError(f"expected {layer.in_channels} input channels, got {c}")
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    y = np.broadcast_to(layer.biases.reshape(1, -1, 1, 1), (n, layer.out_channels, h, w)).copy()
    for ky in range(3):
        for kx in range(3):
            # (O, C) x (N, C, H, W) -> (O, N, H, W)
            part = np.tensordot(layer.kernels[:, :, ky, kx], xp[:, :, ky : ky + h, kx : kx + w], axes=(1, 1))
            y += part.transpose(1, 0, 2, 3)
    return y, xp


def conv_backward(
    grad_y: np.ndarray, xp: np.ndarray, layer: ConvLayer
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a conv_forward call: (grad_x, grad_kernels, grad_biases)."""
    n, o, h, w = grad_y.shape
    grad_k = np.empty_like(layer.kernels)
    grad_xp = np.zeros_like(xp)
    for ky in range(3):
        for kx in range(3):
            xs = xp[:, :, ky : ky + h, kx : kx + w]
            grad_k[:, :, ky, kx] = np.tensordot(grad_y, xs, axes=([0, 2, 3], [0, 2, 3]))
            # (N, O, H, W) x (O, C) -> (N, H, W, C)
            spread = np.tensordot(grad_y, layer.kernels[:, :, ky, kx], axes=(1, 0))
            grad_xp[:, :, ky : ky + h, kx : kx + w] += spread.transpose(0, 3, 1, 2)
    grad_b = grad_y.sum(axis=(0, 2, 3))
    return grad_xp[:, :, 1:-1, 1:-1], grad_k, grad_b


def bn_forward(
    x: np.ndarray, layer: BatchNormLayer, training: bool
) -> tuple[np.ndarray, tuple | None]:
    """Batch normalization over (N, H, W) per channel.

    Training mode normalizes with batch statistics (population variance) and
    updates the running statistics in place; inference mode uses the stored
    running statistics.
    """
    shape = (1, -1, 1, 1)
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        if layer.running_mean is None or layer.running_var is None:
            layer.running_mean = mean.copy()
            layer.running_var = var.copy()
        else:
            m = layer.momentum
            layer.running_mean = m * layer.running_mean + (1 - m) * mean
            layer.running_var = m * layer.running_var + (1 - m) * var
        inv_std = 1.0 / np.sqrt(var + layer.eps)
        x_hat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        y = layer.gamma.reshape(shape) * x_hat + layer.beta.reshape(shape)
        count = x.shape[0] * x.shape[2] * x.shape[3]
        return y, (x_hat, inv_std, layer.gamma, count)
    if not layer.has_statistics:
        raise ValueError("batch norm has no running statistics; model is untrained")
    inv_std = 1.0 / np.sqrt(layer.running_var + layer.eps)
    x_hat = (x - layer.running_mean.reshape(shape)) * inv_std.reshape(shape)
    return layer.gamma.reshape(shape) * x_hat + layer.beta.reshape(shape), None


def bn_backward(
    grad_y: np.ndarray, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a training-mode bn_forward: (grad_x, grad_gamma, grad_beta)."""
    x_hat, inv_std, gamma, count = cache
    shape = (1, -1, 1, 1)
    grad_beta = grad_y.sum(axis=(0, 2, 3))
    grad_gamma = (grad_y * x_hat).sum(axis=(0, 2, 3))
    grad_x_hat = grad_y * gamma.reshape(shape)
    mean_g = grad_x_hat.sum(axis=(0, 2, 3)).reshape(shape) / count
    mean_gx = (grad_x_hat * x_hat).sum(axis=(0, 2, 3)).reshape(shape) / count
    grad_x = inv_std.reshape(shape) * (grad_x_hat - mean_g - x_hat * mean_gx)
    return grad_x, grad_gamma, grad_beta


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad_y: np.ndarray, pre_activation: np.ndarray) -> np.ndarray:
    return np.where(pre_activation > 0.0, grad_y, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # evaluated piecewise to stay stable for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
