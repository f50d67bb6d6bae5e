"""Self-supervised training of the enhancement network.

Training pairs are (mildly blurred image, original image), both rescaled to
[0, 1]. Optimization is Adam on MSE with early stopping on validation loss;
the weights from the best validation epoch are restored at the end.
"""
from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..image import GrayImage
from ..ops import clahe, gaussian_blur, sharpen
from ..quality import EnhancementPlan
from .model import EnhanceModel, UntrainedModelError, backward, forward_batch, parameters

__all__ = [
    "BLUR_KERNEL_SIZE",
    "BLUR_SIGMA",
    "make_training_pair",
    "mse_loss",
    "AdamState",
    "init_adam",
    "adam_step",
    "TrainConfig",
    "TrainHistory",
    "train",
    "history_to_csv",
    "extract_patches",
    "enhance",
]

# Degradation used to synthesize training inputs.
BLUR_KERNEL_SIZE = 3
BLUR_SIGMA = 1.0


def make_training_pair(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """(blurred, original) pair as 1-channel tensors rescaled to [0, 1]."""
    blurred = gaussian_blur(img, BLUR_KERNEL_SIZE, BLUR_SIGMA)
    return blurred.pixels[None, ...] / 255.0, img.pixels[None, ...] / 255.0


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient 2(pred - target) / N."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: list[np.ndarray], lr: float = 0.001) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        lr=lr,
    )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to the parameter arrays in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state lengths disagree")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 4
    patience: int = 5
    val_split: float = 0.1
    seed: int = 0
    lr: float = 0.001


@dataclass
class TrainHistory:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    train_mae: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0


def _evaluate(model: EnhanceModel, batch_x: np.ndarray, batch_t: np.ndarray) -> tuple[float, float]:
    pred, _ = forward_batch(model, batch_x, training=False)
    diff = pred - batch_t
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))


def train(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    config: TrainConfig,
    model: EnhanceModel | None = None,
) -> tuple[EnhanceModel, TrainHistory]:
    """Fit the network on (input, target) tensor pairs.

    Stops after `patience` consecutive epochs without a validation
    improvement, or at `epochs`; returns the best-validation-epoch weights.
    All pairs must share one spatial shape so they can be batched.
    """
    if len(pairs) < 2:
        raise ValueError("need at least 2 training pairs")
    shapes = {p[0].shape for p in pairs} | {p[1].shape for p in pairs}
    if len(shapes) != 1:
        raise ValueError(f"all pairs must share one shape, got {sorted(shapes)}")
    n_val = max(1, round(len(pairs) * config.val_split))
    if n_val >= len(pairs):
        raise ValueError("split leaves no training pairs")

    from .model import build_model  # default stack

    rng = np.random.default_rng(config.seed)
    model = model if model is not None else build_model(seed=config.seed)
    order = rng.permutation(len(pairs))
    val_idx = order[:n_val]
    train_idx = order[n_val:]

    val_x = np.stack([pairs[i][0] for i in val_idx])
    val_t = np.stack([pairs[i][1] for i in val_idx])

    params = parameters(model)
    adam = init_adam(params, lr=config.lr)
    history = TrainHistory()
    best_val = np.inf
    best_weights: list[np.ndarray] | None = None
    best_stats: list[tuple[np.ndarray, np.ndarray]] = []
    since_improvement = 0

    for epoch in range(1, config.epochs + 1):
        epoch_order = rng.permutation(train_idx)
        se_sum = 0.0
        ae_sum = 0.0
        n_elements = 0
        for start in range(0, len(epoch_order), config.batch_size):
            batch = epoch_order[start : start + config.batch_size]
            bx = np.stack([pairs[i][0] for i in batch])
            bt = np.stack([pairs[i][1] for i in batch])
            pred, caches = forward_batch(model, bx, training=True)
            loss, grad = mse_loss(pred, bt)
            grads = backward(model, caches, grad)
            adam_step(adam, params, grads)
            se_sum += loss * pred.size
            ae_sum += float(np.abs(pred - bt).sum())
            n_elements += pred.size

        val_mse, val_mae = _evaluate(model, val_x, val_t)
        history.train_mse.append(se_sum / n_elements)
        history.train_mae.append(ae_sum / n_elements)
        history.val_mse.append(val_mse)
        history.val_mae.append(val_mae)
        history.stopped_epoch = epoch

        if val_mse < best_val:
            best_val = val_mse
            history.best_epoch = epoch
            best_weights = [p.copy() for p in params]
            best_stats = [(bn.running_mean.copy(), bn.running_var.copy()) for bn in model.bns]
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= config.patience:
                break

    if best_weights is not None:
        for p, best in zip(params, best_weights):
            p[...] = best
        for bn, (mean, var) in zip(model.bns, best_stats):
            bn.running_mean = mean
            bn.running_var = var
    return model, history


def history_to_csv(history: TrainHistory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse", "train_mae", "val_mae"])
        for i in range(len(history.train_mse)):
            writer.writerow(
                [i + 1, history.train_mse[i], history.val_mse[i], history.train_mae[i], history.val_mae[i]]
            )


def extract_patches(img: GrayImage, patch: int = 64) -> list[GrayImage]:
    """Non-overlapping patch grid; partial edge tiles are dropped.

    Images smaller than the patch size yield nothing.
    """
    out = []
    for y in range(0, img.height - patch + 1, patch):
        for x in range(0, img.width - patch + 1, patch):
            out.append(GrayImage(img.pixels[y : y + patch, x : x + patch]))
    return out


def enhance(
    model: EnhanceModel,
    img: GrayImage,
    plan: EnhancementPlan,
    clahe_clip: float = 2.0,
    clahe_tile: tuple[int, int] = (8, 8),
) -> GrayImage:
    """Apply the routed enhancement plan to one image.

    Zero planned passes is the identity path. Otherwise: network forward in
    inference mode, back to the 0-255 scale, optional sharpening (LOW tier),
    then CLAHE for local contrast.
    """
    if plan.cnn_passes == 0:
        return img
    if not model.trained:
        raise UntrainedModelError("model has no batch-norm statistics; train it first")
    x = img.pixels[None, ...] / 255.0
    for _ in range(plan.cnn_passes):
        y, _ = forward_batch(model, x[None, ...], training=False)
        x = y[0]
    out = GrayImage(np.clip(x[0] * 255.0, 0.0, 255.0))
    if plan.apply_sharpen:
        out = sharpen(out)
    if plan.apply_clahe_post:
        out = clahe(out, clahe_clip, clahe_tile)
    return out
