"""Optimization loop: warmup + cosine LR, pair batching, logging.

Training never touches category labels; batches are built from a pair
manifest (image id + box) and raw images only. Each step stacks a few
augmented pairs per image across the image batch and takes one SGD
step on the combined objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .augment import AugmentConfig, augment_pair
from .datasets import SceneDataset
from .model import SecoModel, save_checkpoint
from .objective import LossWeights, total_loss
from .pairs import BoundingBox, make_pair

__all__ = ["TrainConfig", "FitResult", "lr_at", "sample_pairs", "train_step", "fit"]


@dataclass
class TrainConfig:
    """Loop shape and optimizer settings.

    The base learning rate follows the linear scaling rule
    ``0.2 * batch_size / 256``; warmup ramps linearly from zero over
    ``warmup_epochs`` and the remainder decays on a cosine to
    ``min_lr``. ``batch_size`` counts images; each image contributes
    ``pairs_per_image`` training pairs per epoch.
    """

    batch_size: int = 64
    epochs: int = 20
    warmup_epochs: int = 10
    pairs_per_image: int = 4
    min_lr: float = 2.0e-4
    momentum: float = 0.9
    weight_decay: float = 1.0e-6
    seed: int = 0
    checkpoint_every: int = 1
    image_cache: int = 4096

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError("warmup_epochs must lie in [0, epochs]")
        if self.pairs_per_image < 1:
            raise ValueError("pairs_per_image must be positive")
        if self.min_lr < 0 or self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("min_lr, momentum, weight_decay must be non-negative")

    @property
    def base_lr(self) -> float:
        return 0.2 * self.batch_size / 256.0


def lr_at(step: int, total_steps: int, warmup_steps: int, base_lr: float, min_lr: float) -> float:
    """Learning rate at a global step.

    Linear from 0 to ``base_lr`` over the warmup (exactly ``base_lr`` at
    its end), then cosine down to ``min_lr`` at ``total_steps``; held at
    ``min_lr`` afterward. Continuous everywhere.
    """
    if total_steps < 1 or not 0 <= warmup_steps <= total_steps:
        raise ValueError(f"bad schedule bounds ({warmup_steps=}, {total_steps=})")
    if step < 0:
        raise ValueError("step must be non-negative")
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    if step >= total_steps:
        return min_lr
    span = total_steps - warmup_steps
    progress = (step - warmup_steps) / span
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * progress))


def sample_pairs(pool: list, k: int, rng: np.random.Generator) -> list:
    """Pick k entries: without replacement when the pool allows it, with
    replacement for smaller pools, and [] for an empty pool (the caller
    skips such images)."""
    if k < 1:
        raise ValueError("k must be positive")
    n = len(pool)
    if n == 0:
        return []
    if n >= k:
        idx = rng.choice(n, size=k, replace=False)
    else:
        idx = rng.integers(0, n, size=k)
    return [pool[int(i)] for i in idx]


def train_step(
    model: SecoModel,
    optimizer: torch.optim.Optimizer,
    t_views: torch.Tensor,
    c_views: torch.Tensor,
    weights: LossWeights,
    lr: float,
) -> dict[str, float]:
    """One optimization step; returns the loss breakdown."""
    for group in optimizer.param_groups:
        group["lr"] = lr
    model.train()
    optimizer.zero_grad(set_to_none=True)
    s_t, s_c = model(t_views, c_views)
    loss, parts = total_loss(s_c, s_t, weights)
    if not math.isfinite(parts["total"]):
        raise RuntimeError(f"non-finite loss {parts}")
    loss.backward()
    optimizer.step()
    parts["lr"] = lr
    return parts


@dataclass
class FitResult:
    final_checkpoint: Path
    history: list[dict]


class _ImageCache:
    def __init__(self, dataset: SceneDataset, cap: int):
        self.dataset = dataset
        self.cap = cap
        self.store: dict[int, np.ndarray] = {}

    def get(self, image_id: int) -> np.ndarray:
        img = self.store.get(image_id)
        if img is None:
            img = self.dataset.load_image(image_id)
            if len(self.store) < self.cap:
                self.store[image_id] = img
        return img


def _batch_tensors(views: list[np.ndarray]) -> torch.Tensor:
    stacked = np.stack(views).transpose(0, 3, 1, 2)
    return torch.from_numpy(np.ascontiguousarray(stacked))


def fit(
    dataset: SceneDataset,
    manifest: list[dict],
    model: SecoModel,
    tcfg: TrainConfig,
    acfg: AugmentConfig,
    weights: LossWeights,
    out_dir,
    log_cb=None,
) -> FitResult:
    """Train on mined pairs; writes checkpoints and a jsonl loss log.

    Deterministic for a fixed (config, manifest, seed) triple: image
    order, pair choice, and augmentation draws all come from one
    generator seeded by ``tcfg.seed``.
    """
    tcfg.validate()
    acfg.validate()
    weights.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rois_by_image: dict[int, list[BoundingBox]] = {}
    for entry in manifest:
        rois_by_image.setdefault(entry["image_id"], []).append(entry["roi"])
    image_ids = sorted(i for i, rois in rois_by_image.items() if rois)
    if not image_ids:
        raise ValueError("pair manifest holds no usable images")

    steps_per_epoch = math.ceil(len(image_ids) / tcfg.batch_size)
    total_steps = steps_per_epoch * tcfg.epochs
    warmup_steps = steps_per_epoch * tcfg.warmup_epochs

    rng = np.random.default_rng(tcfg.seed)
    torch.manual_seed(tcfg.seed)
    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=0.0,
        momentum=tcfg.momentum,
        weight_decay=tcfg.weight_decay,
    )
    cache = _ImageCache(dataset, tcfg.image_cache)
    history: list[dict] = []
    step = 0
    log_path = out / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(tcfg.epochs):
            order = rng.permutation(len(image_ids))
            for start in range(0, len(image_ids), tcfg.batch_size):
                t_views, c_views = [], []
                for oi in order[start : start + tcfg.batch_size]:
                    image_id = image_ids[int(oi)]
                    rois = sample_pairs(rois_by_image[image_id], tcfg.pairs_per_image, rng)
                    if not rois:
                        continue
                    image = cache.get(image_id)
                    for roi in rois:
                        pair = make_pair(image, roi, image_id)
                        tgt, ctx = augment_pair(pair, rng, acfg)
                        t_views.append(tgt)
                        c_views.append(ctx)
                if len(t_views) < 2:
                    continue
                lr = lr_at(step, total_steps, warmup_steps, tcfg.base_lr, tcfg.min_lr)
                parts = train_step(
                    model, optimizer, _batch_tensors(t_views), _batch_tensors(c_views), weights, lr
                )
                parts.update(epoch=epoch, step=step)
                history.append(parts)
                log.write(json.dumps(parts) + "\n")
                if log_cb is not None:
                    log_cb(parts)
                step += 1
            if (epoch + 1) % tcfg.checkpoint_every == 0 or epoch + 1 == tcfg.epochs:
                save_checkpoint(model, out / "checkpoints" / f"epoch_{epoch + 1:04d}", step)
    final = out / "checkpoints" / f"epoch_{tcfg.epochs:04d}"
    if not final.exists():
        final = save_checkpoint(model, final, step)
    return FitResult(final_checkpoint=final, history=history)
