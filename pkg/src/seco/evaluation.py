"""Frozen-feature evaluation: probes, flap prediction, priming maps.

The backbone never updates here. Features for a "flapped" scene (one
region blacked out) are the context embedding, the memory read-out, or
their concatenation; a linear probe trained with cross-entropy on those
features predicts what was behind the flap. Priming maps slide flaps of
several sizes over the scene and aggregate per-position probe
confidence into one normalized spatial map.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import blobio
from .augment import AugmentConfig, context_view
from .datasets import SceneDataset
from .imageops import bilinear_resize, min_max_normalize
from .model import SecoModel
from .pairs import BoundingBox

__all__ = [
    "ProbeConfig",
    "LinearProbe",
    "MissingClassError",
    "FlapSample",
    "dataset_flap_samples",
    "context_features",
    "probe_inputs",
    "train_probe",
    "save_probe",
    "load_probe",
    "lift_the_flap",
    "make_flap_scorer",
    "priming_map",
    "rmse",
    "KLMatrix",
    "memory_probe",
    "save_kl_csv",
]

INPUT_MODES = ("concat", "h_c", "s_c")


class MissingClassError(ValueError):
    """A requested probe class has no training samples."""


@dataclass
class ProbeConfig:
    input_mode: str = "concat"
    epochs: int = 300
    lr: float = 1.0e-2
    weight_decay: float = 0.0
    batch_size: int = 512
    seed: int = 0

    def validate(self) -> None:
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive, weight_decay non-negative")


@dataclass
class FlapSample:
    """One evaluation example: a scene, the region to black out, and the
    category that was there."""

    image: np.ndarray
    roi: BoundingBox
    label: int


def dataset_flap_samples(dataset: SceneDataset, image_ids=None) -> list[FlapSample]:
    """All annotated boxes of a dataset as flap samples."""
    ids = dataset.image_ids if image_ids is None else list(image_ids)
    out = []
    for image_id in ids:
        boxes = dataset.boxes(image_id)
        if not boxes:
            continue
        image = dataset.load_image(image_id)
        for box, cat in boxes:
            out.append(FlapSample(image=image, roi=box, label=cat))
    return out


def _encode_views(model: SecoModel, views: list[np.ndarray], batch: int = 64):
    """Run context views through the frozen encoder; returns (h_c, s_c)."""
    model.eval()
    hs, ss = [], []
    with torch.no_grad():
        for start in range(0, len(views), batch):
            chunk = np.stack(views[start : start + batch]).transpose(0, 3, 1, 2)
            x = torch.from_numpy(np.ascontiguousarray(chunk))
            h_c = model.encode_context(x)
            s_c = model.context_embed(h_c)
            hs.append(h_c.numpy())
            ss.append(s_c.numpy())
    return np.concatenate(hs), np.concatenate(ss)


def context_features(
    model: SecoModel, samples: list[FlapSample], acfg: AugmentConfig, batch: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    views = [context_view(s.image, s.roi, acfg) for s in samples]
    return _encode_views(model, views, batch)


def probe_inputs(h_c: np.ndarray, s_c: np.ndarray, mode: str) -> np.ndarray:
    if mode == "concat":
        return np.concatenate([h_c, s_c], axis=1)
    if mode == "h_c":
        return h_c
    if mode == "s_c":
        return s_c
    raise ValueError(f"input_mode must be one of {INPUT_MODES}")


@dataclass
class LinearProbe:
    """Multinomial logistic head over standardized frozen features."""

    weight: np.ndarray
    bias: np.ndarray
    classes: list[int]
    input_mode: str
    feat_mean: np.ndarray
    feat_std: np.ndarray

    def predict_logits(self, feats: np.ndarray) -> np.ndarray:
        z = (feats - self.feat_mean) / self.feat_std
        return z @ self.weight.T + self.bias

    def predict(self, feats: np.ndarray) -> np.ndarray:
        """Class ids; argmax ties resolve to the lowest class index."""
        logits = self.predict_logits(feats)
        return np.asarray(self.classes)[np.argmax(logits, axis=1)]


def train_probe(
    model: SecoModel,
    samples: list[FlapSample],
    acfg: AugmentConfig,
    pcfg: ProbeConfig,
    classes: list[int] | None = None,
) -> LinearProbe:
    """Fit the linear head on frozen features with cross-entropy.

    ``classes`` defaults to the labels present in ``samples``; passing
    an explicit list raises if any requested class has no examples.
    """
    pcfg.validate()
    if not samples:
        raise ValueError("no probe samples given")
    labels = np.asarray([s.label for s in samples])
    present = sorted(set(int(l) for l in labels))
    if classes is None:
        classes = present
    else:
        classes = sorted(int(c) for c in classes)
        missing = sorted(set(classes) - set(present))
        if missing:
            raise MissingClassError(f"no training samples for classes {missing}")
        extra = sorted(set(present) - set(classes))
        if extra:
            raise ValueError(f"samples carry labels outside the class list: {extra}")
    if len(classes) < 2:
        raise MissingClassError(f"need at least 2 classes, got {classes}")

    h_c, s_c = context_features(model, samples, acfg)
    feats = probe_inputs(h_c, s_c, pcfg.input_mode).astype(np.float64)
    mean = feats.mean(axis=0)
    std = np.maximum(feats.std(axis=0), 1e-8)
    z = (feats - mean) / std

    index = {c: i for i, c in enumerate(classes)}
    y = torch.from_numpy(np.asarray([index[int(l)] for l in labels], dtype=np.int64))
    x = torch.from_numpy(z.astype(np.float32))

    torch.manual_seed(pcfg.seed)
    head = torch.nn.Linear(x.shape[1], len(classes))
    opt = torch.optim.Adam(head.parameters(), lr=pcfg.lr, weight_decay=pcfg.weight_decay)
    order_rng = np.random.default_rng(pcfg.seed)
    for _ in range(pcfg.epochs):
        perm = order_rng.permutation(len(samples))
        for start in range(0, len(samples), pcfg.batch_size):
            idx = torch.from_numpy(perm[start : start + pcfg.batch_size].copy())
            opt.zero_grad(set_to_none=True)
            loss = torch.nn.functional.cross_entropy(head(x[idx]), y[idx])
            loss.backward()
            opt.step()

    return LinearProbe(
        weight=head.weight.detach().numpy().astype(np.float64),
        bias=head.bias.detach().numpy().astype(np.float64),
        classes=list(classes),
        input_mode=pcfg.input_mode,
        feat_mean=mean,
        feat_std=std,
    )


def save_probe(probe: LinearProbe, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blobio.write_blob(out / "weight.bin", probe.weight)
    blobio.write_blob(out / "bias.bin", probe.bias)
    blobio.write_blob(out / "feat_mean.bin", probe.feat_mean)
    blobio.write_blob(out / "feat_std.bin", probe.feat_std)
    meta = {"classes": probe.classes, "input_mode": probe.input_mode}
    (out / "probe.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return out


def load_probe(probe_dir) -> LinearProbe:
    d = Path(probe_dir)
    meta = json.loads((d / "probe.json").read_text(encoding="utf-8"))
    return LinearProbe(
        weight=blobio.read_blob(d / "weight.bin").astype(np.float64),
        bias=blobio.read_blob(d / "bias.bin").astype(np.float64),
        classes=[int(c) for c in meta["classes"]],
        input_mode=meta["input_mode"],
        feat_mean=blobio.read_blob(d / "feat_mean.bin").astype(np.float64),
        feat_std=blobio.read_blob(d / "feat_std.bin").astype(np.float64),
    )


def lift_the_flap(
    model: SecoModel,
    probe: LinearProbe,
    samples: list[FlapSample],
    acfg: AugmentConfig,
) -> tuple[float, np.ndarray]:
    """Top-1 accuracy of the probe on flapped scenes.

    Returns (accuracy, predicted class ids per sample).
    """
    if not samples:
        raise ValueError("no evaluation samples given")
    h_c, s_c = context_features(model, samples, acfg)
    feats = probe_inputs(h_c, s_c, probe.input_mode)
    preds = probe.predict(feats)
    truth = np.asarray([s.label for s in samples])
    return float(np.mean(preds == truth)), preds


def make_flap_scorer(
    model: SecoModel,
    probe: LinearProbe,
    target_class: int,
    acfg: AugmentConfig,
    batch: int = 64,
    window: int | None = None,
):
    """Score function for priming maps: softmax probability of one class.

    Returns ``fn(image, flaps) -> scores`` over a list of boxes. With
    ``window`` set, each flap is scored on a square local context window
    of that side centered on it (clamped inside the image); scenes
    larger than the trained context size should use the trained size
    here, otherwise the views are resampled off the training
    distribution.
    """
    if target_class not in probe.classes:
        raise ValueError(f"class {target_class} not in probe classes {probe.classes}")
    if window is not None and window < 1:
        raise ValueError(f"window must be positive, got {window}")
    col = probe.classes.index(target_class)

    def local_view(image: np.ndarray, b: BoundingBox) -> np.ndarray:
        h, w = image.shape[:2]
        if window > w or window > h or b.w > window or b.h > window:
            raise ValueError(
                f"window {window} must fit the {w}x{h} image and cover flap {b.as_tuple()}"
            )
        ox = min(max(b.x + (b.w - window) // 2, 0), w - window)
        oy = min(max(b.y + (b.h - window) // 2, 0), h - window)
        crop = image[oy : oy + window, ox : ox + window]
        return context_view(crop, BoundingBox(b.x - ox, b.y - oy, b.w, b.h), acfg)

    def score(image: np.ndarray, flaps: list[BoundingBox]) -> np.ndarray:
        if window is None:
            views = [context_view(image, b, acfg) for b in flaps]
        else:
            views = [local_view(image, b) for b in flaps]
        h_c, s_c = _encode_views(model, views, batch)
        logits = probe.predict_logits(probe_inputs(h_c, s_c, probe.input_mode))
        logits = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        return p[:, col]

    return score


def priming_map(
    image: np.ndarray,
    scorer,
    grid_sizes: tuple[int, ...] = (8, 14, 28, 56, 112),
    out_size: int = 224,
) -> np.ndarray:
    """Multi-scale flap sweep aggregated into one [0, 1] map.

    For each flap side the image is tiled without overlap, each tile is
    blacked out and scored, the per-scale score grid is min-max
    normalized and upsampled, and scales are averaged then normalized
    again. A constant map at any stage normalizes to all zeros.
    """
    h, w = image.shape[:2]
    if h != out_size or w != out_size:
        raise ValueError(f"expected a {out_size}x{out_size} image, got {h}x{w}")
    if not grid_sizes:
        raise ValueError("need at least one flap size")
    for g in grid_sizes:
        if g < 1 or out_size % g != 0:
            raise ValueError(f"flap side {g} must divide {out_size}")

    acc = np.zeros((out_size, out_size), dtype=np.float64)
    for g in grid_sizes:
        n = out_size // g
        flaps = [
            BoundingBox(x * g, y * g, g, g) for y in range(n) for x in range(n)
        ]
        scores = np.asarray(scorer(image, flaps), dtype=np.float64).reshape(n, n)
        norm = min_max_normalize(scores)
        acc += np.asarray(bilinear_resize(norm, out_size, out_size), dtype=np.float64)
    return min_max_normalize(acc / len(grid_sizes))


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference; shapes must match exactly."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class KLMatrix:
    """Pairwise divergence between per-class memory usage profiles."""

    matrix: np.ndarray
    classes: list[int]
    counts: np.ndarray
    valid: np.ndarray


def memory_probe(
    model: SecoModel,
    samples: list[FlapSample],
    acfg: AugmentConfig,
    classes: list[int] | None = None,
    batch: int = 64,
) -> KLMatrix:
    """Which memory slots answer for which object class.

    Each flapped scene casts one vote for its argmax attention slot
    (ties to the lowest slot). Rows of the count table are min-max
    normalized, pushed through a softmax, and compared with KL
    divergence; the diagonal is zero. Classes without samples are
    flagged invalid and their entries are NaN.
    """
    if not model.cfg.use_memory:
        raise ValueError("memory probe requires a model with memory enabled")
    if not samples:
        raise ValueError("no samples given")
    labels = [int(s.label) for s in samples]
    if classes is None:
        classes = sorted(set(labels))
    else:
        classes = sorted(int(c) for c in classes)
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted(set(labels) - set(index))
    if unknown:
        raise ValueError(f"samples carry labels outside the class list: {unknown}")

    views = [context_view(s.image, s.roi, acfg) for s in samples]
    model.eval()
    counts = np.zeros((len(classes), model.cfg.k), dtype=np.float64)
    with torch.no_grad():
        for start in range(0, len(views), batch):
            chunk = np.stack(views[start : start + batch]).transpose(0, 3, 1, 2)
            h_c = model.encode_context(torch.from_numpy(np.ascontiguousarray(chunk)))
            _, attn = model.retrieve(h_c)
            slots = attn.numpy().argmax(axis=1)
            for s_label, slot in zip(labels[start : start + batch], slots):
                counts[index[s_label], int(slot)] += 1.0

    c = len(classes)
    valid = counts.sum(axis=1) > 0
    profiles = np.full((c, model.cfg.k), np.nan)
    for i in range(c):
        if not valid[i]:
            continue
        row = min_max_normalize(counts[i])
        e = np.exp(row - row.max())
        profiles[i] = e / e.sum()

    matrix = np.full((c, c), np.nan)
    for i in range(c):
        for j in range(c):
            if not (valid[i] and valid[j]):
                continue
            if i == j:
                matrix[i, j] = 0.0
            else:
                matrix[i, j] = float(
                    np.sum(profiles[i] * np.log(profiles[i] / profiles[j]))
                )
    return KLMatrix(matrix=matrix, classes=classes, counts=counts, valid=valid)


def save_kl_csv(path, klm: KLMatrix, names: dict[int, str] | None = None) -> None:
    label = (lambda c: names[c]) if names else (lambda c: str(c))
    lines = ["class," + ",".join(label(c) for c in klm.classes)]
    for i, c in enumerate(klm.classes):
        row = ",".join(
            "" if math.isnan(v) else f"{v:.6f}" for v in klm.matrix[i]
        )
        lines.append(f"{label(c)},{row}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
