"""Two-stream encoder with projections and a trainable external memory.

The target stream embeds the object crop; the context stream embeds the
blacked-out scene and then reads from a bank of memory slots by softmax
attention. Queries are the projected context embedding, keys are a
projection of the memory itself, and the read-out is the attention-
weighted sum of raw slots, so the slots double as both address book and
payload. The projection/memory heads live in their own module and work
on embeddings of any dimension, which keeps them testable without an
encoder in front.

Checkpoints are a directory: a deterministic ``manifest.json`` plus one
float32 blob per tensor, so a save/load/save round trip is
byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import blobio

__all__ = [
    "ModelConfig",
    "AssociationHead",
    "SecoModel",
    "TinyEncoder",
    "init_model",
    "save_checkpoint",
    "load_checkpoint",
]

ARCH_DIMS = {"tiny": 128, "resnet50": 2048}


@dataclass
class ModelConfig:
    arch: str = "tiny"
    h: int = 64
    k: int = 64
    seed: int = 0
    shared_encoder: bool = False
    use_memory: bool = True
    projection_bias: bool = True
    context_size: int = 224
    target_size: int = 96

    def validate(self) -> None:
        if self.arch not in ARCH_DIMS:
            raise ValueError(f"unknown arch {self.arch!r}; choose from {sorted(ARCH_DIMS)}")
        if self.h < 1 or self.k < 1:
            raise ValueError("h and k must be positive")
        if self.context_size < 16 or self.target_size < 16:
            raise ValueError("view sizes must be at least 16")


class AssociationHead(nn.Module):
    """Projections plus memory: everything downstream of the encoders.

    ``d`` is the embedding dimension coming in, ``h`` the shared output
    space, ``k`` the slot count. With ``use_memory`` off the context
    side is the plain projection and no attention exists.
    """

    def __init__(self, d: int, h: int, k: int, use_memory: bool = True, bias: bool = True):
        super().__init__()
        if min(d, h, k) < 1:
            raise ValueError(f"dims must be positive, got {(d, h, k)}")
        self.d, self.h, self.k = d, h, k
        self.use_memory = use_memory
        self.phi_t = nn.Linear(d, h, bias=bias)
        self.phi_c = nn.Linear(d, h, bias=bias)
        self.phi_k = nn.Linear(h, h, bias=bias)
        self.memory = nn.Parameter(torch.empty(k, h))
        nn.init.xavier_uniform_(self.memory)

    def _check(self, x: torch.Tensor, name: str) -> None:
        if x.ndim != 2 or x.shape[1] != self.d:
            raise ValueError(f"{name} must be (N, {self.d}), got {tuple(x.shape)}")

    def retrieve(self, h_c: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Memory read: (read-out, attention over slots).

        Attention is ``softmax(q k^T / sqrt(h))`` with q the projected
        context embedding and k the key-projected memory; the read-out
        mixes raw memory slots with those weights, so each attention row
        is a point on the k-simplex.
        """
        self._check(h_c, "h_c")
        q = self.phi_c(h_c)
        keys = self.phi_k(self.memory)
        logits = q @ keys.T / math.sqrt(self.h)
        attn = torch.softmax(logits, dim=1)
        return attn @ self.memory, attn

    def project_target(self, h_t: torch.Tensor) -> torch.Tensor:
        self._check(h_t, "h_t")
        return self.phi_t(h_t)

    def context_embed(self, h_c: torch.Tensor) -> torch.Tensor:
        if self.use_memory:
            s_c, _ = self.retrieve(h_c)
            return s_c
        self._check(h_c, "h_c")
        return self.phi_c(h_c)

    def forward(self, h_t: torch.Tensor, h_c: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.project_target(h_t), self.context_embed(h_c)


class TinyEncoder(nn.Module):
    """Four stride-2 conv blocks with global average pooling, D=128."""

    def __init__(self):
        super().__init__()
        chans = [3, 16, 32, 64, 128]
        layers = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            layers += [
                nn.Conv2d(cin, cout, kernel_size=3, stride=2, padding=1, bias=False),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            ]
        self.blocks = nn.Sequential(*layers)
        self.feature_dim = chans[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.blocks(x).mean(dim=(2, 3))


def _resnet50_encoder() -> nn.Module:
    from torchvision.models import resnet50

    net = resnet50(weights=None)
    net.fc = nn.Identity()
    net.feature_dim = 2048
    return net


class SecoModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        torch.manual_seed(cfg.seed)

        make = TinyEncoder if cfg.arch == "tiny" else _resnet50_encoder
        self.encoder_t = make()
        self.encoder_c = self.encoder_t if cfg.shared_encoder else make()
        self.head = AssociationHead(
            d=self.encoder_t.feature_dim,
            h=cfg.h,
            k=cfg.k,
            use_memory=cfg.use_memory,
            bias=cfg.projection_bias,
        )

    @property
    def feature_dim(self) -> int:
        return self.encoder_t.feature_dim

    @property
    def memory(self) -> torch.Tensor:
        return self.head.memory

    def _check_view(self, x: torch.Tensor, size: int, name: str) -> None:
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != size or x.shape[3] != size:
            raise ValueError(
                f"{name} views must be (N, 3, {size}, {size}), got {tuple(x.shape)}"
            )

    def encode_target(self, x: torch.Tensor) -> torch.Tensor:
        self._check_view(x, self.cfg.target_size, "target")
        return self.encoder_t(x)

    def encode_context(self, x: torch.Tensor) -> torch.Tensor:
        self._check_view(x, self.cfg.context_size, "context")
        return self.encoder_c(x)

    def retrieve(self, h_c: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.head.retrieve(h_c)

    def project_target(self, h_t: torch.Tensor) -> torch.Tensor:
        return self.head.project_target(h_t)

    def context_embed(self, h_c: torch.Tensor) -> torch.Tensor:
        return self.head.context_embed(h_c)

    def forward(self, t_views: torch.Tensor, c_views: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h_t = self.encode_target(t_views)
        h_c = self.encode_context(c_views)
        return self.head(h_t, h_c)


def init_model(
    arch: str = "tiny",
    h: int = 64,
    k: int = 64,
    seed: int = 0,
    shared_encoder: bool = False,
    use_memory: bool = True,
    projection_bias: bool = True,
    context_size: int = 224,
    target_size: int = 96,
) -> SecoModel:
    cfg = ModelConfig(
        arch=arch,
        h=h,
        k=k,
        seed=seed,
        shared_encoder=shared_encoder,
        use_memory=use_memory,
        projection_bias=projection_bias,
        context_size=context_size,
        target_size=target_size,
    )
    return SecoModel(cfg)


def _blob_name(tensor_name: str) -> str:
    return tensor_name.replace(".", "__") + ".bin"


def save_checkpoint(model: SecoModel, out_dir, step: int = 0, extra: dict | None = None) -> Path:
    """Write manifest + per-tensor blobs; returns the directory path.

    Integer buffers (batch-norm step counters) are stored as float32;
    they are exact well past any step count reachable here.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {}
    for name, tensor in model.state_dict().items():
        fname = _blob_name(name)
        arr = tensor.detach().cpu().numpy()
        if arr.ndim == 0:
            arr = arr.reshape(1)
        blobio.write_blob(out / fname, arr.astype(np.float32))
        params[name] = {"file": fname, "shape": list(tensor.shape)}
    manifest = {
        "format": 1,
        "model": asdict(model.cfg),
        "step": int(step),
        "extra": extra or {},
        "params": params,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return out


def load_checkpoint(ckpt_dir) -> tuple[SecoModel, dict]:
    """Rebuild the model from a checkpoint directory.

    Returns (model, manifest). Float tensors come back bit-identical.
    """
    ckpt = Path(ckpt_dir)
    manifest = json.loads((ckpt / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format") != 1:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format')!r}")
    model = SecoModel(ModelConfig(**manifest["model"]))
    state = model.state_dict()
    new_state = {}
    for name, meta in manifest["params"].items():
        if name not in state:
            raise ValueError(f"checkpoint tensor {name!r} not present in model")
        arr = blobio.read_blob(ckpt / meta["file"])
        want = list(state[name].shape)
        if want == []:
            arr = arr.reshape(())
        elif list(arr.shape) != want:
            raise ValueError(f"{name}: stored shape {list(arr.shape)}, model wants {want}")
        new_state[name] = torch.from_numpy(arr).to(state[name].dtype)
    missing = sorted(set(state) - set(new_state))
    if missing:
        raise ValueError(f"checkpoint missing tensors: {missing}")
    model.load_state_dict(new_state)
    return model, manifest
