"""Small differentiable building blocks on top of torch autograd.

Layers here carry the shape and finiteness contracts the goal and force
networks rely on; gradients come from torch's reverse mode.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import torch
from torch import Tensor, nn
from torch.nn import functional as F

DTYPE = torch.float64
DEFAULT_SEED = 42

CHECKPOINT_MAGIC = b"GNPCKPT\0"
CHECKPOINT_VERSION = 1


class NonFiniteError(FloatingPointError):
    pass


class ShapeError(ValueError):
    pass


def check_finite(t: Tensor, name: str) -> Tensor:
    if not torch.isfinite(t).all():
        raise NonFiniteError(f"non-finite values in {name}")
    return t


def as_tensor(x, dtype=DTYPE) -> Tensor:
    if isinstance(x, Tensor):
        return x.to(dtype)
    return torch.as_tensor(np.array(x), dtype=dtype)


# ---------------------------------------------------------------------------
# Functional ops
# ---------------------------------------------------------------------------


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight + bias`` with ``weight`` shaped ``(in, out)``."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: input shape {tuple(x.shape)} incompatible with weight shape {tuple(weight.shape)}")
    out = x @ weight
    return out if bias is None else out + bias


def softmax(logits: Tensor, dim: int = -1, mask: Tensor | None = None) -> Tensor:
    if mask is not None:
        logits = logits.masked_fill(~mask, float("-inf"))
    return torch.softmax(logits, dim=dim)


def scaled_dot_product_attention(
    q: Tensor, k: Tensor, v: Tensor, key_mask: Tensor | None = None
) -> tuple[Tensor, Tensor]:
    """Attention over the second-to-last axis of ``k``/``v``.

    ``key_mask`` is True for valid key slots and broadcasts against the score
    tensor ``(..., n_query, n_key)`` after inserting the query axis.
    """
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    mask = None
    if key_mask is not None:
        mask = key_mask.unsqueeze(-2).expand_as(scores)
        if not mask.any(-1).all():
            raise ValueError("degenerate attention: every key is masked for at least one query")
    weights = softmax(scores, -1, mask)
    return weights @ v, weights


def huber(pred: Tensor, target: Tensor, delta: float = 1.0) -> Tensor:
    return F.huber_loss(pred, target, delta=delta)


def soft_cross_entropy(logits: Tensor, target_probs: Tensor) -> Tensor:
    return -(target_probs * torch.log_softmax(logits, dim=-1)).sum(-1).mean()


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


class Linear(nn.Module):
    """Fan-in scaled uniform initialization, weight stored as ``(in, out)``."""

    def __init__(self, in_features: int, out_features: int, bias: bool = True):
        super().__init__()
        bound = 1.0 / math.sqrt(in_features)
        self.weight = nn.Parameter(torch.empty(in_features, out_features, dtype=DTYPE).uniform_(-bound, bound))
        self.bias = (
            nn.Parameter(torch.empty(out_features, dtype=DTYPE).uniform_(-bound, bound)) if bias else None
        )

    def forward(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)

    def zero_(self) -> "Linear":
        with torch.no_grad():
            self.weight.zero_()
            if self.bias is not None:
                self.bias.zero_()
        return self


class MLP(nn.Module):
    def __init__(self, sizes: Iterable[int], activation=F.relu):
        super().__init__()
        sizes = list(sizes)
        self.layers = nn.ModuleList(Linear(a, b) for a, b in zip(sizes[:-1], sizes[1:]))
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.activation(x)
        return x

    @property
    def last(self) -> Linear:
        return self.layers[-1]


class LayerNorm(nn.Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim, dtype=DTYPE))
        self.bias = nn.Parameter(torch.zeros(dim, dtype=DTYPE))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, x.shape[-1:], self.weight, self.bias, self.eps)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        if d_model % heads:
            raise ShapeError(f"model width {d_model} is not divisible by head count {heads}")
        self.heads = heads
        self.q_proj = Linear(d_model, d_model)
        self.k_proj = Linear(d_model, d_model)
        self.v_proj = Linear(d_model, d_model)
        self.out_proj = Linear(d_model, d_model)

    def _split(self, x: Tensor) -> Tensor:
        *lead, n, d = x.shape
        return x.reshape(*lead, n, self.heads, d // self.heads).transpose(-3, -2)

    def forward(
        self, queries: Tensor, keys: Tensor, values: Tensor, key_mask: Tensor | None = None, return_weights=False
    ):
        q = self._split(self.q_proj(queries))
        k = self._split(self.k_proj(keys))
        v = self._split(self.v_proj(values))
        mask = None if key_mask is None else key_mask.unsqueeze(-2)  # broadcast over heads
        out, weights = scaled_dot_product_attention(q, k, v, mask)
        out = out.transpose(-3, -2)
        out = self.out_proj(out.reshape(*out.shape[:-2], -1))
        return (out, weights) if return_weights else out


def multi_head_attention(
    queries: Tensor, keys: Tensor, values: Tensor, mask: Tensor | None, head_count: int, layer: MultiHeadAttention | None = None
) -> Tensor:
    """Functional entry point; builds a fresh layer when none is supplied."""
    if layer is None:
        layer = MultiHeadAttention(queries.shape[-1], head_count)
    elif layer.heads != head_count:
        raise ShapeError(f"layer has {layer.heads} heads, asked for {head_count}")
    return layer(queries, keys, values, mask)


class LSTMCell(nn.Module):
    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.hidden_size = hidden_size
        self.input_map = Linear(input_size, 4 * hidden_size)
        self.hidden_map = Linear(hidden_size, 4 * hidden_size, bias=False)

    def zero_state(self, batch_shape, dtype=DTYPE) -> tuple[Tensor, Tensor]:
        z = torch.zeros(*batch_shape, self.hidden_size, dtype=dtype)
        return z, z.clone()

    def forward(self, x: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        h, c = state
        if h.shape[-1] != self.hidden_size or c.shape != h.shape:
            raise ShapeError(f"LSTM state shapes {tuple(h.shape)}, {tuple(c.shape)} do not match hidden size {self.hidden_size}")
        gates = self.input_map(x) + self.hidden_map(h)
        i, f, g, o = gates.chunk(4, dim=-1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
        return h, c


def lstm_step(state: tuple[Tensor, Tensor], x: Tensor, cell: LSTMCell) -> tuple[Tensor, Tensor]:
    return cell(x, state)


def zero_parameters(module: nn.Module) -> nn.Module:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


# ---------------------------------------------------------------------------
# Parameters and optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdamHyperparams:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = None


class ParamStore:
    """Named parameters of a module plus the optimizer state that updates them."""

    def __init__(self, module: nn.Module, rate: float, hyper: AdamHyperparams = AdamHyperparams(), params=None):
        self.module = module
        self.hyper = hyper
        named = dict(module.named_parameters())
        if params is not None:
            keep = {id(p) for p in params}
            named = {k: v for k, v in named.items() if id(v) in keep}
        self.named = named
        self.optimizer = torch.optim.Adam(
            list(named.values()), lr=rate, betas=(hyper.beta1, hyper.beta2), eps=hyper.eps
        )
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.named.values():
            p.grad = torch.zeros_like(p)

    def gradients(self) -> dict[str, Tensor]:
        return {k: (p.grad if p.grad is not None else torch.zeros_like(p)) for k, p in self.named.items()}


def optimize_step(store: ParamStore, rate: float | None = None) -> ParamStore:
    """One adaptive-moment update; refuses to apply non-finite gradients."""
    for name, p in store.named.items():
        if p.grad is None:
            p.grad = torch.zeros_like(p)
        if not torch.isfinite(p.grad).all():
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
    if store.hyper.grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(list(store.named.values()), store.hyper.grad_clip)
    if rate is not None:
        for group in store.optimizer.param_groups:
            group["lr"] = rate
    store.optimizer.step()
    store.step_count += 1
    return store


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------
#
# Layout (all integers little-endian):
#   8 bytes   magic b"GNPCKPT\0"
#   4 bytes   uint32 format version
#   8 bytes   uint64 header length H
#   H bytes   UTF-8 JSON header: {"meta": {...}, "tensors": [{"name", "dtype",
#             "shape", "offset", "nbytes"}, ...]} with sorted keys
#   rest      concatenated raw tensor payloads, C order, little-endian;
#             "offset" counts from the first payload byte


def save_checkpoint(path: str | Path, tensors: Mapping[str, Tensor | np.ndarray], meta: Mapping | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name in sorted(tensors):
        arr = tensors[name]
        arr = arr.detach().cpu().numpy() if isinstance(arr, Tensor) else np.asarray(arr)
        arr = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
        blob = arr.tobytes()
        entries.append(
            {"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": dict(meta or {}), "tensors": entries}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[20 : 20 + hlen])
    base = 20 + hlen
    tensors = {}
    for e in header["tensors"]:
        raw = data[base + e["offset"] : base + e["offset"] + e["nbytes"]]
        tensors[e["name"]] = np.frombuffer(raw, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return tensors, header["meta"]


def save_module(path: str | Path, module: nn.Module, meta: Mapping | None = None) -> None:
    save_checkpoint(path, module.state_dict(), meta)


def load_module_state(module: nn.Module, tensors: Mapping[str, np.ndarray]) -> nn.Module:
    state = {k: torch.from_numpy(v) for k, v in tensors.items()}
    module.load_state_dict(state)
    return module
