"""Goal prediction: mode-level transformer encoder, social decoder and dual heads."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch
from torch import Tensor, nn

from . import nn as gnn
from .modes import IntentionModeSet, nearest_mode, soft_probabilities
from .trajdata import TrajectoryWindow

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, last_good_state: dict | None = None):
        super().__init__(message)
        self.last_good_state = last_good_state


@dataclass
class GoalNetConfig:
    d_model: int = 64
    heads: int = 4
    blocks: int = 2
    ffn: int = 256
    lam: float = 1.0
    rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 32
    seed: int = gnn.DEFAULT_SEED
    huber_delta: float = 1.0
    basis: str = "endpoint"
    position_scale: float = 50.0
    offset_scale: float = 5.0


@dataclass(frozen=True)
class EncoderInput:
    mode_embedding: Tensor  # (L, D)
    observation_embedding: Tensor  # (B, D)
    combined: Tensor  # (B, L, D)


@dataclass(frozen=True)
class GoalHypothesisSet:
    goals: np.ndarray  # (K, 2)
    probabilities: np.ndarray  # (K,) renormalized over the reported subset
    raw_probabilities: np.ndarray  # (K,) as predicted over all L modes
    source_mode: np.ndarray  # (K,)

    def __len__(self) -> int:
        return len(self.goals)


class EncoderBlock(nn.Module):
    def __init__(self, d: int, heads: int, ffn: int):
        super().__init__()
        self.norm_attn = gnn.LayerNorm(d)
        self.attn = gnn.MultiHeadAttention(d, heads)
        self.norm_ffn = gnn.LayerNorm(d)
        self.ffn = gnn.MLP([d, ffn, d])

    def forward(self, x: Tensor) -> Tensor:
        h = self.norm_attn(x)
        x = x + self.attn(h, h, h)
        return x + self.ffn(self.norm_ffn(x))


class SocialDecoderBlock(nn.Module):
    """Cross-attention from mode slots to neighbor embeddings; no self-attention."""

    def __init__(self, d: int, heads: int, ffn: int):
        super().__init__()
        self.norm_query = gnn.LayerNorm(d)
        self.norm_keys = gnn.LayerNorm(d)
        self.attn = gnn.MultiHeadAttention(d, heads)
        self.norm_ffn = gnn.LayerNorm(d)
        self.ffn = gnn.MLP([d, ffn, d])

    def forward(self, memory: Tensor, neighbors: Tensor, mask: Tensor) -> Tensor:
        if mask.shape != neighbors.shape[:-1]:
            raise gnn.ShapeError(f"neighbor mask shape {tuple(mask.shape)} does not match embeddings {tuple(neighbors.shape)}")
        present = mask.any(-1)  # (B,)
        x = memory
        if present.any():
            safe_mask = mask | ~present[:, None]
            kv = self.norm_keys(neighbors)
            attended = self.attn(self.norm_query(memory), kv, kv, safe_mask)
            x = x + attended * present[:, None, None].to(attended.dtype)
        return x + self.ffn(self.norm_ffn(x))


class GoalNet(nn.Module):
    def __init__(self, modes: IntentionModeSet, T_obs: int, cfg: GoalNetConfig = GoalNetConfig()):
        super().__init__()
        torch.manual_seed(cfg.seed)
        self.cfg = cfg
        self.T_obs = T_obs
        self.register_buffer("centers", gnn.as_tensor(modes.centers))
        L, T_pred, _ = modes.centers.shape
        d = cfg.d_model
        self.mode_embed = gnn.Linear(2 * T_pred, d)  # W_c
        self.obs_embed = gnn.Linear(2 * T_obs, d)  # W_o
        self.social_embed = gnn.Linear(2 * T_obs, d)  # W_s
        self.encoder = nn.ModuleList(EncoderBlock(d, cfg.heads, cfg.ffn) for _ in range(cfg.blocks))
        self.decoder = SocialDecoderBlock(d, cfg.heads, cfg.ffn)
        self.prob_head = gnn.MLP([d, d, 1])
        self.goal_head = gnn.MLP([d, d, 2])
        self.goal_head.last.zero_()

    @property
    def L(self) -> int:
        return self.centers.shape[0]

    def embed_inputs(self, observed: Tensor) -> EncoderInput:
        B = observed.shape[0]
        if observed.shape[1:] != (self.T_obs, 2):
            raise gnn.ShapeError(f"observed segment must be (B, {self.T_obs}, 2), got {tuple(observed.shape)}")
        s = self.cfg.position_scale
        e_c = self.mode_embed(self.centers.reshape(self.L, -1) / s)
        e_o = self.obs_embed(observed.reshape(B, -1) / s)
        return EncoderInput(e_c, e_o, e_c[None, :, :] + e_o[:, None, :])

    def encode(self, inputs: EncoderInput) -> Tensor:
        x = inputs.combined
        for block in self.encoder:
            x = block(x)
        return gnn.check_finite(x, "encoder output")

    def decode_social(self, memory: Tensor, neighbors: Tensor, mask: Tensor) -> Tensor:
        B, N = neighbors.shape[:2]
        if neighbors.shape[2:] != (self.T_obs, 2):
            raise gnn.ShapeError(f"neighbors must be (B, N, {self.T_obs}, 2), got {tuple(neighbors.shape)}")
        emb = self.social_embed(neighbors.reshape(B, N, -1) / self.cfg.position_scale)
        return gnn.check_finite(self.decoder(memory, emb, mask), "decoder output")

    def predict_heads(self, encoder_out: Tensor, decoder_out: Tensor) -> tuple[Tensor, Tensor]:
        """Returns goals ``(B, L, 2)`` anchored on mode endpoints and logits ``(B, L)``."""
        logits = self.prob_head(encoder_out).squeeze(-1)
        offsets = self.goal_head(decoder_out) * self.cfg.offset_scale
        goals = self.centers[:, -1, :][None] + offsets
        return goals, logits

    def forward(self, observed: Tensor, neighbors: Tensor, mask: Tensor) -> tuple[Tensor, Tensor]:
        memory = self.encode(self.embed_inputs(observed))
        return self.predict_heads(memory, self.decode_social(memory, neighbors, mask))


@dataclass
class GoalBatch:
    observed: Tensor  # (B, T_obs, 2)
    neighbors: Tensor  # (B, N, T_obs, 2)
    mask: Tensor  # (B, N)
    goal: Tensor  # (B, 2)
    future: Tensor  # (B, T_pred, 2)

    def __len__(self) -> int:
        return self.observed.shape[0]

    def subset(self, idx) -> "GoalBatch":
        return GoalBatch(self.observed[idx], self.neighbors[idx], self.mask[idx], self.goal[idx], self.future[idx])


def make_goal_batch(windows: Sequence[TrajectoryWindow]) -> GoalBatch:
    return GoalBatch(
        observed=gnn.as_tensor(np.stack([w.observed[:, :2] for w in windows])),
        neighbors=gnn.as_tensor(np.stack([w.neighbors[..., :2] for w in windows])),
        mask=torch.as_tensor(np.stack([w.neighbor_mask for w in windows])),
        goal=gnn.as_tensor(np.stack([w.goal for w in windows])),
        future=gnn.as_tensor(np.stack([w.future[:, :2] for w in windows])),
    )


def training_targets(window: TrajectoryWindow, modes: IntentionModeSet, basis: str = "endpoint"):
    query = window.goal if basis == "endpoint" else window.future[:, :2]
    return nearest_mode(query, modes, basis), soft_probabilities(query, modes, basis)


def _batch_targets(batch: GoalBatch, modes: IntentionModeSet, basis: str) -> tuple[Tensor, Tensor]:
    queries = batch.goal.numpy() if basis == "endpoint" else batch.future.numpy()
    idx = np.array([nearest_mode(q, modes, basis) for q in queries])
    soft = np.stack([soft_probabilities(q, modes, basis) for q in queries])
    return torch.as_tensor(idx), gnn.as_tensor(soft)


def goal_loss(
    model: GoalNet, batch: GoalBatch, target_idx: Tensor, soft: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """Total loss plus its Huber and cross-entropy parts."""
    goals, logits = model(batch.observed, batch.neighbors, batch.mask)
    chosen = goals[torch.arange(len(batch)), target_idx]
    reg = gnn.huber(chosen, batch.goal, model.cfg.huber_delta)
    ce = gnn.soft_cross_entropy(logits, soft)
    return reg + model.cfg.lam * ce, reg, ce


def train_goalnet(
    windows: Sequence[TrajectoryWindow], modes: IntentionModeSet, cfg: GoalNetConfig = GoalNetConfig()
) -> tuple[GoalNet, list[dict]]:
    """Greedy-target training; returns the model and per-epoch mean losses."""
    T_obs = windows[0].T_obs
    model = GoalNet(modes, T_obs, cfg)
    batch = make_goal_batch(windows)
    target_idx, soft = _batch_targets(batch, modes, cfg.basis)
    store = gnn.ParamStore(model, cfg.rate)
    gen = torch.Generator().manual_seed(cfg.seed)
    curve = []
    last_good = copy.deepcopy(model.state_dict())
    n = len(batch)
    for epoch in range(cfg.epochs):
        perm = torch.randperm(n, generator=gen)
        sums = np.zeros(3)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            store.zero_grad()
            total, reg, ce = goal_loss(model, batch.subset(idx), target_idx[idx], soft[idx])
            if not torch.isfinite(total):
                model.load_state_dict(last_good)
                raise TrainingDiverged(f"goal loss became non-finite at epoch {epoch}", last_good)
            total.backward()
            gnn.optimize_step(store)
            sums += len(idx) * np.array([total.item(), reg.item(), ce.item()])
        row = dict(zip(("loss", "huber", "cross_entropy"), (sums / n).tolist()), epoch=epoch)
        curve.append(row)
        last_good = copy.deepcopy(model.state_dict())
        logger.debug("goalnet epoch %d: %s", epoch, row)
    return model, curve


@torch.no_grad()
def predict_goals(model: GoalNet, windows: Sequence[TrajectoryWindow]) -> tuple[np.ndarray, np.ndarray]:
    """All L goals ``(B, L, 2)`` and probabilities ``(B, L)``."""
    batch = make_goal_batch(windows)
    goals, logits = model(batch.observed, batch.neighbors, batch.mask)
    return goals.numpy(), torch.softmax(logits, -1).numpy()


def top_k(goals: np.ndarray, probs: np.ndarray, K: int) -> GoalHypothesisSet:
    L = len(probs)
    if not 1 <= K <= L:
        raise ValueError(f"K must be in [1, {L}], got {K}")
    order = np.argsort(-probs, kind="stable")[:K]
    raw = probs[order]
    return GoalHypothesisSet(goals[order].copy(), raw / raw.sum(), raw.copy(), order.copy())


def sample_goals(window: TrajectoryWindow, model: GoalNet, K: int) -> GoalHypothesisSet:
    goals, probs = predict_goals(model, [window])
    return top_k(goals[0], probs[0], K)


def config_dict(cfg: GoalNetConfig) -> dict:
    return asdict(cfg)
