"""Goal-driven neural social force: learned relaxation time and interaction strengths
driving an explicit-Euler rollout toward a sampled goal.

The physics layer (desired velocity, goal attraction, potentials and their
analytic gradients) is written once in torch and works on any leading batch
shape; thin numpy wrappers expose single-vehicle versions.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import Tensor, nn
from torch.nn import functional as F

from . import nn as gnn
from .goalnet import TrainingDiverged
from .trajdata import LaneGeometry, LineKind, TrajectoryWindow, VehicleState, window_lanes

logger = logging.getLogger(__name__)

EPS_POS = 1e-6
EPS_LINE = 0.1
TAU_MIN = 0.05


class RolloutError(FloatingPointError):
    def __init__(self, step: int, breakdown: dict):
        super().__init__(f"non-finite state at rollout step {step}; last forces: {breakdown}")
        self.step = step
        self.breakdown = breakdown


@dataclass
class NSFConfig:
    r_col: float = 5.0
    a: float = 5.0
    eps_line: float = EPS_LINE
    eps_pos: float = EPS_POS
    tau_min: float = TAU_MIN
    history: int = 5
    hidden: int = 64
    position_scale: float = 50.0
    velocity_scale: float = 30.0
    lane_scale: float = 3.7
    k_bias_init: float = -4.0
    rate: float = 3e-3
    epochs_phase1: int = 25
    epochs_phase2: int = 25
    batch_size: int = 128
    seed: int = gnn.DEFAULT_SEED
    phase2: bool = True
    joint_phase2: bool = False


# ---------------------------------------------------------------------------
# Physics layer
# ---------------------------------------------------------------------------


def desired_velocity_t(p: Tensor, goal: Tensor, steps_left, dt: float, eps: float = EPS_POS):
    diff = goal - p
    dist = torch.sqrt((diff**2).sum(-1).clamp_min(eps**2))
    ok = ((diff**2).sum(-1) > eps**2).unsqueeze(-1)
    e = torch.where(ok, diff / dist.unsqueeze(-1), torch.zeros_like(diff))
    v0 = torch.where(ok.squeeze(-1), dist, torch.zeros_like(dist)) / (steps_left * dt)
    return v0, e, v0.unsqueeze(-1) * e


def vehicle_repulsion_t(p: Tensor, nbr_p: Tensor, k: Tensor, r_col: float, eps: float = EPS_POS) -> Tensor:
    """Per-neighbor force ``k exp(-|r|/r_col) r/|r|`` with ``r = p - p_j``; shape ``(..., N, 2)``."""
    r = p.unsqueeze(-2) - nbr_p
    sq = (r**2).sum(-1)
    coincident = sq < eps**2
    dist = torch.sqrt(sq.clamp_min(eps**2))
    away = torch.where(r[..., 1] < 0, -1.0, 1.0).to(r.dtype)
    lateral = torch.stack([torch.zeros_like(away), away], -1)
    direction = torch.where(coincident.unsqueeze(-1), lateral, r / dist.unsqueeze(-1))
    return (k * torch.exp(-dist / r_col)).unsqueeze(-1) * direction


def line_repulsion_t(
    y: Tensor, offsets: Tensor, is_center: Tensor, k: Tensor, eps_line: float = EPS_LINE, interior: Tensor | None = None
) -> Tensor:
    """Lateral force from each line; shape ``(..., n_lines, 2)``.

    Center lines: ``2 k d exp(-d^2)``; boundary lines: ``k / d^3`` with d
    clamped below at ``eps_line``. Direction is away from the line, or toward
    ``interior`` (+1/-1 per line) for a vehicle exactly on a boundary.
    """
    s = y.unsqueeze(-1) - offsets
    d = s.abs()
    if interior is None:
        interior = torch.ones_like(s)
    side = torch.where(s > 0, 1.0, torch.where(s < 0, -1.0, interior)).to(s.dtype)
    center_mag = 2.0 * k * d * torch.exp(-(d**2))
    boundary_mag = k / d.clamp_min(eps_line) ** 3
    mag = torch.where(is_center, center_mag, boundary_mag)
    fy = mag * side
    return torch.stack([torch.zeros_like(fy), fy], -1)


def desired_velocity(p_t, p_T, t: int, T: int, dt: float, eps: float = EPS_POS):
    """Returns ``(v0, e, v_des)`` for the current position and goal."""
    if t >= T:
        raise ValueError(f"desired_velocity needs t < T (got t={t}, T={T})")
    v0, e, v_des = desired_velocity_t(gnn.as_tensor(p_t), gnn.as_tensor(p_T), T - t, dt, eps)
    return float(v0), e.numpy(), v_des.numpy()


def goal_force(state: VehicleState, goal, t: int, T: int, dt: float, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ValueError(f"relaxation time must be positive, got {tau}")
    _, _, v_des = desired_velocity(state.position, goal, t, T, dt)
    return (v_des - state.velocity) / tau


def vehicle_potential(r_nj, k_nj: float, r_col: float) -> float:
    return r_col * k_nj * math.exp(-float(np.hypot(*np.asarray(r_nj, dtype=float))) / r_col)


def line_potential(d_nl: float, kind: LineKind | str, k_nl: float, eps_line: float = EPS_LINE, events: list | None = None) -> float:
    kind = LineKind(kind)
    if kind is LineKind.CENTER:
        return k_nl * math.exp(-(d_nl**2))
    if d_nl < eps_line:
        if events is not None:
            events.append(("boundary_clamp", d_nl))
        d_nl = eps_line
    return k_nl * 0.5 / d_nl**2


def total_potential(position, neighbor_positions, k_vehicle, lanes: LaneGeometry, k_line, r_col: float, eps_line=EPS_LINE) -> float:
    p = np.asarray(position, dtype=float)
    u = sum(vehicle_potential(p - np.asarray(q), k, r_col) for q, k in zip(neighbor_positions, k_vehicle))
    for off, kind, k in zip(lanes.offsets, lanes.kinds, k_line):
        u += line_potential(abs(p[1] - off), kind, k, eps_line)
    return float(u)


def _interior(offsets: Tensor, mask: Tensor | None = None) -> Tensor:
    valid = offsets if mask is None else torch.where(mask, offsets, torch.full_like(offsets, float("inf")))
    lowest = valid.min(-1, keepdim=True).values
    return torch.where(offsets <= lowest, 1.0, -1.0).to(offsets.dtype)


def repulsion_force(
    state: VehicleState,
    neighbor_positions,
    lanes: LaneGeometry,
    k_vehicle,
    k_line,
    r_col: float,
    eps_line: float = EPS_LINE,
    events: list | None = None,
) -> tuple[np.ndarray, dict]:
    """Total repulsive acceleration and its per-source breakdown for one vehicle."""
    p = gnn.as_tensor(state.position)
    nbr = gnn.as_tensor(np.asarray(neighbor_positions, dtype=float).reshape(-1, 2))
    f_veh = vehicle_repulsion_t(p, nbr, gnn.as_tensor(np.asarray(k_vehicle, dtype=float)), r_col)
    offsets = gnn.as_tensor(lanes.offsets)
    if events is not None:
        dists = np.abs(state.position[1] - np.asarray(lanes.offsets))
        for i in np.flatnonzero((dists < eps_line) & ~lanes.is_center):
            events.append(("boundary_clamp", int(i)))
        if len(nbr) and np.any(np.hypot(*(state.position - nbr.numpy()).T) < EPS_POS):
            events.append(("coincident_vehicle", None))
    f_line = line_repulsion_t(
        p[1], offsets, torch.as_tensor(lanes.is_center), gnn.as_tensor(np.asarray(k_line, dtype=float)), eps_line, _interior(offsets)
    )
    total = f_veh.sum(0) + f_line.sum(0)
    return total.numpy(), {"vehicles": f_veh.numpy(), "lines": f_line.numpy()}


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


def _state_features(states: Tensor, cfg: NSFConfig) -> Tensor:
    return torch.cat([states[..., :2] / cfg.position_scale, states[..., 2:4] / cfg.velocity_scale], -1)


class TauNetwork(nn.Module):
    """State encoder -> LSTM over a short history -> concat with goal embedding -> MLP."""

    def __init__(self, cfg: NSFConfig):
        super().__init__()
        H = cfg.hidden
        self.cfg = cfg
        self.state_enc = gnn.Linear(4, H)
        self.lstm = gnn.LSTMCell(H, H)
        self.lstm_out = gnn.Linear(H, H)
        self.goal_enc = gnn.Linear(2, H)
        self.head = gnn.MLP([2 * H, H, 1])

    def forward(self, history: Tensor, goal: Tensor) -> Tensor:
        state = self.lstm.zero_state(history.shape[:-2], history.dtype)
        for j in range(history.shape[-2]):
            state = self.lstm(torch.relu(self.state_enc(_state_features(history[..., j, :], self.cfg))), state)
        rel_goal = (goal - history[..., -1, :2]) / self.cfg.position_scale
        z = torch.cat([self.lstm_out(state[0]), self.goal_enc(rel_goal)], -1)
        raw = self.head(torch.relu(z)).squeeze(-1)
        return self.cfg.tau_min + F.softplus(raw)


class KNetwork(nn.Module):
    """Per-neighbor and per-line strengths ``a * sigmoid(.)`` from pairwise encodings."""

    def __init__(self, cfg: NSFConfig):
        super().__init__()
        H = cfg.hidden
        self.cfg = cfg
        self.target_enc = gnn.MLP([4, H, H])
        self.neighbor_enc = gnn.MLP([4, H, H])
        self.line_enc = gnn.MLP([3, H, H])
        self.vehicle_head = gnn.MLP([2 * H, H, 1])
        self.line_head = gnn.MLP([2 * H, H, 1])
        with torch.no_grad():
            for head in (self.vehicle_head, self.line_head):
                head.last.weight.mul_(0.1)
                head.last.bias.fill_(cfg.k_bias_init)

    def forward(self, target: Tensor, neighbors: Tensor, line_offsets: Tensor, line_is_center: Tensor):
        cfg = self.cfg
        t = torch.relu(self.target_enc(_state_features(target, cfg)))
        rel = torch.cat(
            [
                (neighbors[..., :2] - target[..., None, :2]) / cfg.position_scale,
                (neighbors[..., 2:4] - target[..., None, 2:4]) / cfg.velocity_scale,
            ],
            -1,
        )
        nb = torch.relu(self.neighbor_enc(rel))
        k_veh = self.vehicle_head(torch.cat([t.unsqueeze(-2).expand_as(nb), nb], -1)).squeeze(-1)
        signed = (target[..., 1:2] - line_offsets) / cfg.lane_scale
        center = line_is_center.to(signed.dtype)
        lf = torch.relu(self.line_enc(torch.stack([signed, center, 1.0 - center], -1)))
        k_line = self.line_head(torch.cat([t.unsqueeze(-2).expand_as(lf), lf], -1)).squeeze(-1)
        return cfg.a * torch.sigmoid(k_veh), cfg.a * torch.sigmoid(k_line)


# ---------------------------------------------------------------------------
# Batches and rollout
# ---------------------------------------------------------------------------


@dataclass
class ForceBatch:
    observed: Tensor  # (B, T_obs, 4)
    future: Tensor  # (B, T_pred, 4)
    neighbors: Tensor  # (B, N, 4) last observed neighbor states
    neighbor_mask: Tensor  # (B, N)
    line_offsets: Tensor  # (B, n_lines)
    line_is_center: Tensor  # (B, n_lines)
    line_mask: Tensor  # (B, n_lines)
    dt: float
    neighbor_ids: np.ndarray | None = None

    def __len__(self) -> int:
        return self.observed.shape[0]

    @property
    def T_pred(self) -> int:
        return self.future.shape[1]

    @property
    def goal(self) -> Tensor:
        return self.future[:, -1, :2]

    def subset(self, idx) -> "ForceBatch":
        return ForceBatch(
            self.observed[idx], self.future[idx], self.neighbors[idx], self.neighbor_mask[idx],
            self.line_offsets[idx], self.line_is_center[idx], self.line_mask[idx], self.dt,
            None if self.neighbor_ids is None else self.neighbor_ids[np.asarray(idx)],
        )

    def repeat(self, K: int) -> "ForceBatch":
        """Each sample repeated K times consecutively."""
        idx = torch.arange(len(self)).repeat_interleave(K)
        return self.subset(idx)


def make_force_batch(windows: Sequence[TrajectoryWindow], lanes: Mapping[str, LaneGeometry] | LaneGeometry) -> ForceBatch:
    dts = {w.dt for w in windows}
    if len(dts) != 1:
        raise ValueError(f"windows mix frame intervals {sorted(dts)}")
    per_window = [window_lanes(w, lanes if isinstance(lanes, LaneGeometry) else lanes[w.lane_ref]) for w in windows]
    n_lines = max(len(g) for g in per_window)
    offsets = np.zeros((len(windows), n_lines))
    centers = np.zeros((len(windows), n_lines), dtype=bool)
    lmask = np.zeros((len(windows), n_lines), dtype=bool)
    for i, g in enumerate(per_window):
        offsets[i, : len(g)] = g.offsets
        centers[i, : len(g)] = g.is_center
        lmask[i, : len(g)] = True
    return ForceBatch(
        observed=gnn.as_tensor(np.stack([w.observed for w in windows])),
        future=gnn.as_tensor(np.stack([w.future for w in windows])),
        neighbors=gnn.as_tensor(np.stack([w.neighbors[:, -1, :] for w in windows])),
        neighbor_mask=torch.as_tensor(np.stack([w.neighbor_mask for w in windows])),
        line_offsets=gnn.as_tensor(offsets),
        line_is_center=torch.as_tensor(centers),
        line_mask=torch.as_tensor(lmask),
        dt=float(dts.pop()),
        neighbor_ids=np.array([w.neighbor_ids for w in windows]),
    )


@dataclass
class ForceBreakdown:
    step: int
    f_goal: np.ndarray
    f_rep_vehicles: list[tuple[int, np.ndarray]]
    f_rep_lines: list[tuple[int, np.ndarray]]
    tau: float
    k_vehicle: list[float]
    k_line: list[float]
    v0: float
    e: np.ndarray
    acceleration: np.ndarray

    @property
    def f_rep(self) -> np.ndarray:
        total = np.zeros(2)
        for _, f in self.f_rep_vehicles:
            total = total + f
        for _, f in self.f_rep_lines:
            total = total + f
        return total


@dataclass
class RolloutResult:
    positions: np.ndarray  # (T_pred, 2)
    velocities: np.ndarray  # (T_pred, 2)
    breakdowns: list[ForceBreakdown] = field(default_factory=list)


class NeuralSocialForce(nn.Module):
    def __init__(self, cfg: NSFConfig = NSFConfig(), fixed_tau: float | None = None):
        super().__init__()
        torch.manual_seed(cfg.seed)
        self.cfg = cfg
        self.tau_net = TauNetwork(cfg)
        self.k_net = KNetwork(cfg)
        self.fixed_tau = fixed_tau
        self.fixed_k: tuple[float, float] | None = None

    def _tau(self, history: Tensor, goal: Tensor) -> Tensor:
        if self.fixed_tau is not None:
            return torch.full(history.shape[:-2], float(self.fixed_tau), dtype=history.dtype)
        return self.tau_net(history, goal)

    def _k(self, state, nbr, offsets, is_center):
        if self.fixed_k is not None:
            kv, kl = self.fixed_k
            return torch.full(nbr.shape[:-1], kv, dtype=state.dtype), torch.full(offsets.shape, kl, dtype=state.dtype)
        return self.k_net(state, nbr, offsets, is_center)

    def rollout_batch(
        self, batch: ForceBatch, goals: Tensor, repulsion: bool = True, record: bool = False
    ) -> tuple[Tensor, Tensor, list[dict]]:
        """Integrate ``T_pred`` explicit-Euler steps; returns positions, velocities ``(B, T_pred, 2)``."""
        cfg = self.cfg
        dt, T = batch.dt, batch.T_pred
        M = cfg.history + 1
        obs = batch.observed
        if obs.shape[1] < M:
            obs = torch.cat([obs[:, :1].expand(-1, M - obs.shape[1], -1), obs], 1)
        history = [obs[:, j] for j in range(obs.shape[1] - M, obs.shape[1])]
        p, v = obs[:, -1, :2], obs[:, -1, 2:4]
        nmask = batch.neighbor_mask.to(p.dtype).unsqueeze(-1)
        lmask = batch.line_mask.to(p.dtype).unsqueeze(-1)
        interior = _interior(batch.line_offsets, batch.line_mask)
        positions, velocities, records = [], [], []
        for i in range(T):
            tau = self._tau(torch.stack(history[-M:], 1), goals)
            v0, e, v_des = desired_velocity_t(p, goals, T - i, dt, cfg.eps_pos)
            f_goal = (v_des - v) / tau.unsqueeze(-1)
            acc = f_goal
            rec = None
            if repulsion:
                nbr = batch.neighbors.clone()
                nbr[..., :2] = batch.neighbors[..., :2] + batch.neighbors[..., 2:4] * (i * dt)
                state = torch.cat([p, v], -1)
                k_veh, k_line = self._k(state, nbr, batch.line_offsets, batch.line_is_center)
                f_veh = vehicle_repulsion_t(p, nbr[..., :2], k_veh, cfg.r_col, cfg.eps_pos) * nmask
                f_line = line_repulsion_t(
                    p[:, 1], batch.line_offsets, batch.line_is_center, k_line, cfg.eps_line, interior
                ) * lmask
                acc = f_goal + f_veh.sum(1) + f_line.sum(1)
                if record:
                    rec = dict(f_vehicles=f_veh, f_lines=f_line, k_vehicle=k_veh, k_line=k_line)
            if record:
                rec = rec or {}
                rec.update(step=i, f_goal=f_goal, tau=tau, v0=v0, e=e, acceleration=acc, position=p, velocity=v)
                records.append({k: (val.detach() if isinstance(val, Tensor) else val) for k, val in rec.items()})
            p, v = p + v * dt, v + acc * dt
            if not (torch.isfinite(p).all() and torch.isfinite(v).all()):
                dump = {
                    "tau": tau.detach().tolist(),
                    "f_goal": f_goal.detach().tolist(),
                    "acceleration": acc.detach().tolist(),
                }
                raise RolloutError(i, dump)
            history.append(torch.cat([p, v], -1))
            positions.append(p)
            velocities.append(v)
        return torch.stack(positions, 1), torch.stack(velocities, 1), records


def _breakdowns(records: list[dict], batch: ForceBatch, row: int) -> list[ForceBreakdown]:
    out = []
    ids = batch.neighbor_ids[row] if batch.neighbor_ids is not None else None
    nmask = batch.neighbor_mask[row].numpy()
    lmask = batch.line_mask[row].numpy()
    for rec in records:
        veh, lines, kv, kl = [], [], [], []
        if "f_vehicles" in rec:
            for j in np.flatnonzero(nmask):
                veh.append((int(ids[j]) if ids is not None else int(j), rec["f_vehicles"][row, j].numpy()))
                kv.append(float(rec["k_vehicle"][row, j]))
            for j in np.flatnonzero(lmask):
                lines.append((int(j), rec["f_lines"][row, j].numpy()))
                kl.append(float(rec["k_line"][row, j]))
        out.append(
            ForceBreakdown(
                step=rec["step"],
                f_goal=rec["f_goal"][row].numpy(),
                f_rep_vehicles=veh,
                f_rep_lines=lines,
                tau=float(rec["tau"][row]),
                k_vehicle=kv,
                k_line=kl,
                v0=float(rec["v0"][row]),
                e=rec["e"][row].numpy(),
                acceleration=rec["acceleration"][row].numpy(),
            )
        )
    return out


@torch.no_grad()
def rollout(
    window: TrajectoryWindow,
    goal,
    model: NeuralSocialForce,
    lanes: LaneGeometry | Mapping[str, LaneGeometry],
    repulsion: bool = True,
) -> RolloutResult:
    """Single-window rollout with a per-step force record."""
    batch = make_force_batch([window], lanes)
    pos, vel, records = model.rollout_batch(batch, gnn.as_tensor(np.asarray(goal, dtype=float)).reshape(1, 2), repulsion, record=True)
    return RolloutResult(pos[0].numpy(), vel[0].numpy(), _breakdowns(records, batch, 0))


@torch.no_grad()
def rollout_hypotheses(
    model: NeuralSocialForce, batch: ForceBatch, goals: np.ndarray, repulsion: bool = True, chunk: int = 512
) -> np.ndarray:
    """Rollouts for ``goals`` of shape ``(B, K, 2)``; returns ``(B, K, T_pred, 2)``."""
    B, K, _ = goals.shape
    rep = batch.repeat(K)
    flat_goals = gnn.as_tensor(goals.reshape(B * K, 2))
    out = []
    for start in range(0, B * K, chunk):
        idx = torch.arange(start, min(start + chunk, B * K))
        pos, _, _ = model.rollout_batch(rep.subset(idx), flat_goals[idx], repulsion)
        out.append(pos)
    return torch.cat(out).reshape(B, K, batch.T_pred, 2).numpy()


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def rollout_loss(model: NeuralSocialForce, batch: ForceBatch, goals: Tensor, repulsion: bool) -> Tensor:
    pos, _, _ = model.rollout_batch(batch, goals, repulsion)
    return ((pos - batch.future[..., :2]) ** 2).sum(-1).mean()


@torch.no_grad()
def _full_loss(model, batch, goals, repulsion, chunk=512) -> float:
    total = 0.0
    for start in range(0, len(batch), chunk):
        idx = torch.arange(start, min(start + chunk, len(batch)))
        total += rollout_loss(model, batch.subset(idx), goals[idx], repulsion).item() * len(idx)
    return total / len(batch)


def _train_phase(model, batch, goals, params, repulsion, epochs, cfg, gen, phase) -> list[dict]:
    store = gnn.ParamStore(model, cfg.rate, gnn.AdamHyperparams(grad_clip=10.0), params=params)
    best_loss = _full_loss(model, batch, goals, repulsion)
    best_state = copy.deepcopy(model.state_dict())
    curve = [{"phase": phase, "epoch": 0, "loss": best_loss}]
    n = len(batch)
    for epoch in range(1, epochs + 1):
        perm = torch.randperm(n, generator=gen)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            store.zero_grad()
            loss = rollout_loss(model, batch.subset(idx), goals[idx], repulsion)
            if not torch.isfinite(loss):
                model.load_state_dict(best_state)
                raise TrainingDiverged(f"phase {phase} loss became non-finite at epoch {epoch}", best_state)
            loss.backward()
            gnn.optimize_step(store)
        epoch_loss = _full_loss(model, batch, goals, repulsion)
        curve.append({"phase": phase, "epoch": epoch, "loss": epoch_loss})
        logger.debug("nsf phase %d epoch %d: %.5f", phase, epoch, epoch_loss)
        if epoch_loss < best_loss:
            best_loss, best_state = epoch_loss, copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    return curve


def train_nsf(
    windows: Sequence[TrajectoryWindow],
    lanes: LaneGeometry | Mapping[str, LaneGeometry],
    cfg: NSFConfig = NSFConfig(),
    goals: np.ndarray | None = None,
) -> tuple[NeuralSocialForce, list[dict], dict]:
    """Progressive training: phase 1 fits the relaxation-time network with
    repulsion off, phase 2 fits the interaction-strength network with all forces.

    Goals default to the ground-truth final positions. Each phase keeps the
    parameters of its lowest full-data loss epoch. Returns the model, the loss
    curve and a copy of the state dict after phase 1.
    """
    model = NeuralSocialForce(cfg)
    batch = make_force_batch(windows, lanes)
    goal_t = batch.goal if goals is None else gnn.as_tensor(goals)
    gen = torch.Generator().manual_seed(cfg.seed)
    curve = _train_phase(model, batch, goal_t, list(model.tau_net.parameters()), False, cfg.epochs_phase1, cfg, gen, 1)
    phase1_state = copy.deepcopy(model.state_dict())
    if cfg.phase2 and cfg.epochs_phase2 > 0:
        params = list(model.k_net.parameters())
        if cfg.joint_phase2:
            params += list(model.tau_net.parameters())
        curve += _train_phase(model, batch, goal_t, params, True, cfg.epochs_phase2, cfg, gen, 2)
    return model, curve, phase1_state


def breakdown_rows(result: RolloutResult) -> list[dict]:
    rows = []
    for b in result.breakdowns:
        rep = b.f_rep
        rows.append(
            dict(step=b.step, fx_goal=b.f_goal[0], fy_goal=b.f_goal[1], fx_rep=rep[0], fy_rep=rep[1], tau=b.tau, v0=b.v0)
        )
    return rows


def export_breakdown(result: RolloutResult, csv_path: str | Path, jsonl_path: str | Path | None = None) -> None:
    cols = ("step", "fx_goal", "fy_goal", "fx_rep", "fy_rep", "tau", "v0")
    with open(csv_path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in breakdown_rows(result):
            fh.write(",".join(repr(float(row[c])) if c != "step" else str(row[c]) for c in cols) + "\n")
    if jsonl_path is not None:
        with open(jsonl_path, "w") as fh:
            for b in result.breakdowns:
                fh.write(
                    json.dumps(
                        {
                            "step": b.step,
                            "f_goal": b.f_goal.tolist(),
                            "vehicles": [{"id": i, "force": f.tolist()} for i, f in b.f_rep_vehicles],
                            "lines": [{"index": i, "force": f.tolist()} for i, f in b.f_rep_lines],
                            "tau": b.tau,
                            "k_vehicle": b.k_vehicle,
                            "k_line": b.k_line,
                            "v0": b.v0,
                            "e": b.e.tolist(),
                            "acceleration": b.acceleration.tolist(),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )


def config_dict(cfg: NSFConfig) -> dict:
    return asdict(cfg)
