"""Seeded synthetic highway corpus: straight driving and left/right lane changes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .trajdata import (
    LaneGeometry,
    Track,
    TrajectoryDataset,
    finite_difference_velocity,
    write_canonical,
    write_lanes,
)

MANEUVERS = ("straight", "left", "right")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    lane_count: int = 3
    lane_width: float = 3.7
    duration: float = 8.0
    dt: float = 0.1
    vehicle_count: int = 500
    maneuver_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    speed_range: tuple[float, float] = (25.5, 26.5)
    seed: int = 0
    road_length: float | None = None  # None: 40 m of road per vehicle per lane
    min_gap: float = 10.0
    change_duration: tuple[float, float] = (4.0, 6.0)
    lateral_noise: float = 0.1
    longitudinal_noise: float = 1.0
    max_attempts: int = 200

    def __post_init__(self):
        mix = tuple(float(m) for m in self.maneuver_mix)
        object.__setattr__(self, "maneuver_mix", mix)
        if len(mix) != 3 or any(m < 0 for m in mix) or abs(sum(mix) - 1.0) > 1e-9:
            raise ValueError(f"maneuver_mix must be 3 non-negative fractions summing to 1, got {mix}")
        if self.lane_count < 2:
            raise ValueError("lane_count must be >= 2")
        if self.dt <= 0 or self.duration <= 0 or self.lane_width <= 0:
            raise ValueError("dt, duration and lane_width must be positive")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid speed_range {self.speed_range}")
        if self.lateral_noise > 0.1:
            raise ValueError("lateral_noise amplitude is capped at 0.1 m")

    @property
    def frame_count(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def effective_road_length(self) -> float:
        if self.road_length is not None:
            return float(self.road_length)
        return 40.0 * self.vehicle_count / self.lane_count


@dataclass(frozen=True)
class SyntheticCorpus:
    dataset: TrajectoryDataset
    labels: dict[int, str]
    lanes: LaneGeometry
    spec: ScenarioSpec


def quintic_blend(s: np.ndarray) -> np.ndarray:
    """0 -> 1 with zero first and second derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _smooth_noise(rng: np.random.Generator, t: np.ndarray, amplitude: float, periods: tuple[float, float]):
    if amplitude <= 0:
        return np.zeros_like(t)
    n = int(rng.integers(2, 4))
    weights = rng.dirichlet(np.ones(n)) * amplitude * rng.uniform(0.5, 1.0)
    omega = 2 * math.pi / rng.uniform(*periods, size=n)
    phase = rng.uniform(0, 2 * math.pi, size=n)
    wave = (weights[:, None] * np.sin(omega[:, None] * t[None, :] + phase[:, None])).sum(axis=0)
    return wave - wave[0]


def _vehicle_rng(spec: ScenarioSpec, vid: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed & 0xFFFFFFFFFFFFFFFF, vid, attempt])


def _draw_maneuver(spec: ScenarioSpec, vid: int) -> str:
    rng = np.random.default_rng([spec.seed & 0xFFFFFFFFFFFFFFFF, vid, 2**31])
    return MANEUVERS[int(rng.choice(3, p=np.asarray(spec.maneuver_mix)))]


def _draw_path(spec: ScenarioSpec, maneuver: str, rng: np.random.Generator, t: np.ndarray):
    w = spec.lane_width
    if maneuver == "left":
        lane = int(rng.integers(0, spec.lane_count - 1))
    elif maneuver == "right":
        lane = int(rng.integers(1, spec.lane_count))
    else:
        lane = int(rng.integers(0, spec.lane_count))
    speed = rng.uniform(*spec.speed_range)
    x0 = rng.uniform(0.0, spec.effective_road_length)
    x = x0 + speed * t + _smooth_noise(rng, t, spec.longitudinal_noise, (3.0, 10.0))
    y = (lane + 0.5) * w + _smooth_noise(rng, t, spec.lateral_noise, (2.0, 6.0))
    if maneuver != "straight":
        change = rng.uniform(*spec.change_duration)
        latest = spec.duration - change - 0.2
        if latest < 0:
            raise GenerationError(
                f"duration {spec.duration} s is too short for a {change:.2f} s lane change"
            )
        start = rng.uniform(min(2.5, latest), latest)
        y = y + (w if maneuver == "left" else -w) * quintic_blend((t - start) / change)
    return x, y


def generate(spec: ScenarioSpec) -> SyntheticCorpus:
    """Generate a deterministic corpus for ``spec``.

    Vehicles are placed one at a time; a candidate that comes within
    ``min_gap`` meters of an already-placed vehicle in the same lane at any
    frame is redrawn, up to ``max_attempts`` times.
    """
    n = spec.frame_count
    t = np.arange(n) * spec.dt
    w = spec.lane_width
    placed_x = np.zeros((0, n))
    placed_lane = np.zeros((0, n), dtype=np.int64)
    tracks, labels = [], {}
    for vid in range(spec.vehicle_count):
        maneuver = _draw_maneuver(spec, vid)
        for attempt in range(spec.max_attempts):
            x, y = _draw_path(spec, maneuver, _vehicle_rng(spec, vid, attempt), t)
            lane_idx = np.clip(np.floor(y / w), 0, spec.lane_count - 1).astype(np.int64)
            same_lane = placed_lane == lane_idx[None, :]
            if not np.any(same_lane & (np.abs(placed_x - x[None, :]) < spec.min_gap)):
                break
        else:
            raise GenerationError(
                f"vehicle {vid}: could not satisfy the {spec.min_gap} m same-lane gap after "
                f"{spec.max_attempts} attempts (road length {spec.effective_road_length:.0f} m "
                f"for {spec.vehicle_count} vehicles); lower vehicle_count or raise road_length"
            )
        placed_x = np.vstack([placed_x, x])
        placed_lane = np.vstack([placed_lane, lane_idx])
        xy = np.stack([x, y], axis=1)
        states = np.concatenate([xy, finite_difference_velocity(xy, spec.dt)], axis=1)
        frames = np.arange(n, dtype=np.int64)
        for arr in (frames, states, lane_idx):
            arr.setflags(write=False)
        tracks.append(Track(vid, frames, states, lane_idx))
        labels[vid] = maneuver
    dataset = TrajectoryDataset(tuple(tracks), spec.dt)
    return SyntheticCorpus(dataset, labels, LaneGeometry.uniform(spec.lane_count, w), spec)


def classify_maneuver(track: Track, lane_width: float) -> str:
    """Threshold classifier on net lateral displacement (left is +y)."""
    dy = float(track.states[-1, 1] - track.states[0, 1])
    if dy > lane_width / 2:
        return "left"
    if dy < -lane_width / 2:
        return "right"
    return "straight"


def write_labels(labels: dict[int, str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("vehicle_id,maneuver\n")
        for vid in sorted(labels):
            fh.write(f"{vid},{labels[vid]}\n")


def read_labels(path: str | Path) -> dict[int, str]:
    labels = {}
    with open(path) as fh:
        next(fh, None)
        for line in fh:
            if line.strip():
                vid, maneuver = line.strip().split(",")
                labels[int(vid)] = maneuver
    return labels


def write_corpus(corpus: SyntheticCorpus, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"data": out / "data.csv", "labels": out / "labels.csv", "lanes": out / "lanes.csv"}
    write_canonical(corpus.dataset, paths["data"])
    write_labels(corpus.labels, paths["labels"])
    write_lanes(corpus.lanes, paths["lanes"])
    return paths
