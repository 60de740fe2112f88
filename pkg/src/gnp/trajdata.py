"""Trajectory data model, dataset ingestion, windowing and rigid-transform normalization.

All per-frame vehicle states are stored as ``(..., 4)`` float arrays laid out as
``[x, y, vx, vy]`` with x longitudinal and y lateral, in meters and m/s.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MAX_SPEED = 100.0
METERS_PER_FOOT = 0.3048
NGSIM_DT = 0.1
HIGHD_DT = 0.04

CANONICAL_COLUMNS = ("frame", "vehicle_id", "x", "y", "vx", "vy", "lane_id")
NGSIM_WHITESPACE_COLUMNS = (
    "Vehicle_ID", "Frame_ID", "Total_Frames", "Global_Time", "Local_X", "Local_Y",
    "Global_X", "Global_Y", "v_Length", "v_Width", "v_Class", "v_Vel", "v_Acc",
    "Lane_ID", "Preceding", "Following", "Space_Headway", "Time_Headway",
)


class ParseError(ValueError):
    def __init__(self, path: Path | str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(2)
        vel = np.asarray(self.velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise DataError(f"non-finite vehicle state {pos}, {vel}")
        if np.hypot(*vel) >= MAX_SPEED:
            raise DataError(f"speed {np.hypot(*vel):.2f} m/s exceeds sanity bound {MAX_SPEED}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "VehicleState":
        return cls(np.asarray(row[:2]), np.asarray(row[2:4]))

    def as_row(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


class LineKind(str, Enum):
    CENTER = "center"
    BOUNDARY = "boundary"

    @classmethod
    def parse(cls, text: str) -> "LineKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DataError(f"unknown lane line kind {text!r} (expected 'center' or 'boundary')") from None


@dataclass(frozen=True)
class LaneGeometry:
    """Straight lane lines parallel to the x axis, identified by lateral offset."""

    offsets: tuple[float, ...]
    kinds: tuple[LineKind, ...]
    travel_direction: int = 1

    def __post_init__(self):
        offsets = tuple(float(o) for o in self.offsets)
        kinds = tuple(LineKind(k) for k in self.kinds)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "kinds", kinds)
        if len(offsets) != len(kinds):
            raise DataError("lane offsets and kinds differ in length")
        if self.travel_direction not in (1, -1):
            raise DataError(f"travel_direction must be +1 or -1, got {self.travel_direction}")
        if sum(k is LineKind.BOUNDARY for k in kinds) < 2:
            raise DataError("lane geometry needs at least two boundary lines")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise DataError(f"lane offsets must be strictly increasing: {offsets}")
        if kinds[0] is not LineKind.BOUNDARY or kinds[-1] is not LineKind.BOUNDARY:
            raise DataError("the extreme lateral lines must be boundary lines")

    @classmethod
    def uniform(cls, lane_count: int, lane_width: float, y0: float = 0.0) -> "LaneGeometry":
        offsets = tuple(y0 + i * lane_width for i in range(lane_count + 1))
        kinds = tuple(
            LineKind.BOUNDARY if i in (0, lane_count) else LineKind.CENTER
            for i in range(lane_count + 1)
        )
        return cls(offsets, kinds)

    def __len__(self) -> int:
        return len(self.offsets)

    @property
    def is_center(self) -> np.ndarray:
        return np.array([k is LineKind.CENTER for k in self.kinds])

    def transformed(self, tf: "RigidTransform") -> "LaneGeometry":
        """Express the lines in the frame produced by ``tf``."""
        pairs = sorted(
            (tf.sign * (off - tf.translation[1]), kind) for off, kind in zip(self.offsets, self.kinds)
        )
        return LaneGeometry(
            tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), self.travel_direction * tf.sign
        )


@dataclass(frozen=True)
class RigidTransform:
    """World-to-local map ``p' = R (p - translation)`` with R the identity or a pi rotation."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    rotation: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(2).copy()
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)
        if self.rotation not in (0.0, math.pi):
            raise ValueError(f"rotation must be 0 or pi, got {self.rotation}")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @property
    def sign(self) -> int:
        return -1 if self.rotation == math.pi else 1

    @property
    def is_identity(self) -> bool:
        return self.rotation == 0.0 and not np.any(self.translation)

    def then(self, other: "RigidTransform") -> "RigidTransform":
        """Composite map: apply ``self`` first, then ``other``."""
        s = self.sign * other.sign
        return RigidTransform(self.translation + self.sign * other.translation, math.pi if s < 0 else 0.0)

    def inverse_points(self, xy: np.ndarray) -> np.ndarray:
        return self.sign * np.asarray(xy, dtype=float) + self.translation

    def apply_points(self, xy: np.ndarray) -> np.ndarray:
        return self.sign * (np.asarray(xy, dtype=float) - self.translation)

    def apply_states(self, states: np.ndarray) -> np.ndarray:
        out = np.array(states, dtype=float, copy=True)
        out[..., :2] = self.apply_points(out[..., :2])
        out[..., 2:4] = self.sign * out[..., 2:4]
        return out

    def invert_states(self, states: np.ndarray) -> np.ndarray:
        out = np.array(states, dtype=float, copy=True)
        out[..., :2] = self.inverse_points(out[..., :2])
        out[..., 2:4] = self.sign * out[..., 2:4]
        return out


@dataclass(frozen=True)
class Track:
    vehicle_id: int
    frames: np.ndarray
    states: np.ndarray
    lane_ids: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.frames)

    def segments(self) -> list[tuple[int, int]]:
        """Half-open row ranges of frame-contiguous runs."""
        if len(self.frames) == 0:
            return []
        breaks = np.flatnonzero(np.diff(self.frames) != 1) + 1
        bounds = [0, *breaks.tolist(), len(self.frames)]
        return list(zip(bounds[:-1], bounds[1:]))


@dataclass(frozen=True)
class TrajectoryDataset:
    tracks: tuple[Track, ...]
    dt: float
    lane_ref: str = "default"

    def __len__(self) -> int:
        return len(self.tracks)

    def by_id(self) -> dict[int, Track]:
        return {t.vehicle_id: t for t in self.tracks}


@dataclass(frozen=True)
class TrajectoryWindow:
    vehicle_id: int
    observed: np.ndarray  # (T_obs, 4)
    future: np.ndarray  # (T_pred, 4)
    neighbor_ids: tuple[int, ...]  # one per slot, -1 for empty slots
    neighbors: np.ndarray  # (N_max, T_obs, 4), zero rows where masked
    neighbor_mask: np.ndarray  # (N_max,) bool
    lane_ref: str
    dt: float
    start_frame: int = 0
    frame: RigidTransform = field(default_factory=RigidTransform)

    def __post_init__(self):
        if self.dt <= 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        if self.observed.ndim != 2 or self.observed.shape[1] != 4:
            raise DataError(f"observed must be (T_obs, 4), got {self.observed.shape}")
        if self.future.ndim != 2 or self.future.shape[1] != 4:
            raise DataError(f"future must be (T_pred, 4), got {self.future.shape}")
        n = len(self.neighbor_ids)
        if self.neighbors.shape != (n, self.observed.shape[0], 4) or self.neighbor_mask.shape != (n,):
            raise DataError("neighbor arrays do not match the slot count")
        if np.any(self.neighbors[~self.neighbor_mask]):
            raise DataError("masked-out neighbor slots must hold zeroed states")

    @property
    def T_obs(self) -> int:
        return self.observed.shape[0]

    @property
    def T_pred(self) -> int:
        return self.future.shape[0]

    @property
    def goal(self) -> np.ndarray:
        """Ground-truth goal: the final future position."""
        return self.future[-1, :2].copy()

    @property
    def neighbor_count(self) -> int:
        return int(self.neighbor_mask.sum())

    def observed_states(self) -> list[VehicleState]:
        return [VehicleState.from_row(r) for r in self.observed]

    def future_states(self) -> list[VehicleState]:
        return [VehicleState.from_row(r) for r in self.future]


@dataclass(frozen=True)
class NeighborRule:
    """Radius rule evaluated at the last observed frame."""

    longitudinal: float = 50.0
    lateral: float = 1.5 * 3.7
    max_neighbors: int = 8


@dataclass(frozen=True)
class SkipReport:
    segments_total: int
    segments_skipped: int
    skipped_vehicles: tuple[int, ...]


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def finite_difference_velocity(xy: np.ndarray, dt: float) -> np.ndarray:
    """Central differences in the interior, one-sided at the two ends."""
    xy = np.asarray(xy, dtype=float)
    if len(xy) < 2:
        return np.zeros_like(xy)
    return np.gradient(xy, dt, axis=0)


def _parse_float(text: str, path, line: int, column: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(path, line, f"column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise ParseError(path, line, f"column {column!r}: non-finite value {text!r}")
    return value


def _parse_int(text: str, path, line: int, column: str) -> int:
    value = _parse_float(text, path, line, column)
    if value != int(value):
        raise ParseError(path, line, f"column {column!r}: expected an integer, got {text!r}")
    return int(value)


def _build_dataset(rows: dict[int, list], dt: float, path, lane_ref: str) -> TrajectoryDataset:
    tracks = []
    for vid in sorted(rows):
        recs = rows[vid]
        frames = np.array([r[0] for r in recs], dtype=np.int64)
        if np.any(np.diff(frames) <= 0):
            bad = int(np.flatnonzero(np.diff(frames) <= 0)[0]) + 1
            raise DataError(
                f"{path}: vehicle {vid} has non-monotone frames ({frames[bad - 1]} then {frames[bad]})"
            )
        xy = np.array([[r[1], r[2]] for r in recs], dtype=float)
        vel = np.array([[np.nan if r[3] is None else r[3], np.nan if r[4] is None else r[4]] for r in recs])
        lanes = np.array([-1 if r[5] is None else r[5] for r in recs], dtype=np.int64)
        track = Track(vid, frames, np.zeros((len(frames), 4)), lanes)
        states = track.states
        states[:, :2] = xy
        for a, b in track.segments():
            seg_v = vel[a:b]
            if np.any(np.isnan(seg_v)):
                seg_v = finite_difference_velocity(xy[a:b], dt)
            states[a:b, 2:] = seg_v
        gaps = len(track.segments()) - 1
        if gaps:
            logger.info("vehicle %s: %d frame gap(s) detected", vid, gaps)
        speed = np.hypot(states[:, 2], states[:, 3])
        if np.any(speed >= MAX_SPEED):
            raise DataError(f"{path}: vehicle {vid} exceeds the {MAX_SPEED} m/s speed sanity bound")
        for arr in (frames, states, lanes):
            arr.setflags(write=False)
        tracks.append(track)
    return TrajectoryDataset(tuple(tracks), float(dt), lane_ref)


def _read_canonical(path: Path, dt: float, lane_ref: str) -> TrajectoryDataset:
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return TrajectoryDataset((), dt, lane_ref)
        header = [h.strip() for h in header]
        missing = {"frame", "vehicle_id", "x", "y"} - set(header)
        if missing:
            raise ParseError(path, 1, f"missing required column(s) {sorted(missing)}")
        col = {name: header.index(name) for name in CANONICAL_COLUMNS if name in header}
        for rec in reader:
            line = reader.line_num
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(path, line, f"expected {len(header)} fields, got {len(rec)}")

            def opt(name, conv):
                if name not in col or not rec[col[name]].strip():
                    return None
                return conv(rec[col[name]], path, line, name)

            vid = _parse_int(rec[col["vehicle_id"]], path, line, "vehicle_id")
            rows.setdefault(vid, []).append((
                _parse_int(rec[col["frame"]], path, line, "frame"),
                _parse_float(rec[col["x"]], path, line, "x"),
                _parse_float(rec[col["y"]], path, line, "y"),
                opt("vx", _parse_float),
                opt("vy", _parse_float),
                opt("lane_id", _parse_int),
            ))
    return _build_dataset(rows, dt, path, lane_ref)


def _read_ngsim(path: Path, dt: float, lane_ref: str) -> TrajectoryDataset:
    """NGSIM: Local_Y is longitudinal and Local_X lateral, both in feet."""
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.strip():
            return TrajectoryDataset((), dt, lane_ref)
        if "Vehicle_ID" in first:
            sep = "," if "," in first else None
            header = [h.strip() for h in first.split(sep)]
            start_line = 2
            lines = fh
        else:
            header = list(NGSIM_WHITESPACE_COLUMNS)
            sep = None
            start_line = 1
            lines = [first, *fh]
        need = ("Vehicle_ID", "Frame_ID", "Local_X", "Local_Y")
        missing = [c for c in need if c not in header]
        if missing:
            raise ParseError(path, 1, f"missing required NGSIM column(s) {missing}")
        idx = {c: header.index(c) for c in header}
        for offset, raw in enumerate(lines):
            line = start_line + offset
            if not raw.strip():
                continue
            rec = raw.strip().split(sep) if sep else raw.split()
            if len(rec) < len(header):
                raise ParseError(path, line, f"expected {len(header)} fields, got {len(rec)}")
            vid = _parse_int(rec[idx["Vehicle_ID"]], path, line, "Vehicle_ID")
            lane = _parse_int(rec[idx["Lane_ID"]], path, line, "Lane_ID") if "Lane_ID" in idx else None
            rows.setdefault(vid, []).append((
                _parse_int(rec[idx["Frame_ID"]], path, line, "Frame_ID"),
                _parse_float(rec[idx["Local_Y"]], path, line, "Local_Y") * METERS_PER_FOOT,
                _parse_float(rec[idx["Local_X"]], path, line, "Local_X") * METERS_PER_FOOT,
                None,
                None,
                lane,
            ))
    return _build_dataset(rows, dt, path, lane_ref)


def _read_highd(path: Path, dt: float, lane_ref: str) -> TrajectoryDataset:
    """HighD tracks file; positions are bounding-box corners, converted to centers when sizes exist."""
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return TrajectoryDataset((), dt, lane_ref)
        missing = {"frame", "id", "x", "y"} - set(reader.fieldnames)
        if missing:
            raise ParseError(path, 1, f"missing required HighD column(s) {sorted(missing)}")
        has_size = {"width", "height"} <= set(reader.fieldnames)
        has_vel = {"xVelocity", "yVelocity"} <= set(reader.fieldnames)
        for rec in reader:
            line = reader.line_num
            if None in rec or any(v is None for v in rec.values()):
                raise ParseError(path, line, "row has the wrong number of fields")
            x = _parse_float(rec["x"], path, line, "x")
            y = _parse_float(rec["y"], path, line, "y")
            if has_size:
                x += 0.5 * _parse_float(rec["width"], path, line, "width")
                y += 0.5 * _parse_float(rec["height"], path, line, "height")
            vid = _parse_int(rec["id"], path, line, "id")
            rows.setdefault(vid, []).append((
                _parse_int(rec["frame"], path, line, "frame"),
                x,
                y,
                _parse_float(rec["xVelocity"], path, line, "xVelocity") if has_vel else None,
                _parse_float(rec["yVelocity"], path, line, "yVelocity") if has_vel else None,
                _parse_int(rec["laneId"], path, line, "laneId") if "laneId" in rec else None,
            ))
    return _build_dataset(rows, dt, path, lane_ref)


_READERS = {"canonical": _read_canonical, "ngsim": _read_ngsim, "highd": _read_highd}
_DEFAULT_DT = {"canonical": NGSIM_DT, "ngsim": NGSIM_DT, "highd": HIGHD_DT}


def load_trajectories(
    path: str | Path, schema: str = "canonical", dt: float | None = None, lane_ref: str = "default"
) -> TrajectoryDataset:
    """Load per-vehicle frame sequences from a CSV file in one of the supported schemas.

    Velocities missing from the file are derived by finite differences over each
    frame-contiguous run.
    """
    schema = schema.lower()
    if schema not in _READERS:
        raise ValueError(f"unknown schema {schema!r}; expected one of {sorted(_READERS)}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return _READERS[schema](path, dt if dt is not None else _DEFAULT_DT[schema], lane_ref)


def write_canonical(dataset: TrajectoryDataset, path: str | Path) -> None:
    """Write the canonical CSV. Floats use ``repr`` so a reload is bit-exact."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CANONICAL_COLUMNS) + "\n")
        rows = []
        for track in dataset.tracks:
            lanes = track.lane_ids if track.lane_ids is not None else np.full(len(track), -1)
            for f, s, lane in zip(track.frames, track.states, lanes):
                rows.append((int(f), track.vehicle_id, s, int(lane)))
        rows.sort(key=lambda r: (r[0], r[1]))
        for f, vid, s, lane in rows:
            lane_txt = "" if lane < 0 else str(lane)
            fh.write(f"{f},{vid},{float(s[0])!r},{float(s[1])!r},{float(s[2])!r},{float(s[3])!r},{lane_txt}\n")


def load_lanes(path: str | Path, travel_direction: int = 1) -> LaneGeometry:
    """Read a lane file of ``offset_m,kind`` rows (optional header)."""
    path = Path(path)
    offsets, kinds = [], []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            line_no = len(offsets) + 1
            if not rec or rec[0].strip().startswith("#"):
                continue
            if rec[0].strip() == "offset_m":
                continue
            if len(rec) != 2:
                raise ParseError(path, line_no, f"expected 'offset_m,kind', got {rec}")
            offsets.append(_parse_float(rec[0], path, line_no, "offset_m"))
            kinds.append(LineKind.parse(rec[1]))
    return LaneGeometry(tuple(offsets), tuple(kinds), travel_direction)


def write_lanes(lanes: LaneGeometry, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("offset_m,kind\n")
        for off, kind in zip(lanes.offsets, lanes.kinds):
            fh.write(f"{off!r},{kind.value}\n")


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------


def plan_windows(
    dataset: TrajectoryDataset, T_obs: int, T_pred: int, stride: int
) -> tuple[list[tuple[int, int]], SkipReport]:
    """Return ``(track index, start row)`` pairs for every window, plus the skip report."""
    if T_obs < 2 or T_pred < 1 or stride < 1:
        raise ValueError(f"need T_obs >= 2, T_pred >= 1, stride >= 1 (got {T_obs}, {T_pred}, {stride})")
    total = T_obs + T_pred
    plan, skipped_ids = [], []
    n_segments = n_skipped = 0
    for ti, track in enumerate(dataset.tracks):
        for a, b in track.segments():
            n_segments += 1
            if b - a < total:
                n_skipped += 1
                skipped_ids.append(track.vehicle_id)
                continue
            plan.extend((ti, s) for s in range(a, b - total + 1, stride))
    return plan, SkipReport(n_segments, n_skipped, tuple(sorted(set(skipped_ids))))


def expected_window_count(lengths: Iterable[int], T_obs: int, T_pred: int, stride: int) -> int:
    total = T_obs + T_pred
    return sum((n - total) // stride + 1 for n in lengths if n >= total)


class _FrameIndex:
    def __init__(self, dataset: TrajectoryDataset):
        by_frame: dict[int, list[tuple[int, int]]] = {}
        for ti, track in enumerate(dataset.tracks):
            for row, f in enumerate(track.frames):
                by_frame.setdefault(int(f), []).append((ti, row))
        self.tracks = dataset.tracks
        self.by_frame = {f: np.array(v, dtype=np.int64) for f, v in by_frame.items()}

    def candidates(self, frame: int) -> np.ndarray:
        return self.by_frame.get(frame, np.zeros((0, 2), dtype=np.int64))


def _select_neighbors(
    index: _FrameIndex, target_ti: int, last_row: int, T_obs: int, rule: NeighborRule
) -> list[tuple[int, int, float]]:
    tracks = index.tracks
    target = tracks[target_ti]
    frame = int(target.frames[last_row])
    me = target.states[last_row]
    direction = 1.0 if me[2] >= 0 else -1.0
    chosen = []
    for ti, row in index.candidates(frame):
        if ti == target_ti:
            continue
        other = tracks[ti]
        s = other.states[row]
        if (1.0 if s[2] >= 0 else -1.0) != direction:
            continue
        dx, dy = s[0] - me[0], s[1] - me[1]
        if abs(dx) > rule.longitudinal or abs(dy) > rule.lateral:
            continue
        first = row - (T_obs - 1)
        if first < 0 or other.frames[row] - other.frames[first] != T_obs - 1:
            continue
        chosen.append((ti, int(first), math.hypot(dx, dy)))
    chosen.sort(key=lambda c: (c[2], tracks[c[0]].vehicle_id))
    return chosen[: rule.max_neighbors]


def make_windows(
    dataset: TrajectoryDataset,
    T_obs: int,
    T_pred: int,
    stride: int,
    neighbor_rule: NeighborRule = NeighborRule(),
) -> list[TrajectoryWindow]:
    """Cut every track into fixed-length samples with neighbors from the radius rule.

    Tracks (or frame-contiguous runs) shorter than ``T_obs + T_pred`` are
    skipped; see :func:`plan_windows` for the accompanying report.
    """
    plan, report = plan_windows(dataset, T_obs, T_pred, stride)
    if report.segments_skipped:
        logger.info("windowing skipped %d of %d segments", report.segments_skipped, report.segments_total)
    index = _FrameIndex(dataset)
    n_max = neighbor_rule.max_neighbors
    windows = []
    for ti, start in plan:
        track = dataset.tracks[ti]
        last = start + T_obs - 1
        neighbors = np.zeros((n_max, T_obs, 4))
        mask = np.zeros(n_max, dtype=bool)
        ids = [-1] * n_max
        for slot, (nti, first, _) in enumerate(_select_neighbors(index, ti, last, T_obs, neighbor_rule)):
            neighbors[slot] = dataset.tracks[nti].states[first : first + T_obs]
            mask[slot] = True
            ids[slot] = dataset.tracks[nti].vehicle_id
        windows.append(
            TrajectoryWindow(
                vehicle_id=track.vehicle_id,
                observed=np.array(track.states[start : start + T_obs]),
                future=np.array(track.states[start + T_obs : start + T_obs + T_pred]),
                neighbor_ids=tuple(ids),
                neighbors=neighbors,
                neighbor_mask=mask,
                lane_ref=dataset.lane_ref,
                dt=dataset.dt,
                start_frame=int(track.frames[start]),
            )
        )
    return windows


# ---------------------------------------------------------------------------
# Normalization and lane geometry
# ---------------------------------------------------------------------------


def apply_transform(window: TrajectoryWindow, tf: RigidTransform) -> TrajectoryWindow:
    neighbors = np.zeros_like(window.neighbors)
    neighbors[window.neighbor_mask] = tf.apply_states(window.neighbors[window.neighbor_mask])
    return replace(
        window,
        observed=tf.apply_states(window.observed),
        future=tf.apply_states(window.future),
        neighbors=neighbors,
        frame=window.frame.then(tf),
    )


def normalize(window: TrajectoryWindow) -> tuple[TrajectoryWindow, RigidTransform]:
    """Move the first future point to the origin and flip westbound samples to eastbound."""
    flip = float(np.mean(window.observed[:, 2])) < 0.0
    tf = RigidTransform(window.future[0, :2], math.pi if flip else 0.0)
    return apply_transform(window, tf), tf


def invert(window: TrajectoryWindow, tf: RigidTransform) -> TrajectoryWindow:
    neighbors = np.zeros_like(window.neighbors)
    neighbors[window.neighbor_mask] = tf.invert_states(window.neighbors[window.neighbor_mask])
    inv = RigidTransform(-tf.sign * tf.translation, tf.rotation)
    return replace(
        window,
        observed=tf.invert_states(window.observed),
        future=tf.invert_states(window.future),
        neighbors=neighbors,
        frame=window.frame.then(inv),
    )


def window_lanes(window: TrajectoryWindow, lanes: LaneGeometry) -> LaneGeometry:
    """Lane geometry expressed in the window's current coordinate frame."""
    return lanes.transformed(window.frame)


def distances_to_lines(position, lanes: LaneGeometry) -> list[tuple[int, float, LineKind]]:
    y = float(np.asarray(position, dtype=float)[1])
    return [(i, abs(y - off), kind) for i, (off, kind) in enumerate(zip(lanes.offsets, lanes.kinds))]
