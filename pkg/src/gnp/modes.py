"""Intention modes: k-means cluster centers of normalized future trajectories."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAX_ITER = 200


class ModeError(ValueError):
    pass


@dataclass(frozen=True)
class IntentionModeSet:
    centers: np.ndarray  # (L, T_pred, 2)
    normalization_tag: str = ""
    inertia_history: tuple[float, ...] = ()
    converged: bool = True
    iterations: int = 0
    populations: tuple[int, ...] = ()

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        if c.ndim != 3 or c.shape[2] != 2:
            raise ModeError(f"centers must be (L, T_pred, 2), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def L(self) -> int:
        return self.centers.shape[0]

    @property
    def T_pred(self) -> int:
        return self.centers.shape[1]

    @property
    def endpoints(self) -> np.ndarray:
        return self.centers[:, -1, :]

    def validate(self) -> None:
        if self.L < 2:
            raise ModeError("an intention mode set needs L >= 2")
        flat = self.centers.reshape(self.L, -1)
        d = ((flat[:, None] - flat[None]) ** 2).sum(-1) + np.diag(np.full(self.L, np.inf))
        if d.min() <= 0:
            raise ModeError("mode centers are not pairwise distinct")


def dataset_fingerprint(futures: np.ndarray) -> str:
    arr = np.ascontiguousarray(futures, dtype=np.float64)
    return hashlib.sha256(arr.tobytes() + str(arr.shape).encode()).hexdigest()[:16]


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1)


def _farthest_point_seeds(x: np.ndarray, L: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(len(x)))]
    nearest = ((x - x[chosen[0]]) ** 2).sum(-1)
    for _ in range(1, L):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, ((x - x[nxt]) ** 2).sum(-1))
    return x[chosen].copy()


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int):
    n, L = len(x), len(centers)
    assign = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, centers)
        new_assign = np.argmin(d, axis=1)
        history.append(float(d[np.arange(n), new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            converged = True
            break
        assign = new_assign
        for k in range(L):
            members = assign == k
            if members.any():
                centers[k] = x[members].mean(axis=0)
            else:
                own = d[np.arange(n), assign]
                far = int(np.argmax(own))
                centers[k] = x[far]
                assign[far] = k
    return centers, history, converged, it


def fit_modes(
    futures: Sequence[np.ndarray] | np.ndarray,
    L: int,
    seed: int = 0,
    max_iter: int = MAX_ITER,
    n_init: int = 4,
) -> IntentionModeSet:
    """Lloyd's k-means on flattened ``(T_pred * 2)`` vectors with farthest-point seeding.

    ``n_init`` seedings (each starting from a different random sample) are run
    and the lowest-inertia result kept. Clusters that empty out are re-seeded
    from the sample farthest from its assigned center. Centers come back ordered
    by decreasing population (ties by original index).
    """
    arr = np.asarray(futures, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ModeError(f"futures must be (n, T_pred, 2), got {arr.shape}")
    n, T_pred, _ = arr.shape
    if L < 1:
        raise ModeError("L must be >= 1")
    if n < L:
        raise ModeError(f"need at least L={L} futures, got {n}")
    x = arr.reshape(n, -1)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        centers, history, converged, it = _lloyd(x, _farthest_point_seeds(x, L, rng), max_iter)
        inertia = float(_sq_dists(x, centers).min(axis=1).sum())
        if best is None or inertia < best[0]:
            best = (inertia, centers, history, converged, it)
    _, centers, history, converged, it = best
    assign = np.argmin(_sq_dists(x, centers), axis=1)
    counts = np.bincount(assign, minlength=L)
    order = sorted(range(L), key=lambda k: (-counts[k], k))
    return IntentionModeSet(
        centers=centers[order].reshape(L, T_pred, 2),
        normalization_tag=dataset_fingerprint(arr),
        inertia_history=tuple(history),
        converged=converged,
        iterations=it,
        populations=tuple(int(counts[k]) for k in order),
    )


def _distances(query: np.ndarray, modes: IntentionModeSet, basis: str) -> np.ndarray:
    q = np.asarray(query, dtype=float)
    if basis == "endpoint":
        q = q.reshape(-1, 2)[-1] if q.size > 2 else q.reshape(2)
        return ((modes.endpoints - q) ** 2).sum(-1)
    if basis == "full":
        if q.shape != modes.centers.shape[1:]:
            raise ModeError(f"full-basis query must be {modes.centers.shape[1:]}, got {q.shape}")
        return ((modes.centers - q[None]) ** 2).sum(axis=(1, 2))
    raise ModeError(f"unknown comparison basis {basis!r}; expected 'endpoint' or 'full'")


def nearest_mode(query, modes: IntentionModeSet, basis: str = "endpoint") -> int:
    """Index of the closest center; ``np.argmin`` breaks ties toward the lowest index."""
    return int(np.argmin(_distances(query, modes, basis)))


def soft_probabilities(query, modes: IntentionModeSet, basis: str = "endpoint") -> np.ndarray:
    logits = -_distances(query, modes, basis)
    z = np.exp(logits - logits.max())
    return z / z.sum()


def save_modes(modes: IntentionModeSet, path: str | Path, basis: str = "endpoint") -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("mode_index,frame,x,y\n")
        for m, center in enumerate(modes.centers):
            for f, (x, y) in enumerate(center):
                fh.write(f"{m},{f},{float(x)!r},{float(y)!r}\n")
    meta = {
        "L": modes.L,
        "T_pred": modes.T_pred,
        "fingerprint": modes.normalization_tag,
        "basis": basis,
        "converged": modes.converged,
        "iterations": modes.iterations,
        "populations": list(modes.populations),
        "inertia_history": list(modes.inertia_history),
    }
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_modes(path: str | Path) -> IntentionModeSet:
    path = Path(path)
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    centers = np.zeros((meta["L"], meta["T_pred"], 2))
    with open(path) as fh:
        next(fh)
        for line in fh:
            m, f, x, y = line.strip().split(",")
            centers[int(m), int(f)] = (float(x), float(y))
    return IntentionModeSet(
        centers,
        meta["fingerprint"],
        tuple(meta["inertia_history"]),
        meta["converged"],
        meta["iterations"],
        tuple(meta["populations"]),
    )
