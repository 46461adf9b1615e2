import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..simcore.render import save_png

OPERATOR_KINDS = ("scripted", "human", "policy")

_COLUMNS = ("t", "x", "z", "theta",
            "fx_ee", "fy_ee", "fz_ee",
            "fx", "fy", "fz", "f1", "f2",
            "dx", "dz", "dtheta", "frame")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class Episode:
    """One recorded run, loaded from its directory."""
    t: np.ndarray           # (n,)
    poses: np.ndarray       # (n, 3) x, z, theta
    ee_forces: np.ndarray   # (n, 3)
    channels: np.ndarray    # (n, 5) fx, fy, fz, f1, f2
    actions: np.ndarray     # (n, 3) dx, dz, dtheta
    frames: List[Optional[Path]]
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.meta["dt"])

    @property
    def seed(self):
        return self.meta.get("seed")

    def validate(self):
        if self.n_steps == 0:
            raise ValueError("episode has no steps")
        dts = np.diff(self.t)
        if self.n_steps > 1:
            if np.any(dts <= 0):
                raise ValueError("timestamps must be strictly increasing")
            if np.any(np.abs(dts - self.dt) > 1e-9):
                raise ValueError("timestamps must advance by a constant dt")
        for p in self.frames:
            if p is not None and not p.exists():
                raise ValueError(f"missing frame file {p}")
        return self


class EpisodeWriter:
    """Streams one episode to a directory: meta.json, signals.csv, frames/.

    Frames are written as they arrive; the signal table and metadata land on
    finalize(). Nothing wall-clock dependent is stored, so identical runs
    produce identical bytes."""

    def __init__(self, root, seed: int, operator: str, dt: float):
        if operator not in OPERATOR_KINDS:
            raise ValueError(f"operator must be one of {OPERATOR_KINDS}")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.root = Path(root)
        self.frames_dir = self.root / "frames"
        self.frames_dir.mkdir(parents=True, exist_ok=True)
        self.seed = int(seed)
        self.operator = operator
        self.dt = float(dt)
        self._rows = []
        self._finalized = False

    def append(self, t: float, pose, ee_force, channels, action,
               frame: Optional[np.ndarray] = None):
        if self._finalized:
            raise RuntimeError("episode already finalized")
        ref = ""
        if frame is not None:
            name = f"{len(self._rows):06d}.png"
            save_png(frame, self.frames_dir / name)
            ref = f"frames/{name}"
        pose = np.asarray(pose, dtype=np.float64)
        ee = np.asarray(ee_force, dtype=np.float64)
        ch = np.asarray(channels, dtype=np.float64)
        act = np.asarray(action, dtype=np.float64)
        if pose.shape != (3,) or ee.shape != (3,) or ch.shape != (5,) \
                or act.shape != (3,):
            raise ValueError("bad record shapes")
        row = [_fmt(t), *map(_fmt, pose), *map(_fmt, ee), *map(_fmt, ch),
               *map(_fmt, act), ref]
        self._rows.append(row)

    def finalize(self, outcome_status: str, outcome_reason: str = "",
                 verdict=None) -> Path:
        if self._finalized:
            raise RuntimeError("episode already finalized")
        if not self._rows:
            raise ValueError("cannot finalize an empty episode")
        with open(self.root / "signals.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(_COLUMNS)
            w.writerows(self._rows)
        meta = {
            "dt": self.dt,
            "n_steps": len(self._rows),
            "operator": self.operator,
            "outcome": {"status": outcome_status, "reason": outcome_reason},
            "seed": self.seed,
        }
        if verdict is not None:
            meta["verdict"] = {"accepted": bool(verdict.accepted),
                               "mode": verdict.mode,
                               "reasons": list(verdict.reasons)}
        with open(self.root / "meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._finalized = True
        return self.root


def load_episode(root) -> Episode:
    root = Path(root)
    with open(root / "meta.json") as fh:
        meta = json.load(fh)
    rows = []
    frames: List[Optional[Path]] = []
    with open(root / "signals.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _COLUMNS:
            raise ValueError(f"unexpected signal columns {header}")
        for rec in reader:
            rows.append([float(v) for v in rec[:-1]])
            frames.append(root / rec[-1] if rec[-1] else None)
    arr = np.asarray(rows, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("episode has no steps")
    ep = Episode(t=arr[:, 0], poses=arr[:, 1:4], ee_forces=arr[:, 4:7],
                 channels=arr[:, 7:12], actions=arr[:, 12:15],
                 frames=frames, meta=meta)
    return ep.validate()


def list_episodes(root) -> List[Path]:
    """Episode directories under root, sorted by name for a stable order."""
    root = Path(root)
    return sorted(p for p in root.iterdir()
                  if p.is_dir() and (p / "meta.json").exists())
