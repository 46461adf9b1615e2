"""Ablation experiment driver: train variants, evaluate, tabulate."""
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..policy import VARIANTS, HyperParams, TrainingDiverged, train
from ..simcore import Simulator
from .report import (MetricsTable, TableRow, render_csv,
                     render_normalized_csv, render_text)
from .rollout import RolloutResult, rollout


def dataset_fingerprint(ds) -> str:
    """Content hash of everything training reads from the dataset."""
    h = hashlib.sha256()
    for arr in (ds.obs_images, ds.skappa, ds.proprio, ds.actions, ds.pad,
                ds.episode_ids, ds.step_ids,
                ds.action_norm.mean, ds.action_norm.std,
                ds.proprio_norm.mean, ds.proprio_norm.std):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(f"{ds.config.chunk_size}:{ds.config.image_size}".encode())
    return h.hexdigest()


def summarize(label: str, results: Sequence[RolloutResult],
              n_total: Optional[int] = None) -> TableRow:
    """Table-I-style row: rate over everything, other metrics over successes."""
    n = n_total if n_total is not None else len(results)
    if n < 1:
        raise ValueError("need at least one episode")
    wins = [r for r in results if r.outcome.status == "success"]
    if wins:
        times = [r.metrics.duration for r in wins]
        lni = np.stack([r.metrics.log_impulses for r in wins])
        pks = np.stack([r.metrics.peaks for r in wins])
        return TableRow(label=label, success_rate=len(wins) / n,
                        mean_time=float(np.mean(times)),
                        log_impulses=lni.mean(axis=0),
                        peaks=pks.mean(axis=0), n_episodes=n)
    return TableRow(label=label, success_rate=0.0, mean_time=float("nan"),
                    log_impulses=np.full(5, np.nan),
                    peaks=np.full(5, np.nan), n_episodes=n)


@dataclass
class CellResult:
    variant: str
    seed: int
    diverged: bool
    final_loss: float
    rollouts: List[RolloutResult] = field(default_factory=list)

    @property
    def row(self) -> TableRow:
        return summarize(f"{self.variant}/s{self.seed}", self.rollouts)

    @property
    def success_rate(self) -> float:
        if not self.rollouts:
            return 0.0
        return self.row.success_rate

    @property
    def max_peak(self) -> float:
        """Largest channel of the per-cell mean peaks; NaN without successes."""
        if not self.rollouts:
            return float("nan")
        return self.row.max_peak


@dataclass
class AblationResult:
    table: MetricsTable
    cells: List[CellResult]
    out_dir: Path
    fingerprint: str

    def cell(self, variant: str, seed: int) -> CellResult:
        for c in self.cells:
            if c.variant == variant and c.seed == seed:
                return c
        raise KeyError((variant, seed))

    def median_success(self, variant: str) -> float:
        return float(np.median([c.success_rate for c in self.cells
                                if c.variant == variant]))

    def median_max_peak(self, variant: str) -> float:
        return float(np.median([c.max_peak for c in self.cells
                                if c.variant == variant]))


def run_ablation(dataset, sim: Simulator, out_dir,
                 variants: Sequence[str] = ("ACT", "RACCT"),
                 seeds: Sequence[int] = (0, 1, 2),
                 n_eval: int = 20,
                 hp: Optional[HyperParams] = None,
                 eval_seed_base: int = 10_000,
                 max_steps: int = 400,
                 record_frames: bool = False,
                 progress: Optional[Callable[[str], None]] = None
                 ) -> AblationResult:
    """Train every (variant, seed) cell on one dataset and evaluate it.

    Evaluation seeds are shared across cells so the comparison is paired.
    A diverged training run is recorded as an empty cell, not an error.
    The dataset is hash-checked before each training run; any mutation
    between cells aborts the experiment."""
    if n_eval < 1:
        raise ValueError("n_eval must be >= 1")
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    hp = hp or HyperParams.desk()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    note = progress or (lambda msg: None)

    fp = dataset_fingerprint(dataset)
    manifest = {
        "dataset_sha256": fp,
        "variants": list(variants),
        "seeds": [int(s) for s in seeds],
        "n_eval": int(n_eval),
        "eval_seed_base": int(eval_seed_base),
        "max_steps": int(max_steps),
        "hp": hp.to_dict(),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    cells: List[CellResult] = []
    per_variant: dict = {v: [] for v in variants}
    for variant in variants:
        for seed in seeds:
            now = dataset_fingerprint(dataset)
            if now != fp:
                raise RuntimeError("dataset changed between training runs")
            note(f"train {variant} seed {seed}")
            try:
                res = train(dataset, hp, variant=variant, seed=int(seed))
            except TrainingDiverged:
                note(f"  diverged: {variant} seed {seed}")
                cells.append(CellResult(variant, int(seed), True,
                                        float("nan")))
                continue
            cell = CellResult(variant, int(seed), False, res.final_loss)
            ckpt = out / variant / f"s{seed}"
            ckpt.mkdir(parents=True, exist_ok=True)
            res.policy.save(ckpt / "policy.nkpt")
            for j in range(n_eval):
                r = rollout(res.policy, sim, seed=eval_seed_base + j,
                            out_dir=ckpt / f"ep{j:03d}",
                            max_steps=max_steps,
                            record_frames=record_frames)
                cell.rollouts.append(r)
                per_variant[variant].append(r)
            note(f"  {variant} seed {seed}: "
                 f"{cell.success_rate:.0%} success")
            cells.append(cell)

    rows = [summarize(v, per_variant[v], n_total=len(seeds) * n_eval)
            for v in variants]
    table = MetricsTable(rows=rows)
    result = AblationResult(table=table, cells=cells, out_dir=out,
                            fingerprint=fp)
    (out / "table.txt").write_text(render_text(table))
    (out / "table.csv").write_text(render_csv(table))
    (out / "table_normalized.csv").write_text(render_normalized_csv(table))
    return result
