"""Result tables: aligned text, CSV, and radar-style normalized scores.

Per-row metrics beyond the success rate are means over successful episodes
only; rows where nothing succeeded carry NaN there and render as "-".
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..datakit import CHANNEL_NAMES


@dataclass(frozen=True)
class TableRow:
    label: str
    success_rate: float          # in [0, 1]
    mean_time: float             # s, successes only
    log_impulses: np.ndarray     # (5,) ln(N*s), successes only
    peaks: np.ndarray            # (5,) N, successes only
    n_episodes: int = 0

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError("success rate must lie in [0, 1]")
        li = np.asarray(self.log_impulses, dtype=np.float64)
        pk = np.asarray(self.peaks, dtype=np.float64)
        if li.shape != (5,) or pk.shape != (5,):
            raise ValueError("per-channel metrics must have 5 entries")
        object.__setattr__(self, "log_impulses", li)
        object.__setattr__(self, "peaks", pk)

    @property
    def max_peak(self) -> float:
        """Largest per-channel force peak, the headline safety number."""
        return float(np.max(self.peaks))

    @property
    def max_peak_channel(self) -> str:
        return CHANNEL_NAMES[int(np.argmax(self.peaks))]


@dataclass
class MetricsTable:
    rows: List[TableRow] = field(default_factory=list)

    def __post_init__(self):
        labels = [r.label for r in self.rows]
        if len(set(labels)) != len(labels):
            raise ValueError("row labels must be unique")

    def row(self, label: str) -> TableRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


# 1 success column + 1 time + 5 impulse + 5 peak, Table-I-shaped
_METRIC_NAMES = (["success", "time_s"]
                 + [f"lni_{c}" for c in CHANNEL_NAMES]
                 + [f"peak_{c}" for c in CHANNEL_NAMES])
_HIGHER_BETTER = [True] + [False] * 11


def _row_values(r: TableRow) -> np.ndarray:
    return np.concatenate([[r.success_rate, r.mean_time],
                           r.log_impulses, r.peaks])


def normalized_scores(table: MetricsTable) -> dict:
    """Min-max per metric across rows, inverted where lower is better.

    Larger is always better in the output; a degenerate metric (all rows
    equal, or a single row) scores 1 everywhere. NaN cells stay NaN."""
    vals = np.stack([_row_values(r) for r in table.rows])   # (R, 12)
    out = np.ones_like(vals)
    for j in range(vals.shape[1]):
        col = vals[:, j]
        ok = np.isfinite(col)
        if not ok.any():
            out[:, j] = np.nan
            continue
        lo, hi = np.min(col[ok]), np.max(col[ok])
        if hi > lo:
            s = (col - lo) / (hi - lo)
            out[:, j] = s if _HIGHER_BETTER[j] else 1.0 - s
        out[~ok, j] = np.nan
    return {r.label: dict(zip(_METRIC_NAMES, out[i]))
            for i, r in enumerate(table.rows)}


def _cell(v: float, fmt: str) -> str:
    return "-" if not np.isfinite(v) else format(v, fmt)


def render_text(table: MetricsTable,
                reference_label: Optional[str] = None) -> str:
    """Aligned text table; optionally a peak-force comparison footer.

    The footer compares the row with the smallest max-channel peak to the
    named reference row, printing the ratio the way one reads it off the
    published table."""
    headers = (["condition", "success", "time(s)"]
               + [f"lnI {c}" for c in CHANNEL_NAMES]
               + [f"peak {c}" for c in CHANNEL_NAMES])
    body = []
    for r in table.rows:
        body.append([r.label, f"{100.0 * r.success_rate:.1f}%",
                     _cell(r.mean_time, ".2f")]
                    + [_cell(v, ".2f") for v in r.log_impulses]
                    + [_cell(v, ".2f") for v in r.peaks])
    widths = [max(len(h), *(len(row[j]) for row in body))
              for j, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) if j == 0 else h.rjust(w)
                       for j, (h, w) in enumerate(zip(headers, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w)
                               for j, (c, w) in enumerate(zip(row, widths))))

    if reference_label is not None:
        ref = table.row(reference_label)
        finite = [r for r in table.rows if np.isfinite(r.max_peak)]
        best = min(finite, key=lambda r: r.max_peak)
        ratio = best.max_peak / ref.max_peak
        lines.append("")
        lines.append(
            f"lowest peak: {best.label} ({best.max_peak_channel} "
            f"{best.max_peak:.2f} N) vs {ref.label} "
            f"({ref.max_peak_channel} {ref.max_peak:.2f} N): "
            f"{best.max_peak:.2f}/{ref.max_peak:.2f} "
            f"≈ {ratio:.3f}")
    return "\n".join(lines) + "\n"


def render_csv(table: MetricsTable) -> str:
    lines = [",".join(["condition"] + _METRIC_NAMES)]
    for r in table.rows:
        vals = _row_values(r)
        lines.append(",".join([r.label] + [format(v, ".6g") for v in vals]))
    return "\n".join(lines) + "\n"


def render_normalized_csv(table: MetricsTable) -> str:
    scores = normalized_scores(table)
    lines = [",".join(["condition"] + _METRIC_NAMES)]
    for r in table.rows:
        row = scores[r.label]
        lines.append(",".join([r.label] + [format(row[m], ".6g")
                                           for m in _METRIC_NAMES]))
    return "\n".join(lines) + "\n"
