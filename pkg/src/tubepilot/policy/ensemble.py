"""Confidence-weighted temporal ensembling over overlapping action chunks.

A chunk emitted at control step tau covers times tau..tau+k-1, so at any
step up to k predictions overlap. They are blended as

    p_t = sum_i e^(-m i) C_t[i] A_t[i] / sum_i e^(-m i) C_t[i]

with i = 0 the oldest surviving prediction (the original ACT convention;
order="newest_first" flips the age weighting for comparison).
"""
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import ActionConfidenceChunk


@dataclass(frozen=True)
class _Stored:
    step: int
    actions: np.ndarray
    confidences: np.ndarray


class EnsembleBuffer:
    """Ring of the last k emitted chunks, oldest first."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self._chunks = deque(maxlen=k)

    def __len__(self):
        return len(self._chunks)

    def push(self, step: int, chunk: ActionConfidenceChunk):
        if chunk.k != self.k:
            raise ValueError(f"chunk covers {chunk.k} steps, buffer wants {self.k}")
        if self._chunks and step <= self._chunks[-1].step:
            raise ValueError("emission steps must increase")
        self._chunks.append(_Stored(step, chunk.actions.copy(),
                                    chunk.confidences.copy()))

    def covering(self, t: int):
        """(action, confidence) pairs predicting time t, oldest first."""
        out = []
        for st in self._chunks:
            off = t - st.step
            if 0 <= off < self.k:
                out.append((st.actions[off], st.confidences[off]))
        return out


def temporal_ensemble(buffer: EnsembleBuffer, t: int, m: float,
                      order: str = "oldest_first") -> np.ndarray:
    if order not in ("oldest_first", "newest_first"):
        raise ValueError(f"unknown ensemble order {order!r}")
    pairs = buffer.covering(t)
    if not pairs:
        raise ValueError(f"no buffered chunk covers step {t}")
    if order == "newest_first":
        pairs = pairs[::-1]
    acts = np.stack([a for a, _ in pairs])            # (n, 3)
    confs = np.array([c for _, c in pairs])
    w = np.exp(-m * np.arange(len(pairs))) * confs
    return (w[:, None] * acts).sum(axis=0) / w.sum()
