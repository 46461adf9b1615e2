from dataclasses import dataclass
from typing import Tuple

import numpy as np

CHANNEL_NAMES = ("fx", "fy", "fz", "f1", "f2")

IMPULSE_FLOOR = 1e-9   # N*s, keeps ln(I) finite for clean episodes


@dataclass(frozen=True)
class FilterConfig:
    """Safety limits and the training keep fraction.

    Training mode scales every limit by keep_fraction. For the impulse that
    scaling happens in the log domain by default; impulse_domain="linear"
    scales I itself instead (the bound becomes I < keep_fraction * e^limit).
    """
    f_threshold: float = 1.5        # N, excess-force clamp level
    time_limit: float = 20.0        # s
    peak_limit: float = 5.0         # N
    log_impulse_limit: float = 1.0  # log N*s
    keep_fraction: float = 0.7
    impulse_domain: str = "log"

    def __post_init__(self):
        for name in ("f_threshold", "time_limit", "peak_limit",
                     "log_impulse_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must be in (0, 1]")
        if self.impulse_domain not in ("log", "linear"):
            raise ValueError(f"unknown impulse_domain {self.impulse_domain!r}")


@dataclass(frozen=True)
class EpisodeMetrics:
    duration: float                 # s
    peaks: np.ndarray               # (5,) N, per channel
    log_impulses: np.ndarray        # (5,) log N*s, per channel

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if np.any(np.asarray(self.peaks) < 0):
            raise ValueError("peaks must be non-negative")


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    mode: str
    reasons: Tuple[str, ...] = ()


def compute_impulse(signal, threshold: float = 1.5, dt: float = 0.05) -> float:
    """Integral of the force excess over threshold, trapezoidal at dt.

    The excess is clamped at zero before integrating, so dips below the
    threshold never offset time spent above it."""
    f = np.asarray(signal, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty force signal")
    if dt <= 0:
        raise ValueError("dt must be positive")
    excess = np.maximum(f - threshold, 0.0)
    if f.size == 1:
        return 0.0
    return float(np.trapezoid(excess, dx=dt))


def compute_metrics(episode, config: FilterConfig = None) -> EpisodeMetrics:
    """Duration, per-channel force peak and log impulse for a recorded run.

    Channels are taken as magnitudes; the sensors report unsigned force."""
    cfg = config or FilterConfig()
    ch = np.abs(np.asarray(episode.channels, dtype=np.float64))
    t = np.asarray(episode.t, dtype=np.float64)
    if ch.ndim != 2 or ch.shape[1] != len(CHANNEL_NAMES):
        raise ValueError(f"expected (n, {len(CHANNEL_NAMES)}) channel array")
    peaks = ch.max(axis=0)
    imp = np.array([compute_impulse(ch[:, j], cfg.f_threshold, episode.dt)
                    for j in range(ch.shape[1])])
    lni = np.log(np.maximum(imp, IMPULSE_FLOOR))
    return EpisodeMetrics(duration=float(t[-1]), peaks=peaks, log_impulses=lni)


def filter_episode(metrics: EpisodeMetrics, config: FilterConfig = None,
                   mode: str = "safety") -> Verdict:
    """Check metrics against the limits; training mode tightens by 0.7.

    The verdict carries every violated criterion, not just the first."""
    cfg = config or FilterConfig()
    if mode not in ("safety", "training"):
        raise ValueError(f"unknown filter mode {mode!r}")
    scale = cfg.keep_fraction if mode == "training" else 1.0
    reasons = []
    t_lim = cfg.time_limit * scale
    if metrics.duration >= t_lim:
        reasons.append(f"time {metrics.duration:.2f} s >= {t_lim:g} s")
    p_lim = cfg.peak_limit * scale
    for name, p in zip(CHANNEL_NAMES, np.asarray(metrics.peaks)):
        if p >= p_lim:
            reasons.append(f"peak {name} {p:.3f} N >= {p_lim:g} N")
    lni = np.asarray(metrics.log_impulses)
    if cfg.impulse_domain == "log" or mode == "safety":
        i_lim = cfg.log_impulse_limit * scale
        for name, v in zip(CHANNEL_NAMES, lni):
            if v >= i_lim:
                reasons.append(f"ln impulse {name} {v:.3f} >= {i_lim:g}")
    else:
        i_lim = scale * float(np.exp(cfg.log_impulse_limit))
        for name, v in zip(CHANNEL_NAMES, np.exp(lni)):
            if v >= i_lim:
                reasons.append(f"impulse {name} {v:.3f} N*s >= {i_lim:.3f} N*s")
    return Verdict(accepted=not reasons, mode=mode, reasons=tuple(reasons))
