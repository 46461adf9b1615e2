"""Scripted demonstrator.

Stands in for the experienced teleoperators: advances along the channel
centerline, corrects lateral drift proportionally, and sheds insertion speed
when any sensor channel climbs past a soft limit, so the recorded runs land
inside the training filter rather than merely inside the safety one.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..simcore import ControlIncrement, ForceSample, SimState


@dataclass(frozen=True)
class ScriptedExpertConfig:
    waypoints: np.ndarray            # (W, 2) centerline samples, x ascending
    insert_step: float = 0.0026     # m per tick along the local tangent
    kp_z: float = 0.12              # lateral correction gain, 1/tick
    kp_theta: float = 0.08          # holder alignment gain, 1/tick
    compliance_gain: float = 0.0018  # m of insertion shed per N of excess
    soft_limit: float = 2.2         # N, start of the compliant retreat
    peak_limit: float = 5.0         # N, hard safety bound (never approached)
    noise_scale: float = 1.2e-4     # m, per-axis command jitter
    lookahead: float = 0.025        # m ahead of the tip on the path
    seed: int = 0
    dt: float = 0.05
    max_step_xy: float = 0.003
    max_step_theta: float = 0.05

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=np.float64)
        if wp.ndim != 2 or wp.shape[1] != 2 or len(wp) < 2:
            raise ValueError("waypoints must be (W >= 2, 2)")
        if np.any(np.diff(wp[:, 0]) <= 0):
            raise ValueError("waypoint x must be strictly increasing")
        object.__setattr__(self, "waypoints", wp)
        for name in ("insert_step", "kp_z", "kp_theta", "compliance_gain",
                     "lookahead", "dt", "max_step_xy", "max_step_theta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        if not 0.0 < self.soft_limit < self.peak_limit:
            raise ValueError("soft limit must sit below the peak limit")

    @classmethod
    def for_geometry(cls, geom, n: int = 96, **over) -> "ScriptedExpertConfig":
        xs = np.linspace(0.0, geom.x_end, n)
        wp = np.stack([xs, geom.center_at(xs)], axis=1)
        return cls(waypoints=wp, **over)


def scripted_expert(state: SimState, cfg: ScriptedExpertConfig,
                    sample: Optional[ForceSample] = None) -> ControlIncrement:
    """One demonstration command for the current state.

    The tracked pose is the holder's, not the tip's: the channel walls guide
    the tube, so the holder feeds along the waypoint tangent at its own
    (clamped) x, holds the path height, and keeps itself aligned with the
    local path direction. Shoving the holder sideways against a deeply
    seated tube stores bending energy fast, which is exactly what the
    compliance term and the small gains avoid.

    Pure given (state, cfg, sample): the command noise is keyed on the tick
    index, so replaying a state sequence replays the commands."""
    wx, wz = cfg.waypoints[:, 0], cfg.waypoints[:, 1]
    ee = state.ee_pose
    x_here = float(np.clip(ee[0], wx[0], wx[-1]))
    x_ahead = min(x_here + cfg.lookahead, wx[-1])
    z_here = float(np.interp(x_here, wx, wz))
    z_ahead = float(np.interp(x_ahead, wx, wz))
    run = max(x_ahead - x_here, 1e-6)
    slope = (z_ahead - z_here) / run
    tangent = np.array([1.0, slope]) / np.hypot(1.0, slope)

    dx = cfg.insert_step * tangent[0]
    dz = cfg.insert_step * tangent[1] + cfg.kp_z * (z_here - ee[1])
    dtheta = cfg.kp_theta * (np.arctan(slope) - ee[2])

    if sample is not None:
        excess = max(0.0, float(np.max(np.abs(sample.channels())))
                     - cfg.soft_limit)
        dx -= cfg.compliance_gain * excess

    if cfg.noise_scale > 0.0:
        tick = int(round(state.elapsed / cfg.dt))
        rng = np.random.default_rng([cfg.seed, tick, 0xA2])
        jitter = rng.normal(0.0, cfg.noise_scale, 3)
        dx += jitter[0]
        dz += jitter[1]
        dtheta += jitter[2] * (cfg.max_step_theta / cfg.max_step_xy)

    m, mt = cfg.max_step_xy, cfg.max_step_theta
    return ControlIncrement(dx=float(np.clip(dx, -m, m)),
                            dz=float(np.clip(dz, -m, m)),
                            dtheta=float(np.clip(dtheta, -mt, mt)))


class Expert:
    """Callable wrapper binding a config, for use as a rollout agent."""

    def __init__(self, cfg: ScriptedExpertConfig):
        self.cfg = cfg

    def __call__(self, state: SimState,
                 sample: Optional[ForceSample] = None) -> ControlIncrement:
        return scripted_expert(state, self.cfg, sample)
