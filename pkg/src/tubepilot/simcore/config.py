"""Configuration types for the tube simulator.

Geometry and tube parameters live in YAML data files so the channel shape
can be edited without touching code. The channel is described by a profile
of (x, center, half_width) breakpoints; upper and lower walls are derived
polylines z = center ± half_width.
"""

from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np
import yaml
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class Window:
    """An x-interval on the channel walls where a sensor integrates contact."""
    x_min: float
    x_max: float

    def contains(self, x) -> np.ndarray:
        return (x >= self.x_min) & (x <= self.x_max)


@dataclass
class PhantomGeometry:
    # profile breakpoints, strictly increasing in x
    xs: np.ndarray            # (M,)
    center: np.ndarray        # (M,)
    half_width: np.ndarray    # (M,)
    nostril: Window           # reports fx, fz (fy is identically 0 in-plane)
    nasal_cavity: Window      # f1, unsigned normal force
    throat: Window            # f2, unsigned normal force
    target: Window            # trachea segment; success region for the tip

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=np.float64)
        self.center = np.asarray(self.center, dtype=np.float64)
        self.half_width = np.asarray(self.half_width, dtype=np.float64)
        if self.xs.ndim != 1 or len(self.xs) < 2:
            raise ValueError("profile needs at least two breakpoints")
        if not np.all(np.diff(self.xs) > 0):
            raise ValueError("profile x must be strictly increasing")
        if np.any(self.half_width <= 0):
            raise ValueError("half_width must be positive")
        for w in (self.nostril, self.nasal_cavity, self.throat, self.target):
            if not (0.0 <= w.x_min < w.x_max <= self.xs[-1] + 1e-12):
                raise ValueError(f"sensor window {w} outside channel")
        # Walls are C2 splines through the breakpoints so the contact energy
        # stays C1 and the relaxation can reach tight residuals; piecewise
        # linear walls have slope kinks that stall the line search.
        self._spl_lower = CubicSpline(self.xs, self.center - self.half_width,
                                      bc_type="natural")
        self._spl_upper = CubicSpline(self.xs, self.center + self.half_width,
                                      bc_type="natural")

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])

    def lower_at(self, x, nu: int = 0):
        return self._spl_lower(x, nu)

    def upper_at(self, x, nu: int = 0):
        return self._spl_upper(x, nu)

    def center_at(self, x):
        return 0.5 * (self._spl_lower(x) + self._spl_upper(x))

    def half_width_at(self, x):
        return 0.5 * (self._spl_upper(x) - self._spl_lower(x))

    def segment_index(self, x):
        """Index of the profile segment containing x (clipped at the ends)."""
        return np.clip(np.searchsorted(self.xs, x, side="right") - 1,
                       0, len(self.xs) - 2)

    def wall_polyline(self, side: str, n: int = 160) -> np.ndarray:
        xs = np.linspace(0.0, self.x_end, n)
        z = self.upper_at(xs) if side == "upper" else self.lower_at(xs)
        return np.stack([xs, z], axis=1)

    def validate_clearance(self, tube_radius: float):
        xs = np.linspace(0.0, self.x_end, 600)
        if np.any(self.half_width_at(xs) <= tube_radius):
            raise ValueError("channel width must exceed tube diameter everywhere")

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomGeometry":
        prof = d["profile"]
        xs = np.array([p["x"] for p in prof])
        c = np.array([p["center"] for p in prof])
        h = np.array([p["half_width"] for p in prof])
        s = d["sensors"]
        return cls(
            xs=xs, center=c, half_width=h,
            nostril=Window(**s["nostril"]),
            nasal_cavity=Window(**s["nasal_cavity"]),
            throat=Window(**s["throat"]),
            target=Window(**d["target"]),
        )

    @classmethod
    def from_yaml(cls, path) -> "PhantomGeometry":
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))


@dataclass
class TubeModel:
    n_nodes: int = 48
    rest_length: float = 0.26 / 47     # per segment, m
    bending_stiffness: float = 3.0e-3  # N*m^2
    axial_stiffness: float = 60.0      # N
    radius: float = 0.006              # m
    contact_stiffness: float = 500.0   # k_c, N/m
    friction_mu: float = 0.3
    slip_ref: float = 5.0e-4           # m, tanh regularization scale for friction

    def __post_init__(self):
        if self.n_nodes < 10:
            raise ValueError("need at least 10 nodes")
        for name in ("rest_length", "bending_stiffness", "axial_stiffness",
                     "radius", "contact_stiffness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def length(self) -> float:
        return self.rest_length * (self.n_nodes - 1)

    @classmethod
    def from_dict(cls, d: dict) -> "TubeModel":
        return cls(**d)

    @classmethod
    def from_yaml(cls, path) -> "TubeModel":
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))


@dataclass
class RenderConfig:
    size: int = 128
    # world window of camera 1, meters; square pixels
    x_min: float = -0.320
    x_max: float = 0.064
    z_center: float = 0.0
    occluder_x: float = -0.003   # phantom interior hidden right of this
    bg_level: int = 18
    box_level: int = 72
    tube_level: int = 230
    noise_sigma: float = 5.0
    n_distractors: int = 2
    distractor_margin_px: float = 7.0
    seed: int = 0


@dataclass
class SimConfig:
    dt: float = 0.05                 # s, 20 Hz control
    max_step_xy: float = 0.003       # m, per-step |dx|, |dz| limit
    max_step_theta: float = 0.05     # rad
    workspace_x: tuple = (-0.40, -0.005)
    workspace_z: tuple = (-0.06, 0.06)
    workspace_theta: tuple = (-0.6, 0.6)
    grip_spring: float = 400.0       # N/m, orientation via virtual-node pull
    relax_max_iters: int = 200
    relax_tol: float = 1.0e-8        # N, max residual force at equilibrium
    unstable_residual: float = 1.0e-4  # N, beyond this after the cap => unstable
    time_limit: float = 20.0         # s
    force_limit: float = 5.0         # N, per-channel peak
    log_impulse_limit: float = 1.0   # ln(N*s)
    impulse_threshold: float = 1.5   # N, dead zone under the impulse integral
    render: RenderConfig = field(default_factory=RenderConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "render" in d:
            d["render"] = RenderConfig(**d["render"])
        for k in ("workspace_x", "workspace_z", "workspace_theta"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def _data_text(name: str) -> str:
    return resources.files("tubepilot.data").joinpath(name).read_text()


def load_sim_bundle(geometry_path: Optional[str] = None,
                    tube_path: Optional[str] = None,
                    sim_path: Optional[str] = None):
    """Load (geometry, tube, sim_config), falling back to packaged defaults."""
    if geometry_path:
        geom = PhantomGeometry.from_yaml(geometry_path)
    else:
        geom = PhantomGeometry.from_dict(yaml.safe_load(_data_text("phantom_default.yaml")))
    if tube_path:
        tube = TubeModel.from_yaml(tube_path)
    else:
        tube = TubeModel.from_dict(yaml.safe_load(_data_text("tube_default.yaml")))
    if sim_path:
        with open(sim_path) as f:
            sim = SimConfig.from_dict(yaml.safe_load(f))
    else:
        sim = SimConfig()
    geom.validate_clearance(tube.radius)
    return geom, tube, sim
