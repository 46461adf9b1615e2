from .config import PhantomGeometry, TubeModel, SimConfig, load_sim_bundle
from .sim import (
    SimState, ControlIncrement, ForceSample, Outcome, Simulator,
)
from .render import render_synthetic_tube, save_png, load_png

__all__ = [
    "PhantomGeometry", "TubeModel", "SimConfig", "load_sim_bundle",
    "SimState", "ControlIncrement", "ForceSample", "Outcome", "Simulator",
    "render_synthetic_tube", "save_png", "load_png",
]
