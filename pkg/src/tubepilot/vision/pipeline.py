from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .segment import segment_coarse
from .components import extract_components
from .skeleton import (
    Skeleton, CurvatureFit, DegenerateFit, skeletonize_component, curvature_at,
    refine_centerline,
)


@dataclass
class VisionConfig:
    area_threshold: int = 12
    width_bounds: tuple = (3.0, 12.0)
    length_bounds: tuple = (20.0, 200.0)
    prune_len: int = 4
    min_contrast: int = 60
    curvature_form: str = "standard"   # "printed" reproduces the alternate base


@dataclass
class TrackResult:
    mask: np.ndarray
    skeleton: Optional[Skeleton]
    fit: Optional[CurvatureFit]

    @property
    def found(self) -> bool:
        return self.skeleton is not None

    @property
    def s_kappa(self) -> float:
        """Curvature score; a straight (or absent) tube scores 1."""
        return self.fit.s_kappa if self.fit is not None else 1.0


def thin_and_filter(components: List[np.ndarray],
                    cfg: Optional[VisionConfig] = None) -> List[Skeleton]:
    cfg = cfg or VisionConfig()
    w_lo, w_hi = cfg.width_bounds
    l_lo, l_hi = cfg.length_bounds
    out = []
    for comp in components:
        sk = skeletonize_component(comp, cfg.prune_len)
        if sk is None:
            continue
        if sk.endpoints != 2 or sk.junctions != 0:
            continue
        if not (l_lo <= sk.length <= l_hi):
            continue
        if not (w_lo <= sk.mean_width <= w_hi):
            continue
        out.append(sk)
    return out


def select_tube(skeletons: List[Skeleton]) -> Optional[Skeleton]:
    """The tube is the candidate nearest the phantom: largest mean x, ties
    going to the longer skeleton."""
    if not skeletons:
        return None
    return max(skeletons, key=lambda s: (s.mean_x, s.length))


def fit_curvature(skeleton,
                  cfg: Optional[VisionConfig] = None) -> CurvatureFit:
    """Quadratic y(x) fit. Accepts a Skeleton or a raw (K, 2) point array."""
    cfg = cfg or VisionConfig()
    pts = skeleton.points if isinstance(skeleton, Skeleton) else \
        np.asarray(skeleton, dtype=np.float64)
    if len(pts) < 3 or len(np.unique(pts[:, 0])) < 3:
        raise DegenerateFit("need at least 3 distinct x stations")
    x, y = pts[:, 0], pts[:, 1]
    a, b, c = np.polyfit(x, y, 2)
    resid = y - (a * x ** 2 + b * x + c)
    kappa = curvature_at(a, b, x, cfg.curvature_form)
    s = 1.0 / (1.0 + float(np.mean(kappa)))
    return CurvatureFit(a=float(a), b=float(b), c=float(c),
                        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                        s_kappa=s)


def track_tube(image: np.ndarray, cfg: Optional[VisionConfig] = None) -> TrackResult:
    """Full pipeline: mask -> components -> thin+filter -> select -> fit."""
    cfg = cfg or VisionConfig()
    mask = segment_coarse(image, cfg.min_contrast)
    comps = extract_components(mask, cfg.area_threshold)
    cands = thin_and_filter(comps, cfg)
    sk = select_tube(cands)
    fit = None
    if sk is not None:
        pts = refine_centerline(sk.comp, sk) if sk.comp is not None else sk.points
        try:
            fit = fit_curvature(pts, cfg)
        except DegenerateFit:
            sk, fit = None, None
    return TrackResult(mask=mask, skeleton=sk, fit=fit)
