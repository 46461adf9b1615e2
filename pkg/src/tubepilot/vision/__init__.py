from .segment import otsu_threshold, segment_coarse
from .components import extract_components
from .thinning import zhang_suen
from .skeleton import Skeleton, DegenerateFit, CurvatureFit, curvature_at
from .pipeline import VisionConfig, TrackResult, thin_and_filter, select_tube, fit_curvature, track_tube

__all__ = [
    "otsu_threshold", "segment_coarse", "extract_components", "zhang_suen",
    "Skeleton", "DegenerateFit", "CurvatureFit", "curvature_at",
    "VisionConfig", "TrackResult", "thin_and_filter", "select_tube",
    "fit_curvature", "track_tube",
]
