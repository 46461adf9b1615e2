"""Coarse foreground mask. Threshold segmentation stands in for a learned
segmenter; everything downstream only needs a binary mask, so a model can be
swapped in behind segment_coarse without touching the rest of the pipeline."""

import numpy as np


def otsu_threshold(image: np.ndarray) -> int:
    """Threshold maximizing between-class variance on the 256-bin histogram."""
    img = np.asarray(image)
    hist = np.bincount(img.ravel().astype(np.uint8), minlength=256).astype(np.float64)
    total = hist.sum()
    if total == 0:
        return 0
    p = hist / total
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    mu_t = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_t * omega - mu) ** 2 / denom, 0.0)
    return int(np.argmax(sigma_b))


def segment_coarse(image: np.ndarray, min_contrast: int = 60) -> np.ndarray:
    """Binary mask of bright pixels.

    A contrast guard keeps near-uniform images (no tube in view) from being
    split down the middle of their noise distribution.
    """
    img = np.asarray(image, dtype=np.uint8)
    if int(img.max()) - int(img.min()) < min_contrast:
        return np.zeros(img.shape, dtype=bool)
    return img > otsu_threshold(img)
