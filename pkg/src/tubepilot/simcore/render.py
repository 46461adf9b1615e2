"""Synthetic grayscale renders of the scene.

Camera 1 sees only the tube portion outside the phantom; everything past the
inlet is hidden behind a flat occluder rectangle. The occluder is drawn
mid-gray so intensity thresholding keeps it in the background class and the
tube stays a single isolated bright component. Distractor blobs and pixel
noise are seeded per frame, so renders are reproducible.
"""

from typing import Optional, Tuple

import numpy as np
from PIL import Image

from .config import PhantomGeometry, RenderConfig


def save_png(img: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def draw_polyline(img: np.ndarray, pts: np.ndarray, radius: float, value: float):
    """Stamp a thick polyline (union of capsules) of constant intensity.

    pts are float pixel coordinates (x=col, y=row).
    """
    h, w = img.shape
    pts = np.asarray(pts, dtype=np.float64)
    for k in range(len(pts) - 1):
        p0, p1 = pts[k], pts[k + 1]
        x_lo = int(np.floor(min(p0[0], p1[0]) - radius - 1))
        x_hi = int(np.ceil(max(p0[0], p1[0]) + radius + 1))
        y_lo = int(np.floor(min(p0[1], p1[1]) - radius - 1))
        y_hi = int(np.ceil(max(p0[1], p1[1]) + radius + 1))
        x_lo, x_hi = max(x_lo, 0), min(x_hi, w - 1)
        y_lo, y_hi = max(y_lo, 0), min(y_hi, h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
        d = p1 - p0
        denom = float(d @ d)
        if denom < 1e-12:
            t = np.zeros_like(xs, dtype=np.float64)
        else:
            t = ((xs - p0[0]) * d[0] + (ys - p0[1]) * d[1]) / denom
            t = np.clip(t, 0.0, 1.0)
        cx = p0[0] + t * d[0]
        cy = p0[1] + t * d[1]
        dist2 = (xs - cx) ** 2 + (ys - cy) ** 2
        sub = img[y_lo:y_hi + 1, x_lo:x_hi + 1]
        sub[dist2 <= radius * radius] = value


def draw_ellipse(img: np.ndarray, cx: float, cy: float,
                 rx: float, ry: float, value: float):
    h, w = img.shape
    x_lo = max(int(np.floor(cx - rx - 1)), 0)
    x_hi = min(int(np.ceil(cx + rx + 1)), w - 1)
    y_lo = max(int(np.floor(cy - ry - 1)), 0)
    y_hi = min(int(np.ceil(cy + ry + 1)), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
    m = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    img[y_lo:y_hi + 1, x_lo:x_hi + 1][m] = value


def _scatter_distractors(img: np.ndarray, rng, n: int, avoid_pts: np.ndarray,
                         margin: float, x_limit: Optional[float] = None):
    """Place bright roundish blobs away from the tube path (they model desk
    clutter, not occlusions). Rejection sampling with a distance margin."""
    h, w = img.shape
    for _ in range(n):
        for _attempt in range(50):
            rx = rng.uniform(3.0, 8.0)
            ry = rng.uniform(3.0, 8.0)
            cx = rng.uniform(rx + 1, (x_limit if x_limit is not None else w) - rx - 1)
            cy = rng.uniform(ry + 1, h - ry - 1)
            if avoid_pts.size:
                d = np.hypot(avoid_pts[:, 0] - cx, avoid_pts[:, 1] - cy)
                if d.min() < max(rx, ry) + margin:
                    continue
            draw_ellipse(img, cx, cy, rx, ry, rng.uniform(150, 220))
            break


def _cam1_transform(cfg: RenderConfig):
    scale = cfg.size / (cfg.x_max - cfg.x_min)
    z_top = cfg.z_center + 0.5 * (cfg.x_max - cfg.x_min)

    def to_px(pts):
        pts = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(pts)
        out[:, 0] = (pts[:, 0] - cfg.x_min) * scale
        out[:, 1] = (z_top - pts[:, 1]) * scale
        return out
    return to_px, scale


def render_camera1(positions: np.ndarray, cfg: RenderConfig,
                   tube_radius: float, frame_idx: int) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, frame_idx])
    img = np.full((cfg.size, cfg.size), float(cfg.bg_level))
    to_px, scale = _cam1_transform(cfg)
    pts = to_px(positions)
    _scatter_distractors(img, rng, cfg.n_distractors, pts,
                         cfg.distractor_margin_px,
                         x_limit=(cfg.occluder_x - cfg.x_min) * scale)
    draw_polyline(img, pts, tube_radius * scale, cfg.tube_level)
    occ_col = int(np.floor((cfg.occluder_x - cfg.x_min) * scale))
    img[:, occ_col:] = cfg.box_level
    img += rng.normal(0.0, cfg.noise_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_side(positions: np.ndarray, geom: PhantomGeometry,
                tube_radius: float, size: int = 128) -> np.ndarray:
    """Debug view of the whole channel with walls, target box and tube.
    Deterministic, no noise; streamed to the console but never fed to the
    policy."""
    x_min, x_max = -0.06, geom.x_end + 0.02
    scale = size / (x_max - x_min)
    z_top = 0.05

    def to_px(pts):
        pts = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(pts)
        out[:, 0] = (pts[:, 0] - x_min) * scale
        out[:, 1] = (z_top - pts[:, 1]) * scale
        return out

    img = np.full((size, size), 12.0)
    for side in ("lower", "upper"):
        draw_polyline(img, to_px(geom.wall_polyline(side)), 1.0, 110)
    tgt = geom.target
    zc0 = geom.center_at(tgt.x_min)
    box = np.array([
        [tgt.x_min, zc0 - geom.half_width_at(tgt.x_min)],
        [tgt.x_min, zc0 + geom.half_width_at(tgt.x_min)],
        [tgt.x_max, geom.center_at(tgt.x_max) + geom.half_width_at(tgt.x_max)],
        [tgt.x_max, geom.center_at(tgt.x_max) - geom.half_width_at(tgt.x_max)],
        [tgt.x_min, zc0 - geom.half_width_at(tgt.x_min)],
    ])
    draw_polyline(img, to_px(box), 0.7, 70)
    for win, val in ((geom.nasal_cavity, 160), (geom.throat, 160),
                     (geom.nostril, 140)):
        xs = np.linspace(win.x_min, win.x_max, 8)
        lo = np.stack([xs, geom.lower_at(xs)], axis=1)
        hi = np.stack([xs, geom.upper_at(xs)], axis=1)
        draw_polyline(img, to_px(lo), 1.2, val)
        draw_polyline(img, to_px(hi), 1.2, val)
    draw_polyline(img, to_px(positions), max(tube_radius * scale, 1.0), 235)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_synthetic_tube(a: float, b: float, c: float,
                          x0: float, x1: float, width_px: float,
                          size: int = 128, n_distractors: int = 0,
                          seed: int = 0, noise_sigma: float = 4.0
                          ) -> Tuple[np.ndarray, np.ndarray]:
    """Ground-truth fixture: draw y = a*x^2 + b*x + c in pixel coordinates.

    Returns (image, centerline) where centerline is densely sampled true
    curve points (x=col, y=row) for oracle comparisons.
    """
    rng = np.random.default_rng([seed, 9173])
    img = np.full((size, size), 18.0)
    xs = np.linspace(x0, x1, 4 * size)
    ys = a * xs ** 2 + b * xs + c
    pts = np.stack([xs, ys], axis=1)
    _scatter_distractors(img, rng, n_distractors, pts, margin=8.0)
    draw_polyline(img, pts, width_px / 2.0, 230)
    if noise_sigma > 0:
        img += rng.normal(0.0, noise_sigma, img.shape)
    keep = (ys >= 0) & (ys <= size - 1) & (xs >= 0) & (xs <= size - 1)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), pts[keep]
