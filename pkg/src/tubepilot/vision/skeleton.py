from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .thinning import zhang_suen

_OFFS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class DegenerateFit(ValueError):
    """Raised when a point set cannot support a y(x) quadratic fit."""


@dataclass
class Skeleton:
    points: np.ndarray     # (K, 2) pixel coordinates (x=col, y=row), ordered
    endpoints: int
    junctions: int
    mean_width: float      # parent component area / skeleton length, px
    length: float          # arc length along the ordered points, px
    comp: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def mean_x(self) -> float:
        return float(self.points[:, 0].mean())


@dataclass(frozen=True)
class CurvatureFit:
    a: float
    b: float
    c: float
    residual_rms: float
    s_kappa: float


def _neighbor_counts(img: np.ndarray) -> np.ndarray:
    p = np.pad(img.astype(np.uint8), 1)
    out = np.zeros_like(img, dtype=np.int32)
    for dy, dx in _OFFS:
        out += p[1 + dy:p.shape[0] - 1 + dy, 1 + dx:p.shape[1] - 1 + dx]
    return out


def _ring_stats(img: np.ndarray):
    """Neighbor count B and crossing number X per pixel.

    X counts 0->1 transitions around the 8-neighbor ring; thinned staircase
    corners have 3 neighbors but X=2, so X is what separates true branch
    points (X>=3) and endpoints (X=1) from plain curve pixels."""
    u = img.astype(np.uint8)
    p = np.pad(u, 1)
    h, w = u.shape
    ring_order = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    ring = np.stack([p[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx]
                     for dy, dx in ring_order + ring_order[:1]], axis=0)
    B = ring[:-1].sum(axis=0)
    X = np.sum((ring[:-1] == 0) & (ring[1:] == 1), axis=0)
    return B, X


def prune_spurs(thin: np.ndarray, max_len: int = 4) -> np.ndarray:
    """Strip thinning artifacts: endpoint branches that reach a branch point
    within max_len steps are deleted."""
    img = thin.copy()
    for _ in range(8):
        B, X = _ring_stats(img)
        endpoints = np.argwhere(img & (X == 1) & (B == 1))
        removed_any = False
        for y0, x0 in endpoints:
            path = [(int(y0), int(x0))]
            prev = None
            while len(path) <= max_len:
                y, x = path[-1]
                nbrs = [(y + dy, x + dx) for dy, dx in _OFFS
                        if 0 <= y + dy < img.shape[0] and 0 <= x + dx < img.shape[1]
                        and img[y + dy, x + dx] and (y + dy, x + dx) != prev]
                if not nbrs:
                    break
                hit_branch = None
                for ny, nx in nbrs:
                    if X[ny, nx] >= 3:
                        hit_branch = (ny, nx)
                        break
                if hit_branch is not None:
                    for py, px in path:
                        img[py, px] = False
                    removed_any = True
                    break
                if len(nbrs) != 1:
                    break
                prev = (y, x)
                path.append(nbrs[0])
        if not removed_any:
            break
    return img


def _order_points(img: np.ndarray) -> np.ndarray:
    """Longest geodesic path through the skeleton, found with two BFS passes.

    Thinning leaves 2 px pockets at thick staircase corners; a greedy walk
    from an endpoint can step into one and stall, so the diameter path is
    extracted instead and pocket pixels are dropped."""
    pix = np.argwhere(img)
    if len(pix) == 0:
        return np.empty((0, 2))
    h, w = img.shape

    def bfs(start):
        dist = {start: 0}
        parent = {start: None}
        queue = [start]
        head = 0
        while head < len(queue):
            cur = queue[head]
            head += 1
            y, x = cur
            for dy, dx in _OFFS:
                cand = (y + dy, x + dx)
                if (0 <= cand[0] < h and 0 <= cand[1] < w
                        and img[cand] and cand not in dist):
                    dist[cand] = dist[cur] + 1
                    parent[cand] = cur
                    queue.append(cand)
        far_d = max(dist.values())
        far = min(p for p, d in dist.items() if d == far_d)
        return far, parent

    u, _ = bfs(tuple(pix[0]))
    v, parent = bfs(u)
    path = [v]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    pts = np.array(path, dtype=np.float64)[:, ::-1]      # (y, x) -> (x, y)
    if tuple(pts[0]) > tuple(pts[-1]):
        pts = pts[::-1]
    return pts


def skeletonize_component(comp_mask: np.ndarray, prune_len: int = 4) -> Optional[Skeleton]:
    thin = prune_spurs(zhang_suen(comp_mask), prune_len)
    if not thin.any():
        return None
    B, X = _ring_stats(thin)
    n_end = int(np.sum(thin & (X == 1) & (B >= 1)))
    n_junc = int(np.sum(thin & (X >= 3)))
    pts = _order_points(thin)
    if len(pts) < 2:
        return None
    seglen = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    length = float(seglen.sum()) if len(pts) > 1 else float(len(pts))
    if length <= 0:
        length = float(len(pts))
    area = float(np.sum(comp_mask))
    return Skeleton(points=pts, endpoints=n_end, junctions=n_junc,
                    mean_width=area / length, length=length, comp=comp_mask)


def refine_centerline(comp: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    """Subpixel centerline from per-column centroids of the component.

    Thinned points are quantized to the grid, which floors the fit error
    near 1e-4 px^-1 on the quadratic coefficient. A symmetric stroke is
    centered on its column centroid, so averaging rows per column recovers
    the centerline well under a pixel. Half a stroke width is trimmed from
    each end to keep the end caps out of the fit."""
    pts = skeleton.points
    margin = int(np.ceil(skeleton.mean_width / 2.0)) + 1
    x_lo = pts[:, 0].min() + margin
    x_hi = pts[:, 0].max() - margin
    ys, xs = np.nonzero(comp)
    keep = (xs >= x_lo) & (xs <= x_hi)
    if int(keep.sum()) < 3:
        return pts
    xs = xs[keep]
    ys = ys[keep].astype(np.float64)
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    cols, starts = np.unique(xs, return_index=True)
    sums = np.add.reduceat(ys, starts)
    counts = np.diff(np.append(starts, len(ys)))
    return np.stack([cols.astype(np.float64), sums / counts], axis=1)


def curvature_at(a: float, b: float, x, form: str = "standard"):
    """Curvature of y = a x^2 + b x + c at station x.

    The printed variant keeps the (1 + 2ax + b) base un-squared; it matches
    the standard form only where 2ax + b is 0 or 1. The base is clamped to
    stay real."""
    x = np.asarray(x, dtype=np.float64)
    if form == "standard":
        return 2.0 * abs(a) / (1.0 + (2.0 * a * x + b) ** 2) ** 1.5
    if form == "printed":
        base = np.maximum(1.0 + 2.0 * a * x + b, 1e-9)
        return 2.0 * abs(a) / np.sqrt(base ** 3)
    raise ValueError(f"unknown curvature form {form!r}")
