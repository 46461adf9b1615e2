"""Zhang-Suen binary thinning, vectorized over the whole grid."""

import numpy as np


def _neighbors(img: np.ndarray):
    """The 8 neighbors P2..P9 (N, NE, E, SE, S, SW, W, NW) of every pixel."""
    p = np.pad(img, 1, mode="constant")
    n = p[:-2, 1:-1]
    ne = p[:-2, 2:]
    e = p[1:-1, 2:]
    se = p[2:, 2:]
    s = p[2:, 1:-1]
    sw = p[2:, :-2]
    w = p[1:-1, :-2]
    nw = p[:-2, :-2]
    return n, ne, e, se, s, sw, w, nw


def zhang_suen(mask: np.ndarray, max_iters: int = 200) -> np.ndarray:
    """Thin a blob to a 1-px-wide 8-connected curve."""
    img = np.asarray(mask, dtype=np.uint8).copy()
    for _ in range(max_iters):
        changed = False
        for sub in (0, 1):
            nb = _neighbors(img)
            ring = np.stack(nb + (nb[0],), axis=0)
            b = np.sum(np.stack(nb, axis=0), axis=0)
            a = np.sum((ring[:-1] == 0) & (ring[1:] == 1), axis=0)
            n, ne, e, se, s, sw, w, nw = nb
            if sub == 0:
                c1 = n * e * s == 0
                c2 = e * s * w == 0
            else:
                c1 = n * e * w == 0
                c2 = n * s * w == 0
            cond = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
            if np.any(cond):
                img[cond] = 0
                changed = True
        if not changed:
            break
    return img.astype(bool)
