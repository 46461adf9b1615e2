from typing import List

import numpy as np
from scipy import ndimage

# 1-connectivity: edge-sharing neighbors only, so diagonal touches split
_FOUR = np.array([[0, 1, 0],
                  [1, 1, 1],
                  [0, 1, 0]], dtype=int)


def extract_components(mask: np.ndarray, area_threshold: int = 12) -> List[np.ndarray]:
    """Connected components of the mask with small ones dropped.

    Components whose area is less than or equal to area_threshold are
    removed. Returns full-size boolean masks, largest first.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_FOUR)
    if n == 0:
        return []
    areas = np.bincount(labels.ravel())[1:]
    keep = [(int(areas[i]), i + 1) for i in range(n) if areas[i] > area_threshold]
    keep.sort(key=lambda t: (-t[0], t[1]))
    return [labels == lab for _, lab in keep]
