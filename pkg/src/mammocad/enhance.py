"""Post-denoise image improvement.

Median filtering, intensity normalization, Otsu thresholding,
radiopaque artifact/tag removal and pectoral-muscle removal. The
enhancement chain runs in that order and keeps images in [0, 1].
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import as_gray, connected_components, largest_component


class DegenerateInputError(ValueError):
    """Raised when an operation cannot work on a constant image."""


@dataclass(frozen=True)
class EnhanceConfig:
    median_window: int = 10
    r1: int = 60                    # normalization bounds, 8-bit scale
    r2: int = 210
    pectoral_tolerance: float = 16.0  # gray levels
    pectoral_area_cap: float = 0.5    # fraction of breast pixels

    def __post_init__(self):
        if not 0 <= self.r1 < self.r2 <= 255:
            raise ValueError(f"need 0 <= r1 < r2 <= 255, got {self.r1}, {self.r2}")
        if self.median_window < 1:
            raise ValueError("median window must be at least 1 pixel")


def median_filter(image, window: int) -> np.ndarray:
    """Windowed median with replicate borders.

    The output pixel sits at offset (window//2, window//2) inside its
    window, which makes even window sizes well defined; an even pixel
    count takes the mean of the two middle order statistics.
    """
    img = as_gray(image)
    if window < 1:
        raise ValueError("window must be at least 1 pixel")
    if window == 1:
        return img.copy()
    before = window // 2
    after = window - 1 - before
    padded = np.pad(img, ((before, after), (before, after)), mode="edge")
    h, w = img.shape
    out = np.empty_like(img)
    # chunk rows to keep the window view's memory bounded on large images
    chunk = max(1, int(4e6 / (w * window * window)))
    for r0 in range(0, h, chunk):
        r1 = min(r0 + chunk, h)
        view = sliding_window_view(padded[r0:r1 + window - 1], (window, window))
        out[r0:r1] = np.median(view, axis=(2, 3))
    return out


def normalize(image, r1: int = 60, r2: int = 210) -> np.ndarray:
    """Affine rescale of the dynamic range onto [r1, r2] (8-bit scale).

    Dividing before scaling makes the endpoints exact: the darkest
    pixel lands on r1/255 and the brightest on r2/255 bit-for-bit.
    """
    img = as_gray(image)
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        raise DegenerateInputError("cannot normalize a constant image")
    ratio = (img - lo) / (hi - lo)
    return (r1 + ratio * (r2 - r1)) / 255.0


def _histogram_256(image: np.ndarray) -> np.ndarray:
    levels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.int64)
    return np.bincount(levels.ravel(), minlength=256).astype(np.float64)


def otsu_level(hist) -> int:
    """Threshold maximizing between-class variance on a 256-bin histogram.

    Ties resolve to the lowest threshold; a single-level histogram
    returns that level.
    """
    h = np.asarray(hist, dtype=np.float64)
    if h.shape != (256,):
        raise ValueError("expected a 256-bin histogram")
    total = h.sum()
    if total <= 0:
        raise ValueError("empty histogram")
    occupied = np.flatnonzero(h)
    if occupied.size == 1:
        return int(occupied[0])
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(h)
    m0 = np.cumsum(h * levels)
    mean_total = m0[-1]
    w1 = total - w0
    mu0 = np.divide(m0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(mean_total - m0, w1, out=np.zeros(256), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return int(np.argmax(between))  # argmax takes the first (lowest) maximum


def otsu_threshold(image) -> tuple[int, np.ndarray]:
    """Otsu threshold level and the mask of pixels above it."""
    img = as_gray(image)
    hist = _histogram_256(img)
    t = otsu_level(hist)
    levels = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.int64)
    return t, levels > t


def remove_artifacts(image) -> np.ndarray:
    """Zero everything outside the largest Otsu-foreground component.

    Scan tags and radiopaque markers are small bright blobs detached
    from the breast; keeping only the biggest component removes them.
    """
    img = as_gray(image)
    _, mask = otsu_threshold(img)
    breast = largest_component(connected_components(mask))
    out = img.copy()
    out[~breast] = 0.0
    return out


_NEIGHBOURS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _grow_region(img, breast, seed, tol):
    """8-connected growth from seed, admitting pixels near the running mean."""
    h, w = img.shape
    region = np.zeros((h, w), dtype=bool)
    sr, sc = seed
    if not breast[sr, sc]:
        return region
    region[sr, sc] = True
    total = float(img[sr, sc])
    count = 1
    queue = deque([(sr, sc)])
    while queue:
        r, c = queue.popleft()
        for dr, dc in _NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            if region[nr, nc] or not breast[nr, nc]:
                continue
            if abs(img[nr, nc] - total / count) <= tol:
                region[nr, nc] = True
                total += float(img[nr, nc])
                count += 1
                queue.append((nr, nc))
    return region


def remove_pectoral(image, config: EnhanceConfig = EnhanceConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Remove the bright triangular pectoral muscle at the top corner.

    The image is mirrored so the chest wall sits at the left edge, a
    region is grown from a seed just inside the top-left corner, and
    the region is zeroed only if it touches both the top and left edges
    and stays under the area cap. Otherwise the input is returned
    unchanged with an empty mask (fail-safe), mirrored back either way.
    """
    img = as_gray(image)
    h, w = img.shape
    flipped = img[:, w // 2:].sum() > img[:, :w // 2].sum()
    work = img[:, ::-1] if flipped else img

    breast = work > 0.0
    removed = np.zeros((h, w), dtype=bool)
    breast_area = int(breast.sum())
    if breast_area > 0:
        seed = (int(0.02 * h), int(0.02 * w))
        region = _grow_region(work, breast, seed, config.pectoral_tolerance / 255.0)
        touches_top = bool(region[0, :].any())
        touches_left = bool(region[:, 0].any())
        small_enough = region.sum() < config.pectoral_area_cap * breast_area
        if region.any() and touches_top and touches_left and small_enough:
            removed = region
    out = work.copy()
    out[removed] = 0.0
    if flipped:
        out = out[:, ::-1]
        removed = removed[:, ::-1]
    return out, removed


def enhance_chain(image, config: EnhanceConfig = EnhanceConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Median filter, normalize, strip artifacts, then drop the pectoral.

    Returns the enhanced image and the removed-pectoral mask.
    """
    img = median_filter(image, config.median_window)
    img = normalize(img, config.r1, config.r2)
    img = remove_artifacts(img)
    return remove_pectoral(img, config)
