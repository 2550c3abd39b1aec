"""Training-set augmentation.

Each variant runs through: random rotation (corners filled with the
training-set mean intensity), random horizontal mirror, random scale
in [0.9, 1.1], resize of the shorter side to the target, random crop
and a random shift of up to 4 pixels with replicate fill. The set
builder emits 4 rotations x 4 crops = 16 variants per source image.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..core import as_gray, resize_bilinear

SHIFT_LIMIT = 4
SCALE_RANGE = (0.9, 1.1)


def _rotate(image, angle_deg, fill):
    if angle_deg == 0.0:
        return image
    return np.clip(ndimage.rotate(image, angle_deg, reshape=False, order=1,
                                  mode="constant", cval=fill, prefilter=False), 0.0, 1.0)


def _resize_shorter_side(image, target):
    h, w = image.shape
    if h <= w:
        return resize_bilinear(image, max(target, round(w * target / h)), target)
    return resize_bilinear(image, target, max(target, round(h * target / w)))


def _shift(image, dr, dc):
    padded = np.pad(image, SHIFT_LIMIT, mode="edge")
    h, w = image.shape
    r0 = SHIFT_LIMIT + dr
    c0 = SHIFT_LIMIT + dc
    return padded[r0:r0 + h, c0:c0 + w]


def augment_with_params(image, angle_deg, mirror, scale, crop_rc, shift_rc,
                        target_size, fill):
    """Deterministic augmentation with every random draw pinned."""
    img = _rotate(as_gray(image), angle_deg, fill)
    if mirror:
        img = img[:, ::-1]
    if scale != 1.0:
        h, w = img.shape
        img = resize_bilinear(img, max(1, round(w * scale)), max(1, round(h * scale)))
    img = _resize_shorter_side(img, target_size)
    r, c = crop_rc
    if r + target_size > img.shape[0] or c + target_size > img.shape[1]:
        raise ValueError("crop window falls outside the resized image")
    img = img[r:r + target_size, c:c + target_size]
    return _shift(img, *shift_rc)


def _draw_variant(img, rng, target_size):
    mirror = rng.random() < 0.5
    scale = rng.uniform(*SCALE_RANGE)
    # crop bounds depend on the scaled-and-resized dims; draw after sizing
    work = img[:, ::-1] if mirror else img
    h, w = work.shape
    work = resize_bilinear(work, max(1, round(w * scale)), max(1, round(h * scale)))
    work = _resize_shorter_side(work, target_size)
    r = int(rng.integers(0, work.shape[0] - target_size + 1))
    c = int(rng.integers(0, work.shape[1] - target_size + 1))
    work = work[r:r + target_size, c:c + target_size]
    dr = int(rng.integers(-SHIFT_LIMIT, SHIFT_LIMIT + 1))
    dc = int(rng.integers(-SHIFT_LIMIT, SHIFT_LIMIT + 1))
    return _shift(work, dr, dc)


def augment_image(image, rng, target_size, fill=None):
    """One random variant of the image; deterministic for a seeded rng."""
    img = as_gray(image)
    if fill is None:
        fill = float(img.mean())
    angle = float(rng.uniform(0.0, 360.0))
    return _draw_variant(_rotate(img, angle, fill), rng, target_size)


def build_augmented_set(items, rng, target_size):
    """Expand (image, label) pairs 16-fold: 4 rotations x 4 crop variants.

    Rotation corners are filled with the mean intensity of the whole
    training set; labels are inherited.
    """
    items = list(items)
    if not items:
        raise ValueError("cannot augment an empty training set")
    fill = float(np.mean([np.mean(im) for im, _ in items]))
    out = []
    for image, label in items:
        img = as_gray(image)
        for _ in range(4):
            rotated = _rotate(img, float(rng.uniform(0.0, 360.0)), fill)
            for _ in range(4):
                out.append((_draw_variant(rotated, rng, target_size), label))
    return out
