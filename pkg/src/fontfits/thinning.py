"""Classical binary-image kernels: Zhang-Suen thinning and stroke statistics.

The thinning pass produces the ground-truth skeleton maps used as the
auxiliary generation target; the stroke helpers feed the color metric.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyMaskError, InvalidArgumentError, ShapeError
from .imtensor import ImageTensor

# Anti-aliased stroke edges sit well above this in normalized units while
# the neutral background stays at (quantized) zero.
STROKE_THRESHOLD = 0.1


def _as_binary_array(mask) -> np.ndarray:
    if isinstance(mask, ImageTensor):
        data = mask.data[:, :, 0]
    else:
        data = np.asarray(mask)
        if data.ndim == 3:
            data = data[:, :, 0]
    if data.ndim != 2:
        raise ShapeError("binary mask", "(H, W)", data.shape)
    if not np.logical_or(data == 0, data == 1).all():
        raise InvalidArgumentError("thinning requires a strictly binary mask")
    return data.astype(np.uint8)


def _neighbor_stack(img: np.ndarray) -> np.ndarray:
    """Clockwise neighbours P2..P9 of every pixel, zero-padded at the border."""
    p = np.pad(img, 1)
    h, w = img.shape
    # P2 (north), P3 (NE), P4 (east), P5 (SE), P6 (south), P7 (SW), P8 (west), P9 (NW)
    return np.stack(
        [
            p[0:h, 1 : w + 1],
            p[0:h, 2 : w + 2],
            p[1 : h + 1, 2 : w + 2],
            p[2 : h + 2, 2 : w + 2],
            p[2 : h + 2, 1 : w + 1],
            p[2 : h + 2, 0:w],
            p[1 : h + 1, 0:w],
            p[0:h, 0:w],
        ]
    )


def _subiteration(img: np.ndarray, second: bool) -> np.ndarray:
    n = _neighbor_stack(img)
    count = n.sum(axis=0)
    rolled = np.roll(n, -1, axis=0)
    transitions = np.logical_and(n == 0, rolled == 1).sum(axis=0)
    p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
    if second:
        c3 = p2 * p4 * p8
        c4 = p2 * p6 * p8
    else:
        c3 = p2 * p4 * p6
        c4 = p4 * p6 * p8
    deletable = (
        (img == 1)
        & (count >= 2)
        & (count <= 6)
        & (transitions == 1)
        & (c3 == 0)
        & (c4 == 0)
    )
    out = img.copy()
    out[deletable] = 0
    return out


def zhang_suen_thin(mask) -> ImageTensor:
    """Thin a binary mask to an (at most) 8-connected unit-width skeleton.

    Runs the two-subiteration deletion rules until a full iteration removes
    no pixel. Border pixels see a zero-padded 8-neighbourhood.
    """
    img = _as_binary_array(mask)
    while True:
        after = _subiteration(_subiteration(img, second=False), second=True)
        if np.array_equal(after, img):
            break
        img = after
    return ImageTensor(img.astype(np.float32)[:, :, None], "unit", "binary")


def stroke_mask_from_title(title: ImageTensor, threshold: float = STROKE_THRESHOLD) -> ImageTensor:
    """Foreground wherever any channel deviates from the neutral-0 background."""
    if title.range_tag != "unit_signed":
        raise InvalidArgumentError(
            f"stroke extraction expects unit_signed input, got {title.range_tag!r}"
        )
    fg = (np.abs(title.data) > threshold).any(axis=2)
    return ImageTensor(fg.astype(np.float32)[:, :, None], "unit", "binary")


def mean_stroke_color(img: ImageTensor, stroke: ImageTensor) -> np.ndarray:
    """Channel-wise mean color over stroke pixels, in [0, 1]."""
    if img.data.shape[:2] != stroke.data.shape[:2]:
        raise ShapeError("stroke mask", img.data.shape[:2], stroke.data.shape[:2])
    if img.range_tag != "unit":
        raise InvalidArgumentError(f"expected unit-range image, got {img.range_tag!r}")
    fg = stroke.data[:, :, 0] > 0
    if not fg.any():
        raise EmptyMaskError("stroke mask has no foreground pixels")
    return img.data[fg].mean(axis=0).astype(np.float64)
