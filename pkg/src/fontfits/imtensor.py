"""Typed raster container and the pixel-range conventions used everywhere.

Images are H x W x C float arrays tagged with an explicit value range.
Training tensors live in ``unit_signed`` ([-1, 1], neutral background at
exactly 0), raster files are 8-bit, and metrics run in ``unit`` ([0, 1]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import InvalidArgumentError, ShapeError

RANGE_TAGS = ("unit_signed", "byte", "unit")
COLOR_TAGS = ("rgb", "gray", "binary")

_CHANNELS = {"rgb": 3, "gray": 1, "binary": 1}
_BOUNDS = {"unit_signed": (-1.0, 1.0), "byte": (0.0, 255.0), "unit": (0.0, 1.0)}


@dataclass
class ImageTensor:
    """An image plus the range/color convention its values follow."""

    data: np.ndarray
    range_tag: str = "unit_signed"
    color_tag: str = "rgb"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        self.validate()

    def validate(self):
        if self.range_tag not in RANGE_TAGS:
            raise InvalidArgumentError(f"unknown range_tag {self.range_tag!r}")
        if self.color_tag not in COLOR_TAGS:
            raise InvalidArgumentError(f"unknown color_tag {self.color_tag!r}")
        if self.data.ndim != 3:
            raise ShapeError("ImageTensor.data", "(H, W, C)", self.data.shape)
        want_c = _CHANNELS[self.color_tag]
        if self.data.shape[2] != want_c:
            raise ShapeError(
                f"ImageTensor[{self.color_tag}]", f"(H, W, {want_c})", self.data.shape
            )
        lo, hi = _BOUNDS[self.range_tag]
        if not np.isfinite(self.data).all():
            raise InvalidArgumentError("image contains non-finite values")
        if self.data.min() < lo - 1e-6 or self.data.max() > hi + 1e-6:
            raise InvalidArgumentError(
                f"values outside [{lo}, {hi}] for range_tag {self.range_tag!r}"
            )
        if self.color_tag == "binary":
            if not np.logical_or(self.data == 0.0, self.data == 1.0).all():
                raise InvalidArgumentError("binary image must contain only {0, 1}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "ImageTensor":
        return ImageTensor(self.data.copy(), self.range_tag, self.color_tag)


def normalize(img: ImageTensor) -> ImageTensor:
    """Map byte range [0, 255] to [-1, 1]; byte 127.5 lands exactly on 0."""
    if img.range_tag != "byte":
        raise InvalidArgumentError(f"normalize expects byte range, got {img.range_tag!r}")
    data = img.data / 127.5 - 1.0
    return ImageTensor(data, "unit_signed", img.color_tag)


def denormalize(img: ImageTensor) -> ImageTensor:
    """Inverse of :func:`normalize` up to float rounding."""
    if img.range_tag != "unit_signed":
        raise InvalidArgumentError(
            f"denormalize expects unit_signed range, got {img.range_tag!r}"
        )
    data = (img.data + 1.0) * 127.5
    return ImageTensor(np.clip(data, 0.0, 255.0), "byte", img.color_tag)


def to_unit(img: ImageTensor) -> np.ndarray:
    """Return the pixel data rescaled to [0, 1] (used by all metrics)."""
    if img.range_tag == "unit":
        return img.data.astype(np.float64)
    if img.range_tag == "byte":
        return img.data.astype(np.float64) / 255.0
    return (img.data.astype(np.float64) + 1.0) / 2.0


def quantize(img: ImageTensor) -> ImageTensor:
    """Snap a unit_signed image to the nearest 8-bit-representable values.

    Records are quantized before they are handed out so that a PNG
    round trip is lossless and byte-for-byte reproducible.
    """
    if img.color_tag == "binary":
        return img.copy()
    byte = np.rint(np.clip((img.data + 1.0) * 127.5, 0.0, 255.0))
    return ImageTensor(byte / 127.5 - 1.0, "unit_signed", img.color_tag)


def make_location_mask(box: tuple[int, int, int, int], h: int, w: int) -> ImageTensor:
    """Binary H x W mask with ones exactly inside the half-open box (x0, y0, x1, y1)."""
    x0, y0, x1, y1 = (int(v) for v in box)
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise InvalidArgumentError(
            f"box {box} is degenerate or outside the {h}x{w} canvas"
        )
    mask = np.zeros((h, w, 1), dtype=np.float32)
    mask[y0:y1, x0:x1, 0] = 1.0
    return ImageTensor(mask, "unit", "binary")


def save_png(img: ImageTensor, path) -> None:
    """Write an image as 8-bit PNG (binary masks as 0/255)."""
    if img.color_tag == "binary":
        byte = (img.data[:, :, 0] * 255.0).astype(np.uint8)
        Image.fromarray(byte, mode="L").save(path)
        return
    if img.range_tag == "unit_signed":
        data = (img.data + 1.0) * 127.5
    elif img.range_tag == "unit":
        data = img.data * 255.0
    else:
        data = img.data
    byte = np.rint(np.clip(data, 0.0, 255.0)).astype(np.uint8)
    mode = "RGB" if img.color_tag == "rgb" else "L"
    Image.fromarray(byte.squeeze(-1) if mode == "L" else byte, mode=mode).save(path)


def load_png(path, color_tag: str = "rgb", range_tag: str = "unit_signed") -> ImageTensor:
    """Load an 8-bit PNG into the requested convention (normalized by default)."""
    with Image.open(path) as im:
        im = im.convert("RGB" if color_tag == "rgb" else "L")
        byte = np.asarray(im, dtype=np.float32)
    if byte.ndim == 2:
        byte = byte[:, :, None]
    if color_tag == "binary":
        return ImageTensor((byte > 127.0).astype(np.float32), "unit", "binary")
    if range_tag == "byte":
        return ImageTensor(byte, "byte", color_tag)
    if range_tag == "unit":
        return ImageTensor(byte / 255.0, "unit", color_tag)
    return ImageTensor(byte / 127.5 - 1.0, "unit_signed", color_tag)
