"""Record-to-tensor conversion shared by training and evaluation."""

from __future__ import annotations

import numpy as np
import torch

from .data import DatasetRecord
from .imtensor import ImageTensor


def to_chw(img: ImageTensor) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(img.data.transpose(2, 0, 1)))


def from_chw(t: torch.Tensor, range_tag: str, color_tag: str) -> ImageTensor:
    data = t.detach().cpu().numpy().transpose(1, 2, 0)
    lo, hi = (-1.0, 1.0) if range_tag == "unit_signed" else (0.0, 1.0)
    return ImageTensor(np.clip(data, lo, hi), range_tag, color_tag)


def record_batch(records: list[DatasetRecord]) -> dict:
    """Stack records into the five training tensors (B first)."""
    return {
        "i_t": torch.stack([to_chw(r.input_text) for r in records]),
        "cover": torch.stack([to_chw(r.cover) for r in records]),
        "mask": torch.stack([to_chw(r.location_mask) for r in records]),
        "t_t": torch.stack([to_chw(r.true_title) for r in records]),
        "t_sk": torch.stack([to_chw(r.true_skeleton) for r in records]),
    }
