"""Scalar training objectives: reconstruction, skeleton overlap, adversarial,
and the two perceptual terms, plus their weighted total.

Every term is an independently testable function of tensors; the training
loop only assembles them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import InvalidArgumentError, ShapeError, TrainingDivergenceError

# Empty skeleton batches must not produce NaN; the clamp leaves any
# denominator >= 1 untouched so hand-checkable values stay exact.
DICE_EPS = 1e-6
# Keep log arguments away from {0, 1}.
PROB_EPS = 1e-7


@dataclass
class LossWeights:
    """Weights w1..w5 for the total objective."""

    w1: float = 1.0       # reconstruction
    w2: float = 1.0       # skeleton
    w3: float = 1e-2      # adversarial
    w4: float = 1.0       # content perceptual
    w5: float = 1e3       # style perceptual

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4", "w5"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {v}")

    def as_tuple(self):
        return (self.w1, self.w2, self.w3, self.w4, self.w5)


@dataclass
class LossReport:
    """Unweighted loss parts plus their weighted total for one step."""

    reconst: float = 0.0
    skeleton: float = 0.0
    adversarial: float = 0.0
    content: float = 0.0
    style: float = 0.0
    total: float = 0.0
    disc: float = 0.0  # discriminator-side objective, logged for monitoring

    def as_dict(self) -> dict:
        return {
            "reconst": self.reconst,
            "skeleton": self.skeleton,
            "adversarial": self.adversarial,
            "content": self.content,
            "style": self.style,
            "total": self.total,
            "disc": self.disc,
        }


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ShapeError(what, tuple(a.shape), tuple(b.shape))


def dice_skeleton_loss(t_sk: torch.Tensor, o_sk: torch.Tensor) -> torch.Tensor:
    """1 - 2*sum(T*O) / (sum(T) + sum(O)), summed over every pixel."""
    _check_same_shape(t_sk, o_sk, "skeleton maps")
    inter = (t_sk * o_sk).sum()
    denom = t_sk.sum() + o_sk.sum()
    return 1.0 - 2.0 * inter / denom.clamp_min(DICE_EPS)


def reconstruction_l1(t_t: torch.Tensor, o_t: torch.Tensor) -> torch.Tensor:
    """Mean absolute error between target and generated title."""
    _check_same_shape(t_t, o_t, "title tensors")
    return (t_t - o_t).abs().mean()


def gram(feature_map: torch.Tensor) -> torch.Tensor:
    """Channel-by-channel inner products of a C x H x W map, scaled by 1/(C*H*W).

    A batched B x C x H x W input yields B stacked matrices.
    """
    if feature_map.numel() == 0:
        raise InvalidArgumentError("gram of an empty feature map")
    squeeze = feature_map.dim() == 3
    f = feature_map.unsqueeze(0) if squeeze else feature_map
    if f.dim() != 4:
        raise ShapeError("feature map", "(C, H, W) or (B, C, H, W)", tuple(feature_map.shape))
    b, c, h, w = f.shape
    flat = f.reshape(b, c, h * w)
    g = torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)
    return g.squeeze(0) if squeeze else g


def perceptual_losses(feats_t, feats_o) -> tuple[torch.Tensor, torch.Tensor]:
    """Content and style distances from two matched lists of feature maps."""
    if len(feats_t) != len(feats_o):
        raise InvalidArgumentError("feature lists differ in length")
    content = sum((ft - fo).abs().mean() for ft, fo in zip(feats_t, feats_o))
    style = sum((gram(ft) - gram(fo)).abs().mean() for ft, fo in zip(feats_t, feats_o))
    return content, style


def content_perceptual_loss(t_t: torch.Tensor, o_t: torch.Tensor, perceive) -> torch.Tensor:
    """Sum over extractor layers of the mean absolute feature difference."""
    _check_same_shape(t_t, o_t, "title tensors")
    content, _ = perceptual_losses(perceive(t_t), perceive(o_t))
    return content


def style_perceptual_loss(t_t: torch.Tensor, o_t: torch.Tensor, perceive) -> torch.Tensor:
    """Sum over extractor layers of the mean absolute Gram-matrix difference."""
    _check_same_shape(t_t, o_t, "title tensors")
    _, style = perceptual_losses(perceive(t_t), perceive(o_t))
    return style


def adversarial_losses(discriminate, i_t: torch.Tensor, t_t: torch.Tensor,
                       o_t: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Discriminator and (non-saturating) generator objectives.

    The fake path is detached for the discriminator side, so d_loss carries
    no gradient into the generator.
    """
    p_real = discriminate(i_t, t_t).clamp(PROB_EPS, 1.0 - PROB_EPS)
    p_fake_d = discriminate(i_t, o_t.detach()).clamp(PROB_EPS, 1.0 - PROB_EPS)
    d_loss = -(torch.log(p_real).mean() + torch.log(1.0 - p_fake_d).mean())
    p_fake_g = discriminate(i_t, o_t).clamp(PROB_EPS, 1.0 - PROB_EPS)
    g_loss = -torch.log(p_fake_g).mean()
    return d_loss, g_loss


def total_loss(parts: dict, weights: LossWeights) -> tuple[torch.Tensor, LossReport]:
    """Weighted sum w1*reconst + w2*skeleton + w3*adversarial + w4*content + w5*style.

    ``parts`` maps term names to scalars (tensors or floats); missing terms
    count as zero. Raises if any term is non-finite.
    """
    order = ("reconst", "skeleton", "adversarial", "content", "style")
    values = []
    for name in order:
        v = parts.get(name, 0.0)
        scalar = float(v.detach() if isinstance(v, torch.Tensor) else v)
        if not math.isfinite(scalar):
            raise TrainingDivergenceError(name, scalar)
        values.append(v)
    total = sum(w * v for w, v in zip(weights.as_tuple(), values))
    report = LossReport(
        *(float(v.detach() if isinstance(v, torch.Tensor) else v) for v in values),
        total=float(total.detach() if isinstance(total, torch.Tensor) else total),
    )
    return total, report
