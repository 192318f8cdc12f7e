"""Six-class font-style classifier behind the font-distance metric.

A small CNN trained on synthetic word renders with randomized colors,
backgrounds, sizes, and placements. The class taxonomy is fixed
(serif, sans, hybrid, script, historical, fancy); the bundled fonts per
class are a desk-scale stand-in for a large font library.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from . import fonts as fontbank
from .data import TITLE_H, TITLE_W, default_vocab, _glyph_alpha
from .errors import InvalidArgumentError
from .imtensor import ImageTensor

CLASSIFIER_VERSION = 1


class FontStyleClassifier(nn.Module):
    """Conv net mapping a title image to six style-class likelihoods."""

    def __init__(self, channels: int = 32):
        super().__init__()
        c = channels
        self.body = nn.Sequential(
            nn.Conv2d(3, c, 3, stride=2, padding=1), nn.BatchNorm2d(c), nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 3, stride=2, padding=1), nn.BatchNorm2d(2 * c), nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1), nn.BatchNorm2d(4 * c), nn.LeakyReLU(0.2),
            nn.Conv2d(4 * c, 4 * c, 3, stride=2, padding=1), nn.BatchNorm2d(4 * c), nn.LeakyReLU(0.2),
            nn.AdaptiveAvgPool2d(1),
        )
        self.head = nn.Linear(4 * c, len(fontbank.FONT_CLASSES))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.body(x).flatten(1))

    @torch.no_grad()
    def style_vector(self, img: ImageTensor) -> np.ndarray:
        """Softmax likelihoods over the six classes for one title image."""
        self.eval()
        x = torch.from_numpy(img.data.transpose(2, 0, 1))[None]
        return torch.softmax(self.forward(x)[0], dim=0).numpy().astype(np.float64)


@dataclass
class ClassifierTrainConfig:
    steps: int = 700
    batch_size: int = 24
    lr: float = 1e-3
    seed: int = 0
    holdout_per_class: int = 20


def _random_sample(rng: np.random.Generator, vocab, bank: fontbank.FontBank,
                   font_id: str) -> np.ndarray:
    """One randomized holdout/training render: HWC float32 in [-1, 1]."""
    word = str(rng.choice(vocab))
    case = rng.integers(0, 3)
    if case == 1:
        word = word.lower()
    elif case == 2:
        word = word.capitalize()

    # glyphs at a random sub-canvas size, pasted at a random offset
    gh = int(rng.integers(40, TITLE_H + 1))
    gw = int(rng.integers(140, TITLE_W + 1))
    alpha = _glyph_alpha(word, bank.path_of(font_id), gh, gw) >= 0.5
    canvas = np.zeros((TITLE_H, TITLE_W), dtype=bool)
    oy = int(rng.integers(0, TITLE_H - gh + 1))
    ox = int(rng.integers(0, TITLE_W - gw + 1))
    canvas[oy : oy + gh, ox : ox + gw] = alpha

    if rng.random() < 0.35:
        bg = np.zeros((TITLE_H, TITLE_W, 3), dtype=np.float32)  # neutral gray
    else:
        lo, hi = rng.uniform(-1, 1, size=3), rng.uniform(-1, 1, size=3)
        t = np.linspace(0, 1, TITLE_W, dtype=np.float32)[None, :, None]
        bg = ((1 - t) * lo[None, None, :] + t * hi[None, None, :]).astype(np.float32)
        bg = np.broadcast_to(bg, (TITLE_H, TITLE_W, 3)).copy()
    fill = rng.uniform(-1, 1, size=3).astype(np.float32)
    while np.abs(fill - bg.mean(axis=(0, 1))).max() < 0.4:
        fill = rng.uniform(-1, 1, size=3).astype(np.float32)
    img = np.where(canvas[:, :, None], fill[None, None, :], bg)
    img += rng.normal(0, 0.02, img.shape).astype(np.float32)
    return np.clip(img, -1.0, 1.0).astype(np.float32)


def _batch(rng, vocab, bank, font_ids, classes, n) -> tuple[torch.Tensor, torch.Tensor]:
    xs, ys = [], []
    for _ in range(n):
        k = int(rng.integers(0, len(font_ids)))
        xs.append(_random_sample(rng, vocab, bank, font_ids[k]))
        ys.append(classes[k])
    x = torch.from_numpy(np.stack(xs).transpose(0, 3, 1, 2))
    return x, torch.tensor(ys, dtype=torch.long)


def train_font_classifier(bank: fontbank.FontBank | None = None,
                          cfg: ClassifierTrainConfig | None = None,
                          log=None) -> FontStyleClassifier:
    """Train the style classifier on on-the-fly renders of the font bank."""
    bank = bank or fontbank.bundled_bank()
    cfg = cfg or ClassifierTrainConfig()
    for cls in fontbank.FONT_CLASSES:
        if not bank.by_class.get(cls):
            raise InvalidArgumentError(f"font class {cls!r} has no fonts")
    vocab = default_vocab()
    pairs = bank.all_fonts()
    font_ids = [fid for fid, _ in pairs]
    classes = [bank.class_index(c) for _, c in pairs]

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = FontStyleClassifier()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    ce = nn.CrossEntropyLoss()

    model.train()
    for step in range(cfg.steps):
        x, y = _batch(rng, vocab, bank, font_ids, classes, cfg.batch_size)
        opt.zero_grad()
        loss = ce(model(x), y)
        loss.backward()
        opt.step()
        if log and (step + 1) % 100 == 0:
            log(f"classifier step {step + 1}/{cfg.steps} loss {loss.item():.4f}")
    model.eval()
    return model


def holdout_accuracy(model: FontStyleClassifier, bank: fontbank.FontBank | None = None,
                     per_font: int = 20, seed: int = 1234,
                     representatives_only: bool = True) -> float:
    """Top-1 accuracy on freshly rendered held-out samples."""
    bank = bank or fontbank.bundled_bank()
    vocab = default_vocab()
    rng = np.random.default_rng(seed)
    if representatives_only:
        pairs = [(fid, cls) for cls, fid in bank.representatives().items()]
    else:
        pairs = bank.all_fonts()
    model.eval()
    hits = total = 0
    with torch.no_grad():
        for fid, cls in pairs:
            want = bank.class_index(cls)
            for _ in range(per_font):
                x = _random_sample(rng, vocab, bank, fid)
                pred = model(torch.from_numpy(x.transpose(2, 0, 1))[None]).argmax(1).item()
                hits += int(pred == want)
                total += 1
    return hits / total


def save_classifier(model: FontStyleClassifier, path) -> None:
    torch.save(
        {
            "version": CLASSIFIER_VERSION,
            "classes": list(fontbank.FONT_CLASSES),
            "state": model.state_dict(),
        },
        path,
    )


def load_classifier(path) -> FontStyleClassifier:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CLASSIFIER_VERSION:
        raise InvalidArgumentError(f"unsupported classifier version {payload.get('version')!r}")
    model = FontStyleClassifier()
    model.load_state_dict(payload["state"])
    model.eval()
    return model
