"""Training-tuple construction: text rendering, procedural covers, record
synthesis, and the on-disk corpus format.

Every record is the five-image tuple (cover, location mask, plain input
text, true title, true skeleton) plus metadata. The synthetic path builds
covers whose palette genuinely predicts the title style, so that removing
the context stream measurably hurts color fidelity.
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass, asdict
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import fonts as fontbank
from .errors import CorpusIOError, InvalidArgumentError, ShapeError
from .imtensor import (
    ImageTensor,
    load_png,
    make_location_mask,
    normalize,
    quantize,
    save_png,
)
from .thinning import stroke_mask_from_title, zhang_suen_thin

TITLE_H, TITLE_W = 64, 256
COVER_H, COVER_W = 256, 256
NEUTRAL_BYTE = 127.5

FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# types


@dataclass
class StyleSpec:
    """Latent style of a synthetic record; doubles as its ground truth."""

    font_id: str
    font_class: str
    fill_color: tuple
    bg_recipe: dict
    title_box: tuple

    def __post_init__(self):
        x0, y0, x1, y1 = self.title_box
        if not (0 <= x0 < x1 <= COVER_W and 0 <= y0 < y1 <= COVER_H):
            raise InvalidArgumentError(f"title_box {self.title_box} outside cover bounds")
        if self.font_class not in fontbank.FONT_CLASSES:
            raise InvalidArgumentError(f"unknown font class {self.font_class!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["fill_color"] = list(self.fill_color)
        d["title_box"] = list(self.title_box)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "StyleSpec":
        return cls(
            font_id=d["font_id"],
            font_class=d["font_class"],
            fill_color=tuple(d["fill_color"]),
            bg_recipe=dict(d["bg_recipe"]),
            title_box=tuple(d["title_box"]),
        )


@dataclass
class DatasetRecord:
    cover: ImageTensor          # 256x256 rgb, unit_signed, no text anywhere
    location_mask: ImageTensor  # 256x256 binary
    input_text: ImageTensor     # 64x256 rgb, plain font on neutral gray
    true_title: ImageTensor     # 64x256 rgb, styled strokes on neutral gray
    true_skeleton: ImageTensor  # 64x256 binary
    text_string: str
    style: StyleSpec | None = None
    record_id: str | None = None

    def validate(self):
        for name, img, shape, tag in (
            ("cover", self.cover, (COVER_H, COVER_W, 3), "rgb"),
            ("location_mask", self.location_mask, (COVER_H, COVER_W, 1), "binary"),
            ("input_text", self.input_text, (TITLE_H, TITLE_W, 3), "rgb"),
            ("true_title", self.true_title, (TITLE_H, TITLE_W, 3), "rgb"),
            ("true_skeleton", self.true_skeleton, (TITLE_H, TITLE_W, 1), "binary"),
        ):
            if img.data.shape != shape:
                raise ShapeError(name, shape, img.data.shape)
            if img.color_tag != tag:
                raise InvalidArgumentError(f"{name}: expected color_tag {tag!r}")
        stroke = stroke_mask_from_title(self.true_title)
        sk = self.true_skeleton.data[:, :, 0]
        if np.logical_and(sk == 1, stroke.data[:, :, 0] == 0).any():
            raise InvalidArgumentError("skeleton foreground escapes the stroke mask")
        if self.style is not None:
            expected = make_location_mask(self.style.title_box, COVER_H, COVER_W)
            if not np.array_equal(expected.data, self.location_mask.data):
                raise InvalidArgumentError("location mask does not equal the title box")


@dataclass
class CorpusManifest:
    root: Path
    version: int
    seed: int
    splits: dict  # split name -> list of record ids

    def ids(self, split: str) -> list[str]:
        if split not in self.splits:
            raise CorpusIOError(f"split {split!r} not in manifest")
        return list(self.splits[split])


# --------------------------------------------------------------------------
# rendering


def default_vocab() -> list[str]:
    text = (resources.files("fontfits") / "assets" / "words.txt").read_text()
    return [w for w in text.split() if w]


def _fit_font_size(text: str, font_path: str, h: int, w: int, margin: int = 6) -> int:
    """Largest size whose rendered bbox fits the canvas minus a margin."""
    lo, hi = 4, h * 2
    best = lo
    while lo <= hi:
        mid = (lo + hi) // 2
        font = fontbank.load_font(font_path, mid)
        x0, y0, x1, y1 = font.getbbox(text)
        if (x1 - x0) <= (w - 2 * margin) and (y1 - y0) <= (h - 2 * margin):
            best = mid
            lo = mid + 1
        else:
            hi = mid - 1
    return best


def _glyph_alpha(text: str, font_path: str, h: int, w: int) -> np.ndarray:
    """Anti-aliased coverage in [0, 1], glyphs centered on an h x w canvas."""
    fontbank.check_glyph_coverage(font_path, text)
    size = _fit_font_size(text, font_path, h, w)
    font = fontbank.load_font(font_path, size)
    x0, y0, x1, y1 = font.getbbox(text)
    canvas = Image.new("L", (w, h), 0)
    draw = ImageDraw.Draw(canvas)
    ox = (w - (x1 - x0)) // 2 - x0
    oy = (h - (y1 - y0)) // 2 - y0
    draw.text((ox, oy), text, fill=255, font=font)
    return np.asarray(canvas, dtype=np.float32) / 255.0


def render_plain_text(text: str, height: int = TITLE_H, width: int = TITLE_W) -> ImageTensor:
    """Dark plain-font glyphs centered on the neutral gray background.

    Returned in byte range so the neutral background is exactly 127.5.
    """
    if not text or not text.strip():
        raise InvalidArgumentError("text must be non-empty")
    if any(not ch.isprintable() for ch in text):
        raise InvalidArgumentError("text contains non-printable characters")
    alpha = _glyph_alpha(text, fontbank.bundled_bank().path_of(fontbank.PLAIN_FONT), height, width)
    ink = 20.0  # dark but not pure black, keeps anti-aliased edges visible
    data = NEUTRAL_BYTE + alpha[:, :, None] * (ink - NEUTRAL_BYTE)
    return ImageTensor(np.repeat(data, 3, axis=2), "byte", "rgb")


def render_title(text: str, font_path: str, fill_color: tuple,
                 height: int = TITLE_H, width: int = TITLE_W) -> tuple[ImageTensor, ImageTensor]:
    """Styled strokes on the neutral background, plus the exact coverage mask.

    Stroke coverage is binarized so the painted-pixel set is well defined;
    fill colors are required to clear the stroke threshold against gray.
    """
    if not text or not text.strip():
        raise InvalidArgumentError("text must be non-empty")
    signed = [abs(2.0 * c - 1.0) for c in fill_color]
    if max(signed) <= 0.3:
        raise InvalidArgumentError(
            f"fill color {fill_color} is too close to the neutral background"
        )
    alpha = _glyph_alpha(text, font_path, height, width) >= 0.5
    bg = np.zeros((height, width, 3), dtype=np.float32)
    fill = np.array([2.0 * c - 1.0 for c in fill_color], dtype=np.float32)
    data = np.where(alpha[:, :, None], fill[None, None, :], bg)
    title = quantize(ImageTensor(data, "unit_signed", "rgb"))
    coverage = ImageTensor(alpha.astype(np.float32)[:, :, None], "unit", "binary")
    return title, coverage


# --------------------------------------------------------------------------
# procedural covers


def _hsv(h: float, s: float, v: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(h % 1.0, float(np.clip(s, 0, 1)), float(np.clip(v, 0, 1))),
                    dtype=np.float32)


def build_cover(recipe: dict) -> ImageTensor:
    """Deterministic text-free cover from a background recipe.

    A two-color gradient in one hue family, a busyness-controlled set of
    blob shapes, and low-amplitude grain.
    """
    rng = np.random.default_rng(recipe["cover_seed"])
    hue = float(recipe["hue"])
    base_v = float(recipe["base_value"])
    n_blobs = int(recipe["n_blobs"])

    c1 = _hsv(hue + rng.uniform(-0.03, 0.03), rng.uniform(0.35, 0.75), base_v * rng.uniform(0.85, 1.0))
    c2 = _hsv(hue + rng.uniform(-0.03, 0.03), rng.uniform(0.35, 0.75), base_v * rng.uniform(0.55, 0.8))
    t = np.linspace(0.0, 1.0, COVER_H, dtype=np.float32)[:, None]
    if recipe.get("horizontal"):
        t = np.linspace(0.0, 1.0, COVER_W, dtype=np.float32)[None, :]
    grad = (1 - t)[..., None] * c1[None, None, :] + t[..., None] * c2[None, None, :]
    img = np.broadcast_to(grad, (COVER_H, COVER_W, 3)).copy()

    yy, xx = np.mgrid[0:COVER_H, 0:COVER_W].astype(np.float32)
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0, COVER_W), rng.uniform(0, COVER_H)
        rx, ry = rng.uniform(12, 60), rng.uniform(12, 60)
        color = _hsv(hue + rng.uniform(-0.08, 0.08), rng.uniform(0.3, 0.9), rng.uniform(0.2, 0.95))
        inside = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        a = rng.uniform(0.35, 0.8)
        img[inside] = (1 - a) * img[inside] + a * color[None, :]

    img += rng.normal(0.0, 0.015, size=img.shape).astype(np.float32)
    byte = np.clip(img, 0.0, 1.0) * 255.0
    return quantize(normalize(ImageTensor(byte, "byte", "rgb")))


# --------------------------------------------------------------------------
# record synthesis


def synth_record(seed: int, vocab: list[str] | None = None,
                 bank: fontbank.FontBank | None = None,
                 correlate_style: bool = True) -> DatasetRecord:
    """Deterministic synthetic training tuple for one seed.

    With ``correlate_style`` the cover palette determines the fill color
    (same hue, contrasting lightness) and the blob count determines the
    font class, so the cover genuinely carries the style signal. Without
    it, style is drawn independently of the cover.
    """
    vocab = vocab if vocab is not None else default_vocab()
    bank = bank or fontbank.bundled_bank()
    if not vocab:
        raise InvalidArgumentError("vocab must be non-empty")

    rng = np.random.default_rng([int(seed), 0x5EED])
    text = str(rng.choice(vocab))

    hue = float(rng.uniform(0.0, 1.0))
    base_value = float(rng.choice([0.35, 0.85]))
    n_blobs = int(rng.integers(0, 6))
    recipe = {
        "kind": "gradient_blobs",
        "hue": hue,
        "base_value": base_value,
        "n_blobs": n_blobs,
        "horizontal": bool(rng.integers(0, 2)),
        "cover_seed": int(rng.integers(0, 2**31 - 1)),
    }

    if correlate_style:
        fill_value = 0.92 if base_value < 0.6 else 0.16
        fill_color = tuple(float(c) for c in _hsv(hue, 0.85, fill_value))
        font_class = fontbank.FONT_CLASSES[n_blobs % len(fontbank.FONT_CLASSES)]
    else:
        fill_value = float(rng.choice([0.92, 0.16]))
        fill_color = tuple(float(c) for c in _hsv(rng.uniform(0, 1), 0.85, fill_value))
        font_class = str(rng.choice(list(fontbank.FONT_CLASSES)))
    font_id = str(rng.choice(bank.by_class[font_class]))

    bw = int(rng.integers(120, 221))
    bh = int(rng.integers(34, 61))
    x0 = int(rng.integers(0, COVER_W - bw))
    y0 = int(rng.integers(0, COVER_H - bh))
    style = StyleSpec(
        font_id=font_id,
        font_class=font_class,
        fill_color=fill_color,
        bg_recipe=recipe,
        title_box=(x0, y0, x0 + bw, y0 + bh),
    )

    cover = build_cover(recipe)
    mask = make_location_mask(style.title_box, COVER_H, COVER_W)
    input_text = quantize(normalize(render_plain_text(text)))
    title, coverage = render_title(text, bank.path_of(font_id), fill_color)
    skeleton = zhang_suen_thin(coverage)

    record = DatasetRecord(
        cover=cover,
        location_mask=mask,
        input_text=input_text,
        true_title=title,
        true_skeleton=skeleton,
        text_string=text,
        style=style,
    )
    record.validate()
    return record


# --------------------------------------------------------------------------
# on-disk corpus

_FILES = {
    "cover": ("cover.png", "rgb"),
    "location_mask": ("mask.png", "binary"),
    "input_text": ("input_text.png", "rgb"),
    "true_title": ("title.png", "rgb"),
    "true_skeleton": ("skeleton.png", "binary"),
}


def save_record(record: DatasetRecord, root, split: str, record_id: str) -> Path:
    rdir = Path(root) / split / record_id
    rdir.mkdir(parents=True, exist_ok=True)
    for field_name, (fname, _) in _FILES.items():
        save_png(getattr(record, field_name), rdir / fname)
    meta = {
        "format_version": FORMAT_VERSION,
        "record_id": record_id,
        "text_string": record.text_string,
        "style": record.style.to_json() if record.style else None,
    }
    (rdir / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    return rdir


def load_record(root, split: str, record_id: str) -> DatasetRecord:
    rdir = Path(root) / split / record_id
    meta_path = rdir / "meta.json"
    if not meta_path.is_file():
        raise CorpusIOError(f"record {record_id!r}: missing {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
        images = {}
        for field_name, (fname, color_tag) in _FILES.items():
            p = rdir / fname
            if not p.is_file():
                raise CorpusIOError(f"record {record_id!r}: missing {p}")
            images[field_name] = load_png(
                p, color_tag=color_tag,
                range_tag="unit" if color_tag == "binary" else "unit_signed",
            )
    except (OSError, ValueError, KeyError) as e:
        if isinstance(e, CorpusIOError):
            raise
        raise CorpusIOError(f"record {record_id!r}: {e}") from e
    record = DatasetRecord(
        text_string=meta["text_string"],
        style=StyleSpec.from_json(meta["style"]) if meta.get("style") else None,
        record_id=record_id,
        **images,
    )
    record.validate()
    return record


def save_manifest(manifest: CorpusManifest) -> Path:
    path = Path(manifest.root) / "manifest.json"
    payload = {
        "version": manifest.version,
        "seed": manifest.seed,
        "splits": {k: list(v) for k, v in manifest.splits.items()},
    }
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    return path


def load_manifest(root) -> CorpusManifest:
    path = Path(root) / "manifest.json"
    if not path.is_file():
        raise CorpusIOError(f"no manifest at {path}")
    try:
        payload = json.loads(path.read_text())
        return CorpusManifest(
            root=Path(root),
            version=int(payload["version"]),
            seed=int(payload["seed"]),
            splits={k: list(v) for k, v in payload["splits"].items()},
        )
    except (ValueError, KeyError) as e:
        raise CorpusIOError(f"malformed manifest {path}: {e}") from e


def load_corpus(manifest: CorpusManifest, split: str = "train"):
    """Yield every record of a split, validating as it goes."""
    for rid in manifest.ids(split):
        yield load_record(manifest.root, split, rid)


def synth_corpus(root, count: int, seed: int, eval_count: int = 0,
                 correlate_style: bool = True) -> CorpusManifest:
    """Write a fresh synthetic corpus and its manifest."""
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    root = Path(root)
    vocab = default_vocab()
    bank = fontbank.bundled_bank()
    splits: dict[str, list[str]] = {"train": [], "eval": []}
    for i in range(count + eval_count):
        split = "train" if i < count else "eval"
        rid = f"{i:05d}"
        rec = synth_record(seed * 1_000_003 + i, vocab, bank, correlate_style=correlate_style)
        rec.record_id = rid
        save_record(rec, root, split, rid)
        splits[split].append(rid)
    if not splits["eval"]:
        del splits["eval"]
    manifest = CorpusManifest(root=root, version=FORMAT_VERSION, seed=seed, splits=splits)
    save_manifest(manifest)
    return manifest
