"""Bundled open-license font set, grouped into the six title style classes.

The grouping is a desk-scale stand-in: classes are visually separable
(serif-ness, slant, spacing, weight) rather than typographically curated.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources

from PIL import ImageFont

from .errors import InvalidArgumentError

FONT_CLASSES = ("serif", "sans", "hybrid", "script", "historical", "fancy")

# class -> font files; the first entry is the class representative
_CLASS_FILES = {
    "serif": ["DejaVuSerif.ttf", "STIXGeneral.ttf"],
    "sans": ["DejaVuSans.ttf", "cmss10.ttf"],
    "hybrid": ["DejaVuSansMono.ttf", "DejaVuSansMono-Oblique.ttf"],
    "script": ["DejaVuSerif-Italic.ttf", "STIXGeneralItalic.ttf"],
    "historical": ["STIXGeneralBol.ttf", "DejaVuSerif-Bold.ttf"],
    "fancy": ["DejaVuSans-Bold.ttf", "DejaVuSans-BoldOblique.ttf"],
}

PLAIN_FONT = "DejaVuSans.ttf"  # stand-in for the plain Arial rendering


def _font_dir():
    return resources.files("fontfits") / "assets" / "fonts"


@dataclass(frozen=True)
class FontBank:
    """Resolved font paths per style class."""

    by_class: dict

    @property
    def classes(self) -> tuple[str, ...]:
        return FONT_CLASSES

    def all_fonts(self) -> list[tuple[str, str]]:
        """(font_id, class) pairs over the whole bank."""
        return [(fid, cls) for cls in FONT_CLASSES for fid in self.by_class[cls]]

    def representatives(self) -> dict:
        return {cls: self.by_class[cls][0] for cls in FONT_CLASSES}

    def class_of(self, font_id: str) -> str:
        for cls, fonts in self.by_class.items():
            if font_id in fonts:
                return cls
        raise InvalidArgumentError(f"unknown font id {font_id!r}")

    def path_of(self, font_id: str) -> str:
        p = _font_dir() / font_id
        if not p.is_file():
            raise InvalidArgumentError(f"font file missing from bundle: {font_id!r}")
        return str(p)

    def class_index(self, cls: str) -> int:
        return FONT_CLASSES.index(cls)


def bundled_bank() -> FontBank:
    bank = FontBank(by_class={c: list(fs) for c, fs in _CLASS_FILES.items()})
    for cls in FONT_CLASSES:
        if not bank.by_class.get(cls):
            raise InvalidArgumentError(f"font class {cls!r} has no fonts")
    return bank


@functools.lru_cache(maxsize=64)
def load_font(path: str, size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(path, size=size)


@functools.lru_cache(maxsize=32)
def _cmap(path: str) -> frozenset:
    """Unicode code points the font actually covers."""
    from fontTools.ttLib import TTFont

    with TTFont(path, lazy=True) as tt:
        return frozenset(tt.getBestCmap().keys())


def check_glyph_coverage(path: str, text: str) -> None:
    """Raise if any non-space character has no glyph in the font."""
    covered = _cmap(path)
    for ch in text:
        if ch != " " and ord(ch) not in covered:
            raise InvalidArgumentError(
                f"font {path.rsplit('/', 1)[-1]!r} has no glyph for U+{ord(ch):04X} ({ch!r})"
            )
