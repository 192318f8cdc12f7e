import json

import numpy as np
import pytest

from fontfits.data import (
    DatasetRecord,
    load_corpus,
    load_manifest,
    load_record,
    render_plain_text,
    render_title,
    save_record,
    synth_corpus,
    synth_record,
)
from fontfits.errors import CorpusIOError, InvalidArgumentError
from fontfits.fonts import FONT_CLASSES, bundled_bank
from fontfits.imtensor import normalize
from fontfits.thinning import stroke_mask_from_title

FIELDS = ("cover", "location_mask", "input_text", "true_title", "true_skeleton")


def _equal(a: DatasetRecord, b: DatasetRecord) -> bool:
    return all(np.array_equal(getattr(a, f).data, getattr(b, f).data) for f in FIELDS) \
        and a.text_string == b.text_string


# ---- plain text rendering


def test_plain_text_background_is_neutral():
    img = render_plain_text("A", 64, 256)
    assert img.range_tag == "byte"
    bg = (img.data == 127.5).all(axis=2)
    assert bg.sum() > 0
    fg = ~bg
    assert fg.sum() > 0
    # normalized background is exactly zero
    norm = normalize(img)
    assert (norm.data[bg] == 0.0).all()


def test_plain_text_empty_rejected():
    with pytest.raises(InvalidArgumentError):
        render_plain_text("", 64, 256)
    with pytest.raises(InvalidArgumentError):
        render_plain_text("   ", 64, 256)


def test_plain_text_missing_glyph_names_codepoint():
    with pytest.raises(InvalidArgumentError, match="U\\+8A9E"):
        render_plain_text("a語b", 64, 256)


def test_two_glyphs_have_more_ink_than_one():
    one = render_plain_text("A", 64, 256)
    two = render_plain_text("AB", 64, 256)

    def ink(img):
        return int((np.abs(img.data - 127.5) > 1.0).any(axis=2).sum())

    assert ink(two) > ink(one)


def test_title_render_fill_too_gray_rejected():
    with pytest.raises(InvalidArgumentError):
        render_title("HI", bundled_bank().path_of("DejaVuSans.ttf"), (0.5, 0.52, 0.48))


# ---- synthesis


def test_synth_deterministic():
    a, b = synth_record(11), synth_record(11)
    assert _equal(a, b)
    assert a.style.to_json() == b.style.to_json()


def test_synth_different_seeds_differ():
    a, b = synth_record(1), synth_record(2)
    assert not _equal(a, b)


def test_synth_record_invariants():
    for seed in (0, 5, 9):
        rec = synth_record(seed)
        rec.validate()
        sk = rec.true_skeleton.data[:, :, 0]
        stroke = stroke_mask_from_title(rec.true_title).data[:, :, 0]
        assert not np.logical_and(sk == 1, stroke == 0).any()
        x0, y0, x1, y1 = rec.style.title_box
        assert rec.location_mask.data.sum() == (x1 - x0) * (y1 - y0)
        assert rec.style.font_class in FONT_CLASSES


def test_correlated_style_rule():
    rec = synth_record(21)
    # busyness encodes the font class index
    assert rec.style.font_class == FONT_CLASSES[rec.style.bg_recipe["n_blobs"] % 6]


# ---- corpus io


def test_save_load_round_trip(tmp_path):
    rec = synth_record(3)
    save_record(rec, tmp_path, "train", "00000")
    back = load_record(tmp_path, "train", "00000")
    assert _equal(rec, back)
    assert back.style.to_json() == rec.style.to_json()


def test_load_missing_record_names_id(tmp_path):
    with pytest.raises(CorpusIOError, match="nope"):
        load_record(tmp_path, "train", "nope")


def test_corpus_counts_and_layout(tmp_path):
    manifest = synth_corpus(tmp_path, count=5, seed=1, eval_count=2)
    assert len(manifest.ids("train")) == 5
    assert len(manifest.ids("eval")) == 2
    assert len(list(load_corpus(manifest, "train"))) == 5
    rdir = tmp_path / "train" / "00000"
    for fname in ("cover.png", "mask.png", "input_text.png", "title.png",
                  "skeleton.png", "meta.json"):
        assert (rdir / fname).is_file()
    meta = json.loads((tmp_path / "manifest.json").read_text())
    assert set(meta) == {"version", "seed", "splits"}


def test_manifest_missing_id_raises(tmp_path):
    manifest = synth_corpus(tmp_path, count=2, seed=1)
    manifest.splits["train"].append("99999")
    with pytest.raises(CorpusIOError, match="99999"):
        list(load_corpus(manifest, "train"))


def test_reload_manifest(tmp_path):
    synth_corpus(tmp_path, count=2, seed=4)
    m = load_manifest(tmp_path)
    assert m.seed == 4
    assert m.ids("train") == ["00000", "00001"]
