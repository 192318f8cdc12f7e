import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fontfits.errors import InvalidArgumentError
from fontfits.imtensor import (
    ImageTensor,
    denormalize,
    load_png,
    make_location_mask,
    normalize,
    quantize,
    save_png,
)


def test_normalize_endpoints():
    img = ImageTensor(np.array([[[0.0], [255.0], [127.5]]], dtype=np.float32).reshape(1, 3, 1),
                      "byte", "gray")
    out = normalize(img)
    assert out.data[0, 0, 0] == -1.0
    assert out.data[0, 1, 0] == 1.0
    assert out.data[0, 2, 0] == 0.0


def test_normalize_rejects_wrong_range():
    img = ImageTensor(np.zeros((2, 2, 3), dtype=np.float32), "unit_signed", "rgb")
    with pytest.raises(InvalidArgumentError):
        normalize(img)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float32, (6, 9, 3), elements=st.floats(0, 255, width=32)))
def test_round_trip_within_half_bit(data):
    img = ImageTensor(data, "byte", "rgb")
    back = denormalize(normalize(img))
    assert np.abs(back.data - img.data).max() <= 0.5 / 255.0 + 1e-4


def test_quantize_is_png_exact(tmp_path):
    rng = np.random.default_rng(0)
    img = quantize(ImageTensor(rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32),
                               "unit_signed", "rgb"))
    save_png(img, tmp_path / "x.png")
    back = load_png(tmp_path / "x.png", "rgb", "unit_signed")
    assert np.array_equal(back.data, img.data)


def test_binary_validation():
    with pytest.raises(InvalidArgumentError):
        ImageTensor(np.full((2, 2, 1), 0.5, dtype=np.float32), "unit", "binary")


def test_channel_validation():
    with pytest.raises(InvalidArgumentError):
        ImageTensor(np.zeros((2, 2, 3), dtype=np.float32), "unit", "gray")


def test_location_mask_whole_image():
    m = make_location_mask((0, 0, 8, 4), 4, 8)
    assert m.data.sum() == 32


def test_location_mask_zero_area():
    with pytest.raises(InvalidArgumentError):
        make_location_mask((3, 3, 3, 10), 16, 16)


def test_location_mask_count():
    m = make_location_mask((10, 20, 30, 40), 256, 256)
    assert m.data.sum() == 400
    assert m.data[20:40, 10:30].all()
