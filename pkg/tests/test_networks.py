import numpy as np
import pytest
import torch

from fontfits.errors import ConfigurationError, InvalidArgumentError, ShapeError
from fontfits.networks import (
    ModelConfig,
    PerceptionNetwork,
    create_bundle,
    load_checkpoint,
    save_checkpoint,
)

CFG = ModelConfig(base_channels=8, random_perception=True)


@pytest.fixture(scope="module")
def bundle():
    return create_bundle(CFG, seed=0)


def _inputs(b, seed=0):
    g = torch.Generator().manual_seed(seed)
    return (
        torch.rand(b, 3, 64, 256, generator=g) * 2 - 1,
        torch.rand(b, 3, 256, 256, generator=g) * 2 - 1,
        (torch.rand(b, 1, 256, 256, generator=g) > 0.5).float(),
    )


def test_encoder_output_shapes(bundle):
    i_t, _, _ = _inputs(2)
    enc = bundle.text_encoder(i_t)
    assert enc.features.shape == (2, 8 * CFG.base_channels, 8, 32)
    assert enc.skips[0].shape == (2, 2 * CFG.base_channels, 32, 128)
    assert enc.skips[1].shape == (2, 4 * CFG.base_channels, 16, 64)


def test_encoder_zero_input_finite(bundle):
    enc = bundle.text_encoder(torch.zeros(1, 3, 64, 256))
    assert torch.isfinite(enc.features).all()


def test_encoder_distinguishes_inputs(bundle):
    a = bundle.text_encoder(_inputs(1, seed=1)[0]).features
    b = bundle.text_encoder(_inputs(1, seed=2)[0]).features
    assert (a - b).abs().max() > 1e-6


def test_context_matches_text_feature_shape(bundle):
    i_t, cover, mask = _inputs(2)
    ctx = bundle.context_encoder(cover, mask)
    assert ctx.shape == bundle.text_encoder(i_t).features.shape


def test_context_sensitive_to_mask(bundle):
    _, cover, _ = _inputs(1)
    zeros = torch.zeros(1, 1, 256, 256)
    ones = torch.ones(1, 1, 256, 256)
    a = bundle.context_encoder(cover, zeros)
    b = bundle.context_encoder(cover, ones)
    assert (a - b).abs().max() > 1e-6


def test_context_shape_mismatch(bundle):
    with pytest.raises(ShapeError):
        bundle.context_encoder(torch.zeros(1, 3, 256, 256), torch.zeros(1, 1, 128, 128))


@pytest.mark.parametrize("batch", [1, 3, 8])
def test_forward_shapes_and_ranges(bundle, batch):
    bundle.eval()
    i_t, cover, mask = _inputs(batch)
    with torch.no_grad():
        o_t, o_sk = bundle.generate(i_t, cover, mask)
        p = bundle.discriminator(i_t, o_t)
    assert o_t.shape == (batch, 3, 64, 256)
    assert o_sk.shape == (batch, 1, 64, 256)
    assert o_t.min() >= -1.0 and o_t.max() <= 1.0
    assert o_sk.min() >= 0.0 and o_sk.max() <= 1.0
    assert (o_sk.min() > 0.0) and (o_sk.max() < 1.0)  # sigmoid interior
    assert p.shape == (batch,)
    assert (p > 0).all() and (p < 1).all()


def test_discriminator_downsampling_grid(bundle):
    i_t, _, _ = _inputs(1)
    h = bundle.discriminator.convs(torch.cat([i_t, i_t], dim=1))
    assert h.shape[2:] == (2, 8)


@pytest.mark.parametrize("variant", [
    dict(use_context=False),
    dict(use_skeleton=False),
    dict(use_discriminator=False),
    dict(use_perception=False),
    dict(use_context=False, use_skeleton=False, use_discriminator=False, use_perception=False),
])
def test_ablation_switches_keep_shapes(variant):
    cfg = ModelConfig(base_channels=8, random_perception=True, **variant)
    b = create_bundle(cfg, seed=0)
    b.eval()
    i_t, cover, mask = _inputs(2)
    with torch.no_grad():
        o_t, o_sk = b.generate(i_t, cover, mask)
    assert o_t.shape == (2, 3, 64, 256)
    assert o_sk.shape == (2, 1, 64, 256)
    if not cfg.use_skeleton:
        assert o_sk.abs().sum() == 0


def test_gradients_reach_both_encoders(bundle):
    bundle.train()
    bundle.zero_grad()
    i_t, cover, mask = _inputs(2)
    o_t, _ = bundle.generate(i_t, cover, mask)
    o_t.abs().mean().backward()
    text_norm = sum(p.grad.abs().sum() for p in bundle.text_encoder.parameters()
                    if p.grad is not None)
    ctx_norm = sum(p.grad.abs().sum() for p in bundle.context_encoder.parameters()
                   if p.grad is not None)
    assert float(text_norm) > 0
    assert float(ctx_norm) > 0
    bundle.zero_grad()


def test_same_seed_same_outputs():
    a = create_bundle(CFG, seed=123)
    b = create_bundle(CFG, seed=123)
    a.eval(), b.eval()
    i_t, cover, mask = _inputs(1)
    with torch.no_grad():
        oa, _ = a.generate(i_t, cover, mask)
        ob, _ = b.generate(i_t, cover, mask)
    assert torch.equal(oa, ob)


def test_wrong_title_shape_raises(bundle):
    with pytest.raises(ShapeError) as exc:
        bundle.generate(torch.zeros(1, 3, 32, 32), torch.zeros(1, 3, 256, 256),
                        torch.zeros(1, 1, 256, 256))
    assert "expected" in str(exc.value)


# ---- perception


def test_perception_requires_weights_or_flag():
    with pytest.raises(ConfigurationError):
        PerceptionNetwork(weights_path=None, random_init=False)


def test_perception_tap_channels(bundle):
    x = torch.rand(1, 3, 64, 256) * 2 - 1
    taps = bundle.perception(x)
    assert len(taps) == 5
    assert tuple(t.shape[1] for t in taps) == (64, 128, 256, 512, 512)


def test_perception_deterministic(bundle):
    x = torch.rand(2, 3, 64, 256) * 2 - 1
    a = bundle.perception(x)
    b = bundle.perception(x.clone())
    assert all(torch.equal(u, v) for u, v in zip(a, b))


def test_perception_frozen(bundle):
    x = (torch.rand(1, 3, 64, 256) * 2 - 1).requires_grad_(True)
    out = bundle.perception(x)
    sum(t.sum() for t in out).backward()
    assert all(p.grad is None for p in bundle.perception.parameters())
    assert all(not p.requires_grad for p in bundle.perception.parameters())
    # stays eval even when the bundle trains
    bundle.train()
    assert not bundle.perception.training
    bundle.eval()


def test_base_channels_floor():
    with pytest.raises(InvalidArgumentError):
        ModelConfig(base_channels=4)


# ---- checkpointing


def test_checkpoint_round_trip(tmp_path, bundle):
    path = tmp_path / "ck.pt"
    save_checkpoint(bundle, path, extra={"note": 1})
    loaded, extra = load_checkpoint(path)
    assert extra["note"] == 1
    i_t, cover, mask = _inputs(1)
    bundle.eval()
    with torch.no_grad():
        a, _ = bundle.generate(i_t, cover, mask)
        b, _ = loaded.generate(i_t, cover, mask)
    assert torch.equal(a, b)


def test_checkpoint_keys_are_network_scoped(tmp_path, bundle):
    path = tmp_path / "ck.pt"
    save_checkpoint(bundle, path)
    payload = torch.load(path, weights_only=False)
    nets = {k.split(".")[0] for k in payload["state"]}
    assert {"text_encoder", "context_encoder", "skeleton_generator",
            "text_generator", "discriminator", "perception"} <= nets
