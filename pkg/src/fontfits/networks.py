"""The six networks: text/context encoders, skeleton and title generators,
discriminator, and the frozen perceptual feature extractor.

Shape conventions (batch-first, CHW):
  title canvas   3 x 64 x 256   in [-1, 1]
  skeleton map   1 x 64 x 256   in [0, 1]
  cover          3 x 256 x 256  in [-1, 1]
  location mask  1 x 256 x 256  in {0, 1}
Encoders downsample three times; both feature streams meet at 8 x 32.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigurationError, InvalidArgumentError, ShapeError

TITLE_SHAPE = (64, 256)
COVER_SHAPE = (256, 256)

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    base_channels: int = 32
    leaky_slope: float = 0.2
    # ablation switches; flipping them never changes output shapes
    use_context: bool = True
    use_skeleton: bool = True
    use_discriminator: bool = True
    use_perception: bool = True
    # perceptual extractor weights: a VGG19 state-dict path, or random
    # initialization for environments without the pretrained file
    perception_weights: str | None = None
    random_perception: bool = False

    def __post_init__(self):
        if self.base_channels < 8:
            raise InvalidArgumentError(
                f"base_channels must be >= 8, got {self.base_channels}"
            )


@dataclass
class EncoderOutput:
    features: torch.Tensor            # B x 8b x 8 x 32
    skips: list = field(default_factory=list)  # [post-block-2, post-block-3]


def _expect(t: torch.Tensor, channels: int, hw: tuple[int, int], what: str):
    if t.dim() != 4 or t.shape[1] != channels or tuple(t.shape[2:]) != hw:
        raise ShapeError(what, (-1, channels) + hw, tuple(t.shape))


class _DownBlock(nn.Module):
    """Stride-2 conv followed by a residual pair of stride-1 convs."""

    def __init__(self, cin, cout, slope):
        super().__init__()
        self.down = nn.Conv2d(cin, cout, 3, stride=2, padding=1)
        self.conv_a = nn.Conv2d(cout, cout, 3, padding=1)
        self.conv_b = nn.Conv2d(cout, cout, 3, padding=1)
        self.act = nn.LeakyReLU(slope)

    def forward(self, x):
        d = self.act(self.down(x))
        h = self.act(self.conv_a(d))
        return self.act(self.conv_b(h) + d)


class TextEncoder(nn.Module):
    """Extracts glyph-shape features from the plain rendering of the text.

    Four blocks: the first is two stride-1 convs, the rest downsample once
    each. Outputs after blocks 2 and 3 are kept for the skeleton skips.
    """

    def __init__(self, config: ModelConfig, in_channels: int = 3):
        super().__init__()
        b = config.base_channels
        self.in_channels = in_channels
        self.entry_a = nn.Conv2d(in_channels, b, 3, padding=1)
        self.entry_b = nn.Conv2d(b, b, 3, padding=1)
        self.act = nn.LeakyReLU(config.leaky_slope)
        self.block2 = _DownBlock(b, 2 * b, config.leaky_slope)
        self.block3 = _DownBlock(2 * b, 4 * b, config.leaky_slope)
        self.block4 = _DownBlock(4 * b, 8 * b, config.leaky_slope)

    def forward(self, x: torch.Tensor) -> EncoderOutput:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ShapeError("encoder input", (-1, self.in_channels, "H", "W"), tuple(x.shape))
        h = self.act(self.entry_a(x))
        h = self.act(self.entry_b(h) + h)
        s2 = self.block2(h)
        s3 = self.block3(s2)
        f = self.block4(s3)
        return EncoderOutput(features=f, skips=[s2, s3])


class ContextEncoder(nn.Module):
    """Infers style evidence from the text-free cover plus the location mask.

    Same topology as the text encoder over the 4-channel concatenation;
    its output grid is resized to match the text features.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.encoder = TextEncoder(config, in_channels=4)

    def forward(self, cover: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if cover.dim() != 4 or cover.shape[1] != 3:
            raise ShapeError("cover", (-1, 3) + COVER_SHAPE, tuple(cover.shape))
        if mask.dim() != 4 or mask.shape[1] != 1 or mask.shape[2:] != cover.shape[2:]:
            raise ShapeError("location mask", (-1, 1) + tuple(cover.shape[2:]), tuple(mask.shape))
        out = self.encoder(torch.cat([cover, mask], dim=1))
        th, tw = TITLE_SHAPE[0] // 8, TITLE_SHAPE[1] // 8
        return F.interpolate(out.features, size=(th, tw), mode="bilinear", align_corners=False)


class _UpBlock(nn.Module):
    """Stride-2 transposed conv, optional encoder-skip merge, two convs.

    Every layer carries batch norm and leaky ReLU.
    """

    def __init__(self, cin, cout, slope, skip_channels: int = 0):
        super().__init__()
        self.up = nn.ConvTranspose2d(cin, cout, 3, stride=2, padding=1, output_padding=1)
        self.up_bn = nn.BatchNorm2d(cout)
        self.merge = None
        if skip_channels:
            self.merge = nn.Conv2d(cout + skip_channels, cout, 1)
            self.merge_bn = nn.BatchNorm2d(cout)
        self.conv_a = nn.Conv2d(cout, cout, 3, padding=1)
        self.bn_a = nn.BatchNorm2d(cout)
        self.conv_b = nn.Conv2d(cout, cout, 3, padding=1)
        self.bn_b = nn.BatchNorm2d(cout)
        self.act = nn.LeakyReLU(slope)

    def forward(self, x, skip=None):
        h = self.act(self.up_bn(self.up(x)))
        if self.merge is not None:
            if skip is None:
                raise InvalidArgumentError("skip tensor required for this block")
            h = self.act(self.merge_bn(self.merge(torch.cat([h, skip], dim=1))))
        h = self.act(self.bn_a(self.conv_a(h)))
        return self.act(self.bn_b(self.conv_b(h)))


class _GeneratorTrunk(nn.Module):
    """Shared upsampling body: one plain block then three upsampling blocks."""

    def __init__(self, config: ModelConfig, with_skips: bool):
        super().__init__()
        b = config.base_channels
        slope = config.leaky_slope
        self.entry_a = nn.Conv2d(16 * b, 8 * b, 3, padding=1)
        self.bn_a = nn.BatchNorm2d(8 * b)
        self.entry_b = nn.Conv2d(8 * b, 8 * b, 3, padding=1)
        self.bn_b = nn.BatchNorm2d(8 * b)
        self.act = nn.LeakyReLU(slope)
        self.block2 = _UpBlock(8 * b, 4 * b, slope, skip_channels=4 * b if with_skips else 0)
        self.block3 = _UpBlock(4 * b, 2 * b, slope, skip_channels=2 * b if with_skips else 0)
        self.block4 = _UpBlock(2 * b, b, slope)

    def forward(self, x, skips=None):
        h = self.act(self.bn_a(self.entry_a(x)))
        h = self.act(self.bn_b(self.entry_b(h)))
        s2 = s3 = None
        if skips is not None:
            s2, s3 = skips  # post-block-2 (quarter res), post-block-3 (eighth res)
        h = self.block2(h, s3)
        h = self.block3(h, s2)
        return self.block4(h)


class SkeletonGenerator(nn.Module):
    """Upsamples the joint features into a [0, 1] skeleton map.

    Text-encoder maps from blocks 2 and 3 are merged right after the
    matching transposed convolutions.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.trunk = _GeneratorTrunk(config, with_skips=True)
        self.out = nn.Conv2d(config.base_channels, 1, 3, padding=1)

    def forward(self, enc: EncoderOutput, ctx: torch.Tensor) -> torch.Tensor:
        x = torch.cat([enc.features, ctx], dim=1)
        h = self.trunk(x, skips=enc.skips)
        return torch.sigmoid(self.out(h))


class TextGenerator(nn.Module):
    """Renders the stylized title; the predicted skeleton steers the strokes.

    Same trunk as the skeleton generator minus the skips, plus one merge
    block that folds the skeleton map in before the tanh output layer.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        b = config.base_channels
        self.trunk = _GeneratorTrunk(config, with_skips=False)
        self.merge = nn.Conv2d(b + 1, b, 3, padding=1)
        self.merge_bn = nn.BatchNorm2d(b)
        self.act = nn.LeakyReLU(config.leaky_slope)
        self.out = nn.Conv2d(b, 3, 3, padding=1)

    def forward(self, enc: EncoderOutput, ctx: torch.Tensor,
                skeleton: torch.Tensor) -> torch.Tensor:
        x = torch.cat([enc.features, ctx], dim=1)
        h = self.trunk(x)
        if skeleton.shape[2:] != h.shape[2:] or skeleton.shape[1] != 1:
            raise ShapeError("skeleton map", (-1, 1) + tuple(h.shape[2:]), tuple(skeleton.shape))
        h = self.act(self.merge_bn(self.merge(torch.cat([h, skeleton], dim=1))))
        return torch.tanh(self.out(h))


class Discriminator(nn.Module):
    """Real/fake head over the (plain text, title) pair, DCGAN-style.

    Five 5x5 stride-2 convolutions with leaky ReLU, then a fully-connected
    layer and a sigmoid.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        b = config.base_channels
        chans = [2 * b, 4 * b, 8 * b, 16 * b, 16 * b]
        layers = []
        cin = 6
        for cout in chans:
            layers += [nn.Conv2d(cin, cout, 5, stride=2, padding=2), nn.LeakyReLU(config.leaky_slope)]
            cin = cout
        self.convs = nn.Sequential(*layers)
        h, w = TITLE_SHAPE[0] // 32, TITLE_SHAPE[1] // 32
        self.fc = nn.Linear(chans[-1] * h * w, 1)

    def forward(self, i_t: torch.Tensor, title: torch.Tensor) -> torch.Tensor:
        _expect(i_t, 3, TITLE_SHAPE, "discriminator text input")
        _expect(title, 3, TITLE_SHAPE, "discriminator title input")
        h = self.convs(torch.cat([i_t, title], dim=1))
        return torch.sigmoid(self.fc(h.flatten(1))).squeeze(1)


class PerceptionNetwork(nn.Module):
    """Frozen VGG19 slice emitting the five relu*_1 feature maps.

    Generator-range inputs are remapped to the extractor's expected
    normalization before the forward pass. Never trained.
    """

    TAP_INDICES = (1, 6, 11, 20, 29)  # relu1_1 .. relu5_1
    CHANNELS = (64, 128, 256, 512, 512)

    def __init__(self, weights_path: str | None = None, random_init: bool = False):
        super().__init__()
        import torchvision.models

        vgg = torchvision.models.vgg19(weights=None)
        if weights_path:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            if any(k.startswith("features.") for k in state):
                vgg.load_state_dict(state, strict=False)
            else:
                vgg.features.load_state_dict(state)
        elif not random_init:
            raise ConfigurationError(
                "no pretrained perception weights configured; pass a weights path "
                "or enable random perception (test mode)"
            )
        self.features = vgg.features[: self.TAP_INDICES[-1] + 1]
        self.register_buffer("mean", torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1))
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)

    def train(self, mode: bool = True):
        # stays in eval mode no matter what the surrounding loop does
        return super().train(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ShapeError("perception input", (-1, 3, "H", "W"), tuple(x.shape))
        h = ((x + 1.0) / 2.0 - self.mean) / self.std
        taps = []
        for i, layer in enumerate(self.features):
            h = layer(h)
            if i in self.TAP_INDICES:
                taps.append(h)
        return taps


class ModelBundle(nn.Module):
    """All trainable networks plus the fixed extractor, as one unit."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.text_encoder = TextEncoder(config)
        self.context_encoder = ContextEncoder(config)
        self.skeleton_generator = SkeletonGenerator(config)
        self.text_generator = TextGenerator(config)
        self.discriminator = Discriminator(config)
        self.perception = None
        if config.use_perception:
            self.perception = PerceptionNetwork(
                weights_path=config.perception_weights,
                random_init=config.random_perception,
            )

    @property
    def feature_channels(self) -> int:
        return 8 * self.config.base_channels

    def generation_modules(self):
        return [
            self.text_encoder,
            self.context_encoder,
            self.skeleton_generator,
            self.text_generator,
        ]

    def generation_parameters(self):
        for m in self.generation_modules():
            yield from m.parameters()

    def generate(self, i_t: torch.Tensor, cover: torch.Tensor,
                 mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Full generation pass honoring the ablation switches.

        Returns (title in [-1, 1], skeleton map in [0, 1]); disabled branches
        contribute zero tensors of the documented shapes.
        """
        _expect(i_t, 3, TITLE_SHAPE, "input text image")
        enc = self.text_encoder(i_t)
        if self.config.use_context:
            ctx = self.context_encoder(cover, mask)
        else:
            ctx = torch.zeros_like(enc.features)
        if self.config.use_skeleton:
            o_sk = self.skeleton_generator(enc, ctx)
        else:
            b = i_t.shape[0]
            o_sk = torch.zeros(b, 1, *TITLE_SHAPE, dtype=i_t.dtype, device=i_t.device)
        o_t = self.text_generator(enc, ctx, o_sk)
        return o_t, o_sk

    forward = generate


def create_bundle(config: ModelConfig, seed: int = 0) -> ModelBundle:
    """Build a bundle with reproducible initialization."""
    torch.manual_seed(seed)
    return ModelBundle(config)


def save_checkpoint(bundle: ModelBundle, path, extra: dict | None = None) -> None:
    """Write parameters keyed by ``<network>.<block>.<layer>`` plus the config."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(bundle.config),
        "state": bundle.state_dict(),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[ModelBundle, dict]:
    """Rebuild a bundle from disk; returns (bundle, extra-state dict)."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {version!r}")
    cfg_dict = dict(payload["config"])
    # a stored checkpoint never needs the pretrained file again
    if cfg_dict.get("use_perception"):
        cfg_dict["perception_weights"] = None
        cfg_dict["random_perception"] = True
    config = ModelConfig(**cfg_dict)
    bundle = ModelBundle(config)
    bundle.load_state_dict(payload["state"])
    bundle.eval()
    return bundle, payload.get("extra", {})
