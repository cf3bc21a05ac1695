"""Encoders, decoders and discriminators for the two image domains.

Domain x holds distorted underwater images, domain y the references. The
bundle carries ten parameter sets: per-domain content encoders, style
encoders and reconstruction decoders, a color encoder and enhancement
decoder for x, and one multi-scale discriminator per domain.
"""

from __future__ import annotations

import hashlib
from typing import Dict, List

import torch
import torch.nn as nn
import torch.nn.functional as F

from colorcode.core import DomainError, TrainConfig

MIN_CODE_INPUT = 32  # smallest spatial size the pooled encoders accept

GENERATOR_SET = (
    "color_enc_x", "content_enc_x", "style_enc_x", "content_enc_y",
    "style_enc_y", "dec_rec_x", "dec_enh_x", "dec_rec_y",
)
DISCRIMINATOR_SET = ("disc_x", "disc_y")


def _conv7(in_ch, out_ch):
    return [nn.ReflectionPad2d(3), nn.Conv2d(in_ch, out_ch, 7)]


class ResBlock(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1), nn.Conv2d(dim, dim, 3),
            nn.InstanceNorm2d(dim), nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1), nn.Conv2d(dim, dim, 3),
            nn.InstanceNorm2d(dim),
        )

    def forward(self, x):
        return x + self.block(x)


class ContentEncoder(nn.Module):
    """7x7 conv, two stride-2 downsamples, four residual blocks."""

    def __init__(self, base=64):
        super().__init__()
        layers = _conv7(3, base) + [nn.InstanceNorm2d(base), nn.ReLU(inplace=True)]
        dim = base
        for _ in range(2):
            layers += [
                nn.ReflectionPad2d(1), nn.Conv2d(dim, dim * 2, 4, stride=2),
                nn.InstanceNorm2d(dim * 2), nn.ReLU(inplace=True),
            ]
            dim *= 2
        layers += [ResBlock(dim) for _ in range(4)]
        self.model = nn.Sequential(*layers)
        self.out_channels = dim

    def forward(self, x):
        return self.model(x)


class CodeEncoder(nn.Module):
    """7x7 conv, four stride-2 downsamples, global pooling, projection to a
    length-K vector. Used for both the style codes and the color code."""

    def __init__(self, code_length, base=64):
        super().__init__()
        layers = _conv7(3, base) + [nn.ReLU(inplace=True)]
        dim = base
        for i in range(4):
            out = dim * 2 if i < 2 else dim
            layers += [nn.ReflectionPad2d(1), nn.Conv2d(dim, out, 4, stride=2),
                       nn.ReLU(inplace=True)]
            dim = out
        layers += [nn.AdaptiveAvgPool2d(1), nn.Conv2d(dim, code_length, 1)]
        self.model = nn.Sequential(*layers)
        self.code_length = code_length

    def forward(self, x):
        return self.model(x).flatten(1)


class AdaInResBlock(nn.Module):
    """Residual block whose two normalizations take per-code affine params."""

    def __init__(self, dim):
        super().__init__()
        self.pad = nn.ReflectionPad2d(1)
        self.conv1 = nn.Conv2d(dim, dim, 3)
        self.conv2 = nn.Conv2d(dim, dim, 3)
        self.dim = dim

    def forward(self, x, params):
        g1, b1, g2, b2 = params
        out = _adain(self.conv1(self.pad(x)), g1, b1)
        out = F.relu(out, inplace=True)
        out = _adain(self.conv2(self.pad(out)), g2, b2)
        return x + out


def _adain(x, gamma, beta):
    normed = F.instance_norm(x)
    return gamma[:, :, None, None] * normed + beta[:, :, None, None]


class Decoder(nn.Module):
    """Maps a content map plus a code vector back to an image.

    The code enters only through the affine parameters of the adaptive
    instance normalizations, produced by a small mapping network.
    """

    def __init__(self, code_length, content_channels, n_res=4, mlp_dim=256):
        super().__init__()
        dim = content_channels
        self.res_blocks = nn.ModuleList([AdaInResBlock(dim) for _ in range(n_res)])
        self.n_adain = 2 * n_res
        self.adain_dim = dim
        self.mapping = nn.Sequential(
            nn.Linear(code_length, mlp_dim), nn.ReLU(inplace=True),
            nn.Linear(mlp_dim, mlp_dim), nn.ReLU(inplace=True),
            nn.Linear(mlp_dim, self.n_adain * 2 * dim),
        )
        up = []
        for _ in range(2):
            up += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.ReflectionPad2d(2), nn.Conv2d(dim, dim // 2, 5),
                nn.GroupNorm(1, dim // 2), nn.ReLU(inplace=True),
            ]
            dim //= 2
        up += _conv7(dim, 3) + [nn.Tanh()]
        self.upsample = nn.Sequential(*up)
        self.code_length = code_length

    def forward(self, content, code):
        if code.shape[1] != self.code_length:
            raise DomainError(
                f"code length {code.shape[1]} does not match decoder ({self.code_length})"
            )
        params = self.mapping(code).chunk(self.n_adain * 2, dim=1)
        out = content
        for i, block in enumerate(self.res_blocks):
            out = block(out, params[4 * i: 4 * i + 4])
        return self.upsample(out)


class PatchDiscriminator(nn.Module):
    def __init__(self, base=64):
        super().__init__()
        layers = []
        dim_in, dim = 3, base
        for _ in range(4):
            layers += [nn.ReflectionPad2d(1), nn.Conv2d(dim_in, dim, 4, stride=2),
                       nn.LeakyReLU(0.2, inplace=True)]
            dim_in, dim = dim, dim * 2
        layers += [nn.Conv2d(dim_in, 1, 1)]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)


class MultiScaleDiscriminator(nn.Module):
    """Three patch discriminators over a stride-2 image pyramid."""

    def __init__(self, base=64, n_scales=3):
        super().__init__()
        self.scales = nn.ModuleList([PatchDiscriminator(base) for _ in range(n_scales)])
        self.downsample = nn.AvgPool2d(3, stride=2, padding=1, count_include_pad=False)

    def forward(self, x):
        outputs = []
        for disc in self.scales:
            outputs.append(torch.sigmoid(disc(x)))
            x = self.downsample(x)
        return outputs


def _init_parameters(module: nn.Module, seed: int, name: str) -> None:
    """Gaussian(0, 0.02) conv/linear weights, zero biases, deterministic per
    (seed, network name)."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    gen = torch.Generator().manual_seed(int.from_bytes(digest[:8], "big") % (2**63))
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            with torch.no_grad():
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * 0.02)
                if m.bias is not None:
                    m.bias.zero_()


class NetworkBundle:
    """All named networks plus the shape/validation contracts they share."""

    def __init__(self, config: TrainConfig, base_channels: int = 64):
        self.config = config
        self.base_channels = base_channels
        k = config.code_length
        content_ch = base_channels * 4
        self.content_channels = content_ch
        self.networks: Dict[str, nn.Module] = {
            "content_enc_x": ContentEncoder(base_channels),
            "content_enc_y": ContentEncoder(base_channels),
            "style_enc_x": CodeEncoder(k, base_channels),
            "style_enc_y": CodeEncoder(k, base_channels),
            "color_enc_x": CodeEncoder(k, base_channels),
            "dec_rec_x": Decoder(k, content_ch),
            "dec_rec_y": Decoder(k, content_ch),
            "dec_enh_x": Decoder(k, content_ch),
            "disc_x": MultiScaleDiscriminator(base_channels),
            "disc_y": MultiScaleDiscriminator(base_channels),
        }
        for name, net in self.networks.items():
            _init_parameters(net, config.seed, name)

    def __getitem__(self, name: str) -> nn.Module:
        return self.networks[name]

    def generator_parameters(self):
        for name in GENERATOR_SET:
            yield from self.networks[name].parameters()

    def discriminator_parameters(self):
        for name in DISCRIMINATOR_SET:
            yield from self.networks[name].parameters()

    def train(self):
        for net in self.networks.values():
            net.train()

    def eval(self):
        for net in self.networks.values():
            net.eval()

    # --- encoding / decoding contracts (batched tensors) ---

    def _check_image_batch(self, x: torch.Tensor, divisible=True, min_size=None):
        if x.ndim != 4 or x.shape[1] != 3:
            raise DomainError(f"expected Bx3xHxW input, got shape {tuple(x.shape)}")
        _, _, h, w = x.shape
        if divisible and (h % 4 != 0 or w % 4 != 0):
            raise DomainError(f"spatial dims must be divisible by 4, got {h}x{w}")
        if min_size is not None and (h < min_size or w < min_size):
            raise DomainError(f"input {h}x{w} below the {min_size}px encoder minimum")

    def encode_content(self, x: torch.Tensor, domain: str) -> torch.Tensor:
        self._check_image_batch(x)
        return self.networks[f"content_enc_{_dom(domain)}"](x)

    def encode_color(self, x: torch.Tensor) -> torch.Tensor:
        self._check_image_batch(x, divisible=False, min_size=MIN_CODE_INPUT)
        return self.networks["color_enc_x"](x)

    def encode_style(self, x: torch.Tensor, domain: str) -> torch.Tensor:
        self._check_image_batch(x, divisible=False, min_size=MIN_CODE_INPUT)
        return self.networks[f"style_enc_{_dom(domain)}"](x)

    def decode_enhance(self, c: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
        return self.networks["dec_enh_x"](c, m)

    def decode_reconstruct(self, c: torch.Tensor, s: torch.Tensor, domain: str) -> torch.Tensor:
        return self.networks[f"dec_rec_{_dom(domain)}"](c, s)

    def discriminate(self, img: torch.Tensor, domain: str) -> List[torch.Tensor]:
        self._check_image_batch(img, divisible=False)
        return self.networks[f"disc_{_dom(domain)}"](img)


def _dom(domain: str) -> str:
    if domain not in ("x", "y"):
        raise DomainError(f"domain must be 'x' or 'y', got {domain!r}")
    return domain
