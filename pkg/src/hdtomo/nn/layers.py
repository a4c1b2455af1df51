"""U-Net backbone built from 3x3 Conv -> InstanceNorm -> LeakyReLU blocks."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn
import torch.nn.functional as F

LEAKY_SLOPE = 0.01


@dataclass
class NetConfig:
    depth: int = 3
    base_width: int = 16
    seed: int = 0
    domain: str = "image"  # "image" or "projection"
    K: int = 1
    in_channels: int = 1
    out_channels: int = 1
    norm_affine: bool = False
    norm_eps: float = 1e-5
    zero_init_last: bool = True

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.domain not in ("image", "projection"):
            raise ValueError(f"unknown domain {self.domain!r}")

    def to_dict(self) -> dict:
        return asdict(self)


class BasicBlock(nn.Module):
    def __init__(self, cin, cout, affine=False, eps=1e-5):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, 3, padding=1)
        self.norm = nn.InstanceNorm2d(cout, affine=affine, eps=eps)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class Downsample(nn.Module):
    def forward(self, x):
        return F.avg_pool2d(x, 2)


class Upsample(nn.Module):
    def forward(self, x):
        return F.interpolate(x, scale_factor=2, mode="nearest")


class SkipConcat(nn.Module):
    def forward(self, x, skip):
        return torch.cat([x, skip], dim=1)


class UNet(nn.Module):
    """Standard U-Net. ``depth`` counts scales; widths double per scale.

    Encoder scale ``s``: two blocks. Decoder: nearest upsample, one block to
    halve the width, concat with the skip, two blocks. A 1x1 conv maps to the
    output channels.
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        g = torch.Generator().manual_seed(cfg.seed)
        w = [cfg.base_width * 2**s for s in range(cfg.depth)]
        blk = lambda a, b: BasicBlock(a, b, cfg.norm_affine, cfg.norm_eps)
        self.enc = nn.ModuleList()
        cin = cfg.in_channels
        for s in range(cfg.depth):
            self.enc.append(nn.Sequential(blk(cin, w[s]), blk(w[s], w[s])))
            cin = w[s]
        self.down = Downsample()
        self.up = Upsample()
        self.cat = SkipConcat()
        self.up_conv = nn.ModuleList()
        self.dec = nn.ModuleList()
        for s in reversed(range(cfg.depth - 1)):
            self.up_conv.append(blk(w[s + 1], w[s]))
            self.dec.append(nn.Sequential(blk(2 * w[s], w[s]), blk(w[s], w[s])))
        self.head = nn.Conv2d(w[0], cfg.out_channels, 1)
        self._init(g)

    def _init(self, g):
        with torch.no_grad():
            for m in self.modules():
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                    bound = (6.0 / ((1 + LEAKY_SLOPE**2) * fan_in)) ** 0.5
                    m.weight.copy_(torch.rand(m.weight.shape, generator=g) * 2 * bound - bound)
                    m.bias.zero_()
            if self.cfg.zero_init_last:
                self.head.weight.zero_()
                self.head.bias.zero_()

    def forward(self, x):
        f = 2 ** (self.cfg.depth - 1)
        if x.shape[-1] % f or x.shape[-2] % f:
            raise ValueError(f"spatial size {tuple(x.shape[-2:])} must be divisible by {f}")
        skips = []
        for s, enc in enumerate(self.enc):
            if s:
                x = self.down(x)
            x = enc(x)
            skips.append(x)
        for up_conv, dec, skip in zip(self.up_conv, self.dec, reversed(skips[:-1])):
            x = dec(self.cat(up_conv(self.up(x)), skip))
        return self.head(x)


class ResidualNet(nn.Module):
    """``x - UNet(x)``: the backbone predicts the artifact to subtract."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.body = UNet(cfg)

    def forward(self, x):
        return x - self.body(x)


def count_parameters(cfg: NetConfig) -> int:
    """Closed-form trainable parameter count of :class:`UNet` for ``cfg``."""
    w = [cfg.base_width * 2**s for s in range(cfg.depth)]
    aff = 2 if cfg.norm_affine else 0

    def block(a, b):
        return 9 * a * b + b + aff * b

    total = 0
    cin = cfg.in_channels
    for s in range(cfg.depth):
        total += block(cin, w[s]) + block(w[s], w[s])
        cin = w[s]
    for s in range(cfg.depth - 1):
        total += block(w[s + 1], w[s]) + block(2 * w[s], w[s]) + block(w[s], w[s])
    total += w[0] * cfg.out_channels + cfg.out_channels
    return total
