"""Shared spatio-temporal encoders.

Two interchangeable variants: a convolutional stack ending in attention
blocks with convolutional token projections ("conv_cvt"), and a hierarchical
transformer that mixes windowed and full attention across three resolution
levels ("hierarchical_former"). Both consume a (B, T, 3, 64, 64) frame stack
and publish the same head-facing contract: a bottleneck feature map plus two
skip maps at intermediate resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import torch
import torch.nn as nn

INPUT_SIZE = 64


class ShapeError(ValueError):
    """Input shape does not match the encoder configuration."""


@dataclass
class EncoderConfig:
    variant: str = "conv_cvt"
    frames: int = 7  # 2t+1
    channels: list[int] = field(default_factory=lambda: [32, 64, 128])
    depths: list[int] = field(default_factory=lambda: [1, 1, 2])
    heads: int = 4

    def __post_init__(self):
        if self.variant not in ("conv_cvt", "hierarchical_former"):
            raise ValueError(f"unknown encoder variant: {self.variant!r}")
        if len(self.channels) != 3 or len(self.depths) != 3:
            raise ValueError("channels and depths must list three stages")

    @property
    def input_shape(self) -> tuple[int, int, int, int]:
        return (self.frames, 3, INPUT_SIZE, INPUT_SIZE)

    @property
    def feature_dim(self) -> int:
        return self.channels[-1]


class EncoderOutput(NamedTuple):
    features: torch.Tensor  # (B, channels[2], 8, 8)
    skips: tuple[torch.Tensor, torch.Tensor]  # (B, c0, 32, 32), (B, c1, 16, 16)


def _check_input(x: torch.Tensor, cfg: EncoderConfig) -> None:
    expected = cfg.input_shape
    if x.dim() != 5 or tuple(x.shape[1:]) != expected:
        raise ShapeError(f"expected input (B, {expected}), got {tuple(x.shape)}")


class ConvBlock(nn.Module):
    """Residual 3x3 conv block with group norm."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm1 = nn.GroupNorm(4, channels)
        self.norm2 = nn.GroupNorm(4, channels)
        self.act = nn.GELU()

    def forward(self, x):
        h = self.act(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return self.act(x + h)


class ConvAttentionBlock(nn.Module):
    """Self-attention over spatial tokens with depthwise-conv q/k/v projections."""

    def __init__(self, channels: int, heads: int):
        super().__init__()
        self.qkv = nn.Conv2d(channels, channels * 3, 3, padding=1, groups=channels)
        self.attn = nn.MultiheadAttention(channels, heads, batch_first=True)
        self.norm1 = nn.GroupNorm(4, channels)
        self.norm2 = nn.GroupNorm(4, channels)
        self.mlp = nn.Sequential(
            nn.Conv2d(channels, channels * 2, 1), nn.GELU(), nn.Conv2d(channels * 2, channels, 1)
        )

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = self.qkv(self.norm1(x)).chunk(3, dim=1)
        flat = lambda t: t.flatten(2).transpose(1, 2)  # (B, HW, C)
        attended, _ = self.attn(flat(q), flat(k), flat(v), need_weights=False)
        x = x + attended.transpose(1, 2).reshape(b, c, h, w)
        return x + self.mlp(self.norm2(x))


class WindowAttentionBlock(nn.Module):
    """Multi-head attention within non-overlapping square windows."""

    def __init__(self, channels: int, heads: int, window: int = 8):
        super().__init__()
        self.window = window
        self.norm1 = nn.LayerNorm(channels)
        self.attn = nn.MultiheadAttention(channels, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(channels)
        self.mlp = nn.Sequential(
            nn.Linear(channels, channels * 2), nn.GELU(), nn.Linear(channels * 2, channels)
        )

    def forward(self, x):
        b, c, h, w = x.shape
        win = min(self.window, h)
        nh, nw = h // win, w // win
        # (B, C, H, W) -> (B*nh*nw, win*win, C)
        tokens = x.reshape(b, c, nh, win, nw, win).permute(0, 2, 4, 3, 5, 1)
        tokens = tokens.reshape(b * nh * nw, win * win, c)
        normed = self.norm1(tokens)
        attended, _ = self.attn(normed, normed, normed, need_weights=False)
        tokens = tokens + attended
        tokens = tokens + self.mlp(self.norm2(tokens))
        tokens = tokens.reshape(b, nh, nw, win, win, c).permute(0, 5, 1, 3, 2, 4)
        return tokens.reshape(b, c, h, w)


class ConvCvtEncoder(nn.Module):
    """Convolutional stages for local structure, attention at the bottleneck."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        c0, c1, c2 = cfg.channels
        d0, d1, d2 = cfg.depths
        self.stem = nn.Sequential(
            nn.Conv2d(cfg.frames * 3, c0, 3, stride=2, padding=1), nn.GroupNorm(4, c0), nn.GELU()
        )
        self.stage1 = nn.Sequential(*[ConvBlock(c0) for _ in range(d0)])
        self.down1 = nn.Conv2d(c0, c1, 3, stride=2, padding=1)
        self.stage2 = nn.Sequential(*[ConvBlock(c1) for _ in range(d1)])
        self.down2 = nn.Conv2d(c1, c2, 3, stride=2, padding=1)
        self.stage3 = nn.Sequential(*[ConvAttentionBlock(c2, cfg.heads) for _ in range(d2)])

    def forward(self, x: torch.Tensor) -> EncoderOutput:
        _check_input(x, self.cfg)
        h = self.stem(x.flatten(1, 2))
        skip0 = self.stage1(h)
        skip1 = self.stage2(self.down1(skip0))
        features = self.stage3(self.down2(skip1))
        return EncoderOutput(features, (skip0, skip1))

    def shared_block(self) -> nn.Module:
        return self.stage3[-1]


class HierarchicalFormerEncoder(nn.Module):
    """Attention at every level: windowed where token counts are large,
    full attention at coarser levels."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        c0, c1, c2 = cfg.channels
        d0, d1, d2 = cfg.depths
        self.embed = nn.Sequential(
            nn.Conv2d(cfg.frames * 3, c0, 3, stride=2, padding=1), nn.GroupNorm(4, c0), nn.GELU()
        )
        self.stage1 = nn.Sequential(*[WindowAttentionBlock(c0, 2, window=8) for _ in range(d0)])
        self.merge1 = nn.Conv2d(c0, c1, 2, stride=2)
        self.stage2 = nn.Sequential(*[WindowAttentionBlock(c1, cfg.heads, window=16) for _ in range(d1)])
        self.merge2 = nn.Conv2d(c1, c2, 2, stride=2)
        self.stage3 = nn.Sequential(*[WindowAttentionBlock(c2, cfg.heads, window=8) for _ in range(d2)])

    def forward(self, x: torch.Tensor) -> EncoderOutput:
        _check_input(x, self.cfg)
        h = self.embed(x.flatten(1, 2))
        skip0 = self.stage1(h)
        skip1 = self.stage2(self.merge1(skip0))
        features = self.stage3(self.merge2(skip1))
        return EncoderOutput(features, (skip0, skip1))

    def shared_block(self) -> nn.Module:
        return self.stage3[-1]


def build_encoder(cfg: EncoderConfig) -> nn.Module:
    if cfg.variant == "conv_cvt":
        return ConvCvtEncoder(cfg)
    return HierarchicalFormerEncoder(cfg)
