"""Task heads: middle-frame reconstruction, motion irregularity, spatial jigsaw.

Each head exposes `unfreeze_groups()`, an ordered list of submodules from the
output side inward, which the phase-1 curriculum unfreezes one per epoch.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoders import ConvBlock, EncoderConfig
from .memory import MemoryBank


class UpsampleBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm = nn.GroupNorm(4, out_ch)
        self.act = nn.GELU()

    def forward(self, x):
        return self.act(self.norm(self.conv(self.up(x))))


class FuseBlock(nn.Module):
    """Concatenate a skip map and mix it in."""

    def __init__(self, channels: int, skip_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels + skip_channels, channels, 3, padding=1)
        self.norm = nn.GroupNorm(4, channels)
        self.act = nn.GELU()

    def forward(self, x, skip):
        return self.act(self.norm(self.conv(torch.cat([x, skip], dim=1))))


class MiddleFrameDecoder(nn.Module):
    """Reconstructs the masked middle frame from bottleneck features.

    Bottleneck positions are first replaced by their memory retrievals (when
    the memory is enabled), then upsampled with skip fusion back to 64x64.
    """

    def __init__(self, cfg: EncoderConfig, memory_slots: int = 100, use_memory: bool = True):
        super().__init__()
        c0, c1, c2 = cfg.channels
        self.use_memory = use_memory
        self.memory = MemoryBank(memory_slots, c2) if use_memory else None
        self.up1 = UpsampleBlock(c2, c1)
        self.fuse1 = FuseBlock(c1, c1)
        self.up2 = UpsampleBlock(c1, c0)
        self.fuse2 = FuseBlock(c0, c0)
        self.up3 = UpsampleBlock(c0, 16)
        self.out_conv = nn.Conv2d(16, 3, 3, padding=1)

    def forward(self, features, skips):
        """-> (reconstruction (B, 3, 64, 64), memory attention or None)."""
        attention = None
        h = features
        if self.memory is not None:
            b, c, height, width = h.shape
            queries = h.permute(0, 2, 3, 1).reshape(-1, c)
            retrieved, attention = self.memory(queries)
            h = retrieved.reshape(b, height, width, c).permute(0, 3, 1, 2)
        h = self.fuse1(self.up1(h), skips[1])
        h = self.fuse2(self.up2(h), skips[0])
        return torch.sigmoid(self.out_conv(self.up3(h))), attention

    def unfreeze_groups(self) -> list[nn.Module]:
        groups = [self.out_conv, self.up3, nn.ModuleList([self.up2, self.fuse2]),
                  nn.ModuleList([self.up1, self.fuse1])]
        if self.memory is not None:
            groups.append(self.memory)
        return groups


class IrregularityHead(nn.Module):
    """Binary classifier over motion regularity."""

    NUM_CLASSES = 2

    def __init__(self, cfg: EncoderConfig, hidden: int = 64):
        super().__init__()
        c2 = cfg.channels[-1]
        self.block1 = ConvBlock(c2)
        self.block2 = ConvBlock(c2)
        self.fc1 = nn.Linear(c2 * 8 * 8, hidden)
        self.fc2 = nn.Linear(hidden, self.NUM_CLASSES)

    def forward(self, features) -> torch.Tensor:
        """-> class probabilities (B, 2)."""
        h = self.block2(self.block1(features))
        h = F.relu(self.fc1(h.flatten(1)))
        return F.softmax(self.fc2(h), dim=-1)

    def unfreeze_groups(self) -> list[nn.Module]:
        return [self.fc2, self.fc1, self.block2, self.block1]


class JigsawHead(nn.Module):
    """Predicts the original position of each of the four shuffled patches.

    Features are pooled to a 2x2 grid; each cell runs through a shared
    two-layer MLP giving an independent 4-way position distribution.
    """

    GRID = 2

    def __init__(self, cfg: EncoderConfig, hidden: int = 64, dropout: float = 0.1):
        super().__init__()
        c2 = cfg.channels[-1]
        self.conv = ConvBlock(c2)
        self.pool = nn.AdaptiveAvgPool2d(self.GRID)
        self.mlp_in = nn.Linear(c2, hidden)
        self.dropout = nn.Dropout(dropout)
        self.mlp_out = nn.Linear(hidden, self.GRID * self.GRID)

    def forward(self, features) -> torch.Tensor:
        """-> per-slot position probabilities (B, 4, 4)."""
        h = self.pool(self.conv(features))  # (B, C, 2, 2)
        h = h.flatten(2).transpose(1, 2)  # (B, 4, C) in row-major slot order
        h = self.dropout(F.relu(self.mlp_in(h)))
        return F.softmax(self.mlp_out(h), dim=-1)

    def unfreeze_groups(self) -> list[nn.Module]:
        return [self.mlp_out, self.mlp_in, self.conv]
