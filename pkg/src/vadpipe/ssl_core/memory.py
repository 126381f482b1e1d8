"""Slot-memory module for prototype retrieval during reconstruction."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class MemoryBank(nn.Module):
    """Learned slots queried by attention.

    Each query attends over all slots with softmax weights (rows sum to 1)
    and is replaced by its weighted slot combination, biasing reconstruction
    toward patterns seen during training.
    """

    def __init__(self, num_slots: int = 100, slot_dim: int = 128):
        super().__init__()
        if num_slots < 1 or slot_dim < 1:
            raise ValueError("num_slots and slot_dim must be positive")
        self.num_slots = num_slots
        self.slot_dim = slot_dim
        slots = torch.randn(num_slots, slot_dim)
        slots = slots / slots.norm(dim=1, keepdim=True)
        self.slots = nn.Parameter(slots)

    def forward(self, queries: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """queries: (..., slot_dim) -> (retrieved, attention)."""
        if queries.shape[-1] != self.slot_dim:
            raise ValueError(
                f"expected query dim {self.slot_dim}, got {queries.shape[-1]}"
            )
        scores = queries @ self.slots.t() / (self.slot_dim**0.5)
        attention = F.softmax(scores, dim=-1)
        retrieved = attention @ self.slots
        return retrieved, attention
