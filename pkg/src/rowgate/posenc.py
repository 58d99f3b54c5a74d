"""Positional information for row-indexed features.

Provides the fixed sinusoidal table, a learnable alternative, train-time
row-index jitter, and the additive injection of table rows into a
(channels x positions) feature map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import Tensor

# Frequency base of the sinusoid family: position p, channel pair i maps to
# sin(p / BASE^(2i/C)) and cos(p / BASE^(2i/C)).
PE_BASE = 100.0


@dataclass
class PETable:
    """A (positions x channels) table of per-row vectors."""

    values: Tensor
    mode: str  # "sinusoidal" or "learnable"

    @property
    def positions(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


def sinusoidal_table(positions: int, channels: int) -> PETable:
    """Fixed sine/cosine table over row indices 0 .. positions-1."""
    if channels < 2:
        raise ConfigError(f"sinusoidal table needs at least 2 channels, got {channels}")
    if positions < 1:
        raise ConfigError(f"sinusoidal table needs at least 1 position, got {positions}")
    p = np.arange(positions, dtype=np.float64)[:, None]
    i = np.arange(0, channels, 2, dtype=np.float64)[None, :]
    angle = p / np.power(PE_BASE, i / channels)
    table = np.empty((positions, channels))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : table[:, 1::2].shape[1]])
    return PETable(values=Tensor(table), mode="sinusoidal")


def learnable_table(positions: int, channels: int, rng: np.random.Generator) -> PETable:
    """From-scratch trainable table, small uniform init."""
    bound = 1.0 / np.sqrt(channels)
    values = rng.uniform(-bound, bound, size=(positions, channels))
    t = Tensor(values)
    t.requires_grad = True
    return PETable(values=t, mode="learnable")


def jitter(positions: int, jitter_max: int, rng: Optional[np.random.Generator]) -> np.ndarray:
    """Row-index vector with independent uniform shifts in [-jitter_max, jitter_max].

    Shifts are clamped to the valid index range; jitter_max == 0 returns
    the identity indexing without consuming randomness.
    """
    if jitter_max < 0:
        raise ConfigError(f"jitter_max must be >= 0, got {jitter_max}")
    base = np.arange(positions, dtype=np.intp)
    if jitter_max == 0:
        return base
    if rng is None:
        raise ConfigError("jitter with jitter_max > 0 requires a generator")
    shift = rng.integers(-jitter_max, jitter_max + 1, size=positions)
    return np.clip(base + shift, 0, positions - 1)


def inject(q: Tensor, table: PETable, index: Optional[np.ndarray] = None) -> Tensor:
    """Add table rows to a (channels x positions) map: out[:, p] += T[index[p], :]."""
    if q.data.ndim != 2:
        raise ShapeError(f"inject expects a rank-2 map, got {q.shape}")
    c, length = q.shape
    if table.channels != c:
        raise ConfigError(
            f"positional table has {table.channels} channels, feature map has {c}"
        )
    if index is None:
        index = np.arange(length, dtype=np.intp)
    index = np.asarray(index, dtype=np.intp)
    if index.shape != (length,):
        raise ShapeError(f"index length {index.shape} does not match {length} positions")
    values = table.values
    out = Tensor(
        q.data + values.data[index].T,
        q.requires_grad or values.requires_grad,
        (q, values),
        None,
        "pe_inject",
    )

    def backward(g: np.ndarray) -> None:
        if q.requires_grad:
            q.accumulate_grad(g)
        if values.requires_grad:
            dt = np.zeros_like(values.data)
            np.add.at(dt, index, g.T)
            values.accumulate_grad(dt)

    out._backward = backward
    return out
