"""Cycle-count model of the streaming cluster-compensation datapath.

The profile streams through a shift register of length ``s`` one entry per
clock.  A lone cluster window is corrected in flight at no extra cost.  Where
windows of several peaks overlap, the datapath halts and applies every
overlapping contribution serially, one cycle each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelError


@dataclass(frozen=True)
class DatapathConfig:
    """Shift-register length ``s`` and profile length ``n``.

    ``s`` must be odd so the window is centered on the peak; ``require_odd``
    can be switched off to evaluate the closed-form bound for even lengths.
    """

    s: int
    n: int
    require_odd: bool = True

    def __post_init__(self):
        if not 3 <= self.s <= self.n:
            raise ModelError(f"need 3 <= s <= N, got s={self.s}, N={self.n}")
        if self.require_odd and self.s % 2 == 0:
            raise ModelError(f"shift-register length must be odd, got {self.s}")

    @property
    def half_width(self) -> int:
        return (self.s - 1) // 2


def active_windows(cfg: DatapathConfig, peak_positions) -> np.ndarray:
    """Number of peak windows covering each stream position 1..N."""
    pos = np.asarray(peak_positions, dtype=np.int64).reshape(-1)
    if pos.size and (pos.min() < 1 or pos.max() > cfg.n):
        raise ModelError(f"peak positions must lie in 1..{cfg.n}")
    if pos.size > 1 and np.any(np.diff(pos) < 0):
        raise ModelError("peak positions must be sorted")
    h = cfg.half_width
    diff = np.zeros(cfg.n + 1, dtype=np.int64)
    # window [p-h, p+h] clipped to the profile, as 0-based half-open ranges
    np.add.at(diff, np.maximum(pos - 1 - h, 0), 1)
    np.add.at(diff, np.minimum(pos + h, cfg.n), -1)
    return np.cumsum(diff[:-1])


def estimate_cycles(cfg: DatapathConfig, peak_positions) -> int:
    """Stream simulation: ``N`` base cycles plus the serialized overlap halts."""
    act = active_windows(cfg, peak_positions)
    stalls = np.where(act > 1, act, 0)
    return int(cfg.n + stalls.sum())


def worst_case_cycles(n, s: int | None = None, p: int | None = None) -> int:
    """``N + s * p``: every peak falls inside every other peak's window.

    Accepts either ``(cfg, p)`` or plain ``(n, s, p)``.
    """
    if isinstance(n, DatapathConfig):
        cfg, p = n, s
        n, s = cfg.n, cfg.s
    if p is None or s is None:
        raise ModelError("worst_case_cycles needs N, s and p")
    if p < 0:
        raise ModelError("p must be >= 0")
    if s < 1 or n < 1:
        raise ModelError("N and s must be positive")
    return int(n + s * p)
