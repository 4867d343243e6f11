from __future__ import annotations
from noc_sentinel.config import DEFAULT_STRIDE, DEFAULT_WINDOW
from noc_sentinel.errors import InvalidArgumentError
from dataclasses import dataclass
from enum import Enum
from typing import Any
import numpy as np


class Normalization(Enum):
    NONE = "none"
    MINMAX = "minmax"


@dataclass(frozen=True)
class WindowSpec:
    width: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE
    normalization: Normalization = Normalization.NONE

    def __post_init__(self):
        if self.width < 2:
            raise InvalidArgumentError(f"window width must be >= 2, got {self.width}")
        if not 1 <= self.stride <= self.width:
            raise InvalidArgumentError(f"stride must be in [1, {self.width}], got {self.stride}")

    def starts(self, length: int) -> range:
        if length < self.width:
            raise InvalidArgumentError(f"series of length {length} is shorter than the window width {self.width}")
        return range(0, length - self.width + 1, self.stride)

    def covers(self, start: int) -> range:
        return range(start, start + self.width)


def minmax(window: np.ndarray) -> np.ndarray:
    lo, hi = window.min(), window.max()
    if hi == lo:
        return np.zeros_like(window)
    return (window - lo) / (hi - lo)


def prepare(window: Any, spec: WindowSpec) -> np.ndarray:
    x = np.asarray(getattr(window, "samples", window), dtype=np.float64).reshape(-1)
    if len(x) != spec.width:
        raise InvalidArgumentError(f"window has {len(x)} samples, expected {spec.width}")
    return minmax(x) if spec.normalization is Normalization.MINMAX else x


def slide_windows(series: Any, spec: WindowSpec) -> np.ndarray:
    """Windows starting at 0, s, 2s, ...; one row per window."""
    x = np.asarray(getattr(series, "samples", series), dtype=np.float64).reshape(-1)
    starts = spec.starts(len(x))
    windows = np.lib.stride_tricks.sliding_window_view(x, spec.width)[::spec.stride].copy()
    assert len(windows) == len(starts)
    if spec.normalization is Normalization.MINMAX:
        windows = np.vstack([minmax(w) for w in windows])
    return windows
