"""SSIG: mIoU and normalized GED fused into one similarity score."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FpsimError


class OutOfRange(FpsimError):
    pass


class EmptyInput(FpsimError):
    pass


@dataclass(frozen=True)
class SsigParams:
    gamma: float = 0.4

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def graph_similarity(nged_val: float, gamma: float) -> float:
    """1 - nGED**gamma: the graph half of the score."""
    return 1.0 - nged_val**gamma


def ssig(miou_val: float, nged_val: float, params: SsigParams = SsigParams()) -> float:
    if not 0.0 <= miou_val <= 1.0:
        raise OutOfRange(f"mIoU {miou_val} outside [0, 1]")
    if not 0.0 <= nged_val <= 1.0:
        raise OutOfRange(f"nGED {nged_val} outside [0, 1]")
    return (miou_val + graph_similarity(nged_val, params.gamma)) / 2.0


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma list of values."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError(f"bad grid {text!r}")
        k = int(np.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 10) for i in range(k + 1)]
    return [float(x) for x in text.split(",") if x.strip()]


def _density(values: np.ndarray, bins: int) -> np.ndarray:
    idx = np.clip(np.floor(values * bins).astype(np.int64), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    return counts / counts.sum()


def histogram_overlap(p: np.ndarray, q: np.ndarray) -> float:
    """Histogram intersection of two normalized histograms."""
    return float(np.minimum(p, q).sum())


def calibrate_gamma(
    miou_samples: Sequence[float],
    nged_samples: Sequence[float],
    grid: Sequence[float] | str = "0.1:1.0:0.05",
    bins: int = 100,
) -> tuple[float, float]:
    """Pick the gamma whose transformed nGED histogram best overlaps the mIoU histogram.

    Both histograms use ``bins`` equal bins on [0, 1]. Ties go to the
    smallest gamma. Returns ``(gamma_star, overlap)``.
    """
    if isinstance(grid, str):
        grid = parse_grid(grid)
    m = np.asarray(miou_samples, dtype=float)
    g = np.asarray(nged_samples, dtype=float)
    if m.size == 0 or g.size == 0 or len(grid) == 0:
        raise EmptyInput("calibration needs mIoU samples, nGED samples and a non-empty grid")
    p = _density(m, bins)
    best_gamma, best_overlap = None, -1.0
    for gamma in sorted(grid):
        if gamma <= 0:
            raise ValueError(f"grid contains non-positive gamma {gamma}")
        q = _density(1.0 - g**gamma, bins)
        ov = histogram_overlap(p, q)
        if ov > best_overlap + 1e-12:
            best_gamma, best_overlap = float(gamma), ov
    return best_gamma, best_overlap
