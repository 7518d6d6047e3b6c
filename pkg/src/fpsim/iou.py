"""Intersection-over-union on binary masks and semantic images."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .core import CategoryMap, DimensionMismatch, FpsimError, SemanticImage


class NoSharedClasses(FpsimError):
    pass


def iou_binary(a, b) -> float | None:
    """|a & b| / |a | b| for two boolean masks; ``None`` when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return None
    return np.count_nonzero(a & b) / union


def class_overlaps(x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-code intersection and union pixel counts (index = code, 256 slots)."""
    joint = np.bincount(x1.ravel().astype(np.int64) * 256 + x2.ravel(), minlength=65536).reshape(256, 256)
    inter = np.diagonal(joint)
    union = joint.sum(axis=1) + joint.sum(axis=0) - inter
    return inter, union


def _exact_mean(inter, union, denom: int) -> float:
    """Mean of inter/union ratios computed exactly, then rounded once to float."""
    total = sum((Fraction(int(i), int(u)) for i, u in zip(inter, union)), Fraction(0))
    return float(total / denom)


def miou_arrays(x1: np.ndarray, x2: np.ndarray, foreground: np.ndarray, strict: bool = False) -> float:
    """mIoU of two uint8 label arrays. ``foreground`` is a 256-long mask of counted codes.

    Default: average over counted classes present in either image. With
    ``strict``, divide by the number of counted classes in the category map,
    absent classes contributing zero.
    """
    if x1.shape != x2.shape:
        raise DimensionMismatch(f"image shapes differ: {x1.shape} vs {x2.shape}")
    inter, union = class_overlaps(x1, x2)
    present = foreground & (union > 0)
    if not present.any():
        raise NoSharedClasses("no non-background class is present in either image")
    denom = int(foreground.sum()) if strict else int(present.sum())
    return _exact_mean(inter[present], union[present], denom)


def foreground_mask(categories: CategoryMap) -> np.ndarray:
    fg = np.zeros(256, dtype=bool)
    for code in categories.codes_with_role("area", "opening", "separator"):
        fg[code] = True
    return fg


def miou(x1: SemanticImage, x2: SemanticImage, categories: CategoryMap, strict: bool = False) -> float:
    """Mean IoU over the non-background classes present in either image."""
    return miou_arrays(x1.labels, x2.labels, foreground_mask(categories), strict=strict)


class CompactLabels:
    """Category codes remapped to 0..K-1 so many pairs can share one bincount."""

    def __init__(self, categories: CategoryMap, strict: bool = False):
        codes = sorted(c.code for c in categories.entries)
        self.lut = np.zeros(256, dtype=np.int64)
        self.lut[codes] = np.arange(len(codes))
        self.k = len(codes)
        fg = foreground_mask(categories)
        self.foreground = fg[codes]
        self.strict = strict

    def encode(self, labels: np.ndarray) -> np.ndarray:
        return self.lut[labels.ravel()]

    def one_to_many(self, x: np.ndarray, others: np.ndarray) -> np.ndarray:
        """mIoU of encoded image ``x`` (flat) against each row of ``others``; NaN where undefined."""
        m = others.shape[0]
        if m == 0:
            return np.zeros(0)
        if others.shape[1] != x.shape[0]:
            raise DimensionMismatch("images in a batch must share dimensions")
        k = self.k
        joint = (np.arange(m)[:, None] * (k * k) + x[None, :] * k + others).ravel()
        conf = np.bincount(joint, minlength=m * k * k).reshape(m, k, k)
        inter = np.diagonal(conf, axis1=1, axis2=2)
        union = conf.sum(axis=2) + conf.sum(axis=1) - inter
        present = (union > 0) & self.foreground[None, :]
        denom = np.full(m, self.foreground.sum()) if self.strict else present.sum(axis=1)
        out = np.full(m, np.nan)
        for r in range(m):
            if present[r].any():
                keep = present[r]
                out[r] = _exact_mean(inter[r][keep], union[r][keep], int(denom[r]))
        return out
