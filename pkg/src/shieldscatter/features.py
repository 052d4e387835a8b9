"""Six amplitude feature series per segment."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from .errors import SegmentTooShort

BLOCK = 50
SMOOTH_WINDOW = 50
MIN_BLOCKS = 58

FEATURE_NAMES = ("original", "smoothed", "envelope", "variance", "maximum", "minimum")


@dataclass(frozen=True)
class FeatureSet:
    original: np.ndarray
    smoothed: np.ndarray
    envelope: np.ndarray
    variance: np.ndarray
    maximum: np.ndarray
    minimum: np.ndarray

    def series(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)

    def to_csv(self) -> str:
        cols = self.series()
        rows = max(c.size for c in cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FEATURE_NAMES)
        for i in range(rows):
            w.writerow([repr(float(c[i])) if i < c.size else "" for c in cols])
        return buf.getvalue()


def extract_features(segment) -> FeatureSet:
    """Features of a :class:`Segment` (or raw complex samples).

    Block statistics use disjoint 50-sample blocks of the amplitude; a
    trailing partial block is dropped.
    """
    x = getattr(segment, "samples", segment)
    x = np.asarray(x)
    required = BLOCK * MIN_BLOCKS
    if x.size < required:
        raise SegmentTooShort(x.size, required)
    amp = np.abs(x).astype(np.float64)
    smoothed = uniform_filter1d(amp, SMOOTH_WINDOW, mode="nearest")
    blocks = amp[: (amp.size // BLOCK) * BLOCK].reshape(-1, BLOCK)
    return FeatureSet(
        original=amp,
        smoothed=smoothed,
        envelope=(blocks**2).mean(axis=1),
        variance=blocks.var(axis=1),
        maximum=blocks.max(axis=1),
        minimum=blocks.min(axis=1),
    )
