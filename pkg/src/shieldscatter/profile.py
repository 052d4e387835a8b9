"""Chunked DTW comparison of two feature sets.

The propagation profile concatenates per-chunk DTW distances in a fixed
layout::

    original:128 | smoothed:128 | envelope:58 | variance:58 | maximum:58 | minimum:58

for 488 values in total.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numba
import numpy as np

from .errors import DomainError, SegmentTooShort
from .features import FEATURE_NAMES, FeatureSet

CHUNKS = {
    "original": 128,
    "smoothed": 128,
    "envelope": 58,
    "variance": 58,
    "maximum": 58,
    "minimum": 58,
}
PROFILE_SIZE = sum(CHUNKS.values())

LAYOUT: dict[str, slice] = {}
_offset = 0
for _name in FEATURE_NAMES:
    LAYOUT[_name] = slice(_offset, _offset + CHUNKS[_name])
    _offset += CHUNKS[_name]
del _offset, _name

LEGITIMATE = 1
ATTACK = -1


@numba.njit(cache=True, nogil=True)
def _dtw(x, y):
    m, n = x.size, y.size
    prev = np.empty(n)
    cur = np.empty(n)
    acc = 0.0
    for j in range(n):
        acc += abs(x[0] - y[j])
        prev[j] = acc
    for i in range(1, m):
        cur[0] = prev[0] + abs(x[i] - y[0])
        for j in range(1, n):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = best + abs(x[i] - y[j])
        prev, cur = cur, prev
    return prev[n - 1]


@numba.njit(cache=True, nogil=True)
def _chunked_dtw(x, y, chunks, out):
    lx, ly = x.size, y.size
    for k in range(chunks):
        xa, xb = (k * lx) // chunks, ((k + 1) * lx) // chunks
        ya, yb = (k * ly) // chunks, ((k + 1) * ly) // chunks
        out[k] = _dtw(x[xa:xb], y[ya:yb])


def _as_series(s) -> np.ndarray:
    a = np.ascontiguousarray(s, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise DomainError("DTW needs non-empty 1-D series")
    if not np.all(np.isfinite(a)):
        raise DomainError("DTW series must be finite")
    return a


def dtw_distance(x: Sequence[float], y: Sequence[float]) -> float:
    """Minimum cumulative |x_i - y_j| over monotone warping paths.

    Steps are (i+1, j), (i, j+1) and (i+1, j+1); the path starts at the first
    pair and ends at the last.
    """
    return float(_dtw(_as_series(x), _as_series(y)))


def chunk_series(series: Sequence[float], chunk_count: int) -> list[np.ndarray]:
    """Split into ``chunk_count`` contiguous pieces at ``floor(k L / C)``."""
    a = np.asarray(series)
    if chunk_count < 1:
        raise DomainError("chunk_count must be >= 1")
    if a.size < chunk_count:
        raise DomainError(f"series of length {a.size} cannot form {chunk_count} chunks")
    L = a.size
    return [a[(k * L) // chunk_count : ((k + 1) * L) // chunk_count] for k in range(chunk_count)]


def chunked_dtw(x: Sequence[float], y: Sequence[float], chunk_count: int) -> np.ndarray:
    """DTW between corresponding chunks of two series."""
    x, y = _as_series(x), _as_series(y)
    if min(x.size, y.size) < chunk_count:
        raise SegmentTooShort(min(x.size, y.size), chunk_count, "feature series")
    out = np.empty(chunk_count)
    _chunked_dtw(x, y, chunk_count, out)
    return out


def _zscore(a: np.ndarray) -> np.ndarray:
    sd = a.std()
    return (a - a.mean()) / sd if sd > 0 else a - a.mean()


@dataclass
class ProfileVector:
    values: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (PROFILE_SIZE,):
            raise DomainError(f"profile must have {PROFILE_SIZE} entries")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DomainError("profile entries must be finite and non-negative")
        if self.label not in (None, LEGITIMATE, ATTACK):
            raise DomainError(f"bad label {self.label!r}")

    def part(self, feature: str) -> np.ndarray:
        return self.values[LAYOUT[feature]]


def build_profile(
    a: FeatureSet, b: FeatureSet, label: Optional[int] = None, normalize: bool = False
) -> ProfileVector:
    """Compare two feature sets chunk by chunk; see module docstring for layout."""
    values = np.empty(PROFILE_SIZE)
    for name in FEATURE_NAMES:
        x, y = getattr(a, name), getattr(b, name)
        if normalize:
            x, y = _zscore(np.asarray(x, float)), _zscore(np.asarray(y, float))
        values[LAYOUT[name]] = chunked_dtw(x, y, CHUNKS[name])
    return ProfileVector(values, label)


# ---------------------------------------------------------------------------
# dataset files

HEADER = [f"f{i}" for i in range(PROFILE_SIZE)] + ["label"]


def _label_text(label) -> str:
    return "unlabeled" if label is None else str(int(label))


def write_profiles(path: str | Path, profiles: Iterable[ProfileVector]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for p in profiles:
            w.writerow([repr(float(v)) for v in p.values] + [_label_text(p.label)])


def read_profiles(path: str | Path) -> list[ProfileVector]:
    """Parse a profile CSV; raises :class:`DomainError` on malformed content."""
    out = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        if header != HEADER:
            raise DomainError(f"{path}: unexpected header")
        for lineno, row in enumerate(r, start=2):
            if len(row) != PROFILE_SIZE + 1:
                raise DomainError(f"{path}:{lineno}: expected {PROFILE_SIZE + 1} fields")
            try:
                values = np.array([float(v) for v in row[:-1]])
                label = None if row[-1] in ("", "unlabeled") else int(row[-1])
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
            out.append(ProfileVector(values, label))
    return out
