"""Locate the backscatter burst inside a received trace.

Two independent estimates of the burst boundaries are fused by taking their
midpoints:

* decoding landmarks (``eta1``, ``eta2``): the smoothed amplitude is scanned
  for on/off edges, and the longest run of edges spaced one tag bit apart
  delimits the burst;
* envelope landmarks (``eta3``, ``eta4``): the sliding-window variance of the
  energy envelope crosses a threshold derived from the weakest tag's contrast.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .channel import Trace
from .errors import ConfigError, DomainError, NoBackscatterDetected

THRESHOLD_FLOOR = 1e-12


@dataclass(frozen=True)
class SegmenterConfig:
    smooth_window: int = 50
    energy_window: int = 50
    variance_window: Optional[int] = None
    threshold_mode: str = "auto_e_squared"
    fixed_threshold: float = 0.0
    # expected burst structure; must match the transmitting scene
    tag_count: int = 3
    tag_bitrate: float = 1.0e4
    # edge detector gate, in standard deviations of the smoothed-difference noise
    edge_sigma: float = 5.0
    # weakest-tag contrast is scaled by this before squaring into a threshold
    contrast_fraction: float = 0.2

    def __post_init__(self):
        if self.variance_window is None:
            object.__setattr__(self, "variance_window", self.energy_window)
        if min(self.smooth_window, self.energy_window, self.variance_window) < 2:
            raise ConfigError("all windows must be >= 2")
        if self.variance_window != self.energy_window:
            raise ConfigError("variance_window must equal energy_window")
        if self.threshold_mode not in ("auto_e_squared", "fixed"):
            raise ConfigError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.threshold_mode == "fixed" and self.fixed_threshold < 0:
            raise ConfigError("fixed_threshold must be >= 0")
        if self.tag_count < 1:
            raise ConfigError("tag_count must be >= 1")

    def bit_period(self, sample_rate: float) -> float:
        return sample_rate / self.tag_bitrate


@dataclass(frozen=True)
class Decoded:
    eta1: int
    eta2: int
    bits: np.ndarray
    per_tag_energy: np.ndarray
    # |mean on-bit energy - mean off-bit energy| for each tag slot
    tag_contrast: np.ndarray
    edges: np.ndarray


@dataclass(frozen=True)
class Segment:
    eta1: int
    eta2: int
    eta3: int
    eta4: int
    eta_s: int
    eta_e: int
    samples: np.ndarray
    per_tag_energy: np.ndarray
    threshold: float = 0.0

    def __len__(self) -> int:
        return self.samples.size

    def to_dict(self) -> dict:
        return {
            "eta1": self.eta1,
            "eta2": self.eta2,
            "eta3": self.eta3,
            "eta4": self.eta4,
            "eta_s": self.eta_s,
            "eta_e": self.eta_e,
            "per_tag_energy": [float(e) for e in self.per_tag_energy],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _samples(trace) -> np.ndarray:
    if isinstance(trace, Trace):
        return trace.samples
    return np.asarray(trace)


def _longest_periodic_run(edges: np.ndarray, period: float) -> tuple[int, int]:
    """Index range [i, j] of the longest run of edges spaced one period apart."""
    gaps = np.diff(edges)
    ok = (gaps >= 0.5 * period) & (gaps <= 1.5 * period)
    best = (0, 0)
    start = 0
    for k, good in enumerate(ok):
        if not good:
            start = k + 1
            continue
        if k + 1 - start > best[1] - best[0]:
            best = (start, k + 1)
    return best


def decode_landmarks(trace: Trace, cfg: SegmenterConfig) -> Decoded:
    """Find the burst from tag on/off edges in the smoothed amplitude."""
    x = _samples(trace)
    w = cfg.smooth_window
    if x.size <= 4 * w:
        raise DomainError(f"trace of {x.size} samples is too short for window {w}")
    period = cfg.bit_period(trace.sample_rate)

    amp = np.abs(x)
    smooth = uniform_filter1d(amp, w, mode="nearest")
    h = w // 2
    step = np.zeros_like(smooth)
    step[h : amp.size - h] = smooth[2 * h :] - smooth[: amp.size - 2 * h]

    # robust per-sample noise of |x|; edges are too sparse to bias the MAD
    sigma_amp = 1.4826 * np.median(np.abs(np.diff(amp) - np.median(np.diff(amp)))) / np.sqrt(2)
    sigma_step = sigma_amp * np.sqrt(2.0 / w)
    gate = max(cfg.edge_sigma * sigma_step, 1e-6 * float(np.median(amp)), 1e-300)

    peaks, _ = find_peaks(np.abs(step), height=gate, distance=max(1, int(0.5 * period)))
    if peaks.size < 3:
        raise NoBackscatterDetected("fewer than three amplitude edges found")
    i, j = _longest_periodic_run(peaks, period)
    if j - i < 2:
        raise NoBackscatterDetected("no run of at least two tag bits")
    edges = peaks[i : j + 1]
    eta1, eta2 = int(edges[0]), int(edges[-1])

    outside = np.ones(amp.size, dtype=bool)
    outside[max(0, eta1 - w) : eta2 + w] = False
    baseline = np.median(smooth[outside]) if outside.any() else np.median(smooth)

    # level of each inter-edge interval, measured on its middle half
    quarter = np.maximum((np.diff(edges) // 4).astype(int), 1)
    levels = np.array(
        [smooth[a + q : b - q].mean() for a, b, q in zip(edges[:-1], edges[1:], quarter)]
    )
    dev = np.abs(levels - baseline)
    neighbour = np.maximum(np.r_[dev[1:], 0.0], np.r_[0.0, dev[:-1]])
    bits = (dev > 0.5 * np.maximum(dev, neighbour)).astype(np.int8)

    power = np.abs(x) ** 2
    interval_energy = np.array([power[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    mids = (edges[:-1] + edges[1:]) / 2.0
    n = cfg.tag_count
    span = (eta2 - eta1 + period) / n
    per_tag = np.empty(n)
    contrast = np.zeros(n)
    for k in range(n):
        lo = eta1 + int(round(k * span))
        hi = min(eta1 + int(round((k + 1) * span)), eta2)
        per_tag[k] = power[lo:hi].mean() if hi > lo else 0.0
        sel = (mids >= lo) & (mids < hi)
        on = interval_energy[sel & (bits == 1)]
        off = interval_energy[sel & (bits == 0)]
        if on.size and off.size:
            contrast[k] = abs(on.mean() - off.mean())
    return Decoded(eta1, eta2, bits, per_tag, contrast, edges)


def energy_envelope(trace, N: int) -> np.ndarray:
    """Sliding mean of |x|^2 over N samples; ``len - N + 1`` values."""
    x = _samples(trace)
    if N < 1:
        raise DomainError("window must be >= 1")
    if x.size < N:
        raise DomainError(f"trace of {x.size} samples is shorter than window {N}")
    c = np.concatenate(([0.0], np.cumsum(np.abs(x) ** 2)))
    return (c[N:] - c[:-N]) / N


def variance_landmarks(envelope: Sequence[float], N: int, t: float) -> tuple[int, int]:
    """Outermost crossings of the sliding envelope variance over ``t``.

    Returned indices are in trace coordinates: a variance window starting at
    envelope index ``j`` spans trace samples ``[j, j + 2N - 1)`` and is
    reported at its centre ``j + N``.
    """
    env = np.asarray(envelope, dtype=np.float64)
    if env.size <= 2 * N:
        raise DomainError(f"envelope of {env.size} values too short for window {N}")
    v = sliding_window_view(env, N).var(axis=1)
    above = v > t
    rising = np.flatnonzero(~above[:-1] & above[1:])
    falling = np.flatnonzero(above[:-1] & ~above[1:])
    if rising.size == 0 or falling.size == 0:
        raise NoBackscatterDetected("envelope variance never crosses the threshold")
    eta3, eta4 = int(rising[0]) + N, int(falling[-1]) + N
    if eta3 > eta4:
        raise NoBackscatterDetected("envelope variance crossings are inverted")
    return eta3, eta4


def auto_threshold(per_tag_energy: Sequence[float], fraction: float = 1.0) -> float:
    """Square of the smallest tag energy (optionally scaled first)."""
    e = np.asarray(per_tag_energy, dtype=np.float64)
    if e.size == 0:
        raise DomainError("per_tag_energy is empty")
    if np.any(e < 0):
        raise DomainError("tag energies must be non-negative")
    return float((fraction * e.min()) ** 2)


def fuse_landmarks(eta1: int, eta2: int, eta3: int, eta4: int) -> tuple[int, int]:
    """Burst start and end as the floor-midpoints of the decoder and variance landmarks."""
    return (eta1 + eta3) // 2, (eta2 + eta4) // 2


def segment(trace: Trace, cfg: Optional[SegmenterConfig] = None) -> Segment:
    cfg = cfg or SegmenterConfig()
    dec = decode_landmarks(trace, cfg)
    env = energy_envelope(trace, cfg.energy_window)
    if cfg.threshold_mode == "fixed":
        t = cfg.fixed_threshold
    else:
        t = auto_threshold(dec.tag_contrast, cfg.contrast_fraction)
    if t <= 0:
        t = THRESHOLD_FLOOR
    eta3, eta4 = variance_landmarks(env, cfg.energy_window, t)
    eta_s, eta_e = fuse_landmarks(dec.eta1, dec.eta2, eta3, eta4)
    if not eta_s < eta_e:
        raise NoBackscatterDetected(f"fused segment is empty ({eta_s}, {eta_e})")
    x = _samples(trace)
    return Segment(
        dec.eta1,
        dec.eta2,
        eta3,
        eta4,
        eta_s,
        eta_e,
        x[eta_s:eta_e].copy(),
        dec.per_tag_energy,
        t,
    )
