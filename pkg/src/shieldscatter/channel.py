"""Synthetic complex-baseband traces for a backscatter-assisted AP.

A single transmitter (the legitimate user, an attacker, or both at once)
sends a continuous carrier. The AP receives the direct path plus, while a
tag is in its slot and its current bit is 1, one reflected path
source -> tag -> AP. Tags take turns in the order given by a
:class:`TagSchedule`.

Amplitudes are normalised so a source 1 m from the AP has unit direct-path
amplitude; a reflected path carries ``tag_gain * lambda / (4 pi)`` over the
product of its two hop lengths, which keeps the reflected/direct ratio
identical to the Friis free-space model.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 2.998e8

TRACE_MAGIC = 0x53484C44
TRACE_VERSION = 1
_HEADER = struct.Struct("<IIdQ")


class Source(str, Enum):
    USER = "user"
    ATTACKER = "attacker"
    SUPERPOSED = "superposed"


def coherence_time(carrier_frequency: float, max_velocity: float) -> float:
    """Channel coherence time ``9 lambda / (16 pi v)`` in seconds."""
    if carrier_frequency <= 0 or max_velocity <= 0:
        raise DomainError("carrier_frequency and max_velocity must be positive")
    wavelength = SPEED_OF_LIGHT / carrier_frequency
    return 9.0 * wavelength / (16.0 * math.pi * max_velocity)


def default_tag_positions(
    tag_count: int,
    ap_position: Sequence[float] = (0.0, 0.0),
    radius: float = 0.15,
    step_deg: float = 45.0,
) -> tuple[tuple[float, float], ...]:
    """Tags on a ring around the AP, ``step_deg`` apart, starting on +y."""
    ax, ay = ap_position
    out = []
    for k in range(tag_count):
        a = math.radians(step_deg * k)
        out.append((ax + radius * math.sin(a), ay + radius * math.cos(a)))
    return tuple(out)


def _point(p) -> tuple[float, float]:
    x, y = p
    return (float(x), float(y))


@dataclass(frozen=True)
class SceneConfig:
    carrier_frequency: float = 9.0e8
    sample_rate: float = 1.0e6
    tag_count: int = 3
    tag_positions: Optional[tuple[tuple[float, float], ...]] = None
    ap_position: tuple[float, float] = (0.0, 0.0)
    user_position: tuple[float, float] = (0.0, 2.5)
    attacker_position: tuple[float, float] = (0.5, 2.5)
    tag_bitrate: float = 1.0e4
    snr_db: float = 20.0
    dynamic_fading_std: float = 0.0
    direct_path_attenuation: float = 1.0
    # reflection coefficient times tag antenna gains
    tag_gain: float = 2.0
    # baseband carrier offset as a fraction of the sample rate
    carrier_offset: float = 0.01

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "ap_position", _point(self.ap_position))
        set_(self, "user_position", _point(self.user_position))
        set_(self, "attacker_position", _point(self.attacker_position))
        if self.tag_count < 1:
            raise ConfigError("tag_count must be >= 1")
        if self.tag_positions is None:
            set_(self, "tag_positions", default_tag_positions(self.tag_count, self.ap_position))
        else:
            set_(self, "tag_positions", tuple(_point(p) for p in self.tag_positions))
        if len(self.tag_positions) != self.tag_count:
            raise ConfigError(
                f"tag_count={self.tag_count} but {len(self.tag_positions)} tag positions given"
            )
        pts = [self.ap_position, self.user_position, self.attacker_position, *self.tag_positions]
        if len(set(pts)) != len(pts):
            raise ConfigError("AP, user, attacker and tag positions must be pairwise distinct")
        if self.carrier_frequency <= 0 or self.sample_rate <= 0 or self.tag_bitrate <= 0:
            raise ConfigError("frequencies and rates must be positive")
        if self.sample_rate < 10 * self.tag_bitrate:
            raise ConfigError("sample_rate must be at least 10x tag_bitrate")
        if not 0.0 <= self.direct_path_attenuation <= 1.0:
            raise ConfigError("direct_path_attenuation must lie in [0, 1]")
        if self.dynamic_fading_std < 0:
            raise ConfigError("dynamic_fading_std must be >= 0")
        if self.tag_gain <= 0:
            raise ConfigError("tag_gain must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def bit_period(self) -> float:
        """Tag bit duration in samples."""
        return self.sample_rate / self.tag_bitrate

    def with_tags(self, tag_count: int) -> "SceneConfig":
        """Copy with ``tag_count`` tags on the default ring."""
        return replace(
            self,
            tag_count=tag_count,
            tag_positions=default_tag_positions(tag_count, self.ap_position),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tag_positions"] = [list(p) for p in self.tag_positions]
        for k in ("ap_position", "user_position", "attacker_position"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scene keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("tag_positions") is not None:
            d["tag_positions"] = tuple(tuple(p) for p in d["tag_positions"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class TagSchedule:
    order: tuple[int, ...]
    per_tag_duration: int = 10_000
    guard_gap: int = 5_000

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(k) for k in self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ConfigError(f"order {self.order} is not a permutation")
        if self.guard_gap < 0:
            raise ConfigError("guard_gap must be >= 0")

    @property
    def total_length(self) -> int:
        return 2 * self.guard_gap + len(self.order) * self.per_tag_duration

    def validate_for(self, scene: SceneConfig) -> None:
        if len(self.order) != scene.tag_count:
            raise ConfigError(
                f"schedule covers {len(self.order)} tags, scene has {scene.tag_count}"
            )
        if self.per_tag_duration < 2 * scene.bit_period:
            raise ConfigError("per_tag_duration must span at least two tag bits")


def make_tag_schedule(
    tag_count: int, seed: int, per_tag_duration: int = 10_000, guard_gap: int = 5_000
) -> TagSchedule:
    """Uniformly random tag activation order, deterministic in ``seed``."""
    if tag_count < 1:
        raise DomainError("tag_count must be >= 1")
    rng = np.random.default_rng(seed)
    order = tuple(int(k) for k in rng.permutation(tag_count))
    return TagSchedule(order, per_tag_duration, guard_gap)


@dataclass(frozen=True)
class GroundTruth:
    backscatter_start: int
    backscatter_end: int
    source: Source
    tag_order: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "backscatter_start": self.backscatter_start,
            "backscatter_end": self.backscatter_end,
            "source": self.source.value,
            "tag_order": list(self.tag_order),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            int(d["backscatter_start"]),
            int(d["backscatter_end"]),
            Source(d["source"]),
            tuple(int(k) for k in d["tag_order"]),
        )


@dataclass(frozen=True)
class Trace:
    samples: np.ndarray
    sample_rate: float
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1 or s.size == 0:
            raise DomainError("trace must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(s)):
            raise DomainError("trace contains non-finite samples")
        object.__setattr__(self, "samples", s)
        if self.truth is not None:
            t = self.truth
            if not 0 <= t.backscatter_start < t.backscatter_end <= s.size:
                raise DomainError("ground-truth interval outside the trace")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


# ---------------------------------------------------------------------------
# channel model


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def channel_gains(scene: SceneConfig, position) -> tuple[complex, np.ndarray]:
    """Complex direct-path gain and per-tag reflected-path gains for a source."""
    lam = scene.wavelength
    k = 2.0 * math.pi / lam
    d = _dist(position, scene.ap_position)
    direct = scene.direct_path_attenuation / d * np.exp(-1j * k * d)
    refl = np.empty(scene.tag_count, dtype=np.complex128)
    scale = scene.tag_gain * lam / (4.0 * math.pi)
    for i, tag in enumerate(scene.tag_positions):
        d1 = _dist(position, tag)
        d2 = _dist(tag, scene.ap_position)
        refl[i] = scale / (d1 * d2) * np.exp(-1j * k * (d1 + d2))
    return complex(direct), refl


def tag_levels(scene: SceneConfig, position) -> tuple[float, np.ndarray]:
    """Noise-free received amplitude with every tag off, and with tag k on."""
    direct, refl = channel_gains(scene, position)
    return abs(direct), np.abs(direct + refl)


def tag_activity(scene: SceneConfig, schedule: TagSchedule, length: int) -> np.ndarray:
    """Index of the reflecting tag at each sample, -1 where none reflects.

    Each tag sends the alternating pattern 1010... starting at its slot.
    """
    active = np.full(length, -1, dtype=np.int64)
    bit = scene.bit_period
    n = np.arange(schedule.per_tag_duration)
    on = (np.floor(n / bit).astype(np.int64) % 2) == 0
    for slot, tag in enumerate(schedule.order):
        start = schedule.guard_gap + slot * schedule.per_tag_duration
        window = active[start : start + schedule.per_tag_duration]
        window[on[: window.size]] = tag
    return active


def _component(scene, position, active, phase0) -> np.ndarray:
    direct, refl = channel_gains(scene, position)
    n = np.arange(active.size)
    carrier = np.exp(1j * (2.0 * math.pi * scene.carrier_offset * n + phase0))
    gain = np.full(active.size, direct, dtype=np.complex128)
    on = active >= 0
    gain[on] += refl[active[on]]
    return carrier * gain


def noise_power(scene: SceneConfig) -> float:
    """AWGN power; SNR is referenced to the user's unobstructed direct path."""
    if math.isinf(scene.snr_db) and scene.snr_db > 0:
        return 0.0
    d = _dist(scene.user_position, scene.ap_position)
    return (1.0 / d) ** 2 / 10.0 ** (scene.snr_db / 10.0)


def synthesize_trace(
    scene: SceneConfig,
    schedule: TagSchedule,
    source: Source | str,
    seed: int,
    length: Optional[int] = None,
) -> Trace:
    """Generate one received message.

    The seed is split into independent streams for the user carrier phase,
    the attacker carrier phase, AWGN and fading, so a superposed trace is the
    exact sum of the user and attacker traces when noise and fading are off.
    """
    source = Source(source)
    schedule.validate_for(scene)
    total = schedule.total_length
    if length is None:
        length = total
    if total > length:
        raise ConfigError(f"schedule needs {total} samples, trace length is {length}")

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    user_phase = streams[0].uniform(0.0, 2.0 * math.pi)
    attacker_phase = streams[1].uniform(0.0, 2.0 * math.pi)

    active = tag_activity(scene, schedule, length)
    if source is Source.USER:
        x = _component(scene, scene.user_position, active, user_phase)
    elif source is Source.ATTACKER:
        x = _component(scene, scene.attacker_position, active, attacker_phase)
    else:
        x = _component(scene, scene.user_position, active, user_phase) + _component(
            scene, scene.attacker_position, active, attacker_phase
        )

    if scene.dynamic_fading_std > 0:
        x = x * (1.0 + scene.dynamic_fading_std * streams[3].standard_normal(length))
    p = noise_power(scene)
    if p > 0:
        w = streams[2].standard_normal((length, 2)) @ np.array([1.0, 1.0j])
        x = x + math.sqrt(p / 2.0) * w

    on = np.flatnonzero(active >= 0)
    truth = GroundTruth(int(on[0]), int(on[-1]) + 1, source, schedule.order)
    return Trace(x, scene.sample_rate, truth)


# ---------------------------------------------------------------------------
# serialisation


def write_trace(trace: Trace, path: str | Path) -> None:
    """Binary trace file plus a ``.json`` ground-truth sidecar when present."""
    path = Path(path)
    iq = np.empty((len(trace), 2), dtype="<f4")
    iq[:, 0] = trace.samples.real
    iq[:, 1] = trace.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TRACE_MAGIC, TRACE_VERSION, float(trace.sample_rate), len(trace)))
        fh.write(iq.tobytes())
    if trace.truth is not None:
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(trace.truth.to_dict(), sort_keys=True) + "\n"
        )


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, rate, count = _HEADER.unpack_from(raw)
    if magic != TRACE_MAGIC:
        raise ConfigError(f"{path}: bad magic {magic:#x}")
    if version != TRACE_VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    iq = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if iq.size != 2 * count:
        raise ConfigError(f"{path}: expected {count} samples, found {iq.size // 2}")
    iq = iq.reshape(count, 2).astype(np.float64)
    truth = None
    sidecar = path.with_suffix(path.suffix + ".json")
    if sidecar.exists():
        truth = GroundTruth.from_dict(json.loads(sidecar.read_text()))
    return Trace(iq[:, 0] + 1j * iq[:, 1], rate, truth)


__all__ = [
    "SPEED_OF_LIGHT",
    "Source",
    "SceneConfig",
    "TagSchedule",
    "GroundTruth",
    "Trace",
    "coherence_time",
    "default_tag_positions",
    "make_tag_schedule",
    "channel_gains",
    "tag_levels",
    "tag_activity",
    "noise_power",
    "synthesize_trace",
    "write_trace",
    "read_trace",
]
