"""End-to-end attack scenarios and batch metrics.

Each scenario synthesises the messages the AP receives during one
challenge-response exchange, runs the detection pipeline on the reference
and suspect messages, and turns the one-class SVM score into a verdict.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .channel import (
    SceneConfig,
    Source,
    TagSchedule,
    Trace,
    make_tag_schedule,
    synthesize_trace,
)
from .errors import ConfigError, NoBackscatterDetected, ScenarioError, SegmentTooShort
from .features import FeatureSet, extract_features
from .ocsvm import LEGITIMATE, OcsvmModel, decide
from .profile import ATTACK, ProfileVector, build_profile
from .profile import LEGITIMATE as LEGIT_LABEL
from .segmenter import SegmenterConfig, segment


class Scenario(str, Enum):
    BENIGN = "benign"
    DEAUTH_INJECTION = "deauth_injection"
    JAM_AND_REPLAY = "jam_and_replay"
    SPOOF_EMULATION = "spoof_emulation"

    @property
    def is_attack(self) -> bool:
        return self is not Scenario.BENIGN


class Role(str, Enum):
    USER_MSG = "user_msg"
    ACK = "ack"
    DEAUTH = "deauth"
    REPLAYED_MSG = "replayed_msg"
    SUSPECT_MSG = "suspect_msg"


@dataclass(frozen=True)
class Message:
    role: Role
    trace: Optional[Trace]


@dataclass(frozen=True)
class Transcript:
    messages: tuple[Message, ...]
    tag_order: tuple[int, ...]

    @property
    def duration(self) -> float:
        return sum(m.trace.duration for m in self.messages if m.trace is not None)


@dataclass(frozen=True)
class Verdict:
    decision: str
    score: float
    compared_pair: tuple[int, int]

    @property
    def accepted(self) -> bool:
        return self.decision == "accept"


@dataclass(frozen=True)
class ScenarioConfig:
    scene: SceneConfig
    scenario: Scenario
    model_ref: Optional[OcsvmModel]
    seed: int
    coherence_budget: float = 0.1
    per_tag_duration: int = 10_000
    guard_gap: int = 5_000
    normalize: bool = False
    # grouping label for sweep reports, e.g. ("distance", 0.5)
    sweep: Optional[tuple[str, float]] = None
    # pin the session's tag permutation instead of drawing it from the seed
    tag_order: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.tag_order is not None:
            object.__setattr__(self, "tag_order", tuple(int(k) for k in self.tag_order))
        if self.coherence_budget <= 0:
            raise ConfigError("coherence_budget must be positive")


def segmenter_for(scene: SceneConfig) -> SegmenterConfig:
    return SegmenterConfig(tag_count=scene.tag_count, tag_bitrate=scene.tag_bitrate)


def trace_features(trace: Trace, seg_cfg: SegmenterConfig) -> FeatureSet:
    return extract_features(segment(trace, seg_cfg))


def profile_pair(
    reference: Trace,
    suspect: Trace,
    seg_cfg: SegmenterConfig,
    label: Optional[int] = None,
    normalize: bool = False,
) -> ProfileVector:
    """Run segmentation, feature extraction and chunked DTW on two messages."""
    return build_profile(
        trace_features(reference, seg_cfg),
        trace_features(suspect, seg_cfg),
        label=label,
        normalize=normalize,
    )


def place_attacker(scene: SceneConfig, distance: float, bearing: float) -> SceneConfig:
    """Copy of ``scene`` with the attacker ``distance`` m from the user."""
    ux, uy = scene.user_position
    pos = (ux + distance * math.cos(bearing), uy + distance * math.sin(bearing))
    return replace(scene, attacker_position=pos)


def emulated_trace(
    scene: SceneConfig, schedule: TagSchedule, guessed_order: Sequence[int], seed: int
) -> Trace:
    """A spoofer replaying the user's per-tag signature in a guessed tag order."""
    guess = replace(schedule, order=tuple(guessed_order))
    t = synthesize_trace(scene, guess, Source.USER, seed)
    truth = replace(t.truth, source=Source.ATTACKER)
    return Trace(t.samples, t.sample_rate, truth)


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32)]


def build_transcript(cfg: ScenarioConfig) -> tuple[Transcript, tuple[int, int]]:
    """Synthesise the received messages and pick the (reference, suspect) pair."""
    scene = cfg.scene
    s_sched, s_ref, s_sus = _seeds(cfg.seed, 3)
    schedule = make_tag_schedule(scene.tag_count, s_sched, cfg.per_tag_duration, cfg.guard_gap)
    if cfg.tag_order is not None:
        schedule = replace(schedule, order=cfg.tag_order)
    ack = Message(Role.ACK, None)

    if cfg.scenario is Scenario.BENIGN:
        ref = synthesize_trace(scene, schedule, Source.USER, s_ref)
        sus = synthesize_trace(scene, schedule, Source.USER, s_sus)
        msgs, pair = (Message(Role.USER_MSG, ref), ack, Message(Role.SUSPECT_MSG, sus)), (0, 2)
    elif cfg.scenario is Scenario.DEAUTH_INJECTION:
        sus = synthesize_trace(scene, schedule, Source.ATTACKER, s_sus)
        ref = synthesize_trace(scene, schedule, Source.USER, s_ref)
        msgs, pair = (ack, Message(Role.DEAUTH, sus), Message(Role.USER_MSG, ref)), (2, 1)
    elif cfg.scenario is Scenario.JAM_AND_REPLAY:
        # the AP hears the user's message under the attacker's jamming
        ref = synthesize_trace(scene, schedule, Source.SUPERPOSED, s_ref)
        sus = synthesize_trace(scene, schedule, Source.ATTACKER, s_sus)
        msgs, pair = (ack, Message(Role.USER_MSG, ref), Message(Role.REPLAYED_MSG, sus)), (1, 2)
    else:
        ref = synthesize_trace(scene, schedule, Source.USER, s_ref)
        canonical = tuple(range(scene.tag_count))
        sus = emulated_trace(scene, schedule, canonical, s_sus)
        msgs, pair = (Message(Role.USER_MSG, ref), ack, Message(Role.SUSPECT_MSG, sus)), (0, 2)

    transcript = Transcript(msgs, schedule.order)
    if transcript.duration > cfg.coherence_budget + 1e-12:
        raise ConfigError(
            f"exchange lasts {transcript.duration * 1e3:.1f} ms, "
            f"budget is {cfg.coherence_budget * 1e3:.1f} ms"
        )
    return transcript, pair


def scenario_profile(
    cfg: ScenarioConfig, transcript: Optional[Transcript] = None, pair=None
) -> ProfileVector:
    """Propagation profile of the compared pair; raises :class:`ScenarioError`."""
    if transcript is None:
        transcript, pair = build_transcript(cfg)
    i, j = pair
    label = ATTACK if cfg.scenario.is_attack else LEGIT_LABEL
    try:
        return profile_pair(
            transcript.messages[i].trace,
            transcript.messages[j].trace,
            segmenter_for(cfg.scene),
            label=label,
            normalize=cfg.normalize,
        )
    except (NoBackscatterDetected, SegmentTooShort) as exc:
        raise ScenarioError(f"{cfg.scenario.value} seed {cfg.seed}: {exc}") from exc


def run_scenario(cfg: ScenarioConfig) -> tuple[Transcript, Verdict]:
    if cfg.model_ref is None:
        raise ConfigError("run_scenario needs a trained model")
    transcript, (i, j) = build_transcript(cfg)
    profile = scenario_profile(cfg, transcript, (i, j))
    score, label = decide(cfg.model_ref, profile)
    decision = "accept" if label == LEGITIMATE else "reject"
    return transcript, Verdict(decision, score, (i, j))


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricsRow:
    scenario: str
    sweep_key: str
    sweep_value: object
    trials: int = 0
    accepted: int = 0
    failures: int = 0

    @property
    def accept_rate(self) -> Optional[float]:
        return self.accepted / self.trials if self.trials else None

    @property
    def tp_rate(self) -> Optional[float]:
        return self.accept_rate if self.scenario == Scenario.BENIGN.value else None

    @property
    def fp_rate(self) -> Optional[float]:
        return None if self.scenario == Scenario.BENIGN.value else self.accept_rate


@dataclass
class MetricsReport:
    rows: list[MetricsRow] = field(default_factory=list)

    def _totals(self, benign: bool) -> tuple[int, int]:
        sel = [r for r in self.rows if (r.scenario == Scenario.BENIGN.value) == benign]
        return sum(r.trials for r in sel), sum(r.accepted for r in sel)

    @property
    def tp_rate(self) -> Optional[float]:
        n, a = self._totals(True)
        return a / n if n else None

    @property
    def fp_rate(self) -> Optional[float]:
        n, a = self._totals(False)
        return a / n if n else None

    @property
    def failures(self) -> int:
        return sum(r.failures for r in self.rows)

    def to_records(self) -> list[dict]:
        return [
            {
                "scenario": r.scenario,
                "sweep_key": r.sweep_key,
                "sweep_value": r.sweep_value,
                "trials": r.trials,
                "tp_rate": r.tp_rate,
                "fp_rate": r.fp_rate,
                "failures": r.failures,
            }
            for r in self.rows
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["scenario", "sweep_key", "sweep_value", "trials", "tp_rate", "fp_rate", "failures"]
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        for rec in self.to_records():
            w.writerow({k: ("" if v is None else v) for k, v in rec.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"tp_rate": self.tp_rate, "fp_rate": self.fp_rate, "rows": self.to_records()},
            sort_keys=True,
        )


def worker_count(default: Optional[int] = None) -> int:
    cap = os.environ.get("SHIELDSCATTER_THREADS")
    n = default or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"SHIELDSCATTER_THREADS={cap!r} is not an integer") from None
    return n


def _outcome(cfg: ScenarioConfig) -> Optional[bool]:
    try:
        return run_scenario(cfg)[1].accepted
    except ScenarioError:
        return None


def map_ordered(fn, items: Sequence, workers: Optional[int] = None) -> list:
    """``list(map(fn, items))`` fanned out over a thread pool, order preserved."""
    workers = worker_count(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def evaluate_batch(
    scenarios: Sequence[ScenarioConfig], workers: Optional[int] = None
) -> MetricsReport:
    """Tally verdicts; a failed scenario counts as a rejection and a failure."""
    if not scenarios:
        raise ConfigError("empty scenario batch")
    return tally((cfg, ok) for cfg, ok in zip(scenarios, map_ordered(_outcome, scenarios, workers)))


def tally(outcomes: Iterable[tuple[ScenarioConfig, Optional[bool]]]) -> MetricsReport:
    groups: dict[tuple, MetricsRow] = {}
    for cfg, accepted in outcomes:
        key, value = cfg.sweep if cfg.sweep is not None else ("", "")
        k = (cfg.scenario.value, key, value)
        row = groups.setdefault(k, MetricsRow(*k))
        row.trials += 1
        row.accepted += bool(accepted)
        row.failures += accepted is None
    return MetricsReport(list(groups.values()))
