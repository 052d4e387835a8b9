"""Seeded train/test experiments and parameter sweeps on synthetic data.

Every profile is a pure function of ``(experiment seed, stream, index)`` and
the scene, so sweeps are reproducible and profiles shared between grid
points (for example all points of a nu sweep) are computed once.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .channel import SceneConfig
from .errors import ConfigError, ScenarioError
from .guard import Scenario, ScenarioConfig, map_ordered, place_attacker, scenario_profile
from .ocsvm import OcsvmConfig, OcsvmModel, decision_function, train
from .profile import ProfileVector

TRAIN, TEST_BENIGN, TEST_ATTACK, NEGATIVES = range(4)

SWEEP_PARAMS = ("nu", "distance", "tags", "train_size", "ratio", "snr")

DEFAULT_NU_GRID = (0.01, 0.02, 0.05, 0.1, 0.16, 0.2, 0.3, 0.5)


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    nu: float = 0.16
    sigma: Union[float, str] = "auto"
    train_size: int = 300
    trials: int = 100
    attacker_distance: float = 0.5
    attack: Scenario = Scenario.DEAUTH_INJECTION
    # negatives per training positive, used only to pick nu; 0 keeps ``nu``
    negative_ratio: float = 0.0
    nu_grid: tuple[float, ...] = DEFAULT_NU_GRID
    seed: int = 0
    per_tag_duration: int = 10_000
    guard_gap: int = 5_000
    normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "attack", Scenario(self.attack))
        object.__setattr__(self, "nu_grid", tuple(float(v) for v in self.nu_grid))
        OcsvmConfig(nu=self.nu, sigma=self.sigma)
        if self.attack is Scenario.BENIGN:
            raise ConfigError("attack scenario cannot be benign")
        if self.train_size < 2:
            raise ConfigError("train_size must be >= 2")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if self.attacker_distance <= 0:
            raise ConfigError("attacker_distance must be positive")
        if self.negative_ratio < 0:
            raise ConfigError("negative_ratio must be >= 0")


def trial_seed(seed: int, stream: int, index: int) -> int:
    ss = np.random.SeedSequence([seed, stream, index])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def trial_scenario(cfg: ExperimentConfig, stream: int, index: int) -> ScenarioConfig:
    """The scenario behind one profile of one stream."""
    s = trial_seed(cfg.seed, stream, index)
    scene = cfg.scene
    if stream in (TRAIN, TEST_BENIGN):
        kind = Scenario.BENIGN
    else:
        kind = cfg.attack
        bearing = np.random.default_rng(s).uniform(0.0, 2.0 * math.pi)
        scene = place_attacker(scene, cfg.attacker_distance, bearing)
    return ScenarioConfig(
        scene,
        kind,
        None,
        s,
        per_tag_duration=cfg.per_tag_duration,
        guard_gap=cfg.guard_gap,
        normalize=cfg.normalize,
    )


@lru_cache(maxsize=65536)
def _cached_profile(sc: ScenarioConfig) -> Optional[ProfileVector]:
    try:
        return scenario_profile(sc)
    except ScenarioError:
        return None


def profile_stream(
    cfg: ExperimentConfig, stream: int, count: int, workers: Optional[int] = None
) -> list[Optional[ProfileVector]]:
    """Profiles ``0..count-1`` of a stream; ``None`` marks a failed segmentation."""
    scs = [trial_scenario(cfg, stream, i) for i in range(count)]
    return map_ordered(_cached_profile, scs, workers)


def _ok(profiles) -> list[ProfileVector]:
    return [p for p in profiles if p is not None]


def accept_rate(model: OcsvmModel, profiles: Sequence[Optional[ProfileVector]]) -> float:
    """Share of profiles accepted; failed ones count as rejected."""
    if not profiles:
        return float("nan")
    good = _ok(profiles)
    if not good:
        return 0.0
    scores = decision_function(model, good)
    return float(np.sum(scores >= 0)) / len(profiles)


def select_nu(
    positives: Sequence[ProfileVector],
    negatives: Sequence[ProfileVector],
    grid: Sequence[float],
    sigma: Union[float, str] = "auto",
    holdout: float = 0.2,
) -> float:
    """Pick nu where held-out accept rate meets negative reject rate.

    Positives are split into a fitting part and a held-out part; for each
    candidate the gap between the two rates is measured and the smallest
    gap wins (ties go to the higher combined accuracy, then smaller nu).
    """
    if not negatives:
        raise ConfigError("nu selection needs negative profiles")
    n_val = max(1, int(round(holdout * len(positives))))
    fit, val = list(positives[:-n_val]), list(positives[-n_val:])
    if len(fit) < 2:
        raise ConfigError("too few positives for nu selection")
    best = None
    for nu in sorted(grid):
        model = train(fit, OcsvmConfig(nu=nu, sigma=sigma))
        tpr = accept_rate(model, val)
        tnr = 1.0 - accept_rate(model, negatives)
        key = (round(abs(tpr - tnr), 12), -round(tpr + tnr, 12), nu)
        if best is None or key < best[0]:
            best = (key, nu)
    return best[1]


@dataclass(frozen=True)
class PointResult:
    nu: float
    sigma: float
    trials: int
    tp_rate: float
    fp_rate: float
    benign_failures: int
    attack_failures: int
    train_failures: int


def fit(cfg: ExperimentConfig, workers: Optional[int] = None) -> OcsvmModel:
    positives = _ok(profile_stream(cfg, TRAIN, cfg.train_size, workers))
    if len(positives) < 2:
        raise ConfigError("fewer than two training profiles survived segmentation")
    nu = cfg.nu
    n_neg = int(round(cfg.negative_ratio * cfg.train_size))
    if n_neg > 0:
        negatives = _ok(profile_stream(cfg, NEGATIVES, n_neg, workers))
        if negatives:
            nu = select_nu(positives, negatives, cfg.nu_grid, cfg.sigma)
    return train(positives, OcsvmConfig(nu=nu, sigma=cfg.sigma))


def run_point(cfg: ExperimentConfig, workers: Optional[int] = None) -> PointResult:
    model = fit(cfg, workers)
    benign = profile_stream(cfg, TEST_BENIGN, cfg.trials, workers)
    attack = profile_stream(cfg, TEST_ATTACK, cfg.trials, workers)
    train_fail = sum(p is None for p in profile_stream(cfg, TRAIN, cfg.train_size, workers))
    return PointResult(
        nu=model.nu,
        sigma=model.sigma,
        trials=cfg.trials,
        tp_rate=accept_rate(model, benign),
        fp_rate=accept_rate(model, attack),
        benign_failures=sum(p is None for p in benign),
        attack_failures=sum(p is None for p in attack),
        train_failures=train_fail,
    )


def apply_param(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    if param == "nu":
        return replace(cfg, nu=float(value))
    if param == "distance":
        return replace(cfg, attacker_distance=float(value))
    if param == "tags":
        n = int(value)
        if n != value or n < 1:
            raise ConfigError(f"tag count must be a positive integer, got {value}")
        return replace(cfg, scene=cfg.scene.with_tags(n))
    if param == "train_size":
        n = int(value)
        if n != value:
            raise ConfigError(f"train_size must be an integer, got {value}")
        return replace(cfg, train_size=n)
    if param == "ratio":
        return replace(cfg, negative_ratio=float(value))
    if param == "snr":
        return replace(cfg, scene=replace(cfg.scene, snr_db=float(value)))
    raise ConfigError(f"unknown sweep parameter {param!r}; choose from {SWEEP_PARAMS}")


SWEEP_COLUMNS = (
    "param",
    "value",
    "nu",
    "sigma",
    "trials",
    "tp_rate",
    "fp_rate",
    "benign_failures",
    "attack_failures",
    "train_failures",
)


def sweep(
    base: ExperimentConfig, param: str, grid: Sequence[float], workers: Optional[int] = None
) -> list[tuple[float, PointResult]]:
    if not grid:
        raise ConfigError("empty sweep grid")
    points = [apply_param(base, param, v) for v in grid]
    return [(v, run_point(p, workers)) for v, p in zip(grid, points)]


def sweep_csv(param: str, results: Sequence[tuple[float, PointResult]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for value, r in results:
        w.writerow(
            [
                param,
                repr(float(value)),
                repr(r.nu),
                repr(r.sigma),
                r.trials,
                repr(r.tp_rate),
                repr(r.fp_rate),
                r.benign_failures,
                r.attack_failures,
                r.train_failures,
            ]
        )
    return buf.getvalue()
