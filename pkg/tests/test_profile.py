import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_dtw
from shieldscatter.channel import SceneConfig
from shieldscatter.errors import DomainError, SegmentTooShort
from shieldscatter.features import extract_features
from shieldscatter.guard import Scenario, ScenarioConfig, place_attacker, scenario_profile
from shieldscatter.profile import (
    LAYOUT,
    PROFILE_SIZE,
    ProfileVector,
    build_profile,
    chunk_series,
    chunked_dtw,
    dtw_distance,
    read_profiles,
    write_profiles,
)

series = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=6)


def features(seed, n=4000):
    x = np.random.default_rng(seed).standard_normal((n, 2)) @ [1, 1j]
    return extract_features(x + 2.0)


def test_dtw_examples():
    assert dtw_distance([1, 2, 3], [2, 3, 4]) == 2
    assert dtw_distance([5], [1, 2]) == 7
    x = np.random.default_rng(0).standard_normal(40)
    assert dtw_distance(x, x) == 0.0


def test_dtw_rejects_bad_input():
    with pytest.raises(DomainError):
        dtw_distance([], [1.0])
    with pytest.raises(DomainError):
        dtw_distance([np.inf], [1.0])


@settings(max_examples=150, deadline=None)
@given(series, series)
def test_dtw_matches_exhaustive_paths(x, y):
    assert dtw_distance(x, y) == pytest.approx(brute_dtw(x, y), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=30), st.data())
def test_dtw_bounded_by_aligned_l1(x, data):
    y = data.draw(st.lists(st.floats(-10, 10, allow_nan=False), min_size=len(x), max_size=len(x)))
    aligned = float(np.sum(np.abs(np.subtract(x, y))))
    assert dtw_distance(x, y) <= aligned + 1e-9
    shifted = [x[0]] + x[:-1]
    assert dtw_distance(x, shifted) <= float(np.sum(np.abs(np.subtract(x, shifted)))) + 1e-9


def test_chunk_examples():
    chunks = chunk_series(np.arange(12_800), 128)
    assert len(chunks) == 128 and all(c.size == 100 for c in chunks)
    sizes = sorted(c.size for c in chunk_series(np.arange(59), 58))
    assert sizes == [1] * 57 + [2]
    with pytest.raises(DomainError):
        chunk_series(np.arange(5), 6)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 400), st.data())
def test_chunks_partition_input(L, data):
    C = data.draw(st.integers(1, L))
    a = np.arange(L)
    chunks = chunk_series(a, C)
    assert len(chunks) == C
    assert np.array_equal(np.concatenate(chunks), a)
    assert max(c.size for c in chunks) - min(c.size for c in chunks) <= 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40),
       st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40))
def test_single_chunk_equals_whole_dtw(x, y):
    assert chunked_dtw(x, y, 1)[0] == dtw_distance(x, y)


def test_chunked_dtw_too_short():
    with pytest.raises(SegmentTooShort):
        chunked_dtw(np.ones(10), np.ones(200), 58)


def test_identical_feature_sets_give_zero_profile():
    a = features(1)
    p = build_profile(a, a)
    assert p.values.shape == (PROFILE_SIZE,)
    assert np.all(p.values == 0.0)


def test_layout():
    assert PROFILE_SIZE == 488
    assert LAYOUT["variance"] == slice(314, 372)
    widths = [s.stop - s.start for s in LAYOUT.values()]
    assert widths == [128, 128, 58, 58, 58, 58]


def test_variance_perturbation_only_touches_its_slice():
    a = features(2)
    b = replace(a, variance=a.variance + np.linspace(0.1, 1.0, a.variance.size))
    p = build_profile(a, b)
    changed = np.flatnonzero(p.values != 0)
    assert changed.size > 0
    assert changed.min() >= 314 and changed.max() < 372


def test_profile_symmetric():
    a, b = features(3), features(4, 3700)
    assert np.array_equal(build_profile(a, b).values, build_profile(b, a).values)


def test_normalised_profile_is_scale_free():
    a, b = features(5), features(6)
    b2 = replace(b, **{n: 3.0 * getattr(b, n) for n in ("original", "smoothed", "maximum")})
    p = build_profile(a, b, normalize=True).values
    q = build_profile(a, b2, normalize=True).values
    assert np.allclose(p[:256], q[:256])


def test_profile_vector_validation():
    with pytest.raises(DomainError):
        ProfileVector(np.zeros(487))
    with pytest.raises(DomainError):
        ProfileVector(-np.ones(PROFILE_SIZE))
    with pytest.raises(DomainError):
        ProfileVector(np.zeros(PROFILE_SIZE), label=0)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    rows = [ProfileVector(rng.random(PROFILE_SIZE) * 10, lab) for lab in (1, -1, None)]
    path = tmp_path / "p.csv"
    write_profiles(path, rows)
    back = read_profiles(path)
    assert [p.label for p in back] == [1, -1, None]
    assert all(np.array_equal(a.values, b.values) for a, b in zip(rows, back))
    path.write_text(path.read_text().replace(",1\n", ",x\n", 1))
    with pytest.raises(DomainError):
        read_profiles(path)


def test_same_user_profiles_smaller_than_attacker_profiles():
    scene = replace(SceneConfig(), snr_db=25.0)
    legit, attack = [], []
    for seed in range(50):
        bearing = 2 * math.pi * seed / 50
        far = place_attacker(scene, 0.5 + seed / 50, bearing)
        legit.append(scenario_profile(ScenarioConfig(scene, Scenario.BENIGN, None, seed)).values)
        attack.append(
            scenario_profile(ScenarioConfig(far, Scenario.DEAUTH_INJECTION, None, seed)).values
        )
    assert np.mean(legit) < np.mean(attack)
    assert sum(l.mean() < a.mean() for l, a in zip(legit, attack)) >= 45
