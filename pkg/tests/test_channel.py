import itertools
import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shieldscatter.channel import (
    SceneConfig,
    Source,
    TagSchedule,
    Trace,
    channel_gains,
    coherence_time,
    make_tag_schedule,
    read_trace,
    synthesize_trace,
    tag_activity,
    tag_levels,
    write_trace,
)
from shieldscatter.errors import ConfigError, DomainError

QUIET = SceneConfig(snr_db=math.inf)


def test_coherence_time_examples():
    # hand value from lambda = 0.3331 m; the rounded 0.1194 assumes c = 3e8
    hand = 9 * 0.3331 / (16 * math.pi * 0.5)
    assert coherence_time(9.0e8, 0.5) == pytest.approx(hand, rel=1e-4)
    assert coherence_time(9.0e8, 0.5) == pytest.approx(0.1194, abs=2e-4)
    assert coherence_time(9.0e8, 1.0) == pytest.approx(hand / 2, rel=1e-4)
    assert coherence_time(9.0e8, 1.0) == pytest.approx(0.0597, abs=1e-4)
    assert coherence_time(2.4e9, 0.3) / coherence_time(2.4e9, 0.6) == pytest.approx(2.0, rel=1e-15)


def test_coherence_time_rejects_nonpositive():
    with pytest.raises(DomainError):
        coherence_time(0.0, 1.0)
    with pytest.raises(DomainError):
        coherence_time(9e8, -1.0)


def test_scene_invariants():
    with pytest.raises(ConfigError):
        SceneConfig(tag_count=2, tag_positions=((0.1, 0.0),))
    with pytest.raises(ConfigError):
        SceneConfig(tag_positions=((0.1, 0.0), (0.1, 0.0), (0.0, 0.1)))
    with pytest.raises(ConfigError):
        SceneConfig(sample_rate=5e4, tag_bitrate=1e4)
    with pytest.raises(ConfigError):
        SceneConfig(attacker_position=(0.0, 2.5))


def test_scene_round_trip():
    s = SceneConfig(tag_count=4, snr_db=15.0)
    assert SceneConfig.from_dict(s.to_dict()) == s
    with pytest.raises(ConfigError):
        SceneConfig.from_dict({"bogus": 1})


def test_schedule_invariants():
    with pytest.raises(ConfigError):
        TagSchedule((0, 0, 1))
    with pytest.raises(ConfigError):
        TagSchedule((0,), per_tag_duration=150).validate_for(QUIET.with_tags(1))


def test_schedule_single_tag_and_determinism():
    assert make_tag_schedule(1, 12345).order == (0,)
    assert make_tag_schedule(3, 99).order == make_tag_schedule(3, 99).order


def test_schedule_permutations_uniform():
    draws = 6000
    counts = Counter(make_tag_schedule(3, s).order for s in range(draws))
    assert set(counts) == set(itertools.permutations(range(3)))
    p = 1 / 6
    sd = math.sqrt(draws * p * (1 - p))
    for c in counts.values():
        assert abs(c - draws * p) <= 3 * sd


def test_noise_free_two_levels_per_slot():
    sched = TagSchedule((2, 0, 1))
    tr = synthesize_trace(QUIET, sched, Source.USER, 3)
    off, on = tag_levels(QUIET, QUIET.user_position)
    for slot, tag in enumerate(sched.order):
        a = sched.guard_gap + slot * sched.per_tag_duration
        amp = np.abs(tr.samples[a : a + sched.per_tag_duration])
        levels = np.unique(np.round(amp, 9))
        assert levels.size == 2
        assert np.allclose(sorted(levels), sorted([off, on[tag]]), rtol=1e-9)


def test_synthesis_deterministic():
    sched = make_tag_schedule(3, 5)
    a = synthesize_trace(SceneConfig(), sched, Source.USER, 77)
    b = synthesize_trace(SceneConfig(), sched, Source.USER, 77)
    assert np.array_equal(a.samples, b.samples)


def test_user_and_attacker_signatures_differ():
    scene = replace(QUIET, attacker_position=(0.0, 2.65))
    _, user = tag_levels(scene, scene.user_position)
    _, attacker = tag_levels(scene, scene.attacker_position)
    assert np.max(np.abs(user - attacker)) > 1e-3
    sched = TagSchedule((0, 1, 2))
    u = synthesize_trace(scene, sched, Source.USER, 1)
    v = synthesize_trace(scene, sched, Source.ATTACKER, 1)

    def slot_means(tr):
        return [
            np.abs(tr.samples[5000 + 10000 * k : 15000 + 10000 * k]).mean() for k in range(3)
        ]

    assert not np.allclose(slot_means(u), slot_means(v), rtol=1e-3)


def test_superposition_is_exact_sum():
    sched = make_tag_schedule(3, 8)
    u = synthesize_trace(QUIET, sched, Source.USER, 21)
    a = synthesize_trace(QUIET, sched, Source.ATTACKER, 21)
    s = synthesize_trace(QUIET, sched, Source.SUPERPOSED, 21)
    assert np.array_equal(s.samples, u.samples + a.samples)


def test_energy_decreases_with_distance():
    sched = TagSchedule((0, 1, 2))
    energies = []
    for d in (0.8, 1.2, 1.7, 2.5, 3.5, 5.0):
        scene = replace(QUIET, user_position=(0.0, d), attacker_position=(0.7, d))
        tr = synthesize_trace(scene, sched, Source.USER, 0)
        energies.append(np.mean(np.abs(tr.samples) ** 2))
    assert all(a > b for a, b in zip(energies, energies[1:]))


def test_truth_brackets_reflecting_samples():
    sched = TagSchedule((1, 2, 0), per_tag_duration=2000, guard_gap=700)
    tr = synthesize_trace(QUIET, sched, Source.USER, 4)
    act = tag_activity(QUIET, sched, len(tr))
    on = np.flatnonzero(act >= 0)
    assert tr.truth.backscatter_start == on[0]
    assert tr.truth.backscatter_end == on[-1] + 1
    assert tr.truth.tag_order == sched.order


def test_schedule_longer_than_trace():
    with pytest.raises(ConfigError):
        synthesize_trace(QUIET, TagSchedule((0, 1, 2)), Source.USER, 0, length=1000)


def test_trace_validation():
    with pytest.raises(DomainError):
        Trace(np.array([]), 1e6)
    with pytest.raises(DomainError):
        Trace(np.array([1.0, np.nan]), 1e6)


def test_trace_file_round_trip(tmp_path):
    tr = synthesize_trace(SceneConfig(), make_tag_schedule(3, 2), Source.ATTACKER, 9)
    p = tmp_path / "m.trace"
    write_trace(tr, p)
    back = read_trace(p)
    assert back.truth == tr.truth
    assert back.sample_rate == tr.sample_rate
    assert np.allclose(back.samples, tr.samples, atol=1e-6)
    p.write_bytes(b"junk")
    with pytest.raises(ConfigError):
        read_trace(p)


def test_direct_path_gain_is_inverse_distance():
    direct, _ = channel_gains(QUIET, (0.0, 4.0))
    assert abs(direct) == pytest.approx(0.25)


coord = st.floats(-2.0, 2.0, allow_nan=False)
depth = st.floats(1.0, 4.0, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coord, depth, coord, depth)
def test_separated_sources_have_distinct_tag_deltas(x1, y1, x2, y2):
    lam = QUIET.wavelength
    if math.hypot(x1 - x2, y1 - y2) < lam / 2:
        return
    d1, g1 = tag_levels(QUIET, (x1, y1))
    d2, g2 = tag_levels(QUIET, (x2, y2))
    delta1, delta2 = g1 - d1, g2 - d2
    rel = np.abs(delta1 - delta2) / np.maximum(np.abs(delta1), np.abs(delta2))
    assert rel.max() >= 0.01
