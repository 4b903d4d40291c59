import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import OverlappingMovements
from src.event_core import EventStream, crop_roi
from src.representations import window_features
from src.synth import (
    ClipSpec,
    ReplaySpec,
    default_clip_spec,
    random_clip_spec,
    synth_genuine,
    synth_replay,
)


def test_same_seed_same_clip() -> None:
    spec = default_clip_spec(seed=4)
    assert synth_genuine(spec) == synth_genuine(spec)


def test_different_seed_changes_events_not_truth() -> None:
    a, truth_a = synth_genuine(default_clip_spec(seed=1))
    b, truth_b = synth_genuine(default_clip_spec(seed=2))
    assert a != b
    assert truth_a == truth_b


def test_empty_script_without_noise_is_empty() -> None:
    stream, truth = synth_genuine(ClipSpec(noise_rate=0.0))
    assert len(stream) == 0
    assert truth == []


def test_truth_follows_the_script_with_margin() -> None:
    spec = ClipSpec(
        blink_times=[500_000], blink_durations=[150_000],
        saccade_times=[1_000_000], saccade_durations=[40_000],
        annotation_margin=10_000,
    )
    _, truth = synth_genuine(spec)
    assert [(s.label, s.onset, s.offset) for s in truth] == [
        ("blink", 490_000, 660_000),
        ("saccade", 990_000, 1_050_000),
    ]


def test_movement_events_stay_inside_the_eye_roi() -> None:
    spec = default_clip_spec(noise_rate=0.0)
    stream, _ = synth_genuine(spec)
    roi = spec.eye_roi
    assert len(stream) > 0
    assert np.all((stream.x >= roi.x0) & (stream.x < roi.x0 + roi.w))
    assert np.all((stream.y >= roi.y0) & (stream.y < roi.y0 + roi.h))
    assert np.all(np.diff(stream.t) >= 0)


def test_blink_closing_is_on_dominant_and_reopening_off_dominant() -> None:
    spec = ClipSpec(blink_times=[1_000_000], blink_durations=[200_000], noise_rate=0.0)
    stream, _ = synth_genuine(spec)
    closing = (stream.t >= 1_000_000) & (stream.t < 1_070_000)
    reopening = (stream.t >= 1_094_000) & (stream.t < 1_200_000)
    assert np.mean(stream.p[closing] > 0) > 0.6
    assert np.mean(stream.p[reopening] < 0) > 0.6


def test_overlapping_movements_are_rejected() -> None:
    spec = ClipSpec(
        blink_times=[500_000], blink_durations=[150_000],
        saccade_times=[600_000], saccade_durations=[40_000],
    )
    with pytest.raises(OverlappingMovements):
        synth_genuine(spec)


def test_movements_closer_than_two_margins_are_rejected() -> None:
    spec = ClipSpec(
        blink_times=[100_000], blink_durations=[150_000],
        saccade_times=[250_000], saccade_durations=[40_000],
        annotation_margin=10_000,
    )
    with pytest.raises(OverlappingMovements):
        spec.movements()
    with pytest.raises(OverlappingMovements):
        synth_genuine(spec)
    _, truth = synth_genuine(spec.model_copy(update={"annotation_margin": 0}))
    assert [(s.onset, s.offset) for s in truth] == [(100_000, 250_000), (250_000, 290_000)]


def test_random_clip_truth_is_disjoint() -> None:
    for seed in range(25):
        _, truth = synth_genuine(random_clip_spec(seed, noise_rate=0.0))
        assert truth
        for before, after in zip(truth, truth[1:]):
            assert before.onset < before.offset <= after.onset < after.offset


def test_clip_spec_validation() -> None:
    with pytest.raises(ValidationError):
        ClipSpec(saccade_times=[0], saccade_durations=[10_000])
    with pytest.raises(ValidationError):
        ClipSpec(blink_times=[2_950_000], blink_durations=[100_000])
    with pytest.raises(ValidationError):
        ClipSpec(blink_times=[0, 1], blink_durations=[100_000])


def test_random_specs_are_valid_and_disjoint() -> None:
    for seed in range(20):
        spec = random_clip_spec(seed)
        movements = spec.movements()
        assert 1 <= len(spec.blink_times) <= 4
        assert len(spec.saccade_times) <= 3
        for (_, t_a, d_a), (_, t_b, _) in zip(movements, movements[1:]):
            assert t_b - (t_a + d_a) >= 200_000
    assert random_clip_spec(3) == random_clip_spec(3)


def _grid_stream(n: int = 10_000) -> EventStream:
    """One event per frame slot and pixel, so quantization drops nothing."""

    k = np.arange(n)
    return EventStream.from_arrays(
        64, 48, k * 20_000 + 5, k % 64, (k // 64) % 48, np.where(k % 2, 1, -1)
    )


def test_replay_timestamps_land_on_frame_boundaries() -> None:
    genuine, _ = synth_genuine(default_clip_spec())
    replay = synth_replay(genuine, ReplaySpec(fps=50, brightness_factor=1.0))
    assert np.all(replay.t % 20_000 == 0)
    assert np.all(np.diff(replay.t) >= 0)
    assert len(replay) <= len(genuine)


def test_replay_collapses_same_pixel_same_frame_duplicates() -> None:
    genuine = EventStream.from_arrays(
        8, 8, [1, 5, 9, 25_000], [2, 2, 2, 2], [3, 3, 3, 3], [1, 1, -1, 1]
    )
    replay = synth_replay(genuine, ReplaySpec(fps=50, brightness_factor=1.0))
    assert replay.t.tolist() == [20_000, 20_000, 40_000]
    assert replay.p.tolist() == [1, -1, 1]


def test_replay_per_pixel_intervals_are_frame_multiples() -> None:
    genuine, _ = synth_genuine(default_clip_spec())
    replay = synth_replay(genuine, ReplaySpec(fps=50, brightness_factor=1.0))
    key = (replay.y.astype(np.int64) * replay.width + replay.x) * 2 + (replay.p > 0)
    order = np.argsort(key, kind="stable")
    same = key[order][1:] == key[order][:-1]
    intervals = np.diff(replay.t[order])[same]
    assert intervals.size > 0
    assert np.all(intervals % 20_000 == 0)
    assert np.all(intervals > 0)


def test_brightness_thins_events() -> None:
    genuine = _grid_stream()
    full = synth_replay(genuine, ReplaySpec(brightness_factor=1.0))
    half = synth_replay(genuine, ReplaySpec(brightness_factor=0.5, seed=9))
    assert len(full) == len(genuine)
    assert 4_600 <= len(half) <= 5_400


def test_lower_brightness_never_adds_events() -> None:
    genuine, _ = synth_genuine(default_clip_spec())
    counts = [len(synth_replay(genuine, ReplaySpec(brightness_factor=b))) for b in (1.0, 0.8, 0.5, 0.2)]
    assert counts == sorted(counts, reverse=True)


def test_jitter_stays_within_bound() -> None:
    genuine = _grid_stream(500)
    replay = synth_replay(genuine, ReplaySpec(brightness_factor=1.0, jitter=3_000))
    offsets = replay.t % 20_000
    assert np.all(offsets <= 3_000)
    assert np.all(np.diff(replay.t) >= 0)


def test_replay_spec_validation() -> None:
    with pytest.raises(ValidationError):
        ReplaySpec(fps=0)
    with pytest.raises(ValidationError):
        ReplaySpec(brightness_factor=1.5)


def test_replay_pixel_intervals_exceed_genuine_on_every_pair() -> None:
    genuine_iei, replay_iei = [], []
    for seed in range(20):
        spec = random_clip_spec(seed)
        genuine, _ = synth_genuine(spec)
        replay = synth_replay(genuine, ReplaySpec(seed=seed))
        g = window_features(crop_roi(genuine, spec.eye_roi), "left_eye").median_pixel_iei_mean
        r = window_features(crop_roi(replay, spec.eye_roi), "left_eye").median_pixel_iei_mean
        assert r > g
        genuine_iei.append(g)
        replay_iei.append(r)
    assert min(replay_iei) > max(genuine_iei)


def test_dense_stream_replay_has_frame_length_intervals() -> None:
    # Every pixel of a 4x4 sensor fires each millisecond with alternating polarity.
    k = np.repeat(np.arange(200), 16)
    pixel = np.tile(np.arange(16), 200)
    genuine = EventStream.from_arrays(4, 4, k * 1_000, pixel % 4, pixel // 4, np.where(k % 2, -1, 1))
    replay = synth_replay(genuine, ReplaySpec(fps=50, brightness_factor=1.0))

    assert window_features(genuine).median_pixel_iei_mean < 5_000
    assert window_features(replay).median_pixel_iei_mean >= 20_000
