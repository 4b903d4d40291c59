import functools

import pytest

from src.errors import InvalidParameter, MissingFeature, OneClassOnly
from src.evaluation import LabeledDecision, biometric_metrics
from src.event_core import crop_roi
from src.liveness import (
    ChallengeSession,
    FeatureClassifier,
    LabeledFeatures,
    classify,
    open_challenge,
    run_challenge,
    subject_split,
    train_classifier,
)
from src.models import ClipFeatures, LivenessDecision, TemporalSegment
from src.representations import window_features
from src.synth import ReplaySpec, random_clip_spec, synth_genuine, synth_replay

GENUINE = LivenessDecision(verdict="genuine", score=0.9)
REPLAY = LivenessDecision(verdict="replay", score=0.1)


def _features(rate: float, iei: float | None = 10_000.0) -> ClipFeatures:
    return ClipFeatures(
        event_rate_mean=rate,
        event_rate_std=rate / 10,
        polarity_balance_mean=0.0,
        polarity_balance_std=0.1,
        median_pixel_iei_mean=iei,
        median_pixel_iei_std=None if iei is None else iei / 5,
        n_windows=10,
    )


def _toy_samples() -> list[LabeledFeatures]:
    genuine = [LabeledFeatures(features=_features(1000 + 10 * i, 8_000 + 100 * i), label="genuine") for i in range(6)]
    replay = [LabeledFeatures(features=_features(400 + 10 * i, 20_000 + 100 * i), label="replay") for i in range(6)]
    return genuine + replay


def test_training_separates_toy_classes() -> None:
    clf = train_classifier(_toy_samples())
    assert classify(clf, _features(1020, 8_200)).verdict == "genuine"
    assert classify(clf, _features(420, 20_200)).verdict == "replay"


def test_training_is_deterministic() -> None:
    assert train_classifier(_toy_samples()) == train_classifier(_toy_samples())


def test_zero_variance_features_are_dropped() -> None:
    clf = train_classifier(_toy_samples())
    assert "polarity_balance_mean" not in clf.feature_names
    assert "polarity_balance_std" not in clf.feature_names
    assert "event_rate_mean" in clf.feature_names
    assert all(std > 0 for std in clf.stds)


def test_training_needs_both_classes() -> None:
    genuine_only = [s for s in _toy_samples() if s.label == "genuine"]
    with pytest.raises(OneClassOnly):
        train_classifier(genuine_only)


def test_threshold_zero_and_one() -> None:
    clf = train_classifier(_toy_samples())
    middle = _features(710, 14_100)
    assert classify(clf.with_threshold(0.0), middle).verdict == "genuine"
    assert classify(clf.with_threshold(1.0), middle).verdict == "replay"


def test_classify_requires_trained_features() -> None:
    clf = train_classifier(_toy_samples())
    with pytest.raises(MissingFeature):
        classify(clf, _features(1000, None))


def test_classifier_json_round_trip() -> None:
    clf = train_classifier(_toy_samples())
    restored = FeatureClassifier.model_validate_json(clf.model_dump_json())
    assert restored == clf
    sample = _features(700, 12_000)
    assert classify(restored, sample) == classify(clf, sample)


def test_challenge_truth_table() -> None:
    session = open_challenge("blink", issued_at=1_000_000, timeout=2_000_000)
    blink_on_time = TemporalSegment(onset=1_500_000, offset=1_650_000, label="blink")
    blink_late = TemporalSegment(onset=3_500_000, offset=3_650_000, label="blink")
    saccade_on_time = TemporalSegment(onset=1_200_000, offset=1_240_000, label="saccade")

    passed = run_challenge(session, [blink_on_time], GENUINE)
    assert (passed.status, passed.reason, passed.session.state) == ("passed", "ok", "passed")

    spoofed = run_challenge(session, [blink_on_time], REPLAY)
    assert (spoofed.status, spoofed.reason) == ("failed", "liveness_failed")

    late = run_challenge(session, [blink_late], GENUINE)
    assert late.reason == "late_movement"

    wrong = run_challenge(session, [saccade_on_time], GENUINE)
    assert wrong.reason == "wrong_movement"

    nothing = run_challenge(session, [], GENUINE)
    assert nothing.reason == "no_movement"
    assert nothing.session.state == "failed"
    assert session.state == "awaiting"


def test_challenge_deadline_must_follow_issue() -> None:
    with pytest.raises(ValueError):
        ChallengeSession(challenge="saccade", issued_at=10, deadline=10)


def test_subject_split_is_disjoint_and_deterministic() -> None:
    records = [(f"s{i % 10}", i) for i in range(50)]
    train, test = subject_split(records, lambda r: r[0], seed=3)
    assert {r[0] for r in train}.isdisjoint({r[0] for r in test})
    assert len({r[0] for r in train}) == 8
    assert len(train) + len(test) == len(records)
    assert subject_split(records, lambda r: r[0], seed=3) == (train, test)
    with pytest.raises(InvalidParameter):
        subject_split(records, lambda r: "only", seed=0)


@functools.lru_cache(maxsize=1)
def _synthetic_dataset() -> tuple[LabeledFeatures, ...]:
    samples = []
    for subject in range(20):
        for take in range(2):
            seed = subject * 100 + take
            spec = random_clip_spec(seed)
            genuine, _ = synth_genuine(spec)
            replay = synth_replay(genuine, ReplaySpec(seed=seed))
            for stream, label in ((genuine, "genuine"), (replay, "replay")):
                features = window_features(crop_roi(stream, spec.eye_roi), "left_eye")
                samples.append(LabeledFeatures(features=features, label=label, subject=f"s{subject}"))
    return tuple(samples)


def test_synthetic_replays_are_caught_on_held_out_subjects() -> None:
    train, test = subject_split(_synthetic_dataset(), lambda s: s.subject, ratio=0.8, seed=0)
    clf = train_classifier(train)
    decisions = [
        LabeledDecision(label=s.label, verdict=classify(clf, s.features).verdict) for s in test
    ]
    report = biometric_metrics(decisions)
    assert report.top1_accuracy >= 95.0
    assert report.acer <= 5.0
    assert len({s.subject for s in train}) == 16
    assert len({s.subject for s in test}) == 4


def _rescaled(samples, name: str, scale: float, offset: float) -> list[LabeledFeatures]:
    moved = []
    for s in samples:
        features = s.features.model_copy(update={name: scale * s.features.feature(name) + offset})
        moved.append(s.model_copy(update={"features": features}))
    return moved


def test_affine_rescaled_feature_keeps_every_verdict() -> None:
    train, test = subject_split(_synthetic_dataset(), lambda s: s.subject, ratio=0.8, seed=1)
    clf = train_classifier(train)
    baseline = [classify(clf, s.features).verdict for s in test]
    for name, scale, offset in (("median_pixel_iei_mean", 1e-3, 7.0), ("event_rate_mean", 2.5, -100.0)):
        moved = train_classifier(_rescaled(train, name, scale, offset))
        assert [classify(moved, s.features).verdict for s in _rescaled(test, name, scale, offset)] == baseline


def test_longer_pixel_intervals_push_toward_replay() -> None:
    samples = [
        LabeledFeatures(
            features=ClipFeatures(
                event_rate_mean=1.0,
                event_rate_std=0.0,
                median_pixel_iei_mean=s.features.median_pixel_iei_mean,
                n_windows=s.features.n_windows,
            ),
            label=s.label,
            subject=s.subject,
        )
        for s in _synthetic_dataset()
    ]
    clf = train_classifier(samples)
    assert clf.feature_names == ["median_pixel_iei_mean"]
    assert clf.weights[0] < 0


def test_identical_features_with_both_labels_score_one_half() -> None:
    samples = [
        LabeledFeatures(features=_features(700, 12_000), label=label) for label in ("genuine", "replay") * 3
    ]
    clf = train_classifier(samples)
    decision = classify(clf, _features(700, 12_000))
    assert decision.score == pytest.approx(0.5)
    assert classify(clf, _features(9_000, 40_000)).score == pytest.approx(0.5)
