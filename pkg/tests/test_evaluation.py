from itertools import permutations

import numpy as np
import pytest

from src.errors import OneClassOnly
from src.evaluation import (
    BiometricReport,
    ClassCounts,
    LabeledDecision,
    biometric_metrics,
    evaluate_segments,
    f1_score,
    match_segments,
    report_csv_row,
    segmentation_metrics,
    temporal_iou,
)
from src.models import TemporalSegment


def seg(onset: int, offset: int, label: str = "blink") -> TemporalSegment:
    return TemporalSegment(onset=onset, offset=offset, label=label)


def test_temporal_iou() -> None:
    assert temporal_iou(seg(0, 10), seg(0, 10)) == 1.0
    assert temporal_iou(seg(0, 10), seg(5, 15)) == pytest.approx(5 / 15)
    assert temporal_iou(seg(0, 10), seg(10, 20)) == 0.0


def test_identical_sets_score_100() -> None:
    gt = [seg(0, 100), seg(200, 260, "saccade"), seg(400, 500)]
    report = evaluate_segments(gt, gt)
    assert report.f1 == 100.0
    assert report.per_class["blink"].tp == 2
    assert report.per_class["saccade"].tp == 1


def test_empty_prediction_against_empty_truth() -> None:
    report = evaluate_segments([], [])
    assert report.f1 == 0.0
    assert report.empty is True


def test_all_false_positives() -> None:
    report = evaluate_segments([seg(0, 10)], [])
    assert report.per_class["blink"].precision == 0.0
    assert report.per_class["blink"].fp == 1


def test_iou_exactly_at_threshold_matches_and_is_flagged() -> None:
    result = match_segments([seg(0, 100)], [seg(0, 50)], 0.5)
    assert len(result.pairs) == 1
    assert result.boundary_matches == 1


def test_label_mismatch_never_matches() -> None:
    result = match_segments([seg(0, 100, "saccade")], [seg(0, 100, "blink")], 0.1)
    assert result.pairs == []
    assert result.counts["saccade"].fp == 1
    assert result.counts["blink"].fn == 1


def test_greedy_prefers_the_higher_iou_pair() -> None:
    pred = [seg(0, 100), seg(10, 110)]
    gt = [seg(12, 112)]
    result = match_segments(pred, gt, 0.5)
    assert [(p.pred_index, p.gt_index) for p in result.pairs] == [(1, 0)]


def test_counts_are_invariant_to_input_order() -> None:
    pred = [seg(0, 100), seg(150, 200, "saccade"), seg(300, 420)]
    gt = [seg(10, 110), seg(160, 210, "saccade"), seg(500, 600)]
    expected = match_segments(pred, gt).counts
    for order in permutations(range(3)):
        shuffled = [pred[i] for i in order]
        assert match_segments(shuffled, gt).counts == expected


def _disjoint(rng: np.random.Generator, n: int, horizon: int = 2_000) -> list[TemporalSegment]:
    cuts = np.sort(rng.choice(np.arange(0, horizon, 10), size=2 * n, replace=False))
    return [seg(int(a), int(b)) for a, b in zip(cuts[::2], cuts[1::2])]


def _best_matching_size(pred, gt, threshold: float) -> int:
    small, large = (pred, gt) if len(pred) <= len(gt) else (gt, pred)
    best = 0
    for chosen in permutations(range(len(large)), len(small)):
        size = sum(
            1 for i, j in enumerate(chosen) if temporal_iou(small[i], large[j]) >= threshold
        )
        best = max(best, size)
    return best


def test_greedy_matches_exhaustive_search_on_disjoint_segments() -> None:
    rng = np.random.default_rng(7)
    matched_somewhere = 0
    for _ in range(1_200):
        pred = _disjoint(rng, int(rng.integers(1, 5)), horizon=400)
        gt = _disjoint(rng, int(rng.integers(1, 5)), horizon=400)
        result = match_segments(pred, gt, 0.5)
        assert len(result.pairs) == _best_matching_size(pred, gt, 0.5)
        matched_somewhere += bool(result.pairs)
    assert matched_somewhere > 50


def test_raising_the_threshold_never_adds_true_positives() -> None:
    rng = np.random.default_rng(1)
    pred, gt = _disjoint(rng, 6), _disjoint(rng, 6)
    tps = [len(match_segments(pred, gt, th).pairs) for th in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert tps == sorted(tps, reverse=True)


def test_reported_blink_f1_arithmetic() -> None:
    assert f1_score(97.62, 93.18) == pytest.approx(95.35, abs=0.01)


def test_macro_average_over_classes() -> None:
    counts = {
        "blink": ClassCounts(tp=9, fp=1, fn=1),
        "saccade": ClassCounts(tp=4, fp=1, fn=4),
    }
    report = segmentation_metrics(counts)
    assert report.per_class["blink"].f1 == pytest.approx(90.0)
    assert report.per_class["saccade"].precision == pytest.approx(80.0)
    assert report.per_class["saccade"].recall == pytest.approx(50.0)
    assert report.f1 == pytest.approx((90.0 + f1_score(80.0, 50.0)) / 2)


def _decisions(apcer: float, bpcer: float, n: int = 10_000) -> list[LabeledDecision]:
    n_false_accept = round(apcer * n / 100)
    n_false_reject = round(bpcer * n / 100)
    attacks = [LabeledDecision(label="replay", verdict="genuine")] * n_false_accept + [
        LabeledDecision(label="replay", verdict="replay")
    ] * (n - n_false_accept)
    bonafide = [LabeledDecision(label="genuine", verdict="replay")] * n_false_reject + [
        LabeledDecision(label="genuine", verdict="genuine")
    ] * (n - n_false_reject)
    return attacks + bonafide


@pytest.mark.parametrize(
    ("apcer", "bpcer", "acer"),
    [
        (4.20, 5.10, 4.65),
        (6.90, 8.10, 7.50),
        (8.20, 7.60, 7.90),
        (10.20, 8.50, 9.35),
    ],
)
def test_acer_for_reference_error_rates(apcer: float, bpcer: float, acer: float) -> None:
    report = biometric_metrics(_decisions(apcer, bpcer))
    assert report.apcer == pytest.approx(apcer)
    assert report.bpcer == pytest.approx(bpcer)
    assert report.acer == pytest.approx(acer, abs=0.005)


def test_biometric_metrics_basic_counts() -> None:
    decisions = [
        LabeledDecision(label="replay", verdict="replay"),
        LabeledDecision(label="replay", verdict="genuine"),
        LabeledDecision(label="genuine", verdict="genuine"),
        LabeledDecision(label="genuine", verdict="genuine"),
    ]
    report = biometric_metrics(decisions)
    assert report.apcer == 50.0
    assert report.bpcer == 0.0
    assert report.acer == 25.0
    assert report.top1_accuracy == 75.0


def test_biometric_metrics_needs_both_classes() -> None:
    with pytest.raises(OneClassOnly):
        biometric_metrics([LabeledDecision(label="genuine", verdict="genuine")])


def test_acer_must_be_the_mean() -> None:
    with pytest.raises(ValueError):
        BiometricReport(top1_accuracy=90, apcer=10, bpcer=10, acer=5, n_attack=1, n_bonafide=1)


def test_report_csv_row() -> None:
    report = evaluate_segments([seg(0, 100)], [seg(0, 100)])
    header, row = report_csv_row(report, clip="a.evt").splitlines()
    assert header == "clip,precision,recall,f1,tp,fp,fn"
    assert row == "a.evt,100.0000,100.0000,100.0000,1,0,0"
