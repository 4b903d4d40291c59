"""Segmentation and biometric evaluation metrics.

Segment matching is one-to-one and greedy in descending temporal IoU among
same-label pairs at or above the threshold. Rates are reported in percent;
undefined ratios (0/0) are reported as 0 and flagged as empty.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import OneClassOnly
from .models import SegmentLabel, TemporalSegment, Verdict

DEFAULT_IOU_THRESHOLD = 0.5


class ClassCounts(BaseModel):
    tp: int = 0
    fp: int = 0
    fn: int = 0


class MatchedPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    pred_index: int
    gt_index: int
    label: SegmentLabel
    iou: float


class MatchResult(BaseModel):
    pairs: list[MatchedPair]
    counts: dict[str, ClassCounts]
    boundary_matches: int = 0


class ClassMetrics(BaseModel):
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    empty: bool = False


class SegmentationReport(BaseModel):
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    per_class: dict[str, ClassMetrics]
    precision: float = Field(ge=0.0, le=100.0)
    recall: float = Field(ge=0.0, le=100.0)
    f1: float = Field(ge=0.0, le=100.0)
    pairs: list[MatchedPair] = Field(default_factory=list)
    boundary_matches: int = 0
    empty: bool = False


class LabeledDecision(BaseModel):
    """One row of a decisions file: ground-truth label plus the model's decision."""

    label: Verdict
    verdict: Verdict
    score: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class BiometricReport(BaseModel):
    top1_accuracy: float = Field(ge=0.0, le=100.0)
    apcer: float = Field(ge=0.0, le=100.0)
    bpcer: float = Field(ge=0.0, le=100.0)
    acer: float = Field(ge=0.0, le=100.0)
    n_attack: int
    n_bonafide: int

    @model_validator(mode="after")
    def _check_acer(self) -> "BiometricReport":
        if self.acer != (self.apcer + self.bpcer) / 2:
            raise ValueError("acer must equal the mean of apcer and bpcer")
        return self


def temporal_iou(a: TemporalSegment, b: TemporalSegment) -> float:
    intersection = max(0, min(a.offset, b.offset) - max(a.onset, b.onset))
    union = a.duration + b.duration - intersection
    return intersection / union if union > 0 else 0.0


def match_segments(
    pred: Sequence[TemporalSegment],
    gt: Sequence[TemporalSegment],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchResult:
    candidates: list[tuple[float, int, int, int, int]] = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            if p.label != g.label:
                continue
            iou = temporal_iou(p, g)
            if iou >= iou_threshold and iou > 0.0:
                candidates.append((-iou, p.onset, i, g.onset, j))
    candidates.sort()

    used_pred: set[int] = set()
    used_gt: set[int] = set()
    pairs: list[MatchedPair] = []
    for neg_iou, _, i, _, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        pairs.append(MatchedPair(pred_index=i, gt_index=j, label=pred[i].label, iou=-neg_iou))

    labels = sorted({s.label for s in pred} | {s.label for s in gt})
    counts: dict[str, ClassCounts] = {}
    for label in labels:
        tp = sum(1 for pair in pairs if pair.label == label)
        counts[label] = ClassCounts(
            tp=tp,
            fp=sum(1 for s in pred if s.label == label) - tp,
            fn=sum(1 for s in gt if s.label == label) - tp,
        )
    boundary = sum(1 for pair in pairs if pair.iou == iou_threshold)
    return MatchResult(pairs=pairs, counts=counts, boundary_matches=boundary)


def _ratio(numerator: int, denominator: int) -> float:
    return 100.0 * numerator / denominator if denominator else 0.0


def f1_score(precision: float, recall: float) -> float:
    total = precision + recall
    return 2.0 * precision * recall / total if total > 0 else 0.0


def segmentation_metrics(
    counts: dict[str, ClassCounts],
    *,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    pairs: Sequence[MatchedPair] = (),
    boundary_matches: int = 0,
) -> SegmentationReport:
    per_class: dict[str, ClassMetrics] = {}
    for label, c in sorted(counts.items()):
        precision = _ratio(c.tp, c.tp + c.fp)
        recall = _ratio(c.tp, c.tp + c.fn)
        per_class[label] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=f1_score(precision, recall),
            tp=c.tp,
            fp=c.fp,
            fn=c.fn,
            empty=(c.tp + c.fp + c.fn) == 0,
        )
    scored = list(per_class.values())
    n = len(scored)
    return SegmentationReport(
        iou_threshold=iou_threshold,
        per_class=per_class,
        precision=sum(m.precision for m in scored) / n if n else 0.0,
        recall=sum(m.recall for m in scored) / n if n else 0.0,
        f1=sum(m.f1 for m in scored) / n if n else 0.0,
        pairs=list(pairs),
        boundary_matches=boundary_matches,
        empty=all(m.empty for m in scored),
    )


def evaluate_segments(
    pred: Sequence[TemporalSegment],
    gt: Sequence[TemporalSegment],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    labels: Optional[Sequence[SegmentLabel]] = None,
) -> SegmentationReport:
    """match_segments followed by segmentation_metrics, optionally restricted to `labels`."""

    if labels is not None:
        pred = [s for s in pred if s.label in labels]
        gt = [s for s in gt if s.label in labels]
    result = match_segments(pred, gt, iou_threshold)
    counts = dict(result.counts)
    for label in labels or ():
        counts.setdefault(label, ClassCounts())
    return segmentation_metrics(
        counts,
        iou_threshold=iou_threshold,
        pairs=result.pairs,
        boundary_matches=result.boundary_matches,
    )


def biometric_metrics(decisions: Sequence[LabeledDecision]) -> BiometricReport:
    attacks = [d for d in decisions if d.label == "replay"]
    bonafide = [d for d in decisions if d.label == "genuine"]
    if not attacks or not bonafide:
        raise OneClassOnly("biometric metrics need attack and bona fide samples")
    apcer = _ratio(sum(1 for d in attacks if d.verdict == "genuine"), len(attacks))
    bpcer = _ratio(sum(1 for d in bonafide if d.verdict == "replay"), len(bonafide))
    correct = sum(1 for d in decisions if d.verdict == d.label)
    return BiometricReport(
        top1_accuracy=_ratio(correct, len(decisions)),
        apcer=apcer,
        bpcer=bpcer,
        acer=(apcer + bpcer) / 2,
        n_attack=len(attacks),
        n_bonafide=len(bonafide),
    )


def report_csv_row(report: Union[SegmentationReport, BiometricReport], clip: str = "") -> str:
    """Header plus one summary row for spreadsheet import."""

    if isinstance(report, SegmentationReport):
        counts = report.per_class.values()
        columns = {
            "clip": clip,
            "precision": f"{report.precision:.4f}",
            "recall": f"{report.recall:.4f}",
            "f1": f"{report.f1:.4f}",
            "tp": str(sum(m.tp for m in counts)),
            "fp": str(sum(m.fp for m in counts)),
            "fn": str(sum(m.fn for m in counts)),
        }
    else:
        columns = {
            "clip": clip,
            "top1_accuracy": f"{report.top1_accuracy:.4f}",
            "apcer": f"{report.apcer:.4f}",
            "bpcer": f"{report.bpcer:.4f}",
            "acer": f"{report.acer:.4f}",
        }
    return ",".join(columns) + "\n" + ",".join(columns.values()) + "\n"
