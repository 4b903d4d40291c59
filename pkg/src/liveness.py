"""Genuine-vs-replay classification and the challenge-response decision.

The classifier is a z-scored logistic model over the per-clip window
aggregates. Training is full-batch gradient descent from zero weights with a
fixed schedule, so identical inputs always produce identical parameters.
"""

from __future__ import annotations

import logging
from typing import Callable, Literal, Optional, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from .errors import InvalidParameter, MissingFeature, OneClassOnly
from .models import FEATURE_NAMES, ClipFeatures, LivenessDecision, SegmentLabel, TemporalSegment, Verdict

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 0.5
DEFAULT_ITERATIONS = 2000
DEFAULT_THRESHOLD = 0.5
DEFAULT_CHALLENGE_TIMEOUT_US = 3_000_000

ChallengeState = Literal["awaiting", "movement_ok", "passed", "failed"]
ChallengeReason = Literal["ok", "no_movement", "late_movement", "wrong_movement", "liveness_failed"]

T = TypeVar("T")


class LabeledFeatures(BaseModel):
    model_config = ConfigDict(frozen=True)

    features: ClipFeatures
    label: Verdict
    subject: Optional[str] = None


class FeatureClassifier(BaseModel):
    """Persisted as JSON {means, stds, weights, bias, threshold, feature_names}."""

    model_config = ConfigDict(frozen=True)

    feature_names: list[str]
    means: list[float]
    stds: list[float]
    weights: list[float]
    bias: float = 0.0
    threshold: float = Field(default=DEFAULT_THRESHOLD, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "FeatureClassifier":
        n = len(self.feature_names)
        if not (len(self.means) == len(self.stds) == len(self.weights) == n):
            raise ValueError("classifier vectors must match feature_names in length")
        if any(std <= 0 for std in self.stds):
            raise ValueError("feature standard deviations must be positive")
        return self

    def with_threshold(self, threshold: float) -> "FeatureClassifier":
        return self.model_copy(update={"threshold": threshold})


def train_classifier(
    samples: Sequence[LabeledFeatures],
    *,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    iterations: int = DEFAULT_ITERATIONS,
    threshold: float = DEFAULT_THRESHOLD,
) -> FeatureClassifier:
    labels = {sample.label for sample in samples}
    if labels != {"genuine", "replay"}:
        raise OneClassOnly(f"training needs both classes, got {sorted(labels) or 'none'}")
    if learning_rate <= 0 or iterations < 1:
        raise InvalidParameter("learning_rate and iterations must be positive")

    names: list[str] = []
    for name in FEATURE_NAMES:
        if all(sample.features.feature(name) is not None for sample in samples):
            names.append(name)
        else:
            logger.warning("dropping feature %s: missing in some training clips", name)

    raw = np.array(
        [[sample.features.feature(name) for name in names] for sample in samples],
        dtype=np.float64,
    ).reshape(len(samples), len(names))
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    usable = stds > 0
    for name in np.asarray(names)[~usable]:
        logger.warning("dropping feature %s: zero variance in training data", name)
    names = [name for name, ok in zip(names, usable) if ok]
    means, stds = means[usable], stds[usable]
    z = (raw[:, usable] - means) / stds

    target = np.array([1.0 if sample.label == "genuine" else 0.0 for sample in samples])
    weights = np.zeros(len(names))
    bias = 0.0
    n = float(len(samples))
    for _ in range(iterations):
        residual = expit(z @ weights + bias) - target
        weights = weights - learning_rate * (z.T @ residual) / n
        bias = bias - learning_rate * float(residual.sum()) / n

    return FeatureClassifier(
        feature_names=names,
        means=means.tolist(),
        stds=stds.tolist(),
        weights=weights.tolist(),
        bias=float(bias),
        threshold=threshold,
    )


def classify(clf: FeatureClassifier, features: ClipFeatures) -> LivenessDecision:
    values = []
    for name in clf.feature_names:
        value = features.feature(name)
        if value is None:
            raise MissingFeature(name)
        values.append(value)
    z = (np.asarray(values, dtype=np.float64) - np.asarray(clf.means)) / np.asarray(clf.stds)
    score = float(expit(float(np.dot(np.asarray(clf.weights, dtype=np.float64), z)) + clf.bias))
    verdict: Verdict = "genuine" if score >= clf.threshold else "replay"
    return LivenessDecision(verdict=verdict, score=score)


class ChallengeSession(BaseModel):
    model_config = ConfigDict(frozen=True)

    challenge: SegmentLabel
    issued_at: int
    deadline: int
    state: ChallengeState = "awaiting"

    @model_validator(mode="after")
    def _check_window(self) -> "ChallengeSession":
        if self.deadline <= self.issued_at:
            raise ValueError("challenge deadline must be after issued_at")
        return self

    def advance(self, state: ChallengeState) -> "ChallengeSession":
        return self.model_copy(update={"state": state})


class ChallengeOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: Literal["passed", "failed"]
    reason: ChallengeReason
    session: ChallengeSession


def open_challenge(
    challenge: SegmentLabel, issued_at: int, timeout: int = DEFAULT_CHALLENGE_TIMEOUT_US
) -> ChallengeSession:
    return ChallengeSession(challenge=challenge, issued_at=issued_at, deadline=issued_at + timeout)


def run_challenge(
    session: ChallengeSession,
    movements: Sequence[TemporalSegment],
    liveness: LivenessDecision,
) -> ChallengeOutcome:
    """Pass iff the requested movement starts inside the window and the clip is genuine."""

    def in_window(segment: TemporalSegment) -> bool:
        return session.issued_at <= segment.onset <= session.deadline

    requested = [m for m in movements if m.label == session.challenge]
    if any(in_window(m) for m in requested):
        moved = session.advance("movement_ok")
        if liveness.verdict == "genuine":
            return ChallengeOutcome(status="passed", reason="ok", session=moved.advance("passed"))
        return ChallengeOutcome(
            status="failed", reason="liveness_failed", session=moved.advance("failed")
        )

    if any(m.onset > session.deadline for m in requested):
        reason: ChallengeReason = "late_movement"
    elif any(in_window(m) for m in movements):
        reason = "wrong_movement"
    else:
        reason = "no_movement"
    return ChallengeOutcome(status="failed", reason=reason, session=session.advance("failed"))


def subject_split(
    records: Sequence[T],
    subject_of: Callable[[T], str],
    *,
    ratio: float = 0.8,
    seed: int = 0,
) -> tuple[list[T], list[T]]:
    """Subject-disjoint train/test split; subjects are shuffled with `seed`."""

    if not 0.0 < ratio < 1.0:
        raise InvalidParameter(f"split ratio must be in (0, 1), got {ratio}")
    subjects = sorted({subject_of(record) for record in records})
    if len(subjects) < 2:
        raise InvalidParameter("a subject-disjoint split needs at least two subjects")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_train = min(max(int(round(ratio * len(subjects))), 1), len(subjects) - 1)
    train_subjects = {subjects[i] for i in order[:n_train]}
    train = [r for r in records if subject_of(r) in train_subjects]
    test = [r for r in records if subject_of(r) not in train_subjects]
    return train, test
