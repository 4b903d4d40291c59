"""Seeded synthetic clips: genuine ocular activity and display replays of it.

Genuine clips combine homogeneous Poisson background noise over the sensor
with scripted bursts inside the eye ROI:

* blink: ON-dominant closing burst, a short quiet plateau, then a longer and
  weaker OFF-dominant reopening burst
* saccade: one short burst with balanced polarity

Replays push every event to the next display frame boundary, collapse
duplicates a frame cannot express, and thin the result to model a dimmer
screen. All randomness comes from `numpy.random.default_rng(seed)`.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import InvalidParameter, OverlappingMovements
from .event_core import EventStream
from .models import US_PER_S, RegionOfInterest, TemporalSegment

MIN_SACCADE_US = 20_000
MAX_SACCADE_US = 150_000


def _default_eye_roi() -> RegionOfInterest:
    return RegionOfInterest(x0=16, y0=12, w=32, h=24, label="left_eye")


class ClipSpec(BaseModel):
    """Scripted genuine clip. Times and durations in µs, rates in events/s."""

    model_config = ConfigDict(frozen=True)

    duration: int = Field(default=3_000_000, gt=0)
    width: int = Field(default=64, gt=0)
    height: int = Field(default=48, gt=0)
    eye_roi: RegionOfInterest = Field(default_factory=_default_eye_roi)
    blink_times: list[int] = Field(default_factory=list)
    blink_durations: list[int] = Field(default_factory=list)
    saccade_times: list[int] = Field(default_factory=list)
    saccade_durations: list[int] = Field(default_factory=list)
    noise_rate: float = Field(default=20.0, ge=0.0)
    blink_rate: float = Field(default=40_000.0, ge=0.0)
    saccade_rate: float = Field(default=40_000.0, ge=0.0)
    annotation_margin: int = Field(default=10_000, ge=0)
    closing_fraction: float = Field(default=0.35, gt=0.0, lt=1.0)
    plateau_fraction: float = Field(default=0.12, ge=0.0, lt=1.0)
    closing_off_ratio: float = Field(default=0.4, ge=0.0)
    reopening_on_ratio: float = Field(default=0.2, ge=0.0)
    reopening_off_ratio: float = Field(default=0.6, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_script(self) -> "ClipSpec":
        if len(self.blink_times) != len(self.blink_durations):
            raise ValueError("blink_times and blink_durations differ in length")
        if len(self.saccade_times) != len(self.saccade_durations):
            raise ValueError("saccade_times and saccade_durations differ in length")
        if self.closing_fraction + self.plateau_fraction >= 1.0:
            raise ValueError("closing and plateau fractions leave no reopening phase")
        if any(d <= 0 for d in self.blink_durations):
            raise ValueError("blink durations must be positive")
        if any(not MIN_SACCADE_US <= d <= MAX_SACCADE_US for d in self.saccade_durations):
            raise ValueError("saccade durations must lie in [20 ms, 150 ms]")
        for start, length in self.movements_raw():
            if start < 0 or start + length > self.duration:
                raise ValueError(f"movement at {start} us does not fit in the clip")
        roi = self.eye_roi
        if roi.x0 + roi.w > self.width or roi.y0 + roi.h > self.height:
            raise ValueError("eye ROI exceeds the sensor geometry")
        return self

    def movements_raw(self) -> list[tuple[int, int]]:
        return list(zip(self.blink_times, self.blink_durations)) + list(
            zip(self.saccade_times, self.saccade_durations)
        )

    def movements(self) -> list[tuple[Literal["blink", "saccade"], int, int]]:
        """(label, onset, duration) sorted by onset.

        Raises if two movements overlap, or sit so close that their annotation
        margins would make the ground-truth segments overlap.
        """

        scripted = [("blink", t, d) for t, d in zip(self.blink_times, self.blink_durations)]
        scripted += [("saccade", t, d) for t, d in zip(self.saccade_times, self.saccade_durations)]
        scripted.sort(key=lambda item: item[1])
        for (_, t_a, d_a), (_, t_b, _) in zip(scripted, scripted[1:]):
            if t_b < t_a + d_a:
                raise OverlappingMovements(f"movement at {t_b} us overlaps the one at {t_a} us")
            if t_b - (t_a + d_a) < 2 * self.annotation_margin:
                raise OverlappingMovements(
                    f"movement at {t_b} us is closer than twice the annotation margin "
                    f"({2 * self.annotation_margin} us) to the one at {t_a} us"
                )
        return scripted  # type: ignore[return-value]


class ReplaySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    fps: float = Field(default=50.0, gt=0.0)
    brightness_factor: float = Field(default=0.6, gt=0.0, le=1.0)
    jitter: int = Field(default=0, ge=0)
    seed: int = 0

    @property
    def frame_period(self) -> float:
        return US_PER_S / self.fps


class _Events:
    """Column accumulator for generated events."""

    def __init__(self) -> None:
        self.columns: list[tuple[np.ndarray, ...]] = []

    def add(self, t: np.ndarray, x: np.ndarray, y: np.ndarray, p: np.ndarray) -> None:
        self.columns.append((t, x, y, p))

    def build(self, width: int, height: int) -> EventStream:
        if not self.columns:
            return EventStream.empty(width, height)
        t, x, y, p = (np.concatenate(parts) for parts in zip(*self.columns))
        order = np.argsort(t, kind="stable")
        return EventStream.from_arrays(width, height, t[order], x[order], y[order], p[order])


def _burst(
    rng: np.random.Generator,
    events: _Events,
    roi: RegionOfInterest,
    start: int,
    stop: int,
    rate: float,
    polarity: int,
) -> None:
    if stop <= start or rate <= 0:
        return
    n = int(rng.poisson(rate * (stop - start) / US_PER_S))
    events.add(
        rng.integers(start, stop, n),
        rng.integers(roi.x0, roi.x0 + roi.w, n),
        rng.integers(roi.y0, roi.y0 + roi.h, n),
        np.full(n, polarity, dtype=np.int64),
    )


def synth_genuine(spec: ClipSpec) -> tuple[EventStream, list[TemporalSegment]]:
    movements = spec.movements()
    rng = np.random.default_rng(spec.seed)
    events = _Events()

    n_noise = int(rng.poisson(spec.noise_rate * spec.width * spec.height * spec.duration / US_PER_S))
    if n_noise:
        events.add(
            rng.integers(0, spec.duration, n_noise),
            rng.integers(0, spec.width, n_noise),
            rng.integers(0, spec.height, n_noise),
            rng.choice(np.array([-1, 1]), n_noise),
        )

    roi = spec.eye_roi
    truth: list[TemporalSegment] = []
    for label, onset, length in movements:
        offset = onset + length
        if label == "blink":
            closing_end = onset + int(round(spec.closing_fraction * length))
            reopening_start = closing_end + int(round(spec.plateau_fraction * length))
            rate = spec.blink_rate
            _burst(rng, events, roi, onset, closing_end, rate, 1)
            _burst(rng, events, roi, onset, closing_end, rate * spec.closing_off_ratio, -1)
            _burst(rng, events, roi, reopening_start, offset, rate * spec.reopening_on_ratio, 1)
            _burst(rng, events, roi, reopening_start, offset, rate * spec.reopening_off_ratio, -1)
        else:
            half = spec.saccade_rate / 2
            _burst(rng, events, roi, onset, offset, half, 1)
            _burst(rng, events, roi, onset, offset, half, -1)
        truth.append(
            TemporalSegment(
                onset=max(0, onset - spec.annotation_margin),
                offset=min(spec.duration, offset + spec.annotation_margin),
                label=label,
            )
        )
    return events.build(spec.width, spec.height), truth


def synth_replay(genuine: EventStream, spec: ReplaySpec) -> EventStream:
    if len(genuine) == 0:
        return genuine
    period = spec.frame_period
    frame = np.ceil(genuine.t / period).astype(np.int64)
    t_frame = np.floor(frame * period + 0.5).astype(np.int64)

    key = ((frame * genuine.height + genuine.y) * genuine.width + genuine.x) * 2 + (genuine.p > 0)
    _, first = np.unique(key, return_index=True)
    kept = np.sort(first)

    rng = np.random.default_rng(spec.seed)
    kept = kept[rng.random(kept.size) < spec.brightness_factor]
    t = t_frame[kept]
    if spec.jitter > 0:
        t = t + rng.integers(0, spec.jitter + 1, kept.size)
    order = np.argsort(t, kind="stable")
    return EventStream.from_arrays(
        genuine.width,
        genuine.height,
        t[order],
        genuine.x[kept][order],
        genuine.y[kept][order],
        genuine.p[kept][order],
    )


def default_clip_spec(seed: int = 0, **overrides: object) -> ClipSpec:
    """Three blinks and two saccades in a 3 s clip."""

    return ClipSpec(
        blink_times=[500_000, 1_600_000, 2_500_000],
        blink_durations=[150_000, 180_000, 140_000],
        saccade_times=[1_100_000, 2_100_000],
        saccade_durations=[40_000, 50_000],
        seed=seed,
        **overrides,
    )


def random_clip_spec(
    seed: int,
    *,
    duration: int = 4_000_000,
    blinks: tuple[int, int] = (1, 4),
    saccades: tuple[int, int] = (0, 3),
    blink_duration: tuple[int, int] = (120_000, 220_000),
    saccade_duration: tuple[int, int] = (30_000, 80_000),
    min_gap: int = 200_000,
    edge: int = 300_000,
    **overrides: object,
) -> ClipSpec:
    """Random script of disjoint movements separated by at least `min_gap`."""

    rng = np.random.default_rng(seed)
    n_blinks = int(rng.integers(blinks[0], blinks[1] + 1))
    n_saccades = int(rng.integers(saccades[0], saccades[1] + 1))
    kinds = ["blink"] * n_blinks + ["saccade"] * n_saccades
    rng.shuffle(kinds)
    lengths = [
        int(rng.integers(*(blink_duration if kind == "blink" else saccade_duration)))
        for kind in kinds
    ]
    free = duration - 2 * edge - sum(lengths) - max(len(kinds) - 1, 0) * min_gap
    if free < 0:
        raise InvalidParameter("movements do not fit in the requested clip duration")
    cuts = np.sort(rng.integers(0, free + 1, len(kinds)))

    script: dict[str, list[int]] = {
        "blink_times": [], "blink_durations": [], "saccade_times": [], "saccade_durations": [],
    }
    cursor, previous_cut = edge, 0
    for kind, length, cut in zip(kinds, lengths, cuts.tolist()):
        start = cursor + (cut - previous_cut)
        previous_cut = cut
        script[f"{kind}_times"].append(start)
        script[f"{kind}_durations"].append(length)
        cursor = start + length + min_gap
    return ClipSpec(duration=duration, seed=seed, **script, **overrides)
