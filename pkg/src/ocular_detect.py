"""Blink and saccade segmentation from activity profiles.

Blinks: the smoothed ON-minus-OFF activity swings positive while the eyelid
closes and negative while it reopens. Positive-to-negative zero crossings are
reopening candidates; a candidate survives when it sits between a prominent
positive peak on its left and a prominent negative peak on its right, both
with a clear polarity imbalance.

Saccades: after blinks are interpolated away, saccades are the remaining
prominent peaks of the polarity-agnostic activity whose half-prominence
width lies inside the configured band.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks, peak_widths

from .errors import EmptyInput, EmptySeries, GridMismatch, InvalidParameter, NotUniform
from .event_core import EventStream
from .models import BlinkParams, SaccadeParams, TemporalSegment
from .representations import (
    DEFAULT_ACTIVITY_TAU_US,
    ActivitySeries,
    activity_profile,
    resample_activity,
)

logger = logging.getLogger(__name__)

DEFAULT_DT_US = 2_000
KERNEL_TRUNCATE = 4.0
BLINK_WINDOW_PERCENTILE = 95.0


def _require_uniform(series: ActivitySeries) -> int:
    if series.uniform_dt is None:
        raise NotUniform(f"{series.channel!r} activity must be resampled first")
    return series.uniform_dt


def _smooth(values: np.ndarray, sigma_us: int, dt: int) -> np.ndarray:
    if values.size == 0:
        return values.astype(np.float64)
    return gaussian_filter1d(
        values.astype(np.float64), sigma_us / dt, mode="reflect", truncate=KERNEL_TRUNCATE
    )


def gaussian_smooth(series: ActivitySeries, sigma: int) -> ActivitySeries:
    dt = _require_uniform(series)
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    return series.with_values(_smooth(series.a, sigma, dt))


def _merge_overlapping(candidates: list[tuple[TemporalSegment, float]]) -> list[TemporalSegment]:
    """Resolve overlaps by keeping the better-ranked segment; output sorted and disjoint."""

    kept: list[tuple[TemporalSegment, float]] = []
    for segment, rank in sorted(candidates, key=lambda item: (item[0].onset, item[0].offset)):
        if kept and segment.onset < kept[-1][0].offset:
            if rank > kept[-1][1]:
                kept[-1] = (segment, rank)
            continue
        kept.append((segment, rank))
    return [segment for segment, _ in kept]


def _strongest_disjoint(
    candidates: list[tuple[TemporalSegment, tuple[float, int]]],
) -> list[TemporalSegment]:
    """Keep each candidate that no overlapping candidate outranks.

    The kept set only shrinks as weaker candidates are removed upstream.
    """

    kept = [
        segment
        for segment, rank in candidates
        if not any(
            other_rank > rank and other.onset < segment.offset and segment.onset < other.offset
            for other, other_rank in candidates
        )
    ]
    return sorted(kept, key=lambda s: (s.onset, s.offset))


@dataclass(frozen=True)
class _Extremum:
    position: int
    sign: int
    prominence: float
    width: float


def _qualifying_extrema(
    signal: np.ndarray,
    balance: np.ndarray,
    *,
    sign: int,
    prominence: float,
    min_balance: float,
    wlen: int,
) -> list[_Extremum]:
    oriented = signal * sign
    peaks, props = find_peaks(oriented, prominence=prominence, wlen=wlen)
    keep = balance[peaks] * sign >= min_balance
    if not keep.any():
        return []
    peaks = peaks[keep]
    prominence_data = (
        props["prominences"][keep],
        props["left_bases"][keep],
        props["right_bases"][keep],
    )
    widths = peak_widths(oriented, peaks, rel_height=0.5, prominence_data=prominence_data)[0]
    return [
        _Extremum(position=int(pos), sign=sign, prominence=float(prom), width=float(width))
        for pos, prom, width in zip(peaks, prominence_data[0], widths)
    ]


def detect_blinks(
    a_on: ActivitySeries,
    a_off: ActivitySeries,
    params: Optional[BlinkParams] = None,
) -> list[TemporalSegment]:
    params = params or BlinkParams()
    dt = _require_uniform(a_on)
    if a_off.uniform_dt != dt or not np.array_equal(a_on.t, a_off.t):
        raise GridMismatch("ON and OFF activity must share one uniform grid")
    if len(a_on) < 3:
        return []

    raw = _smooth(a_on.a - a_off.a, params.gaussian_sigma, dt)
    total = _smooth(a_on.a + a_off.a, params.gaussian_sigma, dt)
    scale = float(np.max(np.abs(raw)))
    if scale <= 0.0:
        return []
    diff = raw / scale
    balance = np.divide(raw, total, out=np.zeros_like(raw), where=total > 0)

    window = max(1, int(round(params.search_window / dt)))
    wlen = 2 * window + 1
    extrema = _qualifying_extrema(
        diff, balance, sign=1, prominence=params.pos_prominence,
        min_balance=params.min_balance, wlen=wlen,
    ) + _qualifying_extrema(
        diff, balance, sign=-1, prominence=params.neg_prominence,
        min_balance=params.min_balance, wlen=wlen,
    )
    if not extrema:
        return []
    extrema.sort(key=lambda e: e.position)
    positions = np.array([e.position for e in extrema])

    crossings = np.flatnonzero((diff[:-1] > 0) & (diff[1:] <= 0))
    # (left, right) extremum pair -> latest crossing between them
    pairs: dict[tuple[int, int], float] = {}
    for i in crossings:
        fraction = diff[i] / (diff[i] - diff[i + 1])
        crossing = i + fraction
        after = int(np.searchsorted(positions, crossing, side="right"))
        if after == 0 or after == len(extrema):
            continue
        left, right = extrema[after - 1], extrema[after]
        if left.sign != 1 or right.sign != -1:
            continue
        if crossing - left.position > window or right.position - crossing > window:
            continue
        pairs[(after - 1, after)] = crossing

    t0 = int(a_on.t[0])
    candidates: list[tuple[TemporalSegment, float]] = []
    for (li, ri), crossing in pairs.items():
        left, right = extrema[li], extrema[ri]
        summed = left.prominence + right.prominence
        onset = t0 + int(round((crossing - left.width) * dt))
        offset = t0 + int(round((crossing + right.width) * dt))
        if offset <= onset:
            continue
        segment = TemporalSegment(
            onset=onset, offset=offset, label="blink", score=min(1.0, summed / 2.0)
        )
        candidates.append((segment, summed))
    return _merge_overlapping(candidates)


def fit_blink_window(training_durations: Sequence[int]) -> int:
    """Search window = 95th percentile (linear interpolation) of blink durations."""

    if len(training_durations) == 0:
        raise EmptyInput("no training blink durations")
    return int(round(float(np.percentile(np.asarray(training_durations, dtype=np.float64),
                                         BLINK_WINDOW_PERCENTILE))))


def _suppression_ranges(t: np.ndarray, blinks: Sequence[TemporalSegment]) -> list[tuple[int, int]]:
    """Anchor index pairs around each blink, merged where they overlap."""

    n = t.shape[0]
    ranges: list[tuple[int, int]] = []
    for segment in blinks:
        lo = int(np.searchsorted(t, segment.onset, side="left"))
        hi = int(np.searchsorted(t, segment.offset, side="right")) - 1
        lo, hi = max(lo, 0), min(hi, n - 1)
        if lo > hi:
            continue
        ranges.append((max(lo - 1, 0), min(hi + 1, n - 1)))
    ranges.sort()
    merged: list[tuple[int, int]] = []
    for start, stop in ranges:
        if merged and start < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], stop))
        else:
            merged.append((start, stop))
    return merged


def suppress_blinks(series: ActivitySeries, blinks: Sequence[TemporalSegment]) -> ActivitySeries:
    """Replace activity inside blinks by a straight line between the boundary samples."""

    _require_uniform(series)
    if not blinks or len(series) == 0:
        return series
    values = series.a.copy()
    for start, stop in _suppression_ranges(series.t, blinks):
        if stop <= start:
            continue
        steps = np.arange(1, stop - start, dtype=np.float64) / (stop - start)
        values[start + 1 : stop] = values[start] + (values[stop] - values[start]) * steps
    return series.with_values(values)


def _widen(segment: TemporalSegment, margin: int) -> TemporalSegment:
    return segment.model_copy(
        update={"onset": segment.onset - margin, "offset": segment.offset + margin}
    )


def detect_saccades(
    series: ActivitySeries,
    blinks: Sequence[TemporalSegment] = (),
    params: Optional[SaccadeParams] = None,
) -> list[TemporalSegment]:
    params = params or SaccadeParams()
    dt = _require_uniform(series)
    if len(series) == 0:
        raise EmptySeries("saccade detection needs a non-empty activity series")

    suppressed = suppress_blinks(series, [_widen(b, params.blink_margin) for b in blinks])
    peak = float(np.max(suppressed.a))
    if peak <= 0.0:
        return []
    normalized = suppressed.a / peak
    baseline = float(np.median(normalized))

    peaks, props = find_peaks(normalized, prominence=params.peak_threshold)
    if peaks.size == 0:
        return []
    prominence_data = (props["prominences"], props["left_bases"], props["right_bases"])
    widths, _, left_ips, right_ips = peak_widths(
        normalized, peaks, rel_height=0.5, prominence_data=prominence_data
    )

    t0 = int(series.t[0])
    candidates: list[tuple[TemporalSegment, tuple[float, int]]] = []
    ranked = zip(peaks, props["prominences"], widths, left_ips, right_ips)
    for index, prominence, width, left, right in ranked:
        width_us = width * dt
        if width_us < params.min_width or width_us > params.max_width:
            continue
        height = float(normalized[index])
        if height < params.baseline_ratio * baseline:
            continue
        onset = t0 + int(round(left * dt))
        offset = t0 + int(round(right * dt))
        if offset - onset < max(params.min_segment, 1):
            continue
        segment = TemporalSegment(onset=onset, offset=offset, label="saccade", score=height)
        candidates.append((segment, (float(prominence), -int(index))))
    return _strongest_disjoint(candidates)


@dataclass(frozen=True)
class ActivityBundle:
    a_on: ActivitySeries
    a_off: ActivitySeries
    a_all: ActivitySeries


def activity_bundle(
    stream: EventStream,
    *,
    tau: int = DEFAULT_ACTIVITY_TAU_US,
    mu: float = 1.0,
    dt: int = DEFAULT_DT_US,
) -> Optional[ActivityBundle]:
    """ON, OFF and ALL activity on one grid spanning the stream; None if empty."""

    if len(stream) == 0:
        return None
    span = {"t_start": int(stream.t[0]), "t_end": int(stream.t[-1])}
    a_all = resample_activity(activity_profile(stream, "all", tau, mu), dt, **span)
    resampled = {}
    for channel in ("on", "off"):
        sparse = activity_profile(stream, channel, tau, mu)
        if sparse.empty_channel:
            resampled[channel] = ActivitySeries(
                channel=channel,
                tau=a_all.tau,
                mu=a_all.mu,
                t=a_all.t,
                a=np.zeros_like(a_all.a),
                uniform_dt=dt,
                empty_channel=True,
            )
        else:
            resampled[channel] = resample_activity(sparse, dt, **span)
    return ActivityBundle(a_on=resampled["on"], a_off=resampled["off"], a_all=a_all)


def detect_movements(
    stream: EventStream,
    *,
    tau: int = DEFAULT_ACTIVITY_TAU_US,
    mu: float = 1.0,
    dt: int = DEFAULT_DT_US,
    blink_params: Optional[BlinkParams] = None,
    saccade_params: Optional[SaccadeParams] = None,
) -> list[TemporalSegment]:
    """Blink detection, then saccade detection on the blink-suppressed activity."""

    bundle = activity_bundle(stream, tau=tau, mu=mu, dt=dt)
    if bundle is None:
        return []
    return movements_from_bundle(bundle, blink_params, saccade_params)


def movements_from_bundle(
    bundle: ActivityBundle,
    blink_params: Optional[BlinkParams] = None,
    saccade_params: Optional[SaccadeParams] = None,
) -> list[TemporalSegment]:
    blinks = detect_blinks(bundle.a_on, bundle.a_off, blink_params)
    saccades = detect_saccades(bundle.a_all, blinks, saccade_params)
    logger.debug("detected %d blinks and %d saccades", len(blinks), len(saccades))
    return sorted(blinks + saccades, key=lambda s: (s.onset, s.offset))
