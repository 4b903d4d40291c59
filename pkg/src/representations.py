"""Temporal and spatio-temporal representations of event streams.

* activity profiles: event-driven exponential moving average per polarity
* uniform resampling of activity profiles
* time surfaces (surface of active events)
* voxel grids of binned counts
* fixed-window statistics, including the per-pixel inter-event interval
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySeries, EmptyStream, InvalidInterval, InvalidParameter, NoWindows
from .event_core import EventStream
from .models import US_PER_S, Channel, ClipFeatures, RoiLabel, WindowStats

logger = logging.getLogger(__name__)

DEFAULT_ACTIVITY_TAU_US = 10_000
DEFAULT_SAE_TAU_US = 66_000
DEFAULT_WINDOW_US = 33_000


def _readonly(values: np.ndarray, dtype: str) -> np.ndarray:
    array = np.ascontiguousarray(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ActivitySeries:
    channel: Channel
    tau: int
    mu: float
    t: np.ndarray
    a: np.ndarray
    uniform_dt: Optional[int] = None
    empty_channel: bool = False

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def samples(self) -> list[tuple[int, float]]:
        return list(zip(self.t.tolist(), self.a.tolist()))

    def with_values(self, values: np.ndarray) -> "ActivitySeries":
        """Same grid and metadata, new values."""

        return ActivitySeries(
            channel=self.channel,
            tau=self.tau,
            mu=self.mu,
            t=self.t,
            a=_readonly(values, "float64"),
            uniform_dt=self.uniform_dt,
            empty_channel=self.empty_channel,
        )


@dataclass(frozen=True, eq=False)
class SAEFrame:
    width: int
    height: int
    t_ref: int
    tau: int
    values_pos: np.ndarray
    values_neg: np.ndarray


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    t_bins: int
    height: int
    width: int
    counts: np.ndarray
    t_start: int
    t_end: int
    channels: int = 2

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _channel_mask(stream: EventStream, channel: Channel) -> np.ndarray:
    if channel == "on":
        return stream.p > 0
    if channel == "off":
        return stream.p < 0
    if channel == "all":
        return np.ones(len(stream), dtype=bool)
    raise InvalidParameter(f"unknown channel {channel!r}")


def activity_profile(
    stream: EventStream,
    channel: Channel = "all",
    tau: int = DEFAULT_ACTIVITY_TAU_US,
    mu: float = 1.0,
) -> ActivitySeries:
    """Event-driven activity A(t_i) = A(t_u) exp(-(t_i - t_u)/tau) + 1/mu.

    Events sharing a timestamp collapse into one sample carrying all of their
    increments, so sample times stay strictly increasing.
    """

    if tau <= 0 or mu <= 0:
        raise InvalidParameter(f"tau and mu must be positive (tau={tau}, mu={mu})")
    times = stream.t[_channel_mask(stream, channel)]
    if times.size == 0:
        logger.info("activity channel %r has no events", channel)
        return ActivitySeries(
            channel=channel,
            tau=int(tau),
            mu=float(mu),
            t=_readonly(np.empty(0), "int64"),
            a=_readonly(np.empty(0), "float64"),
            empty_channel=True,
        )

    unique_t, counts = np.unique(times, return_counts=True)
    increments = (counts / mu).tolist()
    decays = np.exp(-np.diff(unique_t) / tau).tolist()
    values = [0.0] * len(increments)
    level = increments[0]
    values[0] = level
    for i in range(1, len(increments)):
        level = level * decays[i - 1] + increments[i]
        values[i] = level
    return ActivitySeries(
        channel=channel,
        tau=int(tau),
        mu=float(mu),
        t=_readonly(unique_t, "int64"),
        a=_readonly(np.asarray(values), "float64"),
    )


def activity_at(series: ActivitySeries, times: Sequence[int] | np.ndarray) -> np.ndarray:
    """Continuous-time activity: 0 before the first sample, decay from the latest one."""

    query = np.asarray(times, dtype=np.int64)
    if len(series) == 0:
        return np.zeros(query.shape, dtype=np.float64)
    index = np.searchsorted(series.t, query, side="right") - 1
    safe = np.clip(index, 0, None)
    decayed = series.a[safe] * np.exp(-(query - series.t[safe]) / series.tau)
    return np.where(index >= 0, decayed, 0.0)


def resample_activity(
    series: ActivitySeries,
    dt: int,
    *,
    t_start: Optional[int] = None,
    t_end: Optional[int] = None,
) -> ActivitySeries:
    """Linear interpolation of the sparse samples onto a uniform grid.

    The grid runs from `t_start` (default: first sample) in steps of `dt` up
    to the first node at or after `t_end` (default: last sample). Outside the
    sampled span the activity is 0 before and decays exponentially after.
    """

    if dt <= 0:
        raise InvalidParameter(f"dt must be positive, got {dt}")
    if len(series) == 0:
        raise EmptySeries(f"cannot resample empty {series.channel!r} activity")
    start = int(series.t[0]) if t_start is None else int(t_start)
    end = int(series.t[-1]) if t_end is None else int(t_end)
    if end < start:
        raise InvalidInterval(f"resampling span [{start}, {end}] is empty")

    n = (end - start + dt - 1) // dt + 1
    grid = start + dt * np.arange(n, dtype=np.int64)
    values = np.interp(grid, series.t, series.a)
    after = grid > series.t[-1]
    if after.any():
        values[after] = activity_at(series, grid[after])
    values[grid < series.t[0]] = 0.0
    return ActivitySeries(
        channel=series.channel,
        tau=series.tau,
        mu=series.mu,
        t=_readonly(grid, "int64"),
        a=_readonly(values, "float64"),
        uniform_dt=int(dt),
        empty_channel=series.empty_channel,
    )


def _latest_timestamps(stream: EventStream, mask: np.ndarray) -> np.ndarray:
    latest = np.full((stream.height, stream.width), -1, dtype=np.int64)
    np.maximum.at(latest, (stream.y[mask], stream.x[mask]), stream.t[mask])
    return latest


def sae_frame(stream: EventStream, t_ref: int, tau: int = DEFAULT_SAE_TAU_US) -> SAEFrame:
    """Time surface at `t_ref`; events after `t_ref` are ignored."""

    if tau <= 0:
        raise InvalidParameter(f"tau must be positive, got {tau}")
    past = stream.t <= t_ref
    maps = []
    for polarity_mask in (stream.p > 0, stream.p < 0):
        latest = _latest_timestamps(stream, past & polarity_mask)
        populated = latest >= 0
        surface = np.zeros(latest.shape, dtype=np.float64)
        surface[populated] = np.exp(-(t_ref - latest[populated]) / tau)
        surface.setflags(write=False)
        maps.append(surface)
    return SAEFrame(
        width=stream.width,
        height=stream.height,
        t_ref=int(t_ref),
        tau=int(tau),
        values_pos=maps[0],
        values_neg=maps[1],
    )


def voxel_grid(stream: EventStream, t_bins: int) -> VoxelGrid:
    """Count events into a [T, 2, H, W] grid; channel 0 is ON, 1 is OFF."""

    if t_bins < 1:
        raise InvalidParameter(f"t_bins must be >= 1, got {t_bins}")
    if len(stream) == 0:
        raise EmptyStream("cannot build a voxel grid from an empty stream")
    t_start, t_end = int(stream.t[0]), int(stream.t[-1])
    bins = ((stream.t - t_start) * t_bins) // (t_end - t_start + 1)
    channel = (stream.p < 0).astype(np.int64)
    h, w = stream.height, stream.width
    flat = ((bins * 2 + channel) * h + stream.y) * w + stream.x
    counts = np.bincount(flat, minlength=t_bins * 2 * h * w).reshape(t_bins, 2, h, w)
    counts.setflags(write=False)
    return VoxelGrid(
        t_bins=int(t_bins),
        height=h,
        width=w,
        counts=counts,
        t_start=t_start,
        t_end=t_end,
    )


def median_pixel_iei(
    t: np.ndarray, x: np.ndarray, y: np.ndarray, p: np.ndarray, width: int
) -> Optional[float]:
    """Median over pixels of each pixel's median inter-event interval.

    Intervals are taken between consecutive events of the same pixel, of
    either polarity. Events sharing a timestamp at one pixel count once, so
    zero intervals never enter the median. Pixels without a positive
    interval contribute nothing.
    """

    if t.size < 2:
        return None
    key = y.astype(np.int64) * width + x
    order = np.argsort(key, kind="stable")
    keys = key[order]
    gaps = np.diff(t[order])
    same = (keys[1:] == keys[:-1]) & (gaps > 0)
    if not same.any():
        return None
    intervals = gaps[same]
    owners = keys[1:][same]
    _, starts = np.unique(owners, return_index=True)
    per_pixel = [float(np.median(chunk)) for chunk in np.split(intervals, starts[1:])]
    return float(np.median(per_pixel))


def window_stats(stream: EventStream, window_len: int = DEFAULT_WINDOW_US) -> list[WindowStats]:
    """Non-overlapping windows aligned to the first event, covering [t_first, t_last]."""

    if window_len <= 0:
        raise InvalidParameter(f"window_len must be positive, got {window_len}")
    if len(stream) == 0:
        raise EmptyStream("cannot compute window statistics of an empty stream")

    t0 = int(stream.t[0])
    n_windows = (int(stream.t[-1]) - t0) // window_len + 1
    edges = t0 + window_len * np.arange(n_windows + 1, dtype=np.int64)
    bounds = np.searchsorted(stream.t, edges, side="left")
    positives = np.concatenate(([0], np.cumsum(stream.p > 0)))
    seconds = window_len / US_PER_S

    windows: list[WindowStats] = []
    for k in range(n_windows):
        lo, hi = int(bounds[k]), int(bounds[k + 1])
        count = hi - lo
        n_pos = int(positives[hi] - positives[lo])
        balance = (2 * n_pos - count) / count if count else None
        windows.append(
            WindowStats(
                t_start=int(edges[k]),
                window_len=int(window_len),
                event_rate=count / seconds,
                polarity_balance=balance,
                median_pixel_iei=median_pixel_iei(
                    stream.t[lo:hi], stream.x[lo:hi], stream.y[lo:hi], stream.p[lo:hi], stream.width
                ),
            )
        )
    return windows


def _mean_std(values: list[float]) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())


def clip_features(windows: Sequence[WindowStats], roi_label: RoiLabel = "face") -> ClipFeatures:
    """Mean and population standard deviation of each window statistic."""

    if not windows:
        raise NoWindows("clip has no windows to aggregate")
    rate_mean, rate_std = _mean_std([w.event_rate for w in windows])
    balance_mean, balance_std = _mean_std(
        [w.polarity_balance for w in windows if w.polarity_balance is not None]
    )
    iei_mean, iei_std = _mean_std(
        [w.median_pixel_iei for w in windows if w.median_pixel_iei is not None]
    )
    return ClipFeatures(
        roi_label=roi_label,
        event_rate_mean=rate_mean,
        event_rate_std=rate_std,
        polarity_balance_mean=balance_mean,
        polarity_balance_std=balance_std,
        median_pixel_iei_mean=iei_mean,
        median_pixel_iei_std=iei_std,
        n_windows=len(windows),
    )


def window_features(
    stream: EventStream,
    roi_label: RoiLabel = "face",
    window_len: int = DEFAULT_WINDOW_US,
) -> ClipFeatures:
    return clip_features(window_stats(stream, window_len), roi_label)
