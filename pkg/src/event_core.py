"""Event stream model, EVT0/CSV codecs, ROI cropping and temporal slicing.

Streams are stored column-wise in read-only numpy arrays so every operation
below is a vectorized filter over the columns. Nothing in this module mutates
a stream after construction.
"""

from __future__ import annotations

import logging
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import (
    BadMagic,
    BadPolarity,
    InvalidInterval,
    MissingHeader,
    NonMonotonic,
    NonZeroReserved,
    OutOfBounds,
    ParseError,
    RoiOutOfBounds,
    TruncatedRecord,
    UnsupportedVersion,
)
from .models import Event, RegionOfInterest

logger = logging.getLogger(__name__)

MAGIC = b"EVT0"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHHHHQ")
RECORD_DTYPE = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("pad", "V3")]
)
CSV_HEADER = "t_us,x,y,p"
MAX_GEOMETRY = 0xFFFF
_DECIMAL = re.compile(r"-?[0-9]+")


def _frozen(values: np.ndarray, dtype: str) -> np.ndarray:
    array = np.ascontiguousarray(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-sorted events of one sensor.

    Build instances through `EventStream.from_arrays` or
    `EventStream.from_events`; both validate polarity, bounds and ordering.
    """

    width: int
    height: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    @classmethod
    def from_arrays(
        cls,
        width: int,
        height: int,
        t: Sequence[int] | np.ndarray,
        x: Sequence[int] | np.ndarray,
        y: Sequence[int] | np.ndarray,
        p: Sequence[int] | np.ndarray,
        *,
        strict: bool = True,
    ) -> "EventStream":
        if width <= 0 or height <= 0 or width > MAX_GEOMETRY or height > MAX_GEOMETRY:
            raise OutOfBounds(f"invalid sensor geometry {width}x{height}")
        t_arr = np.asarray(t, dtype=np.int64)
        x_arr = np.asarray(x, dtype=np.int64)
        y_arr = np.asarray(y, dtype=np.int64)
        p_arr = np.asarray(p, dtype=np.int64)
        n = t_arr.shape[0]
        if not (x_arr.shape[0] == y_arr.shape[0] == p_arr.shape[0] == n):
            raise ValueError("event columns must have equal length")

        bad_polarity = np.flatnonzero((p_arr != 1) & (p_arr != -1))
        if bad_polarity.size:
            index = int(bad_polarity[0])
            raise BadPolarity(f"event {index} has polarity {int(p_arr[index])}")
        if n and (t_arr.min() < 0):
            raise OutOfBounds("timestamps must be non-negative")
        outside = np.flatnonzero(
            (x_arr < 0) | (x_arr >= width) | (y_arr < 0) | (y_arr >= height)
        )
        if outside.size:
            index = int(outside[0])
            raise OutOfBounds(
                f"event {index} at ({int(x_arr[index])}, {int(y_arr[index])}) "
                f"outside {width}x{height}"
            )

        if n > 1:
            descending = np.flatnonzero(np.diff(t_arr) < 0)
            if descending.size:
                if strict:
                    index = int(descending[0]) + 1
                    raise NonMonotonic(
                        f"timestamp decreases at event {index} "
                        f"({int(t_arr[index - 1])} -> {int(t_arr[index])})"
                    )
                logger.warning(
                    "reordered %d out-of-order events (lenient mode)", descending.size
                )
                order = np.argsort(t_arr, kind="stable")
                t_arr, x_arr, y_arr, p_arr = t_arr[order], x_arr[order], y_arr[order], p_arr[order]

        return cls(
            width=int(width),
            height=int(height),
            t=_frozen(t_arr, "int64"),
            x=_frozen(x_arr, "int32"),
            y=_frozen(y_arr, "int32"),
            p=_frozen(p_arr, "int8"),
        )

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls.from_arrays(width, height, [], [], [], [])

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __iter__(self) -> Iterator[Event]:
        for x, y, t, p in zip(self.x.tolist(), self.y.tolist(), self.t.tolist(), self.p.tolist()):
            yield Event(x=x, y=y, t=t, p=p)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def events(self) -> list[Event]:
        return list(self)

    @property
    def t_first(self) -> Optional[int]:
        return int(self.t[0]) if len(self) else None

    @property
    def t_last(self) -> Optional[int]:
        return int(self.t[-1]) if len(self) else None

    @property
    def span(self) -> int:
        return int(self.t[-1] - self.t[0]) if len(self) else 0

    def select(self, mask: np.ndarray) -> "EventStream":
        """Keep events where `mask` is true, same geometry, order preserved."""

        return EventStream(
            width=self.width,
            height=self.height,
            t=_frozen(self.t[mask], "int64"),
            x=_frozen(self.x[mask], "int32"),
            y=_frozen(self.y[mask], "int32"),
            p=_frozen(self.p[mask], "int8"),
        )


def parse_binary(data: bytes, *, strict: bool = True) -> EventStream:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"not an EVT0 file (magic {data[:4]!r})")
    if len(data) < HEADER.size:
        raise TruncatedRecord(f"header needs {HEADER.size} bytes, got {len(data)}")
    _, version, width, height, reserved, count = HEADER.unpack_from(data, 0)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"EVT0 version {version} is not supported")
    if reserved != 0:
        raise NonZeroReserved(f"EVT0 header reserved field is {reserved}, expected 0")
    expected = HEADER.size + count * RECORD_DTYPE.itemsize
    if len(data) != expected:
        raise TruncatedRecord(
            f"header announces {count} events ({expected} bytes), file has {len(data)} bytes"
        )
    records = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER.size)
    padding = np.frombuffer(records["pad"].tobytes(), dtype=np.uint8)
    dirty = np.flatnonzero(padding.reshape(count, RECORD_DTYPE["pad"].itemsize).any(axis=1))
    if dirty.size:
        raise NonZeroReserved(f"record {int(dirty[0])} has non-zero padding")
    if count and records["t"].max() > np.iinfo(np.int64).max:
        raise OutOfBounds("timestamp exceeds the signed 64-bit range")
    return EventStream.from_arrays(
        width,
        height,
        records["t"].astype(np.int64),
        records["x"],
        records["y"],
        records["p"],
        strict=strict,
    )


def serialize_binary(stream: EventStream) -> bytes:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, stream.width, stream.height, 0, len(stream))
    records = np.zeros(len(stream), dtype=RECORD_DTYPE)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    return header + records.tobytes()


def parse_csv(text: str, width: int, height: int, *, strict: bool = True) -> EventStream:
    lines = text.splitlines()
    if not lines or lines[0].strip().replace(" ", "") != CSV_HEADER:
        raise MissingHeader(f"CSV must start with '{CSV_HEADER}'")

    t_col: list[int] = []
    x_col: list[int] = []
    y_col: list[int] = []
    p_col: list[int] = []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", line=line_no)
        if not all(_DECIMAL.fullmatch(field) for field in fields):
            raise ParseError(f"non-integer field in {line!r}", line=line_no)
        t, x, y, p = (int(field) for field in fields)
        if p not in (-1, 1):
            raise BadPolarity(f"line {line_no}: polarity {p} not in {{-1, 1}}")
        t_col.append(t)
        x_col.append(x)
        y_col.append(y)
        p_col.append(p)
    return EventStream.from_arrays(width, height, t_col, x_col, y_col, p_col, strict=strict)


def serialize_csv(stream: EventStream) -> str:
    rows = [CSV_HEADER]
    rows.extend(
        f"{t},{x},{y},{p}"
        for t, x, y, p in zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist())
    )
    return "\n".join(rows) + "\n"


def load_stream(
    path: str | Path,
    *,
    width: Optional[int] = None,
    height: Optional[int] = None,
    strict: bool = True,
) -> EventStream:
    """Read an EVT0 or CSV file, deciding by the leading magic bytes."""

    data = Path(path).expanduser().read_bytes()
    if data[: len(MAGIC)] == MAGIC:
        return parse_binary(data, strict=strict)
    if width is None or height is None:
        raise MissingHeader(f"{path}: CSV input needs --width and --height")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise ParseError(f"invalid UTF-8 at byte {exc.start}", line=line) from None
    return parse_csv(text, width, height, strict=strict)


def crop_roi(stream: EventStream, roi: RegionOfInterest) -> EventStream:
    if roi.x0 + roi.w > stream.width or roi.y0 + roi.h > stream.height:
        raise RoiOutOfBounds(
            f"ROI {roi.label} ({roi.x0},{roi.y0},{roi.w}x{roi.h}) exceeds "
            f"{stream.width}x{stream.height}"
        )
    mask = (
        (stream.x >= roi.x0)
        & (stream.x < roi.x0 + roi.w)
        & (stream.y >= roi.y0)
        & (stream.y < roi.y0 + roi.h)
    )
    return EventStream(
        width=roi.w,
        height=roi.h,
        t=_frozen(stream.t[mask], "int64"),
        x=_frozen(stream.x[mask] - roi.x0, "int32"),
        y=_frozen(stream.y[mask] - roi.y0, "int32"),
        p=_frozen(stream.p[mask], "int8"),
    )


def slice_time(stream: EventStream, t0: int, t1: int) -> EventStream:
    """Events with t0 <= t < t1. Timestamps keep their absolute values."""

    if t0 > t1:
        raise InvalidInterval(f"t0={t0} is after t1={t1}")
    start = int(np.searchsorted(stream.t, t0, side="left"))
    stop = int(np.searchsorted(stream.t, t1, side="left"))
    mask = np.zeros(len(stream), dtype=bool)
    mask[start:stop] = True
    return stream.select(mask)


def rebase_time(stream: EventStream, origin: int) -> EventStream:
    if len(stream) and origin > stream.t[0]:
        raise InvalidInterval(
            f"origin {origin} is after the first event at {int(stream.t[0])}"
        )
    return EventStream(
        width=stream.width,
        height=stream.height,
        t=_frozen(stream.t - origin, "int64"),
        x=stream.x,
        y=stream.y,
        p=stream.p,
    )


def full_sensor_roi(stream: EventStream, label: str = "face") -> RegionOfInterest:
    return RegionOfInterest(x0=0, y0=0, w=stream.width, h=stream.height, label=label)
