"""On-disk formats: event streams, JSON documents, activity and map exports.

Every writer goes through `atomic_write`, which writes a sibling temporary
file and renames it over the target, so readers never see partial output.
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from .errors import GridMismatch, MissingInput
from .event_core import EventStream, serialize_binary, serialize_csv
from .evaluation import LabeledDecision
from .models import ClipFeatures, RegionOfInterest, TemporalSegment, Verdict, WindowStats
from .representations import ActivitySeries, SAEFrame, VoxelGrid

M = TypeVar("M", bound=BaseModel)
PathLike = Union[str, Path]

_SEGMENTS = TypeAdapter(list[TemporalSegment])
_DECISIONS = TypeAdapter(list[LabeledDecision])


class ClipEntry(BaseModel):
    """One manifest row; `path` is resolved relative to the manifest file."""

    path: str
    label: Verdict
    subject: Optional[str] = None
    roi: Optional[RegionOfInterest] = None
    width: Optional[int] = Field(default=None, gt=0)
    height: Optional[int] = Field(default=None, gt=0)


class Manifest(BaseModel):
    clips: list[ClipEntry]


class FeatureReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str = ""
    window_len_us: int
    windows: list[WindowStats]
    features: ClipFeatures


def atomic_write(path: PathLike, data: Union[str, bytes]) -> Path:
    target = Path(path).expanduser()
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, temp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(temp_name, target)
    except BaseException:
        Path(temp_name).unlink(missing_ok=True)
        raise
    return target


def require_file(path: PathLike, what: str) -> Path:
    resolved = Path(path).expanduser()
    if not resolved.is_file():
        raise MissingInput(f"{what} not found: {resolved}", path=str(resolved))
    return resolved


def save_stream(path: PathLike, stream: EventStream) -> Path:
    """CSV when the target ends in .csv, EVT0 binary otherwise."""

    if Path(path).suffix.lower() == ".csv":
        return atomic_write(path, serialize_csv(stream))
    return atomic_write(path, serialize_binary(stream))


def save_model(path: PathLike, model: BaseModel) -> Path:
    return atomic_write(path, model.model_dump_json(indent=2, by_alias=True) + "\n")


def load_model(path: PathLike, model_type: type[M]) -> M:
    resolved = require_file(path, model_type.__name__)
    return model_type.model_validate_json(resolved.read_text(encoding="utf-8"))


def dump_segments(segments: Sequence[TemporalSegment]) -> str:
    return _SEGMENTS.dump_json(list(segments), indent=2, by_alias=True).decode("utf-8") + "\n"


def save_segments(path: PathLike, segments: Sequence[TemporalSegment]) -> Path:
    return atomic_write(path, dump_segments(segments))


def load_segments(path: PathLike) -> list[TemporalSegment]:
    resolved = require_file(path, "segment file")
    return _SEGMENTS.validate_json(resolved.read_text(encoding="utf-8"))


def load_decisions(path: PathLike) -> list[LabeledDecision]:
    resolved = require_file(path, "decisions file")
    return _DECISIONS.validate_json(resolved.read_text(encoding="utf-8"))


def load_manifest(path: PathLike) -> tuple[Manifest, Path]:
    """Manifest plus the directory its relative clip paths resolve against."""

    manifest = load_model(path, Manifest)
    return manifest, Path(path).expanduser().resolve().parent


def activity_csv(series: Sequence[ActivitySeries]) -> str:
    """Tidy CSV `t_us,a_<channel>...`; every series must share one grid."""

    if not series:
        return "t_us\n"
    grid = series[0].t
    for other in series[1:]:
        if not np.array_equal(other.t, grid):
            raise GridMismatch("activity series do not share a time grid")
    buffer = io.StringIO()
    buffer.write(",".join(["t_us"] + [f"a_{s.channel}" for s in series]) + "\n")
    columns = [s.a.tolist() for s in series]
    for i, t in enumerate(grid.tolist()):
        buffer.write(",".join([str(t)] + [repr(float(column[i])) for column in columns]) + "\n")
    return buffer.getvalue()


def save_activity_csv(path: PathLike, series: Sequence[ActivitySeries]) -> Path:
    return atomic_write(path, activity_csv(series))


class SAEMeta(BaseModel):
    width: int
    height: int
    t_ref_us: int
    tau_us: int
    pos_file: str
    neg_file: str


def _grid_csv(values: np.ndarray) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, values, delimiter=",", fmt="%.9g")
    return buffer.getvalue()


def save_sae(path: PathLike, frame: SAEFrame) -> Path:
    """Row-major CSV maps `<stem>.pos.csv` / `<stem>.neg.csv` plus JSON metadata at `path`."""

    meta_path = Path(path).expanduser()
    stem = meta_path.with_suffix("")
    pos_path = stem.with_name(stem.name + ".pos.csv")
    neg_path = stem.with_name(stem.name + ".neg.csv")
    atomic_write(pos_path, _grid_csv(frame.values_pos))
    atomic_write(neg_path, _grid_csv(frame.values_neg))
    meta = SAEMeta(
        width=frame.width,
        height=frame.height,
        t_ref_us=frame.t_ref,
        tau_us=frame.tau,
        pos_file=pos_path.name,
        neg_file=neg_path.name,
    )
    return save_model(meta_path, meta)


def save_voxel(path: PathLike, grid: VoxelGrid) -> Path:
    buffer = io.BytesIO()
    np.save(buffer, np.asarray(grid.counts), allow_pickle=False)
    return atomic_write(path, buffer.getvalue())


def validation_message(exc: ValidationError) -> str:
    first = exc.errors()[0] if exc.errors() else {}
    location = ".".join(str(part) for part in first.get("loc", ()))
    detail = first.get("msg", str(exc))
    return f"{location}: {detail}" if location else detail
