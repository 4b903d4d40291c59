"""
Shared data models.

Types used by more than one module live here so the processing modules can
import each other without cycles. File-facing records are pydantic models;
array containers live next to the code that builds them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

Polarity = Literal[-1, 1]
Channel = Literal["on", "off", "all"]
RoiLabel = Literal["face", "left_eye", "right_eye", "custom"]
SegmentLabel = Literal["blink", "saccade"]
Verdict = Literal["genuine", "replay"]

US_PER_MS = 1000
US_PER_S = 1_000_000


def ms_to_us(value_ms: float) -> int:
    return int(round(value_ms * US_PER_MS))


def _convert_ms_fields(data: Any, fields: tuple[str, ...]) -> Any:
    """Accept `<field>_ms` keys in parameter files and store them as µs."""

    if not isinstance(data, dict):
        return data
    converted = dict(data)
    for name in fields:
        key = f"{name}_ms"
        if key in converted:
            value = converted.pop(key)
            converted.setdefault(name, ms_to_us(float(value)))
    return converted


@dataclass(frozen=True, slots=True)
class Event:
    x: int
    y: int
    t: int
    p: int


class RegionOfInterest(BaseModel):
    model_config = ConfigDict(frozen=True)

    x0: int = Field(ge=0)
    y0: int = Field(ge=0)
    w: int = Field(gt=0)
    h: int = Field(gt=0)
    label: RoiLabel = "custom"


class TemporalSegment(BaseModel):
    """A labelled time interval; serialized as onset_us/offset_us."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    onset: int = Field(alias="onset_us")
    offset: int = Field(alias="offset_us")
    label: SegmentLabel
    score: float = Field(default=1.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_order(self) -> "TemporalSegment":
        if self.onset >= self.offset:
            raise ValueError(f"segment onset {self.onset} must precede offset {self.offset}")
        return self

    @property
    def duration(self) -> int:
        return self.offset - self.onset


class WindowStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_start: int
    window_len: int = Field(gt=0)
    event_rate: float = Field(ge=0.0)
    polarity_balance: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    median_pixel_iei: Optional[float] = None


FEATURE_NAMES: tuple[str, ...] = (
    "event_rate_mean",
    "event_rate_std",
    "polarity_balance_mean",
    "polarity_balance_std",
    "median_pixel_iei_mean",
    "median_pixel_iei_std",
)


class ClipFeatures(BaseModel):
    model_config = ConfigDict(frozen=True)

    roi_label: RoiLabel = "face"
    event_rate_mean: float
    event_rate_std: float = Field(ge=0.0)
    polarity_balance_mean: Optional[float] = None
    polarity_balance_std: Optional[float] = Field(default=None, ge=0.0)
    median_pixel_iei_mean: Optional[float] = None
    median_pixel_iei_std: Optional[float] = Field(default=None, ge=0.0)
    n_windows: int = Field(ge=1)

    def feature(self, name: str) -> Optional[float]:
        return getattr(self, name)


class BlinkParams(BaseModel):
    """Blink detector tuning; times in µs, `*_ms` aliases accepted on input."""

    model_config = ConfigDict(frozen=True)

    gaussian_sigma: int = Field(default=6_000, gt=0)
    pos_prominence: float = Field(default=0.3, gt=0.0)
    neg_prominence: float = Field(default=0.3, gt=0.0)
    search_window: int = Field(default=300_000, gt=0)
    min_balance: float = Field(default=0.2, gt=0.0)

    @model_validator(mode="before")
    @classmethod
    def _accept_ms(cls, data: Any) -> Any:
        return _convert_ms_fields(data, ("gaussian_sigma", "search_window"))


class SaccadeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    peak_threshold: float = Field(default=0.35, gt=0.0)
    min_width: int = Field(default=20_000, gt=0)
    max_width: int = Field(default=150_000, gt=0)
    min_segment: int = Field(default=20_000, ge=0)
    blink_margin: int = Field(default=30_000, ge=0)
    baseline_ratio: float = Field(default=2.0, ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _accept_ms(cls, data: Any) -> Any:
        return _convert_ms_fields(
            data, ("min_width", "max_width", "min_segment", "blink_margin")
        )

    @model_validator(mode="after")
    def _check_widths(self) -> "SaccadeParams":
        if self.min_width >= self.max_width:
            raise ValueError("min_width must be smaller than max_width")
        return self


class LivenessDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    score: float = Field(ge=0.0, le=1.0)
