import argparse
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

from dotenv import find_dotenv, load_dotenv

from .errors import InvalidParameter, MissingInput
from .models import BlinkParams, RegionOfInterest, SaccadeParams, SegmentLabel, ms_to_us
from .ocular_detect import fit_blink_window
from .storage import load_model, load_segments, require_file
from .synth import ReplaySpec

Subcommand = Literal["convert", "features", "detect", "liveness", "train", "eval", "synth"]
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class Config:
    """Environment-backed defaults. Durations stay in ms until `build_run_config`."""

    tau_ms: float = 10.0
    dt_ms: float = 2.0
    window_ms: float = 33.0
    sae_tau_ms: float = 66.0
    annotation_margin_ms: float = 10.0
    seed: int = 0
    strict_parse: bool = True
    workers: int = 4
    log_level: str = "WARNING"


def _expand_path(path: Optional[str]) -> Optional[Path]:
    if not path:
        return None
    return Path(path).expanduser()


def _parse_bool_env(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    value = raw.strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off", ""}:
        return False
    return default


def _parse_ms_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number of milliseconds, got {raw!r}") from None
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {raw!r}")
    return value


def _parse_int_env(name: str, default: int, *, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {raw!r}")
    return value


def load_config() -> Config:
    """Read EVLIVE_* variables (and a local .env) over the built-in defaults."""

    load_dotenv(find_dotenv(usecwd=True))

    log_level = os.getenv("EVLIVE_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"
    if log_level not in LOG_LEVELS:
        raise ValueError(f"EVLIVE_LOG_LEVEL must be one of: {', '.join(LOG_LEVELS)}")

    return Config(
        tau_ms=_parse_ms_env("EVLIVE_TAU_MS", 10.0),
        dt_ms=_parse_ms_env("EVLIVE_DT_MS", 2.0),
        window_ms=_parse_ms_env("EVLIVE_WINDOW_MS", 33.0),
        sae_tau_ms=_parse_ms_env("EVLIVE_SAE_TAU_MS", 66.0),
        annotation_margin_ms=_parse_ms_env("EVLIVE_ANNOTATION_MARGIN_MS", 10.0),
        seed=_parse_int_env("EVLIVE_SEED", 0, minimum=0),
        strict_parse=_parse_bool_env("EVLIVE_STRICT_PARSE", True),
        workers=_parse_int_env("EVLIVE_WORKERS", 4, minimum=1),
        log_level=log_level,
    )


@dataclass(frozen=True)
class RunConfig:
    """One resolved invocation. Every duration is an integer number of µs."""

    subcommand: Subcommand
    input_path: Optional[Path] = None
    output_path: Optional[Path] = None
    width: Optional[int] = None
    height: Optional[int] = None
    roi: Optional[RegionOfInterest] = None
    tau_us: int = 10_000
    dt_us: int = 2_000
    window_us: int = 33_000
    sae_tau_us: int = 66_000
    annotation_margin_us: int = 10_000
    blink_params: BlinkParams = field(default_factory=BlinkParams)
    saccade_params: SaccadeParams = field(default_factory=SaccadeParams)
    classifier_path: Optional[Path] = None
    seed: int = 0
    strict: bool = True
    workers: int = 4
    # features
    activity_csv: Optional[Path] = None
    sae_path: Optional[Path] = None
    sae_t_ref_us: Optional[int] = None
    voxel_path: Optional[Path] = None
    voxel_bins: int = 10
    manifest_path: Optional[Path] = None
    # train
    split: bool = False
    report_path: Optional[Path] = None
    # eval
    pred_path: Optional[Path] = None
    gt_path: Optional[Path] = None
    decisions_path: Optional[Path] = None
    csv_path: Optional[Path] = None
    iou_threshold: float = 0.5
    # liveness challenge
    challenge: Optional[SegmentLabel] = None
    issued_us: int = 0
    deadline_us: Optional[int] = None
    eye_roi: Optional[RegionOfInterest] = None
    # synth
    spec_path: Optional[Path] = None
    random_spec: bool = False
    gt_out: Optional[Path] = None
    replay_path: Optional[Path] = None
    replay: ReplaySpec = field(default_factory=ReplaySpec)


def parse_roi(value: Optional[str]) -> Optional[RegionOfInterest]:
    """ROI from a JSON file path or an inline `x0,y0,w,h[,label]`."""

    if not value:
        return None
    candidate = Path(value).expanduser()
    if candidate.suffix.lower() == ".json":
        return load_model(candidate, RegionOfInterest)
    parts = [part.strip() for part in value.split(",")]
    if len(parts) not in (4, 5):
        raise InvalidParameter(f"ROI must be x0,y0,w,h[,label] or a JSON file, got {value!r}")
    try:
        x0, y0, w, h = (int(part) for part in parts[:4])
    except ValueError:
        raise InvalidParameter(f"ROI coordinates must be integers, got {value!r}") from None
    label = parts[4] if len(parts) == 5 else "custom"
    return RegionOfInterest(x0=x0, y0=y0, w=w, h=h, label=label)


def _arg(args: argparse.Namespace, name: str, default=None):
    value = getattr(args, name, None)
    return default if value is None else value


def _ms(args: argparse.Namespace, name: str, default_ms: float) -> int:
    value = float(_arg(args, name, default_ms))
    if value <= 0:
        raise InvalidParameter(f"--{name.replace('_', '-')} must be positive, got {value}")
    return ms_to_us(value)


def _input(args: argparse.Namespace, name: str, what: str) -> Optional[Path]:
    value = _expand_path(getattr(args, name, None))
    return require_file(value, what) if value is not None else None


_REQUIRED_INPUTS: dict[str, tuple[str, ...]] = {
    "convert": ("input_path", "output_path"),
    "detect": ("input_path",),
    "liveness": ("input_path", "classifier_path"),
    "train": ("manifest_path", "output_path"),
    "synth": ("output_path",),
}


def build_run_config(args: argparse.Namespace, config: Config) -> RunConfig:
    """Merge parsed CLI flags over `config`, converting ms to µs exactly once."""

    subcommand = args.command
    blink_params = BlinkParams()
    saccade_params = SaccadeParams()
    if getattr(args, "blink_params", None):
        blink_params = load_model(_expand_path(args.blink_params), BlinkParams)
    if getattr(args, "saccade_params", None):
        saccade_params = load_model(_expand_path(args.saccade_params), SaccadeParams)
    if getattr(args, "search_window_ms", None) is not None:
        blink_params = blink_params.model_copy(
            update={"search_window": _ms(args, "search_window_ms", 0)}
        )
    fit_path = _input(args, "fit_blink_window", "blink annotations")
    if fit_path is not None:
        durations = [s.duration for s in load_segments(fit_path) if s.label == "blink"]
        blink_params = blink_params.model_copy(update={"search_window": fit_blink_window(durations)})

    deadline_us = None
    if getattr(args, "deadline_ms", None) is not None:
        deadline_us = ms_to_us(float(args.deadline_ms))

    replay = ReplaySpec(
        fps=float(_arg(args, "replay_fps", 50.0)),
        brightness_factor=float(_arg(args, "brightness", 0.6)),
        jitter=ms_to_us(float(_arg(args, "jitter_ms", 0.0))),
        seed=int(_arg(args, "seed", config.seed)),
    )

    run = RunConfig(
        subcommand=subcommand,
        input_path=_input(args, "input", "input stream"),
        output_path=_expand_path(getattr(args, "output", None)),
        width=getattr(args, "width", None),
        height=getattr(args, "height", None),
        roi=parse_roi(getattr(args, "roi", None)),
        tau_us=_ms(args, "tau_ms", config.tau_ms),
        dt_us=_ms(args, "dt_ms", config.dt_ms),
        window_us=_ms(args, "window_ms", config.window_ms),
        sae_tau_us=_ms(args, "sae_tau_ms", config.sae_tau_ms),
        annotation_margin_us=ms_to_us(float(_arg(args, "margin_ms", config.annotation_margin_ms))),
        blink_params=blink_params,
        saccade_params=saccade_params,
        classifier_path=_input(args, "classifier", "classifier file"),
        seed=int(_arg(args, "seed", config.seed)),
        strict=not getattr(args, "lenient", False) and config.strict_parse,
        workers=int(_arg(args, "workers", config.workers)),
        activity_csv=_expand_path(getattr(args, "activity_csv", None)),
        sae_path=_expand_path(getattr(args, "sae", None)),
        sae_t_ref_us=(
            ms_to_us(float(args.sae_at_ms)) if getattr(args, "sae_at_ms", None) is not None else None
        ),
        voxel_path=_expand_path(getattr(args, "voxel", None)),
        voxel_bins=int(_arg(args, "voxel_bins", 10)),
        manifest_path=_input(args, "manifest", "manifest"),
        split=bool(getattr(args, "split", False)),
        report_path=_expand_path(getattr(args, "report", None)),
        pred_path=_input(args, "pred", "prediction file"),
        gt_path=_input(args, "gt", "ground-truth file") if subcommand == "eval" else None,
        decisions_path=_input(args, "decisions", "decisions file"),
        csv_path=_expand_path(getattr(args, "csv", None)),
        iou_threshold=float(_arg(args, "iou", 0.5)),
        challenge=getattr(args, "challenge", None),
        issued_us=ms_to_us(float(_arg(args, "issued_ms", 0.0))),
        deadline_us=deadline_us,
        eye_roi=parse_roi(getattr(args, "eye_roi", None)),
        spec_path=_input(args, "spec", "clip spec"),
        random_spec=bool(getattr(args, "random", False)),
        gt_out=(
            _expand_path(getattr(args, "gt", None)) if subcommand == "synth" else None
        ),
        replay_path=_expand_path(getattr(args, "replay", None)),
        replay=replay,
    )
    if run.workers < 1:
        raise InvalidParameter(f"--workers must be >= 1, got {run.workers}")
    for name in _REQUIRED_INPUTS.get(subcommand, ()):
        if getattr(run, name) is None:
            flag = "--" + name.removesuffix("_path").replace("_", "-")
            raise MissingInput(f"{subcommand} needs {flag}")
    return run
