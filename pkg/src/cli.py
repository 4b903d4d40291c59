from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from .config import RunConfig, build_run_config, load_config
from .decorate import field_line, pc_gray, pc_magenta, verdict_markup
from .errors import EvliveError, InvalidParameter, MissingInput, OneClassOnly
from .evaluation import (
    BiometricReport,
    LabeledDecision,
    SegmentationReport,
    biometric_metrics,
    evaluate_segments,
    report_csv_row,
)
from .event_core import EventStream, crop_roi, full_sensor_roi, load_stream
from .liveness import (
    DEFAULT_CHALLENGE_TIMEOUT_US,
    ChallengeSession,
    FeatureClassifier,
    LabeledFeatures,
    classify,
    run_challenge,
    subject_split,
    train_classifier,
)
from .models import US_PER_MS, RegionOfInterest
from .ocular_detect import activity_bundle, movements_from_bundle
from .representations import sae_frame, voxel_grid, window_stats, clip_features
from .storage import (
    ClipEntry,
    FeatureReport,
    atomic_write,
    dump_segments,
    load_decisions,
    load_manifest,
    load_model,
    load_segments,
    require_file,
    save_activity_csv,
    save_model,
    save_sae,
    save_segments,
    save_stream,
    save_voxel,
    validation_message,
)
from .synth import ClipSpec, default_clip_spec, random_clip_spec, synth_genuine, synth_replay

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

ACTIVITY_HEADER = "t_us,a_on,a_off,a_all\n"


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_time=False, show_path=False)],
        force=True,
    )


def _fail(payload: dict) -> int:
    sys.stderr.write(json.dumps(payload) + "\n")
    return 1


def _say(run: RunConfig, markup: str) -> None:
    """Human summaries share stdout only when the data went to a file."""

    (console if run.output_path is not None else err_console).print(markup)


def _emit(run: RunConfig, text: str) -> None:
    if run.output_path is not None:
        atomic_write(run.output_path, text)
    else:
        sys.stdout.write(text)


def _load(run: RunConfig, path: Optional[Path] = None, entry: Optional[ClipEntry] = None) -> EventStream:
    width = entry.width if entry and entry.width else run.width
    height = entry.height if entry and entry.height else run.height
    return load_stream(path or run.input_path, width=width, height=height, strict=run.strict)


def _span_ms(stream: EventStream) -> str:
    return f"{stream.span / US_PER_MS:.3f} ms" if len(stream) else "empty"


def _feature_report(
    stream: EventStream, roi: Optional[RegionOfInterest], run: RunConfig, source: str
) -> FeatureReport:
    if roi is None:
        roi = full_sensor_roi(stream)
    stream = crop_roi(stream, roi)
    windows = window_stats(stream, run.window_us)
    return FeatureReport(
        source=source,
        window_len_us=run.window_us,
        windows=windows,
        features=clip_features(windows, roi.label),
    )


def _clip_report(entry: ClipEntry, base: Path, run: RunConfig) -> FeatureReport:
    path = require_file(base / entry.path, "clip")
    return _feature_report(_load(run, path, entry), entry.roi or run.roi, run, entry.path)


async def _gather_reports(entries: Sequence[ClipEntry], base: Path, run: RunConfig) -> list[FeatureReport]:
    """Per-clip extraction in worker threads, at most `run.workers` at once."""

    semaphore = asyncio.Semaphore(run.workers)

    async def one(entry: ClipEntry) -> FeatureReport:
        async with semaphore:
            return await asyncio.to_thread(_clip_report, entry, base, run)

    return list(await asyncio.gather(*(one(entry) for entry in entries)))


def extract_manifest(run: RunConfig) -> tuple[list[ClipEntry], list[FeatureReport]]:
    manifest, base = load_manifest(run.manifest_path)
    if not manifest.clips:
        raise MissingInput("manifest lists no clips", path=str(run.manifest_path))
    reports = asyncio.run(_gather_reports(manifest.clips, base, run))
    logger.info("extracted features for %d clips", len(reports))
    return manifest.clips, reports


def cmd_convert(run: RunConfig) -> int:
    stream = _load(run)
    save_stream(run.output_path, stream)
    console.print(field_line("events", len(stream)))
    console.print(field_line("span", _span_ms(stream)))
    console.print(field_line("geometry", f"{stream.width}x{stream.height}"))
    console.print(pc_gray(f"wrote {run.output_path}"))
    return 0


def cmd_features(run: RunConfig) -> int:
    if run.manifest_path is not None:
        _, reports = extract_manifest(run)
        _emit(run, json.dumps([r.model_dump(mode="json") for r in reports], indent=2) + "\n")
        _say(run, field_line("clips", len(reports)))
        return 0
    if run.input_path is None:
        raise MissingInput("features needs --input or --manifest")

    stream = _load(run)
    report = _feature_report(stream, run.roi, run, str(run.input_path))
    _emit(run, report.model_dump_json(indent=2) + "\n")
    target = crop_roi(stream, run.roi) if run.roi is not None else stream
    if run.sae_path is not None:
        t_ref = run.sae_t_ref_us if run.sae_t_ref_us is not None else target.t_last
        save_sae(run.sae_path, sae_frame(target, t_ref, run.sae_tau_us))
    if run.voxel_path is not None:
        save_voxel(run.voxel_path, voxel_grid(target, run.voxel_bins))
    _say(run, field_line("windows", report.features.n_windows))
    return 0


def cmd_detect(run: RunConfig) -> int:
    if run.roi is None:
        raise MissingInput("detect needs --roi for the eye region")
    stream = crop_roi(_load(run), run.roi)
    bundle = activity_bundle(stream, tau=run.tau_us, dt=run.dt_us)
    segments = (
        []
        if bundle is None
        else movements_from_bundle(bundle, run.blink_params, run.saccade_params)
    )
    _emit(run, dump_segments(segments))
    if run.activity_csv is not None:
        if bundle is None:
            atomic_write(run.activity_csv, ACTIVITY_HEADER)
        else:
            save_activity_csv(run.activity_csv, [bundle.a_on, bundle.a_off, bundle.a_all])
    counts = {label: sum(1 for s in segments if s.label == label) for label in ("blink", "saccade")}
    _say(run, field_line("blinks", counts["blink"]))
    _say(run, field_line("saccades", counts["saccade"]))
    return 0


def cmd_liveness(run: RunConfig) -> int:
    clf = load_model(run.classifier_path, FeatureClassifier)
    stream = _load(run)
    report = _feature_report(stream, run.roi, run, str(run.input_path))
    decision = classify(clf, report.features)
    verdict, reason = decision.verdict, ("ok" if decision.verdict == "genuine" else "liveness_failed")

    if run.challenge is not None:
        if run.eye_roi is None:
            raise MissingInput("a challenge needs --eye-roi to detect the response")
        bundle = activity_bundle(crop_roi(stream, run.eye_roi), tau=run.tau_us, dt=run.dt_us)
        movements = (
            []
            if bundle is None
            else movements_from_bundle(bundle, run.blink_params, run.saccade_params)
        )
        deadline = run.deadline_us
        if deadline is None:
            deadline = run.issued_us + DEFAULT_CHALLENGE_TIMEOUT_US
        session = ChallengeSession(challenge=run.challenge, issued_at=run.issued_us, deadline=deadline)
        outcome = run_challenge(session, movements, decision)
        reason = outcome.reason
        verdict = "genuine" if outcome.status == "passed" else "replay"

    payload = {"verdict": verdict, "score": decision.score, "reason": reason}
    _emit(run, json.dumps(payload, indent=2) + "\n")
    _say(run, f"{verdict_markup(verdict)} {pc_gray(f'score={decision.score:.3f} reason={reason}')}")
    return 0


def _holdout_report(clf: FeatureClassifier, holdout: Sequence[LabeledFeatures]) -> Optional[BiometricReport]:
    decisions = []
    for sample in holdout:
        decision = classify(clf, sample.features)
        decisions.append(LabeledDecision(label=sample.label, verdict=decision.verdict, score=decision.score))
    try:
        return biometric_metrics(decisions)
    except OneClassOnly as exc:
        logger.warning("no holdout report: %s", exc)
        return None


def cmd_train(run: RunConfig) -> int:
    entries, reports = extract_manifest(run)
    samples = [
        LabeledFeatures(features=report.features, label=entry.label, subject=entry.subject)
        for entry, report in zip(entries, reports)
    ]
    holdout: list[LabeledFeatures] = []
    if run.split:
        if any(sample.subject is None for sample in samples):
            raise InvalidParameter("--split needs a subject for every manifest clip")
        samples, holdout = subject_split(samples, lambda s: s.subject, ratio=0.8, seed=run.seed)

    clf = train_classifier(samples)
    save_model(run.output_path, clf)
    console.print(field_line("trained on", f"{len(samples)} clips"))
    console.print(field_line("features", ", ".join(clf.feature_names)))

    if holdout:
        report = _holdout_report(clf, holdout)
        if report is not None:
            if run.report_path is not None:
                save_model(run.report_path, report)
            console.print(field_line("holdout top-1", f"{report.top1_accuracy:.2f}"))
            console.print(field_line("holdout ACER", f"{report.acer:.2f}"))
    return 0


def cmd_eval(run: RunConfig) -> int:
    report: SegmentationReport | BiometricReport
    if run.decisions_path is not None:
        report = biometric_metrics(load_decisions(run.decisions_path))
        summary = [
            field_line("top-1", f"{report.top1_accuracy:.2f}"),
            field_line("APCER", f"{report.apcer:.2f}"),
            field_line("BPCER", f"{report.bpcer:.2f}"),
            field_line("ACER", f"{report.acer:.2f}"),
        ]
        clip = run.decisions_path.name
    elif run.pred_path is not None and run.gt_path is not None:
        report = evaluate_segments(
            load_segments(run.pred_path), load_segments(run.gt_path), run.iou_threshold
        )
        summary = [
            field_line(label, f"P={m.precision:.2f} R={m.recall:.2f} F1={m.f1:.2f}")
            for label, m in report.per_class.items()
        ]
        summary.append(field_line("F1", f"{report.f1:.2f}"))
        if report.boundary_matches:
            summary.append(pc_magenta(f"{report.boundary_matches} matches exactly at the IoU threshold"))
        clip = run.pred_path.name
    else:
        raise MissingInput("eval needs --pred and --gt, or --decisions")

    _emit(run, report.model_dump_json(indent=2) + "\n")
    if run.csv_path is not None:
        atomic_write(run.csv_path, report_csv_row(report, clip=clip))
    for line in summary:
        _say(run, line)
    return 0


def _clip_spec(run: RunConfig) -> ClipSpec:
    if run.spec_path is not None:
        return load_model(run.spec_path, ClipSpec)
    if run.random_spec:
        return random_clip_spec(run.seed, annotation_margin=run.annotation_margin_us)
    return default_clip_spec(run.seed, annotation_margin=run.annotation_margin_us)


def cmd_synth(run: RunConfig) -> int:
    spec = _clip_spec(run)
    stream, truth = synth_genuine(spec)
    save_stream(run.output_path, stream)
    gt_path = run.gt_out or run.output_path.with_suffix(".gt.json")
    save_segments(gt_path, truth)
    console.print(field_line("events", len(stream)))
    console.print(field_line("movements", len(truth)))
    console.print(pc_gray(f"wrote {run.output_path} and {gt_path}"))
    if run.replay_path is not None:
        replay = synth_replay(stream, run.replay)
        save_stream(run.replay_path, replay)
        console.print(field_line("replay events", len(replay)))
    return 0


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "convert": cmd_convert,
    "features": cmd_features,
    "detect": cmd_detect,
    "liveness": cmd_liveness,
    "train": cmd_train,
    "eval": cmd_eval,
    "synth": cmd_synth,
}


def run_command(run: RunConfig) -> int:
    return COMMANDS[run.subcommand](run)


def execute(args: argparse.Namespace) -> int:
    """Resolve configuration and run one subcommand; errors become stderr JSON and exit 1."""

    try:
        config = load_config()
    except ValueError as exc:
        return _fail({"error": "ConfigError", "message": str(exc)})
    configure_logging(config.log_level)

    try:
        return run_command(build_run_config(args, config))
    except EvliveError as exc:
        return _fail(exc.to_dict())
    except ValidationError as exc:
        return _fail({"error": "ValidationError", "message": validation_message(exc)})
    except OSError as exc:
        return _fail({"error": "IOError", "message": str(exc)})
