#!/usr/bin/env python3
"""evlive entry point."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence


def _add_stream_args(parser: argparse.ArgumentParser, *, required: bool = True) -> None:
    parser.add_argument("--input", "-i", required=required, help="EVT0 binary or CSV event stream")
    parser.add_argument("--width", type=int, help="sensor width (CSV input only)")
    parser.add_argument("--height", type=int, help="sensor height (CSV input only)")
    parser.add_argument(
        "--lenient",
        action="store_true",
        help="sort out-of-order events instead of rejecting the file",
    )


def _add_activity_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tau-ms", type=float, help="activity time constant (default 10)")
    parser.add_argument("--dt-ms", type=float, help="resampling step (default 2)")
    parser.add_argument("--blink-params", help="BlinkParams JSON file")
    parser.add_argument("--saccade-params", help="SaccadeParams JSON file")
    window = parser.add_mutually_exclusive_group()
    window.add_argument("--search-window-ms", type=float, help="blink search window override")
    window.add_argument(
        "--fit-blink-window",
        metavar="SEGMENTS",
        help="fit the blink search window to annotated blink durations (segments JSON)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evlive",
        description="evlive - event-camera ocular dynamics and replay-attack liveness",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  evlive synth --output clip.evt --replay replay.evt
  evlive detect --input clip.evt --roi 16,12,32,24,left_eye --output segments.json
  evlive eval --pred segments.json --gt clip.gt.json
  evlive train --manifest clips.json --split --output classifier.json
  evlive liveness --input clip.evt --classifier classifier.json
        """,
    )
    parser.add_argument("--version", action="version", version="evlive v0.1.0")
    commands = parser.add_subparsers(dest="command", required=True)

    convert = commands.add_parser("convert", help="convert between CSV and EVT0 binary")
    _add_stream_args(convert)
    convert.add_argument("--output", "-o", required=True, help=".csv for CSV, anything else for EVT0")

    features = commands.add_parser("features", help="window statistics and clip features")
    _add_stream_args(features, required=False)
    features.add_argument("--manifest", help="extract features for every clip in a manifest")
    features.add_argument("--roi", help="x0,y0,w,h[,label] or ROI JSON file")
    features.add_argument("--window-ms", type=float, help="window length (default 33)")
    features.add_argument("--output", "-o", help="features JSON (stdout if omitted)")
    features.add_argument("--sae", help="time-surface metadata JSON; maps go next to it")
    features.add_argument("--sae-at-ms", type=float, help="time-surface reference time")
    features.add_argument("--sae-tau-ms", type=float, help="time-surface decay (default 66)")
    features.add_argument("--voxel", help="voxel grid .npy output")
    features.add_argument("--voxel-bins", type=int, help="voxel time bins (default 10)")
    features.add_argument("--workers", type=int, help="concurrent clips for --manifest")

    detect = commands.add_parser("detect", help="blink and saccade segmentation")
    _add_stream_args(detect)
    detect.add_argument("--roi", help="eye region: x0,y0,w,h[,label] or ROI JSON file")
    _add_activity_args(detect)
    detect.add_argument("--output", "-o", help="segments JSON (stdout if omitted)")
    detect.add_argument("--activity-csv", help="tidy activity CSV for plotting")

    liveness = commands.add_parser("liveness", help="genuine vs replay decision")
    _add_stream_args(liveness)
    liveness.add_argument("--classifier", required=True, help="classifier JSON from `train`")
    liveness.add_argument("--roi", help="face region (default: full sensor)")
    liveness.add_argument("--window-ms", type=float, help="window length (default 33)")
    liveness.add_argument("--challenge", choices=["blink", "saccade"], help="requested movement")
    liveness.add_argument("--issued-ms", type=float, help="challenge issue time")
    liveness.add_argument("--deadline-ms", type=float, help="challenge deadline (default issue + 3000)")
    liveness.add_argument("--eye-roi", help="eye region used to detect the challenge response")
    _add_activity_args(liveness)
    liveness.add_argument("--output", "-o", help="decision JSON (stdout if omitted)")

    train = commands.add_parser("train", help="fit the feature classifier on a manifest")
    train.add_argument("--manifest", required=True, help='{"clips": [{"path", "label", "subject"?}]}')
    train.add_argument("--output", "-o", required=True, help="classifier JSON")
    train.add_argument("--split", action="store_true", help="subject-disjoint 80:20 split")
    train.add_argument("--report", help="holdout BiometricReport JSON")
    train.add_argument("--roi", help="default ROI for clips without one")
    train.add_argument("--width", type=int)
    train.add_argument("--height", type=int)
    train.add_argument("--lenient", action="store_true")
    train.add_argument("--window-ms", type=float, help="window length (default 33)")
    train.add_argument("--workers", type=int, help="concurrent clips")
    train.add_argument("--seed", type=int, help="split seed")

    evaluate = commands.add_parser("eval", help="segmentation or biometric metrics")
    evaluate.add_argument("--pred", help="predicted segments JSON")
    evaluate.add_argument("--gt", help="ground-truth segments JSON")
    evaluate.add_argument("--decisions", help='[{"label", "verdict", "score"?}] JSON')
    evaluate.add_argument("--iou", type=float, help="IoU threshold (default 0.5)")
    evaluate.add_argument("--output", "-o", help="report JSON (stdout if omitted)")
    evaluate.add_argument("--csv", help="one-row CSV summary")

    synth = commands.add_parser("synth", help="seeded synthetic genuine clip and replay")
    synth.add_argument("--output", "-o", required=True, help="genuine stream (.csv or EVT0)")
    synth.add_argument("--gt", help="ground-truth segments JSON (default <output>.gt.json)")
    synth.add_argument("--spec", help="ClipSpec JSON")
    synth.add_argument("--random", action="store_true", help="random movement script")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--margin-ms", type=float, help="annotation margin (default 10)")
    synth.add_argument("--replay", help="replay stream output")
    synth.add_argument("--replay-fps", type=float, help="display refresh rate (default 50)")
    synth.add_argument("--brightness", type=float, help="replay brightness factor (default 0.6)")
    synth.add_argument("--jitter-ms", type=float, help="replay timing jitter (default 0)")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    from src.cli import execute

    return execute(args)


if __name__ == "__main__":
    sys.exit(main())
