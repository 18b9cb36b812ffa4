"""Command-line front end: one video in, one .fstream file out."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionError, ExtractionJob, extract


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="extract-features",
        description="Extract facial keypoints and blendshape-style "
        "activations from a video into the .fstream format.",
    )
    parser.add_argument("--video", required=True, help="input video file")
    parser.add_argument("--out", required=True, help="output .fstream path")
    parser.add_argument("--fps", type=float, default=60.0, help="target frame rate")
    parser.add_argument(
        "--channels",
        default="blendshapes,keypoints",
        help="comma list of channels to emit",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        job = ExtractionJob(
            video_path=args.video,
            out_path=args.out,
            fps=args.fps,
            channels=tuple(args.channels.split(",")),
        )
        summary = extract(job)
    except _UsageError as exc:
        print(f"extract-features: usage error: {exc}", file=sys.stderr)
        return 1
    except (ExtractionError, OSError) as exc:
        print(f"extract-features: error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {summary['frames']} frames "
        f"({summary['detected_frames']} with a detected face) to {args.out}"
    )
    return 0


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
