"""Command-line entry point wiring the library into reproducible runs.

Subcommands: datagen, extract, assemble, split, train, eval, kappa,
pipeline.  Exit codes: 0 success, 1 usage error, 2 data/validation
error, 3 numeric failure.

``pipeline`` chains datagen-or-ingest -> extract -> assemble -> split ->
train -> eval from a flat ``key = value`` config file (flags take
precedence) and writes a run manifest that reproduces the run: all
randomness flows from the single top-level seed, with the generator,
splitter and trainer using seed, seed+1 and seed+2 respectively.

Execution is sequential; the BLAS thread count (OPENBLAS_NUM_THREADS)
changes speed only, never results.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import clips as clips_mod
from . import datagen as datagen_mod
from . import metrics as metrics_mod
from . import salience as salience_mod
from . import splits as splits_mod
from . import streams as streams_mod
from . import training as training_mod
from .errors import DataError, NumericError

PROG = "miscue"

_PEAK_METHODS = {"blendshape-peak", "keypoint-peak"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("datagen", help="generate a synthetic dataset")
    p.add_argument("--regime", required=True, choices=datagen_mod.REGIMES)
    p.add_argument("--n", type=int, default=None, help="number of exchanges")
    p.add_argument("--pos-frac", type=float, default=None)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--length", type=int, default=None, help="frames per stream")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--burst-amplitude", type=float, default=None)
    p.add_argument("--channels", default=None, help="comma list: blendshapes,keypoints")
    p.add_argument("--participants", type=int, default=None)
    p.add_argument("--total-moments", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("extract", help="extract salient moments from streams")
    p.add_argument("--manifest", required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=[m.value for m in salience_mod.SalienceMethod],
    )
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--min-sep", type=int, default=None)
    p.add_argument("--window", type=int, default=45)
    p.add_argument("--lag", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--influence", type=float, default=None)
    p.add_argument("--annotations", default=None, help="score against this fixture file")
    p.add_argument("--tolerance", type=int, default=60)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("assemble", help="build clip compilations around moments")
    p.add_argument("--manifest", required=True)
    p.add_argument("--moments", required=True)
    p.add_argument("--context", type=int, default=60)
    p.add_argument("--decimate", type=int, default=5)
    p.add_argument("--split-moments", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("split", help="participant-grouped stratified split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fractions", default="0.675,0.225,0.10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the sequence classifier")
    p.add_argument("--clips", required=True, help="clip manifest from `assemble`")
    p.add_argument("--splits", required=True, help="splits file from `split`")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--weighted-loss", action="store_true")
    p.add_argument("--pos-weight", type=float, default=None)
    p.add_argument("--decimate", type=int, default=1)
    p.add_argument("--channel", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score predictions against labels")
    p.add_argument("--scores", required=True, help="one score per line")
    p.add_argument("--labels", required=True, help="one 0/1 label per line")
    p.add_argument("--roc-out", required=True)
    p.add_argument("--report-out", default=None)
    p.add_argument("--figure-out", default=None, help="default: roc-out with .png")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kappa", help="Fleiss' kappa of a rating count matrix")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("pipeline", help="full run driven by a config file")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key",
    )
    p.set_defaults(func=cmd_pipeline)
    return parser


def run_subcommand(argv: list[str]) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        print(f"{PROG}: a COMMAND is required", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError("a COMMAND is required")
        return args.func(args)
    except UsageError as exc:
        print(f"{PROG}: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"{PROG}: numeric failure: {exc}", file=sys.stderr)
        return 3


def main(argv: list[str] | None = None) -> int:
    return run_subcommand(sys.argv[1:] if argv is None else argv)


def console_main() -> None:
    raise SystemExit(main())


# -- datagen -----------------------------------------------------------


def _spec_from_args(args) -> datagen_mod.GenSpec:
    factory = {
        "separable": datagen_mod.GenSpec.separable,
        "null": datagen_mod.GenSpec.null,
        "fixtures": datagen_mod.GenSpec.fixtures,
    }[args.regime]
    overrides: dict = {"seed": args.seed}
    if args.n is not None:
        overrides["n_samples"] = args.n
    if args.pos_frac is not None:
        overrides["positive_fraction"] = args.pos_frac
    if args.fps is not None:
        overrides["fps"] = args.fps
    if args.length is not None:
        overrides["length_frames"] = args.length
    if args.noise is not None:
        overrides["noise_scale"] = args.noise
    if args.burst_amplitude is not None:
        overrides["burst_amplitude"] = args.burst_amplitude
    if args.channels is not None:
        overrides["channels"] = tuple(args.channels.split(","))
    if args.participants is not None:
        overrides["participants"] = args.participants
    if args.total_moments is not None:
        overrides["total_moments"] = args.total_moments
    return factory(**overrides)


def cmd_datagen(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    (out / "streams").mkdir(parents=True, exist_ok=True)
    records = []
    annotations = []
    for record, planted in datagen_mod.iter_exchanges(spec):
        rel = f"streams/{record.stream.source_id}.fstream"
        (out / rel).write_bytes(streams_mod.write_stream(record.stream))
        records.append(
            streams_mod.ExchangeRecord(
                participant_id=record.participant_id,
                session_id=record.session_id,
                exchange_index=record.exchange_index,
                mistake_label=record.mistake_label,
                stream_path=rel,
            )
        )
        if planted is not None:
            annotations.append((rel, list(planted)))
    streams_mod.write_manifest(records, out / "manifest.jsonl")
    if spec.regime == "fixtures":
        salience_mod.write_annotations(annotations, out / "annotations.jsonl")
    print(f"wrote {len(records)} streams to {out}")
    return 0


# -- extract -----------------------------------------------------------


def _extraction_settings(args) -> tuple[int, int, salience_mod.PeakDetectorParams]:
    method = args.method
    if method == salience_mod.SalienceMethod.KEYPOINT_TOPK.value:
        for name in ("lag", "threshold", "influence"):
            if getattr(args, name) is not None:
                raise UsageError(f"--{name} only applies to peak-detector methods")
    else:
        for name, flag in (("k", "--k"), ("min_sep", "--min-sep")):
            if getattr(args, name) is not None:
                raise UsageError(f"{flag} only applies to the keypoint-topk method")
    k = args.k if args.k is not None else 3
    min_sep = args.min_sep if args.min_sep is not None else 60
    params = salience_mod.PeakDetectorParams(
        lag=args.lag if args.lag is not None else 120,
        threshold=args.threshold if args.threshold is not None else 3.0,
        influence=args.influence if args.influence is not None else 0.1,
    )
    return k, min_sep, params


def _extract_for_records(records, base_dir, method, *, k, min_sep, window, params):
    entries = []
    for rec in records:
        stream = rec.load_stream(base_dir)
        moments = salience_mod.extract_moments(
            stream,
            method,
            k=k,
            min_separation=min_sep,
            window=window,
            peak_params=params,
        )
        entries.append((rec, moments))
    return entries


def cmd_extract(args) -> int:
    k, min_sep, params = _extraction_settings(args)
    manifest = Path(args.manifest)
    records = streams_mod.read_manifest(manifest)
    extracted = _extract_for_records(
        records,
        manifest.parent,
        args.method,
        k=k,
        min_sep=min_sep,
        window=args.window,
        params=params,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_moments(extracted, out / "moments.jsonl")

    if args.annotations:
        annotated = dict(salience_mod.read_annotations(args.annotations))
        matched = total_annotated = total_predicted = 0
        for rec, moments in extracted:
            frames = annotated.get(rec.stream_path)
            if frames is None:
                continue
            report = salience_mod.match_moments(moments, frames, args.tolerance)
            matched += len(report.matched_pairs)
            total_annotated += report.n_annotated
            total_predicted += report.n_predicted
        recall = matched / total_annotated if total_annotated else 1.0
        precision = matched / total_predicted if total_predicted else 1.0
        for line in (
            f"matched\t{matched}",
            f"annotated\t{total_annotated}",
            f"predicted\t{total_predicted}",
            f"recall\t{recall!r}",
            f"precision\t{precision!r}",
        ):
            print(line)
        (out / "salience_report.tsv").write_text(
            "matched\tannotated\tpredicted\trecall\tprecision\n"
            f"{matched}\t{total_annotated}\t{total_predicted}\t{recall!r}\t{precision!r}\n",
            encoding="utf-8",
        )
    else:
        n_moments = sum(len(m) for _, m in extracted)
        print(f"extracted {n_moments} moments from {len(records)} streams")
    return 0


def _write_moments(extracted, path: Path) -> None:
    lines = []
    for rec, moments in extracted:
        lines.append(
            json.dumps(
                {
                    "participant_id": rec.participant_id,
                    "session_id": rec.session_id,
                    "exchange_index": rec.exchange_index,
                    "stream_path": rec.stream_path,
                    "moments": [
                        {"frame": m.frame_index, "score": m.score, "method": m.method.value}
                        for m in moments
                    ],
                },
                separators=(",", ":"),
            )
        )
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _read_moments(path: Path) -> dict[tuple[str, str, int], list[salience_mod.SalientMoment]]:
    table = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            key = (str(obj["participant_id"]), str(obj["session_id"]), int(obj["exchange_index"]))
            table[key] = [
                salience_mod.SalientMoment(
                    frame_index=int(m["frame"]),
                    score=float(m["score"]),
                    method=salience_mod.SalienceMethod(m["method"]),
                )
                for m in obj["moments"]
            ]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed moments line {lineno}: {exc}") from exc
    return table


# -- assemble ----------------------------------------------------------


def _assemble_records(records, base_dir, moment_table, *, context, decimate, split_moments):
    """Build compilations per exchange; exchanges without moments are skipped."""
    built = []
    skipped = 0
    for rec in records:
        moments = moment_table.get(rec.key, [])
        if not moments:
            skipped += 1
            continue
        stream = rec.load_stream(base_dir)
        if split_moments:
            comps = clips_mod.split_into_moment_samples(
                stream, moments, context, decimate, label=rec.mistake_label
            )
        else:
            comps = [
                clips_mod.assemble_compilation(
                    stream, moments, context, decimate, label=rec.mistake_label
                )
            ]
        for j, comp in enumerate(comps):
            built.append((rec, j, comp))
    return built, skipped


def cmd_assemble(args) -> int:
    if args.context < 1:
        raise UsageError("--context must be positive")
    if args.decimate < 1:
        raise UsageError("--decimate must be positive")
    manifest = Path(args.manifest)
    records = streams_mod.read_manifest(manifest)
    moment_table = _read_moments(Path(args.moments))
    built, skipped = _assemble_records(
        records,
        manifest.parent,
        moment_table,
        context=args.context,
        decimate=args.decimate,
        split_moments=args.split_moments,
    )
    out = Path(args.out)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    entries = []
    for rec, j, comp in built:
        rel = f"clips/{rec.participant_id}_{rec.session_id}_{rec.exchange_index}_{j}.fstream"
        (out / rel).write_bytes(streams_mod.write_stream(comp.stream))
        entries.append(_clip_entry(rec, j, comp, rel))
    clips_mod.write_clip_manifest(entries, out / "clips_manifest.jsonl")
    print(f"assembled {len(built)} compilations ({skipped} exchanges without moments)")
    return 0


def _clip_entry(rec, j, comp, rel_path) -> dict:
    return {
        "participant_id": rec.participant_id,
        "session_id": rec.session_id,
        "exchange_index": rec.exchange_index,
        "sample_index": j,
        "label": comp.label,
        "clip_path": rel_path,
        "decimation": comp.decimation,
        "provenance": [list(p) for p in comp.provenance],
    }


# -- split -------------------------------------------------------------


def _parse_fractions(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad fractions {text!r}: {exc}") from exc
    if len(parts) != 3:
        raise UsageError("fractions must be three comma-separated numbers")
    return parts  # type: ignore[return-value]


def cmd_split(args) -> int:
    records = streams_mod.read_manifest(Path(args.manifest))
    fractions = _parse_fractions(args.fractions)
    assignment = splits_mod.make_splits(records, fractions, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_splits(assignment, out / "splits.json")
    summary = assignment.summarize(records)
    lines = ["subset\tsamples\tsample_fraction\tpositive_rate"]
    for name in splits_mod.SUBSETS:
        stats = summary[name]
        lines.append(
            f"{name}\t{int(stats['samples'])}\t{stats['sample_fraction']!r}"
            f"\t{stats['positive_rate']!r}"
        )
    (out / "split_summary.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)
    return 0


def _write_splits(assignment: splits_mod.SplitAssignment, path: Path) -> None:
    payload = {
        "target_fractions": list(assignment.target_fractions),
        "by_participant": assignment.by_participant,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_splits(path: Path) -> splits_mod.SplitAssignment:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return splits_mod.SplitAssignment(
            by_participant=dict(payload["by_participant"]),
            target_fractions=tuple(payload["target_fractions"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed splits file {path}: {exc}") from exc


# -- train -------------------------------------------------------------


def _load_clip_examples(clips_manifest: Path, channel: str | None):
    """(participant_id, features, label) triples from a clip manifest."""
    entries = clips_mod.read_clip_manifest(clips_manifest)
    if not entries:
        raise DataError(f"clip manifest {clips_manifest} is empty")
    base = clips_manifest.parent
    out = []
    for entry in entries:
        stream = streams_mod.parse_stream((base / entry["clip_path"]).read_bytes())
        label = entry.get("label")
        if label is None:
            raise DataError(f"clip {entry['clip_path']} has no label")
        channels = stream.channels
        name = channel
        if name is None:
            for candidate in ("blendshapes", "embedding", "keypoints"):
                if candidate in channels:
                    name = candidate
                    break
        if name not in channels:
            raise DataError(f"clip {entry['clip_path']} has no {name!r} channel")
        out.append((str(entry["participant_id"]), channels[name], bool(label)))
    return out


def _train_from_examples(examples, assignment, args_like):
    per_subset: dict[str, list[tuple[np.ndarray, bool]]] = {
        name: [] for name in splits_mod.SUBSETS
    }
    for pid, feats, label in examples:
        per_subset[assignment.subset_of(pid)].append((feats, label))
    for name in ("train", "validation"):
        if not per_subset[name]:
            raise DataError(f"{name} subset is empty; adjust fractions or data size")

    pos_weight = args_like["pos_weight"]
    if pos_weight is None:
        if args_like["weighted_loss"]:
            pos_weight = training_mod.pos_weight_from_labels(
                [lab for _, lab in per_subset["train"]]
            )
        else:
            pos_weight = 1.0
    config = training_mod.TrainingConfig(
        epochs=args_like["epochs"],
        batch_size=args_like["batch"],
        learning_rate=args_like["lr"],
        pos_weight=pos_weight,
        seed=args_like["seed"],
        decimate_n=args_like["decimate"],
    )
    params, curves = training_mod.train(
        per_subset["train"], per_subset["validation"], config, hidden_dim=args_like["hidden"]
    )
    return params, curves, config, per_subset


def _write_scores(path_scores: Path, path_labels: Path, probs, labels) -> None:
    path_scores.write_text(
        "".join(f"{float(p)!r}\n" for p in probs), encoding="utf-8"
    )
    path_labels.write_text(
        "".join(f"{int(bool(y))}\n" for y in labels), encoding="utf-8"
    )


def cmd_train(args) -> int:
    examples = _load_clip_examples(Path(args.clips), args.channel)
    assignment = _read_splits(Path(args.splits))
    if args.weighted_loss and args.pos_weight is not None:
        raise UsageError("--weighted-loss and --pos-weight are mutually exclusive")
    settings = {
        "epochs": args.epochs,
        "batch": args.batch,
        "lr": args.lr,
        "hidden": args.hidden,
        "weighted_loss": args.weighted_loss,
        "pos_weight": args.pos_weight,
        "decimate": args.decimate,
        "seed": args.seed,
    }
    params, curves, config, per_subset = _train_from_examples(examples, assignment, settings)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    training_mod.save_checkpoint(out / "checkpoint.npz", params, config)
    training_mod.write_curves(curves, out / "curves.tsv")
    from . import figures  # lazy: pulls in matplotlib

    figures.render_training_curves(curves, out / "curves.png")
    for subset in ("validation", "test"):
        rows = per_subset[subset]
        if not rows:
            continue
        from .lstm import predict_probs

        probs = predict_probs(
            params, [x[:: config.decimate_n] for x, _ in rows]
        )
        _write_scores(
            out / f"scores_{subset}.txt",
            out / f"labels_{subset}.txt",
            probs,
            [y for _, y in rows],
        )
    print(f"best validation accuracy\t{max(curves.val_accuracy)!r}")
    print(f"pos_weight\t{config.pos_weight!r}")
    return 0


# -- eval / kappa ------------------------------------------------------


def _read_float_lines(path: Path) -> list[float]:
    values = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return values


def cmd_eval(args) -> int:
    scores = _read_float_lines(Path(args.scores))
    raw_labels = _read_float_lines(Path(args.labels))
    labels = [bool(int(v)) for v in raw_labels]
    report = metrics_mod.build_report(scores, labels, threshold=args.threshold)
    roc_out = Path(args.roc_out)
    roc_out.parent.mkdir(parents=True, exist_ok=True)
    metrics_mod.write_roc_table(report.roc_points, roc_out)
    lines = report.metric_lines()
    for line in lines:
        print(line)
    if args.report_out:
        Path(args.report_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not args.no_figure:
        figure_out = args.figure_out or str(roc_out.with_suffix(".png"))
        from . import figures

        figures.render_roc(report.roc_points, report.auc, figure_out)
    return 0


def cmd_kappa(args) -> int:
    matrix = metrics_mod.read_annotation_matrix(Path(args.matrix))
    value = metrics_mod.fleiss_kappa(matrix)
    print(f"fleiss_kappa\t{value!r}")
    return 0


# -- pipeline ----------------------------------------------------------

PIPELINE_DEFAULTS: dict[str, str] = {
    # datagen-or-ingest
    "manifest": "",
    "regime": "null",
    "n": "60",
    "pos_frac": "0.272",
    "fps": "60",
    "length": "240",
    "noise": "0.02",
    "burst_amplitude": "0.5",
    "channels": "blendshapes",
    "participants": "",
    "total_moments": "",
    "write_streams": "false",
    # salience
    "method": "blendshape-peak",
    "k": "3",
    "min_sep": "60",
    "window": "45",
    "lag": "120",
    "threshold": "3.0",
    "influence": "0.1",
    # clips
    "context": "60",
    "decimate": "5",
    "split_moments": "false",
    "write_clips": "false",
    # split
    "fractions": "0.675,0.225,0.10",
    # training
    "epochs": "10",
    "batch": "16",
    "lr": "1e-4",
    "hidden": "32",
    "weighted_loss": "true",
    "pos_weight": "",
    "train_decimate": "1",
    "channel": "",
    # run
    "seed": "0",
    "out": "",
}


def load_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _as_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in {"1", "true", "yes", "on"}:
        return True
    if low in {"0", "false", "no", "off"}:
        return False
    raise UsageError(f"config key {key} expects a boolean, got {text!r}")


def cmd_pipeline(args) -> int:
    cfg = dict(PIPELINE_DEFAULTS)
    if args.config:
        for key, value in load_config(args.config).items():
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r}")
            cfg[key] = value
    for override in args.set:
        key, sep, value = override.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in cfg:
            raise UsageError(f"bad --set override {override!r}")
        cfg[key] = value.strip()
    if args.out is not None:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    if not cfg["out"]:
        raise UsageError("pipeline needs an output directory (config 'out' or --out)")

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg["seed"])

    # 1. dataset
    if cfg["manifest"]:
        manifest_path = Path(cfg["manifest"])
        records = streams_mod.read_manifest(manifest_path)
        base_dir = manifest_path.parent
        loaded = [(rec, rec.load_stream(base_dir)) for rec in records]
    else:
        spec_kwargs = dict(
            regime=cfg["regime"],
            n_samples=int(cfg["n"]),
            positive_fraction=float(cfg["pos_frac"]),
            fps=float(cfg["fps"]),
            length_frames=int(cfg["length"]),
            noise_scale=float(cfg["noise"]),
            burst_amplitude=float(cfg["burst_amplitude"]),
            channels=tuple(cfg["channels"].split(",")),
            seed=seed,
        )
        if cfg["participants"]:
            spec_kwargs["participants"] = int(cfg["participants"])
        if cfg["total_moments"]:
            spec_kwargs["total_moments"] = int(cfg["total_moments"])
        spec = datagen_mod.GenSpec(**spec_kwargs)
        dataset = datagen_mod.generate(spec)
        loaded = [(rec, rec.stream) for rec in dataset.records]
        records = [rec for rec, _ in loaded]
        if _as_bool(cfg["write_streams"], "write_streams"):
            (out / "streams").mkdir(exist_ok=True)
            for rec, stream in loaded:
                (out / f"streams/{stream.source_id}.fstream").write_bytes(
                    streams_mod.write_stream(stream)
                )

    # 2. salient moments
    method = cfg["method"]
    if method not in {m.value for m in salience_mod.SalienceMethod}:
        raise UsageError(f"unknown salience method {method!r}")
    peak_params = salience_mod.PeakDetectorParams(
        lag=int(cfg["lag"]),
        threshold=float(cfg["threshold"]),
        influence=float(cfg["influence"]),
    )
    extracted = []
    for rec, stream in loaded:
        moments = salience_mod.extract_moments(
            stream,
            method,
            k=int(cfg["k"]),
            min_separation=int(cfg["min_sep"]),
            window=int(cfg["window"]),
            peak_params=peak_params,
        )
        extracted.append((rec, moments))
    _write_moments(
        [(rec, moments) for (rec, moments) in extracted], out / "moments.jsonl"
    )

    # 3. compilations
    context = int(cfg["context"])
    decimate = int(cfg["decimate"])
    split_moments = _as_bool(cfg["split_moments"], "split_moments")
    write_clips = _as_bool(cfg["write_clips"], "write_clips")
    comps = []
    skipped = 0
    for (rec, stream), (_, moments) in zip(loaded, extracted):
        if not moments:
            skipped += 1
            continue
        if split_moments:
            built = clips_mod.split_into_moment_samples(
                stream, moments, context, decimate, label=rec.mistake_label
            )
        else:
            built = [
                clips_mod.assemble_compilation(
                    stream, moments, context, decimate, label=rec.mistake_label
                )
            ]
        for j, comp in enumerate(built):
            comps.append((rec, j, comp))
    if not comps:
        raise DataError("no exchange produced any salient moment; nothing to train on")
    entries = []
    if write_clips:
        (out / "clips").mkdir(exist_ok=True)
    for rec, j, comp in comps:
        rel = f"clips/{rec.participant_id}_{rec.session_id}_{rec.exchange_index}_{j}.fstream"
        if write_clips:
            (out / rel).write_bytes(streams_mod.write_stream(comp.stream))
        entries.append(_clip_entry(rec, j, comp, rel))
    clips_mod.write_clip_manifest(entries, out / "clips_manifest.jsonl")

    # 4. participant-grouped split
    fractions = _parse_fractions(cfg["fractions"])
    assignment = splits_mod.make_splits(records, fractions, seed + 1)
    _write_splits(assignment, out / "splits.json")

    # 5. training
    channel = cfg["channel"] or None
    examples = []
    for rec, j, comp in comps:
        feats = training_mod.compilation_features(comp, channel)
        examples.append((rec.participant_id, feats, bool(comp.label)))
    settings = {
        "epochs": int(cfg["epochs"]),
        "batch": int(cfg["batch"]),
        "lr": float(cfg["lr"]),
        "hidden": int(cfg["hidden"]),
        "weighted_loss": _as_bool(cfg["weighted_loss"], "weighted_loss"),
        "pos_weight": float(cfg["pos_weight"]) if cfg["pos_weight"] else None,
        "decimate": int(cfg["train_decimate"]),
        "seed": seed + 2,
    }
    params, curves, config, per_subset = _train_from_examples(examples, assignment, settings)
    training_mod.save_checkpoint(out / "checkpoint.npz", params, config)
    training_mod.write_curves(curves, out / "curves.tsv")

    # 6. evaluation on the held-out test subset
    test_rows = per_subset["test"]
    if not test_rows:
        raise DataError("test subset is empty; adjust fractions or data size")
    from .lstm import predict_probs

    probs = predict_probs(params, [x[:: config.decimate_n] for x, _ in test_rows])
    test_labels = [y for _, y in test_rows]
    _write_scores(out / "scores_test.txt", out / "labels_test.txt", probs, test_labels)
    report = metrics_mod.build_report(probs, test_labels)
    metrics_mod.write_roc_table(report.roc_points, out / "roc.tsv")
    (out / "metrics.tsv").write_text("\n".join(report.metric_lines()) + "\n", encoding="utf-8")
    from . import figures

    figures.render_roc(report.roc_points, report.auc, out / "roc.png")
    figures.render_training_curves(curves, out / "curves.png")

    # 7. run manifest: every effective parameter plus the metric outputs.
    # The output directory is where the run lives, not part of what it
    # computes, so it stays out and reruns compare byte-identical.
    effective = dict(cfg)
    del effective["out"]
    effective["pos_weight_used"] = repr(config.pos_weight)
    effective["seed_datagen"] = str(seed)
    effective["seed_split"] = str(seed + 1)
    effective["seed_train"] = str(seed + 2)
    effective["n_compilations"] = str(len(comps))
    effective["skipped_exchanges"] = str(skipped)
    for name in splits_mod.SUBSETS:
        effective[f"n_{name}"] = str(len(per_subset[name]))
    effective["auc"] = repr(report.auc)
    effective["accuracy"] = repr(report.accuracy)
    effective["precision"] = repr(report.precision)
    effective["recall"] = repr(report.recall)
    effective["f1"] = repr(report.f1)
    manifest_lines = [f"{key} = {effective[key]}" for key in sorted(effective)]
    (out / "run_manifest.txt").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")

    for line in report.metric_lines():
        print(line)
    return 0


if __name__ == "__main__":
    console_main()
