"""Command-line interface: align, misalign, fit-model, evaluate.

Exit codes: 0 success, 1 internal error, 2 bad input, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import align as _align
from .audiofeat import read_wav, synthesize, write_wav
from .budget import DEFAULT_BYTES, DEFAULT_SECONDS, Budget
from .dtw import DistanceFunction
from .errors import AlignmentError, ConfigError, ResourceBudgetExceeded, TooFewMatches, ValidationError
from .evaluation import (
    DEFAULT_THRESHOLDS,
    FIELDS,
    l1_macro_error,
    macro_average,
    threshold_curve,
    write_curve_csv,
    write_summary_json,
)
from .io import read_model_json, read_notes, write_model_json, write_notes
from .matcher import match_notes
from .misalign import (
    DEFAULT_BINS,
    cluster_chord_onsets,
    draw_cluster_threshold,
    fit_model,
    inject_missing_extra,
    sample_misaligned,
)
from .model import NoteSequence

log = logging.getLogger("artifact")

METHODS = ("seba", "tafe", "eife")
NOTE_SUFFIXES = (".csv", ".mid", ".midi")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    method: str = "eife"
    frame_period: float = 0.02
    dist: str = DistanceFunction.COSINE.value
    radius: int = 178
    offsets: str = "interp"
    budget_seconds: float = DEFAULT_SECONDS
    budget_bytes: int = DEFAULT_BYTES
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if not self.frame_period > 0:
            raise ConfigError("frame_period must be positive")
        DistanceFunction.parse(self.dist)
        if self.radius < 0:
            raise ConfigError("radius must be non-negative")
        if self.offsets not in ("interp", "amt"):
            raise ConfigError("offsets must be 'interp' or 'amt'")
        if not self.budget_seconds > 0 or not self.budget_bytes > 0:
            raise ConfigError("budgets must be positive")

    def budget(self) -> Budget:
        return Budget(self.budget_seconds, self.budget_bytes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f'{f.name} = "{v}"' if isinstance(v, str) else f"{f.name} = {v!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
            values[key] = _coerce(key, val.strip("\"'"), types[key], lineno)
        return cls(**values)


def _coerce(key: str, val: str, kind: str, lineno: int):
    try:
        if kind == "int":
            return int(float(val)) if "e" in val.lower() else int(val)
        if kind == "float":
            return float(val)
    except ValueError:
        raise ConfigError(f"config line {lineno}: bad value for {key}: {val!r}") from None
    return val


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig.from_text(text)


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            overrides[f.name] = v
    return replace(cfg, **overrides)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _find_note_file(directory: Path, stem: str) -> Path | None:
    for suffix in NOTE_SUFFIXES:
        p = directory / f"{stem}{suffix}"
        if p.exists():
            return p
    return None


def _stems(directory: Path, tag: str) -> list[str]:
    names = set()
    for p in directory.iterdir():
        for suffix in NOTE_SUFFIXES:
            end = f".{tag}{suffix}"
            if p.name.endswith(end):
                names.add(p.name[: -len(end)])
    return sorted(names)


# align ---------------------------------------------------------------------

def run_alignment(cfg: RunConfig, score_path, audio_path=None, transcription_path=None, dump_wav=None):
    """Run one piece; returns the result. Raises on bad inputs or budget overrun."""
    need_audio = cfg.method in ("seba", "eife")
    need_trans = cfg.method in ("tafe", "eife")
    if need_audio and audio_path is None:
        raise ValidationError(f"method {cfg.method} needs --audio")
    if need_trans and transcription_path is None:
        raise ValidationError(f"method {cfg.method} needs --transcription")
    budget = cfg.budget()
    score = read_notes(score_path, keep_order=True)
    audio = read_wav(audio_path) if audio_path is not None else None
    trans = read_notes(transcription_path) if transcription_path is not None else None
    if dump_wav:
        write_wav(synthesize(score), dump_wav)
    if cfg.method == "seba":
        return _align.align_seba(score, audio, cfg.frame_period, cfg.radius, budget=budget)
    if cfg.method == "tafe":
        duration = audio.duration if audio is not None else trans.duration()
        return _align.align_tafe(score, trans, duration, cfg.frame_period,
                                 DistanceFunction.parse(cfg.dist), cfg.radius, budget)
    return _align.align_eife(score, trans, audio, frame_period=cfg.frame_period, radius=cfg.radius,
                             offsets_from=cfg.offsets, budget=budget)


def _align_piece(task):
    cfg, name, score, audio, trans, out = task
    try:
        result = run_alignment(cfg, score, audio, trans)
        write_notes(result.realigned_score, out)
        return name, {"status": "ok", "output": str(out), "diagnostics": _jsonable(result.diagnostics)}
    except ResourceBudgetExceeded as exc:
        return name, {"status": "skipped", "reason": str(exc)}
    except AlignmentError as exc:
        return name, {"status": "failed", "reason": str(exc)}


def _align_batch(cfg: RunConfig, directory: Path, out_dir: Path, workers: int | None) -> int:
    if not directory.is_dir():
        raise ValidationError(f"{directory} is not a directory")
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for name in _stems(directory, "score"):
        wav = directory / f"{name}.wav"
        tasks.append((
            cfg, name, _find_note_file(directory, f"{name}.score"),
            wav if wav.exists() else None,
            _find_note_file(directory, f"{name}.transcription"),
            out_dir / f"{name}.aligned.csv",
        ))
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = dict(pool.map(_align_piece, tasks))
    else:
        results = dict(map(_align_piece, tasks))
    for name in sorted(results):
        log.info("%s: %s", name, results[name]["status"])
    statuses = [r["status"] for r in results.values()]
    summary = {
        "method": cfg.method,
        "config": asdict(cfg),
        "pieces": {k: results[k] for k in sorted(results)},
        "processed": statuses.count("ok"),
        "skipped": statuses.count("skipped"),
        "failed": statuses.count("failed"),
    }
    write_summary_json(summary, out_dir / "summary.json")
    print(json.dumps({k: summary[k] for k in ("processed", "skipped", "failed")}))
    return EXIT_INPUT if summary["failed"] else EXIT_OK


def cmd_align(args) -> int:
    cfg = resolve_config(args)
    if args.batch:
        out_dir = Path(args.out) if args.out else Path(args.batch)
        return _align_batch(cfg, Path(args.batch), out_dir, args.workers)
    if not args.score or not args.out:
        raise ValidationError("align needs --score and --out (or --batch DIR)")
    result = run_alignment(cfg, args.score, args.audio, args.transcription, args.dump_wav)
    write_notes(result.realigned_score, args.out)
    if args.out_midi:
        write_notes(result.realigned_score, args.out_midi)
    report = {"method": result.method, "output": str(args.out), **result.diagnostics}
    print(json.dumps(_jsonable(report), sort_keys=True))
    return EXIT_OK


# misalign --------------------------------------------------------------------

def cmd_misalign(args) -> int:
    score = read_notes(args.score, keep_order=True)
    model = read_model_json(args.model)
    notes = sample_misaligned(score, model, args.seed)
    threshold = None
    if args.cluster:
        threshold = draw_cluster_threshold(args.seed)
        notes = cluster_chord_onsets(notes, threshold)
    labels = {"seed": args.seed, "cluster_threshold": threshold, "missing": [], "extra": [],
              "kept": list(range(len(notes)))}
    if args.missing_extra:
        injected = inject_missing_extra(notes, args.seed)
        labels["missing"] = sorted(injected.missing)
        labels["extra"] = sorted(injected.extra)
        labels["kept"] = [i for i in range(len(notes)) if i not in injected.extra]
        notes = injected.score
    write_notes(notes, args.out)
    labels_path = Path(args.labels) if args.labels else Path(args.out).with_suffix(".labels.json")
    write_summary_json(labels, labels_path)
    print(json.dumps({"output": str(args.out), "labels": str(labels_path), "notes": len(notes),
                      "missing": len(labels["missing"]), "extra": len(labels["extra"])}))
    return EXIT_OK


# fit-model -------------------------------------------------------------------

def cmd_fit_model(args) -> int:
    directory = Path(args.pairs)
    if not directory.is_dir():
        raise ValidationError(f"{directory} is not a directory")
    triples, skipped = [], []
    for name in _stems(directory, "score"):
        perf_path = _find_note_file(directory, f"{name}.perf")
        if perf_path is None:
            skipped.append(name)
            continue
        perf = read_notes(perf_path)
        score = read_notes(_find_note_file(directory, f"{name}.score"))
        if not perf or not score:
            skipped.append(name)
            continue
        start = float(perf.onsets().min())
        stretched = NoteSequence(_align.stretch_to_duration(score, perf.duration() - start, start))
        matching = match_notes(stretched, perf)
        if len(matching.matched) < 2:
            skipped.append(name)
            continue
        triples.append((stretched, perf, matching))
    if not triples:
        raise TooFewMatches("no usable score/performance pairs")
    model = fit_model(triples, args.bins)
    write_model_json(model, args.out)
    print(json.dumps({"output": str(args.out), "pieces": len(triples), "skipped": skipped}))
    return EXIT_OK


# evaluate --------------------------------------------------------------------

def _parse_thresholds(text: str | None) -> tuple[float, ...]:
    if not text:
        return DEFAULT_THRESHOLDS
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"bad threshold list {text!r}") from None


def cmd_evaluate(args) -> int:
    directory = Path(args.pairs)
    if not directory.is_dir():
        raise ValidationError(f"{directory} is not a directory")
    out_dir = Path(args.out)
    (out_dir / "pieces").mkdir(parents=True, exist_ok=True)
    thresholds = _parse_thresholds(args.thresholds)
    method = args.method
    curves = {f: [] for f in FIELDS}
    pairs, skipped = [], []
    for name in _stems(directory, "truth"):
        pred_path = _find_note_file(directory, f"{name}.pred")
        if pred_path is None:
            skipped.append(name)
            continue
        truth = read_notes(_find_note_file(directory, f"{name}.truth"), keep_order=True)
        pred = read_notes(pred_path, keep_order=True)
        for field in FIELDS:
            c = threshold_curve(pred, truth, field, thresholds)
            curves[field].append(c)
            write_curve_csv(c, out_dir / "pieces" / f"{name}.{method}.{field}.csv")
        pairs.append((pred, truth))
    if not pairs:
        raise ValidationError(f"no (pred, truth) pairs found in {directory}")
    summary = {"method": method, "pieces": len(pairs), "skipped": len(skipped),
               "skipped_pieces": skipped, "l1": {}, "macro": {}}
    for field in FIELDS:
        macro = macro_average(curves[field])
        write_curve_csv(macro, out_dir / f"{method}.{field}.csv")
        mean, std = l1_macro_error(pairs, field)
        summary["l1"][field] = {"mean": mean, "std": std}
        summary["macro"][field] = dict(zip(map(repr, macro.thresholds.tolist()), macro.ratios.tolist()))
    write_summary_json(summary, out_dir / "summary.json")
    print(json.dumps({k: summary[k] for k in ("method", "pieces", "skipped", "l1")}))
    return EXIT_OK


# entry point -----------------------------------------------------------------

def _add_run_options(p: argparse.ArgumentParser) -> None:
    # default None so that config-file values survive unless a flag is given
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--frame-period", dest="frame_period", type=float)
    p.add_argument("--dist", choices=[d.value for d in DistanceFunction])
    p.add_argument("--radius", type=int)
    p.add_argument("--offsets", choices=("interp", "amt"))
    p.add_argument("--budget-seconds", dest="budget_seconds", type=float)
    p.add_argument("--budget-bytes", dest="budget_bytes", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description="Score-to-performance alignment tools.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="realign a score to a performance")
    _add_run_options(p)
    p.add_argument("--score")
    p.add_argument("--audio")
    p.add_argument("--transcription")
    p.add_argument("--out", help="output CSV (single piece) or directory (batch)")
    p.add_argument("--out-midi", dest="out_midi")
    p.add_argument("--dump-wav", dest="dump_wav", help="write the synthesized score audio here")
    p.add_argument("--batch", metavar="DIR",
                   help="align every <name>.score.{csv,mid} with <name>.wav / <name>.transcription.*")
    p.add_argument("--workers", type=int, help="batch worker processes (default: logical cores)")
    p.set_defaults(func=cmd_align, usage=p.format_usage)

    p = sub.add_parser("misalign", help="make an artificial misaligned score")
    p.add_argument("--score", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cluster", action="store_true")
    p.add_argument("--missing-extra", dest="missing_extra", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="labels JSON path (default: next to --out)")
    p.set_defaults(func=cmd_misalign)

    p = sub.add_parser("fit-model", help="fit a misalignment model from <name>.score.* / <name>.perf.* pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.set_defaults(func=cmd_fit_model)

    p = sub.add_parser("evaluate", help="threshold curves for <name>.pred.csv / <name>.truth.csv pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="method", help="label used in output file names")
    p.add_argument("--thresholds", help="comma-separated seconds")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ResourceBudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except AlignmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if getattr(args, "usage", None):
            print(args.usage(), end="", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
