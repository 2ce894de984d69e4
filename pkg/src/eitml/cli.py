"""Command-line entry point: ``eitml <command> [flags]``.

Exit status is 0 on success, 1 on usage errors and 2 on data or format
errors. Every flag is validated before any file is read or written.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .core import EITF_VERSION, FormatError, atomic_write, read_manifest, read_recording

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


@dataclass
class RunConfig:
    command: str
    args: dict = field(default_factory=dict)


def _version_text() -> str:
    from .classifiers import MODEL_SCHEMA_VERSION
    from .evaluation import REPORT_SCHEMA_VERSION

    return (
        f"eitml {__version__}\n"
        f"recording format EITF v{EITF_VERSION}\n"
        f"feature catalog v1\n"
        f"model schema v{MODEL_SCHEMA_VERSION}\n"
        f"evaluation report schema v{REPORT_SCHEMA_VERSION}"
    )


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _fraction(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _classifier_list(text):
    from .classifiers import KINDS

    if text == "all":
        return KINDS
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    unknown = [n for n in names if n not in KINDS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown classifier(s) {unknown}; choose from {', '.join(KINDS)} or 'all'")
    return names


def _scenarios(text):
    return ("A", "B") if text == "both" else (text,)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eitml", description="EIT regional ventilation features and classifier evaluation.")
    p.add_argument("--version", action="store_true", help="print package and schema versions")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic phantom cohort")
    s.add_argument("--subjects-healthy", type=_positive_int, default=5)
    s.add_argument("--subjects-nonhealthy", type=_positive_int, default=11)
    s.add_argument("--breaths-healthy", type=_positive_int, default=392)
    s.add_argument("--breaths-nonhealthy", type=_positive_int, default=1108)
    s.add_argument("--seed", type=_nonneg_int, default=0)
    s.add_argument("--out", required=True, type=Path)

    s = sub.add_parser("detect", help="detect breath cycles in one recording")
    s.add_argument("--recording", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--prominence", type=_fraction, default=0.15)
    s.add_argument("--min-duration", type=_positive_float, default=1.0)
    s.add_argument("--mask", type=Path, help="lung-field mask CSV (row,col per line)")

    s = sub.add_parser("extract", help="extract per-breath features for a cohort manifest")
    s.add_argument("--manifest", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--auto-detect", action="store_true", help="ignore annotations and detect breaths")
    s.add_argument("--prominence", type=_fraction, default=0.15)
    s.add_argument("--min-duration", type=_positive_float, default=1.0)
    s.add_argument("--catalog", type=Path, help="feature catalog JSON overriding the default")
    s.add_argument("--mask", type=Path, help="lung-field mask CSV (row,col per line)")

    s = sub.add_parser("evaluate", help="repeated hold-out evaluation of classifiers")
    s.add_argument("--features", required=True, type=Path)
    s.add_argument("--scenario", choices=("A", "B", "both"), default="both")
    s.add_argument("--runs", type=_positive_int, default=50)
    s.add_argument("--seed", type=_nonneg_int, default=0)
    s.add_argument("--classifiers", type=_classifier_list, default="all")
    s.add_argument("--budget", type=_positive_int, default=30, help="random-search trials per classifier and run")
    s.add_argument("--jobs", type=_positive_int, default=1)
    s.add_argument("--out", required=True, type=Path)

    s = sub.add_parser("importance", help="top-k predictor importance per scenario")
    s.add_argument("--report", required=True, type=Path)
    s.add_argument("--top", type=_positive_int, default=10)
    s.add_argument("--classifier", default="RndForest")
    s.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    s = sub.add_parser("report", help="mean±std summary table of an evaluation report")
    s.add_argument("--report", required=True, type=Path)
    s.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    s = sub.add_parser("distributions", help="per-class box statistics of chosen features")
    s.add_argument("--features", required=True, type=Path)
    s.add_argument("--names", required=True, help="comma-separated feature names")
    s.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    return p


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.version:
        return RunConfig("version")
    if ns.command is None:
        raise UsageError(build_parser().format_usage() + "eitml: error: a command is required\n")
    args = vars(ns)
    args.pop("version")
    command = args.pop("command")
    if command == "evaluate":
        if isinstance(args["classifiers"], str):
            args["classifiers"] = _classifier_list(args["classifiers"])
        args["scenarios"] = _scenarios(args.pop("scenario"))
    if command == "distributions":
        names = [n.strip() for n in args["names"].split(",") if n.strip()]
        if not names:
            raise UsageError("eitml distributions: error: --names is empty\n")
        args["names"] = names
    return RunConfig(command, args)


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _require_file(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such file")


def _atlas_for(width, height, mask_path):
    from .atlas import build_atlas, read_mask

    mask = read_mask(mask_path, width, height) if mask_path is not None else None
    return build_atlas(width, height, mask)


def _cmd_synth(a):
    from .synth import generate_cohort

    m = generate_cohort(
        a["out"], a["subjects_healthy"], a["subjects_nonhealthy"], a["seed"], a["breaths_healthy"], a["breaths_nonhealthy"]
    )
    print(f"wrote {len(m)} recordings to {a['out']}", file=sys.stderr)


def _cmd_detect(a):
    from .cycles import detect_breaths, global_curve, write_annotations

    seq = read_recording(a["recording"])
    atlas = _atlas_for(seq.width, seq.height, a["mask"])
    cycles = detect_breaths(global_curve(seq, atlas), a["min_duration"], a["prominence"])
    write_annotations(cycles, a["out"])
    print(f"{len(cycles)} breaths -> {a['out']}", file=sys.stderr)


def _cmd_extract(a):
    from .features import default_catalog, extract_manifest, load_catalog

    manifest = read_manifest(a["manifest"])
    if not len(manifest):
        raise FormatError(f"{a['manifest']}: empty manifest")
    first = read_recording(manifest.entries[0].recording_path)
    atlas = _atlas_for(first.width, first.height, a["mask"])
    catalog = load_catalog(a["catalog"]) if a["catalog"] is not None else default_catalog(atlas)
    catalog.validate(atlas)
    ds = extract_manifest(manifest, atlas, catalog, a["auto_detect"], a["min_duration"], a["prominence"])
    ds.to_csv(a["out"])
    print(f"{len(ds)} breaths x {len(ds.names)} features -> {a['out']}", file=sys.stderr)


def _cmd_evaluate(a):
    from .evaluation import run_experiment, write_report
    from .features import FeatureDataset

    ds = FeatureDataset.from_csv(a["features"])
    report = run_experiment(ds, a["scenarios"], a["classifiers"], a["runs"], a["seed"], a["budget"], a["jobs"])
    write_report(report, a["out"])


def _cmd_importance(a):
    from .evaluation import importance_table, load_report

    report = load_report(a["report"])
    try:
        text = importance_table(report, a["top"], a["classifier"])
    except KeyError as exc:
        raise FormatError(exc.args[0]) from None
    _emit(text, a["out"])


def _cmd_report(a):
    from .evaluation import load_report, summary_table

    _emit(summary_table(load_report(a["report"])), a["out"])


def _cmd_distributions(a):
    from .evaluation import distributions_csv, export_feature_distributions
    from .features import FeatureDataset

    ds = FeatureDataset.from_csv(a["features"])
    unknown = [n for n in a["names"] if n not in ds.names]
    if unknown:
        raise FormatError(f"unknown feature(s): {', '.join(unknown)}")
    _emit(distributions_csv(export_feature_distributions(ds, a["names"])), a["out"])


_COMMANDS = {
    "synth": _cmd_synth,
    "detect": _cmd_detect,
    "extract": _cmd_extract,
    "evaluate": _cmd_evaluate,
    "importance": _cmd_importance,
    "report": _cmd_report,
    "distributions": _cmd_distributions,
}

_INPUTS = {
    "detect": ("recording", "mask"),
    "extract": ("manifest", "catalog", "mask"),
    "evaluate": ("features",),
    "importance": ("report",),
    "report": ("report",),
    "distributions": ("features",),
}


def cli_main(argv=None) -> int:
    """Run one command; returns the process exit status."""
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else list(argv))
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if cfg.command == "version":
        print(_version_text())
        return EXIT_OK
    try:
        for key in _INPUTS.get(cfg.command, ()):
            if cfg.args.get(key) is not None:
                _require_file(cfg.args[key])
        _COMMANDS[cfg.command](cfg.args)
    except (FormatError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"eitml {cfg.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(cli_main())
