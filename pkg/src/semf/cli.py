"""Command-line entry point: ``semf synth|render|train|eval|ablate``.

Errors print one line to stderr, ``semf: error: <kind>: <message>``, and
exit with status 1 (2 for argument errors, as argparse does).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .ablation import AXES, axis_table, run_axis
from .config import TrainConfig, parse_key_values
from .data import impute, load_csv, make_windows, synthesize_dataset
from .errors import SemfError, UsageError
from .timefreq import IMAGE_KINDS, render, write_matrix_csv, write_pgm
from .training import evaluate, load_model, prepare_splits, train, write_run_artifacts

log = logging.getLogger("semf")

DEFAULT_DAYS = 3339


def _common(p: argparse.ArgumentParser, data_required: bool = False) -> None:
    p.add_argument("--data", required=data_required, help="aligned daily CSV (date,target,<exo...>)")
    p.add_argument("--out", required=True, help="output path or directory")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="config override, repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semf", description="Spectrogram + exogenous multi-horizon forecaster")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--days", type=int, default=DEFAULT_DAYS)

    p = sub.add_parser("render", help="render one window's image as PGM plus CSV")
    _common(p, data_required=True)
    p.add_argument("--index", type=int, default=0, help="window index after imputation")
    p.add_argument("--kind", default="morlet", help=f"one of {', '.join(IMAGE_KINDS)}")

    p = sub.add_parser("train", help="train, then report on the test split")
    _common(p, data_required=True)

    p = sub.add_parser("eval", help="recompute a report from a checkpoint")
    _common(p, data_required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))

    p = sub.add_parser("ablate", help="run one ablation grid")
    _common(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    p.add_argument("--days", type=int, default=DEFAULT_DAYS, help="synthetic length when --data is absent")
    return parser


def resolve_config(args, default_path=None) -> TrainConfig:
    """Defaults < config file < --set overrides < --seed."""
    values = {}
    path = args.config or default_path
    if path:
        values.update(parse_key_values(Path(path).read_text()))
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return TrainConfig.from_mapping(values)


def cmd_synth(args) -> int:
    frame = synthesize_dataset(args.seed, args.days)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out)
    print(f"wrote {out} ({frame.n_days} days, {frame.n_gaps()} gaps)")
    return 0


def cmd_render(args) -> int:
    if args.kind not in IMAGE_KINDS:
        raise UsageError(f"unknown image kind {args.kind!r}; valid: {', '.join(IMAGE_KINDS)}")
    cfg = resolve_config(args)
    windows = make_windows(impute(load_csv(args.data)), cfg.seq_len)
    if not 0 <= args.index < len(windows):
        raise UsageError(f"window index {args.index} out of range 0..{len(windows) - 1}")
    spec = render(windows[args.index].history, args.kind, cfg.n_scales)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    stem = out / f"window{args.index}_{args.kind}"
    write_pgm(stem.with_suffix(".pgm"), spec.values)
    write_matrix_csv(stem.with_suffix(".csv"), spec.values)
    rows, cols = spec.values.shape
    print(f"wrote {stem}.pgm and {stem}.csv ({rows}x{cols})")
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    splits = prepare_splits(load_csv(args.data), cfg)
    result = train(cfg, splits)
    report = evaluate(result.model, splits.test, splits.standardizer)
    paths = write_run_artifacts(out, result, report, cfg)
    print(report.to_table())
    print(f"best epoch {result.best_epoch}; artifacts in {out}")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    default_cfg = ckpt.parent / "config.txt"
    cfg = resolve_config(args, default_cfg if default_cfg.exists() else None)
    model, standardizer = load_model(ckpt, cfg)
    # the saved standardizer is used as-is; the split is rebuilt for its windows only
    splits = prepare_splits(load_csv(args.data), cfg)
    report = evaluate(model, getattr(splits, args.split), standardizer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    (out / f"{args.split}_metrics.csv").write_text(report.to_csv())
    (out / f"{args.split}_metrics.txt").write_text(report.to_table() + "\n")
    print(report.to_table())
    return 0


def cmd_ablate(args) -> int:
    if args.axis not in AXES:
        raise UsageError(f"unknown ablation axis {args.axis!r}; valid: {', '.join(AXES)}")
    cfg = resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.txt")
    if args.data:
        frame = load_csv(args.data)
    else:
        frame = synthesize_dataset(cfg.seed, args.days)
        frame.to_csv(out / "data.csv")
    results = run_axis(args.axis, cfg, frame)
    for r in results:
        cell_dir = out / "_".join(str(x) for x in r.labels).replace(" ", "-")
        cell_dir.mkdir(exist_ok=True)
        r.config.save(cell_dir / "config.txt")
        (cell_dir / "test_metrics.csv").write_text(r.report.to_csv())
    table = axis_table(args.axis, results)
    (out / f"ablation_{args.axis}.txt").write_text(table + "\n")
    print(table)
    return 0


COMMANDS = {"synth": cmd_synth, "render": cmd_render, "train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SemfError as exc:
        print(f"semf: error: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"semf: error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
