"""Command line entry point: generate, ingest, train, evaluate, predict, baseline, gradcheck."""
from __future__ import annotations

import argparse
import ctypes
import ctypes.util
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .autodiff import CheckpointError, NumericError
from .baselines import PersonalTopBaseline, TopBaseline
from .config import SEED_ENV, ConfigError, RunConfig, load_run_config
from .events import DataError, EventLog, chronological_split, parse_events
from .metrics import INDUCTIVE, TRANSDUCTIVE, evaluate
from .synthetic import PRESETS, generate, preset
from .toy import toy_gradcheck
from .trainer import load_model, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_GRADCHECK = 0, 1, 2, 3, 4
GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _tune_allocator() -> None:
    """Keep large temporaries on the heap instead of fresh mmaps (glibc only).

    Training allocates many short-lived arrays of about a megabyte; letting
    malloc reuse them avoids repeated page faults.
    """
    name = ctypes.util.find_library("c")
    if not name or not sys.platform.startswith("linux"):
        return
    try:
        libc = ctypes.CDLL(name)
        m_trim_threshold, m_mmap_threshold = -1, -3
        libc.mallopt(m_mmap_threshold, 256 << 20)
        libc.mallopt(m_trim_threshold, 512 << 20)
    except (OSError, AttributeError):
        pass


def _env_seed(default: int = 0) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw in (None, ""):
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _read_log(path) -> EventLog:
    if not Path(path).is_file():
        raise DataError(f"no such file: {path}")
    return parse_events(path)


def _config_path(explicit, ckpt=None):
    if explicit:
        return explicit
    if ckpt is not None and Path(f"{ckpt}.cfg").is_file():
        return f"{ckpt}.cfg"
    return None


def _run_config(args, ckpt=None) -> RunConfig:
    overrides = {
        "train.seed": getattr(args, "seed", None),
        "train.max_epochs": getattr(args, "max_epochs", None),
        "train.patience": getattr(args, "patience", None),
        "train.learning_rate": getattr(args, "learning_rate", None),
        "batch.time_gap_seconds": getattr(args, "time_gap", None),
        "split.inductive_fraction": getattr(args, "inductive_fraction", None),
        "split.seed": getattr(args, "split_seed", None),
    }
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return load_run_config(_config_path(getattr(args, "config", None), ckpt), overrides)


def _split(log: EventLog, cfg: RunConfig):
    return chronological_split(log, cfg.split.ratios, cfg.split.inductive_fraction, cfg.split.seed)


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# -- subcommands -------------------------------------------------------------------
def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else _env_seed()
    cfg = preset(args.preset, seed=seed, n_passengers=args.passengers, n_stations=args.stations,
                 days=args.days, commuter_fraction=args.commuter_fraction,
                 noise_rate=args.noise_rate)
    text = generate(cfg, header=args.header)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ingest(args) -> int:
    _print_json(_read_log(args.csv).summary())
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    log = _read_log(args.data)
    split = _split(log, cfg)
    cfg.train.checkpoint_path = args.out
    Path(f"{args.out}.cfg").write_text(cfg.to_text())
    result = train(split, cfg.model, cfg.train, progress=print)
    history = args.history or f"{args.out}.history.jsonl"
    Path(history).write_text(result.history_jsonl())
    _print_json({"best_epoch": result.best_epoch, "best_val_ap": result.best_val_ap,
                 "checkpoint": args.out, "history": history})
    return EXIT_OK


def _load(args, log: EventLog):
    cfg = _run_config(args, ckpt=args.ckpt)
    if not Path(args.ckpt).is_file():
        raise DataError(f"no such checkpoint: {args.ckpt}")
    model, _ = load_model(args.ckpt, cfg.model, log.num_passengers, log.num_stations)
    return cfg, model


def cmd_evaluate(args) -> int:
    log = _read_log(args.data)
    cfg, model = _load(args, log)
    seed = args.eval_seed if args.eval_seed is not None else _env_seed()
    _print_json(evaluate(model, _split(log, cfg), args.part, args.mode, seed))
    return EXIT_OK


def cmd_predict(args) -> int:
    log = _read_log(args.data)
    _, model = _load(args, log)
    p = log.dense_passenger(args.passenger)
    s = log.dense_station(args.station)
    prob = model.predict_proba(log, [p], [s], [args.time])[0]
    _print_json({"passenger": args.passenger, "station": args.station, "time": args.time,
                 "probability": float(prob)})
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _run_config(args)
    log = _read_log(args.data)
    split = _split(log, cfg)
    est = (TopBaseline() if args.method == "top" else PersonalTopBaseline()).fit(split.train)
    seed = args.eval_seed if args.eval_seed is not None else _env_seed()
    metrics = evaluate(est, split, args.part, args.mode, seed)
    metrics["method"] = args.method
    _print_json(metrics)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _run_config(args)
    seed = args.seed if args.seed is not None else cfg.train.seed
    reports = toy_gradcheck(cfg.model, seed)
    width = max(len(name) for name in reports)
    print(f"{'block':<{width}}  {'max_rel_error':>13}  {'coords':>6}  status")
    failed = False
    for r in reports.values():
        ok = r.passed(GRADCHECK_TOLERANCE)
        failed |= not ok
        print(f"{r.name:<{width}}  {r.max_rel_error:13.3e}  {r.checked:6d}  {'ok' if ok else 'FAIL'}")
    return EXIT_GRADCHECK if failed else EXIT_OK


# -- parser ------------------------------------------------------------------------
def _add_config_args(p, *, training: bool = False):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--inductive-fraction", type=float)
    p.add_argument("--split-seed", type=int)
    if training:
        p.add_argument("--seed", type=int, help=f"training seed (falls back to {SEED_ENV})")
        p.add_argument("--max-epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--learning-rate", type=float)
        p.add_argument("--time-gap", type=float, help="time-batch span in seconds")


def _add_eval_args(p):
    p.add_argument("--mode", choices=(TRANSDUCTIVE, INDUCTIVE), default=TRANSDUCTIVE)
    p.add_argument("--part", choices=("val", "test"), default="test")
    p.add_argument("--eval-seed", type=int, help=f"negative-sampling seed (falls back to {SEED_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dygpp", description=__doc__)
    parser.add_argument("--threads", type=int, help="cap BLAS threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic event CSV")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--passengers", type=int)
    p.add_argument("--stations", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--commuter-fraction", type=float)
    p.add_argument("--noise-rate", type=float)
    p.add_argument("--header", action="store_true", help="emit a u,i,label,ts header line")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="validate an event CSV and print a summary")
    p.add_argument("csv")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train and write the best checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="JSON-lines history path (default <out>.history.jsonl)")
    _add_config_args(p, training=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="AP/AUC of a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    _add_config_args(p)
    _add_eval_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="link probability for one query")
    p.add_argument("--data", required=True, help="event history CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--passenger", type=int, required=True)
    p.add_argument("--station", type=int, required=True)
    p.add_argument("--time", type=int, required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("baseline", help="AP/AUC of TOP or Personal TOP")
    p.add_argument("--method", choices=("top", "ptop"), required=True)
    p.add_argument("--data", required=True)
    _add_config_args(p)
    _add_eval_args(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gradcheck", help="finite-difference check on a toy log")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("dygpp: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    _tune_allocator()
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"dygpp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError) as exc:
        print(f"dygpp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"dygpp: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
