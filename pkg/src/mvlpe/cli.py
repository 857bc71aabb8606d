"""Command-line entry point: ``mvlpe {fit,eval,trace,synth}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .dataio import load_dataset, synth_multiview, write_dataset
from .errors import ArgumentError, DataError, NumericError
from .evaluation import METHODS, run_experiment
from .model import MvLpeConfig, MvLpeModel, fit, resolve_threads

log = logging.getLogger("mvlpe")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# keys a config file may carry besides the MvLpeConfig fields
RUN_KEYS = {"data", "method", "repeats", "fraction", "base_seed", "out"}
SYNTH_KEYS = {"n_per_class", "n_classes", "views", "seed", "latent_dim", "class_sep",
              "latent_spread", "layout"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(f"{self.prog}: {message}")


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ArgumentError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ArgumentError(f"{p}: top level must be an object")
    return data


def load_cli_config(path) -> tuple[MvLpeConfig, dict]:
    """Split a config file into the model config and the run options; unknown keys are errors."""
    data = _read_json(path) if path else {}
    run = {k: data.pop(k) for k in list(data) if k in RUN_KEYS}
    return MvLpeConfig.from_dict(data), run


def _write(path, text: str):
    Path(path).write_text(text, encoding="utf-8")


def cmd_fit(args) -> int:
    config, run = load_cli_config(args.config)
    data = args.data or run.get("data")
    out = args.out or run.get("out")
    if not data or not out:
        raise ArgumentError("fit needs --data and --out")
    model = fit(load_dataset(data), config, threads=args.threads)
    _write(out, model.to_json())
    print(f"iters={model.iters} converged={model.converged} objective={model.objective_trace[-1]:.10g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config, run = load_cli_config(args.config)
    data = args.data or run.get("data")
    method = args.method or run.get("method", "mvlpe")
    repeats = args.repeats if args.repeats is not None else run.get("repeats", 20)
    fraction = args.fraction if args.fraction is not None else run.get("fraction", 0.5)
    base_seed = args.base_seed if args.base_seed is not None else run.get("base_seed", 0)
    out = args.out or run.get("out")
    if not data:
        raise ArgumentError("eval needs --data")
    if method not in METHODS:
        raise ArgumentError(f"--method must be one of {METHODS}")
    if not isinstance(repeats, int) or repeats < 1:
        raise ArgumentError(f"--repeats must be an integer >= 1, got {repeats!r}")
    if not isinstance(fraction, (int, float)) or not (0.0 < fraction < 1.0):
        raise ArgumentError(f"--fraction must lie in the open range (0, 1), got {fraction!r}")
    report = run_experiment(load_dataset(data), method, config, repeats=repeats, fraction=float(fraction),
                            base_seed=int(base_seed), threads=args.threads)
    if out:
        _write(out, report.to_csv())
    else:
        sys.stdout.write(report.to_csv())
    print(report.summary_line())
    if report.partial:
        for msg in report.errors:
            print(f"error: {msg}", file=sys.stderr)
        print(f"{report.failures} of {report.repeats} repeats failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def trace_csv(model: MvLpeModel) -> str:
    m = len(model.weights.w)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iter", "objective"] + [f"disagreement_v{v + 1}" for v in range(m)])
    for i, (obj, dis) in enumerate(zip(model.objective_trace, model.disagreement_trace), start=1):
        writer.writerow([i, repr(float(obj))] + [repr(float(x)) for x in dis])
    return buf.getvalue()


def cmd_trace(args) -> int:
    p = Path(args.model)
    if not p.is_file():
        raise ArgumentError(f"model file not found: {p}")
    try:
        model = MvLpeModel.from_json(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"{p}: not a model file ({exc})") from None
    _write(args.out, trace_csv(model))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = _read_json(args.spec)
    unknown = set(spec) - SYNTH_KEYS
    if unknown:
        raise ArgumentError(f"unknown synth keys: {sorted(unknown)}")
    missing = {"n_per_class", "n_classes", "views"} - set(spec)
    if missing:
        raise ArgumentError(f"synth spec missing keys: {sorted(missing)}")
    views = []
    for item in spec.pop("views"):
        if isinstance(item, dict):
            views.append((int(item["dim"]), float(item.get("sigma", 0.0))))
        else:
            dim, sigma = item
            views.append((int(dim), float(sigma)))
    ds = synth_multiview(view_specs=views, seed=spec.pop("seed", 0), **spec)
    write_dataset(ds, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvlpe", description="Multi-view low-rank preserving embedding")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-view work (default: $MVLPE_THREADS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    p.add_argument("--data")
    p.add_argument("--config")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="repeated-split 1NN evaluation")
    p.add_argument("--data")
    p.add_argument("--config")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--repeats", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="export the convergence trace of a model as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("synth", help="write a synthetic dataset directory")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def execute(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ArgumentError("missing subcommand: one of fit, eval, trace, synth")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(execute())


if __name__ == "__main__":
    main()
