"""Command-line entry point: ``dcqec {train,threshold,bench,effective-rate,stub}``.

Exit codes: 0 success, 2 usage error, 3 runtime or data error.  Every output
file starts with a ``#`` metadata block (tool version, resolved config, seed,
model checksum).  If ``DCQEC_OUTPUT_DIR`` is set, relative output paths are
resolved against it.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .experiments import (
    find_crossing,
    fit_collapse,
    fit_power_law,
    format_collapse,
    metadata_block,
    run_effective_rate_scan,
    run_threshold_scan,
    run_timing_scan,
    write_effective_rate_csv,
    write_threshold_csv,
    write_timing_csv,
)
from .neural import MlpConfig, MlpModel, ModelFileError, TrainSpec, TrainingDivergedError, load_model, save_model, train
from .pipeline import DECODERS
from .uf import BACKEND

log = logging.getLogger("dcqec")

EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def _parse_grid(text: str) -> list[float]:
    """``0.13:0.16:0.005`` (inclusive range) or ``0.01,0.05,0.1``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(round((stop - start) / step))
            return [round(start + i * step, 12) for i in range(n + 1)]
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}; use a,b,c or start:stop:step") from None


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size list {text!r}") from None
    if not sizes or min(sizes) < 2:
        raise argparse.ArgumentTypeError("lattice sizes must be integers >= 2")
    return sizes


def _output_path(raw: str) -> Path:
    path = Path(raw)
    base = os.environ.get("DCQEC_OUTPUT_DIR")
    if base and not path.is_absolute():
        path = Path(base) / path
    if not path.parent.is_dir():
        raise OSError(f"output directory {path.parent} does not exist")
    return path


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(path):
    if not path:
        raise UsageError("the ml+uf decoder requires --model")
    if not Path(path).exists():
        raise UsageError(f"model file {path} does not exist")
    return load_model(path)


def _resolved(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg.update(extra)
    cfg["backend"] = BACKEND
    return cfg


def cmd_train(args) -> int:
    if args.l_input < 1 or args.l_input % 2 == 0:
        raise UsageError("--l-input must be a positive odd integer")
    if args.l_input > args.l_train:
        raise UsageError("--l-input cannot exceed --l-train")
    spec = TrainSpec(batch_size=args.batch_size, epochs=args.epochs, learning_rate=args.learning_rate,
                     l_train=args.l_train, p_train=args.p_train, seed=args.seed)
    config = MlpConfig(args.l_input, args.hidden_layers, args.hidden_nodes)
    out = _output_path(args.output)
    resolved = _resolved(args, **{f"train.{k}": v for k, v in asdict(spec).items()})
    sys.stdout.write(metadata_block(resolved))
    if args.dry_run:
        return 0
    result = train(spec, config, log_every=args.log_every)
    save_model(result.model, out)
    with open(_sidecar(out, ".losses.csv"), "w") as fh:
        fh.write(metadata_block(dict(resolved, model_sha256=_checksum(out))))
        fh.write("iteration,loss\n")
        for i, loss in enumerate(result.losses):
            fh.write(f"{i},{loss!r}\n")
    print(f"wrote {out}")
    return 0


def cmd_stub(args) -> int:
    """Constant-prediction model, used to check that ml+uf reduces to uf."""
    config = MlpConfig(args.l_input, args.hidden_layers, args.hidden_nodes)
    out = _output_path(args.output)
    save_model(MlpModel.constant(config, 0), out)
    print(f"wrote {out}")
    return 0


def cmd_threshold(args) -> int:
    model = _load(args.model) if args.decoder == "ml+uf" else None
    out = _output_path(args.output)
    meta = _resolved(args, model_sha256=_checksum(args.model) if model else None)
    points = run_threshold_scan(args.decoder, args.size, args.p, args.trials, seed=args.seed,
                                model=model, workers=args.workers)
    with open(out, "w") as fh:
        write_threshold_csv(fh, points, meta)
    sizes = {pt.L for pt in points}
    if len(sizes) >= 3 and len(args.p) >= 5:
        try:
            fit = fit_collapse(points, bootstrap=args.bootstrap, seed=args.seed)
        except ValueError as exc:
            log.warning("collapse fit skipped: %s", exc)
        else:
            with open(_sidecar(out, ".collapse.txt"), "w") as fh:
                fh.write(format_collapse(fit))
            print(f"p_th = {fit.p_th:.4f} +/- {fit.p_th_err:.4f}, nu = {fit.nu:.2f} +/- {fit.nu_err:.2f}")
    print(f"wrote {out}")
    return 0


def cmd_bench(args) -> int:
    decoders = [d.strip() for d in args.decoders.split(",") if d.strip()]
    for d in decoders:
        if d not in DECODERS:
            raise UsageError(f"unknown decoder {d!r}")
    model = _load(args.model) if "ml+uf" in decoders else None
    out = _output_path(args.output)
    meta = _resolved(args, model_sha256=_checksum(args.model) if model else None,
                     timing="decode only; sampling and syndrome extraction excluded")
    tables = {d: run_timing_scan(d, args.size, args.p, args.instances, seed=args.seed, model=model, warmup=args.warmup)
              for d in decoders}
    with open(out, "w") as fh:
        write_timing_csv(fh, [pt for d in decoders for pt in tables[d]], meta)
    if len(decoders) == 2:
        with open(_sidecar(out, ".crossing.txt"), "w") as fh:
            fh.write(metadata_block(meta))
            fh.write("p,crossing_L\n")
            for p in args.p:
                L = find_crossing(tables["uf"], tables["ml+uf"], p)
                fh.write(f"{p!r},{'' if L is None else L}\n")
    for d in decoders:
        if len(args.size) >= 2:
            slope, _ = fit_power_law([pt for pt in tables[d] if pt.p_err == args.p[0]])
            print(f"{d}: log-log slope vs n at p={args.p[0]}: {slope:.3f}")
    print(f"wrote {out}")
    return 0


def cmd_effective_rate(args) -> int:
    model = _load(args.model)
    out = _output_path(args.output)
    meta = _resolved(args, model_sha256=_checksum(args.model))
    points = run_effective_rate_scan(args.p, model, args.size, args.trials, seed=args.seed)
    with open(out, "w") as fh:
        write_effective_rate_csv(fh, points, meta)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcqec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dcqec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def network_args(p, with_input=True):
        if with_input:
            p.add_argument("--l-input", type=int, default=5, help="window side length (odd)")
        p.add_argument("--hidden-layers", type=int, default=3)
        p.add_argument("--hidden-nodes", type=int, default=128)

    p = sub.add_parser("train", help="train a window classifier")
    network_args(p)
    defaults = TrainSpec()
    p.add_argument("--epochs", type=int, default=defaults.epochs, help="number of generated batches")
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p.add_argument("--l-train", type=int, default=defaults.l_train)
    p.add_argument("--p-train", type=float, default=defaults.p_train)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=int, default=10_000)
    p.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--output", required=True, help="model file (.npz); losses go to <stem>.losses.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stub", help="write a model that always predicts I")
    network_args(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_stub)

    p = sub.add_parser("threshold", help="logical failure scan and collapse fit")
    p.add_argument("--decoder", choices=DECODERS, default="uf")
    p.add_argument("--size", type=_parse_sizes, default=[7, 11, 15, 23, 31])
    p.add_argument("--p", type=_parse_grid, default=_parse_grid("0.13:0.16:0.005"))
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("bench", help="wall-clock decode timing")
    p.add_argument("--decoders", default="uf")
    p.add_argument("--size", type=_parse_sizes, default=[31, 63, 127, 255])
    p.add_argument("--p", type=_parse_grid, default=[0.05])
    p.add_argument("--instances", type=int, default=10_000)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("effective-rate", help="residual error rate after the network stage")
    p.add_argument("--p", type=_parse_grid, default=_parse_grid("0.01,0.02,0.05,0.1,0.15"))
    p.add_argument("--size", type=int, default=31)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_effective_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"dcqec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ModelFileError, TrainingDivergedError, ValueError, RuntimeError) as exc:
        print(f"dcqec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
