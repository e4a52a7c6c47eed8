"""Command-line entry point: ``dualground <subcommand> [flags]``.

Exit codes: 0 on success, 1 on a usage error, 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger("dualground")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser | None = None):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so ``run`` owns the exit code."""

    def error(self, message):
        raise UsageError(message, self)


@dataclass
class CliConfig:
    subcommand: str
    overrides: dict = field(default_factory=dict)
    seed: int | None = None
    verbosity: int = 0


def parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--config expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


# -- subcommands --------------------------------------------------------------


def cmd_gen(args) -> int:
    from .scenegen import dataset_summary, generate_dataset, save_dataset

    samples = generate_dataset(args.seed, args.num_scenes, args.objects_per_scene)
    save_dataset(args.out, samples)
    summary = dataset_summary(samples)
    print(f"wrote {summary['samples']} samples to {args.out}")
    print(f"  unique   {summary['unique']}")
    print(f"  multiple {summary['multiple']}")
    for rel, n in summary["relations"].items():
        print(f"  {rel:<12}{n}")
    return EXIT_OK


def _load_config(args):
    from .grounding import ModelConfig

    overrides = parse_overrides(args.config)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return ModelConfig().with_overrides(overrides)


def cmd_train(args) -> int:
    from .grounding import Vocab, save_checkpoint, train
    from .scenegen import load_dataset

    cfg = _load_config(args)
    samples = load_dataset(args.data)
    vocab = Vocab.default()
    metrics_fh = open(args.metrics, "w", encoding="utf-8") if args.metrics else None

    def emit(rec):
        line = json.dumps(rec, sort_keys=True)
        print(line, flush=True)
        if metrics_fh:
            metrics_fh.write(line + "\n")

    def checkpoint(step, params):
        save_checkpoint(args.out, params, cfg, vocab, {"step": step})
        log.info("checkpoint at step %d -> %s", step, args.out)

    try:
        result = train(
            samples,
            cfg,
            vocab=vocab,
            on_metrics=emit,
            on_checkpoint=checkpoint,
            checkpoint_every=args.checkpoint_every,
        )
    finally:
        if metrics_fh:
            metrics_fh.close()
    save_checkpoint(args.out, result.params, cfg, result.vocab, {"step": cfg.steps})
    return EXIT_OK


def cmd_eval(args) -> int:
    from .grounding import evaluate, load_checkpoint, prepare_sample
    from .scenegen import load_dataset

    params, cfg, vocab = load_checkpoint(args.checkpoint)
    samples = load_dataset(args.data)
    report = evaluate([prepare_sample(s, cfg, vocab) for s in samples], params, cfg)
    print(report.format())
    summary = json.dumps(report.to_dict(), sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(summary + "\n")
    else:
        print(summary)
    return EXIT_OK


def write_pgm(path, values: np.ndarray) -> None:
    """Binary grayscale heatmap, scaled so the map's maximum is white."""
    v = np.asarray(values, dtype=np.float64)
    top = v.max()
    img = np.zeros(v.shape, dtype=np.uint8) if top <= 0 else np.round(255 * np.clip(v / top, 0, 1)).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def _find_sample(samples, sample_id: str):
    for s in samples:
        if s.scene.scene_id == sample_id:
            return s
    if sample_id.isdigit() and int(sample_id) < len(samples):
        return samples[int(sample_id)]
    raise LookupError(f"no sample with id {sample_id!r} (give a scene id or a row index < {len(samples)})")


def cmd_attn_dump(args) -> int:
    from .grounding import forward, load_checkpoint, prepare_sample
    from .numerics import no_grad
    from .scenegen import load_dataset

    params, cfg, vocab = load_checkpoint(args.checkpoint)
    sample = _find_sample(load_dataset(args.data), args.sample_id)
    with no_grad():
        res = forward(params, cfg, prepare_sample(sample, cfg, vocab), trace=True)
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for li, rec in enumerate(res.trace.layers):
        for key in sorted(rec):
            if not key.endswith("_visual_attn"):
                continue
            branch = key[: -len("_visual_attn")]
            amap = rec[key].mean(axis=0)  # heads averaged: queries x seeds
            stem = os.path.join(args.out_dir, f"layer{li}_{branch}")
            np.savetxt(stem + ".csv", amap, delimiter=",", fmt="%.8e")
            write_pgm(stem + ".pgm", amap)
            written.append(stem)
    for stem in written:
        print(f"{stem}.csv {stem}.pgm")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_schemes, compare_report

    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    if len(schemes) < 2:
        raise UsageError("--schemes needs at least two comma-separated schemes")
    results = bench_schemes(schemes, args.K, args.N, args.D, args.heads, args.reps)
    text, csv_text = compare_report(results)
    print(text)
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    return EXIT_OK


def cmd_decouple(args) -> int:
    from .textsplit import decouple_lines

    for line in decouple_lines(sys.stdin):
        print(line)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualground", description="Synthetic 3D grounding toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="subcommand", metavar="{gen,train,eval,bench,attn-dump,decouple}")

    g = sub.add_parser("gen", help="generate a synthetic grounding dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--num-scenes", type=int, required=True)
    g.add_argument("--objects-per-scene", type=int, default=8)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the grounding model")
    t.add_argument("--data", required=True)
    t.add_argument("--config", action="append", default=[], metavar="KEY=VALUE", help="model config override")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--metrics", default=None, help="also write metric records to this file")
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", default=None, help="JSON summary path (stdout if omitted)")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="position-encoding cost microbenchmark")
    b.add_argument("--schemes", default="box_surface,center,vertex")
    b.add_argument("--K", type=int, default=256)
    b.add_argument("--N", type=int, default=1024)
    b.add_argument("--D", type=int, default=256)
    b.add_argument("--heads", type=int, default=8)
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--out-csv", default=None)
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("attn-dump", help="write attention maps for one sample")
    a.add_argument("--data", required=True)
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--sample-id", required=True)
    a.add_argument("--out-dir", default="attn")
    a.set_defaults(func=cmd_attn_dump)

    d = sub.add_parser("decouple", help="label utterances from stdin")
    d.set_defaults(func=cmd_decouple)
    p.subcommands = dict(sub.choices)
    return p


def run(argv) -> int:
    from .grounding import ConfigError, TrainingError
    from .bench import BenchBusyError
    from .scenegen import DatasetError

    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(list(argv))
        if args.subcommand is None:
            raise UsageError("a subcommand is required", parser)
        if extra:
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}", parser.subcommands[args.subcommand])
        cfg = CliConfig(args.subcommand, parse_overrides(getattr(args, "config", None)),
                        getattr(args, "seed", None), args.verbose)
        logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbosity, 2), format="%(levelname)s %(message)s")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, UsageError):
            print((exc.parser or parser).format_help(), file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, TrainingError, BenchBusyError, OSError, LookupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run(sys.argv[1:]))
