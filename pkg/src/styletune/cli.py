"""Command-line interface.

Subcommands: transfer, bench classify|retrieval|param-est, presets, datagen,
effects. Exit codes: 0 success, 1 usage error, 2 runtime error. All file
outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bench, presets as presets_mod
from .audio import AudioError, make_rng, read_wav, write_wav
from .chain import ChainError, parse_chain_spec
from .effects import EffectError, builtin_effects
from .features import FeatureError
from .transfer import TransferConfig, report_to_text, style_transfer


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_text_atomic(text: str, path) -> None:
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="styletune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transfer", help="match a reference recording's style")
    p.add_argument("--input", required=True, help="input WAV file")
    p.add_argument("--reference", required=True, help="reference WAV file")
    p.add_argument("--chain", required=True, help="chain-spec text file")
    p.add_argument("--output", required=True, help="output WAV path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--population", type=int, default=64)
    p.add_argument("--max-generations", type=int, default=25)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--min-improvement", type=float, default=0.1)
    p.add_argument("--sigma0", type=float, default=0.3)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument(
        "--normalize", action="store_true", help="peak-normalize output to -1 dBFS"
    )
    p.add_argument(
        "--encoding", choices=("pcm16", "float32"), default="float32"
    )

    pb = sub.add_parser("bench", help="run an evaluation task")
    bench_sub = pb.add_subparsers(dest="bench_task", required=True)

    pc = bench_sub.add_parser("classify", help="zero-shot style classification")
    pc.add_argument("--trials", type=int, default=200)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--corpus", help="directory of WAV clips (default: synthetic)")
    pc.add_argument("--corpus-size", type=int, default=12)
    pc.add_argument("--out", required=True, help="report TSV path")

    pr = bench_sub.add_parser("retrieval", help="style retrieval")
    pr.add_argument("--trials", type=int, default=200)
    pr.add_argument("--n-effects", type=int, default=1)
    pr.add_argument("--set-size", type=int, default=5)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--corpus", help="directory of WAV clips (default: synthetic)")
    pr.add_argument("--corpus-size", type=int, default=12)
    pr.add_argument("--out", required=True)

    pe = bench_sub.add_parser("param-est", help="hidden-parameter estimation")
    pe.add_argument("--effect", required=True)
    pe.add_argument("--param", required=True)
    pe.add_argument("--targets", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8])
    pe.add_argument("--trials-per-target", type=int, default=3)
    pe.add_argument("--population", type=int, default=64)
    pe.add_argument("--max-generations", type=int, default=25)
    pe.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", required=True)

    pp = sub.add_parser("presets", help="generate presets for one effect")
    pp.add_argument("--effect", required=True)
    pp.add_argument("--probe", help="probe WAV (default: seeded pink noise)")
    pp.add_argument("--n-configs", type=int, default=1000)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--out", required=True, help="preset store TSV path")

    pd = sub.add_parser("datagen", help="export a pretext example dataset")
    pd.add_argument("--audio-dir", action="append", required=True)
    pd.add_argument("--n-examples", type=int, required=True)
    pd.add_argument("--crop-len", type=int, default=524288)
    pd.add_argument("--presets", required=True, help="preset store TSV")
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--out-dir", required=True)

    sub.add_parser("effects", help="print the effect registry")
    return parser


def _get_corpus(args):
    if args.corpus:
        return bench.load_corpus(args.corpus)
    return bench.make_corpus(args.corpus_size, make_rng(args.seed + 1))


def _cmd_transfer(args) -> int:
    input_buffer = read_wav(args.input)
    reference = read_wav(args.reference)
    chain = parse_chain_spec(Path(args.chain).read_text())
    cfg = TransferConfig(
        chain=chain,
        population=args.population,
        sigma0=args.sigma0,
        max_generations=args.max_generations,
        patience=args.patience,
        min_improvement=args.min_improvement,
        seed=args.seed,
        threads=args.threads,
        normalize_output=args.normalize,
    )
    output, report = style_transfer(input_buffer, reference, cfg)
    write_wav(output, args.output, args.encoding)
    _write_text_atomic(report_to_text(report), str(args.output) + ".report.txt")
    print(
        f"best similarity {report.best_similarity:.4f} "
        f"(initial {report.initial_similarity:.4f}, "
        f"{report.evaluations} evaluations)"
    )
    return 0


def _cmd_bench(args) -> int:
    if args.bench_task == "classify":
        report = bench.run_classification(
            _get_corpus(args), trials=args.trials, rng=make_rng(args.seed)
        )
    elif args.bench_task == "retrieval":
        report = bench.run_retrieval(
            _get_corpus(args),
            n_effects=args.n_effects,
            set_size=args.set_size,
            trials=args.trials,
            rng=make_rng(args.seed),
        )
    else:
        report = bench.run_param_estimation(
            args.effect,
            args.param,
            targets=tuple(args.targets),
            trials_per_target=args.trials_per_target,
            rng=make_rng(args.seed),
            population=args.population,
            max_generations=args.max_generations,
            threads=args.threads,
        )
    _write_text_atomic(report.to_tsv(), args.out)
    for key in sorted(report.aggregates):
        print(f"{key}\t{bench._fmt(report.aggregates[key])}")
    return 0


def _cmd_presets(args) -> int:
    rng = make_rng(args.seed)
    if args.probe:
        probe = read_wav(args.probe)
    else:
        probe = bench.synthetic_clip("pink", 3.0, 48000, make_rng(args.seed + 1))
    result = presets_mod.generate_presets(
        args.effect, probe, rng, n_configs=args.n_configs
    )
    text_rows = []
    for p in result:
        values = " ".join(f"{v:.12g}" for v in p.values)
        text_rows.append(f"{p.effect_id}\t{p.preset_index}\t{values}")
    _write_text_atomic("\n".join(text_rows) + "\n", args.out)
    print(f"wrote {len(result)} presets to {args.out}")
    return 0


def _cmd_datagen(args) -> int:
    store = presets_mod.load_presets(args.presets)
    manifest = presets_mod.generate_pretext_dataset(
        args.audio_dir,
        args.n_examples,
        args.crop_len,
        args.out_dir,
        make_rng(args.seed),
        store,
    )
    print(f"wrote {len(manifest)} examples to {args.out_dir}")
    return 0


def _cmd_effects(args) -> int:
    for desc in builtin_effects():
        print(desc.effect_id)
        for spec in desc.params:
            unit = f" {spec.unit}" if spec.unit else ""
            print(f"  {spec.name}\t[{spec.lo:g}, {spec.hi:g}]{unit}\t{spec.curve}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "transfer":
            return _cmd_transfer(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "presets":
            return _cmd_presets(args)
        if args.command == "datagen":
            return _cmd_datagen(args)
        return _cmd_effects(args)
    except (AudioError, ChainError, EffectError, FeatureError, bench.BenchError,
            presets_mod.PresetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
