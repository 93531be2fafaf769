"""Command-line entry point.

Subcommands: gen-data, train-teacher, train-student, evaluate, gradcheck,
dump-embeddings. Every command takes a config file (flat ``section.key =
value``), writes its outputs under a run directory
``<workdir>/<run-name>/{config.resolved, checkpoints/, logs/, reports/}``,
and exits nonzero with a one-line ``category: message`` on stderr when it
fails. Output files contain no timestamps, so reruns with the same config
and run name are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime
from pathlib import Path

from . import nn
from .config import ExperimentConfig, load_config, resolved_text
from .dataset import Corpus, generate_corpus, read_corpus, write_corpus
from .errors import (
    CheckpointMismatchError,
    MissingFileError,
    WaveVerifyError,
    exit_code_for,
)
from .evaluation import (
    EvalProtocol,
    build_trials,
    dump_embeddings,
    metrics_report,
    score_trials,
    write_metrics,
    write_scores,
    write_trials,
)
from .model import Model, arch_from_meta, arch_meta
from .nn import load_checkpoint
from .train import LossVariant, train_student, train_teacher

PROTOCOLS = ("long", "short", "jitter")


def _run_dir(config: ExperimentConfig, command: str, run_name: str | None) -> Path:
    name = run_name or f"{command}-{datetime.now().strftime('%Y%m%d-%H%M%S')}"
    run = Path(config.workdir) / name
    for sub in ("checkpoints", "logs", "reports"):
        (run / sub).mkdir(parents=True, exist_ok=True)
    (run / "config.resolved").write_text(resolved_text(config))
    return run


def _corpus_dir(config: ExperimentConfig, data: str | None) -> Path:
    return Path(data) if data else Path(config.workdir) / "corpus"


def _load_corpus(config: ExperimentConfig, data: str | None) -> Corpus:
    directory = _corpus_dir(config, data)
    if not directory.exists():
        raise MissingFileError(f"corpus directory {directory} does not exist (run gen-data first)")
    return read_corpus(directory)


def _load_ckpt_for(config: ExperimentConfig, path: str):
    ckpt = Path(path)
    if not ckpt.is_file():
        raise MissingFileError(f"checkpoint {ckpt} does not exist")
    store, meta = load_checkpoint(ckpt, dtype=config.arch.np_dtype)
    ckpt_arch = arch_from_meta(meta)
    if ckpt_arch != config.arch:
        raise CheckpointMismatchError(
            f"checkpoint {ckpt} was built for a different architecture: "
            f"{ckpt_arch.to_dict()} vs config {config.arch.to_dict()}"
        )
    return store


def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    out = _corpus_dir(config, args.out)
    corpus = generate_corpus(config.corpus, n_threads=args.threads)
    write_corpus(corpus, out)
    (out / "config.resolved").write_text(resolved_text(config))
    print(f"wrote {len(corpus)} utterances to {out}")
    return 0


def cmd_train_teacher(args) -> int:
    config = load_config(args.config)
    corpus = _load_corpus(config, args.data)
    train_c, _ = corpus.split_train_eval(config.eval.utts_per_speaker)
    run = _run_dir(config, "train-teacher", args.run_name)
    ckpt = run / "checkpoints" / "teacher.ckpt"
    train_teacher(
        train_c,
        config.arch,
        config.teacher,
        log_path=run / "logs" / "teacher_metrics.tsv",
        ckpt_path=ckpt,
        verbose=not args.quiet,
    )
    print(f"teacher checkpoint: {ckpt}")
    return 0


def cmd_train_student(args) -> int:
    config = load_config(args.config)
    corpus = _load_corpus(config, args.data)
    train_c, _ = corpus.split_train_eval(config.eval.utts_per_speaker)
    teacher = _load_ckpt_for(config, args.teacher_ckpt)
    teacher.freeze()
    variant = LossVariant(args.variant or config.variant.kind, config.variant.lambda_dist)
    run = _run_dir(config, "train-student", args.run_name)
    ckpt = run / "checkpoints" / f"student_{variant.kind}.ckpt"
    train_student(
        train_c,
        teacher,
        config.arch,
        config.student,
        variant,
        log_path=run / "logs" / f"student_{variant.kind}_metrics.tsv",
        ckpt_path=ckpt,
        verbose=not args.quiet,
    )
    print(f"student checkpoint: {ckpt}")
    return 0


def _protocol_for(config: ExperimentConfig, name: str, jitter_frac: float | None) -> EvalProtocol:
    ev = config.eval
    if name == "long":
        return EvalProtocol(ev.long_crop_samples, ev.long_crop_samples, 0.0, ev.seed)
    if name == "short":
        return EvalProtocol(ev.short_crop_samples, ev.short_crop_samples, 0.0, ev.seed)
    frac = ev.jitter_frac if jitter_frac is None else jitter_frac
    jitter_s = frac * ev.short_crop_samples / config.corpus.sample_rate
    return EvalProtocol(ev.short_crop_samples, ev.short_crop_samples, jitter_s, ev.seed)


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    corpus = _load_corpus(config, args.data)
    _, eval_c = corpus.split_train_eval(config.eval.utts_per_speaker)
    store = _load_ckpt_for(config, args.ckpt)
    protocol = _protocol_for(config, args.protocol, args.jitter_frac)
    trials = build_trials(eval_c, config.eval.n_genuine, config.eval.n_impostor, config.eval.trial_seed)
    scores = score_trials(Model(config.arch), store, eval_c, trials, protocol)
    report = metrics_report(scores, protocol)

    run = _run_dir(config, "evaluate", args.run_name)
    tag = args.protocol if args.jitter_frac is None else f"{args.protocol}{args.jitter_frac:g}"
    write_trials(trials, run / "reports" / f"trials_{tag}.tsv")
    write_scores(scores, run / "reports" / f"scores_{tag}.tsv")
    write_metrics(report, run / "reports" / f"eval_{tag}.json")
    print(f"protocol {tag}: EER {report['eer']:.4f} at threshold {report['threshold']:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    from .nn.gradcheck import run_suite

    report = run_suite(n_stacks=args.stacks, depth=args.depth, seed=args.seed)
    for line in report.lines():
        print(line)
    if not report.passed:
        print("gradcheck-failed: gradients disagree with finite differences", file=sys.stderr)
        return 8
    return 0


def cmd_dump_embeddings(args) -> int:
    config = load_config(args.config)
    corpus = _load_corpus(config, args.data)
    _, eval_c = corpus.split_train_eval(config.eval.utts_per_speaker)
    store = _load_ckpt_for(config, args.ckpt)
    crop = args.crop or config.eval.long_crop_samples
    run = _run_dir(config, "dump-embeddings", args.run_name)
    out = run / "reports" / f"embeddings_{crop}.tsv"
    dump_embeddings(Model(config.arch), store, eval_c, crop, out)
    print(f"embeddings: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waveverify",
        description="Short-utterance speaker verification: synthetic corpus, "
        "CNN-GRU embeddings, teacher-student distillation, EER evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, quiet: bool = False):
        p.add_argument("config", help="flat section.key=value config file")
        p.add_argument("--data", help="corpus directory (default <workdir>/corpus)")
        p.add_argument("--run-name", help="run directory name (default: command + timestamp)")
        if quiet:
            p.add_argument("--quiet", action="store_true", help="suppress per-epoch progress")

    p = sub.add_parser("gen-data", help="generate the synthetic corpus")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default <workdir>/corpus)")
    p.add_argument("--threads", type=int, default=1, help="synthesis worker threads")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-teacher", help="train the speaker classifier on long crops")
    common(p, quiet=True)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("train-student", help="distill a frozen teacher into a short-crop student")
    common(p, quiet=True)
    p.add_argument("--teacher-ckpt", required=True, help="teacher checkpoint path")
    p.add_argument("--variant", choices=("output_kl", "emb_mse", "emb_cos", "emb_cos_plus_kl"),
                   help="override student.variant from the config")
    p.set_defaults(func=cmd_train_student)

    p = sub.add_parser("evaluate", help="score verification trials and report EER")
    common(p)
    p.add_argument("--ckpt", required=True, help="checkpoint to evaluate")
    p.add_argument("--protocol", choices=PROTOCOLS, default="short")
    p.add_argument("--jitter-frac", type=float,
                   help="jitter protocol: fraction of the short duration (default eval.jitter_frac)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stacks", type=int, default=100)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("dump-embeddings", help="export eval-set embeddings as TSV")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--crop", type=int, help="crop length in samples (default eval.long_crop_samples)")
    p.set_defaults(func=cmd_dump_embeddings)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WaveVerifyError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
