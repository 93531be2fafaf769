"""Experiment configuration: flat ``section.key = value`` text files.

Lines are ``key = value`` with dotted section prefixes; ``#`` starts a
comment. Every key has a default, unknown keys are errors, and a resolved
copy (all defaults expanded, sorted, timestamp-free) is echoed into each run
directory so a run can be reproduced from that file alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .dataset import CorpusSpec
from .errors import ConfigError
from .model import ARCH_PRESETS, ArchConfig, min_samples
from .train import LossVariant, TrainConfig, VARIANT_KINDS


def _bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p.strip()) for p in s.split(",") if p.strip())


# key -> (parser, default). Defaults define the shipped desk-scale experiment.
SCHEMA: dict[str, tuple] = {
    "corpus.n_speakers": (int, 40),
    "corpus.utts_per_speaker": (int, 30),
    "corpus.duration_min_s": (float, 4.0),
    "corpus.duration_max_s": (float, 8.0),
    "corpus.sample_rate": (int, 4000),
    "corpus.seed": (int, 101),
    "arch.preset": (str, "desk"),
    "arch.first_conv_kernel": (int, None),
    "arch.first_conv_stride": (int, None),
    "arch.first_conv_channels": (int, None),
    "arch.n_blocks": (int, None),
    "arch.block_channels": (_int_list, None),
    "arch.block_kernel": (int, None),
    "arch.pool_size": (int, None),
    "arch.pool_stride": (int, None),
    "arch.gru_units": (int, None),
    "arch.fc1": (int, None),
    "arch.fc2": (int, None),
    "arch.lrelu_alpha": (float, None),
    "arch.dtype": (str, None),
    "teacher.epochs": (int, 30),
    "teacher.batch_size": (int, 16),
    "teacher.lr": (float, 0.01),
    "teacher.momentum": (float, 0.9),
    "teacher.seed": (int, 1),
    "teacher.loss_reduction": (str, "mean"),
    "teacher.long_crop_samples": (int, 6561),
    "student.variant": (str, "emb_cos_plus_kl"),
    "student.lambda_dist": (float, 1.0),
    "student.epochs": (int, 8),
    "student.batch_size": (int, 16),
    "student.lr": (float, 0.01),
    "student.momentum": (float, 0.9),
    "student.seed": (int, 2),
    "student.loss_reduction": (str, "mean"),
    "student.long_crop_samples": (int, 6561),
    "student.short_crop_samples": (int, 3645),
    "eval.utts_per_speaker": (int, 10),
    "eval.n_genuine": (int, 2000),
    "eval.n_impostor": (int, 2000),
    "eval.trial_seed": (int, 11),
    "eval.long_crop_samples": (int, 6561),
    "eval.short_crop_samples": (int, 3645),
    "eval.jitter_frac": (float, 0.1),
    "eval.seed": (int, 5),
    "paths.workdir": (str, "runs"),
}


@dataclass(frozen=True)
class EvalSettings:
    utts_per_speaker: int
    n_genuine: int
    n_impostor: int
    trial_seed: int
    long_crop_samples: int
    short_crop_samples: int
    jitter_frac: float
    seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusSpec
    arch: ArchConfig
    teacher: TrainConfig
    student: TrainConfig
    variant: LossVariant
    eval: EvalSettings
    workdir: str
    resolved: dict  # flat key -> string value, every key present


def parse_flat(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``section.key = value`` lines into a flat string mapping."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _typed(values: dict[str, str], source: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for key, (parse, default) in SCHEMA.items():
        if key in values:
            try:
                out[key] = parse(values[key])
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {key}: {exc}") from None
        else:
            out[key] = default
    return out


def resolve(values: dict[str, str], source: str = "<config>") -> ExperimentConfig:
    """Apply defaults, build the typed sub-configs, and cross-validate."""
    v = _typed(values, source)

    corpus = CorpusSpec(
        n_speakers=v["corpus.n_speakers"],
        utts_per_speaker=v["corpus.utts_per_speaker"],
        duration_range_s=(v["corpus.duration_min_s"], v["corpus.duration_max_s"]),
        sample_rate=v["corpus.sample_rate"],
        seed=v["corpus.seed"],
    )

    preset_name = v["arch.preset"]
    if preset_name not in ARCH_PRESETS:
        raise ConfigError(f"{source}: unknown arch.preset {preset_name!r} (have {sorted(ARCH_PRESETS)})")
    arch = ARCH_PRESETS[preset_name](n_speakers=corpus.n_speakers)
    overrides = {}
    field_map = {
        "arch.first_conv_kernel": "first_conv_kernel",
        "arch.first_conv_stride": "first_conv_stride",
        "arch.first_conv_channels": "first_conv_channels",
        "arch.n_blocks": "n_blocks",
        "arch.block_channels": "block_channels",
        "arch.block_kernel": "block_kernel",
        "arch.pool_size": "pool_size",
        "arch.pool_stride": "pool_stride",
        "arch.gru_units": "gru_units",
        "arch.lrelu_alpha": "lrelu_alpha",
        "arch.dtype": "dtype",
    }
    for key, fname in field_map.items():
        if v[key] is not None:
            overrides[fname] = v[key]
    if v["arch.fc1"] is not None or v["arch.fc2"] is not None:
        fc1 = v["arch.fc1"] if v["arch.fc1"] is not None else arch.fc_sizes[0]
        fc2 = v["arch.fc2"] if v["arch.fc2"] is not None else arch.fc_sizes[1]
        overrides["fc_sizes"] = (fc1, fc2)
    if overrides:
        arch = ArchConfig(**{**arch.to_dict(), **overrides})

    teacher = TrainConfig(
        epochs=v["teacher.epochs"],
        batch_size=v["teacher.batch_size"],
        lr=v["teacher.lr"],
        momentum=v["teacher.momentum"],
        seed=v["teacher.seed"],
        long_crop_samples=v["teacher.long_crop_samples"],
        short_crop_samples=v["teacher.long_crop_samples"],
        loss_reduction=v["teacher.loss_reduction"],
    )
    student = TrainConfig(
        epochs=v["student.epochs"],
        batch_size=v["student.batch_size"],
        lr=v["student.lr"],
        momentum=v["student.momentum"],
        seed=v["student.seed"],
        long_crop_samples=v["student.long_crop_samples"],
        short_crop_samples=v["student.short_crop_samples"],
        loss_reduction=v["student.loss_reduction"],
    )
    if v["student.variant"] not in VARIANT_KINDS:
        raise ConfigError(f"{source}: student.variant must be one of {VARIANT_KINDS}")
    variant = LossVariant(v["student.variant"], v["student.lambda_dist"])

    ev = EvalSettings(
        utts_per_speaker=v["eval.utts_per_speaker"],
        n_genuine=v["eval.n_genuine"],
        n_impostor=v["eval.n_impostor"],
        trial_seed=v["eval.trial_seed"],
        long_crop_samples=v["eval.long_crop_samples"],
        short_crop_samples=v["eval.short_crop_samples"],
        jitter_frac=v["eval.jitter_frac"],
        seed=v["eval.seed"],
    )

    min_dur_samples = int(corpus.duration_range_s[0] * corpus.sample_rate)
    needed = max(
        min_samples(arch),
        teacher.long_crop_samples,
        student.long_crop_samples,
        ev.long_crop_samples,
    )
    if min_dur_samples < needed:
        raise ConfigError(
            f"{source}: minimum utterance duration gives {min_dur_samples} samples but the "
            f"architecture/crops need {needed}"
        )
    if ev.utts_per_speaker >= corpus.utts_per_speaker:
        raise ConfigError(
            f"{source}: eval.utts_per_speaker must leave training data "
            f"({ev.utts_per_speaker} >= {corpus.utts_per_speaker})"
        )

    resolved: dict[str, str] = {}
    for key in SCHEMA:
        val = v[key]
        if val is None:
            continue
        if isinstance(val, tuple):
            resolved[key] = ",".join(str(x) for x in val)
        else:
            resolved[key] = str(val)
    return ExperimentConfig(corpus, arch, teacher, student, variant, ev, v["paths.workdir"], resolved)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return resolve(parse_flat(path.read_text(), str(path)), str(path))


def resolved_text(config: ExperimentConfig) -> str:
    """Deterministic full listing, suitable for the run-directory echo."""
    lines = [f"{key} = {config.resolved[key]}" for key in sorted(config.resolved)]
    return "\n".join(lines) + "\n"
