"""Teacher and student training loops.

The teacher is a plain speaker classifier trained on random long crops with
one-hot cross entropy. The student starts as an exact copy of the frozen
teacher and is trained on paired crops: the long crop feeds the teacher
(no gradients), the short center crop of that same long crop feeds the
student, and the loss compares their embeddings and/or posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nn
from .dataset import Corpus, paired_crop, random_crop
from .errors import ContractError, DomainError
from .model import ArchConfig, Model, ModelOutput, build
from .rng import stream

VARIANT_KINDS = ("output_kl", "emb_mse", "emb_cos", "emb_cos_plus_kl")


@dataclass(frozen=True)
class LossVariant:
    """Which teacher/student signals the distillation loss compares.

    ``output_kl``        soft-label cross entropy between posteriors
    ``emb_mse``          mean squared error between embeddings
    ``emb_cos``          cosine distance between embeddings
    ``emb_cos_plus_kl``  lambda_dist * cosine distance + cross entropy
    """

    kind: str = "emb_cos_plus_kl"
    lambda_dist: float = 1.0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise DomainError(f"unknown loss variant {self.kind!r}, expected one of {VARIANT_KINDS}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    lr: float = 0.001
    momentum: float = 0.9
    seed: int = 1
    long_crop_samples: int = 6561
    short_crop_samples: int = 3645
    loss_reduction: str = "mean"  # "sum" reproduces a per-batch summed objective

    def __post_init__(self):
        if self.loss_reduction not in ("mean", "sum"):
            raise DomainError(f"loss_reduction must be mean or sum, got {self.loss_reduction!r}")
        if self.short_crop_samples > self.long_crop_samples:
            raise DomainError(
                f"short crop {self.short_crop_samples} exceeds long crop {self.long_crop_samples}"
            )


def teacher_preset(**overrides) -> TrainConfig:
    """Optimizer settings used for teacher training (SGD 0.001, momentum 0.9)."""
    return replace(TrainConfig(lr=0.001, momentum=0.9), **overrides)


def student_preset(**overrides) -> TrainConfig:
    """Optimizer settings used for student training (SGD 0.01, momentum 0.9)."""
    return replace(TrainConfig(lr=0.01, momentum=0.9), **overrides)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def _reduce(per_utt, reduction: str):
    return nn.mean(per_utt) if reduction == "mean" else nn.tsum(per_utt)


def ts_loss(
    teacher_out: ModelOutput,
    student_out: ModelOutput,
    variant: LossVariant | str,
    reduction: str = "mean",
):
    """Teacher-student loss for one utterance or one batch.

    Teacher outputs are treated as constants: gradients never propagate into
    them. Returns a scalar Tensor (mean over the batch by default).
    """
    if isinstance(variant, str):
        variant = LossVariant(kind=variant)
    t_emb = teacher_out.embedding.detach()
    t_post = teacher_out.posterior.detach()

    if variant.kind == "output_kl":
        per = nn.soft_cross_entropy(t_post, student_out.posterior)
    elif variant.kind == "emb_mse":
        per = nn.mse(t_emb, student_out.embedding)
    elif variant.kind == "emb_cos":
        per = nn.cosine_distance(t_emb, student_out.embedding)
    else:  # emb_cos_plus_kl
        per = nn.add(
            nn.mul(nn.cosine_distance(t_emb, student_out.embedding), variant.lambda_dist),
            nn.soft_cross_entropy(t_post, student_out.posterior),
        )
    return _reduce(per, reduction)


# ---------------------------------------------------------------------------
# teacher
# ---------------------------------------------------------------------------


def _check_crop_feasible(corpus: Corpus, n_samples: int) -> None:
    short = [u.utt_id for u in corpus.utterances if len(u.waveform) < n_samples]
    if short:
        raise DomainError(
            f"{len(short)} utterance(s) shorter than the {n_samples}-sample crop: "
            + ", ".join(short[:10])
            + ("..." if len(short) > 10 else "")
        )


def _write_log(path, lines: list[str]) -> None:
    if path is not None:
        Path(path).write_text("\n".join(lines) + "\n")


def train_teacher(
    corpus: Corpus,
    arch: ArchConfig,
    cfg: TrainConfig,
    log_path=None,
    ckpt_path=None,
    verbose: bool = False,
) -> nn.ParamStore:
    """Train the speaker classifier on random long crops.

    One epoch is one shuffled pass over all utterances; crop positions are
    redrawn each epoch from streams keyed by (seed, epoch, utt_id). Writes a
    per-epoch ``epoch<TAB>loss<TAB>train_acc`` log and a checkpoint when
    paths are given.
    """
    if corpus.n_speakers < 2:
        raise DomainError("teacher training needs at least 2 speakers")
    if corpus.n_speakers != arch.n_speakers:
        raise DomainError(
            f"corpus has {corpus.n_speakers} speakers but the architecture head expects {arch.n_speakers}"
        )
    _check_crop_feasible(corpus, cfg.long_crop_samples)

    store, model = build(arch, cfg.seed)
    labels = np.array([u.speaker_id for u in corpus.utterances])
    n = len(corpus)
    log_lines: list[str] = []
    for epoch in range(1, cfg.epochs + 1):
        order = stream(cfg.seed, "order", epoch).permutation(n)
        total_loss = 0.0
        correct = 0
        for a in range(0, n, cfg.batch_size):
            idx = order[a : a + cfg.batch_size]
            crops = np.stack(
                [
                    random_crop(
                        corpus.utterances[i].waveform,
                        cfg.long_crop_samples,
                        stream(cfg.seed, "crop", epoch, corpus.utterances[i].utt_id),
                    ).samples
                    for i in idx
                ]
            )
            out = model.forward(store, crops)
            per = nn.onehot_cross_entropy(out.posterior, labels[idx])
            _reduce(per, cfg.loss_reduction).backward()
            nn.sgd_momentum_step(store, cfg.lr, cfg.momentum)
            total_loss += float(per.values.sum())
            correct += int((out.posterior.values.argmax(axis=-1) == labels[idx]).sum())
        line = f"{epoch}\t{total_loss / n:.6f}\t{correct / n:.4f}"
        log_lines.append(line)
        if verbose:
            print(line, flush=True)
    _write_log(log_path, log_lines)
    if ckpt_path is not None:
        from .model import arch_meta

        nn.save_checkpoint(ckpt_path, store, arch_meta(arch))
    return store


# ---------------------------------------------------------------------------
# student
# ---------------------------------------------------------------------------


def init_student_from_teacher(teacher: nn.ParamStore) -> nn.ParamStore:
    """Deep-copy the teacher's weights (zero velocities) and freeze the teacher."""
    student = teacher.copy()
    teacher.freeze()
    return student


def train_student(
    corpus: Corpus,
    teacher: nn.ParamStore,
    arch: ArchConfig,
    cfg: TrainConfig,
    variant: LossVariant | str,
    log_path=None,
    ckpt_path=None,
    verbose: bool = False,
) -> nn.ParamStore:
    """Distill the frozen teacher into a student fed short crops.

    Each batch pairs a random long crop (teacher, no gradients) with its
    center short crop (student). The teacher store is verified bit-identical
    before and after training.
    """
    if not teacher.frozen:
        raise ContractError("teacher store must be frozen before student training")
    if isinstance(variant, str):
        variant = LossVariant(kind=variant)
    if corpus.n_speakers != arch.n_speakers:
        raise DomainError(
            f"corpus has {corpus.n_speakers} speakers but the architecture head expects {arch.n_speakers}"
        )
    _check_crop_feasible(corpus, cfg.long_crop_samples)

    teacher_hash = teacher.state_hash()
    student = teacher.copy()
    model = Model(arch)
    labels = np.array([u.speaker_id for u in corpus.utterances])
    n = len(corpus)
    log_lines: list[str] = []
    for epoch in range(1, cfg.epochs + 1):
        order = stream(cfg.seed, "order", epoch).permutation(n)
        total_loss = 0.0
        correct = 0
        for a in range(0, n, cfg.batch_size):
            idx = order[a : a + cfg.batch_size]
            longs, shorts = [], []
            for i in idx:
                utt = corpus.utterances[i]
                lw, sw = paired_crop(
                    utt.waveform,
                    cfg.long_crop_samples,
                    cfg.short_crop_samples,
                    stream(cfg.seed, "crop", epoch, utt.utt_id),
                )
                longs.append(lw.samples)
                shorts.append(sw.samples)
            with nn.no_grad():
                t_out = model.forward(teacher, np.stack(longs))
            s_out = model.forward(student, np.stack(shorts))
            loss = ts_loss(t_out, s_out, variant, reduction=cfg.loss_reduction)
            loss.backward()
            nn.sgd_momentum_step(student, cfg.lr, cfg.momentum)
            batch_total = loss.item() * (len(idx) if cfg.loss_reduction == "mean" else 1.0)
            total_loss += batch_total
            correct += int((s_out.posterior.values.argmax(axis=-1) == labels[idx]).sum())
        line = f"{epoch}\t{total_loss / n:.6f}\t{correct / n:.4f}"
        log_lines.append(line)
        if verbose:
            print(line, flush=True)
    if teacher.state_hash() != teacher_hash:
        raise ContractError("teacher parameters changed during student training")
    _write_log(log_path, log_lines)
    if ckpt_path is not None:
        from .model import arch_meta

        nn.save_checkpoint(ckpt_path, student, arch_meta(arch))
    return student
