"""Verification trials, cosine scoring, and equal error rate.

Scores are cosine similarities (higher = more likely same speaker); a trial
is accepted when its score is at or above the threshold. The EER sweep walks
one operating point per distinct score value (midpoint thresholds, so tied
scores form a single step): if false-acceptance equals false-rejection
exactly at a step that value is returned, otherwise the rates are linearly
interpolated between the two adjacent operating points where their
difference changes sign.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import nn
from .dataset import Corpus, center_crop
from .errors import CapacityError, DomainError
from .model import Model
from .nn.params import ParamStore
from .rng import stream

GENUINE = 1
IMPOSTOR = 0


@dataclass(frozen=True)
class Trial:
    enroll_utt: str
    test_utt: str
    label: int  # GENUINE (1) or IMPOSTOR (0)

    def __post_init__(self):
        if self.enroll_utt == self.test_utt:
            raise DomainError(f"trial pairs an utterance with itself: {self.enroll_utt!r}")
        if self.label not in (GENUINE, IMPOSTOR):
            raise DomainError(f"trial label must be 0 or 1, got {self.label!r}")


@dataclass
class ScoreSet:
    scores: list[tuple[Trial, float]]

    def __post_init__(self):
        if any(not np.isfinite(s) for _, s in self.scores):
            raise DomainError("score set contains non-finite similarities")

    def genuine(self) -> np.ndarray:
        return np.array([s for t, s in self.scores if t.label == GENUINE])

    def impostor(self) -> np.ndarray:
        return np.array([s for t, s in self.scores if t.label == IMPOSTOR])


@dataclass(frozen=True)
class EvalProtocol:
    """Crop lengths for both trial sides, plus optional duration jitter.

    With ``duration_jitter_s > 0`` each utterance's crop duration is drawn
    once (per side length) uniformly from base +- jitter, from a stream keyed
    by (seed, utterance id), so the embedding cache stays one-per-utterance.
    """

    enroll_crop_samples: int
    test_crop_samples: int
    duration_jitter_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.enroll_crop_samples < 1 or self.test_crop_samples < 1:
            raise DomainError("protocol crop lengths must be positive")
        if self.duration_jitter_s < 0:
            raise DomainError(f"duration jitter must be >= 0, got {self.duration_jitter_s}")


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------


def build_trials(eval_corpus: Corpus, n_genuine: int, n_impostor: int, seed: int) -> list[Trial]:
    """Sample genuine / impostor pairs without replacement, deterministically."""
    by_speaker = eval_corpus.by_speaker()
    if len(by_speaker) < 2:
        raise DomainError("trial building needs at least 2 speakers")
    for spk, utts in by_speaker.items():
        if len(utts) < 2:
            raise DomainError(f"speaker {spk} has fewer than 2 eval utterances")

    genuine_pairs: list[tuple[str, str]] = []
    for spk in sorted(by_speaker):
        ids = sorted(u.utt_id for u in by_speaker[spk])
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                genuine_pairs.append((ids[i], ids[j]))
    all_ids = sorted((u.utt_id, u.speaker_id) for u in eval_corpus.utterances)
    impostor_pairs: list[tuple[str, str]] = []
    for i in range(len(all_ids)):
        for j in range(i + 1, len(all_ids)):
            if all_ids[i][1] != all_ids[j][1]:
                impostor_pairs.append((all_ids[i][0], all_ids[j][0]))

    if n_genuine > len(genuine_pairs) or n_impostor > len(impostor_pairs):
        raise CapacityError(
            f"requested ({n_genuine}, {n_impostor}) trials but only "
            f"({len(genuine_pairs)}, {len(impostor_pairs)}) genuine/impostor pairs exist"
        )
    g_idx = stream(seed, "trials", "genuine").choice(len(genuine_pairs), n_genuine, replace=False)
    i_idx = stream(seed, "trials", "impostor").choice(len(impostor_pairs), n_impostor, replace=False)
    trials = [Trial(*genuine_pairs[k], GENUINE) for k in g_idx]
    trials += [Trial(*impostor_pairs[k], IMPOSTOR) for k in i_idx]
    return trials


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def _crop_length(protocol: EvalProtocol, base_samples: int, utt_id: str, sample_rate: int) -> int:
    if protocol.duration_jitter_s == 0.0:
        return base_samples
    base_s = base_samples / sample_rate
    dur = stream(protocol.seed, "jitter", base_samples, utt_id).uniform(
        base_s - protocol.duration_jitter_s, base_s + protocol.duration_jitter_s
    )
    return max(1, int(round(dur * sample_rate)))


def embed_utterances(
    model: Model,
    params: ParamStore,
    corpus: Corpus,
    lengths: dict[str, int],
    batch_size: int = 64,
) -> dict[str, np.ndarray]:
    """Center-crop and embed each listed utterance exactly once.

    Utterances with equal crop lengths are batched together.
    """
    table = corpus.by_id()
    missing = sorted(set(lengths) - set(table))
    if missing:
        raise DomainError(f"corpus lacks referenced utterances: {', '.join(missing[:10])}")
    too_short = sorted(
        uid for uid, n in lengths.items() if len(table[uid].waveform) < n
    )
    if too_short:
        raise DomainError(
            "utterances shorter than their protocol crop: " + ", ".join(too_short[:10])
            + ("..." if len(too_short) > 10 else "")
        )

    by_len: dict[int, list[str]] = {}
    for uid in sorted(lengths):
        by_len.setdefault(lengths[uid], []).append(uid)
    out: dict[str, np.ndarray] = {}
    with nn.no_grad():
        for n, uids in sorted(by_len.items()):
            for a in range(0, len(uids), batch_size):
                chunk = uids[a : a + batch_size]
                batch = np.stack(
                    [center_crop(table[uid].waveform, n).samples for uid in chunk]
                )
                emb = model.forward(params, batch).embedding.values
                for row, uid in enumerate(chunk):
                    out[uid] = emb[row].copy()
    return out


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine similarity of a zero-norm embedding")
    return float(a @ b / (na * nb))


def score_trials(
    model: Model,
    params: ParamStore,
    corpus: Corpus,
    trials: list[Trial],
    protocol: EvalProtocol,
) -> ScoreSet:
    """Embed every referenced utterance once per side length, then score."""
    sr = corpus.sample_rate
    lengths: dict[str, int] = {}
    for trial in trials:
        lengths.setdefault(
            trial.enroll_utt, _crop_length(protocol, protocol.enroll_crop_samples, trial.enroll_utt, sr)
        )
    test_lengths: dict[str, int] = {}
    for trial in trials:
        test_lengths.setdefault(
            trial.test_utt, _crop_length(protocol, protocol.test_crop_samples, trial.test_utt, sr)
        )

    if protocol.enroll_crop_samples == protocol.test_crop_samples:
        merged = dict(test_lengths)
        merged.update(lengths)
        embs = embed_utterances(model, params, corpus, merged)
        enroll_embs = test_embs = embs
    else:
        enroll_embs = embed_utterances(model, params, corpus, lengths)
        test_embs = embed_utterances(model, params, corpus, test_lengths)

    return ScoreSet(
        [
            (t, cosine_similarity(enroll_embs[t.enroll_utt], test_embs[t.test_utt]))
            for t in trials
        ]
    )


# ---------------------------------------------------------------------------
# equal error rate
# ---------------------------------------------------------------------------


def compute_eer_rates(genuine: np.ndarray, impostor: np.ndarray) -> tuple[float, float]:
    """EER and its threshold from raw score arrays."""
    genuine = np.asarray(genuine, dtype=np.float64)
    impostor = np.asarray(impostor, dtype=np.float64)
    if genuine.size < 1 or impostor.size < 1:
        raise DomainError("EER needs at least one genuine and one impostor score")
    distinct = np.unique(np.concatenate([genuine, impostor]))
    thresholds = np.concatenate(
        [[distinct[0] - 1.0], (distinct[:-1] + distinct[1:]) / 2.0, [distinct[-1] + 1.0]]
    )
    gen_sorted = np.sort(genuine)
    imp_sorted = np.sort(impostor)
    far = 1.0 - np.searchsorted(imp_sorted, thresholds, side="left") / impostor.size
    frr = np.searchsorted(gen_sorted, thresholds, side="left") / genuine.size
    diff = far - frr  # non-increasing in the threshold

    exact = np.nonzero(diff == 0.0)[0]
    if exact.size:
        k = int(exact[0])
        return float(far[k]), float(thresholds[k])
    k = int(np.nonzero(diff < 0.0)[0][0])  # diff starts at +1 and ends at -1
    a = k - 1
    t = diff[a] / (diff[a] - diff[k])
    eer = far[a] + t * (far[k] - far[a])
    threshold = thresholds[a] + t * (thresholds[k] - thresholds[a])
    return float(eer), float(threshold)


def compute_eer(scores: ScoreSet) -> tuple[float, float]:
    """Equal error rate and crossing threshold for a scored trial set."""
    return compute_eer_rates(scores.genuine(), scores.impostor())


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_trials(trials: list[Trial], path) -> None:
    lines = [f"{t.enroll_utt}\t{t.test_utt}\t{t.label}" for t in trials]
    Path(path).write_text("\n".join(lines) + "\n")


def read_trials(path) -> list[Trial]:
    trials = []
    for row in Path(path).read_text().splitlines():
        if not row.strip():
            continue
        enroll, test, label = row.split("\t")
        trials.append(Trial(enroll, test, int(label)))
    return trials


def write_scores(scores: ScoreSet, path) -> None:
    lines = [
        f"{t.enroll_utt}\t{t.test_utt}\t{t.label}\t{s:.17g}" for t, s in scores.scores
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def metrics_report(scores: ScoreSet, protocol: EvalProtocol) -> dict:
    eer, threshold = compute_eer(scores)
    return {
        "eer": eer,
        "threshold": threshold,
        "n_genuine": int(scores.genuine().size),
        "n_impostor": int(scores.impostor().size),
        "protocol": asdict(protocol),
    }


def write_metrics(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def dump_embeddings(model: Model, params: ParamStore, corpus: Corpus, crop_samples: int, out_path) -> None:
    """Write one row per utterance: utt_id, speaker_id, then the embedding
    at 17 significant digits, sorted by (speaker_id, utt_id)."""
    lengths = {u.utt_id: crop_samples for u in corpus.utterances}
    embs = embed_utterances(model, params, corpus, lengths)
    order = sorted(corpus.utterances, key=lambda u: (u.speaker_id, u.utt_id))
    lines = []
    for u in order:
        vec = "\t".join(f"{v:.17g}" for v in embs[u.utt_id])
        lines.append(f"{u.utt_id}\t{u.speaker_id}\t{vec}")
    Path(out_path).write_text("\n".join(lines) + "\n")
