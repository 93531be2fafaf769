"""Scikit-learn style estimators wrapping the training pipeline.

``X`` is a list (or 2-D array) of raw waveforms in [-1, 1]; lengths may
differ. Both estimators follow the fit/transform/get_params protocol so they
compose with sklearn tooling (clone, Pipeline on fixed-length embeddings),
while training itself runs on this package's own layers.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .dataset import Corpus, Utterance, Waveform
from .errors import DomainError
from .evaluation import embed_utterances
from .model import ArchConfig, Model, build, desk_preset
from .train import TrainConfig, init_student_from_teacher, train_student, train_teacher
from .validation import check_labels, check_waveform_list


def _as_corpus(waves: list[np.ndarray], labels: np.ndarray, sample_rate: int) -> Corpus:
    utts = [
        Utterance(f"x{i:06d}", int(labels[i]), Waveform(w, sample_rate))
        for i, w in enumerate(waves)
    ]
    return Corpus(utts, int(labels.max()) + 1, sample_rate)


class WaveformSpeakerClassifier(BaseEstimator, TransformerMixin):
    """CNN-GRU speaker classifier on raw waveforms (the "teacher").

    ``fit(X, y)`` trains on random crops of ``crop_samples``;
    ``transform(X)`` returns speaker embeddings, ``predict_proba(X)`` the
    speaker posteriors. Waveforms shorter than ``crop_samples`` are rejected.
    """

    def __init__(
        self,
        arch: ArchConfig | None = None,
        epochs: int = 10,
        batch_size: int = 16,
        lr: float = 0.001,
        momentum: float = 0.9,
        crop_samples: int = 6561,
        sample_rate: int = 4000,
        seed: int = 1,
    ):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.crop_samples = crop_samples
        self.sample_rate = sample_rate
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            seed=self.seed,
            long_crop_samples=self.crop_samples,
            short_crop_samples=self.crop_samples,
        )

    def fit(self, X, y):
        waves = check_waveform_list(X)
        labels = check_labels(y, len(waves))
        arch = self.arch if self.arch is not None else desk_preset(int(labels.max()) + 1)
        if arch.n_speakers != labels.max() + 1:
            raise DomainError(
                f"arch expects {arch.n_speakers} speakers, labels span {labels.max() + 1}"
            )
        corpus = _as_corpus(waves, labels, self.sample_rate)
        self.params_ = train_teacher(corpus, arch, self._train_config())
        self.model_ = Model(arch)
        self.arch_ = arch
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before using this estimator")

    def _embed(self, X, crop: int) -> np.ndarray:
        self._check_fitted()
        waves = check_waveform_list(X)
        labels = np.zeros(len(waves), dtype=int)
        corpus = _as_corpus(waves, labels, self.sample_rate)
        lengths = {u.utt_id: min(crop, len(u.waveform)) for u in corpus.utterances}
        embs = embed_utterances(self.model_, self.params_, corpus, lengths)
        return np.stack([embs[f"x{i:06d}"] for i in range(len(waves))])

    def transform(self, X) -> np.ndarray:
        """Speaker embeddings from center crops (shorter inputs used whole)."""
        return self._embed(X, self.crop_samples)

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        waves = check_waveform_list(X)
        from . import nn
        from .dataset import center_crop

        out = []
        with nn.no_grad():
            for w in waves:
                wf = Waveform(w, self.sample_rate)
                crop = center_crop(wf, min(self.crop_samples, len(wf)))
                out.append(self.model_.forward(self.params_, crop).posterior.values)
        return np.stack(out)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


class ShortUtteranceDistiller(BaseEstimator, TransformerMixin):
    """Distills a fitted classifier into a short-crop embedder (the "student").

    ``fit(X)`` runs teacher-student training on paired long/short crops of
    the given waveforms; labels are not used. ``transform(X)`` returns the
    student's embeddings at the short crop length.
    """

    def __init__(
        self,
        teacher: WaveformSpeakerClassifier = None,
        variant: str = "emb_cos_plus_kl",
        lambda_dist: float = 1.0,
        epochs: int = 6,
        batch_size: int = 16,
        lr: float = 0.01,
        momentum: float = 0.9,
        long_crop_samples: int = 6561,
        short_crop_samples: int = 3645,
        seed: int = 2,
    ):
        self.teacher = teacher
        self.variant = variant
        self.lambda_dist = lambda_dist
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.long_crop_samples = long_crop_samples
        self.short_crop_samples = short_crop_samples
        self.seed = seed

    def fit(self, X, y=None):
        if self.teacher is None:
            raise DomainError("ShortUtteranceDistiller needs a fitted teacher classifier")
        self.teacher._check_fitted()
        waves = check_waveform_list(X)
        corpus = Corpus(
            [
                Utterance(f"x{i:06d}", 0, Waveform(w, self.teacher.sample_rate))
                for i, w in enumerate(waves)
            ],
            self.teacher.arch_.n_speakers,
            self.teacher.sample_rate,
        )
        from .train import LossVariant

        frozen = self.teacher.params_.copy()
        frozen.freeze()
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            seed=self.seed,
            long_crop_samples=self.long_crop_samples,
            short_crop_samples=self.short_crop_samples,
        )
        self.params_ = train_student(
            corpus,
            frozen,
            self.teacher.arch_,
            cfg,
            LossVariant(self.variant, self.lambda_dist),
        )
        self.model_ = Model(self.teacher.arch_)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before using this estimator")
        waves = check_waveform_list(X)
        labels = np.zeros(len(waves), dtype=int)
        corpus = _as_corpus(waves, labels, self.teacher.sample_rate)
        lengths = {
            u.utt_id: min(self.short_crop_samples, len(u.waveform)) for u in corpus.utterances
        }
        embs = embed_utterances(self.model_, self.params_, corpus, lengths)
        return np.stack([embs[f"x{i:06d}"] for i in range(len(waves))])
