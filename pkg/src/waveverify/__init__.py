"""Short-utterance speaker verification on raw waveforms.

Synthetic speaker corpus generation, a from-scratch CNN-GRU embedding
network, teacher-student training for short-utterance compensation, and an
equal-error-rate verification harness.
"""

from . import dataset, evaluation, model, nn, train
from .dataset import Corpus, CorpusSpec, Utterance, Waveform, generate_corpus
from .estimators import ShortUtteranceDistiller, WaveformSpeakerClassifier
from .evaluation import EvalProtocol, ScoreSet, Trial, build_trials, compute_eer, score_trials
from .model import ArchConfig, Model, ModelOutput, build, desk_preset, n_timesteps, paper16k_preset
from .train import LossVariant, TrainConfig, init_student_from_teacher, train_student, train_teacher, ts_loss

__version__ = "0.1.0"

__all__ = [
    "ArchConfig",
    "Corpus",
    "CorpusSpec",
    "EvalProtocol",
    "LossVariant",
    "Model",
    "ModelOutput",
    "ScoreSet",
    "ShortUtteranceDistiller",
    "TrainConfig",
    "Trial",
    "Utterance",
    "Waveform",
    "WaveformSpeakerClassifier",
    "build",
    "build_trials",
    "compute_eer",
    "dataset",
    "desk_preset",
    "evaluation",
    "generate_corpus",
    "init_student_from_teacher",
    "model",
    "n_timesteps",
    "nn",
    "paper16k_preset",
    "score_trials",
    "train",
    "train_student",
    "train_teacher",
    "ts_loss",
]
