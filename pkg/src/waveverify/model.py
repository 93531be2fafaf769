"""Raw-waveform CNN-GRU speaker embedding network.

Stack: strided VALID conv -> B x (residual block -> max pool) -> GRU (last
state) -> two fully-connected layers with LReLU (the second activation is
the speaker embedding) -> softmax head over training speakers.

The time axis shrinks only in the first conv and the pools, so the output
sequence length is pure floor arithmetic over the input length; utterances
of any admissible length flow through the same parameters.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .dataset import Waveform
from .errors import ConfigError, InsufficientLengthError
from .nn.params import ParamStore
from .nn.tensor import Tensor
from .rng import stream


@dataclass(frozen=True)
class ArchConfig:
    first_conv_kernel: int = 3
    first_conv_stride: int = 3
    first_conv_channels: int = 32
    n_blocks: int = 4
    block_channels: tuple[int, ...] = (32, 32, 64, 64)
    block_kernel: int = 3
    pool_size: int = 3
    pool_stride: int = 3
    gru_units: int = 64
    fc_sizes: tuple[int, int] = (128, 128)
    n_speakers: int = 40
    lrelu_alpha: float = 0.3
    dtype: str = "float64"

    def __post_init__(self):
        if len(self.block_channels) != self.n_blocks:
            raise ConfigError(
                f"block_channels has {len(self.block_channels)} entries for n_blocks={self.n_blocks}"
            )
        for name in ("first_conv_kernel", "first_conv_stride", "first_conv_channels",
                     "block_kernel", "pool_size", "pool_stride", "gru_units", "n_speakers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"arch field {name} must be positive, got {getattr(self, name)}")
        if self.n_speakers < 2:
            raise ConfigError(f"n_speakers must be at least 2, got {self.n_speakers}")
        if not 0.0 <= self.lrelu_alpha < 1.0:
            raise ConfigError(f"lrelu_alpha must be in [0, 1), got {self.lrelu_alpha}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype!r}")
        if len(self.fc_sizes) != 2:
            raise ConfigError(f"fc_sizes needs exactly two entries, got {self.fc_sizes}")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    def to_dict(self) -> dict:
        d = asdict(self)
        d["block_channels"] = list(self.block_channels)
        d["fc_sizes"] = list(self.fc_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        d = dict(d)
        d["block_channels"] = tuple(d["block_channels"])
        d["fc_sizes"] = tuple(d["fc_sizes"])
        return cls(**d)


def desk_preset(n_speakers: int = 40, **overrides) -> ArchConfig:
    """Small architecture sized for a laptop CPU at 4 kHz."""
    return ArchConfig(n_speakers=n_speakers, **overrides)


def paper16k_preset(n_speakers: int = 40, **overrides) -> ArchConfig:
    """Full-scale 16 kHz architecture: six residual blocks into a 512-unit GRU."""
    base = dict(
        first_conv_kernel=3,
        first_conv_stride=3,
        first_conv_channels=128,
        n_blocks=6,
        block_channels=(128, 128, 256, 256, 512, 512),
        block_kernel=3,
        pool_size=3,
        pool_stride=3,
        gru_units=512,
        fc_sizes=(1024, 1024),
        n_speakers=n_speakers,
    )
    base.update(overrides)
    return ArchConfig(**base)


ARCH_PRESETS = {"desk": desk_preset, "paper16k": paper16k_preset}


# ---------------------------------------------------------------------------
# timestep arithmetic
# ---------------------------------------------------------------------------


def n_timesteps(config: ArchConfig, n_samples: int) -> int:
    """Output sequence length of the last conv block for an input length.

    First conv is VALID: ``L = floor((n - K0) / S0) + 1``; each block keeps
    the length (SAME convs) and its pool applies
    ``L = floor((L - pool) / stride) + 1``. Raises if the result would be
    empty, reporting the minimum admissible sample count.
    """
    length = n_samples
    if length >= config.first_conv_kernel:
        length = (length - config.first_conv_kernel) // config.first_conv_stride + 1
        for _ in range(config.n_blocks):
            if length < config.pool_size:
                length = 0
                break
            length = (length - config.pool_size) // config.pool_stride + 1
    else:
        length = 0
    if length < 1:
        raise InsufficientLengthError(min_samples(config), n_samples, "model input")
    return length


def min_samples(config: ArchConfig) -> int:
    """Smallest input length that still yields one timestep."""
    need = 1
    for _ in range(config.n_blocks):
        need = config.pool_size + config.pool_stride * (need - 1)
    return config.first_conv_kernel + config.first_conv_stride * (need - 1)


# ---------------------------------------------------------------------------
# parameters and forward pass
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelOutput:
    """Per-utterance outputs: feature sequence, embedding, speaker posterior."""

    phonetic: Tensor
    embedding: Tensor
    posterior: Tensor


@dataclass(frozen=True)
class Model:
    """Architecture bound to its config; parameters live in a ParamStore."""

    config: ArchConfig

    def init_params(self, seed: int) -> ParamStore:
        return build(self.config, seed)[0]

    def forward(self, params: ParamStore, wave) -> ModelOutput:
        return forward(self, params, wave)


def _glorot(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


def build(config: ArchConfig, seed: int) -> tuple[ParamStore, Model]:
    """Create a parameter store (fan-scaled uniform init, zero biases)."""
    dt = config.np_dtype
    store = ParamStore()

    def add_conv(name: str, k: int, c_in: int, c_out: int) -> None:
        rng = stream(seed, "init", name)
        store.add(f"{name}.w", _glorot(rng, (k, c_in, c_out), k * c_in, k * c_out, dt))
        store.add(f"{name}.b", np.zeros(c_out, dtype=dt))

    def add_dense(name: str, d_in: int, d_out: int) -> None:
        rng = stream(seed, "init", name)
        store.add(f"{name}.w", _glorot(rng, (d_in, d_out), d_in, d_out, dt))
        store.add(f"{name}.b", np.zeros(d_out, dtype=dt))

    add_conv("conv0", config.first_conv_kernel, 1, config.first_conv_channels)
    c_in = config.first_conv_channels
    for i, c_out in enumerate(config.block_channels):
        add_conv(f"block{i}.conv1", config.block_kernel, c_in, c_out)
        add_conv(f"block{i}.conv2", config.block_kernel, c_out, c_out)
        if c_in != c_out:
            add_conv(f"block{i}.proj", 1, c_in, c_out)
        c_in = c_out
    for gate in ("z", "r", "h"):
        rng = stream(seed, "init", f"gru.{gate}")
        store.add(f"gru.w_{gate}", _glorot(rng, (c_in, config.gru_units), c_in, config.gru_units, dt))
        store.add(f"gru.u_{gate}", _glorot(rng, (config.gru_units, config.gru_units),
                                           config.gru_units, config.gru_units, dt))
        store.add(f"gru.b_{gate}", np.zeros(config.gru_units, dtype=dt))
    add_dense("fc1", config.gru_units, config.fc_sizes[0])
    add_dense("fc2", config.fc_sizes[0], config.fc_sizes[1])
    add_dense("out", config.fc_sizes[1], config.n_speakers)
    return store, Model(config)


def residual_block_forward(x, params: ParamStore, prefix: str, alpha: float) -> Tensor:
    """Two SAME convs with LReLU after the first; shortcut added before the
    final LReLU (1x1 projection when the channel count changes)."""
    h = nn.lrelu(nn.conv1d(x, params[f"{prefix}.conv1.w"], params[f"{prefix}.conv1.b"],
                           stride=1, padding=nn.SAME), alpha)
    h = nn.conv1d(h, params[f"{prefix}.conv2.w"], params[f"{prefix}.conv2.b"],
                  stride=1, padding=nn.SAME)
    if f"{prefix}.proj.w" in params:
        shortcut = nn.conv1d(x, params[f"{prefix}.proj.w"], params[f"{prefix}.proj.b"],
                             stride=1, padding=nn.SAME)
    else:
        shortcut = x
    return nn.lrelu(nn.add(h, shortcut), alpha)


def forward(model: Model, params: ParamStore, wave) -> ModelOutput:
    """Run the network on one waveform ``[L]`` or a batch ``[N, L]``.

    Each crop is mean-removed and scaled to unit RMS before the first conv,
    so loudness is not a cue and activations are well-scaled. The embedding
    is the post-LReLU activation of the second fully-connected layer;
    ``phonetic`` is the last conv block's output sequence.
    """
    cfg = model.config
    if isinstance(wave, Waveform):
        wave = wave.samples
    x = wave.values if isinstance(wave, Tensor) else np.asarray(wave)
    x = x.astype(cfg.np_dtype, copy=False)
    if x.ndim not in (1, 2):
        raise InsufficientLengthError(1, 0, f"model input of shape {x.shape}")
    n_timesteps(cfg, x.shape[-1])  # raises with the minimum if too short
    x = x - x.mean(axis=-1, keepdims=True)
    x = x / (np.sqrt(np.mean(np.square(x), axis=-1, keepdims=True)) + 1e-8)
    h = nn.as_tensor(x[..., None])  # [L, 1] or [N, L, 1]

    h = nn.lrelu(nn.conv1d(h, params["conv0.w"], params["conv0.b"],
                           stride=cfg.first_conv_stride, padding=nn.VALID), cfg.lrelu_alpha)
    for i in range(cfg.n_blocks):
        h = residual_block_forward(h, params, f"block{i}", cfg.lrelu_alpha)
        h = nn.maxpool1d(h, cfg.pool_size, cfg.pool_stride)
    phonetic = h

    g = nn.gru_sequence(phonetic, params.subset("gru"))
    f1 = nn.lrelu(nn.dense(g, params["fc1.w"], params["fc1.b"]), cfg.lrelu_alpha)
    embedding = nn.lrelu(nn.dense(f1, params["fc2.w"], params["fc2.b"]), cfg.lrelu_alpha)
    logits = nn.dense(embedding, params["out.w"], params["out.b"])
    return ModelOutput(phonetic=phonetic, embedding=embedding, posterior=nn.softmax(logits))


def arch_meta(config: ArchConfig) -> dict:
    return {"arch": config.to_dict()}


def arch_from_meta(meta: dict) -> ArchConfig:
    if "arch" not in meta:
        raise ConfigError("checkpoint metadata carries no architecture")
    return ArchConfig.from_dict(meta["arch"])
