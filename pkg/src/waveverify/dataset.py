"""Synthetic speaker corpus: generation, cropping, and on-disk format.

Speakers are source-filter voices. A speaker's identity is a fixed bank of
3-5 second-order resonators plus a base pitch and a voiced/noise mix; what
varies between (and within) utterances is the excitation: a sequence of
short segments, each with its own pitch inflection, voicing, loudness and a
broad spectral coloration, standing in for phonetic content. Long crops
average over many segments and expose the stable resonances; short crops are
biased by whichever few segments they land on.

Everything is a pure function of the corpus seed via counter-based streams
(see rng.py), so corpora are reproducible sample for sample. Generated
amplitudes are snapped to the 16-bit PCM grid, which makes the write/read
round-trip exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import sosfilt

from .errors import CorpusFormatError, DomainError, InsufficientLengthError
from .rng import derive_seed, stream

PCM_SCALE = 32767.0

MANIFEST_NAME = "manifest.tsv"
MANIFEST_HEADER = "utt_id\tspeaker_id\tn_samples\tsample_rate\tpath"


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size < 1:
            raise DomainError(f"waveform must be a non-empty 1-D array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DomainError("waveform contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0:
            raise DomainError(f"waveform amplitude exceeds 1 (max {np.max(np.abs(samples)):.6g})")
        if self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    speaker_id: int
    waveform: Waveform


@dataclass(frozen=True)
class SpeakerProfile:
    """Per-speaker voice parameters, fixed across all of a speaker's utterances."""

    speaker_id: int
    resonance_centers: tuple[float, ...]  # Hz, strictly increasing
    resonance_bandwidths: tuple[float, ...]  # Hz, matching length
    pitch_base: float  # Hz
    source_mix: float  # harmonic vs. noise excitation weight in [0, 1]


@dataclass(frozen=True)
class CorpusSpec:
    n_speakers: int
    utts_per_speaker: int
    duration_range_s: tuple[float, float] = (4.0, 8.0)
    sample_rate: int = 4000
    seed: int = 101

    def __post_init__(self):
        lo, hi = self.duration_range_s
        if self.n_speakers < 1 or self.utts_per_speaker < 1:
            raise DomainError("corpus needs at least one speaker and one utterance each")
        if not (0 < lo <= hi):
            raise DomainError(f"bad duration range {self.duration_range_s}")


@dataclass
class Corpus:
    """In-memory corpus: utterances plus the speaker table."""

    utterances: list[Utterance]
    n_speakers: int
    sample_rate: int
    spec: CorpusSpec | None = None

    def __post_init__(self):
        seen = set()
        for utt in self.utterances:
            if utt.utt_id in seen:
                raise DomainError(f"duplicate utt_id {utt.utt_id!r}")
            seen.add(utt.utt_id)
            if not 0 <= utt.speaker_id < self.n_speakers:
                raise DomainError(f"utterance {utt.utt_id!r} has speaker {utt.speaker_id} outside [0, {self.n_speakers})")

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def by_id(self) -> dict[str, Utterance]:
        return {u.utt_id: u for u in self.utterances}

    def by_speaker(self) -> dict[int, list[Utterance]]:
        table: dict[int, list[Utterance]] = {}
        for u in self.utterances:
            table.setdefault(u.speaker_id, []).append(u)
        return table

    def split_train_eval(self, eval_per_speaker: int) -> tuple["Corpus", "Corpus"]:
        """Per speaker, the last ``eval_per_speaker`` utterances form the eval set."""
        train: list[Utterance] = []
        evals: list[Utterance] = []
        for spk, utts in sorted(self.by_speaker().items()):
            if eval_per_speaker >= len(utts):
                raise DomainError(
                    f"speaker {spk} has {len(utts)} utterances, cannot hold out {eval_per_speaker}"
                )
            train.extend(utts[: len(utts) - eval_per_speaker])
            evals.extend(utts[len(utts) - eval_per_speaker :])
        return (
            Corpus(train, self.n_speakers, self.sample_rate, self.spec),
            Corpus(evals, self.n_speakers, self.sample_rate, self.spec),
        )


# ---------------------------------------------------------------------------
# speaker and utterance synthesis
# ---------------------------------------------------------------------------


def synth_speaker_profile(spec: CorpusSpec, speaker_id: int) -> SpeakerProfile:
    """Derive a speaker's voice from (corpus seed, speaker id), deterministically."""
    if not 0 <= speaker_id < spec.n_speakers:
        raise DomainError(f"speaker_id {speaker_id} outside [0, {spec.n_speakers})")
    rng = stream(spec.seed, "profile", speaker_id)
    n_res = int(rng.integers(3, 6))
    lo, hi = 300.0, min(0.45 * spec.sample_rate, 3400.0)
    # free draws with a minimum separation, so speakers genuinely overlap
    min_sep = (hi - lo) / 14.0
    while True:
        centers = np.sort(rng.uniform(lo, hi, n_res))
        if np.all(np.diff(centers) >= min_sep):
            break
    bandwidths = [float(rng.uniform(80.0, 220.0)) for _ in range(n_res)]
    pitch = float(np.exp(rng.uniform(np.log(85.0), np.log(240.0))))
    mix = float(rng.uniform(0.40, 0.90))
    return SpeakerProfile(
        speaker_id=speaker_id,
        resonance_centers=tuple(float(c) for c in centers),
        resonance_bandwidths=tuple(bandwidths),
        pitch_base=pitch,
        source_mix=mix,
    )


def _resonator_sos(profile: SpeakerProfile, sample_rate: int) -> np.ndarray:
    """Cascade of two-pole resonators, one section per resonance."""
    sections = []
    for f0, bw in zip(profile.resonance_centers, profile.resonance_bandwidths):
        r = np.exp(-np.pi * bw / sample_rate)
        w0 = 2.0 * np.pi * f0 / sample_rate
        # (1 - r) keeps the section's resonance gain near unity
        sections.append([1.0 - r, 0.0, 0.0, 1.0, -2.0 * r * np.cos(w0), r * r])
    return np.asarray(sections)


def _peaking_sos(center: float, bandwidth: float, gain_db: float, sample_rate: int) -> np.ndarray:
    """RBJ peaking-EQ biquad used for per-segment spectral coloration."""
    a_lin = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * np.pi * center / sample_rate
    alpha = np.sin(w0) * np.sinh(np.log(2.0) / 2.0 * (bandwidth / center) * w0 / np.sin(w0))
    b0, b1, b2 = 1.0 + alpha * a_lin, -2.0 * np.cos(w0), 1.0 - alpha * a_lin
    a0, a1, a2 = 1.0 + alpha / a_lin, -2.0 * np.cos(w0), 1.0 - alpha / a_lin
    return np.asarray([[b0 / a0, b1 / a0, b2 / a0, 1.0, a1 / a0, a2 / a0]])


def synth_utterance(
    profile: SpeakerProfile, utt_seed: int, duration_s: float, sample_rate: int
) -> Waveform:
    """Render one utterance: segmented excitation through the speaker's filter.

    The filter bank is fixed by the profile; pitch contour, segment sequence,
    voicing and coloration all derive from ``utt_seed``. Output is
    peak-normalized so that max |sample| is exactly 0.9.
    """
    if duration_s <= 0:
        raise DomainError(f"duration must be positive, got {duration_s}")
    n = int(round(duration_s * sample_rate))
    seg_rng = stream(utt_seed, "segments")
    noise_rng = stream(utt_seed, "noise")

    pitch0 = profile.pitch_base * float(np.exp(seg_rng.normal(0.0, 0.10)))

    # carve the utterance into phone-like segments
    bounds = [0]
    while bounds[-1] < n:
        seg_len = int(round(seg_rng.uniform(0.18, 0.50) * sample_rate))
        bounds.append(min(n, bounds[-1] + max(seg_len, 8)))
    n_segs = len(bounds) - 1

    pitch = np.empty(n)
    voicing = np.empty(n)
    level = np.empty(n)
    colors = []
    for i in range(n_segs):
        a, b = bounds[i], bounds[i + 1]
        pitch[a:b] = pitch0 * float(np.exp(seg_rng.normal(0.0, 0.05)))
        voicing[a:b] = float(np.clip(profile.source_mix + seg_rng.uniform(-0.30, 0.30), 0.05, 0.98))
        level[a:b] = float(seg_rng.uniform(0.40, 1.0))
        colors.append(
            [
                (
                    float(seg_rng.uniform(250.0, 0.45 * sample_rate)),
                    float(seg_rng.uniform(90.0, 350.0)),
                    float(seg_rng.uniform(-16.0, 16.0)),
                )
                for _ in range(3)
            ]
        )

    # glottal pulse train: impulses where the running phase crosses integers
    phase = np.cumsum(pitch / sample_rate)
    pulses = np.zeros(n)
    pulses[np.diff(np.floor(phase), prepend=0.0) > 0] = np.sqrt(sample_rate / pitch0)

    noise = noise_rng.standard_normal(n)
    source = voicing * pulses + (1.0 - voicing) * noise

    # per-segment coloration with short raised-cosine edges against clicks
    excitation = np.empty(n)
    ramp = max(2, int(0.008 * sample_rate))
    for i in range(n_segs):
        a, b = bounds[i], bounds[i + 1]
        seg = source[a:b]
        for center, bw, gain in colors[i]:
            seg = sosfilt(_peaking_sos(center, bw, gain, sample_rate), seg)
        m = b - a
        env = np.ones(m)
        k = min(ramp, m // 2)
        if k > 0:
            edge = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, k))
            env[:k] = edge
            env[m - k :] = edge[::-1]
        excitation[a:b] = seg * env * level[a:b]

    voiced = sosfilt(_resonator_sos(profile, sample_rate), excitation)
    peak = np.max(np.abs(voiced))
    return Waveform(voiced / peak * 0.9, sample_rate)


def generate_corpus(spec: CorpusSpec, n_threads: int = 1) -> Corpus:
    """Generate the full corpus; amplitudes are snapped to the 16-bit grid."""
    profiles = [synth_speaker_profile(spec, s) for s in range(spec.n_speakers)]
    lo, hi = spec.duration_range_s

    def make(job) -> Utterance:
        spk, idx = job
        duration = float(stream(spec.seed, "dur", spk, idx).uniform(lo, hi))
        utt_seed = derive_seed(spec.seed, "utt", spk, idx)
        wave = synth_utterance(profiles[spk], utt_seed, duration, spec.sample_rate)
        snapped = np.round(wave.samples * PCM_SCALE) / PCM_SCALE
        return Utterance(
            utt_id=f"spk{spk:04d}_utt{idx:04d}",
            speaker_id=spk,
            waveform=Waveform(snapped, spec.sample_rate),
        )

    jobs = [(s, i) for s in range(spec.n_speakers) for i in range(spec.utts_per_speaker)]
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            utts = list(pool.map(make, jobs))
    else:
        utts = [make(j) for j in jobs]
    return Corpus(utts, spec.n_speakers, spec.sample_rate, spec)


# ---------------------------------------------------------------------------
# cropping
# ---------------------------------------------------------------------------


def center_crop(w: Waveform, n: int) -> Waveform:
    """The middle ``n`` samples; offset = floor((len - n) / 2). Never pads."""
    if len(w) < n:
        raise InsufficientLengthError(n, len(w), "center_crop input")
    offset = (len(w) - n) // 2
    return Waveform(w.samples[offset : offset + n], w.sample_rate)


def random_crop(w: Waveform, n: int, rng: np.random.Generator) -> Waveform:
    """A crop at an offset drawn uniformly from [0, len - n]."""
    if len(w) < n:
        raise InsufficientLengthError(n, len(w), "random_crop input")
    offset = int(rng.integers(0, len(w) - n + 1))
    return Waveform(w.samples[offset : offset + n], w.sample_rate)


def paired_crop(
    w: Waveform, n_long: int, n_short: int, rng: np.random.Generator
) -> tuple[Waveform, Waveform]:
    """A random long crop and the short crop centered inside it."""
    if n_long < n_short:
        raise DomainError(f"paired_crop needs n_long >= n_short, got {n_long} < {n_short}")
    long = random_crop(w, n_long, rng)
    return long, center_crop(long, n_short)


# ---------------------------------------------------------------------------
# on-disk format: manifest.tsv plus headerless 16-bit little-endian PCM
# ---------------------------------------------------------------------------


def write_corpus(corpus: Corpus, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = [MANIFEST_HEADER]
    for utt in corpus.utterances:
        rel = f"{utt.utt_id}.pcm"
        pcm = np.clip(np.round(utt.waveform.samples * PCM_SCALE), -32768, 32767).astype("<i2")
        (directory / rel).write_bytes(pcm.tobytes())
        rows.append(
            f"{utt.utt_id}\t{utt.speaker_id}\t{len(utt.waveform)}\t{utt.waveform.sample_rate}\t{rel}"
        )
    (directory / MANIFEST_NAME).write_text("\n".join(rows) + "\n")
    return directory


def read_corpus(directory) -> Corpus:
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.is_file():
        raise CorpusFormatError(f"no manifest at {manifest}")
    lines = manifest.read_text().splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise CorpusFormatError(f"{manifest} has a bad header line")
    utts = []
    sample_rate = None
    for ln, row in enumerate(lines[1:], start=2):
        if not row.strip():
            continue
        parts = row.split("\t")
        if len(parts) != 5:
            raise CorpusFormatError(f"{manifest}:{ln} has {len(parts)} fields, expected 5")
        utt_id, spk, n_samples, rate, rel = parts
        spk, n_samples, rate = int(spk), int(n_samples), int(rate)
        pcm_path = directory / rel
        if not pcm_path.is_file():
            raise CorpusFormatError(f"{manifest}:{ln} references missing file {pcm_path}")
        raw = pcm_path.read_bytes()
        if len(raw) != 2 * n_samples:
            raise CorpusFormatError(
                f"{pcm_path}: expected {2 * n_samples} bytes for {n_samples} samples, found {len(raw)}"
            )
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
        utts.append(Utterance(utt_id, spk, Waveform(samples, rate)))
        if sample_rate is None:
            sample_rate = rate
        elif rate != sample_rate:
            raise CorpusFormatError(f"{manifest}:{ln} mixes sample rates {sample_rate} and {rate}")
    if not utts:
        raise CorpusFormatError(f"{manifest} lists no utterances")
    n_speakers = max(u.speaker_id for u in utts) + 1
    return Corpus(utts, n_speakers, sample_rate)
