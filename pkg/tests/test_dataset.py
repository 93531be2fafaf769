import numpy as np
import pytest
from hypothesis import given, strategies as st

from waveverify import dataset as ds
from waveverify.errors import CorpusFormatError, DomainError, InsufficientLengthError
from waveverify.rng import stream


def wave(samples, rate=4000):
    return ds.Waveform(np.asarray(samples, dtype=float), rate)


class TestSpeakerProfile:
    def test_deterministic(self, tiny_spec):
        a = ds.synth_speaker_profile(tiny_spec, 3)
        b = ds.synth_speaker_profile(tiny_spec, 3)
        assert a == b

    def test_speakers_differ(self, tiny_spec):
        a = ds.synth_speaker_profile(tiny_spec, 2)
        b = ds.synth_speaker_profile(tiny_spec, 3)
        assert a.resonance_centers != b.resonance_centers

    def test_seed_sensitivity(self):
        s7 = ds.CorpusSpec(4, 2, seed=7)
        s8 = ds.CorpusSpec(4, 2, seed=8)
        assert ds.synth_speaker_profile(s7, 3) != ds.synth_speaker_profile(s8, 3)

    def test_out_of_range_speaker(self, tiny_spec):
        with pytest.raises(DomainError):
            ds.synth_speaker_profile(tiny_spec, tiny_spec.n_speakers)
        with pytest.raises(DomainError):
            ds.synth_speaker_profile(tiny_spec, -1)

    def test_centers_strictly_increasing_below_nyquist(self, tiny_spec):
        for sid in range(tiny_spec.n_speakers):
            p = ds.synth_speaker_profile(tiny_spec, sid)
            centers = np.array(p.resonance_centers)
            assert np.all(np.diff(centers) > 0)
            assert centers[-1] < tiny_spec.sample_rate / 2
            assert 3 <= len(centers) <= 5
            assert len(p.resonance_bandwidths) == len(centers)

    def test_no_profile_collisions_in_ten_thousand(self):
        spec = ds.CorpusSpec(n_speakers=10_000, utts_per_speaker=1, seed=99)
        seen = set()
        for sid in range(spec.n_speakers):
            p = ds.synth_speaker_profile(spec, sid)
            key = (p.resonance_centers, p.pitch_base)
            assert key not in seen
            seen.add(key)


class TestSynthUtterance:
    def test_length_and_peak(self, tiny_spec):
        p = ds.synth_speaker_profile(tiny_spec, 0)
        w = ds.synth_utterance(p, 555, 4.0, 4000)
        assert len(w) == 16_000
        assert np.max(np.abs(w.samples)) == pytest.approx(0.9, abs=0)

    def test_deterministic(self, tiny_spec):
        p = ds.synth_speaker_profile(tiny_spec, 1)
        a = ds.synth_utterance(p, 42, 1.5, 4000)
        b = ds.synth_utterance(p, 42, 1.5, 4000)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_utt_seed_changes_excitation(self, tiny_spec):
        p = ds.synth_speaker_profile(tiny_spec, 1)
        a = ds.synth_utterance(p, 42, 1.5, 4000)
        b = ds.synth_utterance(p, 43, 1.5, 4000)
        assert not np.array_equal(a.samples, b.samples)

    def test_speakers_separable_by_average_spectrum(self):
        # linear-classifier sanity oracle: the corpus must carry identity
        from scipy.signal import welch
        from sklearn.discriminant_analysis import LinearDiscriminantAnalysis

        spec = ds.CorpusSpec(n_speakers=8, utts_per_speaker=8, duration_range_s=(2.0, 3.0),
                             sample_rate=4000, seed=31)
        corpus = ds.generate_corpus(spec)
        feats, labels = [], []
        for u in corpus.utterances:
            _, p = welch(u.waveform.samples, fs=4000, nperseg=256)
            feats.append(np.log(p + 1e-12))
            labels.append(u.speaker_id)
        feats, labels = np.array(feats), np.array(labels)
        train = np.array([int(u.utt_id[-4:]) < 5 for u in corpus.utterances])
        acc = (
            LinearDiscriminantAnalysis()
            .fit(feats[train], labels[train])
            .score(feats[~train], labels[~train])
        )
        assert acc > 0.5  # chance is 1/8


class TestCrops:
    def test_center_crop_offset(self):
        w = wave(np.arange(1, 11) / 10.0)
        out = ds.center_crop(w, 4)
        np.testing.assert_array_equal(out.samples, np.array([4, 5, 6, 7]) / 10.0)

    def test_center_crop_identity_when_equal(self):
        w = wave([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(ds.center_crop(w, 3).samples, w.samples)

    def test_center_crop_floor_offset(self):
        w = wave(np.linspace(-0.5, 0.5, 59_050))
        out = ds.center_crop(w, 59_049)
        np.testing.assert_array_equal(out.samples, w.samples[:59_049])

    def test_center_crop_idempotent(self):
        w = wave(np.linspace(-0.9, 0.9, 101))
        once = ds.center_crop(w, 31)
        twice = ds.center_crop(once, 31)
        np.testing.assert_array_equal(once.samples, twice.samples)

    def test_center_crop_too_short(self):
        with pytest.raises(InsufficientLengthError) as err:
            ds.center_crop(wave([0.1, 0.2]), 3)
        assert err.value.needed == 3 and err.value.actual == 2

    def test_random_crop_identity_when_equal(self):
        w = wave([0.1, 0.2, 0.3])
        out = ds.random_crop(w, 3, stream(0, "x"))
        np.testing.assert_array_equal(out.samples, w.samples)

    def test_random_crop_deterministic_given_stream(self):
        w = wave(np.linspace(-0.9, 0.9, 100))
        a = ds.random_crop(w, 90, stream(5, "crop"))
        b = ds.random_crop(w, 90, stream(5, "crop"))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_random_crop_offsets_uniform(self):
        from scipy.stats import chisquare

        w = wave(np.linspace(-0.9, 0.9, 100))
        gen = stream(17, "offsets")
        counts = np.zeros(11, dtype=int)
        for _ in range(10_000):
            out = ds.random_crop(w, 90, gen)
            offset = int(round((out.samples[0] - w.samples[0]) / (w.samples[1] - w.samples[0])))
            counts[offset] += 1
        assert chisquare(counts).pvalue > 0.01

    def test_paired_crop_contains_short(self):
        w = wave(np.linspace(-0.9, 0.9, 70_000))
        long, short = ds.paired_crop(w, 59_049, 32_805, stream(3, "p"))
        start = (59_049 - 32_805) // 2
        assert start == 13_122
        np.testing.assert_array_equal(short.samples, long.samples[start : start + 32_805])

    def test_paired_crop_equal_lengths(self):
        w = wave(np.linspace(-0.9, 0.9, 50))
        long, short = ds.paired_crop(w, 20, 20, stream(9, "p"))
        np.testing.assert_array_equal(long.samples, short.samples)

    @given(st.integers(12, 60), st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_paired_crop_containment_property(self, n_long, gap, seed):
        n_short = n_long - gap
        w = wave(np.sin(np.arange(200)) * 0.5)
        long, short = ds.paired_crop(w, n_long, n_short, stream(seed, "h"))
        # short appears at the center offset of long
        start = (n_long - n_short) // 2
        np.testing.assert_array_equal(short.samples, long.samples[start : start + n_short])


class TestWaveformValidation:
    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            wave([0.5, 1.5])

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            wave([0.5, np.nan])

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            wave([])


class TestCorpusRoundTrip:
    def test_bit_exact(self, tiny_corpus, tmp_path):
        ds.write_corpus(tiny_corpus, tmp_path / "c")
        back = ds.read_corpus(tmp_path / "c")
        assert len(back) == len(tiny_corpus)
        for a, b in zip(tiny_corpus.utterances, back.utterances):
            assert a.utt_id == b.utt_id
            assert a.speaker_id == b.speaker_id
            assert a.waveform.sample_rate == b.waveform.sample_rate
            np.testing.assert_array_equal(a.waveform.samples, b.waveform.samples)

    def test_generation_deterministic(self, tiny_spec, tiny_corpus):
        again = ds.generate_corpus(tiny_spec)
        for a, b in zip(tiny_corpus.utterances, again.utterances):
            np.testing.assert_array_equal(a.waveform.samples, b.waveform.samples)

    def test_threaded_generation_identical(self, tiny_spec, tiny_corpus):
        threaded = ds.generate_corpus(tiny_spec, n_threads=4)
        for a, b in zip(tiny_corpus.utterances, threaded.utterances):
            assert a.utt_id == b.utt_id
            np.testing.assert_array_equal(a.waveform.samples, b.waveform.samples)

    def test_missing_pcm_named(self, tiny_corpus, tmp_path):
        ds.write_corpus(tiny_corpus, tmp_path / "c")
        victim = tiny_corpus.utterances[2].utt_id
        (tmp_path / "c" / f"{victim}.pcm").unlink()
        with pytest.raises(CorpusFormatError) as err:
            ds.read_corpus(tmp_path / "c")
        assert victim in str(err.value)

    def test_truncated_pcm_reports_counts(self, tiny_corpus, tmp_path):
        ds.write_corpus(tiny_corpus, tmp_path / "c")
        utt = tiny_corpus.utterances[0]
        path = tmp_path / "c" / f"{utt.utt_id}.pcm"
        full = path.read_bytes()
        path.write_bytes(full[:-10])
        with pytest.raises(CorpusFormatError) as err:
            ds.read_corpus(tmp_path / "c")
        assert str(2 * len(utt.waveform)) in str(err.value)
        assert str(len(full) - 10) in str(err.value)

    def test_bad_header_rejected(self, tiny_corpus, tmp_path):
        ds.write_corpus(tiny_corpus, tmp_path / "c")
        manifest = tmp_path / "c" / "manifest.tsv"
        manifest.write_text("nope\n" + manifest.read_text())
        with pytest.raises(CorpusFormatError):
            ds.read_corpus(tmp_path / "c")

    def test_split_train_eval(self, tiny_corpus):
        train, evals = tiny_corpus.split_train_eval(1)
        assert len(train) == 12 and len(evals) == 4
        eval_ids = {u.utt_id for u in evals}
        assert all(u.utt_id.endswith("utt0003") for u in evals)
        assert not eval_ids & {u.utt_id for u in train}
