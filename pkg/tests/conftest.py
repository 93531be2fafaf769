import numpy as np
import pytest
from hypothesis import settings

from waveverify import dataset as ds

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def tiny_spec():
    return ds.CorpusSpec(
        n_speakers=4, utts_per_speaker=4, duration_range_s=(1.0, 1.6), sample_rate=4000, seed=7
    )


@pytest.fixture(scope="session")
def tiny_corpus(tiny_spec):
    return ds.generate_corpus(tiny_spec)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
