import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dktgraph.dkt.model import DktConfig, init_model
from dktgraph.ingest import Dataset, Interaction, StudentSequence


def make_model(num_exercises=3, hidden_size=4, seed=0, **cfg_kwargs):
    cfg = DktConfig(hidden_size=hidden_size, seed=seed, **cfg_kwargs)
    return init_model(num_exercises, cfg)


def make_zero_model(num_exercises=3, hidden_size=4, **cfg_kwargs):
    model = make_model(num_exercises, hidden_size, **cfg_kwargs)
    for p in model.params():
        p[:] = 0.0
    return model


def make_sequence(pairs, student="s"):
    return StudentSequence(student, [Interaction(e, c) for e, c in pairs])


def make_dataset(num_exercises, seq_pairs):
    """seq_pairs: list of (student_id, [(exercise, correct), ...])."""
    return Dataset(
        num_exercises=num_exercises,
        exercise_names={},
        sequences=[make_sequence(pairs, sid) for sid, pairs in seq_pairs],
        id_map={str(i): i for i in range(num_exercises)},
    )


def random_dataset(rng, num_exercises=5, num_students=20, min_len=2, max_len=12):
    seqs = []
    for s in range(num_students):
        n = int(rng.integers(min_len, max_len + 1))
        pairs = [(int(rng.integers(num_exercises)), int(rng.integers(2))) for _ in range(n)]
        seqs.append((f"u{s}", pairs))
    return make_dataset(num_exercises, seqs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
