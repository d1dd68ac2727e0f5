"""LSTM knowledge-tracing core: configuration, parameters, encoding,
forward traces, loss, and checkpoint io.

The network consumes one-hot encoded (exercise, correctness) interactions of
dimension 2E and emits, per step, an E-vector of next-step correctness
probabilities through a per-exercise sigmoid head.
"""

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..ingest import Interaction, StudentSequence
from .kernels import active as K

CHECKPOINT_SCHEMA = "dkt-model/v1"

PARAM_NAMES = ("wx", "wh", "b", "wy", "by")


@dataclass(frozen=True)
class DktConfig:
    """Training hyperparameters. The input encoding dimension is 2E and is
    derived from the dataset, not configured."""

    hidden_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    max_seq_len: int = 200
    grad_clip_norm: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    early_stop_patience: int = 5

    def __post_init__(self):
        if min(self.hidden_size, self.epochs, self.batch_size, self.early_stop_patience) < 1:
            raise ValueError("counts must be >= 1")
        if self.max_seq_len < 2:
            raise ValueError("max_seq_len must be >= 2")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.grad_clip_norm <= 0 or self.adam_eps <= 0:
            raise ValueError("grad_clip_norm and adam_eps must be > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("adam betas must be in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class DktModel:
    """LSTM parameters. Gate order along the fused 4H axis is
    input | forget | candidate | output; `wy` holds one output row per
    exercise."""

    num_exercises: int
    config: DktConfig
    wx: np.ndarray  # (2E, 4H)
    wh: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)
    wy: np.ndarray  # (E, H)
    by: np.ndarray  # (E,)

    def params(self):
        return [self.wx, self.wh, self.b, self.wy, self.by]

    def set_params(self, values):
        self.wx, self.wh, self.b, self.wy, self.by = values

    def copy_params(self):
        return [p.copy() for p in self.params()]

    def assert_finite(self):
        for name, p in zip(PARAM_NAMES, self.params()):
            if not np.all(np.isfinite(p)):
                raise FloatingPointError(f"non-finite values in parameter {name}")

    def fingerprint(self) -> str:
        """Stable 16-hex-digit digest of parameters and config."""
        digest = hashlib.sha256()
        digest.update(json.dumps(asdict(self.config), sort_keys=True).encode())
        digest.update(str(self.num_exercises).encode())
        for p in self.params():
            digest.update(np.ascontiguousarray(p).tobytes())
        return digest.hexdigest()[:16]


@dataclass
class PredictionTrace:
    """Next-step probabilities aligned with the attempted exercises.

    ``probs[t]`` is the full E-vector predicted after consuming interactions
    0..t; ``target_exercises[t]`` / ``target_labels[t]`` identify interaction
    t+1. Length is one less than the (truncated) sequence length.
    """

    probs: np.ndarray  # (L-1, E)
    target_exercises: np.ndarray  # (L-1,) int64
    target_labels: np.ndarray  # (L-1,) float64

    def __len__(self):
        return self.probs.shape[0]

    def target_scores(self) -> np.ndarray:
        """Predicted probability of the exercise actually attempted next."""
        return self.probs[np.arange(len(self)), self.target_exercises]


def init_model(num_exercises: int, config: DktConfig) -> DktModel:
    """Seeded uniform(-k, k) initialization with k = 1/sqrt(hidden_size)."""
    if num_exercises < 1:
        raise ValueError("num_exercises must be >= 1")
    H = config.hidden_size
    k = 1.0 / np.sqrt(H)
    rng = np.random.default_rng([config.seed, 0])
    shapes = [(2 * num_exercises, 4 * H), (H, 4 * H), (4 * H,), (num_exercises, H), (num_exercises,)]
    params = [rng.uniform(-k, k, size=s) for s in shapes]
    return DktModel(num_exercises, config, *params)


def interaction_index(x: Interaction, num_exercises: int) -> int:
    """Position of the one-hot bit: exercise if incorrect, exercise + E if correct."""
    if not 0 <= x.exercise < num_exercises:
        raise ValueError(f"exercise {x.exercise} out of range for E={num_exercises}")
    if x.correct not in (0, 1):
        raise ValueError(f"correctness must be 0 or 1, got {x.correct}")
    return x.exercise + num_exercises * x.correct


def encode_interaction(x: Interaction, num_exercises: int) -> np.ndarray:
    """One-hot encode an interaction into a 2E vector."""
    v = np.zeros(2 * num_exercises)
    v[interaction_index(x, num_exercises)] = 1.0
    return v


def sequence_arrays(seq: StudentSequence, num_exercises: int, max_seq_len: int):
    """Truncate to the most recent `max_seq_len` interactions and expose the
    consumed-input indices plus next-step targets/labels as arrays."""
    inter = seq.interactions[-max_seq_len:]
    x_idx = np.array([interaction_index(x, num_exercises) for x in inter[:-1]], dtype=np.int64)
    targets = np.array([x.exercise for x in inter[1:]], dtype=np.int64)
    labels = np.array([float(x.correct) for x in inter[1:]], dtype=np.float64)
    return x_idx, targets, labels


def forward(model: DktModel, seq: StudentSequence) -> PredictionTrace:
    """Run the recurrence over one sequence from a zero hidden state."""
    if len(seq) < 2:
        raise ValueError("sequence must have at least 2 interactions")
    x_idx, targets, labels = sequence_arrays(seq, model.num_exercises, model.config.max_seq_len)
    probs = K.lstm_forward_probs(x_idx, model.wx, model.wh, model.b, model.wy, model.by)
    return PredictionTrace(probs, targets, labels)


def loss(trace: PredictionTrace) -> float:
    """Mean binary cross-entropy of the next attempted exercise's probability,
    clamped to [1e-7, 1 - 1e-7] before the log."""
    p = np.clip(trace.target_scores(), K.PROB_CLAMP, 1.0 - K.PROB_CLAMP)
    a = trace.target_labels
    return float(-np.mean(a * np.log(p) + (1.0 - a) * np.log1p(-p)))


def save_model(model: DktModel, path) -> None:
    """Write a versioned npz checkpoint; loading reproduces identical predictions."""
    meta = {
        "schema": CHECKPOINT_SCHEMA,
        "num_exercises": model.num_exercises,
        "config": asdict(model.config),
    }
    np.savez(
        path,
        meta=np.array(json.dumps(meta, sort_keys=True)),
        **dict(zip(PARAM_NAMES, model.params())),
    )


def load_model(path) -> DktModel:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("schema") != CHECKPOINT_SCHEMA:
            raise ValueError(
                f"unsupported checkpoint schema {meta.get('schema')!r} "
                f"(expected {CHECKPOINT_SCHEMA})"
            )
        params = [np.array(data[name]) for name in PARAM_NAMES]
    return DktModel(meta["num_exercises"], DktConfig(**meta["config"]), *params)
