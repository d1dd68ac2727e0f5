"""Influence-score extraction from a trained model.

Every probe simulates a fresh student (zero hidden state) who answers one
exercise correctly — once for the single-probe method, or repeatedly until
the model's mastery estimate of that exercise stabilizes for the
multi-probe method. The resulting next-step probability vector, normalized
to sum to one, is a row of the influence matrix: entry (i, j) quantifies
how strongly correct work on exercise i raises the predicted success on j.

The diagonal is kept here (the row normalization sums over all exercises,
including the probed one); graph construction drops self-edges downstream.
"""

import json
from dataclasses import dataclass

import numpy as np

from .dkt.kernels import active as K
from .dkt.model import DktModel

INFLUENCE_SCHEMA = "influence-matrix/v1"

METHODS = ("single", "stabilized")


@dataclass(frozen=True)
class ProbeConfig:
    method: str = "stabilized"
    stability_window: int = 100  # consecutive steady steps required to stop
    epsilon: float = 1e-6  # |change| <= epsilon counts as steady
    max_probes: int = 1000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")
        if self.max_probes < self.stability_window:
            raise ValueError("max_probes must be >= stability_window")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class ProbeTrace:
    """Record of one stabilized probe.

    ``mastery_trace[t-1]`` is the model's predicted correctness probability
    for the probed exercise itself after t consecutive correct answers;
    ``final_probs`` is the full next-step probability vector at the stopping
    step. ``hit_cap`` marks probes stopped by `max_probes` rather than by
    stabilization.
    """

    exercise: int
    mastery_trace: np.ndarray
    stop_step: int
    hit_cap: bool
    final_probs: np.ndarray


@dataclass
class InfluenceMatrix:
    """Row-stochastic influence scores: values[i, j] >= 0, rows sum to 1."""

    values: np.ndarray  # (E, E)
    method: str
    model_fingerprint: str

    @property
    def num_exercises(self) -> int:
        return self.values.shape[0]


def _check_exercise(model: DktModel, i: int) -> None:
    if not 0 <= i < model.num_exercises:
        raise ValueError(f"exercise {i} out of range for E={model.num_exercises}")


def probe_single(model: DktModel, i: int) -> np.ndarray:
    """Next-step probability vector after one correct answer on exercise i,
    from a fresh zero hidden state."""
    _check_exercise(model, i)
    E = model.num_exercises
    H = model.config.hidden_size
    h, c = K.lstm_step(i + E, np.zeros(H), np.zeros(H), model.wx, model.wh, model.b)
    return K.output_probs(h, model.wy, model.by)


def probe_stabilized(model: DktModel, i: int, cfg: ProbeConfig | None = None) -> ProbeTrace:
    """Feed consecutive correct answers on exercise i until its own predicted
    probability holds steady (within epsilon) for `stability_window`
    consecutive steps, or until `max_probes`."""
    cfg = cfg or ProbeConfig()
    _check_exercise(model, i)
    E = model.num_exercises
    H = model.config.hidden_size
    h = np.zeros(H)
    c = np.zeros(H)
    k_in = i + E  # one-hot index of a correct answer on i
    trace = []
    steady = 0
    stop = cfg.max_probes
    hit_cap = True
    probs = None
    for t in range(1, cfg.max_probes + 1):
        h, c = K.lstm_step(k_in, h, c, model.wx, model.wh, model.b)
        probs = K.output_probs(h, model.wy, model.by)
        k_hat = float(probs[i])
        if trace and abs(k_hat - trace[-1]) <= cfg.epsilon:
            steady += 1
        elif trace:
            steady = 0
        trace.append(k_hat)
        if t >= cfg.stability_window and steady >= cfg.stability_window - 1:
            stop = t
            hit_cap = False
            break
    return ProbeTrace(i, np.array(trace), stop, hit_cap, probs)


def influence_matrix(model: DktModel, cfg: ProbeConfig | None = None) -> InfluenceMatrix:
    """Probe every exercise and stack the normalized rows."""
    cfg = cfg or ProbeConfig()
    E = model.num_exercises
    values = np.empty((E, E))
    for i in range(E):
        if cfg.method == "single":
            v = probe_single(model, i)
        else:
            v = probe_stabilized(model, i, cfg).final_probs
        total = v.sum()
        if not total > 0:
            raise RuntimeError(f"probe row {i} sums to {total}; model output is degenerate")
        values[i] = v / total
    return InfluenceMatrix(values, cfg.method, model.fingerprint())


def top_k_mastery(probe_vector: np.ndarray, i: int, k: int):
    """The k exercises (excluding i) with the highest probe probability,
    descending, ties broken by ascending exercise id."""
    v = np.asarray(probe_vector, dtype=np.float64)
    E = v.shape[0]
    if k >= E:
        raise ValueError(f"k must be < E={E}")
    others = [j for j in range(E) if j != i]
    others.sort(key=lambda j: (-v[j], j))
    return [(j, float(v[j])) for j in others[:k]]


def write_csv(m: InfluenceMatrix, path) -> None:
    """E x E CSV with a header row of exercise ids."""
    header = ",".join(str(j) for j in range(m.num_exercises))
    np.savetxt(path, m.values, delimiter=",", header=header, comments="", fmt="%.17g")


def read_csv(path, method: str = "unknown", fingerprint: str = "") -> InfluenceMatrix:
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if values.shape[0] != values.shape[1]:
        raise ValueError(f"influence matrix must be square, got {values.shape}")
    return InfluenceMatrix(values, method, fingerprint)


def write_json(m: InfluenceMatrix, path) -> None:
    payload = {
        "schema": INFLUENCE_SCHEMA,
        "method": m.method,
        "model_fingerprint": m.model_fingerprint,
        "num_exercises": m.num_exercises,
        "values": m.values.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path) -> InfluenceMatrix:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != INFLUENCE_SCHEMA:
        raise ValueError(f"unsupported influence schema {payload.get('schema')!r}")
    values = np.array(payload["values"])
    return InfluenceMatrix(values, payload["method"], payload["model_fingerprint"])
