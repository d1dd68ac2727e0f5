"""Synthetic student simulator with a planted prerequisite DAG.

Concepts are ordered by a random topological rank and edges only point from
lower to higher rank, so the planted graph is acyclic by construction. Each
simulated student holds a mastery vector that starts at 0.1 everywhere; a
step picks a uniformly random concept, answers it with a guess/slip-noised
probability gated by prerequisite readiness, then nudges mastery upward.
Readiness of a concept is the mean mastery of its prerequisites (1.0 when it
has none), which keeps correctness probabilities usable even in deep graphs.

Per-student RNG streams are spawned from the root seed by student index, so
generation is reproducible and independent of any execution schedule.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .ingest import Dataset, Interaction, StudentSequence
from .dkt.metrics import auc

GROUND_TRUTH_SCHEMA = "sim-ground-truth/v1"

INITIAL_MASTERY = 0.1


@dataclass(frozen=True)
class SimConfig:
    num_concepts: int = 15
    edge_probability: float = 0.2
    num_students: int = 500
    interactions_per_student: int = 100
    guess: float = 0.15
    slip: float = 0.1
    learn_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.num_concepts < 2:
            raise ValueError("num_concepts must be >= 2")
        if self.interactions_per_student < 2:
            raise ValueError("interactions_per_student must be >= 2")
        if self.num_students < 1:
            raise ValueError("num_students must be >= 1")
        if not 0.0 <= self.edge_probability <= 1.0:
            raise ValueError("edge_probability must be in [0, 1]")
        if not 0.0 <= self.guess < 0.5 or not 0.0 <= self.slip < 0.5:
            raise ValueError("guess and slip must be in [0, 0.5)")
        if not 0.0 <= self.learn_rate <= 1.0:
            raise ValueError("learn_rate must be in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class GroundTruth:
    num_concepts: int
    edges: set  # of (prerequisite, dependent) pairs
    final_masteries: np.ndarray  # (S, E)
    config: SimConfig

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.num_concepts, self.num_concepts))
        for i, j in self.edges:
            adj[i, j] = 1.0
        return adj


def _draw_dag(rng, cfg: SimConfig):
    """Random topological order, then independent edge coins along it."""
    order = rng.permutation(cfg.num_concepts)
    edges = set()
    for a in range(cfg.num_concepts):
        for b in range(a + 1, cfg.num_concepts):
            if rng.random() < cfg.edge_probability:
                edges.add((int(order[a]), int(order[b])))
    return edges


def _simulate_student(rng, prereqs, cfg: SimConfig):
    """One trajectory; returns (interactions, mastery trace of shape (L+1, E))."""
    E = cfg.num_concepts
    L = cfg.interactions_per_student
    m = np.full(E, INITIAL_MASTERY)
    trace = np.empty((L + 1, E))
    trace[0] = m
    interactions = []
    for step in range(L):
        j = int(rng.integers(E))
        pre = prereqs[j]
        r = float(np.mean(m[pre])) if len(pre) else 1.0
        p_correct = cfg.guess + (1.0 - cfg.guess - cfg.slip) * m[j] * r
        correct = int(rng.random() < p_correct)
        m[j] += cfg.learn_rate * r * (1.0 - m[j])
        trace[step + 1] = m
        interactions.append(Interaction(j, correct))
    return interactions, trace


def generate(cfg: SimConfig):
    """Produce a (Dataset, GroundTruth) pair, deterministic under cfg.seed."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.num_students + 1)
    edges = _draw_dag(np.random.default_rng(children[0]), cfg)
    prereqs = [
        np.array(sorted(i for i, j in edges if j == k), dtype=np.int64)
        for k in range(cfg.num_concepts)
    ]
    sequences = []
    finals = np.empty((cfg.num_students, cfg.num_concepts))
    for s in range(cfg.num_students):
        inter, trace = _simulate_student(np.random.default_rng(children[s + 1]), prereqs, cfg)
        sequences.append(StudentSequence(f"s{s:04d}", inter))
        finals[s] = trace[-1]

    dataset = Dataset(
        num_exercises=cfg.num_concepts,
        exercise_names={},
        sequences=sequences,
        id_map={str(k): k for k in range(cfg.num_concepts)},
    )
    return dataset, GroundTruth(cfg.num_concepts, edges, finals, cfg)


def edge_recovery_score(influence_values: np.ndarray, gt: GroundTruth) -> float:
    """AUC of off-diagonal influence scores as a ranker of true edges."""
    J = np.asarray(influence_values, dtype=np.float64)
    E = gt.num_concepts
    if J.shape != (E, E):
        raise ValueError(f"influence matrix shape {J.shape} does not match E={E}")
    n_edges = len(gt.edges)
    if n_edges == 0 or n_edges == E * (E - 1):
        raise ValueError("ground truth has no edges or all possible edges")
    off = ~np.eye(E, dtype=bool)
    return auc(J[off], gt.adjacency()[off].astype(np.int64))


def write_ground_truth(gt: GroundTruth, path) -> None:
    payload = {
        "schema": GROUND_TRUTH_SCHEMA,
        "num_concepts": gt.num_concepts,
        "edges": sorted(list(e) for e in gt.edges),
        "final_masteries": gt.final_masteries.tolist(),
        "config": asdict(gt.config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_ground_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != GROUND_TRUTH_SCHEMA:
        raise ValueError(f"unsupported ground-truth schema {payload.get('schema')!r}")
    return GroundTruth(
        payload["num_concepts"],
        {tuple(e) for e in payload["edges"]},
        np.array(payload["final_masteries"]),
        SimConfig(**payload["config"]),
    )
