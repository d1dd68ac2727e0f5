"""Causal-subset versus random-subset comparison.

The causal subset is every exercise that kept at least one edge in the
pruned DAG. Interactions are filtered to the subset, the model is retrained
from scratch, and its test AUC is compared against models trained the same
way on size-matched random subsets via

    z = (AUC_causal - mean(random AUCs)) / std(random AUCs).

Students are split into train/test once, before any filtering, so every
subset model sees the same student partition and the subset choice is the
only varying factor. Each of the six trainings uses an identical config
except for the seed.
"""

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .dkt.model import DktConfig, init_model
from .dkt.training import train
from .ingest import Dataset, Interaction, Split, StudentSequence, split_by_student
from .relgraph import RelationGraph

REPORT_SCHEMA = "experiment-report/v1"


@dataclass(frozen=True)
class SubsetSpec:
    kind: str  # "causal" | "random"
    exercises: frozenset
    seed: int | None = None  # sampling seed for random subsets
    source: str = ""  # provenance: graph fingerprint or seed description

    def __post_init__(self):
        if self.kind not in ("causal", "random"):
            raise ValueError("kind must be 'causal' or 'random'")
        if not self.exercises:
            raise ValueError("subset must be nonempty")


@dataclass
class ExperimentReport:
    causal_auc: float
    random_aucs: list
    mu_random: float
    sigma_random: float
    z: float
    causal_size: int
    random_size: int
    method: str
    tau: float
    base_seed: int
    training_seeds: list
    random_subset_seeds: list
    test_fraction: float
    sigma_mode: str  # "sample" (n-1) or "population"
    dkt_config: dict
    graph_source: str = ""

    def to_dict(self):
        d = dict(self.__dict__)
        d["schema"] = REPORT_SCHEMA
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.pop("schema", REPORT_SCHEMA) != REPORT_SCHEMA:
            raise ValueError("unsupported report schema")
        return cls(**d)


def causal_subset(g: RelationGraph, source: str = "") -> SubsetSpec:
    """Exercises with at least one incoming or outgoing edge."""
    if not g.acyclic:
        raise ValueError("causal subset requires an acyclic graph")
    touched = set()
    for i, j, _ in g.edges:
        touched.add(i)
        touched.add(j)
    if not touched:
        raise ValueError("no edges survived pruning; causal subset is empty")
    return SubsetSpec("causal", frozenset(touched), None, source)


def random_subsets(
    num_exercises: int,
    size: int,
    n: int = 5,
    base_seed: int = 0,
    concept_types: dict | None = None,
    match_subset: SubsetSpec | None = None,
):
    """n uniform without-replacement samples of `size` exercises, one seed per
    subset (base_seed .. base_seed+n-1).

    When `concept_types` and `match_subset` are given, each sample instead
    matches the reference subset's per-type counts (stratified sampling).
    """
    if size > num_exercises:
        raise ValueError(f"size {size} exceeds number of exercises {num_exercises}")
    if n < 2:
        raise ValueError("need at least 2 random subsets")
    matched = concept_types is not None and match_subset is not None
    if matched:
        strata: dict = {}
        for e in range(num_exercises):
            strata.setdefault(concept_types[e], []).append(e)
        quota: dict = {}
        for e in match_subset.exercises:
            t = concept_types[e]
            quota[t] = quota.get(t, 0) + 1
        for t, q in quota.items():
            if q > len(strata.get(t, [])):
                raise ValueError(f"concept type {t!r} has only {len(strata.get(t, []))} "
                                 f"exercises but the reference subset needs {q}")
    subsets = []
    for k in range(n):
        seed = base_seed + k
        rng = np.random.default_rng(seed)
        if matched:
            chosen: list = []
            for t in sorted(quota, key=str):
                chosen.extend(rng.choice(strata[t], size=quota[t], replace=False))
            ids = np.array(chosen)
        else:
            ids = rng.choice(num_exercises, size=size, replace=False)
        subsets.append(SubsetSpec("random", frozenset(int(i) for i in ids), seed, f"seed={seed}"))
    return subsets


def _filter_sequences(sequences, keep: set, old_to_new: dict):
    """Restrict each sequence to `keep`, re-densify ids, drop short leftovers."""
    out = []
    for seq in sequences:
        inter = [
            Interaction(old_to_new[x.exercise], x.correct)
            for x in seq.interactions
            if x.exercise in keep
        ]
        if len(inter) >= 2:
            out.append(StudentSequence(seq.student, inter))
    return out


def filter_dataset(d: Dataset, s: SubsetSpec) -> Dataset:
    """Dataset restricted to the subset's exercises, ids re-densified to
    0..|subset|-1 in ascending old-id order, short sequences dropped."""
    keep = set(s.exercises)
    if any(e >= d.num_exercises or e < 0 for e in keep):
        raise ValueError("subset contains exercise ids outside the dataset")
    old_to_new = {old: new for new, old in enumerate(sorted(keep))}
    sequences = _filter_sequences(d.sequences, keep, old_to_new)
    if not sequences:
        raise ValueError("no sequences with >= 2 interactions survive the subset filter")
    return Dataset(
        num_exercises=len(keep),
        exercise_names={old_to_new[k]: v for k, v in d.exercise_names.items() if k in keep},
        sequences=sequences,
        id_map={raw: old_to_new[old] for raw, old in d.id_map.items() if old in keep},
    )


def z_score(causal: float, randoms, sigma_mode: str = "sample") -> float:
    """(causal - mean) / std of the random AUCs; std is the n-1 sample
    estimator unless sigma_mode="population"."""
    r = np.asarray(randoms, dtype=np.float64)
    if r.size < 2:
        raise ValueError("need at least 2 random AUCs")
    # identical values can still give std ~1e-17 from mean rounding
    if float(r.min()) == float(r.max()):
        raise ValueError("random AUCs have zero variance; z-score undefined")
    ddof = 1 if sigma_mode == "sample" else 0
    sigma = float(r.std(ddof=ddof))
    return float((causal - r.mean()) / sigma)


def _train_subset_auc(split: Split, subset: SubsetSpec, cfg: DktConfig, label: str) -> float:
    keep = set(subset.exercises)
    old_to_new = {old: new for new, old in enumerate(sorted(keep))}
    train_seqs = _filter_sequences(split.train, keep, old_to_new)
    test_seqs = _filter_sequences(split.test, keep, old_to_new)
    if not train_seqs or not test_seqs:
        raise ValueError(f"{label}: subset filtering left an empty train or test side")
    model = init_model(len(keep), cfg)
    report = train(model, Split(train_seqs, test_seqs, split.seed, split.test_fraction))
    return report.best_val_auc


def run_experiment(
    d: Dataset,
    g: RelationGraph,
    cfg: DktConfig,
    base_seed: int,
    test_fraction: float = 0.2,
    n_random: int = 5,
    sigma_mode: str = "sample",
) -> ExperimentReport:
    """Train one causal-subset model and `n_random` random-subset models from
    scratch and report their test AUCs and the z-score.

    Fully deterministic for fixed inputs: the student split uses base_seed,
    random subsets use base_seed..base_seed+n-1, and training k uses
    cfg.seed + k (k=0 causal).
    """
    graph_source = f"method={g.method} tau={g.tau:.12g} edges={len(g.edges)}"
    causal = causal_subset(g, source=graph_source)
    randoms = random_subsets(d.num_exercises, len(causal.exercises), n_random, base_seed)
    split = split_by_student(d, test_fraction, base_seed)

    training_seeds = [cfg.seed + k for k in range(1 + n_random)]
    aucs = []
    for k, subset in enumerate([causal] + randoms):
        label = "causal" if k == 0 else f"random[{k - 1}] (seed={subset.seed})"
        sub_cfg = replace(cfg, seed=training_seeds[k])
        try:
            aucs.append(_train_subset_auc(split, subset, sub_cfg, label))
        except Exception as e:
            raise RuntimeError(f"subset experiment failed for {label}: {e}") from e

    causal_auc, random_aucs = aucs[0], aucs[1:]
    r = np.asarray(random_aucs)
    return ExperimentReport(
        causal_auc=causal_auc,
        random_aucs=list(map(float, random_aucs)),
        mu_random=float(r.mean()),
        sigma_random=float(r.std(ddof=1 if sigma_mode == "sample" else 0)),
        z=z_score(causal_auc, random_aucs, sigma_mode),
        causal_size=len(causal.exercises),
        random_size=len(causal.exercises),
        method=g.method,
        tau=g.tau,
        base_seed=base_seed,
        training_seeds=training_seeds,
        random_subset_seeds=[s.seed for s in randoms],
        test_fraction=test_fraction,
        sigma_mode=sigma_mode,
        dkt_config=asdict(cfg),
        graph_source=graph_source,
    )


def render_table(report: ExperimentReport, label: str = "dataset") -> str:
    """Three-line summary table: causal row, random row."""
    rows = [
        ("Dataset", "AUC", "Exercises (#)", "z-score"),
        (f"{label} Causal", f"{report.causal_auc:.3f}", str(report.causal_size), f"{report.z:.2f}"),
        (
            f"{label} Random",
            f"{report.mu_random:.3f} ± {report.sigma_random:.3f}",
            str(report.random_size),
            "--",
        ),
    ]
    widths = [max(len(r[c]) for r in rows) for c in range(4)]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows)


def write_report(report: ExperimentReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_report(path) -> ExperimentReport:
    with open(path, encoding="utf-8") as fh:
        return ExperimentReport.from_dict(json.load(fh))
