"""Interaction-log ingestion: CSV parsing, canonical dataset files, and
student-level train/test splits.

Raw logs are long-format CSVs with one row per exercise attempt. Parsing
drops rows with a missing skill id or a non-binary correctness value,
groups the remainder by student, orders each student's rows by the
configured ordering column, and densifies skill ids to 0..E-1. Students
left with fewer than two interactions carry no next-step prediction label
and are dropped. All drop counts are surfaced in the parse summary.

Parsing is permutation-stable: shuffling input rows yields an identical
dataset. Ties in the ordering column are therefore broken deterministically
by (skill id, correctness), and dense ids / student order follow sorted raw
ids rather than first appearance.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

CANONICAL_FORMAT = "kt-sequences"
CANONICAL_VERSION = 1


@dataclass(frozen=True)
class Interaction:
    """One attempt: dense exercise id and binary correctness."""

    exercise: int
    correct: int


@dataclass
class StudentSequence:
    """One student's attempts in chronological order."""

    student: str
    interactions: list[Interaction]

    def __len__(self):
        return len(self.interactions)


@dataclass
class Dataset:
    num_exercises: int
    exercise_names: dict[int, str]
    sequences: list[StudentSequence]
    id_map: dict[str, int]  # raw source skill id -> dense exercise id


@dataclass
class Split:
    train: list[StudentSequence]
    test: list[StudentSequence]
    seed: int
    test_fraction: float


@dataclass
class ColumnConfig:
    """Names of the CSV columns to read; defaults match Assistments exports."""

    user: str = "user_id"
    skill: str = "skill_id"
    correct: str = "correct"
    order: str = "order_id"
    name: str | None = "skill_name"
    encoding: str = "utf-8"


@dataclass
class ParseSummary:
    rows_read: int = 0
    rows_dropped_missing_skill: int = 0
    rows_dropped_bad_correct: int = 0
    students_dropped_short: int = 0
    num_exercises: int = 0
    num_students: int = 0
    num_interactions: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def _sort_key(raw: str):
    """Numeric-aware ordering key for raw id/order strings."""
    try:
        return (0, float(raw), "")
    except ValueError:
        return (1, 0.0, raw)


def _first_skill(cell: str) -> str:
    """Collapsed multi-skill cells keep the first listed skill."""
    for sep in (",", ";"):
        if sep in cell:
            cell = cell.split(sep, 1)[0]
    return cell.strip()


def parse_assistments(path, columns: ColumnConfig | None = None):
    """Parse a long-format interaction CSV into a (Dataset, ParseSummary) pair.

    Raises FileNotFoundError for a missing file, ValueError for a header
    missing the configured columns or when no usable sequences remain.
    """
    cols = columns or ColumnConfig()
    summary = ParseSummary()
    per_student: dict[str, list] = {}
    names_by_skill: dict[str, set] = {}

    with open(path, newline="", encoding=cols.encoding, errors="replace") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = [cols.user, cols.skill, cols.correct, cols.order]
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"CSV header is missing configured columns: {missing}")
        has_names = cols.name is not None and cols.name in header

        for row in reader:
            summary.rows_read += 1
            skill = _first_skill(row.get(cols.skill) or "")
            if not skill:
                summary.rows_dropped_missing_skill += 1
                continue
            try:
                cval = float((row.get(cols.correct) or "").strip())
            except ValueError:
                cval = -1.0
            if cval not in (0.0, 1.0):
                summary.rows_dropped_bad_correct += 1
                continue
            order = (row.get(cols.order) or "").strip()
            user = (row.get(cols.user) or "").strip()
            per_student.setdefault(user, []).append(
                (_sort_key(order), _sort_key(skill), skill, int(cval))
            )
            if has_names:
                nm = (row.get(cols.name) or "").strip()
                if nm:
                    names_by_skill.setdefault(skill, set()).add(nm)

    kept: dict[str, list] = {}
    for user, rows in per_student.items():
        if len(rows) < 2:
            summary.students_dropped_short += 1
            continue
        rows.sort(key=lambda r: (r[0], r[1], r[3]))
        kept[user] = rows

    if not kept:
        raise ValueError("zero usable sequences after parsing and drop rules")

    surviving = sorted({r[2] for rows in kept.values() for r in rows}, key=_sort_key)
    id_map = {raw: dense for dense, raw in enumerate(surviving)}
    exercise_names = {
        id_map[raw]: min(names) for raw, names in names_by_skill.items() if raw in id_map
    }

    sequences = []
    for user in sorted(kept, key=_sort_key):
        inter = [Interaction(id_map[r[2]], r[3]) for r in kept[user]]
        sequences.append(StudentSequence(user, inter))
        summary.num_interactions += len(inter)

    summary.num_exercises = len(id_map)
    summary.num_students = len(sequences)
    dataset = Dataset(len(id_map), exercise_names, sequences, id_map)
    return dataset, summary


def validate_dataset(d: Dataset) -> None:
    """Raise ValueError if the dataset breaks its structural invariants."""
    if d.num_exercises < 1:
        raise ValueError("dataset has no exercises")
    if sorted(d.id_map.values()) != list(range(d.num_exercises)):
        raise ValueError("id_map dense ids are not contiguous 0..E-1")
    if not d.sequences:
        raise ValueError("dataset has no sequences")
    for seq in d.sequences:
        if len(seq) < 2:
            raise ValueError(f"student {seq.student!r} has fewer than 2 interactions")
        for x in seq.interactions:
            if not 0 <= x.exercise < d.num_exercises:
                raise ValueError(f"exercise id {x.exercise} out of range")
            if x.correct not in (0, 1):
                raise ValueError(f"non-binary correctness {x.correct}")


def split_by_student(d: Dataset, test_fraction: float, seed: int) -> Split:
    """Partition students into train/test with a seeded shuffle.

    The first ceil((1 - test_fraction) * S) shuffled students form the train
    side; identical seed and dataset give an identical split.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = len(d.sequences)
    if n < 2:
        raise ValueError("need at least 2 students to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(np.ceil((1.0 - test_fraction) * n))
    train = [d.sequences[i] for i in order[:n_train]]
    test = [d.sequences[i] for i in order[n_train:]]
    return Split(train, test, seed, test_fraction)


def write_canonical(d: Dataset, path) -> None:
    """Write the line-delimited canonical dataset format.

    Line 1 is a JSON header (format, version, E, names, id map); every other
    line is one student: JSON-quoted id, a tab, then space-separated
    ``exercise:correct`` pairs.
    """
    validate_dataset(d)
    header = {
        "format": CANONICAL_FORMAT,
        "version": CANONICAL_VERSION,
        "num_exercises": d.num_exercises,
        "exercise_names": {str(k): v for k, v in sorted(d.exercise_names.items())},
        "id_map": d.id_map,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for seq in d.sequences:
            pairs = " ".join(f"{x.exercise}:{x.correct}" for x in seq.interactions)
            fh.write(json.dumps(seq.student) + "\t" + pairs + "\n")


def read_canonical(path) -> Dataset:
    """Read a canonical dataset file; inverse of `write_canonical`."""
    with open(path, encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as e:
            raise ValueError(f"malformed canonical header: {e}") from e
        if header.get("format") != CANONICAL_FORMAT:
            raise ValueError(f"not a {CANONICAL_FORMAT} file")
        if header.get("version") != CANONICAL_VERSION:
            raise ValueError(
                f"unsupported schema version {header.get('version')} "
                f"(expected {CANONICAL_VERSION})"
            )
        sequences = []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            sid_json, _, pairs = line.partition("\t")
            inter = []
            for pair in pairs.split():
                e, _, c = pair.partition(":")
                inter.append(Interaction(int(e), int(c)))
            sequences.append(StudentSequence(json.loads(sid_json), inter))
    d = Dataset(
        header["num_exercises"],
        {int(k): v for k, v in header["exercise_names"].items()},
        sequences,
        {k: int(v) for k, v in header["id_map"].items()},
    )
    validate_dataset(d)
    return d
