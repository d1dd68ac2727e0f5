"""Command-line pipeline driver.

Subcommands: ingest, simulate, train, influence, graph, experiment, report.
Every command is a thin wrapper over one module pipeline, writes a run
manifest alongside its outputs, and draws all randomness from explicit
--seed flags. Flag defaults can be pre-set from a key=value config file via
--config; explicit flags win.

Failures exit nonzero after printing a single machine-readable JSON line to
stderr naming the pipeline stage that failed.
"""

import argparse
import json
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, experiment, influence, ingest, relgraph, simgen
from .dkt import model as dkt_model
from .dkt import training as dkt_training

DATASET_FILE = "dataset.txt"
MODEL_FILE = "model.npz"


class StageError(Exception):
    def __init__(self, stage, original):
        super().__init__(f"[{stage}] {original}")
        self.stage = stage
        self.original = original


@contextmanager
def stage(name):
    """Annotate any exception raised inside with the pipeline stage name."""
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, e) from e


def _say(args, message):
    if not args.quiet:
        print(message, file=sys.stderr)


def _utc_now():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _manifest(args, command, config, inputs, outputs, seeds, started, t0):
    """One manifest per command, written next to its outputs."""
    out = Path(args.out)
    path = out / "manifest.json" if out.is_dir() else out.with_suffix(out.suffix + ".manifest.json")
    _write_json(
        path,
        {
            "schema": "run-manifest/v1",
            "command": command,
            "tool_version": __version__,
            "config": config,
            "inputs": [str(p) for p in inputs],
            "outputs": [str(p) for p in outputs],
            "seeds": seeds,
            "started_utc": started,
            "duration_s": round(time.perf_counter() - t0, 3),
        },
    )
    return path


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(path) -> ingest.Dataset:
    p = Path(path)
    if p.is_dir():
        p = p / DATASET_FILE
    return ingest.read_canonical(p)


def _dkt_config(args) -> dkt_model.DktConfig:
    return dkt_model.DktConfig(
        hidden_size=args.hidden,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        max_seq_len=args.max_seq_len,
        seed=args.seed,
        early_stop_patience=args.patience,
    )


def _probe_config(args) -> influence.ProbeConfig:
    return influence.ProbeConfig(
        method=args.method,
        stability_window=args.window,
        epsilon=args.epsilon,
        max_probes=args.max_probes,
    )


def cmd_ingest(args):
    started, t0 = _utc_now(), time.perf_counter()
    out = _outdir(args)
    with stage("ingest"):
        cols = ingest.ColumnConfig(
            user=args.user_col,
            skill=args.skill_col,
            correct=args.correct_col,
            order=args.order_col,
            name=args.name_col,
            encoding=args.encoding,
        )
        dataset, summary = ingest.parse_assistments(args.csv, cols)
        ingest.write_canonical(dataset, out / DATASET_FILE)
        _write_json(out / "parse_summary.json", summary.to_dict())
    _say(args, f"parsed {summary.num_students} students, E={summary.num_exercises}")
    _manifest(
        args, "ingest", {**asdict(cols), "csv": str(args.csv)}, [args.csv],
        [out / DATASET_FILE, out / "parse_summary.json"], {}, started, t0,
    )
    return 0


def cmd_simulate(args):
    started, t0 = _utc_now(), time.perf_counter()
    out = _outdir(args)
    with stage("simulate"):
        cfg = simgen.SimConfig(
            num_concepts=args.concepts,
            edge_probability=args.edge_prob,
            num_students=args.students,
            interactions_per_student=args.length,
            guess=args.guess,
            slip=args.slip,
            learn_rate=args.learn_rate,
            seed=args.seed,
        )
        dataset, gt = simgen.generate(cfg)
        ingest.write_canonical(dataset, out / DATASET_FILE)
        simgen.write_ground_truth(gt, out / "ground_truth.json")
    _say(args, f"simulated {cfg.num_students} students over {cfg.num_concepts} concepts "
               f"({len(gt.edges)} planted edges)")
    _manifest(
        args, "simulate", asdict(cfg), [],
        [out / DATASET_FILE, out / "ground_truth.json"], {"seed": args.seed}, started, t0,
    )
    return 0


def cmd_train(args):
    started, t0 = _utc_now(), time.perf_counter()
    out = _outdir(args)
    with stage("ingest"):
        dataset = _load_dataset(args.data)
    with stage("train"):
        cfg = _dkt_config(args)
        split = ingest.split_by_student(dataset, args.test_fraction, args.seed)
        model = dkt_model.init_model(dataset.num_exercises, cfg)
        report = dkt_training.train(model, split)
        dkt_model.save_model(model, out / MODEL_FILE)
        _write_json(out / "training_report.json", report.to_dict())
    _say(args, f"trained {report.epochs_run} epochs, best val AUC "
               f"{report.best_val_auc:.4f} (epoch {report.best_epoch})")
    _manifest(
        args, "train", {**asdict(cfg), "data": str(args.data), "test_fraction": args.test_fraction},
        [args.data], [out / MODEL_FILE, out / "training_report.json"],
        {"seed": args.seed}, started, t0,
    )
    return 0


def cmd_influence(args):
    started, t0 = _utc_now(), time.perf_counter()
    out = _outdir(args)
    with stage("load-model"):
        model = dkt_model.load_model(args.model)
    with stage("influence"):
        cfg = _probe_config(args)
        matrix = influence.influence_matrix(model, cfg)
        influence.write_csv(matrix, out / "influence.csv")
        influence.write_json(matrix, out / "influence.json")
    _say(args, f"probed {matrix.num_exercises} exercises with method={cfg.method}")
    _manifest(
        args, "influence", {**asdict(cfg), "model": str(args.model)}, [args.model],
        [out / "influence.csv", out / "influence.json"], {}, started, t0,
    )
    return 0


def cmd_graph(args):
    started, t0 = _utc_now(), time.perf_counter()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with stage("load-influence"):
        p = Path(args.influence)
        matrix = influence.read_json(p) if p.suffix == ".json" else influence.read_csv(p)
    with stage("graph"):
        tau = relgraph.min_acyclic_threshold(matrix) if args.tau is None else args.tau
        graph = relgraph.build_dag(matrix, tau)
        communities = relgraph.detect_communities(graph, args.seed)
        dot = relgraph.export_dot(graph, names=None, communities=communities)
        out.write_text(dot, encoding="utf-8")
        json_path = out.with_suffix(".json")
        relgraph.write_json(graph, json_path)
    _say(args, f"tau={graph.tau:.6g} edges={len(graph.edges)} acyclic={graph.acyclic} "
               f"communities={len(set(communities.labels.values()))}")
    _manifest(
        args, "graph",
        {"influence": str(args.influence), "tau": graph.tau, "seed": args.seed},
        [args.influence], [out, json_path], {"seed": args.seed}, started, t0,
    )
    return 0


def cmd_experiment(args):
    started, t0 = _utc_now(), time.perf_counter()
    out = _outdir(args)
    with stage("ingest"):
        dataset = _load_dataset(args.data)
    with stage("train"):
        cfg = _dkt_config(args)
        split = ingest.split_by_student(dataset, args.test_fraction, args.seed)
        model = dkt_model.init_model(dataset.num_exercises, cfg)
        train_report = dkt_training.train(model, split)
        dkt_model.save_model(model, out / MODEL_FILE)
        _write_json(out / "training_report.json", train_report.to_dict())
        _say(args, f"base model: best val AUC {train_report.best_val_auc:.4f}")
    with stage("influence"):
        matrix = influence.influence_matrix(model, _probe_config(args))
        influence.write_csv(matrix, out / "influence.csv")
        influence.write_json(matrix, out / "influence.json")
    with stage("graph"):
        tau = relgraph.min_acyclic_threshold(matrix)
        graph = relgraph.build_dag(matrix, tau)
        communities = relgraph.detect_communities(graph, args.seed)
        (out / "dag.dot").write_text(
            relgraph.export_dot(graph, names=None, communities=communities), encoding="utf-8"
        )
        relgraph.write_json(graph, out / "dag.json")
        _say(args, f"tau={tau:.6g} edges={len(graph.edges)}")
    with stage("experiment"):
        report = experiment.run_experiment(
            dataset, graph, cfg, args.seed,
            test_fraction=args.test_fraction, n_random=args.n_random,
        )
        experiment.write_report(report, out / "report.json")
    if not args.quiet:
        print(experiment.render_table(report, label=args.label))
    _manifest(
        args, "experiment",
        {**asdict(cfg), "data": str(args.data), "method": args.method,
         "test_fraction": args.test_fraction, "n_random": args.n_random},
        [args.data],
        [out / MODEL_FILE, out / "training_report.json", out / "influence.csv",
         out / "influence.json", out / "dag.dot", out / "dag.json", out / "report.json"],
        {"seed": args.seed}, started, t0,
    )
    return 0


def cmd_report(args):
    with stage("report"):
        report = experiment.read_report(args.report)
        table = experiment.render_table(report, label=args.label)
    print(table)
    if args.out:
        started, t0 = _utc_now(), time.perf_counter()
        Path(args.out).write_text(table + "\n", encoding="utf-8")
        _manifest(args, "report", {"report": str(args.report)}, [args.report],
                  [args.out], {}, started, t0)
    return 0


def _add_common(p):
    p.add_argument("--config", help="key=value file of flag defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")


def _add_train_flags(p):
    p.add_argument("--hidden", type=int, default=64, help="LSTM hidden size")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-seq-len", type=int, default=200)
    p.add_argument("--patience", type=int, default=5, help="early-stop patience")
    p.add_argument("--test-fraction", type=float, default=0.2)


def _add_probe_flags(p):
    p.add_argument("--method", choices=influence.METHODS, default="stabilized")
    p.add_argument("--window", type=int, default=100,
                   help="consecutive steady steps required to stop probing")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-probes", type=int, default=1000)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dktgraph",
        description="Knowledge-tracing pipeline: train, extract influence graphs, "
                    "and run causal-subset experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an interaction CSV into the canonical format")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--user-col", default="user_id")
    p.add_argument("--skill-col", default="skill_id")
    p.add_argument("--correct-col", default="correct")
    p.add_argument("--order-col", default="order_id")
    p.add_argument("--name-col", default="skill_name")
    p.add_argument("--encoding", default="utf-8")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with a planted DAG")
    p.add_argument("--out", required=True)
    p.add_argument("--concepts", type=int, default=15)
    p.add_argument("--students", type=int, default=500)
    p.add_argument("--length", type=int, default=100, help="interactions per student")
    p.add_argument("--edge-prob", type=float, default=0.2)
    p.add_argument("--guess", type=float, default=0.15)
    p.add_argument("--slip", type=float, default=0.1)
    p.add_argument("--learn-rate", type=float, default=0.3)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a model on a canonical dataset")
    p.add_argument("--data", required=True, help="canonical dataset file or directory")
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("influence", help="extract the influence matrix from a model")
    p.add_argument("--model", required=True, help="model checkpoint (.npz)")
    p.add_argument("--out", required=True)
    _add_probe_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("graph", help="prune an influence matrix into a DAG and export DOT")
    p.add_argument("--influence", required=True, help="influence matrix (.csv or .json)")
    p.add_argument("--out", required=True, help="output DOT file")
    p.add_argument("--tau", type=float, default=None,
                   help="edge threshold (default: smallest acyclicity-enforcing value)")
    _add_common(p)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("experiment", help="full pipeline: train, probe, prune, "
                                          "causal-vs-random retraining, z-score report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-random", type=int, default=5)
    p.add_argument("--label", default="dataset", help="dataset label for the summary table")
    _add_train_flags(p)
    _add_probe_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="render a saved experiment report as a table")
    p.add_argument("--report", required=True)
    p.add_argument("--out", default=None, help="also write the table to this file")
    p.add_argument("--label", default="dataset")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def _apply_config_file(parser, argv):
    """Pre-scan for --config and install its key=value pairs as subcommand
    defaults (typed via each flag's parser action)."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    entries = {}
    with open(known.config, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{known.config}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            entries[key.strip().replace("-", "_")] = value.strip()
    if not entries:
        return
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            defaults = {}
            for act in sub._actions:
                if act.dest in entries:
                    raw = entries[act.dest]
                    if isinstance(act.default, bool):
                        defaults[act.dest] = raw.lower() in ("1", "true", "yes")
                    else:
                        defaults[act.dest] = (act.type or str)(raw)
            sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except StageError as e:
        print(json.dumps({"error": str(e.original), "stage": e.stage}), file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(json.dumps({"error": str(e), "stage": "cli"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
