"""Pruning influence matrices into weighted DAGs.

An edge (i, j) survives when its influence score is strictly greater than
the threshold tau. Acyclicity is monotone in tau (raising it only removes
edges), so the smallest acyclicity-enforcing threshold is found by binary
search over the observed weight values. Cycle detection is an iterative
three-color depth-first search that also returns a witness cycle.

Community detection groups exercises into topics for visualization; it runs
Louvain modularity maximization on the symmetrized weighted graph (direction
stays in the DAG itself, but modularity is an undirected quantity).
"""

import json
from dataclasses import dataclass

import networkx as nx
import numpy as np

GRAPH_SCHEMA = "relation-graph/v1"

# 12-color qualitative palette for community fills
PALETTE = (
    "#a6cee3", "#1f78b4", "#b2df8a", "#33a02c", "#fb9a99", "#e31a1c",
    "#fdbf6f", "#ff7f00", "#cab2d6", "#6a3d9a", "#ffff99", "#b15928",
)


@dataclass
class RelationGraph:
    """Weighted directed graph over exercises 0..num_nodes-1 with no
    self-edges; every stored edge has weight > tau."""

    num_nodes: int
    edges: list  # of (src, dst, weight) tuples, sorted by (src, dst)
    tau: float
    acyclic: bool
    method: str = ""


@dataclass
class CommunityAssignment:
    labels: dict  # node -> community label (0-based, by smallest member id)
    modularity: float


def _adjacency_lists(num_nodes: int, edge_pairs) -> list:
    adj = [[] for _ in range(num_nodes)]
    for i, j in edge_pairs:
        adj[i].append(j)
    for nbrs in adj:
        nbrs.sort()
    return adj


def _find_cycle(num_nodes: int, adj: list):
    """Iterative three-color DFS; returns a witness cycle (closing on its
    first vertex) or None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * num_nodes
    for start in range(num_nodes):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(adj[start]))]
        color[start] = GRAY
        path = [start]
        while stack:
            node, nbrs = stack[-1]
            advanced = False
            for nb in nbrs:
                if color[nb] == GRAY:
                    return path[path.index(nb) :] + [nb]
                if color[nb] == WHITE:
                    color[nb] = GRAY
                    stack.append((nb, iter(adj[nb])))
                    path.append(nb)
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
                path.pop()
    return None


def has_cycle(g: RelationGraph):
    """(True, witness vertex cycle) when a directed cycle exists, else
    (False, None)."""
    witness = _find_cycle(g.num_nodes, _adjacency_lists(g.num_nodes, [(i, j) for i, j, _ in g.edges]))
    return witness is not None, witness


def _edge_pairs_above(values: np.ndarray, tau: float):
    E = values.shape[0]
    src, dst = np.nonzero(values > tau)
    return [(int(i), int(j)) for i, j in zip(src, dst) if i != j]


def min_acyclic_threshold(m) -> float:
    """Smallest tau in {0} union {observed off-diagonal weights} whose
    strictly-greater-than graph is acyclic."""
    values = np.asarray(m.values if hasattr(m, "values") else m, dtype=np.float64)
    E = values.shape[0]
    if E < 1 or values.shape != (E, E):
        raise ValueError("influence matrix must be a square E>=1 matrix")
    off = ~np.eye(E, dtype=bool)
    candidates = [0.0] + sorted(set(values[off].tolist()))

    def acyclic_at(tau):
        return _find_cycle(E, _adjacency_lists(E, _edge_pairs_above(values, tau))) is None

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if acyclic_at(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def build_dag(m, tau: float, method: str | None = None) -> RelationGraph:
    """Graph with every off-diagonal edge whose weight exceeds tau; the
    acyclic flag reports an actual cycle check (callers decide what a cyclic
    result means)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    values = np.asarray(m.values if hasattr(m, "values") else m, dtype=np.float64)
    E = values.shape[0]
    pairs = _edge_pairs_above(values, tau)
    edges = [(i, j, float(values[i, j])) for i, j in sorted(pairs)]
    witness = _find_cycle(E, _adjacency_lists(E, pairs))
    if method is None:
        method = getattr(m, "method", "")
    return RelationGraph(E, edges, float(tau), witness is None, method)


def symmetrized_weights(g: RelationGraph) -> dict:
    """Undirected edge weights: sum of the two directed weights per pair."""
    weights: dict = {}
    for i, j, w in g.edges:
        key = (min(i, j), max(i, j))
        weights[key] = weights.get(key, 0.0) + w
    return weights


def weighted_modularity(weights: dict, num_nodes: int, labels: dict) -> float:
    """Newman modularity of a partition of an undirected weighted graph given
    as {(u, v): weight} with u < v. Zero for graphs with no edge weight."""
    m = sum(weights.values())
    if m <= 0:
        return 0.0
    degree = np.zeros(num_nodes)
    for (u, v), w in weights.items():
        degree[u] += w
        degree[v] += w
    intra = {}
    deg_sum = {}
    for (u, v), w in weights.items():
        if labels[u] == labels[v]:
            intra[labels[u]] = intra.get(labels[u], 0.0) + w
    for node in range(num_nodes):
        c = labels[node]
        deg_sum[c] = deg_sum.get(c, 0.0) + degree[node]
    q = 0.0
    for c, k in deg_sum.items():
        q += intra.get(c, 0.0) / m - (k / (2.0 * m)) ** 2
    return float(q)


def detect_communities(g: RelationGraph, seed: int) -> CommunityAssignment:
    """Louvain topic grouping on the symmetrized graph, deterministic under
    seed. Labels are renumbered by each community's smallest node id."""
    if g.num_nodes < 1:
        raise ValueError("graph has no nodes")
    weights = symmetrized_weights(g)
    gu = nx.Graph()
    gu.add_nodes_from(range(g.num_nodes))
    gu.add_weighted_edges_from((u, v, w) for (u, v), w in weights.items())
    parts = nx.community.louvain_communities(gu, weight="weight", threshold=1e-7, seed=seed)
    parts = sorted(parts, key=min)
    labels = {node: ci for ci, part in enumerate(parts) for node in part}
    return CommunityAssignment(labels, weighted_modularity(weights, g.num_nodes, labels))


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(
    g: RelationGraph,
    names: dict | None = None,
    communities: CommunityAssignment | None = None,
) -> str:
    """Render as DOT. Nodes are labeled "id: name" (id alone if unnamed) and
    filled from a fixed 12-color palette by community; edge penwidth scales
    linearly with weight onto [1, 5]."""
    names = names or {}
    lines = ["digraph exercise_relations {"]
    for node in range(g.num_nodes):
        label = f"{node}: {names[node]}" if names.get(node) else str(node)
        attrs = [f"label={_dot_quote(label)}"]
        if communities is not None:
            color = PALETTE[communities.labels[node] % len(PALETTE)]
            attrs.append("style=filled")
            attrs.append(f'fillcolor="{color}"')
        lines.append(f"  {node} [{', '.join(attrs)}];")
    if g.edges:
        weights = [w for _, _, w in g.edges]
        w_min, w_max = min(weights), max(weights)
        span = w_max - w_min
        for i, j, w in g.edges:
            pen = 3.0 if span == 0 else 1.0 + 4.0 * (w - w_min) / span
            lines.append(f"  {i} -> {j} [penwidth={pen:.3f}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_json(g: RelationGraph, path) -> None:
    payload = {
        "schema": GRAPH_SCHEMA,
        "num_nodes": g.num_nodes,
        "tau": g.tau,
        "method": g.method,
        "acyclic": g.acyclic,
        "edges": [{"from": i, "to": j, "weight": w} for i, j, w in g.edges],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path) -> RelationGraph:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != GRAPH_SCHEMA:
        raise ValueError(f"unsupported graph schema {payload.get('schema')!r}")
    edges = [(e["from"], e["to"], e["weight"]) for e in payload["edges"]]
    return RelationGraph(
        payload["num_nodes"], edges, payload["tau"], payload["acyclic"], payload["method"]
    )
