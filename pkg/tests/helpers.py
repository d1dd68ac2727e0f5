"""Independent reference implementations used as test oracles.

These deliberately re-derive results through different algorithms than the
package (explicit per-gate recurrences, pairwise counting, reachability
matrices, Kahn's queue) so agreement is meaningful.
"""

import numpy as np


def reference_lstm_forward(model, input_indices):
    """Plain per-gate LSTM recurrence, one step at a time, returning the
    (T, E) next-step probability matrix. Written directly from the gate
    equations; shares no code with the kernel backends."""
    E = model.num_exercises
    H = model.config.hidden_size
    h = np.zeros(H)
    c = np.zeros(H)
    out = []
    for k in input_indices:
        x = np.zeros(2 * E)
        x[k] = 1.0
        pre = x @ model.wx + h @ model.wh + model.b
        gate_i = 1.0 / (1.0 + np.exp(-pre[0:H]))
        gate_f = 1.0 / (1.0 + np.exp(-pre[H : 2 * H]))
        gate_g = np.tanh(pre[2 * H : 3 * H])
        gate_o = 1.0 / (1.0 + np.exp(-pre[3 * H : 4 * H]))
        c = gate_f * c + gate_i * gate_g
        h = gate_o * np.tanh(c)
        logits = model.wy @ h + model.by
        out.append(1.0 / (1.0 + np.exp(-logits)))
    return np.array(out)


def brute_force_auc(scores, labels):
    """O(P*N) pairwise comparison count with half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def reachable_pairs(num_nodes, edge_pairs):
    """Transitive closure by Floyd-Warshall; reach[i][j] True iff a directed
    path of length >= 1 exists."""
    reach = np.zeros((num_nodes, num_nodes), dtype=bool)
    for i, j in edge_pairs:
        reach[i, j] = True
    for k in range(num_nodes):
        for i in range(num_nodes):
            if reach[i, k]:
                reach[i] |= reach[k]
    return reach


def cycle_exists_by_reachability(num_nodes, edge_pairs):
    reach = reachable_pairs(num_nodes, edge_pairs)
    return bool(np.any(np.diag(reach)))


def kahn_topological_order(num_nodes, edge_pairs):
    """Kahn's algorithm; returns a topological order or None if cyclic."""
    indeg = [0] * num_nodes
    adj = [[] for _ in range(num_nodes)]
    for i, j in edge_pairs:
        adj[i].append(j)
        indeg[j] += 1
    queue = sorted(n for n in range(num_nodes) if indeg[n] == 0)
    order = []
    while queue:
        n = queue.pop(0)
        order.append(n)
        for m in adj[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return order if len(order) == num_nodes else None


def parse_dot(text):
    """Minimal DOT grammar checker for digraphs: validates the overall
    braces/statement structure and returns (node_ids, edges, had_attrs).
    Raises ValueError on anything it cannot parse."""
    text = text.strip()
    if not text.startswith("digraph"):
        raise ValueError("must start with 'digraph'")
    open_brace = text.index("{")
    if not text.endswith("}"):
        raise ValueError("must end with '}'")
    body = text[open_brace + 1 : -1]
    nodes, edges = set(), []
    for raw in body.split(";"):
        stmt = raw.strip()
        if not stmt:
            continue
        attrs = None
        if stmt.endswith("]"):
            bracket = stmt.index("[")
            attrs = stmt[bracket + 1 : -1]
            stmt = stmt[:bracket].strip()
            _check_attr_list(attrs)
        if "->" in stmt:
            parts = [p.strip() for p in stmt.split("->")]
            if len(parts) < 2 or not all(_is_id(p) for p in parts):
                raise ValueError(f"bad edge statement: {stmt!r}")
            for a, b in zip(parts, parts[1:]):
                edges.append((a, b))
        else:
            if not _is_id(stmt):
                raise ValueError(f"bad node statement: {stmt!r}")
            nodes.add(stmt)
    return nodes, edges


def _is_id(token):
    if not token:
        return False
    if token.startswith('"') and token.endswith('"'):
        return True
    return all(ch.isalnum() or ch in "_." for ch in token)


def _check_attr_list(attrs):
    # key=value pairs separated by commas; values may be quoted
    for part in _split_attrs(attrs):
        if "=" not in part:
            raise ValueError(f"bad attribute: {part!r}")
        key, _, value = part.partition("=")
        if not _is_id(key.strip()) or not _is_id(value.strip()):
            raise ValueError(f"bad attribute: {part!r}")


def _split_attrs(attrs):
    parts, buf, in_quote = [], "", False
    for ch in attrs:
        if ch == '"':
            in_quote = not in_quote
        if ch == "," and not in_quote:
            parts.append(buf)
            buf = ""
        else:
            buf += ch
    if buf.strip():
        parts.append(buf)
    return parts
