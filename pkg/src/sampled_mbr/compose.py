"""Score lattices and transducer composition.

A score matrix ``z`` of shape (T, Q) induces a "sausage" acceptor with one
edge per (frame, symbol) pair; composing it with a decoder transducer gives
the lattice whose paths carry frame-symbol sequences on the input tape and
word sequences on the output tape.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .errors import (
    DimensionMismatchError,
    FstParseError,
    UnsupportedCompositionError,
)
from .fst import EPSILON, Edge, Path, Wfst, empty_wfst


def build_score_fst(log_scores: np.ndarray) -> Wfst:
    """Sausage acceptor for a (T, Q) score matrix.

    State t connects to state t+1 with Q parallel edges; the edge for
    symbol q (1-based) has ilabel = olabel = q and log-weight z[t, q-1].
    Entries may be -inf (a disallowed symbol) but not NaN or +inf.
    """
    z = np.asarray(log_scores, dtype=float)
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise DimensionMismatchError(
            f"score matrix must be 2-d and nonempty, got shape {z.shape}"
        )
    if np.isnan(z).any() or (z == np.inf).any():
        raise DimensionMismatchError("score matrix contains NaN or +inf")
    num_frames, num_symbols = z.shape
    edges = [
        Edge(t, t + 1, q + 1, q + 1, float(z[t, q]))
        for t in range(num_frames)
        for q in range(num_symbols)
    ]
    return Wfst(num_frames + 1, edges, final=num_frames)


def compose(a: Wfst, b: Wfst) -> Wfst:
    """Compose two transducers, matching a's output tape to b's input tape.

    Epsilon handling is one-sided: edges of ``b`` with epsilon input may
    fire without consuming an edge of ``a`` only when ``a`` has no epsilon
    output labels, and symmetrically for epsilon-output edges of ``a``.
    When both sides carry epsilons on the shared tape the composition is
    ambiguous under this scheme and UnsupportedCompositionError is raised.

    The result is trimmed to states on a complete path.  When no complete
    path exists the canonical two-state empty transducer is returned.
    """
    a_has_oeps = any(e.olabel == EPSILON for e in a.edges)
    b_has_ieps = any(e.ilabel == EPSILON for e in b.edges)
    if a_has_oeps and b_has_ieps:
        raise UnsupportedCompositionError(
            "epsilons on both sides of the shared tape"
        )

    # Index b's out-edges by input label for the match step.
    b_by_label: list[dict[int, list[int]]] = []
    for qb in range(b.num_states):
        table: dict[int, list[int]] = {}
        for k in b.out_edge_ids(qb):
            table.setdefault(b.edges[k].ilabel, []).append(k)
        b_by_label.append(table)

    start = (a.initial, b.initial)
    state_id: dict[tuple[int, int], int] = {start: 0}
    frontier = deque([start])
    edges: list[Edge] = []
    while frontier:
        qa, qb = frontier.popleft()
        src = state_id[(qa, qb)]

        def target(pair: tuple[int, int]) -> int:
            if pair not in state_id:
                state_id[pair] = len(state_id)
                frontier.append(pair)
            return state_id[pair]

        for ka in a.out_edge_ids(qa):
            ea = a.edges[ka]
            if ea.olabel == EPSILON:
                # a moves alone; legal because b has no input epsilons.
                dst = target((ea.dst, qb))
                edges.append(
                    Edge(src, dst, ea.ilabel, EPSILON, ea.log_weight)
                )
                continue
            for kb in b_by_label[qb].get(ea.olabel, ()):
                eb = b.edges[kb]
                dst = target((ea.dst, eb.dst))
                edges.append(
                    Edge(
                        src,
                        dst,
                        ea.ilabel,
                        eb.olabel,
                        ea.log_weight + eb.log_weight,
                    )
                )
        for kb in b_by_label[qb].get(EPSILON, ()):
            # b moves alone; legal because a has no output epsilons.
            eb = b.edges[kb]
            dst = target((qa, eb.dst))
            edges.append(Edge(src, dst, EPSILON, eb.olabel, eb.log_weight))

    final_pair = (a.final, b.final)
    if final_pair not in state_id:
        return empty_wfst()
    return _connect(len(state_id), edges, 0, state_id[final_pair])


def _connect(num_states: int, edges: list[Edge], initial: int, final: int) -> Wfst:
    """Keep only states both reachable from initial and coreachable to final."""
    forward = _closure(num_states, edges, {initial}, reverse=False)
    backward = _closure(num_states, edges, {final}, reverse=True)
    alive = forward & backward
    if initial not in alive or final not in alive:
        return empty_wfst()
    renumber = {old: new for new, old in enumerate(sorted(alive))}
    kept = [
        Edge(renumber[e.src], renumber[e.dst], e.ilabel, e.olabel, e.log_weight)
        for e in edges
        if e.src in alive and e.dst in alive
    ]
    return Wfst(
        len(alive), kept, final=renumber[final], initial=renumber[initial]
    )


def _closure(
    num_states: int, edges: list[Edge], seeds: set[int], reverse: bool
) -> set[int]:
    adj: list[list[int]] = [[] for _ in range(num_states)]
    for e in edges:
        if reverse:
            adj[e.dst].append(e.src)
        else:
            adj[e.src].append(e.dst)
    seen = set(seeds)
    frontier = deque(seeds)
    while frontier:
        q = frontier.popleft()
        for j in adj[q]:
            if j not in seen:
                seen.add(j)
                frontier.append(j)
    return seen


def path_occupancy(
    fst: Wfst, path: Path, num_frames: int, num_symbols: int
) -> np.ndarray:
    """(T, Q) indicator matrix of which symbol the path used at each frame.

    Frame t's row is one-hot at the t-th non-epsilon input label.  For a
    lattice built from a (T, Q) score matrix this is the gradient of the
    path's log-weight with respect to the scores.
    """
    gamma = np.zeros((num_frames, num_symbols))
    t = 0
    for k in path.edges:
        label = fst.edges[k].ilabel
        if label == EPSILON:
            continue
        if t >= num_frames:
            raise DimensionMismatchError(
                f"path consumes more than {num_frames} frames"
            )
        if not 1 <= label <= num_symbols:
            raise DimensionMismatchError(
                f"input label {label} outside 1..{num_symbols}"
            )
        gamma[t, label - 1] = 1.0
        t += 1
    if t != num_frames:
        raise DimensionMismatchError(
            f"path consumes {t} frames, expected {num_frames}"
        )
    return gamma


def parse_logits_csv(text: str) -> np.ndarray:
    """Parse a (T, Q) score matrix from comma-separated rows of floats."""
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        fields = raw.split(",")
        row = []
        for field in fields:
            try:
                value = float(field)
            except ValueError:
                raise FstParseError(
                    f"malformed number {field.strip()!r}", lineno
                ) from None
            if math.isnan(value) or value == math.inf:
                raise FstParseError(f"invalid score {field.strip()!r}", lineno)
            row.append(value)
        if rows and len(row) != len(rows[0]):
            raise FstParseError(
                f"row has {len(row)} columns, expected {len(rows[0])}", lineno
            )
        rows.append(row)
    if not rows:
        raise FstParseError("empty score matrix")
    return np.array(rows)


def format_logits_csv(z: np.ndarray) -> str:
    return "".join(
        ",".join(repr(float(v)) for v in row) + "\n"
        for row in np.asarray(z, dtype=float)
    )
