"""Grid-to-LaTeX decoding through an expression graph.

Decoding runs in five steps, each exposed on its own so partial pipelines
can be inspected:

1. :func:`vat_extract` collects every non-blank cell of a classification
   grid as a node, in raster order.
2. :func:`expand_imaginary` appends the invisible group-end nodes that
   structural symbols imply; a grid can never predict them directly.
3. :func:`apply_corrections` re-labels every node from a per-node
   correction row and drops nodes whose row votes for deletion.
4. :func:`build_graph` scores directed edges between surviving nodes from
   the two neighbor heads, then :func:`prune_and_acyclify` removes weak
   edges and breaks cycles, never disconnecting start from end.
5. :func:`longest_path` picks the maximum-weight start-to-end path and
   renders it back to LaTeX.

Node indices are stable throughout: after expansion, node i sits at graph
position i+1, the virtual start at 0, the virtual end at N+1.  Score
matrices are indexed the same way, so deleting a node never reindexes the
others.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CycleDetected,
    NodeCountMismatch,
    NonStochasticRow,
    NoPath,
    ShapeMismatch,
)
from .tokens import ROLE_END, TokenVocab, emit_latex

ROW_SUM_TOL = 1e-4


@dataclass(frozen=True)
class Node:
    """One candidate symbol: class, cell, detection score, graph position.

    `index` is 0 until :func:`expand_imaginary` assigns positions.  END
    nodes remember the position of the structural node that implied them.
    """

    class_id: int
    row: int
    col: int
    score: float
    index: int = 0
    parent: int | None = None


@dataclass
class ExprGraph:
    """Weighted digraph over surviving nodes plus virtual start/end.

    nodes: graph position -> Node (real nodes only).
    edges: (src, dst) -> weight.
    n_slots: node count before corrections; the virtual end sits at
        n_slots + 1 regardless of how many nodes were deleted.
    """

    nodes: dict[int, Node]
    edges: dict[tuple[int, int], float]
    n_slots: int
    sos: int = 0
    _adj: dict[int, list[int]] | None = field(default=None, repr=False)

    @property
    def eos(self) -> int:
        return self.n_slots + 1

    def successors(self) -> dict[int, list[int]]:
        if self._adj is None:
            adj: dict[int, list[int]] = {}
            for s, d in self.edges:
                adj.setdefault(s, []).append(d)
            for lst in adj.values():
                lst.sort()
            self._adj = adj
        return self._adj

    def reaches_end(self) -> bool:
        """Whether the virtual end is reachable from the virtual start."""
        adj = self.successors()
        seen = {self.sos}
        queue = deque([self.sos])
        while queue:
            u = queue.popleft()
            if u == self.eos:
                return True
            for v in adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return False


@dataclass
class PathResult:
    """Winning decode: graph positions, accumulated weight, rendered LaTeX."""

    path: list[int]
    weight: float
    latex: str


def vat_extract(P: np.ndarray, vocab: TokenVocab, logits: bool = False) -> list[Node]:
    """Collect non-blank argmax cells of a classification grid as nodes.

    Cells scan in raster order (row-major); an argmax tie within a cell
    resolves to the lowest class id.  With ``logits=True`` the grid is
    softmax-normalized over channels first.

    Raises:
        ShapeMismatch: P is not (channels, H, W) with the vocabulary's
            channel count.
    """
    if P.ndim != 3 or P.shape[0] != vocab.grid_classes:
        raise ShapeMismatch(
            f"grid shape {P.shape} does not match {vocab.grid_classes} classes"
        )
    probs = P.astype(np.float64)
    if logits:
        probs = probs - probs.max(axis=0, keepdims=True)
        np.exp(probs, out=probs)
        probs /= probs.sum(axis=0, keepdims=True)
    classes = np.argmax(probs, axis=0)
    nodes = []
    for r, c in np.ndindex(classes.shape):
        cid = int(classes[r, c])
        if cid == vocab.none_id:
            continue
        nodes.append(Node(cid, int(r), int(c), float(probs[cid, r, c])))
    return nodes


def expand_imaginary(nodes: list[Node], vocab: TokenVocab) -> list[Node]:
    """Insert implied group-end nodes and assign graph positions.

    Each structural node gains its group count of END nodes immediately
    after it, at the same cell, carrying the structural node's position as
    parent.  Positions are 1-based; 0 and N+1 stay virtual.
    """
    out: list[Node] = []
    for node in nodes:
        idx = len(out) + 1
        out.append(replace(node, index=idx))
        if vocab.is_structural(node.class_id):
            for _ in range(vocab.group_count(node.class_id)):
                out.append(
                    Node(vocab.end_id, node.row, node.col, node.score,
                         index=len(out) + 1, parent=idx)
                )
    return out


def apply_corrections(
    nodes: list[Node], self_probs: np.ndarray, vocab: TokenVocab
) -> list[Node]:
    """Re-label nodes from their correction rows; drop deletion votes.

    Row i belongs to the node at graph position i+1.  A row whose argmax is
    the none class deletes the node; deleting a structural node also deletes
    the END nodes it implied.  Surviving nodes keep their positions.

    Raises:
        NodeCountMismatch: row count differs from the node count.
        ShapeMismatch: rows narrower than the correction classes.
    """
    if self_probs.ndim != 2 or self_probs.shape[0] != len(nodes):
        raise NodeCountMismatch(
            f"{self_probs.shape[0] if self_probs.ndim == 2 else '?'} correction "
            f"rows for {len(nodes)} nodes"
        )
    if self_probs.shape[1] < vocab.correction_classes:
        raise ShapeMismatch(
            f"correction rows have {self_probs.shape[1]} classes, "
            f"need {vocab.correction_classes}"
        )
    votes = np.argmax(self_probs, axis=1)
    deleted: set[int] = set()
    out: list[Node] = []
    for node, vote in zip(nodes, votes.tolist()):
        if vote == vocab.none_id:
            deleted.add(node.index)
            continue
        if node.parent is not None and node.parent in deleted:
            continue
        out.append(node if vote == node.class_id else replace(node, class_id=vote))
    return out


def build_graph(
    nodes: list[Node],
    left: np.ndarray,
    right: np.ndarray,
    alpha_l2r: float = 1.0,
    alpha_r2l: float = 1.0,
) -> ExprGraph:
    """Score every admissible directed edge between nodes.

    The weight of i -> j combines both neighbor heads:
    ``alpha_l2r * right[i, j] + alpha_r2l * left[j, i]`` (j is i's right
    neighbor exactly when i is j's left neighbor).  Self-edges, edges into
    the virtual start, edges out of the virtual end, and the bare
    start -> end edge are never created.

    Raises:
        NodeCountMismatch: matrices not square (N+2) or node positions out
            of range.
        NonStochasticRow: a score row is not a probability distribution.
    """
    if left.ndim != 2 or left.shape[0] != left.shape[1] or left.shape != right.shape:
        raise NodeCountMismatch(
            f"neighbor matrices {left.shape} / {right.shape} must be equal and square"
        )
    n = left.shape[0] - 2
    if n < 0:
        raise NodeCountMismatch("neighbor matrices must cover the two virtual nodes")
    for name, m in (("left", left), ("right", right)):
        if np.any(m < -ROW_SUM_TOL):
            bad = int(np.argwhere(m < -ROW_SUM_TOL)[0][0])
            raise NonStochasticRow(bad, float(m[bad].sum()))
        sums = m.sum(axis=1)
        off = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(off):
            bad = int(np.flatnonzero(off)[0])
            raise NonStochasticRow(bad, float(sums[bad]))
    index_map: dict[int, Node] = {}
    for node in nodes:
        if not 1 <= node.index <= n:
            raise NodeCountMismatch(
                f"node position {node.index} outside 1..{n}"
            )
        index_map[node.index] = node
    sos, eos = 0, n + 1
    sources = [sos] + sorted(index_map)
    targets = sorted(index_map) + [eos]
    edges: dict[tuple[int, int], float] = {}
    for i in sources:
        for j in targets:
            if i == j or (i == sos and j == eos):
                continue
            w = alpha_l2r * float(right[i, j]) + alpha_r2l * float(left[j, i])
            edges[(i, j)] = w
    return ExprGraph(index_map, edges, n_slots=n)


def prune_and_acyclify(graph: ExprGraph, epsilon: float = 0.5) -> ExprGraph:
    """Remove weak edges, then break cycles, preserving start-to-end.

    Edges below `epsilon` are removed in ascending weight order; a removal
    that would disconnect the virtual end is skipped.  While a directed
    cycle remains, the lightest cycle edge whose removal keeps the end
    reachable is dropped.

    Raises:
        NoPath: the end was unreachable before pruning started.
        CycleDetected: a cycle that cannot be broken (defensive; a
            reachable end always leaves one breakable edge per cycle).
    """
    g = ExprGraph(dict(graph.nodes), dict(graph.edges), graph.n_slots)
    if not g.reaches_end():
        raise NoPath("virtual end unreachable before pruning")

    weak = sorted(
        ((w, s, d) for (s, d), w in g.edges.items() if w < epsilon),
        key=lambda t: (t[0], t[1], t[2]),
    )
    # Fast path: dropping every weak edge at once is equivalent to the
    # guarded sequential order whenever the result stays connected, because
    # every intermediate graph is a supergraph of the final one.
    trial = ExprGraph(g.nodes, {k: v for k, v in g.edges.items() if v >= epsilon},
                      g.n_slots)
    if trial.reaches_end():
        g = ExprGraph(g.nodes, dict(trial.edges), g.n_slots)
    else:
        for w, s, d in weak:
            del g.edges[(s, d)]
            g._adj = None
            if not g.reaches_end():
                g.edges[(s, d)] = w
                g._adj = None

    while True:
        cycle = _find_cycle(g)
        if cycle is None:
            break
        candidates = sorted(
            ((g.edges[e], e) for e in cycle), key=lambda t: (t[0], t[1])
        )
        for w, e in candidates:
            del g.edges[e]
            g._adj = None
            if g.reaches_end():
                break
            g.edges[e] = w
            g._adj = None
        else:
            raise CycleDetected(f"cycle through {sorted({s for s, _ in cycle})} is unbreakable")
    return g


def _find_cycle(graph: ExprGraph) -> list[tuple[int, int]] | None:
    """First directed cycle found by DFS over sorted adjacency, as edges.

    Iterative so deep graphs cannot exhaust the interpreter stack.
    """
    adj = graph.successors()
    color: dict[int, int] = {}
    for start in sorted({s for s, _ in graph.edges} | {d for _, d in graph.edges}):
        if color.get(start, 0):
            continue
        color[start] = 1
        stack = [(start, iter(adj.get(start, ())))]
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if color.get(v, 0) == 1:
                    on_stack = [frame[0] for frame in stack]
                    cycle = [(u, v)]
                    tail = on_stack[on_stack.index(v):]
                    cycle.extend(zip(tail, tail[1:]))
                    return cycle
                if color.get(v, 0) == 0:
                    color[v] = 1
                    stack.append((v, iter(adj.get(v, ()))))
                    advanced = True
                    break
            if not advanced:
                color[u] = 2
                stack.pop()
    return None


def longest_path(graph: ExprGraph, vocab: TokenVocab) -> PathResult:
    """Maximum-weight start-to-end path by DP over a topological order.

    Runs in O(V + E).  When two predecessors give a node the same distance,
    the smaller graph position wins, making the result deterministic.  The
    winning node sequence renders to LaTeX; a path whose group structure is
    ill-nested is repaired by dropping unopened ENDs and closing groups
    left open at the end.

    Raises:
        CycleDetected: the graph is not acyclic.
        NoPath: no start-to-end path exists.
    """
    adj = graph.successors()
    verts = {graph.sos, graph.eos} | set(graph.nodes)
    indeg = {v: 0 for v in verts}
    for _, d in graph.edges:
        indeg[d] += 1
    queue = deque(v for v in sorted(verts) if indeg[v] == 0)
    order = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for v in adj.get(u, ()):
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if len(order) != len(verts):
        raise CycleDetected("expression graph still holds a cycle")

    dist = {v: float("-inf") for v in verts}
    pred: dict[int, int | None] = {v: None for v in verts}
    dist[graph.sos] = 0.0
    for u in order:
        if dist[u] == float("-inf"):
            continue
        for v in adj.get(u, ()):
            cand = dist[u] + graph.edges[(u, v)]
            if cand > dist[v] or (cand == dist[v] and (pred[v] is None or u < pred[v])):
                dist[v] = cand
                pred[v] = u
    if dist[graph.eos] == float("-inf"):
        raise NoPath("no start-to-end path after pruning")

    path = [graph.eos]
    while path[-1] != graph.sos:
        path.append(pred[path[-1]])
    path.reverse()
    seq = [graph.nodes[i].class_id for i in path[1:-1]]
    latex = emit_latex(_repair(seq, vocab), vocab)
    return PathResult(path, dist[graph.eos], latex)


def _repair(seq: list[int], vocab: TokenVocab) -> list[int]:
    """Make a class sequence well-nested with minimal edits.

    ENDs that no reading can match to an open group are dropped; groups
    still open at the end are closed by appended ENDs.  Counting treats a
    \\sqrt as opening one or two groups, tracked as an interval.
    """
    lo = hi = 0
    out: list[int] = []
    for cid in seq:
        role = vocab.role_of(cid)
        if role == ROLE_END:
            if hi == 0:
                continue
            lo = max(lo, 1) - 1
            hi -= 1
        elif vocab.is_structural(cid):
            if vocab.symbol_of(cid) == "\\sqrt":
                lo += 1
                hi += 2
            else:
                g = vocab.group_count(cid)
                lo += g
                hi += g
        out.append(cid)
    out.extend([vocab.end_id] * lo)
    return out


def decode_with_graph(
    P: np.ndarray,
    self_probs: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    vocab: TokenVocab,
    epsilon: float = 0.5,
    alpha_l2r: float = 1.0,
    alpha_r2l: float = 1.0,
    logits: bool = False,
) -> tuple[PathResult, ExprGraph]:
    """Full grid-to-LaTeX decode, also returning the pruned graph.

    Raises:
        NodeCountMismatch: score matrices disagree with the node count the
            grid implies (correction rows N, neighbor matrices N+2).
        NoPath: nothing decodable, including an all-blank grid.
    """
    nodes = expand_imaginary(vat_extract(P, vocab, logits=logits), vocab)
    if self_probs.ndim != 2 or self_probs.shape[0] != len(nodes):
        raise NodeCountMismatch(
            f"correction rows {self_probs.shape} for {len(nodes)} expanded nodes"
        )
    if left.shape != (len(nodes) + 2, len(nodes) + 2) or right.shape != left.shape:
        raise NodeCountMismatch(
            f"neighbor matrices {left.shape} / {right.shape} for "
            f"{len(nodes)} expanded nodes"
        )
    kept = apply_corrections(nodes, self_probs, vocab)
    graph = build_graph(kept, left, right, alpha_l2r=alpha_l2r, alpha_r2l=alpha_r2l)
    pruned = prune_and_acyclify(graph, epsilon=epsilon)
    return longest_path(pruned, vocab), pruned


def decode_pipeline(
    P: np.ndarray,
    self_probs: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    vocab: TokenVocab,
    epsilon: float = 0.5,
    alpha_l2r: float = 1.0,
    alpha_r2l: float = 1.0,
    logits: bool = False,
) -> PathResult:
    """As `decode_with_graph`, keeping only the path result."""
    result, _ = decode_with_graph(
        P,
        self_probs,
        left,
        right,
        vocab,
        epsilon=epsilon,
        alpha_l2r=alpha_l2r,
        alpha_r2l=alpha_r2l,
        logits=logits,
    )
    return result
