"""Directed capacitated topologies, shortest-hop routing and the link-flow
routing matrix.

The routing matrix ``A`` has one row per link and one column per flow;
``A[e, s]`` is the fraction of flow ``s`` carried by link ``e`` (1 for the
single-path routing produced here, values in ``(0, 1)`` only when a matrix
is loaded directly from file).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Link",
    "Flow",
    "Topology",
    "RoutingMatrix",
    "load_topology",
    "load_flows",
    "load_routing_matrix",
    "scale_capacities",
    "shortest_path",
    "generate_flows",
    "build_routing_matrix",
    "synthesize_topology",
    "topology_to_text",
]


@dataclass(frozen=True)
class Link:
    id: int
    src: int
    dst: int
    capacity: float


@dataclass(frozen=True)
class Flow:
    id: int
    src: int
    dst: int


@dataclass(frozen=True)
class Topology:
    """Directed graph with per-link capacities.

    Node ids are dense integers ``0..n-1``; ``node_names`` keeps the labels
    used in the source file (identical to the ids for generated topologies).
    """

    nodes: tuple[int, ...]
    links: tuple[Link, ...]
    node_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.nodes)
        if tuple(self.nodes) != tuple(range(n)):
            raise ValueError("node ids must be dense integers 0..n-1")
        if self.node_names and len(self.node_names) != n:
            raise ValueError("node_names length must match nodes")
        for i, link in enumerate(self.links):
            if link.id != i:
                raise ValueError("link ids must be dense integers 0..m-1")
            if not (0 <= link.src < n and 0 <= link.dst < n):
                raise ValueError(f"link {i} references unknown node")
            if link.src == link.dst:
                raise ValueError(f"link {i} is a self-loop")
            if not np.isfinite(link.capacity) or link.capacity < 0:
                raise ValueError(f"link {i} has invalid capacity {link.capacity!r}")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_links(self) -> int:
        return len(self.links)

    def capacities(self) -> np.ndarray:
        return np.array([link.capacity for link in self.links], dtype=float)


def _out_edges(t: Topology) -> list[dict[int, int]]:
    """Per-node map of successor node -> link id (smallest id wins for
    parallel links, keeping path reconstruction deterministic)."""
    out: list[dict[int, int]] = [dict() for _ in range(t.num_nodes)]
    for link in t.links:
        out[link.src].setdefault(link.dst, link.id)
    return out


def _in_nodes(t: Topology) -> list[list[int]]:
    inn: list[set[int]] = [set() for _ in range(t.num_nodes)]
    for link in t.links:
        inn[link.dst].add(link.src)
    return [sorted(s) for s in inn]


def load_topology(text: str) -> Topology:
    """Parse an edge-list document into a Topology.

    One directed link per line: ``<src> <dst> <capacity>``, whitespace
    separated. Lines starting with ``#`` and blank lines are ignored. Node
    labels may be arbitrary tokens; they are densified to integer ids in
    first-appearance order.
    """
    ids: dict[str, int] = {}
    links: list[Link] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(
                f"line {lineno}: expected '<src> <dst> <capacity>', got {len(parts)} fields"
            )
        src_name, dst_name, cap_str = parts
        try:
            capacity = float(cap_str)
        except ValueError:
            raise ValueError(f"line {lineno}: capacity {cap_str!r} is not a number") from None
        if not np.isfinite(capacity):
            raise ValueError(f"line {lineno}: capacity must be finite")
        if capacity < 0:
            raise ValueError(f"line {lineno}: capacity must be nonnegative")
        if src_name == dst_name:
            raise ValueError(f"line {lineno}: self-loop link {src_name!r}")
        src = ids.setdefault(src_name, len(ids))
        dst = ids.setdefault(dst_name, len(ids))
        links.append(Link(id=len(links), src=src, dst=dst, capacity=capacity))
    return Topology(
        nodes=tuple(range(len(ids))),
        links=tuple(links),
        node_names=tuple(ids),
    )


def load_flows(text: str, t: Topology) -> list[Flow]:
    """Parse a flow file: one ``<src> <dst>`` pair per line, labels resolved
    through the topology's node names."""
    names = {name: i for i, name in enumerate(t.node_names)} if t.node_names else {}
    flows: list[Flow] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<src> <dst>'")
        endpoints = []
        for token in parts:
            if token in names:
                endpoints.append(names[token])
            elif token.isdigit() and int(token) < t.num_nodes:
                endpoints.append(int(token))
            else:
                raise ValueError(f"line {lineno}: unknown node {token!r}")
        src, dst = endpoints
        if src == dst:
            raise ValueError(f"line {lineno}: flow endpoints coincide")
        flows.append(Flow(id=len(flows), src=src, dst=dst))
    return flows


def scale_capacities(t: Topology, cap_max: float = 100.0) -> Topology:
    """Rescale capacities so the largest equals ``cap_max``, preserving
    relative ratios."""
    if t.num_links == 0:
        raise ValueError("cannot scale a topology with no links")
    if not (cap_max > 0):
        raise ValueError("cap_max must be positive")
    top = max(link.capacity for link in t.links)
    if top == 0:
        raise ValueError("all capacities are zero; scale undefined")
    links = tuple(
        Link(link.id, link.src, link.dst, (link.capacity / top) * cap_max)
        for link in t.links
    )
    return Topology(nodes=t.nodes, links=links, node_names=t.node_names)


def shortest_path(t: Topology, src: int, dst: int) -> list[int] | None:
    """Minimum-hop directed path from src to dst as a list of link ids.

    Ties are broken toward the lexicographically smallest node-id sequence,
    so the result is deterministic. Returns ``[]`` when ``src == dst`` and
    ``None`` when dst is unreachable.
    """
    n = t.num_nodes
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"invalid node id in ({src}, {dst})")
    if src == dst:
        return []

    # hop distance to dst via reverse BFS
    dist = np.full(n, -1, dtype=int)
    dist[dst] = 0
    preds = _in_nodes(t)
    queue = deque([dst])
    while queue:
        v = queue.popleft()
        for u in preds[v]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
    if dist[src] < 0:
        return None

    # walk greedily: smallest next node that still lies on a shortest path
    out = _out_edges(t)
    path: list[int] = []
    u = src
    while u != dst:
        v = min(w for w in out[u] if dist[w] == dist[u] - 1)
        path.append(out[u][v])
        u = v
    return path


def _connected_pairs(t: Topology) -> list[tuple[int, int]]:
    out = _out_edges(t)
    pairs: list[tuple[int, int]] = []
    for src in range(t.num_nodes):
        seen = {src}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in out[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        pairs.extend((src, dst) for dst in sorted(seen) if dst != src)
    return pairs


def generate_flows(
    t: Topology,
    mode: str = "all_pairs",
    count: int | None = None,
    seed: int = 0,
) -> list[Flow]:
    """Build the flow set.

    ``all_pairs`` yields one flow per connected ordered node pair, sorted by
    (src, dst). ``sampled`` draws ``count`` connected pairs uniformly with
    replacement from a generator seeded with ``seed``.
    """
    pairs = _connected_pairs(t)
    if not pairs:
        raise ValueError("topology has no connected ordered node pairs")
    if mode == "all_pairs":
        chosen = pairs
    elif mode == "sampled":
        if count is None or count < 1:
            raise ValueError("sampled mode needs count >= 1")
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(pairs), size=count)
        chosen = [pairs[i] for i in idx]
    else:
        raise ValueError(f"unknown flow mode {mode!r}")
    return [Flow(id=i, src=s, dst=d) for i, (s, d) in enumerate(chosen)]


class RoutingMatrix:
    """Sparse link-by-flow incidence matrix with cached row squared norms.

    Stored entries must lie in ``(0, 1]``; absent entries are zero.
    """

    def __init__(self, matrix: sp.spmatrix):
        m = sp.csr_matrix(matrix, dtype=float)
        m.eliminate_zeros()
        if m.nnz and (m.data.min() <= 0 or m.data.max() > 1):
            raise ValueError("routing matrix entries must lie in (0, 1]")
        self._m = m
        self._mt = sp.csr_matrix(m.T)
        self.row_sqnorms = np.asarray(m.multiply(m).sum(axis=1)).ravel()
        self.col_sums = np.asarray(m.sum(axis=0)).ravel()

    @classmethod
    def from_entries(cls, num_links: int, num_flows: int, entries) -> "RoutingMatrix":
        """Build from an iterable of ``(link, flow, value)`` triples."""
        rows, cols, vals = [], [], []
        seen = set()
        for e, s, v in entries:
            if not (0 <= e < num_links and 0 <= s < num_flows):
                raise ValueError(f"entry ({e}, {s}) out of range")
            if (e, s) in seen:
                raise ValueError(f"duplicate entry ({e}, {s})")
            seen.add((e, s))
            rows.append(e)
            cols.append(s)
            vals.append(float(v))
        m = sp.csr_matrix((vals, (rows, cols)), shape=(num_links, num_flows))
        return cls(m)

    @classmethod
    def from_dense(cls, array) -> "RoutingMatrix":
        return cls(sp.csr_matrix(np.asarray(array, dtype=float)))

    @property
    def shape(self) -> tuple[int, int]:
        return self._m.shape

    @property
    def num_links(self) -> int:
        return self._m.shape[0]

    @property
    def num_flows(self) -> int:
        return self._m.shape[1]

    def dot(self, x: np.ndarray) -> np.ndarray:
        """Per-link load ``A @ x``."""
        return self._m @ x

    def tdot(self, v: np.ndarray) -> np.ndarray:
        """Adjoint product ``A.T @ v``."""
        return self._mt @ v

    def column_links(self, s: int) -> list[int]:
        """Link ids with a nonzero entry for flow ``s``."""
        return sorted(self._mt.indices[self._mt.indptr[s]:self._mt.indptr[s + 1]].tolist())

    def column_entries(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero (link ids, values) of flow ``s``'s column."""
        lo, hi = self._mt.indptr[s], self._mt.indptr[s + 1]
        return self._mt.indices[lo:hi], self._mt.data[lo:hi]

    def toarray(self) -> np.ndarray:
        return self._m.toarray()


def build_routing_matrix(t: Topology, flows: list[Flow]) -> RoutingMatrix:
    """Single-path 0/1 routing matrix: entry ``(e, s)`` is 1 exactly when
    link ``e`` lies on the shortest path of flow ``s``."""
    entries = []
    for flow in flows:
        path = shortest_path(t, flow.src, flow.dst)
        if path is None:
            raise ValueError(f"flow {flow.id}: no path {flow.src} -> {flow.dst}")
        entries.extend((e, flow.id, 1.0) for e in path)
    return RoutingMatrix.from_entries(t.num_links, len(flows), entries)


def load_routing_matrix(text: str) -> RoutingMatrix:
    """Parse a routing-matrix document: header line ``E d`` followed by
    ``<link> <flow> <value>`` triples. Values may be fractional in (0, 1]."""
    header: tuple[int, int] | None = None
    entries: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected header '<E> <d>'")
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise ValueError(f"line {lineno}: header fields must be integers") from None
            if header[0] < 0 or header[1] < 0:
                raise ValueError(f"line {lineno}: header dims must be nonnegative")
            continue
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected '<link> <flow> <value>'")
        try:
            e, s, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed triple") from None
        entries.append((e, s, v))
    if header is None:
        raise ValueError("missing header line '<E> <d>'")
    return RoutingMatrix.from_entries(header[0], header[1], entries)


def synthesize_topology(
    num_nodes: int,
    num_links: int,
    seed: int,
    cap_range: tuple[float, float] = (10.0, 100.0),
) -> Topology:
    """Random strongly connected topology with the requested directed link
    count (must be even: every undirected edge is emitted in both directions)
    and capacities drawn uniformly from ``cap_range``.
    """
    if num_links % 2:
        raise ValueError("num_links must be even (edges are emitted both ways)")
    num_edges = num_links // 2
    if num_edges < num_nodes - 1:
        raise ValueError("too few links for a connected topology")
    max_edges = num_nodes * (num_nodes - 1) // 2
    if num_edges > max_edges:
        raise ValueError("too many links for a simple topology")
    rng = np.random.default_rng(seed)
    edges: set[tuple[int, int]] = set()
    for i in range(1, num_nodes):  # random spanning tree keeps it connected
        j = int(rng.integers(0, i))
        edges.add((j, i))
    while len(edges) < num_edges:
        u, v = (int(k) for k in rng.integers(0, num_nodes, size=2))
        if u != v:
            edges.add((min(u, v), max(u, v)))
    links: list[Link] = []
    lo, hi = cap_range
    for u, v in sorted(edges):
        for s, d in ((u, v), (v, u)):
            cap = float(rng.uniform(lo, hi))
            links.append(Link(id=len(links), src=s, dst=d, capacity=cap))
    return Topology(
        nodes=tuple(range(num_nodes)),
        links=tuple(links),
        node_names=tuple(str(i) for i in range(num_nodes)),
    )


def topology_to_text(t: Topology, comment: str = "") -> str:
    """Serialize a topology in the edge-list file format."""
    lines = [f"# {line}" for line in comment.splitlines() if line]
    names = t.node_names or tuple(str(i) for i in t.nodes)
    for link in t.links:
        lines.append(f"{names[link.src]} {names[link.dst]} {link.capacity!r}")
    return "\n".join(lines) + "\n"
