"""Graphs, constraint graphs, coloring oracles, expanders and edge colorings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_ENUMERATION = 10**7
EXPANDER_LAMBDA2 = 2.9
EXPANDER_RETRIES = 100

Edge = tuple[int, int]


def norm_edge(u: int, v: int) -> Edge:
    u, v = int(u), int(v)
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..n-1``."""

    n: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        edges = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            edges.add(norm_edge(u, v))
        object.__setattr__(self, "edges", frozenset(edges))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        return cls(n, frozenset(norm_edge(u, v) for u, v in edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_list(self) -> list[Edge]:
        return sorted(self.edges)

    @cached_property
    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edge_list:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return norm_edge(u, v) in self.edges

    def components(self) -> list[list[int]]:
        seen = [False] * self.n
        out = []
        for s in range(self.n):
            if seen[s]:
                continue
            comp = [s]
            seen[s] = True
            stack = [s]
            while stack:
                x = stack.pop()
                for y in self.adjacency[x]:
                    if not seen[y]:
                        seen[y] = True
                        comp.append(y)
                        stack.append(y)
            out.append(sorted(comp))
        return out

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1

    def induced(self, vertices: Sequence[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph relabelled to ``0..len-1`` in the given order."""
        index = {v: i for i, v in enumerate(vertices)}
        edges = [(index[u], index[v]) for u, v in self.edges if u in index and v in index]
        return Graph.from_edges(len(vertices), edges), list(vertices)

    def union(self, other_edges: Iterable[Edge], n: int | None = None) -> "Graph":
        return Graph.from_edges(self.n if n is None else n, list(self.edges) + list(other_edges))


@dataclass(frozen=True)
class ConstraintGraph:
    """A graph whose edges are inequality constraints unless tagged as equalities."""

    graph: Graph
    equality: frozenset[Edge] = field(default_factory=frozenset)
    classes: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        eq = frozenset(norm_edge(u, v) for u, v in self.equality)
        if not eq <= self.graph.edges:
            raise ValueError("equality tags must refer to graph edges")
        object.__setattr__(self, "equality", eq)
        if self.classes is not None and len(self.classes) != self.graph.n:
            raise ValueError("one class label per vertex is required")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def edges(self) -> frozenset[Edge]:
        return self.graph.edges

    @property
    def inequality(self) -> frozenset[Edge]:
        return self.graph.edges - self.equality

    @property
    def max_degree(self) -> int:
        return self.graph.max_degree


def as_constraint_graph(G: Graph | ConstraintGraph) -> ConstraintGraph:
    return G if isinstance(G, ConstraintGraph) else ConstraintGraph(G)


# ---------------------------------------------------------------- coloring oracles


def violations(G: Graph | ConstraintGraph, coloring: Sequence[int], colors: int = 4) -> int:
    """Violated constraints: monochromatic inequality edges plus split equality edges."""
    cg = as_constraint_graph(G)
    coloring = [int(c) for c in coloring]
    if len(coloring) != cg.n:
        raise ValueError(f"coloring has length {len(coloring)}, graph has {cg.n} vertices")
    if any(c < 0 or c >= colors for c in coloring):
        raise ValueError(f"colors must lie in 0..{colors - 1}")
    bad = sum(coloring[u] == coloring[v] for u, v in cg.inequality)
    bad += sum(coloring[u] != coloring[v] for u, v in cg.equality)
    return int(bad)


def _edge_arrays(edges: Iterable[Edge]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def best_coloring(
    G: Graph | ConstraintGraph, colors: int, chunk: int = 1 << 18
) -> tuple[tuple[int, ...], int]:
    """Exact minimum number of violated constraints by exhaustive enumeration.

    Vertex 0 is pinned to color 0, which loses nothing since relabelling colors
    preserves the violation count.
    """
    cg = as_constraint_graph(G)
    n = cg.n
    if n == 0:
        return (), 0
    if colors**n > MAX_ENUMERATION:
        raise ValueError(f"{colors}^{n} colorings exceed the enumeration guard")
    iu, iv = _edge_arrays(cg.inequality)
    eu, ev = _edge_arrays(cg.equality)
    free = n - 1
    total = colors**free
    best = None
    best_count = cg.graph.m + 1
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        rows = np.zeros((idx.size, n), dtype=np.int8)
        rest = idx
        for i in range(n - 1, 0, -1):
            rows[:, i] = rest % colors
            rest = rest // colors
        bad = np.zeros(idx.size, dtype=np.int64)
        if iu.size:
            bad += np.sum(rows[:, iu] == rows[:, iv], axis=1)
        if eu.size:
            bad += np.sum(rows[:, eu] != rows[:, ev], axis=1)
        j = int(np.argmin(bad))
        if bad[j] < best_count:
            best_count = int(bad[j])
            best = tuple(int(x) for x in rows[j])
            if best_count == 0:
                break
    return best, best_count


def find_legal_coloring(
    G: Graph,
    colors: int,
    fixed: dict[int, int] | None = None,
    node_limit: int = 2_000_000,
) -> tuple[int, ...] | None:
    """Backtracking search (DSatur order) for a proper coloring; ``None`` if none exists.

    ``fixed`` pins some vertices to given colors. Raises ``RuntimeError`` when the
    node budget runs out before a decision.
    """
    n = G.n
    adj = G.adjacency
    col = [-1] * n
    for v, c in (fixed or {}).items():
        col[v] = int(c)
    for v, c in (fixed or {}).items():
        if any(col[w] == c for w in adj[v]):
            return None
    # with pinned vertices the colors are no longer interchangeable
    symmetric = not fixed
    nodes = 0

    def pick() -> int:
        best, key = -1, (-1, -1)
        for v in range(n):
            if col[v] < 0:
                sat = len({col[w] for w in adj[v] if col[w] >= 0})
                k = (sat, len(adj[v]))
                if k > key:
                    best, key = v, k
        return best

    def solve(used: int) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > node_limit:
            raise RuntimeError("coloring search exceeded its node budget")
        v = pick()
        if v < 0:
            return True
        banned = {col[w] for w in adj[v]}
        limit = min(colors, used + 1) if symmetric else colors
        for c in range(limit):
            if c in banned:
                continue
            col[v] = c
            if solve(max(used, c + 1)):
                return True
            col[v] = -1
        return False

    return tuple(col) if solve(0) else None


# ---------------------------------------------------------------- expanders


def second_eigenvalue(G: Graph) -> float:
    A = np.zeros((G.n, G.n))
    for u, v in G.edges:
        A[u, v] = A[v, u] = 1.0
    ev = np.linalg.eigvalsh(A)
    return float(ev[-2]) if G.n > 1 else 0.0


def _pairing_attempt(m: int, degree: int, rng: np.random.Generator) -> Graph | None:
    stubs = np.repeat(np.arange(m), degree)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    edges = set()
    for u, v in pairs:
        if u == v:
            return None
        e = norm_edge(u, v)
        if e in edges:
            return None
        edges.add(e)
    return Graph(m, frozenset(edges))


def random_regular_expander(m: int, degree: int = 3, seed: int = 0) -> Graph:
    """Connected simple ``degree``-regular graph from the configuration model.

    Candidates are screened for connectivity and for second adjacency eigenvalue
    at most 2.9; up to 100 derived seeds are tried.
    """
    if m < 4:
        raise ValueError("an expander needs at least 4 vertices")
    if (m * degree) % 2:
        raise ValueError(f"m*degree = {m * degree} is odd")
    for attempt in range(EXPANDER_RETRIES):
        rng = np.random.default_rng([seed, attempt])
        for _ in range(200):
            G = _pairing_attempt(m, degree, rng)
            if G is not None:
                break
        else:
            continue
        if G.is_connected() and second_eigenvalue(G) <= EXPANDER_LAMBDA2:
            return G
    raise RuntimeError(f"no expander on {m} vertices after {EXPANDER_RETRIES} seeds")


def cloud_graph(m: int, seed: int = 0) -> Graph:
    """Connected graph of maximum degree 3 on ``m`` vertices for equality clouds.

    Complete graphs for ``m <= 4``, a 3-regular expander for even ``m``, and for
    odd ``m`` an expander on ``m + 1`` vertices with one vertex removed and two of
    its former neighbours joined.
    """
    if m <= 4:
        return Graph.from_edges(m, itertools.combinations(range(m), 2))
    if m % 2 == 0:
        return random_regular_expander(m, 3, seed)
    for attempt in range(EXPANDER_RETRIES):
        big = random_regular_expander(m + 1, 3, seed + attempt)
        for x in range(m, -1, -1):
            nbrs = big.adjacency[x]
            for a, b in itertools.combinations(nbrs, 2):
                if big.has_edge(a, b):
                    continue
                keep = [v for v in range(m + 1) if v != x]
                index = {v: i for i, v in enumerate(keep)}
                edges = [(index[u], index[v]) for u, v in big.edges if x not in (u, v)]
                edges.append((index[a], index[b]))
                G = Graph.from_edges(m, edges)
                if G.is_connected() and G.max_degree <= 3:
                    return G
    raise RuntimeError(f"no cloud graph on {m} vertices")


# ---------------------------------------------------------------- edge coloring


def misra_gries_edge_coloring(G: Graph) -> dict[Edge, int]:
    """Proper edge coloring with at most ``max_degree + 1`` colors (fan rotation)."""
    palette = G.max_degree + 1
    col: list[dict[int, int]] = [dict() for _ in range(G.n)]

    def free_colors(x: int) -> set[int]:
        return set(range(palette)) - set(col[x].values())

    def set_color(a: int, b: int, c: int | None) -> None:
        if c is None:
            col[a].pop(b, None)
            col[b].pop(a, None)
        else:
            col[a][b] = c
            col[b][a] = c

    for u, v in G.edge_list:
        # maximal fan at u starting with v
        fan = [v]
        in_fan = {v}
        grown = True
        while grown:
            grown = False
            last_free = free_colors(fan[-1])
            for f in G.adjacency[u]:
                if f not in in_fan and f in col[u] and col[u][f] in last_free:
                    fan.append(f)
                    in_fan.add(f)
                    grown = True
                    break
        c = min(free_colors(u))
        d = min(free_colors(fan[-1]))
        # invert the cd-path starting at u
        if c != d:
            path = []
            x, want = u, d
            prev = None
            while True:
                nxt = next((y for y, cc in col[x].items() if cc == want and y != prev), None)
                if nxt is None:
                    break
                path.append((x, nxt, want))
                prev, x = x, nxt
                want = c if want == d else d
            for a, b, cc in path:
                set_color(a, b, None)
            for a, b, cc in path:
                set_color(a, b, c if cc == d else d)
        # shortest fan prefix ending at a vertex where d is free
        w_index = None
        for i, f in enumerate(fan):
            if i > 0 and (f not in col[u] or col[u][f] not in free_colors(fan[i - 1])):
                break
            if d in free_colors(f):
                w_index = i
                break
        if w_index is None:
            raise RuntimeError("fan rotation failed")
        for j in range(w_index):
            nxt_c = col[u][fan[j + 1]]
            set_color(u, fan[j + 1], None)
            set_color(u, fan[j], nxt_c)
        set_color(u, fan[w_index], d)

    coloring = {e: col[e[0]][e[1]] for e in G.edge_list}
    for x in range(G.n):
        vals = list(col[x].values())
        if len(vals) != len(set(vals)):
            raise RuntimeError("edge coloring is not proper")
    return coloring


# ---------------------------------------------------------------- text format


def graph_to_text(G: Graph) -> str:
    lines = [f"p {G.n} {G.m}"] + [f"{u} {v}" for u, v in G.edge_list]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Graph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty graph file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "p":
        raise ValueError(f"bad header {lines[0]!r}")
    n, m = int(head[1]), int(head[2])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if len(edges) != m:
        raise ValueError(f"header promises {m} edges, found {len(edges)}")
    G = Graph.from_edges(n, edges)
    if G.m != m:
        raise ValueError("duplicate edges in graph file")
    return G


# ---------------------------------------------------------------- small families


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)
