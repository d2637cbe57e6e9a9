"""Gap-preserving reduction from 3-coloring to scapegoat Hamiltonians.

Stages, each a pure graph transformation:

1. degree reduction for 3-coloring: vertices of degree above 7 become equality
   clouds on expanders, equality edges become 3-coloring diamonds, and vertices
   of degree 5..7 are split by chains of "book" gadgets;
2. an apex joined to every vertex (3-colorable becomes 4-colorable);
3. the apex is replaced by an equality cloud ``W`` on an expander, one cross
   edge per cloud vertex;
4. every equality edge of the cloud becomes the 9-edge 4-coloring gadget with
   three new vertices ``T``;
5. the edges are split into three parts whose components are isolated
   vertices, cycles or subdivided graphs with pendants, each carrying a
   lambda-solution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .graphs import (
    MAX_ENUMERATION,
    ConstraintGraph,
    Edge,
    Graph,
    as_constraint_graph,
    best_coloring,
    cloud_graph,
    find_legal_coloring,
    norm_edge,
    violations,
)
from .hamiltonians import LocalHamiltonian, build_xlow, scapegoat_hamiltonian, soundness_thresholds
from .lambda_solutions import (
    LambdaSolution,
    cycle_solution,
    pair_spectrum,
    product_solution,
    third_kind_distribution,
    third_kind_layout,
)
from .qq_state import MixtureDistribution, RestrictedDistribution, UniformDistribution

DEFAULT_EPS = 1.0 / 40.0


class DecompositionError(RuntimeError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


# ---------------------------------------------------------------- degree reduction


def _cloud_stage(G: Graph | ConstraintGraph, threshold: int, seed: int) -> tuple[ConstraintGraph, list[int]]:
    """Replace every vertex of degree above ``threshold`` by an equality cloud."""
    cg = as_constraint_graph(G)
    g = cg.graph
    origin = list(range(g.n))
    nxt = g.n
    endpoint: dict[tuple[int, Edge], int] = {}
    equality = set(cg.equality)
    new_edges: list[Edge] = []
    for v in range(g.n):
        nbrs = sorted(g.adjacency[v])
        D = len(nbrs)
        if D <= threshold:
            continue
        cloud = [v] + list(range(nxt, nxt + D - 1))
        nxt += D - 1
        origin += [v] * (D - 1)
        for c, u in zip(cloud, nbrs):
            endpoint[(v, norm_edge(u, v))] = c
        for a, b in cloud_graph(D, seed + v).edges:
            e = norm_edge(cloud[a], cloud[b])
            new_edges.append(e)
            equality.add(e)
    moved_eq = set()
    for u, v in g.edges:
        e = (u, v)
        a = endpoint.get((u, e), u)
        b = endpoint.get((v, e), v)
        new_edges.append(norm_edge(a, b))
        if e in cg.equality:
            moved_eq.add(norm_edge(a, b))
    equality = (equality - set(cg.equality)) | moved_eq
    graph = Graph.from_edges(nxt, new_edges)
    return ConstraintGraph(graph, frozenset(equality)), origin


def _book_stage(G: Graph | ConstraintGraph, threshold: int = 4) -> tuple[ConstraintGraph, list[int]]:
    """Split vertices of degree above ``threshold`` with chains of book gadgets.

    A book gadget joins two adjacent internal vertices to each of three
    terminals, so a proper 3-coloring gives all terminals the same color.
    Chained gadgets share one terminal; ``g`` gadgets leave ``2g + 4`` free slots.
    """
    cg = as_constraint_graph(G)
    if cg.equality:
        raise ValueError("book gadgets expect a graph without equality tags")
    g = cg.graph
    origin = list(range(g.n))
    nxt = g.n
    endpoint: dict[tuple[int, Edge], int] = {}
    new_edges: list[Edge] = []
    for v in range(g.n):
        nbrs = sorted(g.adjacency[v])
        D = len(nbrs)
        if D <= threshold:
            continue
        count = math.ceil((D - threshold) / 2)
        spine = [v]
        slots: list[int] = [v, v]
        for _ in range(count):
            x, s_next, a, b = nxt, nxt + 1, nxt + 2, nxt + 3
            nxt += 4
            origin += [v, v, -1, -1]
            terminals = (spine[-1], x, s_next)
            new_edges.append((a, b))
            for t in terminals:
                new_edges += [(a, t), (b, t)]
            spine.append(s_next)
            slots += [x, x]
        slots += [spine[-1], spine[-1]]
        for u, slot in zip(nbrs, slots):
            endpoint[(v, norm_edge(u, v))] = slot
    for u, v in g.edges:
        e = (u, v)
        new_edges.append(norm_edge(endpoint.get((u, e), u), endpoint.get((v, e), v)))
    return ConstraintGraph(Graph.from_edges(nxt, new_edges)), origin


def degree_reduce(G: Graph | ConstraintGraph, target_degree: int, seed: int = 0) -> ConstraintGraph:
    """Degree reduction for 3-coloring instances.

    ``target_degree=7``: vertices of degree above 7 become equality clouds, after
    which the 3-coloring equality gadgets leave every degree at most 7.
    ``target_degree=4``: vertices of degree 5..7 are split by book gadgets.
    """
    if target_degree == 7:
        return _cloud_stage(G, 7, seed)[0]
    if target_degree == 4:
        return _book_stage(G, 4)[0]
    raise ValueError("target degree must be 7 or 4")


def _diamond_stage(cg: ConstraintGraph) -> tuple[Graph, list[int]]:
    origin = list(range(cg.n))
    nxt = cg.n
    edges = list(cg.inequality)
    for i, j in sorted(cg.equality):
        a, b = nxt, nxt + 1
        nxt += 2
        origin += [-1, -1]
        edges += [(i, a), (i, b), (a, b), (j, a), (j, b)]
    return Graph.from_edges(nxt, edges), origin


def equality_gadget_3color(CG: ConstraintGraph) -> Graph:
    """Replace each equality edge ``ij`` by a diamond: ``ab`` adjacent, both joined to ``i`` and ``j``."""
    return _diamond_stage(CG)[0]


# ---------------------------------------------------------------- steps I-III


def cleanup_isolated(G: Graph) -> tuple[Graph, list[int]]:
    """Drop isolated vertices; returns the new graph and the kept original labels."""
    keep = [v for v in range(G.n) if G.degree(v) > 0]
    sub, _ = G.induced(keep)
    return sub, keep


def step1_add_apex(G3: Graph) -> Graph:
    """Add vertex ``n`` adjacent to every vertex."""
    return Graph.from_edges(G3.n + 1, list(G3.edges) + [(v, G3.n) for v in range(G3.n)])


def step2_cloud(G4: Graph, apex: int | None = None, seed: int = 0) -> ConstraintGraph:
    """Replace the apex (default: last vertex) by an equality cloud ``W``.

    Cloud vertex ``i`` takes the apex's edge to its ``i``-th neighbour. Vertices
    keep their labels, the apex label becomes the first cloud vertex and the rest
    of the cloud is appended.
    """
    apex = G4.n - 1 if apex is None else apex
    nbrs = sorted(G4.adjacency[apex])
    if not nbrs:
        classes = tuple("V" if v != apex else "W" for v in range(G4.n))
        return ConstraintGraph(G4, frozenset(), classes)
    m = len(nbrs)
    cloud = [apex] + list(range(G4.n, G4.n + m - 1))
    edges = [e for e in G4.edges if apex not in e]
    edges += [(c, u) for c, u in zip(cloud, nbrs)]
    eq = [norm_edge(cloud[a], cloud[b]) for a, b in cloud_graph(m, seed).edges]
    n = G4.n + m - 1
    classes = tuple("W" if v in set(cloud) else "V" for v in range(n))
    return ConstraintGraph(Graph.from_edges(n, edges + eq), frozenset(eq), classes)


@dataclass(frozen=True)
class GadgetGraph:
    """Graph after the 4-coloring equality gadgets, with vertex classes and gadget records."""

    graph: Graph
    classes: tuple[str, ...]
    gadgets: tuple[tuple[int, int, int, int, int], ...]  # (i, j, t1, t2, t3)

    @property
    def n(self) -> int:
        return self.graph.n


FOUR_COLOR_GADGET_EDGES = (
    ("i", "t1"), ("i", "t2"), ("i", "t3"),
    ("t1", "t2"), ("t1", "t3"), ("t2", "t3"),
    ("j", "t1"), ("j", "t2"), ("j", "t3"),
)  # fmt: skip


def step3_equality_gadget_4color(CG: ConstraintGraph) -> GadgetGraph:
    """Each equality edge ``ij`` becomes ``K4`` on ``{i, t1, t2, t3}`` plus ``j`` joined to the ``t``'s."""
    classes = list(CG.classes) if CG.classes is not None else ["V"] * CG.n
    nxt = CG.n
    edges = list(CG.inequality)
    gadgets = []
    for i, j in sorted(CG.equality):
        t1, t2, t3 = nxt, nxt + 1, nxt + 2
        nxt += 3
        classes += ["T", "T", "T"]
        names = {"i": i, "j": j, "t1": t1, "t2": t2, "t3": t3}
        edges += [(names[a], names[b]) for a, b in FOUR_COLOR_GADGET_EDGES]
        gadgets.append((i, j, t1, t2, t3))
    return GadgetGraph(Graph.from_edges(nxt, edges), tuple(classes), tuple(gadgets))


# ---------------------------------------------------------------- decomposition


def euler_split(G: Graph) -> list[set[Edge]]:
    """Split a graph of maximum degree 4 into three parts of maximum degree 2.

    Odd-degree vertices are paired by dummy edges inside each component; the
    edges of every Euler circuit are then alternated between parts 1 and 2. On
    an odd circuit the closing edge goes to part 3.
    """
    if G.max_degree > 4:
        raise DecompositionError(f"maximum degree {G.max_degree} exceeds 4")
    parts: list[set[Edge]] = [set(), set(), set()]
    H = nx.MultiGraph()
    H.add_nodes_from(range(G.n))
    for u, v in G.edge_list:
        H.add_edge(u, v, real=True)
    for comp in G.components():
        odd = [v for v in comp if G.degree(v) % 2]
        for a, b in zip(odd[::2], odd[1::2]):
            H.add_edge(a, b, real=False)
    for comp in nx.connected_components(H):
        if len(comp) < 2:
            continue
        start = min(comp)
        circuit = list(nx.eulerian_circuit(H.subgraph(comp), source=start, keys=True))
        L = len(circuit)
        for idx, (u, v, key) in enumerate(circuit):
            if not H.edges[u, v, key]["real"]:
                continue
            if L % 2 and idx == L - 1:
                parts[2].add(norm_edge(u, v))
            else:
                parts[idx % 2].add(norm_edge(u, v))
    return parts


def _part_degrees(parts: Sequence[set[Edge]], n: int) -> np.ndarray:
    deg = np.zeros((3, n), dtype=np.int64)
    for ell, part in enumerate(parts):
        for u, v in part:
            deg[ell, u] += 1
            deg[ell, v] += 1
    return deg


def _path_partner(part: set[Edge], v: int, n: int) -> int:
    """Other end of the path in ``part`` that has leaf ``v``."""
    adj: dict[int, list[int]] = {}
    for a, b in part:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    prev, cur = None, v
    while True:
        nxt = [w for w in adj.get(cur, []) if w != prev]
        if not nxt:
            return cur
        prev, cur = cur, nxt[0]


def assign_cross_edges(
    g_parts: Sequence[set[Edge]], cross: dict[int, int], n: int
) -> dict[int, int]:
    """Choose a part for the cross edge of every base vertex.

    A vertex isolated in some part sends its cross edge there. Otherwise it is a
    leaf in at least two parts and sends it to one of those, subject to the two
    leaves of any path never both sending into that path's part. Solved by
    backtracking; raises :class:`DecompositionError` when no choice works.
    """
    deg = _part_degrees(g_parts, n)
    choice: dict[int, int] = {}
    second: list[int] = []
    for v in sorted(cross):
        empty = [ell for ell in range(3) if deg[ell, v] == 0]
        if empty:
            choice[v] = empty[0]
        else:
            second.append(v)
    options = {v: [ell for ell in range(3) if deg[ell, v] == 1] for v in second}
    for v in second:
        if len(options[v]) < 2:
            raise DecompositionError(f"vertex {v} is a leaf in fewer than two parts")
    partner = {(v, ell): _path_partner(g_parts[ell], v, n) for v in second for ell in options[v]}

    def consistent(v: int, ell: int) -> bool:
        w = partner[(v, ell)]
        return choice.get(w) != ell

    def solve(idx: int) -> bool:
        if idx == len(second):
            return True
        v = second[idx]
        for ell in options[v]:
            if consistent(v, ell):
                choice[v] = ell
                if solve(idx + 1):
                    return True
                del choice[v]
        return False

    if not solve(0):
        raise DecompositionError(f"no loop-free cross-edge assignment; first second-kind vertex {second[0]}")
    return choice


@dataclass
class ComponentInfo:
    kind: str  # "isolated", "cycle" or "third_kind"
    vertices: list[int]
    virtual: int = 0


@dataclass(eq=False)
class DecomposedGraph:
    graph: Graph
    parts: tuple[frozenset[Edge], frozenset[Edge], frozenset[Edge]]
    vertex_classes: tuple[str, ...]
    solutions: tuple[LambdaSolution | None, LambdaSolution | None, LambdaSolution | None] = (None, None, None)
    components: tuple[list[ComponentInfo], ...] = ((), (), ())
    lambda_achieved: float | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    def part_graph(self, ell: int) -> Graph:
        return Graph(self.n, self.parts[ell])


def _roles(comp: list[int], adj: dict[int, list[int]], classes: Sequence[str]) -> dict[int, str]:
    """Assign J (branch), M (middle) and P (pendant) roles inside one component."""
    role: dict[int, str] = {}
    for v in comp:
        if classes[v] == "W":
            role[v] = "J"
        elif classes[v] == "T":
            role[v] = "P" if len(adj[v]) == 1 else "M"
    base = [v for v in comp if v not in role]
    if not role and base:
        # a bare path: start from a leaf
        leaves = [v for v in base if len(adj[v]) <= 1]
        if not leaves:
            raise DecompositionError(f"component at {base[0]} has no leaf")
        role[leaves[0]] = "J"
    frontier = [v for v in comp if v in role]
    while frontier:
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y in role:
                    continue
                if role[x] == "J":
                    role[y] = "M"
                elif role[x] == "M":
                    role[y] = "J"
                else:
                    raise DecompositionError(f"pendant {x} has an unexpected neighbour {y}")
                nxt.append(y)
        frontier = nxt
    return role


def _third_kind_component(comp: list[int], adj: dict[int, list[int]], classes: Sequence[str]):
    """Embed a component into a subdivided host graph; returns host layout, index map, virtual count."""
    role = _roles(comp, adj, classes)
    j_list = [v for v in comp if role[v] == "J"]
    j_index = {v: i for i, v in enumerate(j_list)}
    virtual = 0
    mid_parents: dict[int, tuple[int, int]] = {}
    pendant_of: dict[int, int] = {}
    for v in comp:
        r = role[v]
        nbr_roles = [role[w] for w in adj[v]]
        if r == "J":
            if any(x != "M" for x in nbr_roles):
                raise DecompositionError(f"branch vertex {v} is adjacent to a non-middle vertex")
        elif r == "M":
            js = [j_index[w] for w in adj[v] if role[w] == "J"]
            ps = [w for w in adj[v] if role[w] == "P"]
            if len(js) > 2 or len(ps) > 1 or len(js) + len(ps) != len(adj[v]):
                raise DecompositionError(f"middle vertex {v} has neighbourhood roles {nbr_roles}")
            while len(js) < 2:
                js.append(len(j_list) + virtual)
                virtual += 1
            mid_parents[v] = tuple(sorted(js))
            if ps:
                pendant_of[v] = ps[0]
        else:
            if len(adj[v]) != 1 or role[adj[v][0]] != "M":
                raise DecompositionError(f"pendant {v} is not a leaf on a middle vertex")
    j_edges = list(mid_parents.values())
    if len(set(j_edges)) != len(j_edges):
        raise DecompositionError("two middle vertices share both branch neighbours")
    J = Graph.from_edges(len(j_list) + virtual, j_edges)
    if J.max_degree > 4:
        raise DecompositionError(f"branch graph has degree {J.max_degree} > 4")
    edge_mid = {norm_edge(*pp): m for m, pp in mid_parents.items()}
    flags = [edge_mid[e] in pendant_of for e in J.edge_list]
    layout = third_kind_layout(J, flags)
    host_index = {}
    for v in comp:
        if role[v] == "J":
            host_index[v] = j_index[v]
    for m, pp in mid_parents.items():
        host_mid = layout.mid_of_edge[norm_edge(*pp)]
        host_index[m] = host_mid
        if m in pendant_of:
            host_index[pendant_of[m]] = layout.pendant_of_mid[host_mid]
    return layout, host_index, virtual


def _cycle_order(comp: list[int], adj: dict[int, list[int]]) -> list[int]:
    order = [comp[0]]
    prev = None
    while True:
        cur = order[-1]
        nxt = [w for w in adj[cur] if w != prev]
        w = nxt[0]
        if w == order[0]:
            return order
        prev = cur
        order.append(w)


def part_solution(n: int, edges: set[Edge] | frozenset[Edge], classes: Sequence[str]) -> tuple[LambdaSolution, list[ComponentInfo]]:
    """Lambda-solution for one part, as a product over its connected components."""
    G = Graph(n, frozenset(edges))
    adj = {v: list(G.adjacency[v]) for v in range(n)}
    pieces: list[tuple[LambdaSolution, list[int]]] = []
    infos: list[ComponentInfo] = []
    for comp in G.components():
        if len(comp) == 1:
            infos.append(ComponentInfo("isolated", comp))
            continue
        sub, order = G.induced(comp)
        if all(len(adj[v]) == 2 for v in comp):
            cyc = _cycle_order(comp, adj)
            sol = cycle_solution(len(cyc))
            pieces.append((sol, cyc))
            infos.append(ComponentInfo("cycle", cyc))
            continue
        layout, host_index, virtual = _third_kind_component(comp, adj, classes)
        host_sites = [host_index[v] for v in order]
        host_graph_sub, _ = layout.graph.induced(host_sites)
        if host_graph_sub.edges != sub.edges:
            raise DecompositionError(f"component at {comp[0]} is not an induced subgraph of its host")
        dist = RestrictedDistribution(third_kind_distribution(layout), tuple(host_sites))
        sol = LambdaSolution(sub, dist, 0.0, "third_kind", {"virtual": virtual})
        sol.lambda_achieved = pair_spectrum(sol).lambda_achieved
        pieces.append((sol, order))
        infos.append(ComponentInfo("third_kind", order, virtual))
    if n == 0:
        return LambdaSolution(G, UniformDistribution(0), 0.25, "empty"), infos
    if not pieces:
        return LambdaSolution(G, UniformDistribution(n), 0.25, "isolated"), infos
    return product_solution(pieces, n), infos


def attach_solutions(dg: DecomposedGraph) -> DecomposedGraph:
    sols, infos = [], []
    for ell in range(3):
        sol, info = part_solution(dg.n, dg.parts[ell], dg.vertex_classes)
        sols.append(sol)
        infos.append(info)
    dg.solutions = tuple(sols)
    dg.components = tuple(infos)
    dg.lambda_achieved = min(s.lambda_achieved for s in sols)
    return dg


def decompose3(gg: GadgetGraph, with_solutions: bool = True) -> DecomposedGraph:
    """Split the edges into three parts whose components all admit lambda-solutions."""
    classes = gg.classes
    n = gg.n
    V = [v for v in range(n) if classes[v] == "V"]
    Vset = set(V)
    g_edges = [e for e in gg.graph.edges if e[0] in Vset and e[1] in Vset]
    G_base = Graph(n, frozenset(g_edges))
    if G_base.max_degree > 4:
        raise DecompositionError(f"base graph has degree {G_base.max_degree} > 4")
    g_parts = euler_split(G_base)
    parts: list[set[Edge]] = [set(p) for p in g_parts]
    gadget_edges: set[Edge] = set()
    for i, j, t1, t2, t3 in gg.gadgets:
        ts = (t1, t2, t3)
        for ell in range(3):
            t, nxt_t = ts[ell], ts[(ell + 1) % 3]
            for e in ((i, t), (t, j), (t, nxt_t)):
                parts[ell].add(norm_edge(*e))
                gadget_edges.add(norm_edge(*e))
    cross: dict[int, int] = {}
    for u, v in gg.graph.edges:
        if (u in Vset) != (v in Vset) and classes[u] in "VW" and classes[v] in "VW":
            base, w = (u, v) if u in Vset else (v, u)
            if base in cross:
                raise DecompositionError(f"vertex {base} has two cross edges")
            cross[base] = w
    choice = assign_cross_edges(g_parts, cross, n)
    for base, w in cross.items():
        parts[choice[base]].add(norm_edge(base, w))
    covered = set().union(*parts)
    if covered != set(gg.graph.edges) or sum(len(p) for p in parts) != gg.graph.m:
        raise DecompositionError("parts do not partition the edge set")
    dg = DecomposedGraph(gg.graph, tuple(frozenset(p) for p in parts), gg.classes)
    return attach_solutions(dg) if with_solutions else dg


# ---------------------------------------------------------------- text format


def decomposed_to_text(dg: DecomposedGraph) -> str:
    part_of = {e: ell for ell, p in enumerate(dg.parts) for e in p}
    lines = [f"p {dg.n} {dg.graph.m}"]
    lines += [f"{u} {v} {part_of[(u, v)] + 1}" for u, v in dg.graph.edge_list]
    lines += [f"class {v} {c}" for v, c in enumerate(dg.vertex_classes)]
    return "\n".join(lines) + "\n"


def parse_decomposed(text: str, with_solutions: bool = True) -> DecomposedGraph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[0] != "p":
        raise ValueError("bad decomposed-graph header")
    n, m = int(head[1]), int(head[2])
    parts: list[set[Edge]] = [set(), set(), set()]
    classes = ["V"] * n
    count = 0
    for ln in lines[1:]:
        f = ln.split()
        if f[0] == "class":
            if len(f) != 3 or f[2] not in ("V", "W", "T"):
                raise ValueError(f"bad class line {ln!r}")
            classes[int(f[1])] = f[2]
        elif len(f) == 3:
            ell = int(f[2])
            if ell not in (1, 2, 3):
                raise ValueError(f"bad part label in {ln!r}")
            parts[ell - 1].add(norm_edge(int(f[0]), int(f[1])))
            count += 1
        else:
            raise ValueError(f"bad line {ln!r}")
    if count != m:
        raise ValueError(f"header promises {m} edges, found {count}")
    graph = Graph.from_edges(n, set().union(*parts))
    if graph.m != m:
        raise ValueError("an edge appears in more than one part")
    dg = DecomposedGraph(graph, tuple(frozenset(p) for p in parts), tuple(classes))
    return attach_solutions(dg) if with_solutions else dg


def xlow_to_text(dg: DecomposedGraph, coloring: Sequence[int], eps: float, delta: float) -> str:
    """Structured witness file: parameters, the 4-coloring and the decomposed graph."""
    head = [f"xlow eps {eps!r} delta {delta!r}", "coloring " + " ".join(str(int(c)) for c in coloring)]
    return "\n".join(head) + "\n" + decomposed_to_text(dg)


def parse_xlow(text: str) -> tuple[MixtureDistribution, DecomposedGraph]:
    """Rebuild the low-energy witness; the lambda-solutions are recomputed from the parts."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if len(lines) < 3:
        raise ValueError("truncated xlow file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "xlow" or head[1] != "eps" or head[3] != "delta":
        raise ValueError(f"bad xlow header {lines[0]!r}")
    eps, delta = float(head[2]), float(head[4])
    col = lines[1].split()
    if not col or col[0] != "coloring":
        raise ValueError("missing coloring line")
    coloring = [int(c) for c in col[1:]]
    dg = parse_decomposed("\n".join(lines[2:]))
    return build_xlow(dg, coloring, eps, delta), dg


# ---------------------------------------------------------------- pipeline


def lift_coloring(graph: Graph, origin: Sequence[int], coloring: Sequence[int], colors: int,
                  extra: dict[int, int] | None = None) -> tuple[int, ...]:
    """Copy colors along ``origin`` and complete the rest by search."""
    fixed = {v: int(coloring[o]) for v, o in enumerate(origin) if o >= 0}
    fixed.update(extra or {})
    out = find_legal_coloring(graph, colors, fixed=fixed)
    if out is None:
        raise StageError("lift", "coloring does not extend through the stage")
    return out


def min_violation_fraction(G: Graph | ConstraintGraph, colors: int) -> float | None:
    cg = as_constraint_graph(G)
    if cg.n == 0 or colors**cg.n > MAX_ENUMERATION:
        return None
    _, best = best_coloring(cg, colors)
    return best / max(1, cg.graph.m)


def colorable(G: Graph, colors: int) -> tuple[bool | None, tuple[int, ...] | None]:
    """Decide colorability by enumeration when small, else by backtracking search."""
    if G.n == 0:
        return True, ()
    if colors**G.n <= MAX_ENUMERATION:
        col, best = best_coloring(G, colors)
        return best == 0, (col if best == 0 else None)
    try:
        col = find_legal_coloring(G, colors)
    except RuntimeError:
        return None, None
    return col is not None, col


@dataclass
class PipelineResult:
    hamiltonian: LocalHamiltonian
    decomposed: DecomposedGraph
    report: dict
    coloring: tuple[int, ...] | None = None
    stages: dict = field(default_factory=dict)


def full_pipeline(G3: Graph, xi: float, seed: int = 0, eps: float = DEFAULT_EPS,
                  delta: float | None = None, audit: bool = True,
                  coloring: Sequence[int] | None = None) -> PipelineResult:
    """Run every stage, attach lambda-solutions and build the scapegoat Hamiltonian.

    ``coloring`` may supply a legal 3-coloring of ``G3``; otherwise colorability is
    decided by enumeration or search.
    """
    report: dict = {"input_vertices": G3.n, "input_edges": G3.m}
    stages: dict = {}
    G, kept = cleanup_isolated(G3)
    report["isolated_removed"] = G3.n - G.n
    report["normalization_holds"] = G.n <= G.m
    try:
        cloud_cg, origin1 = _cloud_stage(G, 7, seed)
        diamond_g, origin2 = _diamond_stage(cloud_cg)
        book_cg, origin3 = _book_stage(diamond_g, 4)
        base = book_cg.graph
    except (ValueError, RuntimeError) as exc:
        raise StageError("degree", str(exc)) from exc
    stages.update(cleaned=G, cloud=cloud_cg, diamond=diamond_g, base=base)
    report["degree_stage_vertices"] = base.n
    report["degree_stage_edges"] = base.m
    report["degree_stage_max_degree"] = base.max_degree
    try:
        apex_g = step1_add_apex(base)
        cloud2 = step2_cloud(apex_g, seed=seed)
        gg = step3_equality_gadget_4color(cloud2)
    except (ValueError, RuntimeError) as exc:
        raise StageError("apex", str(exc)) from exc
    stages.update(apex=apex_g, cloud_w=cloud2, gadget=gg)
    try:
        dg = decompose3(gg)
    except (ValueError, RuntimeError) as exc:
        raise StageError("decompose", str(exc)) from exc
    H = scapegoat_hamiltonian(dg, xi) if dg.graph.m else LocalHamiltonian(dg.n + 3, 3, [])
    lam = dg.lambda_achieved if dg.lambda_achieved is not None else 0.25
    delta = lam / 10.0 if delta is None else delta
    counts = [sum(1 for c in dg.vertex_classes if c == k) for k in "VWT"]
    report.update(
        final_vertices=dg.n,
        final_edges=dg.graph.m,
        class_V=counts[0],
        class_W=counts[1],
        class_T=counts[2],
        part_sizes=[len(p) for p in dg.parts],
        lambda_achieved=lam,
        eps=eps,
        delta=delta,
        xi=xi,
    )
    report.update(soundness_thresholds(dg.graph.m, xi, eps, delta))
    report["witness_energy"] = xi * dg.graph.m * (1 - eps * delta)
    # colorability and a lifted 4-coloring of the final graph
    if coloring is not None:
        c3 = tuple(int(c) for c in coloring)
        if violations(G3, c3, 3) != 0:
            raise StageError("input", "supplied coloring is not a legal 3-coloring")
        ok = True
    else:
        ok, c3 = colorable(G3, 3)
    report["input_3_colorable"] = ok
    final_coloring = None
    if ok and c3 is not None:
        cg0 = [c3[v] for v in kept]
        c1 = lift_coloring(cloud_cg.graph, origin1, cg0, 3)
        c2 = lift_coloring(diamond_g, origin2, c1, 3)
        c_base = lift_coloring(base, origin3, c2, 3)
        # the W cloud takes the fourth color, gadget vertices are completed by search
        final_coloring = lift_coloring(gg.graph, list(range(base.n)) + [-1] * (gg.n - base.n), c_base, 4,
                                       extra={v: 3 for v in range(base.n, cloud2.n)})
    if audit:
        report["audit"] = stage_audit(G, cloud_cg, diamond_g, base, apex_g, cloud2, gg)
    return PipelineResult(H, dg, report, final_coloring, stages)


def stage_audit(*stages) -> list[dict]:
    """Min-violation fractions for every enumerable stage (3 colors before the apex, 4 after)."""
    names = ["input", "cloud", "diamond", "base", "apex", "cloud_w", "gadget"]
    colors = [3, 3, 3, 3, 4, 4, 4]
    out = []
    for name, st, c in zip(names, stages, colors):
        g = st.graph if isinstance(st, GadgetGraph) else st
        frac = min_violation_fraction(g, c)
        out.append({"stage": name, "colors": c, "vertices": g.n, "min_violation_fraction": frac})
    return out
