"""Color-invariant distributions of legal colorings with strictly positive pair spectra.

A lambda-solution of a graph is a distribution over legal 4-colorings that is
invariant under relabelling the colors and whose non-edge pair marginal
operators are all at least ``lambda`` times the identity. For such
distributions the pair operator only depends on the collision probability
``tau``, with smallest eigenvalue ``min(tau, 1 - 3 tau)``.

Most constructions here are *parent processes*: vertices are grouped into
blocks colored in order, and each block is colored uniformly among the
colorings that are legal given its already-colored neighbours. Marginals are
computed exactly by contracting the conditional tables of the blocks in the
ancestor closure of the queried sites.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .graphs import Graph, cycle_graph, misra_gries_edge_coloring
from .qq_state import (
    DEFAULT_PSD_TOL,
    ColorSymmetrized,
    Distribution,
    MixtureDistribution,
    ProductDistribution,
    SparseDistribution,
    UniformDistribution,
    is_color_invariant,
    symmetrize_colors,
    symmetrize_table,
    table_to_operator,
    tables_to_operators,
)

EXPLICIT_SUPPORT_LIMIT = 100_000
THIRD_KIND_EPS = 1.0 / 20.0
Representation = Literal["auto", "explicit", "implicit"]


# ---------------------------------------------------------------- parent processes


class ParentProcess(Distribution):
    """Blockwise sequential coloring, uniform over legal completions at each block."""

    def __init__(self, graph: Graph, blocks: Sequence[Sequence[int]]):
        self.graph = graph
        self.n = graph.n
        self.blocks = [tuple(int(v) for v in b) for b in blocks]
        block_of = -np.ones(self.n, dtype=np.int64)
        for bi, b in enumerate(self.blocks):
            for v in b:
                if block_of[v] >= 0:
                    raise ValueError(f"vertex {v} appears in two blocks")
                block_of[v] = bi
        if np.any(block_of < 0):
            raise ValueError("every vertex must belong to a block")
        self.block_of = block_of
        self.parents: list[tuple[int, ...]] = []
        self.factors: list[np.ndarray] = []
        for bi, b in enumerate(self.blocks):
            par = sorted({w for v in b for w in graph.adjacency[v] if block_of[w] < bi})
            self.parents.append(tuple(par))
            self.factors.append(self._conditional(b, tuple(par)))

    def _conditional(self, block: tuple[int, ...], parents: tuple[int, ...]) -> np.ndarray:
        """Table over (parent colors, block colors) of the block's conditional law."""
        variables = list(parents) + list(block)
        pos = {v: i for i, v in enumerate(variables)}
        grid = np.array(list(itertools.product(range(4), repeat=len(variables))), dtype=np.int64)
        legal = np.ones(grid.shape[0], dtype=bool)
        for v in block:
            for w in self.graph.adjacency[v]:
                if w in pos and (w not in block or w > v):
                    legal &= grid[:, pos[v]] != grid[:, pos[w]]
        table = legal.astype(float).reshape((4,) * len(parents) + (4 ** len(block),))
        counts = table.sum(axis=-1, keepdims=True)
        if np.any(counts == 0):
            raise ValueError(f"block {block} has no legal completion for some parent coloring")
        return (table / counts).reshape((4,) * len(variables))

    def closure(self, sites: Sequence[int]) -> list[int]:
        """Indices of the blocks needed to determine the law of ``sites``."""
        needed: set[int] = set()
        stack = [int(self.block_of[s]) for s in sites]
        while stack:
            b = stack.pop()
            if b in needed:
                continue
            needed.add(b)
            stack.extend(int(self.block_of[p]) for p in self.parents[b])
        return sorted(needed)

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        blocks = self.closure(sites)
        labels: dict[int, int] = {}

        def lab(v: int) -> int:
            return labels.setdefault(v, len(labels))

        args: list = []
        for b in blocks:
            args.append(self.factors[b])
            args.append([lab(v) for v in self.parents[b] + self.blocks[b]])
        out = [lab(v) for v in sites]
        if len(labels) > 52:
            raise ValueError("ancestor closure too large for contraction")
        return np.einsum(*args, out, optimize="greedy")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.zeros((size, self.n), dtype=np.int64)
        for b, par, fac in zip(self.blocks, self.parents, self.factors):
            flat = fac.reshape((4,) * len(par) + (4 ** len(b),))
            probs = flat[tuple(out[:, p] for p in par)] if par else np.broadcast_to(flat, (size, flat.shape[-1]))
            cdf = np.cumsum(probs, axis=1)
            u = rng.random(size)[:, None] * cdf[:, -1:]
            choice = np.minimum((cdf < u).sum(axis=1), flat.shape[-1] - 1)
            for j, v in enumerate(b):
                out[:, v] = (choice // 4 ** (len(b) - 1 - j)) % 4
        return out

    def enumerate_support(self, limit: int = EXPLICIT_SUPPORT_LIMIT) -> SparseDistribution:
        """Explicit distribution by forward expansion of the blocks (independent of ``marginal``)."""
        states = np.full((1, self.n), -1, dtype=np.int64)
        probs = np.ones(1)
        for b, par, fac in zip(self.blocks, self.parents, self.factors):
            flat = fac.reshape((4,) * len(par) + (4 ** len(b),))
            cond = flat[tuple(states[:, p] for p in par)] if par else np.broadcast_to(flat, (len(probs), flat.shape[-1]))
            rows, choice = np.nonzero(cond > 0)
            if rows.size > limit:
                raise ValueError(f"support exceeds {limit}")
            new_states = states[rows].copy()
            for j, v in enumerate(b):
                new_states[:, v] = (choice // 4 ** (len(b) - 1 - j)) % 4
            probs = probs[rows] * cond[rows, choice]
            states = new_states
        return SparseDistribution(self.n, states.astype(np.int8), probs / probs.sum())


class ShiftAverage(Distribution):
    """Uniform mixture of cyclic relabellings ``a_i = b_{(i + s) mod n}`` of a base law."""

    def __init__(self, base: Distribution, shifts: Sequence[int]):
        self.base = base
        self.n = base.n
        self.shifts = [int(s) % base.n for s in shifts]
        if not self.shifts:
            raise ValueError("need at least one shift")

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        acc = np.zeros((4,) * len(sites))
        for s in self.shifts:
            acc += self.base.marginal([(i + s) % self.n for i in sites])
        return acc / len(self.shifts)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        draws = self.base.sample(rng, size)
        shift = np.array(self.shifts)[rng.integers(0, len(self.shifts), size=size)]
        cols = (np.arange(self.n)[None, :] + shift[:, None]) % self.n
        return np.take_along_axis(draws, cols, axis=1)

    def enumerate_support(self, limit: int = EXPLICIT_SUPPORT_LIMIT) -> SparseDistribution:
        base = self.base.enumerate_support(limit)
        strings, weights = [], []
        for s in self.shifts:
            cols = (np.arange(self.n) + s) % self.n
            strings.append(base.strings[:, cols])
            weights.append(base.weights / len(self.shifts))
        return SparseDistribution(self.n, np.concatenate(strings), np.concatenate(weights))


# ---------------------------------------------------------------- solutions


@dataclass(eq=False)
class LambdaSolution:
    graph: Graph
    distribution: Distribution
    lambda_achieved: float
    kind: str
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def explicit(self) -> bool:
        return isinstance(self.distribution, SparseDistribution)


def _finish(graph: Graph, dist: Distribution, kind: str, **info) -> LambdaSolution:
    sol = LambdaSolution(graph, dist, 0.0, kind, dict(info))
    report = pair_spectrum(sol)
    sol.lambda_achieved = report.lambda_achieved
    sol.info.update(worst_pair=report.worst_pair, tau_range=report.tau_range)
    return sol


def _sparse_mixture(parts: Sequence[tuple[float, SparseDistribution]]) -> SparseDistribution:
    n = parts[0][1].n
    strings = np.concatenate([d.strings for _, d in parts])
    weights = np.concatenate([w * d.weights for w, d in parts])
    return SparseDistribution(n, strings, weights / weights.sum())


def cycle_parent_process(n: int) -> ParentProcess:
    """Process on the ``n``-cycle: odd positions are roots, even positions fill in.

    For odd ``n`` the adjacent positions ``0`` and ``n - 1`` form one block colored
    jointly given their parents.
    """
    if n < 6:
        raise ValueError("the parent process is used for cycles of length at least 6")
    G = cycle_graph(n)
    roots = [(v,) for v in range(1, n, 2)]
    fill = [v for v in range(0, n, 2)]
    if n % 2:
        blocks = roots + [(0, n - 1)] + [(v,) for v in fill if v not in (0, n - 1)]
    else:
        blocks = roots + [(v,) for v in fill]
    return ParentProcess(G, blocks)


def cycle_shifts(n: int, all_shifts: bool = False) -> list[int]:
    return list(range(n)) if all_shifts else list(range(2, n))


def cycle_solution(
    n: int, all_shifts: bool = False, representation: Representation = "auto"
) -> LambdaSolution:
    if n < 3:
        raise ValueError("cycles need at least 3 vertices")
    G = cycle_graph(n)
    if n == 3:
        dist: Distribution = symmetrize_colors(SparseDistribution.point_mass("012"))
        return _finish(G, dist, "cycle")
    if n == 4:
        dist = _sparse_mixture(
            [
                (0.75, symmetrize_colors(SparseDistribution.point_mass("0123"))),
                (0.25, symmetrize_colors(SparseDistribution.point_mass("0101"))),
            ]
        )
        return _finish(G, dist, "cycle")
    if n == 5:
        parts = []
        for i in range(5):
            j = (i + 2) % 5
            coloring = [0] * 5
            rest = [v for v in range(5) if v not in (i, j)]
            for c, v in enumerate(rest, start=1):
                coloring[v] = c
            parts.append((0.2, symmetrize_colors(SparseDistribution.point_mass(coloring))))
        return _finish(G, _sparse_mixture(parts), "cycle")
    dist = ShiftAverage(cycle_parent_process(n), cycle_shifts(n, all_shifts))
    if representation != "implicit":
        try:
            dist = dist.enumerate_support()
        except ValueError:
            if representation == "explicit":
                raise
    return _finish(G, dist, "cycle", all_shifts=all_shifts)


# ---------------------------------------------------------------- third kind


@dataclass(frozen=True)
class ThirdKindLayout:
    """Vertex layout of a subdivided graph with optional pendants.

    Vertices ``0..|V_J|-1`` are those of ``J``; then one middle vertex per edge of
    ``J`` in sorted edge order; then one pendant per flagged middle vertex.
    """

    J: Graph
    flags: tuple[bool, ...]
    graph: Graph
    mid_of_edge: dict
    pendant_of_mid: dict

    @property
    def j_vertices(self) -> list[int]:
        return list(range(self.J.n))

    @property
    def mids(self) -> list[int]:
        return [self.mid_of_edge[e] for e in self.J.edge_list]

    @property
    def pendants(self) -> list[int]:
        return list(self.pendant_of_mid.values())


def third_kind_layout(J: Graph, optional_flags: Sequence[bool] | None = None) -> ThirdKindLayout:
    if J.max_degree > 4:
        raise ValueError(f"J has maximum degree {J.max_degree} > 4")
    flags = tuple(bool(f) for f in (optional_flags if optional_flags is not None else [False] * J.m))
    if len(flags) != J.m:
        raise ValueError("one optional flag per edge of J is required")
    nxt = J.n
    edges = []
    mid_of_edge = {}
    for u, v in J.edge_list:
        mid_of_edge[(u, v)] = nxt
        edges += [(u, nxt), (v, nxt)]
        nxt += 1
    pendant_of_mid = {}
    for (e, mid), flag in zip(list(mid_of_edge.items()), flags):
        if flag:
            pendant_of_mid[mid] = nxt
            edges.append((mid, nxt))
            nxt += 1
    return ThirdKindLayout(J, flags, Graph.from_edges(nxt, edges), mid_of_edge, pendant_of_mid)


def third_kind_parent_process(layout: ThirdKindLayout) -> ParentProcess:
    blocks = [(v,) for v in layout.j_vertices] + [(m,) for m in layout.mids] + [(p,) for p in layout.pendants]
    return ParentProcess(layout.graph, blocks)


LABEL_MAPS = np.array(
    [m for m in itertools.product(range(3), repeat=5) if sorted(np.bincount(m, minlength=3)) == [1, 2, 2]],
    dtype=np.int64,
)


class EdgeLabelDistribution(Distribution):
    """Before symmetrization: J vertices get color 3, middle vertices the image of their
    edge label under a uniformly chosen map of 5 labels onto 3 colors with preimage
    sizes (2, 2, 1), pendants a uniform color in {0,1,2} other than their middle's."""

    def __init__(self, layout: ThirdKindLayout, edge_labels: dict):
        self.layout = layout
        self.n = layout.graph.n
        self.edge_labels = dict(edge_labels)
        maps = LABEL_MAPS
        probs = np.zeros((self.n, len(maps), 4))
        probs[layout.j_vertices, :, 3] = 1.0
        for e, mid in layout.mid_of_edge.items():
            color = maps[:, self.edge_labels[e]]
            probs[mid, np.arange(len(maps)), color] = 1.0
            pend = layout.pendant_of_mid.get(mid)
            if pend is not None:
                probs[pend, :, :3] = 0.5
                probs[pend, np.arange(len(maps)), color] = 0.0
        self.site_probs = probs

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        count = len(LABEL_MAPS)
        acc = np.ones(count)
        for j, s in enumerate(sites):
            acc = acc[..., None] * self.site_probs[s].reshape((count,) + (1,) * j + (4,))
        return acc.mean(axis=0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        which = rng.integers(0, len(LABEL_MAPS), size=size)
        p = self.site_probs[:, which, :]  # (n, size, 4)
        cdf = np.cumsum(p, axis=2)
        u = rng.random((self.n, size, 1))
        return np.minimum((cdf < u).sum(axis=2), 3).T


def third_kind_label_mixture(layout: ThirdKindLayout) -> ColorSymmetrized:
    labels = misra_gries_edge_coloring(layout.J)
    if labels and max(labels.values()) > 4:
        raise ValueError("edge coloring uses more than 5 labels")
    return ColorSymmetrized(EdgeLabelDistribution(layout, labels))


def third_kind_distribution(layout: ThirdKindLayout, eps: float = THIRD_KIND_EPS) -> MixtureDistribution:
    return MixtureDistribution(
        [third_kind_parent_process(layout), third_kind_label_mixture(layout)],
        np.array([1.0 - eps, eps]),
    )


def third_kind_solution(
    J: Graph, optional_flags: Sequence[bool] | None = None, eps: float = THIRD_KIND_EPS
) -> LambdaSolution:
    layout = third_kind_layout(J, optional_flags)
    return _finish(layout.graph, third_kind_distribution(layout, eps), "third_kind", layout=layout)


# ---------------------------------------------------------------- products


def isolated_solution() -> LambdaSolution:
    return LambdaSolution(Graph(1), UniformDistribution(1), 0.25, "isolated")


def product_solution(
    parts: Sequence[tuple[LambdaSolution, Sequence[int]]], n: int | None = None
) -> LambdaSolution:
    """Independent product of solutions placed on disjoint vertex sets.

    Vertices not covered by any part are uniform, i.e. treated as isolated.
    """
    placements = [tuple(int(v) for v in verts) for _, verts in parts]
    total = n if n is not None else sum(len(p) for p in placements)
    seen: set[int] = set()
    edges = []
    for (sol, _), place in zip(parts, placements):
        if len(place) != sol.n:
            raise ValueError("placement size does not match the solution")
        if seen & set(place):
            raise ValueError("parts overlap")
        seen |= set(place)
        edges += [(place[u], place[v]) for u, v in sol.graph.edges]
    G = Graph.from_edges(total, edges)
    if len(parts) == 1 and total == parts[0][0].n and list(placements[0]) == list(range(total)):
        return parts[0][0]
    dist = ProductDistribution(total, [s.distribution for s, _ in parts], placements)
    lam = min([s.lambda_achieved for s, _ in parts] + ([0.25] if total > 1 else []))
    return LambdaSolution(G, dist, lam, "product", {"parts": len(parts)})


# ---------------------------------------------------------------- verification


def local_marginal(sol: LambdaSolution, I: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    if len(I) not in (2, 3):
        raise ValueError("local marginals are provided for 2 or 3 sites")
    table = np.array(sol.distribution.marginal(I))
    return table, table_to_operator(table)


@dataclass
class SpectrumReport:
    lambda_achieved: float
    worst_pair: tuple[int, int] | None
    tau_range: tuple[float, float] | None
    pair_min_eigs: dict


def pair_spectrum(sol: LambdaSolution, graph: Graph | None = None) -> SpectrumReport:
    """Smallest pair-marginal eigenvalue over non-edges, with the minimizing pair."""
    G = graph or sol.graph
    pairs = list(itertools.combinations(range(G.n), 2))
    non_edges = [p for p in pairs if p not in G.edges]
    if not non_edges:
        return SpectrumReport(0.25, None, None, {})
    tables = np.stack([sol.distribution.marginal(p) for p in non_edges])
    mins = np.linalg.eigvalsh(tables_to_operators(tables))[:, 0]
    taus = np.trace(tables, axis1=1, axis2=2)
    j = int(np.argmin(mins))
    return SpectrumReport(
        float(mins[j]),
        non_edges[j],
        (float(taus.min()), float(taus.max())),
        dict(zip(non_edges, mins.tolist())),
    )


@dataclass
class LambdaReport:
    passed: bool
    lambda_achieved: float
    worst_pair: tuple[int, int] | None
    tau_range: tuple[float, float] | None
    failures: list[str]


def verify_lambda_solution(
    sol: LambdaSolution,
    G: Graph | None = None,
    lam: float = 0.0,
    tol: float = DEFAULT_PSD_TOL,
    samples: int = 10_000,
    seed: int = 0,
) -> LambdaReport:
    """Check legality, color invariance, pair positivity and the non-edge bound."""
    G = G or sol.graph
    dist = sol.distribution
    failures: list[str] = []
    if dist.n != G.n:
        return LambdaReport(False, -math.inf, None, None, ["size mismatch"])
    edges = np.array(G.edge_list, dtype=np.int64).reshape(-1, 2)
    # legality
    if isinstance(dist, SparseDistribution):
        if edges.size and np.any(dist.strings[:, edges[:, 0]] == dist.strings[:, edges[:, 1]]):
            failures.append("illegal coloring in support")
    else:
        for u, v in G.edge_list:
            if np.trace(dist.marginal((u, v))) > 1e-12:
                failures.append(f"edge ({u}, {v}) is monochromatic with positive probability")
                break
        try:
            draws = dist.sample(np.random.default_rng(seed), samples)
        except NotImplementedError:
            draws = None
        if draws is not None and edges.size and np.any(draws[:, edges[:, 0]] == draws[:, edges[:, 1]]):
            failures.append("sampled an illegal coloring")
    # color invariance
    if isinstance(dist, SparseDistribution):
        if not is_color_invariant(dist):
            failures.append("not color invariant")
    else:
        for p in itertools.chain(((v,) for v in range(G.n)), itertools.combinations(range(G.n), 2)):
            t = dist.marginal(p)
            if np.max(np.abs(t - symmetrize_table(t))) > 1e-12:
                failures.append(f"marginal on {p} is not color invariant")
                break
    # 2-local validity everywhere, lambda on non-edges
    pairs = list(itertools.combinations(range(G.n), 2))
    if pairs:
        tables = np.stack([dist.marginal(p) for p in pairs])
        mins = np.linalg.eigvalsh(tables_to_operators(tables))[:, 0]
        if np.min(mins) < -tol:
            failures.append(f"pair marginal on {pairs[int(np.argmin(mins))]} is not PSD")
    report = pair_spectrum(sol, G)
    if report.worst_pair is not None and report.lambda_achieved < lam - tol:
        failures.append(f"non-edge {report.worst_pair} has min eigenvalue {report.lambda_achieved:.6g} < {lam}")
    if report.worst_pair is not None and report.lambda_achieved <= 0:
        failures.append("achieved lambda is not positive")
    return LambdaReport(not failures, report.lambda_achieved, report.worst_pair, report.tau_range, failures)
