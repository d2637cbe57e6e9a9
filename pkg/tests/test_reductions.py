import itertools

import numpy as np
import pytest

from quasiquantum.graphs import (
    ConstraintGraph,
    Graph,
    best_coloring,
    complete_graph,
    cycle_graph,
    find_legal_coloring,
    graph_to_text,
    misra_gries_edge_coloring,
    parse_graph,
    petersen_graph,
    random_regular_expander,
    second_eigenvalue,
    star_graph,
    violations,
)
from quasiquantum.hamiltonians import enumerate_min_energy
from quasiquantum.lambda_solutions import verify_lambda_solution
from quasiquantum.reductions import (
    FOUR_COLOR_GADGET_EDGES,
    DecompositionError,
    GadgetGraph,
    StageError,
    cleanup_isolated,
    decompose3,
    decomposed_to_text,
    degree_reduce,
    equality_gadget_3color,
    euler_split,
    full_pipeline,
    parse_decomposed,
    parse_xlow,
    stage_audit,
    step1_add_apex,
    step2_cloud,
    step3_equality_gadget_4color,
    xlow_to_text,
)


def legal_colorings(G, colors):
    edges = np.array(G.edge_list).reshape(-1, 2)
    for col in itertools.product(range(colors), repeat=G.n):
        c = np.array(col)
        if not edges.size or np.all(c[edges[:, 0]] != c[edges[:, 1]]):
            yield col


def wheel(n):
    return step1_add_apex(cycle_graph(n))


# ---------------------------------------------------------------- oracles


def test_violations_examples():
    C3 = cycle_graph(3)
    assert violations(C3, (0, 1, 2), 3) == 0
    assert violations(C3, (0, 0, 1), 3) == 1
    with pytest.raises(ValueError):
        violations(C3, (0, 1, 3), 3)


def test_best_coloring_examples():
    assert best_coloring(complete_graph(4), 3)[1] == 1
    assert best_coloring(complete_graph(5), 4)[1] == 1
    col, best = best_coloring(cycle_graph(5), 3)
    assert best == 0 and violations(cycle_graph(5), col, 3) == 0
    assert best_coloring(petersen_graph(), 3)[1] == 0
    with pytest.raises(ValueError):
        best_coloring(cycle_graph(16), 3)


def test_find_legal_coloring_respects_fixed():
    col = find_legal_coloring(cycle_graph(6), 3, fixed={0: 2})
    assert col[0] == 2 and violations(cycle_graph(6), col, 3) == 0
    assert find_legal_coloring(complete_graph(4), 3) is None


def test_expanders():
    K4 = random_regular_expander(4, seed=0)
    assert K4.m == 6 and all(K4.degree(v) == 3 for v in range(4))
    a = random_regular_expander(10, seed=3)
    b = random_regular_expander(10, seed=3)
    assert a.edges == b.edges and a.is_connected()
    assert second_eigenvalue(a) <= 2.9
    # independent spectral route
    A = np.zeros((10, 10))
    for u, v in a.edges:
        A[u, v] = A[v, u] = 1
    assert np.sort(np.linalg.eigvalsh(A))[-2] == pytest.approx(second_eigenvalue(a), abs=1e-9)
    with pytest.raises(ValueError):
        random_regular_expander(5)


def test_misra_gries_uses_at_most_five_colours():
    for G in (star_graph(4), complete_graph(5), petersen_graph()):
        col = misra_gries_edge_coloring(G)
        assert max(col.values()) <= G.max_degree
        for v in range(G.n):
            seen = [col[e] for e in G.edges if v in e]
            assert len(seen) == len(set(seen))


def test_graph_text_roundtrip():
    G = petersen_graph()
    assert parse_graph(graph_to_text(G)).edges == G.edges
    with pytest.raises(ValueError):
        parse_graph("p 2 1\n0 0\n")
    with pytest.raises(ValueError):
        parse_graph("p 2 2\n0 1\n")


# ---------------------------------------------------------------- degree stages


def test_cloud_replaces_high_degree_centre():
    cg = degree_reduce(star_graph(8), 7)
    assert cg.n == 8 + 8
    assert len(cg.equality) > 0 and cg.max_degree <= 4
    cloud = {v for e in cg.equality for v in e}
    assert len(cloud) == 8


def test_low_degree_input_unchanged():
    G = petersen_graph()
    assert degree_reduce(G, 7).graph.edges == G.edges
    assert degree_reduce(G, 4).graph.edges == G.edges
    with pytest.raises(ValueError):
        degree_reduce(G, 5)


def test_book_gadget_reduces_degree_five():
    G = star_graph(5)
    out = degree_reduce(G, 4)
    assert out.max_degree <= 4
    assert out.graph.m - G.m <= 12
    # colorability of the centre's neighbourhood is preserved
    assert best_coloring(out.graph, 3)[1] == 0


def test_diamond_forces_equality():
    cg = ConstraintGraph(Graph.from_edges(2, [(0, 1)]), frozenset({(0, 1)}))
    g = equality_gadget_3color(cg)
    cols = list(legal_colorings(g, 3))
    assert cols and all(c[0] == c[1] for c in cols)
    assert {c[0] for c in cols} == {0, 1, 2}
    chain = ConstraintGraph(Graph.from_edges(3, [(0, 1), (1, 2)]), frozenset({(0, 1), (1, 2)}))
    assert all(c[0] == c[2] for c in legal_colorings(equality_gadget_3color(chain), 3))
    plain = ConstraintGraph(cycle_graph(5))
    assert equality_gadget_3color(plain).edges == cycle_graph(5).edges


# ---------------------------------------------------------------- steps I-III


def test_apex():
    K5 = step1_add_apex(complete_graph(4))
    assert K5.edges == complete_graph(5).edges
    assert best_coloring(complete_graph(4), 3)[1] == 1 and best_coloring(K5, 4)[1] == 1
    W5 = wheel(5)
    assert W5.m == 5 + 5 and best_coloring(W5, 4)[1] == 0


def test_cloud_on_wheel():
    cg = step2_cloud(wheel(5))
    W = [v for v, c in enumerate(cg.classes) if c == "W"]
    assert len(W) == 5
    cross = [e for e in cg.inequality if (e[0] in W) != (e[1] in W)]
    assert len(cross) == 5
    assert all(sum(1 for e in cross if w in e) == 1 for w in W)
    assert {v for e in cg.equality for v in e} == set(W)
    assert max(cg.graph.degree(w) for w in W) <= 4
    assert find_legal_coloring(step3_equality_gadget_4color(cg).graph, 4) is not None


def test_four_colour_gadget_forces_equality():
    cg = ConstraintGraph(Graph.from_edges(2, [(0, 1)]), frozenset({(0, 1)}))
    gg = step3_equality_gadget_4color(cg)
    assert gg.n == 5 and gg.graph.m == len(FOUR_COLOR_GADGET_EDGES) == 9
    assert gg.classes[2:] == ("T", "T", "T")
    cols = list(legal_colorings(gg.graph, 4))
    assert cols and all(c[0] == c[1] for c in cols)
    assert {c[0] for c in cols} == {0, 1, 2, 3}


def test_gadget_edge_blowup_and_plain_input():
    cg = step2_cloud(wheel(6))
    gg = step3_equality_gadget_4color(cg)
    assert gg.graph.m <= 9 * cg.graph.m
    assert sum(1 for c in gg.classes if c == "T") <= 9 * 7 / 2
    plain = step3_equality_gadget_4color(ConstraintGraph(cycle_graph(4)))
    assert plain.graph.edges == cycle_graph(4).edges and not plain.gadgets


# ---------------------------------------------------------------- decomposition


def base_degrees(dg, ell):
    V = {v for v, c in enumerate(dg.vertex_classes) if c == "V"}
    deg = np.zeros(dg.n, dtype=int)
    for u, v in dg.parts[ell]:
        if u in V and v in V:
            deg[u] += 1
            deg[v] += 1
    return deg


@pytest.mark.parametrize("G", [cycle_graph(6), complete_graph(5), petersen_graph()])
def test_decompose_plain_graphs(G):
    dg = decompose3(GadgetGraph(G, ("V",) * G.n, ()))
    assert set().union(*dg.parts) == set(G.edges)
    assert sum(len(p) for p in dg.parts) == G.m
    for ell in range(3):
        assert base_degrees(dg, ell).max(initial=0) <= 2
    assert dg.lambda_achieved > 0


def test_euler_split_rejects_high_degree():
    with pytest.raises(DecompositionError):
        euler_split(star_graph(5))


def test_pipeline_decomposition_structure(c5_pipeline):
    dg = c5_pipeline.decomposed
    assert set().union(*dg.parts) == set(dg.graph.edges)
    for ell in range(3):
        assert base_degrees(dg, ell).max(initial=0) <= 2
        for comp in dg.components[ell]:
            assert comp.kind in ("isolated", "cycle", "third_kind")
        rep = verify_lambda_solution(dg.solutions[ell], dg.part_graph(ell))
        assert rep.passed and rep.lambda_achieved > 0


def test_path_leaves_never_share_cross_part(c5_pipeline):
    dg = c5_pipeline.decomposed
    V = {v for v, c in enumerate(dg.vertex_classes) if c == "V"}
    W = {v for v, c in enumerate(dg.vertex_classes) if c == "W"}
    for ell in range(3):
        base = Graph(dg.n, frozenset(e for e in dg.parts[ell] if e[0] in V and e[1] in V))
        cross_here = {u if u in V else v for u, v in dg.parts[ell] if (u in V and v in W) or (v in V and u in W)}
        for comp in base.components():
            if len(comp) < 2:
                continue
            leaves = [v for v in comp if base.degree(v) == 1]
            if len(leaves) == 2:
                assert not set(leaves) <= cross_here


def test_decomposed_text_roundtrip(c5_pipeline):
    dg = c5_pipeline.decomposed
    back = parse_decomposed(decomposed_to_text(dg))
    assert back.parts == dg.parts and back.vertex_classes == dg.vertex_classes
    assert back.lambda_achieved == pytest.approx(dg.lambda_achieved)
    with pytest.raises(ValueError):
        parse_decomposed("p 2 1\n0 1 4\n")


def test_xlow_text_roundtrip(c5_pipeline):
    dg = c5_pipeline.decomposed
    text = xlow_to_text(dg, c5_pipeline.coloring, 0.025, 0.002)
    X, back = parse_xlow(text)
    assert X.n == dg.n + 3 and back.parts == dg.parts
    with pytest.raises(ValueError):
        parse_xlow("xlow eps 0.1\n")


# ---------------------------------------------------------------- pipeline


def test_pipeline_c5_counts(c5_pipeline):
    rep = c5_pipeline.report
    assert rep["input_3_colorable"] is True
    assert rep["final_edges"] == c5_pipeline.decomposed.graph.m
    assert rep["scale"] == pytest.approx(rep["final_edges"] * (0.1 + 1 / 6))
    col = c5_pipeline.coloring
    assert violations(c5_pipeline.decomposed.graph, col, 4) == 0


def test_pipeline_k4_not_colourable():
    res = full_pipeline(complete_graph(4), 0.1)
    assert res.report["input_3_colorable"] is False and res.coloring is None
    assert find_legal_coloring(res.stages["apex"], 4) is None


def test_pipeline_empty_graph():
    res = full_pipeline(Graph(3), 0.1)
    assert res.decomposed.graph.m == 0 and not res.hamiltonian.terms
    assert res.report["isolated_removed"] == 3
    assert enumerate_min_energy(res.hamiltonian)[0] == 0


def test_pipeline_rejects_bad_coloring():
    with pytest.raises(StageError):
        full_pipeline(cycle_graph(5), 0.1, coloring=[0, 0, 1, 2, 1])


def test_cleanup_isolated():
    G = Graph.from_edges(4, [(1, 3)])
    sub, kept = cleanup_isolated(G)
    assert kept == [1, 3] and sub.m == 1


@pytest.mark.parametrize("G,colorable", [(cycle_graph(5), True), (complete_graph(4), False),
                                         (Graph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)]), True)])
def test_stage_audit_preserves_colourability(G, colorable):
    res = full_pipeline(G, 0.1, audit=False)
    st = res.stages
    audit = stage_audit(st["cleaned"], st["cloud"], st["diamond"], st["base"], st["apex"], st["cloud_w"], st["gadget"])
    fracs = [a["min_violation_fraction"] for a in audit if a["min_violation_fraction"] is not None]
    assert fracs
    if colorable:
        assert all(f == 0 for f in fracs)
    else:
        assert all(f > 0 for f in fracs)
