import itertools

import numpy as np
import pytest

from quasiquantum.graphs import Graph, cycle_graph
from quasiquantum.hamiltonians import (
    LocalHamiltonian,
    LocalTerm,
    assignment_energies,
    build_xlow,
    coloring_hamiltonian,
    coloring_term,
    dense_hamiltonian,
    diagonal_csp_hamiltonian,
    energy,
    enumerate_min_energy,
    hamiltonian_to_text,
    parse_hamiltonian,
    quantum_ground_energy,
    scale,
    scapegoat_hamiltonian,
    soundness_thresholds,
    triangle_csp_hamiltonian,
    triangle_state,
    verify_witness,
)
from quasiquantum.qq_state import (
    MixtureDistribution,
    SparseDistribution,
    UniformDistribution,
    assemble_dense,
    distribution_of_state,
    is_k_local_qq,
    marginal_operator,
)
from quasiquantum.reductions import DecomposedGraph, euler_split
from quasiquantum.sic_basis import build_sic_basis, singlet_projector, tensor_basis_element

TRIANGLE = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def heisenberg_dense(n, edges):
    # independent route: build sum of (1 - singlet)/3 with explicit kron products
    P = singlet_projector()
    out = np.zeros((2**n, 2**n), dtype=complex)
    for u, v in edges:
        # swap qubits so that u, v are adjacent is avoided by summing over the computational basis
        for a, b, c, d in itertools.product(range(2), repeat=4):
            coef = ((np.eye(4) - P) / 3)[2 * a + b, 2 * c + d]
            if coef == 0:
                continue
            for rest in range(2 ** n):
                bits = [(rest >> (n - 1 - i)) & 1 for i in range(n)]
                if bits[u] != c or bits[v] != d:
                    continue
                new = list(bits)
                new[u], new[v] = a, b
                out[int("".join(map(str, new)), 2), rest] += coef
    return out


def test_coloring_term():
    h = coloring_term()
    assert np.allclose(h, (np.eye(4) - singlet_projector()) / 3, atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(h), [0, 1 / 3, 1 / 3, 1 / 3], atol=1e-12)
    b = build_sic_basis()
    for a, c in itertools.product(range(4), repeat=2):
        val = np.trace(h @ tensor_basis_element(b, "D", (a, c))).real
        assert val == pytest.approx(float(a == c), abs=1e-12)


def test_scale_examples(k5_decomposed):
    assert scale(coloring_hamiltonian(Graph.from_edges(2, [(0, 1)]))) == pytest.approx(1 / 3)
    H = scapegoat_hamiltonian(k5_decomposed, 0.1)
    assert scale(H) == pytest.approx(10 * (0.1 + 1 / 6), abs=1e-12)
    assert scale(LocalHamiltonian(3, 2, [])) == 0


def test_energy_examples():
    mu = distribution_of_state(triangle_state())
    assert energy(triangle_csp_hamiltonian(), mu).energy == pytest.approx(0, abs=1e-12)
    edge = coloring_hamiltonian(Graph.from_edges(2, [(0, 1)]))
    assert energy(edge, UniformDistribution(2)).energy == pytest.approx(0.25, abs=1e-12)
    H4 = coloring_hamiltonian(cycle_graph(4))
    assert energy(H4, SparseDistribution.point_mass("0101")).energy == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        energy(H4, UniformDistribution(3))


def test_energy_report_and_dense_consistency():
    rng = np.random.default_rng(1)
    H = coloring_hamiltonian(cycle_graph(5))
    for _ in range(10):
        strings = rng.integers(0, 4, size=(20, 5))
        w = rng.random(20)
        mu = SparseDistribution(5, strings, w / w.sum())
        rep = energy(H, mu)
        assert rep.energy == pytest.approx(sum(rep.per_term))
        dense = np.trace(assemble_dense(mu) @ dense_hamiltonian(H)).real
        assert rep.energy == pytest.approx(dense, abs=1e-8)


def test_energy_affine():
    H = triangle_csp_hamiltonian()
    m1 = SparseDistribution.point_mass("012")
    m2 = distribution_of_state(triangle_state())
    t = 0.3
    mix = MixtureDistribution([m1, m2], np.array([t, 1 - t]))
    assert energy(H, mix).energy == pytest.approx(t * energy(H, m1).energy + (1 - t) * energy(H, m2).energy, abs=1e-9)


def test_energy_bounded_by_scale_for_valid_states():
    rng = np.random.default_rng(2)
    H = coloring_hamiltonian(cycle_graph(4))
    for _ in range(20):
        M = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        rho = M @ M.conj().T
        mu = distribution_of_state(rho / np.trace(rho).real)
        assert abs(energy(H, mu).energy) <= scale(H) + 1e-6


def test_diagonal_csp():
    H = triangle_csp_hamiltonian()
    # independent route: count equal neighbours on each of the 8 bit strings
    diag = [sum(int(f"{x:03b}"[i] == f"{x:03b}"[j]) for i, j in [(0, 1), (1, 2), (0, 2)]) for x in range(8)]
    assert np.allclose(np.diag(dense_hamiltonian(H)).real, diag)
    assert min(diag) == 1
    single = diagonal_csp_hamiltonian(2, [((0, 1), ["00"])])
    assert np.allclose(np.linalg.eigvalsh(single.terms[0].matrix), [0, 0, 0, 1])
    clause = diagonal_csp_hamiltonian(3, [((0, 1, 2), ["001"])])
    assert np.linalg.matrix_rank(clause.terms[0].matrix) == 1
    with pytest.raises(ValueError):
        diagonal_csp_hamiltonian(2, [((0, 1), ["0"])])


def test_quantum_ground_energy():
    assert quantum_ground_energy(triangle_csp_hamiltonian()) == pytest.approx(1)
    assert quantum_ground_energy(coloring_hamiltonian(Graph.from_edges(2, [(0, 1)]))) == pytest.approx(0, abs=1e-12)
    H = coloring_hamiltonian(TRIANGLE)
    ref = np.linalg.eigvalsh(heisenberg_dense(3, TRIANGLE.edge_list))[0]
    assert quantum_ground_energy(H) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(ValueError):
        quantum_ground_energy(LocalHamiltonian(11, 1, []))


def test_verify_witness_examples():
    H = triangle_csp_hamiltonian()
    mu = distribution_of_state(triangle_state())
    assert verify_witness(H, 0.0, mu).accepted
    v = verify_witness(H, 0.0, SparseDistribution.point_mass("000"))
    assert not v.accepted and v.reason == "not-qq"
    v = verify_witness(H, -1.0, mu)
    assert not v.accepted and v.reason == "energy"
    with pytest.raises(ValueError):
        verify_witness(H, 0.0, UniformDistribution(2))


def test_scapegoat_structure(k5_decomposed):
    H = scapegoat_hamiltonian(k5_decomposed, 0.2)
    assert H.n == 8 and H.k == 3 and len(H.terms) == 11
    with pytest.raises(ValueError):
        scapegoat_hamiltonian(k5_decomposed, 1.5)


def test_scapegoat_assignment_energies():
    G = cycle_graph(4)
    dg = DecomposedGraph(G, tuple(frozenset(p) for p in euler_split(G)), ("V",) * 4)
    xi = 0.1
    H = scapegoat_hamiltonian(dg, xi)
    assert assignment_energies(H, np.array([[0, 1, 0, 1, 0, 0, 0]]))[0] == pytest.approx(0, abs=1e-12)
    rows = np.array([list(a) + list(b) for a in itertools.product(range(4), repeat=4)
                     for b in itertools.product(range(4), repeat=3) if b != (0, 0, 0)])
    assert assignment_energies(H, rows).min() >= xi * 4 - 1e-12


def test_soundness_sweep_non_colorable(k5_decomposed):
    xi = 0.1
    H = scapegoat_hamiltonian(k5_decomposed, xi)
    best, _ = enumerate_min_energy(H)
    assert best >= xi * 10 - 1e-12


def test_thresholds():
    th = soundness_thresholds(10, 0.1, 0.025, 0.002)
    assert th["xi_b"] == pytest.approx(0.1 / (0.1 + 1 / 6))
    assert th["b"] == pytest.approx(1.0)
    assert th["a"] == pytest.approx(1.0 * (1 - 0.025 * 0.002))


def test_xlow_energy_and_scapegoat_triple(c5_pipeline):
    dg = c5_pipeline.decomposed
    eps, delta = 1 / 40, c5_pipeline.report["delta"]
    X = build_xlow(dg, c5_pipeline.coloring, eps, delta)
    H = c5_pipeline.hamiltonian
    assert energy(H, X).energy == pytest.approx(0.1 * dg.graph.m * (1 - eps * delta), abs=1e-8)
    # the scapegoat triple carries the |001>-type coefficient -4 eps delta
    op = marginal_operator(X, (dg.n, dg.n + 1, dg.n + 2))
    assert np.linalg.eigvalsh(op)[0] == pytest.approx(-4 * eps * delta, abs=1e-12)


def test_xlow_rejects_bad_input(c5_pipeline):
    dg = c5_pipeline.decomposed
    with pytest.raises(ValueError):
        build_xlow(dg, [0] * dg.n, 0.025, 0.002)


def test_text_roundtrip():
    H = coloring_hamiltonian(TRIANGLE)
    back = parse_hamiltonian(hamiltonian_to_text(H))
    assert back.n == 3 and back.k == 2
    assert all(np.allclose(a.matrix, b.matrix) for a, b in zip(H.terms, back.terms))
    with pytest.raises(ValueError):
        parse_hamiltonian("n 2 k 2\nsupport 0 1\n1 0\n")
    with pytest.raises(ValueError):
        LocalHamiltonian(2, 1, [LocalTerm((0, 1), np.eye(4))])
