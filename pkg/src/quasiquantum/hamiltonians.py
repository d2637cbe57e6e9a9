"""Local Hamiltonians, energies of quasi-quantum states and the witness verifier.

Energies are evaluated through marginals only: each term ``h`` on sites ``s``
contributes ``Tr(h X_s)``. Precomputing ``c[a] = Tr(h D_a)`` for every local
string turns this into a dot product with the marginal table.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .qq_state import (
    DEFAULT_PSD_TOL,
    Distribution,
    MixtureDistribution,
    ProductDistribution,
    SiteDistribution,
    SparseDistribution,
    UniformDistribution,
    is_k_local_qq,
    symmetrize_colors,
)
from .sic_basis import SicBasis, build_sic_basis, check_hermitian, operator_norm

MAX_DENSE_QUBITS = 10
MAX_ENUMERATED_SITES = 12

A0_PROBS = np.array([1.0, 0.0, 0.0, 0.0])
A1_PROBS = np.array([0.0, 1.0, 1.0, 1.0]) / 3.0


@dataclass(frozen=True, eq=False)
class LocalTerm:
    support: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        support = tuple(int(i) for i in self.support)
        if list(support) != sorted(set(support)):
            raise ValueError(f"term support must be sorted and distinct: {support}")
        matrix = check_hermitian(np.asarray(self.matrix, dtype=complex))
        if matrix.shape != (2 ** len(support),) * 2:
            raise ValueError("term matrix does not match its support size")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", matrix)

    @property
    def norm(self) -> float:
        return operator_norm(self.matrix)


@dataclass(eq=False)
class LocalHamiltonian:
    n: int
    k: int
    terms: list[LocalTerm] = field(default_factory=list)

    def __post_init__(self) -> None:
        for t in self.terms:
            if len(t.support) > self.k:
                raise ValueError(f"term on {t.support} exceeds locality {self.k}")
            if t.support and t.support[-1] >= self.n:
                raise ValueError(f"term on {t.support} exceeds n={self.n}")
        self._costs: list[np.ndarray] | None = None

    def symbol_costs(self) -> list[np.ndarray]:
        """Per term, the table ``Tr(h D_a)`` over local strings ``a``."""
        if self._costs is None:
            self._costs = [dual_expectations(t.matrix) for t in self.terms]
        return self._costs


@dataclass
class EnergyReport:
    energy: float
    scale: float
    per_term: list[float]


def dual_expectations(op: np.ndarray, basis: SicBasis | None = None) -> np.ndarray:
    """Table of ``Tr(op D_a)`` over all strings ``a`` on the operator's qubits."""
    basis = basis or build_sic_basis()
    dim = op.shape[0]
    m = int(round(math.log2(dim)))
    if m == 0:
        return np.array(complex(op[0, 0]).real)
    T = np.asarray(op, dtype=complex).reshape((2,) * (2 * m))
    T = np.transpose(T, [x for j in range(m) for x in (j, m + j)])
    for _ in range(m):
        T = np.tensordot(T, basis.D, axes=([0, 1], [2, 1]))
    return T.real


def scale(H: LocalHamiltonian) -> float:
    return float(sum(t.norm for t in H.terms))


def energy(H: LocalHamiltonian, mu: Distribution) -> EnergyReport:
    if mu.n != H.n:
        raise ValueError(f"distribution has n={mu.n} but the Hamiltonian has n={H.n}")
    per_term = []
    for t, cost in zip(H.terms, H.symbol_costs()):
        per_term.append(float(np.sum(mu.marginal(t.support) * cost)))
    return EnergyReport(float(sum(per_term)), scale(H), per_term)


def assignment_energies(H: LocalHamiltonian, strings: np.ndarray) -> np.ndarray:
    """Energy of each point mass ``D_a`` for the rows ``a`` of ``strings``."""
    strings = np.asarray(strings, dtype=np.int64)
    out = np.zeros(strings.shape[0])
    for t, cost in zip(H.terms, H.symbol_costs()):
        if not t.support:
            out += float(cost)
            continue
        idx = np.zeros(strings.shape[0], dtype=np.int64)
        for i in t.support:
            idx = idx * 4 + strings[:, i]
        out += cost.reshape(-1)[idx]
    return out


def embed_operator(op: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Lift an operator on ``sites`` to ``n`` qubits, identity elsewhere."""
    sites = list(sites)
    rest = [i for i in range(n) if i not in sites]
    full = np.kron(op, np.eye(2 ** len(rest))).reshape((2,) * (2 * n))
    order = sites + rest
    inv = np.argsort(order)
    perm = list(inv) + [n + p for p in inv]
    return np.transpose(full, perm).reshape(2**n, 2**n)


def dense_hamiltonian(H: LocalHamiltonian) -> np.ndarray:
    if H.n > MAX_DENSE_QUBITS:
        raise ValueError(f"n={H.n} exceeds the dense guard {MAX_DENSE_QUBITS}")
    out = np.zeros((2**H.n, 2**H.n), dtype=complex)
    for t in H.terms:
        out += embed_operator(t.matrix, t.support, H.n)
    return out


def quantum_ground_energy(H: LocalHamiltonian) -> float:
    return float(np.linalg.eigvalsh(dense_hamiltonian(H))[0])


# ---------------------------------------------------------------- builders


def coloring_term(basis: SicBasis | None = None) -> np.ndarray:
    """``sum_a F_a (x) F_a``: its dual expectation counts equal colors."""
    basis = basis or build_sic_basis()
    return sum(np.kron(basis.F[a], basis.F[a]) for a in range(4))


def _graph_edges(G: Any) -> list[tuple[int, int]]:
    return sorted((min(u, v), max(u, v)) for u, v in G.edges)


def coloring_hamiltonian(G: Any, basis: SicBasis | None = None) -> LocalHamiltonian:
    h = coloring_term(basis)
    return LocalHamiltonian(G.n, 2, [LocalTerm((u, v), h) for u, v in _graph_edges(G)])


def diagonal_csp_hamiltonian(
    n: int, forbidden: Iterable[tuple[Sequence[int], Sequence[str]]]
) -> LocalHamiltonian:
    """One diagonal projector per constraint, onto its forbidden bit patterns."""
    terms = []
    k = 0
    for support, patterns in forbidden:
        support = tuple(int(i) for i in support)
        diag = np.zeros(2 ** len(support))
        for pat in patterns:
            if len(pat) != len(support) or set(pat) - {"0", "1"}:
                raise ValueError(f"pattern {pat!r} does not match support {support}")
            diag[int(pat, 2)] = 1.0
        order = np.argsort(support)
        if list(order) != list(range(len(support))):
            mat = embed_operator(np.diag(diag), list(np.argsort(order)), len(support))
            support = tuple(sorted(support))
        else:
            mat = np.diag(diag)
        terms.append(LocalTerm(support, mat))
        k = max(k, len(support))
    return LocalHamiltonian(n, max(k, 1), terms)


def triangle_csp_hamiltonian() -> LocalHamiltonian:
    """Equality penalties on the three edges of a triangle; classically frustrated."""
    return diagonal_csp_hamiltonian(3, [((i, j), ["00", "11"]) for i, j in [(0, 1), (1, 2), (0, 2)]])


def triangle_state() -> np.ndarray:
    """The non-physical operator with every pair marginal equal to (|01><01| + |10><10|)/2."""
    X = np.zeros((8, 8), dtype=complex)
    for s in ("110", "011", "101"):
        X[int(s, 2), int(s, 2)] = 0.5
    X[7, 7] = -0.5
    return X


def scapegoat_hamiltonian(G: Any, xi: float, basis: SicBasis | None = None) -> LocalHamiltonian:
    """Coloring terms switched by three scapegoat qubits plus the scapegoat penalty.

    ``G`` must expose ``n``, ``graph.edges`` and ``parts`` (three edge sets).
    """
    basis = basis or build_sic_basis()
    if not 0.0 < xi < 1.0:
        raise ValueError("xi must lie in (0, 1)")
    edges = set(_graph_edges(G.graph))
    covered: set[tuple[int, int]] = set()
    n = G.n
    h = coloring_term(basis)
    F0 = basis.F[0]
    terms = []
    for ell, part in enumerate(G.parts):
        for u, v in sorted((min(e), max(e)) for e in part):
            terms.append(LocalTerm((u, v, n + ell), np.kron(h, F0)))
            covered.add((u, v))
    if covered != edges:
        raise ValueError("the edge partition does not cover the graph")
    m = len(edges)
    if m:
        penalty = xi * m * (np.eye(8) - np.kron(np.kron(F0, F0), F0))
        terms.append(LocalTerm((n, n + 1, n + 2), penalty))
    return LocalHamiltonian(n + 3, 3, terms)


def soundness_thresholds(num_edges: int, xi: float, eps: float, delta: float) -> dict[str, float]:
    """Energy thresholds for a scapegoat instance, absolute and relative to its scale."""
    L = num_edges * (xi + 1.0 / 6.0)
    xi_b = xi / (xi + 1.0 / 6.0)
    xi_a = xi_b * (1.0 - eps * delta)
    return {"scale": L, "xi_b": xi_b, "xi_a": xi_a, "b": xi_b * L, "a": xi_a * L}


def build_xlow(G: Any, coloring: Sequence[int], eps: float, delta: float) -> MixtureDistribution:
    """Low-energy witness for a decomposed graph with a legal 4-coloring.

    Mixture of the maximally mixed bulk with all scapegoats in ``A1``, the
    symmetrized coloring with all scapegoats in ``A0``, and for each part the
    part's lambda-solution with only that part's scapegoat in ``A0``.
    """
    n = G.n
    coloring = [int(c) for c in coloring]
    if len(coloring) != n or any(c < 0 or c > 3 for c in coloring):
        raise ValueError("coloring must assign a color in 0..3 to every vertex")
    bad = [(u, v) for u, v in _graph_edges(G.graph) if coloring[u] == coloring[v]]
    if bad:
        raise ValueError(f"coloring is not legal, e.g. on edge {bad[0]}")
    if any(s is None for s in G.solutions):
        raise ValueError("lambda-solutions must be attached to all three parts")
    if not (0 <= eps <= 1 and 0 <= delta <= 1):
        raise ValueError("eps and delta must lie in [0, 1]")
    scapegoats = (n, n + 1, n + 2)
    a0 = SiteDistribution(A0_PROBS)
    a1 = SiteDistribution(A1_PROBS)
    bulk = tuple(range(n))

    def with_scapegoats(body: Distribution, active: Sequence[bool]) -> ProductDistribution:
        factors = [body] + [a0 if act else a1 for act in active]
        placements = [bulk] + [(s,) for s in scapegoats]
        return ProductDistribution(n + 3, factors, placements)

    x_sym = symmetrize_colors(SparseDistribution.point_mass(coloring))
    comps: list[Distribution] = [
        with_scapegoats(UniformDistribution(n), (False, False, False)),
        with_scapegoats(x_sym, (True, True, True)),
    ]
    weights = [1.0 - eps, eps * delta]
    for ell in range(3):
        active = tuple(j == ell for j in range(3))
        comps.append(with_scapegoats(G.solutions[ell].distribution, active))
        weights.append(eps * (1.0 - delta) / 3.0)
    return MixtureDistribution(comps, np.array(weights))


@dataclass
class Verdict:
    accepted: bool
    reason: str | None
    energy: float
    min_eigenvalue: float
    violations: list[tuple[tuple[int, ...], float]]

    def __bool__(self) -> bool:
        return self.accepted


def verify_witness(
    H: LocalHamiltonian, a: float, mu: Distribution, tol: float = DEFAULT_PSD_TOL, k: int | None = None
) -> Verdict:
    """Accept iff ``mu`` is k-locally valid (default ``k = H.k``) and its energy is at most ``a``."""
    if mu.n != H.n:
        raise ValueError(f"witness has n={mu.n} but the Hamiltonian has n={H.n}")
    k = min(H.k if k is None else k, H.n)
    if k < H.k:
        raise ValueError(f"k={k} is below the Hamiltonian locality {H.k}")
    cert = is_k_local_qq(mu, k, tol)
    e = energy(H, mu).energy
    if not cert.valid:
        return Verdict(False, "not-qq", e, cert.min_eigenvalue, cert.violations)
    if e > a + tol:
        return Verdict(False, "energy", e, cert.min_eigenvalue, [])
    return Verdict(True, None, e, cert.min_eigenvalue, [])


def enumerate_min_energy(H: LocalHamiltonian, chunk: int = 1 << 18) -> tuple[float, np.ndarray]:
    """Minimum point-mass energy over all ``4^n`` assignments."""
    if H.n > MAX_ENUMERATED_SITES:
        raise ValueError(f"n={H.n} exceeds the enumeration guard {MAX_ENUMERATED_SITES}")
    total = 4**H.n
    best = math.inf
    best_row = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        rows = np.zeros((idx.size, H.n), dtype=np.int64)
        rest = idx.copy()
        for i in range(H.n - 1, -1, -1):
            rows[:, i] = rest % 4
            rest //= 4
        e = assignment_energies(H, rows)
        j = int(np.argmin(e))
        if e[j] < best:
            best, best_row = float(e[j]), rows[j]
    return best, best_row


# ---------------------------------------------------------------- text format


def hamiltonian_to_text(H: LocalHamiltonian) -> str:
    lines = [f"n {H.n} k {H.k}"]
    for t in H.terms:
        lines.append("support " + " ".join(str(i) for i in t.support))
        for z in t.matrix.reshape(-1):
            lines.append(f"{float(z.real)!r} {float(z.imag)!r}")
    return "\n".join(lines) + "\n"


def parse_hamiltonian(text: str) -> LocalHamiltonian:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty Hamiltonian file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "n" or head[2] != "k":
        raise ValueError(f"bad header {lines[0]!r}")
    n, k = int(head[1]), int(head[3])
    terms = []
    pos = 1
    while pos < len(lines):
        parts = lines[pos].split()
        if not parts or parts[0] != "support":
            raise ValueError(f"expected a support line, got {lines[pos]!r}")
        support = tuple(int(x) for x in parts[1:])
        dim = 2 ** len(support)
        body = lines[pos + 1 : pos + 1 + dim * dim]
        if len(body) != dim * dim:
            raise ValueError(f"term on {support} is truncated")
        vals = []
        for ln in body:
            re_im = ln.split()
            if len(re_im) != 2:
                raise ValueError(f"bad matrix entry {ln!r}")
            vals.append(complex(float(re_im[0]), float(re_im[1])))
        terms.append(LocalTerm(support, np.array(vals).reshape(dim, dim)))
        pos += 1 + dim * dim
    return LocalHamiltonian(n, k, terms)


def all_strings(n: int) -> np.ndarray:
    return np.array(list(itertools.product(range(4), repeat=n)), dtype=np.int64).reshape(-1, n)
