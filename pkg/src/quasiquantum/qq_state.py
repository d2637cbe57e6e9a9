"""Quasi-quantum states as probability distributions over SIC outcome strings.

A state on ``n`` qubits is a distribution ``mu`` over ``{0,1,2,3}^n``; the operator
it describes is ``X = sum_a mu(a) D_a``. Global positivity is built into the
representation, so validity reduces to checking that the local marginal
operators ``X_I`` are positive semidefinite.

Besides the explicit :class:`SparseDistribution`, a few structured
distributions (uniform, products, mixtures, restrictions, color symmetrization)
implement the same ``marginal`` interface so that states on many qubits can be
checked locally without ever listing their support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .sic_basis import DEFAULT_PSD_TOL, SicBasis, build_sic_basis

MAX_MARGINAL_SITES = 12
MAX_LOCALITY = 6
MAX_DENSE_SITES = 10
MAX_CARATHEODORY_M = 200_000
PRUNE_THRESHOLD = 1e-12
SUM_TOL = 1e-9
PIVOT_TOL = 1e-11

COLOR_PERMUTATIONS = np.array(list(itertools.permutations(range(4))), dtype=np.int64)


def _check_sites(sites: Iterable[int], n: int, limit: int = MAX_MARGINAL_SITES) -> tuple[int, ...]:
    sites = tuple(int(i) for i in sites)
    if len(set(sites)) != len(sites):
        raise ValueError(f"repeated site in {sites}")
    if any(i < 0 or i >= n for i in sites):
        raise ValueError(f"site out of range in {sites} for n={n}")
    if len(sites) > limit:
        raise ValueError(f"{len(sites)} sites exceed the {limit}-site guard")
    return sites


def parse_symbols(string: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(string, str):
        out = tuple(int(ch) for ch in string)
    else:
        out = tuple(int(s) for s in string)
    if any(s < 0 or s > 3 for s in out):
        raise ValueError(f"symbols must lie in 0..3: {string!r}")
    return out


def format_symbols(symbols: Sequence[int]) -> str:
    return "".join(str(int(s)) for s in symbols)


class Distribution:
    """Common interface: a site count ``n`` and exact marginal tables."""

    n: int

    def marginal(self, sites: Sequence[int]) -> np.ndarray:
        """Marginal table of shape ``(4,) * len(sites)`` in the given site order."""
        sites = _check_sites(sites, self.n)
        cache = self.__dict__.setdefault("_marginal_cache", {})
        hit = cache.get(sites)
        if hit is None:
            hit = self._marginal(sites)
            hit.setflags(write=False)
            cache[sites] = hit
        return hit

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` strings as an integer array of shape ``(size, n)``."""
        raise NotImplementedError(f"{type(self).__name__} does not support sampling")


# ---------------------------------------------------------------- sparse


class SparseDistribution(Distribution):
    """Explicit finite distribution: support strings with positive weights."""

    def __init__(self, n: int, strings: np.ndarray, weights: np.ndarray, *, validate: bool = True):
        if n < 1:
            raise ValueError("n must be at least 1")
        strings = np.asarray(strings, dtype=np.int8).reshape(-1, n)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if strings.shape[0] != weights.shape[0]:
            raise ValueError("strings and weights differ in length")
        if validate:
            if strings.size and (strings.min() < 0 or strings.max() > 3):
                raise ValueError("symbols must lie in 0..3")
            if np.any(weights <= 0):
                raise ValueError("weights must be strictly positive")
            total = float(weights.sum())
            if abs(total - 1.0) > SUM_TOL:
                raise ValueError(f"weights sum to {total!r}, not 1")
            # merge duplicate strings
            uniq, inverse = np.unique(strings, axis=0, return_inverse=True)
            if uniq.shape[0] != strings.shape[0]:
                weights = np.bincount(inverse.reshape(-1), weights=weights, minlength=uniq.shape[0])
                strings = uniq
        self.n = int(n)
        self.strings = strings
        self.weights = weights
        self.strings.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def from_dict(cls, mapping: Mapping[str | Sequence[int], float], n: int | None = None) -> "SparseDistribution":
        keys = [parse_symbols(k) for k in mapping]
        if not keys:
            raise ValueError("empty distribution")
        n = len(keys[0]) if n is None else n
        if any(len(k) != n for k in keys):
            raise ValueError("all strings must have length n")
        return cls(n, np.array(keys, dtype=np.int8), np.array(list(mapping.values()), dtype=float))

    @classmethod
    def point_mass(cls, string: str | Sequence[int]) -> "SparseDistribution":
        sym = parse_symbols(string)
        return cls(len(sym), np.array([sym], dtype=np.int8), np.array([1.0]))

    @classmethod
    def from_weights(cls, n: int, strings: np.ndarray, weights: np.ndarray) -> "SparseDistribution":
        """Build from possibly unnormalized weights, pruning tiny entries and renormalizing."""
        weights = np.asarray(weights, dtype=float)
        keep = weights > PRUNE_THRESHOLD
        if not np.any(keep):
            raise ValueError("no weight above the pruning threshold")
        w = weights[keep]
        return cls(n, np.asarray(strings)[keep], w / w.sum())

    @classmethod
    def from_table(cls, table: np.ndarray) -> "SparseDistribution":
        table = np.asarray(table, dtype=float)
        n = table.ndim
        flat = table.reshape(-1)
        idx = np.nonzero(flat > PRUNE_THRESHOLD)[0]
        strings = np.array(np.unravel_index(idx, (4,) * n), dtype=np.int8).T
        return cls.from_weights(n, strings, flat[idx])

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    @property
    def support_size(self) -> int:
        return len(self)

    def items(self) -> Iterator[tuple[str, float]]:
        for row, w in zip(self.strings, self.weights):
            yield format_symbols(row), float(w)

    def to_dict(self) -> dict[str, float]:
        return dict(self.items())

    def weight(self, string: str | Sequence[int]) -> float:
        sym = np.array(parse_symbols(string), dtype=np.int8)
        hit = np.all(self.strings == sym[None, :], axis=1)
        return float(self.weights[hit].sum())

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        k = len(sites)
        if k == 0:
            return np.array(float(self.weights.sum()))
        idx = np.zeros(len(self), dtype=np.int64)
        for i in sites:
            idx = idx * 4 + self.strings[:, i]
        return np.bincount(idx, weights=self.weights, minlength=4**k).reshape((4,) * k)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        rows = rng.choice(len(self), size=size, p=self.weights / self.weights.sum())
        return self.strings[rows].astype(np.int64)

    def to_text(self) -> str:
        order = np.lexsort(self.strings.T[::-1]) if self.n else np.arange(len(self))
        lines = [f"n {self.n}"]
        for r in order:
            lines.append(f"{format_symbols(self.strings[r])} {float(self.weights[r])!r}")
        return "\n".join(lines) + "\n"


def parse_distribution(text: str) -> SparseDistribution:
    """Parse the ``n <n>`` / ``<symbols> <weight>`` text format."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty distribution file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise ValueError(f"bad header {lines[0]!r}")
    n = int(head[1])
    strings, weights = [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad line {ln!r}")
        sym = parse_symbols(parts[0])
        if len(sym) != n:
            raise ValueError(f"string {parts[0]!r} does not have length {n}")
        strings.append(sym)
        weights.append(float(parts[1]))
    if not strings:
        raise ValueError("distribution has empty support")
    return SparseDistribution(n, np.array(strings, dtype=np.int8), np.array(weights))


# ---------------------------------------------------------------- structured


@dataclass(eq=False)
class UniformDistribution(Distribution):
    """Uniform distribution over all ``4^n`` strings, i.e. the maximally mixed state."""

    n: int

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        k = len(sites)
        return np.full((4,) * k, 4.0**-k)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, 4, size=(size, self.n))


@dataclass(eq=False)
class SiteDistribution(Distribution):
    """Single-site distribution given by a probability vector over the four symbols."""

    probs: np.ndarray
    n: int = 1

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (4,) or np.any(self.probs < 0) or abs(self.probs.sum() - 1) > SUM_TOL:
            raise ValueError("site distribution must be a probability vector of length 4")

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        return self.probs.copy() if sites else np.array(1.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(4, size=(size, 1), p=self.probs)


@dataclass(eq=False)
class ProductDistribution(Distribution):
    """Independent factors placed on disjoint site sets.

    ``placements[f]`` lists the global sites of factor ``f`` in its local order.
    Sites not covered by any factor are uniform.
    """

    n: int
    factors: list[Distribution]
    placements: list[tuple[int, ...]]

    def __post_init__(self) -> None:
        self.placements = [tuple(int(s) for s in p) for p in self.placements]
        owner = -np.ones(self.n, dtype=np.int64)
        local = np.zeros(self.n, dtype=np.int64)
        for f, (fac, place) in enumerate(zip(self.factors, self.placements)):
            if len(place) != fac.n:
                raise ValueError(f"factor {f} has {fac.n} sites but placement of length {len(place)}")
            for j, s in enumerate(place):
                if s < 0 or s >= self.n:
                    raise ValueError(f"site {s} out of range")
                if owner[s] >= 0:
                    raise ValueError(f"site {s} covered twice")
                owner[s] = f
                local[s] = j
        self._owner = owner
        self._local = local

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        groups: dict[int, list[int]] = {}
        for pos, s in enumerate(sites):
            groups.setdefault(int(self._owner[s]), []).append(pos)
        result = np.array(1.0)
        order: list[int] = []
        for f, positions in groups.items():
            if f < 0:
                table = np.full((4,) * len(positions), 4.0 ** -len(positions))
            else:
                table = self.factors[f].marginal([int(self._local[sites[p]]) for p in positions])
            result = np.multiply.outer(result, table)
            order.extend(positions)
        inv = np.argsort(order)
        return np.transpose(result, inv) if len(order) > 1 else result

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        out = rng.integers(0, 4, size=(size, self.n))
        for fac, place in zip(self.factors, self.placements):
            out[:, list(place)] = fac.sample(rng, size)
        return out


@dataclass(eq=False)
class MixtureDistribution(Distribution):
    """Convex combination of distributions on the same sites."""

    components: list[Distribution]
    weights: np.ndarray
    n: int = field(init=False)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.components) != len(self.weights) or not self.components:
            raise ValueError("need one weight per component")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1) > SUM_TOL:
            raise ValueError("mixture weights must be a probability vector")
        ns = {c.n for c in self.components}
        if len(ns) != 1:
            raise ValueError("mixture components must share n")
        self.n = ns.pop()

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        out = np.zeros((4,) * len(sites))
        for w, comp in zip(self.weights, self.components):
            if w > 0:
                out = out + w * comp.marginal(sites)
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        which = rng.choice(len(self.components), size=size, p=self.weights / self.weights.sum())
        out = np.zeros((size, self.n), dtype=np.int64)
        for c, comp in enumerate(self.components):
            rows = np.nonzero(which == c)[0]
            if rows.size:
                out[rows] = comp.sample(rng, rows.size)
        return out


@dataclass(eq=False)
class RestrictedDistribution(Distribution):
    """Marginal of ``base`` on ``sites``; site ``i`` here is ``base`` site ``sites[i]``."""

    base: Distribution
    sites: tuple[int, ...]
    n: int = field(init=False)

    def __post_init__(self) -> None:
        self.sites = _check_sites(self.sites, self.base.n, limit=self.base.n)
        self.n = len(self.sites)

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        return self.base.marginal([self.sites[i] for i in sites])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.base.sample(rng, size)[:, list(self.sites)]


def symmetrize_table(table: np.ndarray) -> np.ndarray:
    """Average a marginal table over the 24 simultaneous relabelings of the symbols."""
    k = table.ndim
    if k == 0:
        return np.array(table, dtype=float)
    out = np.zeros_like(table, dtype=float)
    for p in COLOR_PERMUTATIONS:
        out += table[np.ix_(*([p] * k))]
    return out / len(COLOR_PERMUTATIONS)


@dataclass(eq=False)
class ColorSymmetrized(Distribution):
    """Uniform average of ``base`` over all 24 color permutations."""

    base: Distribution
    n: int = field(init=False)

    def __post_init__(self) -> None:
        self.n = self.base.n

    def _marginal(self, sites: tuple[int, ...]) -> np.ndarray:
        return symmetrize_table(self.base.marginal(sites))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        perms = COLOR_PERMUTATIONS[rng.integers(0, 24, size=size)]
        draws = self.base.sample(rng, size)
        return np.take_along_axis(perms, draws, axis=1)


# ---------------------------------------------------------------- marginals


def marginal_distribution(mu: Distribution, I: Sequence[int]) -> np.ndarray:
    return np.array(mu.marginal(I))


def table_to_operator(table: np.ndarray, basis: SicBasis | None = None) -> np.ndarray:
    """``sum_a table[a] D_a`` for a table of shape ``(4,) * k``."""
    basis = basis or build_sic_basis()
    k = table.ndim
    if k == 0:
        return np.array([[complex(table)]])
    T = np.asarray(table, dtype=complex)
    for _ in range(k):
        T = np.tensordot(T, basis.D, axes=([0], [0]))
    # axes are now (i1, j1, ..., ik, jk)
    perm = list(range(0, 2 * k, 2)) + list(range(1, 2 * k, 2))
    return np.transpose(T, perm).reshape(2**k, 2**k)


def tables_to_operators(tables: np.ndarray, basis: SicBasis | None = None) -> np.ndarray:
    """Batched :func:`table_to_operator` for tables stacked on the leading axis."""
    basis = basis or build_sic_basis()
    k = tables.ndim - 1
    T = np.asarray(tables, dtype=complex)
    for _ in range(k):
        T = np.tensordot(T, basis.D, axes=([1], [0]))
    perm = [0] + list(range(1, 2 * k + 1, 2)) + list(range(2, 2 * k + 1, 2))
    return np.transpose(T, perm).reshape(tables.shape[0], 2**k, 2**k)


def marginal_operator(mu: Distribution, I: Sequence[int], basis: SicBasis | None = None) -> np.ndarray:
    return table_to_operator(mu.marginal(I), basis)


@dataclass
class QqCertificate:
    valid: bool
    violations: list[tuple[tuple[int, ...], float]]
    min_eigenvalue: float
    worst_subset: tuple[int, ...] | None
    checked: int


def is_k_local_qq(
    mu: Distribution,
    k: int,
    tol: float = DEFAULT_PSD_TOL,
    basis: SicBasis | None = None,
    batch: int = 4096,
) -> QqCertificate:
    """Check every ``k``-subset marginal operator for positivity, in lexicographic order."""
    if k < 1 or k > mu.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={mu.n}")
    if k > MAX_LOCALITY:
        raise ValueError(f"k={k} exceeds the locality guard {MAX_LOCALITY}")
    basis = basis or build_sic_basis()
    violations: list[tuple[tuple[int, ...], float]] = []
    worst = math.inf
    worst_subset = None
    count = 0
    subsets = itertools.combinations(range(mu.n), k)
    while True:
        chunk = list(itertools.islice(subsets, batch))
        if not chunk:
            break
        tables = np.stack([mu.marginal(I) for I in chunk])
        mins = np.linalg.eigvalsh(tables_to_operators(tables, basis))[:, 0]
        count += len(chunk)
        j = int(np.argmin(mins))
        if mins[j] < worst:
            worst, worst_subset = float(mins[j]), chunk[j]
        for I, m in zip(chunk, mins):
            if m < -tol:
                violations.append((I, float(m)))
    return QqCertificate(not violations, violations, worst, worst_subset, count)


def full_table(mu: Distribution) -> np.ndarray:
    if mu.n > MAX_DENSE_SITES:
        raise ValueError(f"n={mu.n} exceeds the dense guard {MAX_DENSE_SITES}")
    return np.array(mu.marginal(range(mu.n)))


def assemble_dense(mu: Distribution, basis: SicBasis | None = None) -> np.ndarray:
    """The full ``2^n x 2^n`` operator ``sum_a mu(a) D_a``."""
    return table_to_operator(full_table(mu), basis)


def sic_probabilities(rho: np.ndarray, basis: SicBasis | None = None) -> np.ndarray:
    """Table of ``Tr(rho F_a)`` over all outcome strings."""
    basis = basis or build_sic_basis()
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    n = int(round(math.log2(dim))) if dim > 0 else 0
    if rho.shape != (dim, dim) or 2**n != dim or n < 1:
        raise ValueError("state dimension must be a power of two")
    if n > MAX_DENSE_SITES:
        raise ValueError(f"n={n} exceeds the dense guard {MAX_DENSE_SITES}")
    T = rho.reshape((2,) * (2 * n))
    perm = [x for m in range(n) for x in (m, n + m)]
    T = np.transpose(T, perm)
    for _ in range(n):
        # contract (i, j) with F[a][j, i]
        T = np.tensordot(T, basis.F, axes=([0, 1], [2, 1]))
    return T.real


def distribution_of_state(rho: np.ndarray, basis: SicBasis | None = None, tol: float = 1e-9) -> SparseDistribution:
    """SIC outcome distribution of a globally positive state."""
    table = sic_probabilities(rho, basis)
    tr = float(np.trace(np.asarray(rho)).real)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"state has trace {tr}, expected 1")
    if table.min() < -tol:
        raise ValueError(f"negative SIC probability {table.min():.3e}: state is not globally positive")
    return SparseDistribution.from_table(np.clip(table, 0.0, None))


def partial_trace(op: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Reduced operator on ``keep`` (in ascending order), tracing out the other qubits."""
    keep = sorted(int(i) for i in keep)
    T = np.asarray(op).reshape((2,) * (2 * n))
    traced = [i for i in range(n) if i not in keep]
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    for i in traced:
        letters[n + i] = letters[i]
    out = "".join(letters[i] for i in keep) + "".join(letters[n + i] for i in keep)
    res = np.einsum("".join(letters) + "->" + out, T)
    d = 2 ** len(keep)
    return res.reshape(d, d)


# ---------------------------------------------------------------- colors


def permute_colors(mu: SparseDistribution, perm: Sequence[int]) -> SparseDistribution:
    p = np.asarray(perm, dtype=np.int8)
    return SparseDistribution(mu.n, p[mu.strings.astype(np.int64)], mu.weights)


def symmetrize_colors(mu: Distribution) -> Distribution:
    """Average over the 24 color permutations; explicit input gives explicit output."""
    if not isinstance(mu, SparseDistribution):
        return ColorSymmetrized(mu)
    idx = mu.strings.astype(np.int64)
    strings = np.concatenate([COLOR_PERMUTATIONS[k][idx] for k in range(24)]).astype(np.int8)
    weights = np.tile(mu.weights, 24) / 24.0
    return SparseDistribution(mu.n, strings, weights / weights.sum())


def _string_keys(strings: np.ndarray) -> np.ndarray:
    """Sortable keys for rows of a symbol array (integer codes when they fit)."""
    strings = np.asarray(strings, dtype=np.int64)
    if strings.shape[1] <= 31:
        return strings @ (4 ** np.arange(strings.shape[1] - 1, -1, -1, dtype=np.int64))
    _, inv = np.unique(strings, axis=0, return_inverse=True)
    return inv.reshape(-1)


def is_color_invariant(mu: SparseDistribution, tol: float = 1e-12) -> bool:
    base_keys = _string_keys(mu.strings)
    order = np.argsort(base_keys)
    keys, w = base_keys[order], mu.weights[order]
    idx = mu.strings.astype(np.int64)
    for perm in COLOR_PERMUTATIONS[1:]:
        pk = _string_keys(perm[idx])
        o = np.argsort(pk)
        if not np.array_equal(pk[o], keys) or np.max(np.abs(mu.weights[o] - w)) > tol:
            return False
    return True


def collision_probability(mu: Distribution, i: int, j: int) -> float:
    if i == j:
        raise ValueError("collision probability needs two distinct sites")
    return float(np.trace(mu.marginal((i, j))))


def color_invariant_min_eig(tau: float) -> float:
    """Smallest eigenvalue of the pair marginal of a color-invariant distribution."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    return min(tau, 1.0 - 3.0 * tau)


def pair_dual_mixture_det(lam: float, basis: SicBasis | None = None) -> float:
    basis = basis or build_sic_basis()
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return float(np.linalg.det(lam * basis.D[0] + (1.0 - lam) * basis.D[1]).real)


# ---------------------------------------------------------------- Caratheodory


class ReductionError(RuntimeError):
    pass


def marginal_features(strings: np.ndarray, k: int) -> np.ndarray:
    """Indicator features whose expectations determine every ``k``-site marginal.

    One row for the constant, plus for every site set ``S`` with ``|S| <= k`` and
    every ``b`` in ``{1,2,3}^S`` the indicator of ``a_S == b``. Symbol 0 is
    recovered by complement, so these rows span the marginal map.
    """
    strings = np.asarray(strings, dtype=np.int64)
    s, n = strings.shape
    rows = [np.ones((1, s))]
    for size in range(1, k + 1):
        for S in itertools.combinations(range(n), size):
            sub = strings[:, S]
            nonzero = np.all(sub > 0, axis=1)
            code = np.zeros(s, dtype=np.int64)
            for c in range(size):
                code = code * 3 + (sub[:, c] - 1)
            block = np.zeros((3**size, s))
            cols = np.nonzero(nonzero)[0]
            block[code[cols], cols] = 1.0
            rows.append(block)
    return np.vstack(rows)


def nullspace_gauss(A: np.ndarray, tol: float = PIVOT_TOL) -> np.ndarray:
    """Null-space basis (columns) by Gauss-Jordan elimination with partial pivoting."""
    R = np.array(A, dtype=float)
    rows, cols = R.shape
    scale = max(1.0, float(np.max(np.abs(R)))) if R.size else 1.0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= tol * scale:
            continue
        if p != r:
            R[[r, p]] = R[[p, r]]
        R[r, c:] /= R[r, c]
        col = R[:, c].copy()
        col[r] = 0.0
        nz = np.nonzero(col)[0]
        if nz.size:
            R[nz, c:] -= np.outer(col[nz], R[r, c:])
        pivots.append(c)
        r += 1
    pivot_set = set(pivots)
    free = [c for c in range(cols) if c not in pivot_set]
    N = np.zeros((cols, len(free)))
    for j, f in enumerate(free):
        N[f, j] = 1.0
        N[pivots, j] = -R[: len(pivots), f]
    return N


def caratheodory_bound(n: int, k: int) -> int:
    return math.comb(n, k) * 4**k


def caratheodory_reduce(mu: SparseDistribution, k: int, refresh: int = 200) -> SparseDistribution:
    """Sister distribution with the same ``k``-site marginals and small support.

    The support is reduced to at most the rank of the marginal map, which is at
    most ``C(n,k) 4^k + 1``. Each step moves the weights along a null vector of the
    feature matrix until one weight reaches zero.
    """
    n = mu.n
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if caratheodory_bound(n, k) > MAX_CARATHEODORY_M:
        raise ValueError("C(n,k) 4^k exceeds the reduction guard")
    strings = mu.strings.copy()
    w = mu.weights.astype(float).copy()
    A = marginal_features(strings, k)
    N = nullspace_gauss(A)
    alive = np.arange(len(w))
    steps = 0
    while N.shape[1] > 0:
        v = N[:, 0]
        v = v / np.max(np.abs(v))
        if np.max(v) <= 1e-14:
            v = -v
        pos = v > 1e-14
        ratios = np.full(v.shape, np.inf)
        ratios[pos] = w[pos] / v[pos]
        j = int(np.argmin(ratios))
        t = ratios[j]
        w = w - t * v
        w[j] = 0.0
        rest = N[:, 1:]
        if rest.shape[1]:
            rest = rest - np.outer(v, rest[j] / v[j])
        keep = np.ones(len(w), dtype=bool)
        keep[j] = False
        w = w[keep]
        alive = alive[keep]
        N = rest[keep]
        steps += 1
        if steps % refresh == 0 and N.shape[1] > 0:
            drift = np.max(np.abs(A[:, alive] @ N)) if N.size else 0.0
            if drift > 1e-10:
                N = nullspace_gauss(A[:, alive])
                if N.shape[1] == 0:
                    break
    if np.min(w) < -1e-9:
        raise ReductionError(f"reduction produced a negative weight {np.min(w):.3e}")
    out = SparseDistribution.from_weights(n, strings[alive], np.clip(w, 0.0, None))
    dev = max_marginal_deviation(mu, out, k)
    if dev > 1e-9:
        raise ReductionError(f"reduced distribution deviates from the input marginals by {dev:.3e}")
    return out


def max_marginal_deviation(mu: Distribution, nu: Distribution, k: int) -> float:
    worst = 0.0
    for I in itertools.combinations(range(mu.n), k):
        worst = max(worst, float(np.max(np.abs(mu.marginal(I) - nu.marginal(I)))))
    return worst
