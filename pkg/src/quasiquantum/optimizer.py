"""Energy minimization over k-local qq states.

The positivity constraints on the k-site marginal operators are handled by a
cutting-plane loop: solve a linear program in the weights, find marginal
operators with negative eigenvalues, and add the cut ``v^dag X_I v >= 0`` for
each offending eigenvector. The linear programs go to HiGHS by default; a
dense revised simplex with dual-simplex warm starts is available as the
"simplex" backend.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .hamiltonians import LocalHamiltonian, all_strings, assignment_energies, scale
from .qq_state import SparseDistribution, caratheodory_bound, caratheodory_reduce, tables_to_operators
from .sic_basis import DEFAULT_PSD_TOL

MAX_SUPPORT = 10_000
EXACT_GUARD = 20_000
MAX_CUT_ROUNDS = 400
STAGNATION_ROUNDS = 3
CUT_PATIENCE = 20
HARRIS_TOL = 1e-11
COST_JITTER = 1e-11
RHS_JITTER = 1e-12


# ---------------------------------------------------------------- simplex


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible", "unbounded" or "iteration-limit"
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: list[int] | None = None  # final basis when no row was dropped as redundant


class _Tableau:
    """Revised simplex state: basis, explicit inverse and basic values."""

    REFACTOR = 64
    DEGENERATE_SWITCH = 40

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], tol: float):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.tol = tol
        self.refactor()

    def refactor(self) -> None:
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-14] = 0.0

    def pivot(self, r: int, j: int, u: np.ndarray) -> None:
        piv = u[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        theta = self.xB[r] / piv
        self.xB -= theta * u
        self.xB[r] = theta
        self.basis[r] = j

    def run(self, c: np.ndarray, allowed: np.ndarray, max_iter: int) -> tuple[str, int]:
        tol = self.tol
        degenerate = 0
        fresh = False
        for it in range(max_iter):
            if it and it % self.REFACTOR == 0:
                self.refactor()
                fresh = True
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            d[~allowed] = np.inf
            d[self.basis] = np.inf
            bland = degenerate >= self.DEGENERATE_SWITCH
            # reduced costs carry rounding error proportional to the dual vector
            cand = np.flatnonzero(d < -tol * (1.0 + np.abs(y).max(initial=0.0)))
            if cand.size == 0:
                if fresh:
                    return "optimal", it
                # confirm optimality with a fresh factorization
                self.refactor()
                fresh = True
                continue
            fresh = False
            j = int(cand[0]) if bland else int(np.argmin(d))
            u = self.Binv @ self.A[:, j]
            pos = np.flatnonzero(u > 1e-10)
            if pos.size == 0:
                return "unbounded", it
            xb = np.maximum(self.xB[pos], 0.0)
            if bland:
                ratios = xb / u[pos]
                best = ratios.min()
                ties = pos[ratios <= best + 1e-12]
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                # Harris: largest pivot among rows within a small feasibility slack of the bound
                bound = ((xb + HARRIS_TOL) / u[pos]).min()
                ratios = xb / u[pos]
                ties = pos[ratios <= bound]
                r = int(ties[np.argmax(u[ties])])
                best = float(self.xB[r] / u[r])
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            self.pivot(r, j, u)
            np.maximum(self.xB, 0.0, out=self.xB)
        return "iteration-limit", max_iter

    def run_dual(self, c: np.ndarray, allowed: np.ndarray, max_iter: int, feas_tol: float = 1e-11) -> tuple[str, int]:
        """Dual simplex from a dual-feasible basis; Bland's rule after a run of degenerate pivots."""
        degenerate = 0
        refreshed = False
        for it in range(max_iter):
            if it and it % self.REFACTOR == 0:
                self.refactor()
            bland = degenerate >= self.DEGENERATE_SWITCH
            neg = np.flatnonzero(self.xB < -feas_tol)
            if neg.size == 0:
                if refreshed:
                    return "optimal", it
                self.refactor()
                refreshed = True
                continue
            r = int(min(neg, key=lambda i: self.basis[i])) if bland else int(neg[np.argmin(self.xB[neg])])
            alpha = self.Binv[r] @ self.A
            alpha[~allowed] = 0.0
            alpha[self.basis] = 0.0
            cand = np.flatnonzero(alpha < -1e-10)
            if cand.size == 0:
                return "infeasible", it
            y = c[self.basis] @ self.Binv
            d = np.maximum(c[cand] - y @ self.A[:, cand], 0.0)
            if bland:
                ratios = d / -alpha[cand]
                best = ratios.min()
                j = int(cand[ratios <= best + 1e-12][0])
            else:
                bound = ((d + HARRIS_TOL) / -alpha[cand]).min()
                ties = cand[d / -alpha[cand] <= bound]
                j = int(ties[np.argmin(alpha[ties])])
                best = float(max(c[j] - y @ self.A[:, j], 0.0) / -alpha[j])
            u = self.Binv @ self.A[:, j]
            if abs(u[r] - alpha[j]) > 1e-8 * (1.0 + abs(alpha[j])):
                if refreshed:
                    return "numerical", it
                self.refactor()
                refreshed = True
                continue
            refreshed = False
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            self.pivot(r, j, u)
        return "iteration-limit", max_iter


class WarmLP:
    """``min c.x`` with ``A x = b``, ``x >= 0``, re-optimized by the dual simplex as rows are added.

    Each added row ``a.x <= rhs`` gets its own slack column, which enters the
    basis, so the previous optimal basis stays dual feasible.
    """

    def __init__(self, c: np.ndarray, A: np.ndarray, b: np.ndarray, basis: Sequence[int],
                 tol: float = 1e-10, max_iter: int = 50_000):
        self.n_orig = A.shape[1]
        self.c = np.asarray(c, dtype=float)
        self.max_iter = max_iter
        self.tab = _Tableau(np.array(A, dtype=float), np.array(b, dtype=float), list(basis), tol)
        if np.any(self.tab.xB < -1e-12):
            raise ValueError("starting basis is not primal feasible")
        self.status, _ = self.tab.run(self.c, np.ones(self.n_orig, dtype=bool), max_iter)

    @classmethod
    def from_basis(cls, c: np.ndarray, A: np.ndarray, b: np.ndarray, basis: Sequence[int], n_orig: int) -> "WarmLP":
        """Wrap a system whose trailing columns are the slacks of added rows, at a known optimal basis."""
        lp = cls.__new__(cls)
        lp.n_orig = n_orig
        lp.c = np.asarray(c, dtype=float)
        lp.max_iter = 50_000
        lp.tab = _Tableau(np.array(A, dtype=float), np.array(b, dtype=float), list(basis), 1e-10)
        lp.status = "optimal" if lp.certified() else "numerical"
        return lp

    @property
    def rows(self) -> int:
        return self.tab.A.shape[0]

    def add_rows(self, rows: np.ndarray, rhs: np.ndarray) -> str:
        tab = self.tab
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        q = rows.shape[0]
        m, N = tab.A.shape
        R = np.zeros((q, N))
        R[:, : self.n_orig] = rows
        tab.A = np.block([[tab.A, np.zeros((m, q))], [R, np.eye(q)]])
        tab.b = np.concatenate([tab.b, rhs])
        RB = R[:, tab.basis]
        Binv = np.zeros((m + q, m + q))
        Binv[:m, :m] = tab.Binv
        Binv[m:, :m] = -RB @ tab.Binv
        Binv[m:, m:] = np.eye(q)
        tab.Binv = Binv
        tab.xB = np.concatenate([tab.xB, rhs - RB @ tab.xB])
        tab.basis = tab.basis + list(range(N, N + q))
        self.c = np.concatenate([self.c, np.zeros(q)])
        allowed = np.ones(N + q, dtype=bool)
        self.status, _ = tab.run_dual(self.c, allowed, self.max_iter)
        if self.status == "optimal":
            tab.refactor()
            self.status, _ = tab.run(self.c, allowed, self.max_iter)
        if self.status == "optimal" and not self.certified():
            self.status = "numerical"
        return self.status

    def certified(self, tol: float = 1e-7) -> bool:
        """Fresh check of primal feasibility and dual feasibility of the current basis."""
        tab = self.tab
        tab.refactor()
        if tab.xB.min(initial=0.0) < -tol:
            return False
        y = np.linalg.solve(tab.A[:, tab.basis].T, self.c[tab.basis])
        d = self.c - y @ tab.A
        return bool(d.min(initial=0.0) >= -tol * (1.0 + np.abs(self.c).max(initial=0.0)))

    def drop_rows(self, rows: Sequence[int]) -> None:
        """Delete added rows whose slack is basic, together with their slack columns."""
        tab = self.tab
        m0 = tab.A.shape[0] - (tab.A.shape[1] - self.n_orig)
        drop_rows = set(rows)
        slack_cols = {self.n_orig + (r - m0) for r in drop_rows}
        if not slack_cols <= set(tab.basis):
            raise ValueError("only rows with a basic slack can be dropped")
        keep_r = [i for i in range(tab.A.shape[0]) if i not in drop_rows]
        keep_c = [j for j in range(tab.A.shape[1]) if j not in slack_cols]
        remap = {j: i for i, j in enumerate(keep_c)}
        pos = [i for i, j in enumerate(tab.basis) if j not in slack_cols]
        tab.basis = [remap[tab.basis[i]] for i in pos]
        tab.A = tab.A[np.ix_(keep_r, keep_c)]
        tab.b = tab.b[keep_r]
        self.c = self.c[keep_c]
        tab.refactor()

    def slack_values(self) -> np.ndarray:
        """Values of the added slacks, in row order (zero when nonbasic)."""
        vals = np.zeros(self.tab.A.shape[1] - self.n_orig)
        for r, j in enumerate(self.tab.basis):
            if j >= self.n_orig:
                vals[j - self.n_orig] = self.tab.xB[r]
        return vals

    def solution(self) -> np.ndarray:
        x = np.zeros(self.n_orig)
        for r, j in enumerate(self.tab.basis):
            if j < self.n_orig:
                x[j] = max(self.tab.xB[r], 0.0)
        return x


def simplex(c: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = 1e-10,
            max_iter: int = 50_000) -> LPResult:
    """Minimize ``c.x`` subject to ``A x = b``, ``x >= 0`` by the two-phase revised simplex method."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, N = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # unit columns give a free starting basis for their rows
    basis: list[int | None] = [None] * m
    nnz = np.count_nonzero(A, axis=0)
    for j in np.flatnonzero(nnz == 1):
        i = int(np.flatnonzero(A[:, j])[0])
        if basis[i] is None and A[i, j] == 1.0:
            basis[i] = int(j)
    missing = [i for i in range(m) if basis[i] is None]
    art = np.zeros((m, len(missing)))
    for col, i in enumerate(missing):
        art[i, col] = 1.0
        basis[i] = N + col
    A1 = np.hstack([A, art])
    total_iter = 0
    tab = _Tableau(A1, b, basis, tol)
    if missing:
        c1 = np.zeros(A1.shape[1])
        c1[N:] = 1.0
        status, it = tab.run(c1, np.ones(A1.shape[1], dtype=bool), max_iter)
        total_iter += it
        if status == "iteration-limit":
            return LPResult(status, None, math.nan, total_iter)
        infeas = float(c1[tab.basis] @ tab.xB)
        if infeas > 1e-9 * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LPResult("infeasible", None, math.nan, total_iter)
        _drive_out_artificials(tab, N)
    c2 = np.concatenate([c, np.zeros(tab.A.shape[1] - N)])
    allowed = np.zeros(tab.A.shape[1], dtype=bool)
    allowed[:N] = True
    status, it = tab.run(c2, allowed, max_iter - total_iter)
    total_iter += it
    if status != "optimal":
        return LPResult(status, None, math.nan, total_iter)
    tab.refactor()
    x = np.zeros(N)
    for r, j in enumerate(tab.basis):
        if j < N:
            x[j] = max(tab.xB[r], 0.0)
    full = len(tab.basis) == m and all(j < N for j in tab.basis)
    return LPResult("optimal", x, float(c @ x), total_iter, list(tab.basis) if full else None)


def _drive_out_artificials(tab: _Tableau, N: int) -> None:
    """Pivot zero-level artificials out of the basis; drop rows that turn out redundant."""
    r = 0
    while r < len(tab.basis):
        if tab.basis[r] < N:
            r += 1
            continue
        row = tab.Binv[r] @ tab.A[:, :N]
        row[[j for j in tab.basis if j < N]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-9:
            tab.pivot(r, j, tab.Binv @ tab.A[:, j])
            r += 1
            continue
        keep = [i for i in range(len(tab.basis)) if i != r]
        tab.A = tab.A[keep]
        tab.b = tab.b[keep]
        tab.basis = [tab.basis[i] for i in keep]
        tab.refactor()
    tab.refactor()


class HighsLP:
    """Same interface as :class:`WarmLP`, re-solved from scratch by the HiGHS dual simplex."""

    _STATUS = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded", 4: "numerical"}

    def __init__(self, c: np.ndarray, A: np.ndarray, b: np.ndarray, basis: Sequence[int] = ()):
        self.n_orig = A.shape[1]
        self.c = np.asarray(c, dtype=float)
        self.A_eq = np.array(A, dtype=float)
        self.b_eq = np.array(b, dtype=float)
        self.cuts = np.zeros((0, self.n_orig))
        self.rhs = np.zeros(0)
        self.x = np.zeros(self.n_orig)
        self._solve()

    @property
    def rows(self) -> int:
        return self.A_eq.shape[0] + self.cuts.shape[0]

    def _solve(self) -> str:
        tight = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
        for method, options in (("highs-ds", tight), ("highs-ipm", {}), ("highs-ds", {"presolve": False, **tight})):
            res = linprog(self.c, A_ub=self.cuts if self.cuts.size else None,
                          b_ub=self.rhs if self.rhs.size else None, A_eq=self.A_eq, b_eq=self.b_eq,
                          bounds=(0, None), method=method, options=options)
            self.status = self._STATUS.get(res.status, "numerical")
            if self.status in ("optimal", "infeasible"):
                break
        if res.x is not None:
            self.x = np.maximum(res.x, 0.0)
        return self.status

    def add_rows(self, rows: np.ndarray, rhs: np.ndarray) -> str:
        self.cuts = np.vstack([self.cuts, np.atleast_2d(rows)])
        self.rhs = np.concatenate([self.rhs, rhs])
        return self._solve()

    def drop_rows(self, rows: Sequence[int]) -> None:
        m0 = self.A_eq.shape[0]
        keep = np.setdiff1d(np.arange(self.cuts.shape[0]), np.array(list(rows), dtype=np.int64) - m0)
        self.cuts = self.cuts[keep]
        self.rhs = self.rhs[keep]

    def slack_values(self) -> np.ndarray:
        return self.rhs - self.cuts @ self.x

    def solution(self) -> np.ndarray:
        return self.x.copy()


LP_BACKENDS = ("highs", "simplex")


def _new_lp(backend: str, c: np.ndarray, A: np.ndarray, b: np.ndarray, basis: Sequence[int]):
    if backend == "highs":
        return HighsLP(c, A, b)
    if backend == "simplex":
        return WarmLP(c, A, b, basis)
    raise ValueError(f"unknown LP backend {backend!r}; choose from {LP_BACKENDS}")


# ---------------------------------------------------------------- cutting planes


@dataclass
class SolveResult:
    mu: SparseDistribution | None
    energy: float
    status: str  # "optimal", "infeasible" or "iteration-limit"
    cuts_used: int
    min_eigenvalue: float = math.nan
    history: list[float] = field(default_factory=list)
    lower_bound: float = -math.inf

    def summary(self) -> str:
        return f"energy {self.energy:.12g} status {self.status} cuts {self.cuts_used}"


def _as_strings(support, n: int) -> np.ndarray:
    if isinstance(support, np.ndarray):
        arr = support.astype(np.int64)
    else:
        rows = []
        for a in support:
            if isinstance(a, str):
                rows.append([int(ch) for ch in a])
            else:
                rows.append([int(x) for x in a])
        arr = np.array(rows, dtype=np.int64).reshape(-1, n)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError(f"assignments must have length {n}")
    if arr.size and (arr.min() < 0 or arr.max() > 3):
        raise ValueError("assignment symbols must lie in 0..3")
    return np.unique(arr, axis=0)


def _symbol_operators(k: int) -> np.ndarray:
    """``D_b`` for every ``b`` in ``{0..3}^k``, stacked in base-4 order."""
    eye = np.eye(4**k).reshape((4**k,) + (4,) * k)
    return tables_to_operators(eye)


class _CutOracle:
    """Finds negative eigenvectors of k-site marginal operators of weights on a fixed support."""

    def __init__(self, strings: np.ndarray, k: int, batch: int = 512):
        self.strings = strings
        self.k = k
        self.ops = _symbol_operators(k)
        self.subsets = list(itertools.combinations(range(strings.shape[1]), k))
        self.batch = batch
        self.powers = 4 ** np.arange(k - 1, -1, -1)

    def codes(self, subsets: Sequence[tuple[int, ...]]) -> np.ndarray:
        idx = np.array(subsets, dtype=np.int64)
        return np.einsum("sik,k->is", self.strings[:, idx], self.powers)

    def min_eig(self, w: np.ndarray) -> float:
        return self.scan(w, math.inf, 0)[1]

    def scan(self, w: np.ndarray, below: float, max_cuts: int | None = None) -> tuple[list[np.ndarray], float]:
        """Cut rows (coefficients over the support) for eigenvalues below ``below``, and the minimum eigenvalue."""
        cuts: list[tuple[float, np.ndarray]] = []
        worst = math.inf
        K = 4**self.k
        for start in range(0, len(self.subsets), self.batch):
            chunk = self.subsets[start : start + self.batch]
            codes = self.codes(chunk)
            offs = codes + K * np.arange(len(chunk))[:, None]
            tables = np.bincount(offs.ravel(), weights=np.tile(w, len(chunk)), minlength=K * len(chunk))
            ops = np.einsum("sb,bij->sij", tables.reshape(len(chunk), K), self.ops)
            if max_cuts == 0:
                worst = min(worst, float(np.linalg.eigvalsh(ops)[:, 0].min()))
                continue
            vals, vecs = np.linalg.eigh(ops)
            worst = min(worst, float(vals[:, 0].min()))
            for s, e in zip(*np.nonzero(vals < below)):
                v = vecs[s, :, e]
                coeff = np.real(np.einsum("i,bij,j->b", v.conj(), self.ops, v))
                cuts.append((float(vals[s, e]), coeff[codes[s]]))
        cuts.sort(key=lambda t: t[0])
        if max_cuts is not None:
            cuts = cuts[:max_cuts]
        return [row for _, row in cuts], worst


def _distinct_cuts(new: list[np.ndarray], active: list[np.ndarray], cos_tol: float = 1e-10) -> list[np.ndarray]:
    """Unit-norm versions of ``new``, skipping rows nearly parallel to an active or earlier row."""
    kept: list[np.ndarray] = []
    existing = np.array(active) if active else np.zeros((0, new[0].shape[0] if new else 0))
    for row in new:
        norm = np.linalg.norm(row)
        if norm == 0.0:
            continue
        row = row / norm
        pool = np.vstack([existing] + [np.array(kept)] if kept else [existing])
        if pool.size and np.max(pool @ row) > 1.0 - cos_tol:
            continue
        kept.append(row)
    return kept


def _normalized(w: np.ndarray) -> np.ndarray:
    w = np.maximum(w, 0.0)
    return w / w.sum()


def _find_feasible(oracle: _CutOracle, s: int, cuts: list[np.ndarray], tol: float,
                   max_rounds: int, backend: str = "highs") -> tuple[np.ndarray | None, str]:
    """Weights whose marginals are PSD within ``tol``, by maximizing the smallest eigenvalue.

    Variables are the weights and a margin ``t`` stored as ``t + 2 >= 0`` and
    capped at ``t <= 1``; each cut reads ``cut . w >= t``.
    """
    A = np.zeros((2, s + 2))
    A[0, :s] = 1.0
    A[1, s] = A[1, s + 1] = 1.0
    c = np.zeros(s + 2)
    c[s] = -1.0
    lp = _new_lp(backend, c, A, np.array([1.0, 3.0]), [0, s + 1])
    for _ in range(max_rounds):
        if lp.status != "optimal":
            return None, lp.status
        x = lp.solution()
        t_bound = x[s] - 2.0
        if t_bound < -tol:
            return None, "infeasible"
        w = _normalized(x[:s])
        new, worst = oracle.scan(w, t_bound - 1e-12, 50)
        if worst >= -tol and (worst >= 0.5 * t_bound or t_bound <= tol):
            return w, "optimal"
        if not new:
            return (w, "optimal") if worst >= -tol else (None, "iteration-limit")
        cuts.extend(new)
        rows = np.zeros((len(new), s + 2))
        rows[:, :s] = -np.array(new)
        rows[:, s] = 1.0
        lp.add_rows(rows, np.full(len(new), 2.0))
    return None, "iteration-limit"


def _boundary_step(oracle: _CutOracle, w_in: np.ndarray, w_out: np.ndarray, tol: float,
                   steps: int = 40) -> float:
    """Largest ``a`` in ``[0, 1]`` with ``w_in + a (w_out - w_in)`` PSD within ``tol`` (bisection)."""
    lo, hi = 0.0, 1.0
    d = w_out - w_in
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if oracle.min_eig(w_in + mid * d) >= -tol:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return lo


def fixed_support_minimize(
    H: LocalHamiltonian,
    support,
    k: int | None = None,
    tol: float = DEFAULT_PSD_TOL,
    max_rounds: int = MAX_CUT_ROUNDS,
    max_cuts_per_round: int = 50,
    gap_tol: float | None = None,
    lp_backend: str = "highs",
) -> SolveResult:
    """Minimum energy over k-local qq states supported on ``support``.

    Cuts are separated near the boundary on the segment from a feasible point to
    the LP optimum. The returned weights always have every k-site marginal
    eigenvalue at least ``-tol``. Status "optimal" means either the LP optimum
    itself needs no cut or the gap between it and the best feasible point is
    below ``gap_tol`` (default ``tol * max(1, scale(H))``).
    ``lp_backend`` picks the cut LP solver: "highs" or the built-in "simplex".
    """
    k = H.k if k is None else k
    strings = _as_strings(support, H.n)
    s = strings.shape[0]
    if s == 0:
        raise ValueError("support is empty")
    if s > MAX_SUPPORT:
        raise ValueError(f"support size {s} exceeds {MAX_SUPPORT}")
    if not 1 <= k <= H.n:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    gap_tol = tol * max(1.0, scale(H)) if gap_tol is None else gap_tol
    c = assignment_energies(H, strings)
    # aim inside the tolerance so renormalized weights still clear it
    feas = 0.5 * tol
    oracle = _CutOracle(strings, k)
    cuts: list[np.ndarray] = []

    lower = -math.inf

    def result(w: np.ndarray, status: str, worst: float) -> SolveResult:
        keep = w > 0
        mu = SparseDistribution(H.n, strings[keep].astype(np.int8), w[keep] / w[keep].sum())
        e = float(c[keep] @ mu.weights)
        return SolveResult(mu, e, status, len(cuts), worst, lower_bound=min(lower, e))

    w_in = np.full(s, 1.0 / s)
    if oracle.min_eig(w_in) < -feas:
        w_in, status = _find_feasible(oracle, s, cuts, feas, max_rounds, lp_backend)
        if w_in is None:
            return SolveResult(None, math.nan, status, len(cuts))
    center = w_in
    # tiny fixed perturbations break the heavy degeneracy of the cut LPs
    jitter = np.random.default_rng(0)
    c_lp = c + COST_JITTER * max(1.0, float(np.abs(c).max())) * jitter.random(s)

    def slack_rhs(q: int) -> np.ndarray:
        return RHS_JITTER * jitter.random(q)

    lp = _new_lp(lp_backend, c_lp, np.ones((1, s)), np.ones(1), [int(np.argmin(c_lp))])
    if cuts:
        lp.add_rows(-np.array(cuts), slack_rhs(len(cuts)))
    age = np.zeros(len(cuts), dtype=np.int64)
    active: list[np.ndarray] = list(cuts)

    def restart():
        fresh = _new_lp(lp_backend, c_lp, np.ones((1, s)), np.ones(1), [int(np.argmin(c_lp))])
        if active:
            fresh.add_rows(-np.array(active), slack_rhs(len(active)))
        if fresh.status in ("optimal", "infeasible") or lp_backend != "simplex":
            return fresh
        # last resort: two-phase primal simplex on the whole cut system
        q = len(active)
        A = np.hstack([np.vstack([np.ones((1, s)), -np.array(active)]), np.vstack([np.zeros((1, q)), np.eye(q)])])
        b = np.concatenate([[1.0], slack_rhs(q)])
        cold = simplex(np.concatenate([c_lp, np.zeros(q)]), A, b)
        if cold.status == "infeasible":
            fresh.status = "infeasible"
        elif cold.basis is not None:
            fresh = WarmLP.from_basis(np.concatenate([c_lp, np.zeros(q)]), A, b, cold.basis, s)
        return fresh

    for _ in range(max_rounds):
        if lp.status != "optimal":
            # warm updates can lose accuracy; confirm from a fresh factorization
            lp = restart()
            age = np.zeros(len(active), dtype=np.int64)
        if lp.status == "infeasible":
            return SolveResult(None, math.nan, "infeasible", len(cuts))
        if lp.status != "optimal":
            break
        w_out = _normalized(lp.solution())
        # the LP is a relaxation; the jitter shifts its value by at most the jitter size
        lower = max(lower, float(c @ w_out) - COST_JITTER * max(1.0, float(np.abs(c).max())))
        kelley, worst_out = oracle.scan(w_out, -feas, max_cuts_per_round)
        if not kelley:
            return result(w_out, "optimal", worst_out)
        if c @ w_in - c @ w_out <= gap_tol:
            return result(w_in, "optimal", oracle.min_eig(w_in))
        a = _boundary_step(oracle, center, w_out, feas)
        d = w_out - center
        # cut just past the boundary, where the supporting hyperplane is nearly tangent
        a_sep = min(1.0, a + max(1e-9, 1e-6 * (1.0 - a)))
        tangent, _ = oracle.scan(center + a_sep * d, -feas, max_cuts_per_round)
        w_b = center + a * d
        # the segment from the incumbent often reaches further down than the one from the center
        w_c = w_in + _boundary_step(oracle, w_in, w_out, feas) * (w_out - w_in)
        w_in = min((w_in, w_b, w_c), key=lambda w: c @ w)
        # forget cuts that have been slack for a while
        age = np.where(lp.slack_values() > 1e-9, age + 1, 0)
        stale = np.flatnonzero(age > CUT_PATIENCE)
        if stale.size:
            m0 = lp.rows - age.size
            lp.drop_rows([m0 + int(i) for i in stale])
            age = np.delete(age, stale)
            drop = set(stale.tolist())
            active = [row for i, row in enumerate(active) if i not in drop]
        new = _distinct_cuts(tangent + kelley, active)
        if not new:
            break
        cuts.extend(new)
        active.extend(new)
        lp.add_rows(-np.array(new), slack_rhs(len(new)))
        age = np.concatenate([age, np.zeros(len(new), dtype=np.int64)])
    return result(w_in, "iteration-limit", oracle.min_eig(w_in))


def exact_qq_solve(H: LocalHamiltonian, k: int | None = None, tol: float = DEFAULT_PSD_TOL,
                   gap_tol: float = 1e-8, max_rounds: int = 1000) -> SolveResult:
    """Optimize over the full support ``{0..3}^n``; ``energy`` and ``lower_bound`` bracket the optimum."""
    if 4**H.n > EXACT_GUARD:
        raise ValueError(f"4^{H.n} assignments exceed the exact guard {EXACT_GUARD}")
    return fixed_support_minimize(H, all_strings(H.n), k, tol, max_rounds=max_rounds, gap_tol=gap_tol)


def exact_qq_ground_energy(H: LocalHamiltonian, k: int | None = None, tol: float = DEFAULT_PSD_TOL,
                           gap_tol: float = 1e-8) -> float:
    """Ground energy over all k-local qq states (feasible value, within the solver gap of the optimum)."""
    res = exact_qq_solve(H, k, tol, gap_tol)
    if res.mu is None:
        raise RuntimeError(f"exact solve ended with status {res.status}")
    return res.energy


# ---------------------------------------------------------------- heuristic


def _fresh_strings(rng: np.random.Generator, n: int, count: int, taken: set[bytes]) -> list[np.ndarray]:
    """``count`` new uniform random assignments not in ``taken``; duplicates are resampled."""
    out: list[np.ndarray] = []
    capacity = 4**n - len(taken) if n < 32 else count
    count = min(count, capacity)
    while len(out) < count:
        batch = rng.integers(0, 4, size=(2 * (count - len(out)) + 8, n), dtype=np.int8)
        for row in batch:
            key = row.tobytes()
            if key not in taken:
                taken.add(key)
                out.append(row)
                if len(out) == count:
                    break
    return out


def heuristic_ground_energy(
    H: LocalHamiltonian,
    k: int | None = None,
    delta_support: int = 32,
    rounds: int = 10,
    seed: int = 0,
    tol: float = DEFAULT_PSD_TOL,
) -> SolveResult:
    """Random-support search for low-energy k-local qq states.

    Each round optimizes over the current support, reduces the optimum to at most
    ``M = C(n,k) 4^k + 1`` assignments with the same k-site marginals, and adds
    ``delta_support`` fresh random assignments. The returned history holds the
    best energy after each round.
    """
    k = H.k if k is None else k
    if delta_support < 1 or rounds < 1:
        raise ValueError("delta_support and rounds must be positive")
    n = H.n
    M = caratheodory_bound(n, k) + 1
    if n < 16 and 4**n <= M + delta_support:
        res = fixed_support_minimize(H, all_strings(n), k, tol)
        if res.mu is None:
            raise RuntimeError(f"full-support solve ended with status {res.status}")
        res.history = [res.energy]
        return res
    rng = np.random.default_rng(seed)
    taken: set[bytes] = set()
    support = _fresh_strings(rng, n, M + delta_support, taken)
    best: SolveResult | None = None
    history: list[float] = []
    stale = 0
    threshold = 1e-9 * max(scale(H), 1.0)
    for _ in range(rounds):
        res = fixed_support_minimize(H, np.array(support), k, tol)
        # any returned weights are feasible, even when the gap did not close
        if res.mu is not None:
            reduced = caratheodory_reduce(res.mu, k)
            if best is None or res.energy < best.energy - threshold:
                stale = 0
            else:
                stale += 1
            if best is None or res.energy < best.energy:
                best = SolveResult(reduced, res.energy, res.status, res.cuts_used, res.min_eigenvalue)
            keep = [row for row in best.mu.strings]
            taken = {row.tobytes() for row in keep}
            support = keep + _fresh_strings(rng, n, delta_support, taken)
        else:
            support = support + _fresh_strings(rng, n, delta_support, taken)
            stale = 0 if best is None else stale + 1
        if best is not None:
            history.append(best.energy)
        if stale >= STAGNATION_ROUNDS:
            break
    if best is None:
        raise RuntimeError("every round was infeasible")
    best.history = history
    return best
