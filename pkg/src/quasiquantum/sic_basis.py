"""Qubit SIC-POVM, its dual basis, tensor products and small Hermitian linear algebra.

The four SIC vectors form a regular tetrahedron on the Bloch sphere. For each
outcome ``a`` we keep both the POVM element ``F[a] = |psi_a><psi_a| / 2`` and the
dual operator ``D[a] = 3 |psi_a><psi_a| - 1``, which satisfy
``Tr(F[a] D[b]) = [a == b]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

DEFAULT_PSD_TOL = 1e-9
MAX_TENSOR_SITES = 12
HERMITIAN_TOL = 1e-9

Which = Literal["F", "D"]


@dataclass(frozen=True, eq=False)
class SicBasis:
    """The tetrahedral qubit SIC-POVM together with its dual basis."""

    psi: np.ndarray  # (4, 2) complex, one unit vector per row
    F: np.ndarray  # (4, 2, 2)
    D: np.ndarray  # (4, 2, 2)

    def projector(self, a: int) -> np.ndarray:
        v = self.psi[a]
        return np.outer(v, v.conj())


@lru_cache(maxsize=1)
def build_sic_basis() -> SicBasis:
    """Return the fixed tetrahedral SIC basis built from closed-form amplitudes."""
    c0 = 1.0 / np.sqrt(3.0)
    c1 = np.sqrt(2.0 / 3.0)
    omega = np.exp(2j * np.pi / 3.0)
    psi = np.array(
        [
            [1.0, 0.0],
            [c0, c1],
            [c0, c1 * omega],
            [c0, c1 * omega**2],
        ],
        dtype=complex,
    )
    proj = np.einsum("ai,aj->aij", psi, psi.conj())
    F = proj / 2.0
    D = 3.0 * proj - np.eye(2)[None, :, :]
    for arr in (psi, F, D):
        arr.setflags(write=False)
    return SicBasis(psi=psi, F=F, D=D)


def _as_symbols(string: str | Sequence[int]) -> tuple[int, ...]:
    if isinstance(string, str):
        symbols = tuple(int(ch) for ch in string)
    else:
        symbols = tuple(int(s) for s in string)
    if any(s < 0 or s > 3 for s in symbols):
        raise ValueError(f"symbols must lie in 0..3, got {symbols}")
    return symbols


def tensor_basis_element(basis: SicBasis, which: Which, string: str | Sequence[int]) -> np.ndarray:
    """Kronecker product of single-site F or D operators, first site most significant."""
    symbols = _as_symbols(string)
    if len(symbols) > MAX_TENSOR_SITES:
        raise ValueError(f"tensor of {len(symbols)} sites exceeds the {MAX_TENSOR_SITES}-site guard")
    if which == "F":
        table = basis.F
    elif which == "D":
        table = basis.D
    else:
        raise ValueError("which must be 'F' or 'D'")
    out = np.ones((1, 1), dtype=complex)
    for s in symbols:
        out = np.kron(out, table[s])
    return out


def pair_operators(basis: SicBasis | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(S, A)``: the symmetric coloring operator and the singlet projector."""
    basis = basis or build_sic_basis()
    D = basis.D
    S = sum(np.kron(D[a], D[a]) for a in range(4)) / 4.0
    A = sum(np.kron(D[a], D[b]) for a in range(4) for b in range(4) if a != b) / 12.0
    return S, A


def singlet_projector() -> np.ndarray:
    psi_minus = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)
    return np.outer(psi_minus, psi_minus.conj())


# ---------------------------------------------------------------- eigenvalues


def check_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {op.shape}")
    if op.size and np.max(np.abs(op - op.conj().T)) > tol * max(1.0, np.max(np.abs(op))):
        raise ValueError("operator is not Hermitian within tolerance")
    return op


def jacobi_eigenvalues(op: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi on its real-symmetric embedding.

    ``H = X + iY`` is mapped to ``[[X, -Y], [Y, X]]``, whose spectrum is that of
    ``H`` with every eigenvalue doubled; one copy of each pair is returned.
    """
    op = check_hermitian(op)
    m = op.shape[0]
    if m == 0:
        return np.zeros(0)
    X = op.real.astype(float)
    Y = op.imag.astype(float)
    a = np.block([[X, -Y], [Y, X]])
    a = (a + a.T) / 2.0
    size = 2 * m
    scale = max(1.0, np.linalg.norm(a))
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    doubled = np.sort(np.diag(a))
    return doubled[::2]


def eigenvalues(op: np.ndarray, method: Literal["lapack", "jacobi"] = "lapack") -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian operator."""
    op = check_hermitian(op)
    if method == "jacobi":
        return jacobi_eigenvalues(op)
    return np.linalg.eigvalsh(op)


def min_eigenvalue(op: np.ndarray) -> float:
    return float(eigenvalues(op)[0])


def is_psd(op: np.ndarray, tol: float = DEFAULT_PSD_TOL) -> bool:
    return min_eigenvalue(op) >= -tol


def operator_norm(op: np.ndarray) -> float:
    ev = eigenvalues(op)
    return float(max(abs(ev[0]), abs(ev[-1]))) if ev.size else 0.0


def sic_residuals(basis: SicBasis | None = None) -> dict[str, float]:
    """Max-norm residuals of the defining SIC and dual-basis identities."""
    basis = basis or build_sic_basis()
    eye = np.eye(2)
    res: dict[str, float] = {}
    res["sum_F"] = float(np.max(np.abs(basis.F.sum(axis=0) - eye)))
    overlaps = np.abs(basis.psi.conj() @ basis.psi.T) ** 2
    off = overlaps[~np.eye(4, dtype=bool)]
    res["overlap"] = float(np.max(np.abs(off - 1.0 / 3.0)))
    res["norm"] = float(np.max(np.abs(np.diag(overlaps) - 1.0)))
    gram = np.einsum("aij,bji->ab", basis.F, basis.D)
    res["co_orthogonal"] = float(np.max(np.abs(gram - np.eye(4))))
    res["dual_from_F"] = float(np.max(np.abs(basis.D - (6.0 * basis.F - eye[None]))))
    res["sum_D"] = float(np.max(np.abs(basis.D.sum(axis=0) / 4.0 - eye / 2.0)))
    worst = 0.0
    for b in range(4):
        partial = sum(basis.D[a] for a in range(4) if a != b) / 3.0
        worst = max(worst, float(np.max(np.abs(partial - (eye - basis.projector(b))))))
    res["sum_D_except"] = worst
    res["trace_F"] = float(np.max(np.abs(np.trace(basis.F, axis1=1, axis2=2) - 0.5)))
    return res
