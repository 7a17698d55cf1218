"""Dense complex-matrix primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The helpers in
this module validate inputs (finiteness, Hermiticity, positivity) and enforce
the global dimension cap so that downstream code can assume well-formed data.
"""
from __future__ import annotations

import os
from typing import Sequence

import numpy as np

from sek.errors import ArgumentError, CapacityError, NotPSDError, NumericalFailure

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
SQRT_NEGATIVE_LIMIT = 1e-6
DEFAULT_MAX_DIM = 4096


def max_dim() -> int:
    """Dimension cap for any constructed matrix.

    ``SEK_MAX_DIM`` may lower the cap but never raise it.
    """
    raw = os.environ.get("SEK_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError:
        return DEFAULT_MAX_DIM
    return max(1, min(value, DEFAULT_MAX_DIM))


def check_dim(dim: int) -> None:
    if dim > max_dim():
        raise CapacityError(f"dimension {dim} exceeds cap {max_dim()}")


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ArgumentError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise ArgumentError("empty matrix")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("matrix has non-finite entries")
    check_dim(max(a.shape))
    return a


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity and return the exactly symmetrised matrix."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ArgumentError(f"Hermitian operator must be square, got {a.shape}")
    dev = np.max(np.abs(a - a.conj().T))
    if dev > tol:
        raise ArgumentError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return (a + a.conj().T) / 2


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def eig_hermitian(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition ``h = V diag(w) V^dagger`` with ascending ``w``."""
    a = as_hermitian(h)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    return w, v


def eigvalsh(h) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (no validation)."""
    try:
        return np.linalg.eigvalsh((h + h.conj().T) / 2)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc


def lambda_min(h) -> float:
    return float(eigvalsh(np.asarray(h, dtype=complex))[0])


def lambda_max(h) -> float:
    return float(eigvalsh(np.asarray(h, dtype=complex))[-1])


def is_psd(h, tol: float = PSD_TOL) -> bool:
    a = np.asarray(h, dtype=complex)
    scale = max(1.0, abs(np.trace(a).real))
    return lambda_min(a) >= -tol * scale


def project_psd(h) -> np.ndarray:
    """Closest PSD matrix in Frobenius norm (negative eigenvalues set to 0)."""
    w, v = eig_hermitian(h)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def matrix_function(h, fn) -> np.ndarray:
    """Apply a scalar function to the spectrum of a Hermitian matrix."""
    w, v = eig_hermitian(h)
    return (v * fn(w)) @ v.conj().T


def matrix_sqrt(h) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues in ``[-1e-6, 0)`` are treated as roundoff and clipped; anything
    more negative raises :class:`NotPSDError`.
    """
    w, v = eig_hermitian(h)
    if w[0] < -SQRT_NEGATIVE_LIMIT:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} < 0")
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root) @ v.conj().T


def operator_norm(m) -> float:
    """Largest singular value."""
    a = as_matrix(m)
    return float(np.linalg.norm(a, 2))


def trace_norm(m) -> float:
    a = as_matrix(m)
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def kron(a, b) -> np.ndarray:
    """Kronecker product with the dimension cap enforced."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1 and b.ndim == 1:
        check_dim(a.shape[0] * b.shape[0])
        return np.kron(a, b)
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    check_dim(a.shape[0] * b.shape[0])
    check_dim(a.shape[1] * b.shape[1])
    return np.kron(a, b)


def kron_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def ptrace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square matrix over every subsystem not in ``keep``.

    ``keep`` lists subsystem indices; the output keeps them in the given order.
    """
    dims = list(dims)
    n = len(dims)
    keep = list(keep)
    t = np.asarray(m).reshape(dims + dims)
    drop = [i for i in range(n) if i not in keep]
    # contract bra and ket indices of every dropped subsystem
    row = list(range(n))
    col = [n + i for i in range(n)]
    for i in drop:
        col[i] = row[i]
    out_idx = [row[i] for i in keep] + [col[i] for i in keep]
    out = np.einsum(t, row + col, out_idx)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return out.reshape(d, d)


def permute_subsystems(m: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of a square matrix."""
    dims = list(dims)
    n = len(dims)
    t = np.asarray(m).reshape(dims + dims)
    t = t.transpose(list(order) + [n + i for i in order])
    d = int(np.prod(dims))
    return t.reshape(d, d)


def embed_operator(op: np.ndarray, dims: Sequence[int], index: int) -> np.ndarray:
    """``1 ⊗ ... ⊗ op ⊗ ... ⊗ 1`` with ``op`` on subsystem ``index``."""
    mats = [np.eye(d) for d in dims]
    mats[index] = op
    return kron_all(mats)


def real_embedding(h: np.ndarray) -> np.ndarray:
    """Real symmetric ``[[Re, -Im], [Im, Re]]`` embedding of a Hermitian matrix.

    The embedding doubles every eigenvalue's multiplicity, so positivity is
    preserved in both directions.
    """
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])
