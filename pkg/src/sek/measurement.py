"""POVMs, their overlap, measurement channels and Stinespring isometries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sek.errors import ArgumentError
from sek.linalg import (
    as_hermitian,
    check_dim,
    kron,
    lambda_max,
    matrix_sqrt,
    operator_norm,
    ptrace,
)
from sek.states import MultipartiteState, _labels_tuple, as_state, make_rng, random_unitary

POVM_TOL = 1e-9
C_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered PSD operators ``M_x`` summing to the identity."""

    elements: tuple[np.ndarray, ...]
    outcome_labels: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        if len(self.elements) == 0:
            raise ArgumentError("a POVM needs at least one element")
        elems = tuple(as_hermitian(m) for m in self.elements)
        d = elems[0].shape[0]
        if any(m.shape != (d, d) for m in elems):
            raise ArgumentError("POVM elements must share one dimension")
        for i, m in enumerate(elems):
            w = np.linalg.eigvalsh(m)
            if w[0] < -POVM_TOL:
                raise ArgumentError(f"POVM element {i} is not PSD (min eigenvalue {w[0]:.3e})")
        dev = np.max(np.abs(sum(elems) - np.eye(d)))
        if dev > POVM_TOL:
            raise ArgumentError(f"POVM elements do not sum to identity (deviation {dev:.3e})")
        labels = tuple(str(x) for x in self.outcome_labels) or tuple(str(i) for i in range(len(elems)))
        if len(labels) != len(elems):
            raise ArgumentError("one outcome label per element is required")
        for m in elems:
            m.setflags(write=False)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "outcome_labels", labels)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self):
        return len(self.elements)

    def probabilities(self, rho) -> np.ndarray:
        """Born-rule outcome probabilities ``tr(M_x rho)`` for an operator on this system."""
        m = as_state(rho).matrix if isinstance(rho, MultipartiteState) else np.asarray(rho)
        return np.array([np.trace(e @ m).real for e in self.elements])


def projective(basis: np.ndarray, labels: Sequence[str] = (), name: str = "") -> Povm:
    """Rank-one projective measurement onto the columns of ``basis``."""
    basis = np.asarray(basis, dtype=complex)
    return Povm(tuple(np.outer(basis[:, i], basis[:, i].conj()) for i in range(basis.shape[1])), tuple(labels), name)


def computational(d: int = 2) -> Povm:
    return projective(np.eye(d), name=f"computational{d}")


def hadamard() -> Povm:
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    return projective(h, ("+", "-"), name="hadamard")


def fourier(d: int) -> Povm:
    """Measurement in the discrete Fourier basis, unbiased to the computational one."""
    k = np.arange(d)
    f = np.exp(2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)
    return projective(f, name=f"fourier{d}")


def bb84_pair() -> tuple[Povm, Povm]:
    return computational(2), hadamard()


def random_projective(dim: int, seed=None) -> Povm:
    return projective(random_unitary(dim, seed), name="random-projective")


def random_povm(dim: int, outcomes: int, seed=None) -> Povm:
    """Random POVM ``S^{-1/2} G_x S^{-1/2}`` from Wishart-distributed ``G_x``."""
    rng = make_rng(seed)
    gs = []
    for _ in range(outcomes):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        gs.append(g @ g.conj().T)
    total = sum(gs)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    elems = [inv_sqrt @ g @ inv_sqrt for g in gs]
    # cancel roundoff so the sum is the identity to machine precision
    drift = (sum(elems) - np.eye(dim)) / outcomes
    elems = [(e - drift + (e - drift).conj().T) / 2 for e in elems]
    return Povm(tuple(elems), name="random-povm")


@dataclass(frozen=True)
class OverlapResult:
    c: float
    q: float
    argmax: tuple[str, str]


def overlap(x: Povm, z: Povm) -> OverlapResult:
    """Largest ``||sqrt(M_x) sqrt(N_z)||^2`` over outcome pairs and ``q = -log2 c``.

    Zero elements are skipped.
    """
    if x.dim != z.dim:
        raise ArgumentError(f"POVM dimensions differ: {x.dim} vs {z.dim}")
    rx = [(lb, matrix_sqrt(m)) for lb, m in zip(x.outcome_labels, x.elements) if np.any(m)]
    rz = [(lb, matrix_sqrt(m)) for lb, m in zip(z.outcome_labels, z.elements) if np.any(m)]
    if not rx or not rz:
        raise ArgumentError("every element of a POVM is zero")
    best, arg = -1.0, ("", "")
    for lx, sx in rx:
        for lz, sz in rz:
            val = operator_norm(sx @ sz) ** 2
            if val > best:
                best, arg = val, (lx, lz)
    c = min(1.0, max(best, C_FLOOR))
    return OverlapResult(c=c, q=-math.log2(c), argmax=arg)


# ---------------------------------------------------------------------------
# Post-measurement states


@dataclass(frozen=True, eq=False)
class CqState:
    """Classical register plus conditional operators ``tau^x`` on ``labels``."""

    taus: tuple[np.ndarray, ...]
    outcome_labels: tuple[str, ...]
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def probabilities(self) -> np.ndarray:
        return np.array([np.trace(t).real for t in self.taus])

    def to_state(self, register: str = "X") -> MultipartiteState:
        """``sum_x |x><x| ⊗ tau^x`` with the register first."""
        n = len(self.taus)
        d = self.taus[0].shape[0]
        check_dim(n * d)
        m = np.zeros((n * d, n * d), dtype=complex)
        for i, t in enumerate(self.taus):
            m[i * d:(i + 1) * d, i * d:(i + 1) * d] = t
        return MultipartiteState(m, (n,) + self.dims, (register,) + self.labels)


def measure_to_cq(s, povm: Povm, measured: str, keep=()) -> CqState:
    """Measure subsystem ``measured`` and keep the subsystems in ``keep``.

    Returns ``tau^x = Tr_rest((M_x ⊗ 1) s)`` on ``keep``, which appear in the
    order they have in ``s``.
    """
    s = as_state(s)
    keep = set(_labels_tuple(keep))
    if measured in keep:
        raise ArgumentError("the measured subsystem cannot also be kept")
    if povm.dim != s.dims[s.index(measured)]:
        raise ArgumentError(
            f"POVM dimension {povm.dim} does not match subsystem {measured!r} of dimension {s.dim_of(measured)}"
        )
    kept = tuple(lb for lb in s.labels if lb in keep)
    if len(kept) != len(keep):
        missing = keep - set(kept)
        raise ArgumentError(f"unknown labels {sorted(missing)}")
    joint = s.reduce((measured,) + kept)
    da = povm.dim
    db = joint.dim // da
    t = joint.matrix.reshape(da, db, da, db)
    taus = tuple(np.einsum("ab,bjak->jk", m, t) for m in povm.elements)
    dims = tuple(s.dims[s.index(lb)] for lb in kept)
    return CqState(taus, povm.outcome_labels, dims, kept)


def measurement_channel(s, povm: Povm, measured: str, register: str = "X") -> MultipartiteState:
    """Replace ``measured`` by a classical outcome register, keeping all other systems."""
    s = as_state(s)
    rest = tuple(lb for lb in s.labels if lb != measured)
    return measure_to_cq(s, povm, measured, rest).to_state(register)


# ---------------------------------------------------------------------------
# Stinespring dilation


@dataclass(frozen=True, eq=False)
class Isometry:
    """Linear map with orthonormal columns between labelled tensor spaces."""

    matrix: np.ndarray
    input_dims: tuple[int, ...]
    input_labels: tuple[str, ...]
    output_dims: tuple[int, ...]
    output_labels: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (int(np.prod(self.output_dims)), int(np.prod(self.input_dims))):
            raise ArgumentError("isometry matrix shape does not match its dimensions")
        dev = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1])))
        if dev > 1e-9:
            raise ArgumentError(f"columns are not orthonormal (deviation {dev:.3e})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def relabel(self, output_labels: Sequence[str]) -> "Isometry":
        return Isometry(self.matrix, self.input_dims, self.input_labels, self.output_dims, tuple(output_labels))

    def apply(self, s) -> MultipartiteState:
        """Conjugate the input subsystems of ``s``; outputs take their place."""
        s = as_state(s)
        idx = [s.index(lb) for lb in self.input_labels]
        if [s.dims[i] for i in idx] != list(self.input_dims):
            raise ArgumentError("isometry input dimensions do not match the state")
        others = [lb for lb in s.labels if lb not in self.input_labels]
        clash = set(others) & set(self.output_labels)
        if clash:
            raise ArgumentError(f"output labels {sorted(clash)} already used by the state")
        ordered = s.permute(tuple(self.input_labels) + tuple(others))
        rest = ordered.dim // self.matrix.shape[1]
        op = kron(self.matrix, np.eye(rest))
        m = op @ ordered.matrix @ op.conj().T
        return MultipartiteState(m, self.output_dims + ordered.dims[len(idx):], self.output_labels + tuple(others))


def stinespring(povm: Povm, system: str = "A", registers: tuple[str, str] = ("X", "X'")) -> Isometry:
    """``U = sum_x |x> ⊗ |x> ⊗ sqrt(M_x)``, output order: register, copy, system."""
    n, d = len(povm), povm.dim
    cols = np.zeros((n * n * d, d), dtype=complex)
    for i, m in enumerate(povm.elements):
        e = np.zeros((n * n, 1))
        e[i * n + i, 0] = 1.0
        cols += np.kron(e, matrix_sqrt(m))
    return Isometry(cols, (d,), (system,), (n, n, d), (registers[0], registers[1], system))


# ---------------------------------------------------------------------------
# Audits of the operator inequalities behind the uncertainty relation


def proof_operator_bound(x: Povm, z: Povm) -> float:
    """``max_{x,z} lambda_max(sqrt(N_z) M_x sqrt(N_z)) - c``; never positive beyond roundoff."""
    if x.dim != z.dim:
        raise ArgumentError("POVM dimensions differ")
    c = overlap(x, z).c
    worst = -np.inf
    for nz in z.elements:
        r = matrix_sqrt(nz)
        for mx in x.elements:
            worst = max(worst, lambda_max(r @ mx @ r))
    return float(worst - c)


def channel_operator(z: Povm, x: Povm, sigma) -> np.ndarray:
    """``Tr_{X'A}( W (1_Z ⊗ sigma_{Z'AB}) W^dagger )`` with ``W = U V^dagger``, on ``X ⊗ B``.

    ``sigma`` is an operator on ``Z' ⊗ A ⊗ B`` (given as a state with three
    subsystems in that order, or a plain matrix whose B dimension is
    inferred).
    """
    if x.dim != z.dim:
        raise ArgumentError("POVM dimensions differ")
    nz, nx, da = len(z), len(x), x.dim
    mat = as_state(sigma).matrix if isinstance(sigma, MultipartiteState) else np.asarray(sigma, dtype=complex)
    if mat.shape[0] % (nz * da):
        raise ArgumentError(f"sigma dimension {mat.shape[0]} is not a multiple of {nz * da}")
    db = mat.shape[0] // (nz * da)
    u = stinespring(x).matrix
    v = stinespring(z).matrix
    w = u @ v.conj().T  # Z Z' A -> X X' A
    check_dim(nz * nz * da * db)
    big = np.kron(np.eye(nz), mat)
    wb = np.kron(w, np.eye(db))
    out = wb @ big @ wb.conj().T
    return ptrace(out, (nx, nx, da, db), [0, 3])


def proof_channel_bound(z: Povm, x: Povm, sigma) -> float:
    """Largest eigenvalue of ``Tr_{X'A}(W (1 ⊗ sigma) W^dagger) - c 1_X ⊗ sigma_B``."""
    nz, da = len(z), x.dim
    mat = as_state(sigma).matrix if isinstance(sigma, MultipartiteState) else np.asarray(sigma, dtype=complex)
    db = mat.shape[0] // (nz * da)
    lhs = channel_operator(z, x, mat)
    sigma_b = ptrace(mat, (nz, da, db), [2])
    c = overlap(x, z).c
    return lambda_max(lhs - c * np.kron(np.eye(len(x)), sigma_b))


__all__ = [
    "Povm",
    "OverlapResult",
    "CqState",
    "Isometry",
    "projective",
    "computational",
    "hadamard",
    "fourier",
    "bb84_pair",
    "random_projective",
    "random_povm",
    "overlap",
    "measure_to_cq",
    "measurement_channel",
    "stinespring",
    "proof_operator_bound",
    "channel_operator",
    "proof_channel_bound",
]
