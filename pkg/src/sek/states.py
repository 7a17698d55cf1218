"""Multipartite quantum states, partial traces, purifications and distances."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from sek.errors import ArgumentError
from sek.linalg import (
    PSD_TOL,
    as_hermitian,
    check_dim,
    eig_hermitian,
    matrix_sqrt,
    permute_subsystems,
    ptrace,
)

RNG_ALGORITHM = "numpy.PCG64"
TRACE_TOL = 1e-9


def make_rng(seed) -> np.random.Generator:
    """Seeded generator; an existing ``Generator`` is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _labels_tuple(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


@dataclass(frozen=True, eq=False)
class MultipartiteState:
    """A PSD operator with ``0 < tr <= 1`` on named tensor factors.

    Subnormalized states are allowed. ``dims`` and ``labels`` may both be
    empty, which describes a state on a trivial (one-dimensional) system.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        m = as_hermitian(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        labels = _labels_tuple(self.labels)
        if len(dims) != len(labels):
            raise ArgumentError(f"{len(dims)} dims but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ArgumentError(f"labels must be distinct, got {labels}")
        if any(d < 1 for d in dims):
            raise ArgumentError(f"dimensions must be positive, got {dims}")
        if int(np.prod(dims)) != m.shape[0]:
            raise ArgumentError(f"dims {dims} do not match matrix size {m.shape[0]}")
        tr = float(np.trace(m).real)
        if not 0 < tr <= 1 + TRACE_TOL:
            raise ArgumentError(f"trace {tr!r} outside (0, 1]")
        w = np.linalg.eigvalsh(m)
        if w[0] < -PSD_TOL * max(tr, 1.0):
            raise ArgumentError(f"state is not PSD (min eigenvalue {w[0]:.3e})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ArgumentError(f"unknown label {label!r}; state has {self.labels}") from None

    def dim_of(self, labels) -> int:
        return int(np.prod([self.dims[self.index(lb)] for lb in _labels_tuple(labels)]))

    def reduce(self, keep) -> "MultipartiteState":
        """Marginal on ``keep``, with the subsystems in the order given."""
        keep = _labels_tuple(keep)
        idx = [self.index(lb) for lb in keep]
        if len(set(idx)) != len(idx):
            raise ArgumentError("duplicate label in keep")
        if idx == list(range(len(self.labels))):
            return self
        m = ptrace(self.matrix, self.dims, idx)
        return MultipartiteState(m, tuple(self.dims[i] for i in idx), keep)

    def permute(self, order) -> "MultipartiteState":
        order = _labels_tuple(order)
        if sorted(order) != sorted(self.labels):
            raise ArgumentError(f"{order} is not a permutation of {self.labels}")
        idx = [self.index(lb) for lb in order]
        m = permute_subsystems(self.matrix, self.dims, idx)
        return MultipartiteState(m, tuple(self.dims[i] for i in idx), order)

    def relabel(self, mapping: dict) -> "MultipartiteState":
        return MultipartiteState(self.matrix, self.dims, tuple(mapping.get(lb, lb) for lb in self.labels))

    def normalized(self) -> "MultipartiteState":
        return MultipartiteState(self.matrix / self.trace, self.dims, self.labels)

    def rank(self, tol: float = 1e-12) -> int:
        w = np.linalg.eigvalsh(self.matrix)
        return int(np.sum(w > tol * max(1.0, w[-1])))

    def is_pure(self, tol: float = 1e-9) -> bool:
        w = np.linalg.eigvalsh(self.matrix)
        return bool(np.sum(np.clip(w[:-1], 0, None)) <= tol * max(1.0, w[-1]))

    def __repr__(self):
        return f"MultipartiteState(labels={self.labels}, dims={self.dims}, trace={self.trace:.6g})"


@dataclass(frozen=True, eq=False)
class PureState:
    """A (possibly subnormalized) state vector on named tensor factors."""

    vector: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims)
        labels = _labels_tuple(self.labels)
        if not np.all(np.isfinite(v)):
            raise ArgumentError("state vector has non-finite entries")
        if int(np.prod(dims)) != v.size or len(dims) != len(labels):
            raise ArgumentError(f"dims {dims} / labels {labels} do not match vector of length {v.size}")
        check_dim(v.size)
        norm = float(np.linalg.norm(v))
        if norm == 0 or norm > 1 + TRACE_TOL:
            raise ArgumentError(f"vector norm {norm!r} outside (0, 1]")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    def to_state(self) -> MultipartiteState:
        return MultipartiteState(np.outer(self.vector, self.vector.conj()), self.dims, self.labels)


def as_state(s) -> MultipartiteState:
    if isinstance(s, MultipartiteState):
        return s
    if isinstance(s, PureState):
        return s.to_state()
    raise ArgumentError(f"expected a state, got {type(s).__name__}")


def _operator(s) -> np.ndarray:
    if isinstance(s, (MultipartiteState, PureState)):
        return as_state(s).matrix
    return as_hermitian(s)


def partial_trace(s, discard) -> MultipartiteState:
    """Trace out the subsystems named in ``discard``; the rest keep their order."""
    s = as_state(s)
    discard = set(_labels_tuple(discard))
    for lb in discard:
        s.index(lb)
    if discard == set(s.labels) and s.labels:
        raise ArgumentError("cannot trace out every subsystem")
    return s.reduce([lb for lb in s.labels if lb not in discard])


def tensor(*states) -> MultipartiteState:
    states = [as_state(s) for s in states]
    m = np.ones((1, 1), dtype=complex)
    dims, labels = (), ()
    for s in states:
        check_dim(m.shape[0] * s.dim)
        m = np.kron(m, s.matrix)
        dims += s.dims
        labels += s.labels
    return MultipartiteState(m, dims, labels)


def purify(s, new_label: str = "R", tol: float = 1e-12) -> PureState:
    """Purification ``sum_i sqrt(w_i) |e_i> ⊗ |i>`` with purifier dimension = rank.

    A subnormalized input yields a subnormalized vector of squared norm
    ``tr(s)``.
    """
    s = as_state(s)
    if new_label in s.labels:
        raise ArgumentError(f"label {new_label!r} already in use")
    w, v = eig_hermitian(s.matrix)
    keep = w > tol * max(1.0, w[-1])
    if not np.any(keep):
        raise ArgumentError("state has no support above tolerance")
    w, v = w[keep], v[:, keep]
    r = w.size
    check_dim(s.dim * r)
    # column i of v carries sqrt(w_i) and is paired with purifier basis |i>
    vec = (v * np.sqrt(w)).reshape(-1)
    return PureState(vec, s.dims + (r,), s.labels + (new_label,))


def fidelity(r, s) -> float:
    """Root fidelity ``tr|sqrt(r) sqrt(s)|``."""
    a, b = _operator(r), _operator(s)
    if a.shape != b.shape:
        raise ArgumentError(f"dimension mismatch {a.shape} vs {b.shape}")
    # fixed argument order makes the result exactly symmetric
    if a.tobytes() > b.tobytes():
        a, b = b, a
    sv = np.linalg.svd(matrix_sqrt(a) @ matrix_sqrt(b), compute_uv=False)
    return float(np.sum(sv))


def generalized_fidelity(r, s) -> float:
    """Fidelity of the trace-completed operators ``r ⊕ (1 - tr r)`` and ``s ⊕ (1 - tr s)``."""
    a, b = _operator(r), _operator(s)
    ta, tb = float(np.trace(a).real), float(np.trace(b).real)
    extra = np.sqrt(max(0.0, 1 - ta) * max(0.0, 1 - tb))
    return float(min(1.0, fidelity(a, b) + extra))


def purified_distance(r, s) -> float:
    f = generalized_fidelity(r, s)
    return float(np.sqrt(max(0.0, 1 - f * f)))


def trace_distance(r, s) -> float:
    a, b = _operator(r), _operator(s)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


# ---------------------------------------------------------------------------
# Standard states and random ensembles


def basis_state(dims: Sequence[int], labels, index: int | Sequence[int] = 0) -> MultipartiteState:
    d = int(np.prod(dims))
    if not isinstance(index, int):
        index = int(np.ravel_multi_index(tuple(index), tuple(dims)))
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return PureState(v, tuple(dims), labels).to_state()


def maximally_mixed(dims: Sequence[int], labels) -> MultipartiteState:
    d = int(np.prod(dims))
    return MultipartiteState(np.eye(d) / d, tuple(dims), labels)


def maximally_entangled(d: int, labels=("A", "B")) -> PureState:
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureState(v, (d, d), labels)


def default_labels(n: int) -> tuple[str, ...]:
    return tuple("ABCDEFGH"[:n]) if n <= 8 else tuple(f"S{i}" for i in range(n))


def random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    rng = make_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure(dims: Sequence[int], seed=None, labels=None) -> PureState:
    rng = make_rng(seed)
    d = int(np.prod(dims))
    check_dim(d)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return PureState(v, tuple(dims), labels or default_labels(len(dims)))


def random_state(dims: Sequence[int], rank: int | None = None, seed=None, labels=None) -> MultipartiteState:
    """Marginal of a Haar-random pure state on ``dims ⊗ C^rank``."""
    d = int(np.prod(dims))
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ArgumentError(f"rank must be in [1, {d}], got {rank}")
    rng = make_rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    m /= np.trace(m).real
    return MultipartiteState(m, tuple(dims), labels or default_labels(len(dims)))


# ---------------------------------------------------------------------------
# Extensions of nearby states


def close_extension(rho_ab, tau_a, keep: Iterable[str] | str) -> MultipartiteState:
    """An extension of ``tau_a`` as close to ``rho_ab`` as ``tau_a`` is to its marginal.

    ``keep`` names the subsystems of ``rho_ab`` forming ``A`` (they must match
    ``tau_a.labels``). Construction: purify ``rho_ab`` into an auxiliary
    system, pick the purification of ``tau_a`` that attains Uhlmann's bound
    against it, then trace the auxiliary system out again. When ``rho_ab`` is
    pure and ``rank(tau_a) <= dim B`` the result is pure.
    """
    rho_ab = as_state(rho_ab)
    tau_a = as_state(tau_a)
    keep = _labels_tuple(keep)
    if tuple(tau_a.labels) != keep:
        raise ArgumentError(f"tau_a labels {tau_a.labels} must equal {keep}")
    rest = tuple(lb for lb in rho_ab.labels if lb not in keep)
    ordered = rho_ab.permute(keep + rest)
    da = ordered.dim_of(keep)
    db = ordered.dim // da
    if tau_a.dim != da:
        raise ArgumentError("tau_a dimension does not match the kept subsystems")

    if ordered.is_pure():
        w, v = eig_hermitian(ordered.matrix)
        psi = v[:, -1] * np.sqrt(max(w[-1], 0.0))
        aux = 1
    else:
        pure = purify(ordered, new_label="__aux")
        psi = pure.vector
        aux = pure.dims[-1]
    wt, vt = eig_hermitian(tau_a.matrix)
    supp = vt[:, wt > 1e-12 * max(1.0, wt[-1])]
    # enlarge the environment until every eigenvector of tau_a fits
    aux *= max(1, -(-supp.shape[1] // (db * aux)))
    big_b = db * aux
    psi_mat = np.zeros((da, big_b), dtype=complex)
    psi_mat[:, : psi.size // da] = psi.reshape(da, -1)

    # the overlap tr(Psi^dagger sqrt(tau) V) is maximised by V = W U^dagger
    sq = matrix_sqrt(tau_a.matrix)
    u, sv, wh = np.linalg.svd(psi_mat.conj().T @ sq, full_matrices=False)
    r = int(np.sum(sv > 1e-14 * max(1.0, sv[0])))
    w_cols, u_cols = wh.conj().T[:, :r], u[:, :r]
    # complete V on supp(tau_a) with directions that do not touch the overlap
    rem = supp - w_cols @ (w_cols.conj().T @ supp)
    if rem.size:
        uu, ss, _ = np.linalg.svd(rem, full_matrices=False)
        extra_a = uu[:, ss > 1e-10]
        if extra_a.shape[1]:
            ub, _, _ = np.linalg.svd(np.eye(big_b) - u_cols @ u_cols.conj().T)
            w_cols = np.hstack([w_cols, extra_a])
            u_cols = np.hstack([u_cols, ub[:, : extra_a.shape[1]]])
    phi = (sq @ w_cols @ u_cols.conj().T).reshape(-1)
    out = ptrace(np.outer(phi, phi.conj()), (da, db, aux), [0, 1])
    result = MultipartiteState(out, tuple(tau_a.dims) + tuple(ordered.dims[len(keep):]), keep + rest)
    return result.permute(rho_ab.labels)
