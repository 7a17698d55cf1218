"""Small dense semidefinite programs over complex Hermitian data.

Problems are stated with named matrix variables, linear matrix inequalities
(LMIs) and scalar linear constraints. Every variable is expanded into real
coordinates, every Hermitian LMI is mapped to its real symmetric embedding of
doubled size, and the resulting real conic program is handed to the
primal-dual interior-point method of :func:`cvxopt.solvers.conelp`
(Nesterov-Todd scaling).

A problem reads naturally in the "dual" LMI form::

    minimize   Re sum_b tr(C_b X_b)
    subject to F_0 + sum_t L_t X_{b(t)} R_t  >= 0        (one per LMI)
               Re sum_b tr(A_b X_b)  (==, <=, >=)  rhs
               X_b >= 0                                  (blocks with psd=True)

which covers the standard primal form (PSD blocks plus trace constraints) as
a special case.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from sek.errors import ArgumentError
from sek.linalg import HERMITIAN_TOL, eigvalsh, real_embedding

log = logging.getLogger(__name__)

KINDS = ("hermitian", "symmetric", "complex")
MAX_TOTAL_DIM = 128

GAP_TOL = 1e-7
FEAS_TOL = 1e-8
MAX_ITERS = 200

# cvxopt's internal stopping targets; tighter than the acceptance thresholds
# above so that the final iterate normally lands well inside them.
_CVXOPT_OPTIONS = {
    "show_progress": False,
    "maxiters": MAX_ITERS,
    "abstol": 1e-9,
    "reltol": 1e-9,
    "feastol": 1e-9,
    "refinement": 2,
}
# Cholesky is faster; QR is the more robust fallback.
_KKT_SOLVERS = ("chol", "qr")


@dataclass(frozen=True)
class Block:
    """A matrix variable.

    ``kind`` is ``"hermitian"`` (complex Hermitian ``dim x dim``),
    ``"symmetric"`` (real symmetric ``dim x dim``; ``dim=1`` gives a real
    scalar) or ``"complex"`` (general ``dim x cols``). Hermitian and symmetric
    blocks are constrained PSD unless ``psd=False``.
    """

    name: str
    dim: int
    kind: str = "hermitian"
    psd: bool = True
    cols: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown block kind {self.kind!r}")
        if self.dim < 1 or (self.cols is not None and self.cols < 1):
            raise ArgumentError(f"block {self.name!r} has non-positive dimension")
        if self.kind == "complex":
            object.__setattr__(self, "psd", False)

    @property
    def shape(self) -> tuple[int, int]:
        if self.kind == "complex":
            return (self.dim, self.cols or self.dim)
        return (self.dim, self.dim)

    def basis(self) -> np.ndarray:
        """Real-coordinate basis, shape ``(ncoords, rows, cols)``."""
        r, c = self.shape
        mats = []
        if self.kind == "complex":
            for i in range(r):
                for j in range(c):
                    e = np.zeros((r, c), dtype=complex)
                    e[i, j] = 1.0
                    mats.append(e)
                    mats.append(1j * e)
            return np.array(mats)
        n = self.dim
        for i in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, i] = 1.0
            mats.append(e)
        for i in range(n):
            for j in range(i + 1, n):
                e = np.zeros((n, n), dtype=complex)
                e[i, j] = e[j, i] = 1.0
                mats.append(e)
        if self.kind == "hermitian":
            for i in range(n):
                for j in range(i + 1, n):
                    e = np.zeros((n, n), dtype=complex)
                    e[i, j] = 1j
                    e[j, i] = -1j
                    mats.append(e)
        return np.array(mats)


@dataclass(frozen=True)
class Term:
    """``left @ X @ right`` for variable ``block``; ``None`` means identity.

    With ``plus_adjoint`` the term contributes ``T + T^dagger``; use this to
    place an off-diagonal block of a Hermitian LMI.
    """

    block: str
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    plus_adjoint: bool = False


@dataclass(frozen=True)
class Lmi:
    """``const + sum(terms) >= 0`` (Hermitian ``dim x dim``)."""

    terms: tuple[Term, ...]
    const: np.ndarray
    name: str = ""


@dataclass(frozen=True)
class LinearConstraint:
    """``Re sum_b tr(coeffs[b] @ X_b)  op  rhs`` with op in ``==, <=, >=``."""

    coeffs: Mapping[str, np.ndarray]
    op: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.op not in ("==", "<=", ">="):
            raise ArgumentError(f"unknown constraint operator {self.op!r}")


@dataclass(frozen=True)
class SdpProblem:
    blocks: tuple[Block, ...]
    objective: Mapping[str, np.ndarray]
    lmis: tuple[Lmi, ...] = ()
    constraints: tuple[LinearConstraint, ...] = ()
    sense: str = "minimize"

    def __post_init__(self):
        if self.sense not in ("minimize", "maximize"):
            raise ArgumentError(f"sense must be minimize or maximize, got {self.sense!r}")
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ArgumentError("block names must be distinct")
        known = set(names)
        for lmi in self.lmis:
            for t in lmi.terms:
                if t.block not in known:
                    raise ArgumentError(f"LMI refers to unknown block {t.block!r}")
        for con in self.constraints:
            for b in con.coeffs:
                if b not in known:
                    raise ArgumentError(f"constraint refers to unknown block {b!r}")
        for b in self.objective:
            if b not in known:
                raise ArgumentError(f"objective refers to unknown block {b!r}")

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    gap: float
    primal_residual: float
    block_values: dict[str, np.ndarray]
    lmi_duals: list[np.ndarray] = field(default_factory=list)
    iterations: int = 0
    certificate: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class _Compiled:
    c: np.ndarray
    g_lin: np.ndarray
    h_lin: np.ndarray
    g_sdp: list[np.ndarray]
    h_sdp: list[np.ndarray]
    sdp_complex: list[bool]
    a_eq: np.ndarray
    b_eq: np.ndarray
    offsets: dict[str, tuple[int, int]]
    bases: dict[str, np.ndarray]
    lmis: list[Lmi]
    sign: float


def _apply(term: Term, basis: np.ndarray) -> np.ndarray:
    out = basis
    if term.left is not None:
        out = np.einsum("ij,kjl->kil", np.asarray(term.left, dtype=complex), out)
    if term.right is not None:
        out = np.einsum("kij,jl->kil", out, np.asarray(term.right, dtype=complex))
    if term.plus_adjoint:
        out = out + out.conj().transpose(0, 2, 1)
    return out


def _coeff_row(coeffs: Mapping[str, np.ndarray], bases, offsets, n: int) -> np.ndarray:
    row = np.zeros(n)
    for name, cm in coeffs.items():
        lo, hi = offsets[name]
        cm = np.atleast_2d(np.asarray(cm, dtype=complex))
        # Re tr(C B_k) for every basis matrix B_k
        row[lo:hi] += np.einsum("ij,kji->k", cm, bases[name]).real
    return row


def _sym_to_vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m, dtype=float).reshape(-1, order="F")


def compile_problem(p: SdpProblem) -> _Compiled:
    """Expand ``p`` into the real conic program consumed by cvxopt."""
    offsets, bases = {}, {}
    n = 0
    for b in p.blocks:
        basis = b.basis()
        bases[b.name] = basis
        offsets[b.name] = (n, n + basis.shape[0])
        n += basis.shape[0]

    sign = 1.0 if p.sense == "minimize" else -1.0
    c = sign * _coeff_row(p.objective, bases, offsets, n)

    lmis = list(p.lmis)
    for b in p.blocks:
        if b.psd:
            lmis.append(Lmi((Term(b.name),), np.zeros((b.dim, b.dim)), name=f"psd:{b.name}"))

    g_sdp, h_sdp, cplx = [], [], []
    total = 0
    for lmi in lmis:
        const = np.atleast_2d(np.asarray(lmi.const, dtype=complex))
        dim = const.shape[0]
        cols = np.zeros((n, dim, dim), dtype=complex)
        for t in lmi.terms:
            lo, hi = offsets[t.block]
            contrib = _apply(t, bases[t.block])
            if contrib.shape[1:] != (dim, dim):
                raise ArgumentError(
                    f"LMI {lmi.name!r}: term on {t.block!r} has shape {contrib.shape[1:]}, expected {(dim, dim)}"
                )
            cols[lo:hi] += contrib
        if np.max(np.abs(const - const.conj().T)) > HERMITIAN_TOL or np.max(
            np.abs(cols - cols.conj().transpose(0, 2, 1)), initial=0.0
        ) > HERMITIAN_TOL:
            raise ArgumentError(f"LMI {lmi.name!r} is not Hermitian")
        is_complex = bool(np.any(np.abs(const.imag) > 0) or np.any(np.abs(cols.imag) > 0))
        if is_complex:
            h = real_embedding(const)
            g = np.stack([-real_embedding(m) for m in cols]) if n else np.zeros((0, 2 * dim, 2 * dim))
        else:
            h = const.real
            g = -cols.real
        total = max(total, h.shape[0])
        g_sdp.append(g.reshape(n, -1, order="C").T if n else np.zeros((h.size, 0)))
        # the flattening above is row-major over a symmetric matrix, which
        # coincides with cvxopt's column-major layout
        h_sdp.append(_sym_to_vec(h))
        cplx.append(is_complex)
    if total > MAX_TOTAL_DIM:
        raise ArgumentError(f"embedded LMI dimension {total} exceeds cap {MAX_TOTAL_DIM}")

    lin_rows, lin_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in p.constraints:
        row = _coeff_row(con.coeffs, bases, offsets, n)
        if con.op == "==":
            eq_rows.append(row)
            eq_rhs.append(con.rhs)
        elif con.op == "<=":
            lin_rows.append(row)
            lin_rhs.append(con.rhs)
        else:
            lin_rows.append(-row)
            lin_rhs.append(-con.rhs)

    return _Compiled(
        c=c,
        g_lin=np.array(lin_rows).reshape(-1, n),
        h_lin=np.array(lin_rhs, dtype=float),
        g_sdp=g_sdp,
        h_sdp=h_sdp,
        sdp_complex=cplx,
        a_eq=np.array(eq_rows).reshape(-1, n),
        b_eq=np.array(eq_rhs, dtype=float),
        offsets=offsets,
        bases=bases,
        lmis=lmis,
        sign=sign,
    )


def _block_values(comp: _Compiled, x: np.ndarray) -> dict[str, np.ndarray]:
    out = {}
    for name, (lo, hi) in comp.offsets.items():
        out[name] = np.einsum("k,kij->ij", x[lo:hi], comp.bases[name])
    return out


def _primal_residual(comp: _Compiled, x: np.ndarray) -> float:
    res = 0.0
    if comp.a_eq.shape[0]:
        res = max(res, float(np.max(np.abs(comp.a_eq @ x - comp.b_eq))))
    if comp.g_lin.shape[0]:
        res = max(res, float(np.max(comp.g_lin @ x - comp.h_lin, initial=0.0)))
    for g, h in zip(comp.g_sdp, comp.h_sdp):
        d = int(round(np.sqrt(h.size)))
        s = (h - g @ x).reshape(d, d, order="F")
        res = max(res, -float(eigvalsh(s.astype(complex))[0]))
    return max(res, 0.0)


def _failed(iterations: int = 0) -> SdpSolution:
    nan = float("nan")
    return SdpSolution("numerical-failure", nan, nan, float("inf"), float("inf"), {}, iterations=iterations)


def _interpret(comp: _Compiled, res: dict, h_all: np.ndarray, dims: dict) -> SdpSolution:
    iters = int(res.get("iterations", 0))
    raw = res["status"]
    nan = float("nan")
    if raw == "primal infeasible":
        z = np.array(res["z"]).ravel() if res["z"] is not None else None
        return SdpSolution("infeasible", nan, nan, float("inf"), float("inf"), {},
                           iterations=iters, certificate=z)
    if raw == "dual infeasible":
        x = np.array(res["x"]).ravel() if res["x"] is not None else None
        return SdpSolution("unbounded", nan, nan, float("inf"), float("inf"), {},
                           iterations=iters, certificate=x)
    if res["x"] is None:
        return _failed(iters)

    x = np.array(res["x"]).ravel()
    z = np.array(res["z"]).ravel()
    y = np.array(res["y"]).ravel() if comp.a_eq.shape[0] else np.zeros(0)
    primal = comp.sign * float(comp.c @ x)
    dual = comp.sign * float(-(h_all @ z) - (comp.b_eq @ y if y.size else 0.0))
    gap = abs(primal - dual)
    resid = _primal_residual(comp, x)

    lmi_duals = []
    off = dims["l"]
    for d in dims["s"]:
        lmi_duals.append(z[off:off + d * d].reshape(d, d, order="F"))
        off += d * d

    ok = gap <= GAP_TOL * (1 + abs(primal)) and resid <= FEAS_TOL
    if not ok:
        log.debug("solver status %s, gap %.3e, residual %.3e", raw, gap, resid)
    return SdpSolution(
        status="optimal" if ok else "numerical-failure",
        primal_value=primal,
        dual_value=dual,
        gap=gap,
        primal_residual=resid,
        block_values=_block_values(comp, x),
        lmi_duals=lmi_duals,
        iterations=iters,
    )


def solve(p: SdpProblem) -> SdpSolution:
    """Solve ``p`` to the package tolerances.

    ``status`` is ``"optimal"`` only when the duality gap is at most
    ``1e-7 * (1 + |primal|)`` and the primal residual at most ``1e-8``;
    ``"infeasible"`` / ``"unbounded"`` carry a certificate from the solver;
    anything else is reported as ``"numerical-failure"``.
    """
    from cvxopt import matrix, solvers

    comp = compile_problem(p)
    n = comp.c.size
    if n == 0:
        raise ArgumentError("problem has no variables")

    g_all = np.vstack([comp.g_lin] + comp.g_sdp)
    h_all = np.concatenate([comp.h_lin] + comp.h_sdp)
    dims = {
        "l": int(comp.g_lin.shape[0]),
        "q": [],
        "s": [int(round(np.sqrt(h.size))) for h in comp.h_sdp],
    }
    stacked = np.vstack([g_all, comp.a_eq]) if comp.a_eq.size else g_all
    if np.linalg.matrix_rank(stacked) < n:
        raise ArgumentError("some variable coordinates are unconstrained; the program is degenerate")

    kwargs = dict(c=matrix(comp.c), G=matrix(g_all), h=matrix(h_all), dims=dims)
    if comp.a_eq.shape[0]:
        kwargs["A"] = matrix(comp.a_eq)
        kwargs["b"] = matrix(comp.b_eq)

    best = _failed()
    for kkt in _KKT_SOLVERS:
        try:
            res = solvers.conelp(kktsolver=kkt, options=dict(_CVXOPT_OPTIONS), **kwargs)
        except (ValueError, ArithmeticError) as exc:
            log.debug("conelp(kktsolver=%s) raised %s", kkt, exc)
            continue
        sol = _interpret(comp, res, h_all, dims)
        if sol.status != "numerical-failure":
            return sol
        if not best.block_values or sol.gap < best.gap:
            best = sol
    return best


def kron_identity_terms(block: str, dim_left: int, dim_block: int, dim_right: int = 1) -> tuple[Term, ...]:
    """Terms expressing ``1_left ⊗ X ⊗ 1_right``."""
    terms = []
    for a in range(dim_left):
        for r in range(dim_right):
            ea = np.zeros((dim_left, 1))
            ea[a, 0] = 1.0
            er = np.zeros((dim_right, 1))
            er[r, 0] = 1.0
            left = np.kron(np.kron(ea, np.eye(dim_block)), er)
            terms.append(Term(block, left, left.T))
    return tuple(terms)


def write_sdpa(p: SdpProblem, path) -> None:
    """Dump the compiled real program in SDPA sparse format for inspection.

    Equalities are written as pairs of inequalities in a diagonal block.
    """
    comp = compile_problem(p)
    n = comp.c.size
    lin_g = np.vstack([comp.g_lin, comp.a_eq, -comp.a_eq])
    lin_h = np.concatenate([comp.h_lin, comp.b_eq, -comp.b_eq])
    sizes = [int(round(np.sqrt(h.size))) for h in comp.h_sdp]
    blocks = ([-lin_g.shape[0]] if lin_g.shape[0] else []) + sizes
    lines = ["* sek SDP dump: minimize c'x s.t. sum_i F_i x_i - F_0 >= 0",
             str(n), str(len(blocks)), " ".join(map(str, blocks)),
             " ".join(repr(float(v)) for v in comp.c)]

    def emit(mat_idx, blk, m):
        for i in range(m.shape[0]):
            for j in range(i, m.shape[1]):
                if m[i, j] != 0:
                    lines.append(f"{mat_idx} {blk} {i + 1} {j + 1} {float(m[i, j])!r}")

    b0 = 1
    if lin_g.shape[0]:
        emit(0, 1, np.diag(-lin_h))
        for k in range(n):
            emit(k + 1, 1, np.diag(-lin_g[:, k]))
        b0 = 2
    for bi, (g, h, d) in enumerate(zip(comp.g_sdp, comp.h_sdp, sizes)):
        emit(0, b0 + bi, -h.reshape(d, d))
        for k in range(n):
            emit(k + 1, b0 + bi, -g[:, k].reshape(d, d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


__all__ = [
    "Block",
    "Term",
    "Lmi",
    "LinearConstraint",
    "SdpProblem",
    "SdpSolution",
    "solve",
    "kron_identity_terms",
    "write_sdpa",
    "compile_problem",
]
