"""Conditional entropies in bits: min/max (plain and smooth), von Neumann, Rényi.

All min-/max-entropy values come from semidefinite programs built here and
solved by :mod:`sek.sdp`:

* ``H_min(A|B) = -log2 min { tr sigma : 1_A ⊗ sigma_B >= rho_AB }``
* ``H_max(A|B) = max_sigma 2 log2 F(rho_AB, 1_A ⊗ sigma_B)`` (direct form)
* ``H_max(A|B) = -H_min(A|C)`` for a purification ``rho_ABC`` (dual form)

Smoothing ranges over subnormalized states within purified distance
``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sek.errors import ArgumentError, NumericalFailure
from sek.linalg import eig_hermitian, project_psd
from sek.sdp import Block, LinearConstraint, Lmi, SdpProblem, SdpSolution, Term, kron_identity_terms, solve
from sek.states import MultipartiteState, _labels_tuple, as_state, purify

LOG_EIG_CUTOFF = 1e-12
_PURIFIER = "__R"


@dataclass
class EntropyResult:
    """Entropy in bits with its optimisation certificates.

    ``certificate_sigma`` is the normalised optimal ``sigma`` on the
    conditioning system. ``certificate_smooth`` is the optimal nearby state
    ``rho~`` (present only for ``eps > 0``); for smooth max-entropies it lives
    on the target and the purifying system ``R``, where the dual min-entropy
    is smoothed.
    """

    value: float
    certificate_sigma: MultipartiteState | None = None
    certificate_smooth: MultipartiteState | None = None
    gap: float = 0.0
    epsilon: float = 0.0


def check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not 0 <= eps < 1:
        raise ArgumentError(f"smoothing parameter must lie in [0, 1), got {eps}")
    return eps


def _split(s, target, condition):
    """Reduce ``s`` to ``target ∪ condition`` (target first)."""
    s = as_state(s)
    target = _labels_tuple(target)
    condition = _labels_tuple(condition)
    if not target:
        raise ArgumentError("target must name at least one subsystem")
    if set(target) & set(condition):
        raise ArgumentError("target and condition overlap")
    for lb in target + condition:
        s.index(lb)
    joint = s.reduce(target + condition)
    da = joint.dim_of(target)
    return joint, da, joint.dim // da, target, condition


def _embed(rows: int, offset: int, total: int) -> np.ndarray:
    e = np.zeros((total, rows))
    e[offset:offset + rows, :] = np.eye(rows)
    return e


def _placed(terms, row_off: int, col_off: int, rows: int, cols: int, total: int, scale: float = 1.0):
    """Move ``terms`` (each producing a rows x cols matrix) into a total x total LMI."""
    pr, pc = _embed(rows, row_off, total), _embed(cols, col_off, total)
    out = []
    for t in terms:
        left = np.eye(rows) if t.left is None else t.left
        right = None if t.right is None else t.right
        if right is None:
            right = np.eye(left.shape[1])
        out.append(Term(t.block, scale * (pr @ left), right @ pc.T, t.plus_adjoint))
    return tuple(out)


def _factor(rho: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """``L`` with ``L L^dagger = rho`` and as many columns as the numerical rank."""
    w, v = eig_hermitian(rho)
    keep = w > tol * max(1.0, w[-1])
    return v[:, keep] * np.sqrt(w[keep])


def _require(sol: SdpSolution, what: str) -> SdpSolution:
    if not sol.optimal:
        raise NumericalFailure(
            f"{what}: SDP ended with status {sol.status}",
            {"status": sol.status, "gap": sol.gap, "residual": sol.primal_residual, "iterations": sol.iterations},
        )
    return sol


def _sigma_state(sigma: np.ndarray, joint: MultipartiteState, condition) -> MultipartiteState:
    sigma = project_psd(sigma)
    dims = tuple(joint.dims[joint.index(lb)] for lb in condition)
    return MultipartiteState(sigma / np.trace(sigma).real, dims, condition)


def min_entropy_program(rho: np.ndarray, da: int, db: int) -> SdpProblem:
    """``min tr sigma`` s.t. ``1_A ⊗ sigma - rho >= 0`` (positivity of sigma is implied)."""
    return SdpProblem(
        blocks=(Block("sigma", db, psd=False),),
        objective={"sigma": np.eye(db)},
        lmis=(Lmi(kron_identity_terms("sigma", da, db), -rho, name="domination"),),
    )


def smooth_min_entropy_program(rho: np.ndarray, da: int, db: int, eps: float) -> SdpProblem:
    """Joint program over ``sigma`` and the smoothed state ``rho~ = rho + eps * delta``.

    With ``rho ⊕ (1 - tr rho) = L L^dagger`` and ``K = L + eps * K'``, the
    fidelity condition ``F(rho~ ⊕ (1 - tr rho~), L L^dagger) >= sqrt(1 - eps^2)``
    is the existence of ``K`` with ``K K^dagger <= rho~ ⊕ (1 - tr rho~)`` and
    ``Re tr(L^dagger K) >= sqrt(1 - eps^2)``. Dividing the Schur complement by
    ``eps`` gives the LMI used here, which stays well conditioned as
    ``eps -> 0``. That LMI also forces ``rho~ >= 0`` and ``tr rho~ <= 1``.
    """
    d = da * db
    lo = _factor(rho)
    slack = 1 - float(np.trace(rho).real)
    cols = lo.shape[1] + (1 if slack > 1e-12 else 0)
    ell = np.zeros((d + 1, cols), dtype=complex)
    ell[:d, : lo.shape[1]] = lo
    if cols > lo.shape[1]:
        ell[d, -1] = math.sqrt(slack)
    base = float(np.trace(ell.conj().T @ ell).real)

    k = cols
    total = k + d + 1
    const = np.zeros((total, total))
    const[:k, :k] = np.eye(k) / eps
    bot = _embed(d + 1, k, total)
    top = _embed(k, 0, total)
    emb = _embed(d, k, total)
    terms = [
        Term("kp", bot, top.T, plus_adjoint=True),
        Term("kp", -bot, ell.conj().T @ bot.T, plus_adjoint=True),
        Term("delta", emb, emb.T),
    ]
    for i in range(d):
        row = np.zeros((total, d))
        row[total - 1, i] = 1.0
        terms.append(Term("delta", -row, row.T))
    fidelity_lmi = Lmi(tuple(terms), const, name="fidelity")

    domination = Lmi(
        kron_identity_terms("sigma", da, db) + (Term("delta", -eps * np.eye(d)),),
        -rho,
        name="domination",
    )
    threshold = (math.sqrt(1 - eps * eps) - base) / eps
    return SdpProblem(
        blocks=(
            Block("sigma", db, psd=False),
            Block("delta", d, psd=False),
            Block("kp", d + 1, kind="complex", cols=k),
        ),
        objective={"sigma": np.eye(db)},
        lmis=(domination, fidelity_lmi),
        constraints=(LinearConstraint({"kp": ell.conj().T}, ">=", threshold, name="fidelity-threshold"),),
    )


def max_entropy_program(rho: np.ndarray, da: int, db: int) -> SdpProblem:
    """``max Re tr(L^dagger K)`` s.t. ``[[1, K^dagger], [K, 1_A ⊗ sigma]] >= 0``, ``tr sigma = 1``.

    The optimum equals ``F(rho, 1_A ⊗ sigma*)`` for ``rho = L L^dagger``.
    """
    d = da * db
    ell = _factor(rho)
    k = ell.shape[1]
    total = k + d
    const = np.zeros((total, total))
    const[:k, :k] = np.eye(k)
    terms = (Term("k", _embed(d, k, total), _embed(k, 0, total).T, plus_adjoint=True),)
    terms += _placed(kron_identity_terms("sigma", da, db), k, k, d, d, total)
    return SdpProblem(
        blocks=(Block("sigma", db, psd=False), Block("k", d, kind="complex", cols=k)),
        objective={"k": ell.conj().T},
        lmis=(Lmi(terms, const, name="fidelity"),),
        constraints=(LinearConstraint({"sigma": np.eye(db)}, "==", 1.0, name="normalisation"),),
        sense="maximize",
    )


def h_min(s, target, condition=()) -> EntropyResult:
    """Conditional min-entropy ``H_min(target | condition)``; other systems are traced out."""
    joint, da, db, _, condition = _split(s, target, condition)
    sol = _require(solve(min_entropy_program(joint.matrix, da, db)), "min-entropy")
    value = -math.log2(sol.primal_value)
    return EntropyResult(
        value=value,
        certificate_sigma=_sigma_state(sol.block_values["sigma"], joint, condition),
        gap=sol.gap,
    )


def h_min_smooth(s, target, condition=(), eps: float = 0.0) -> EntropyResult:
    """Smooth min-entropy: the largest ``H_min`` over states within purified distance ``eps``."""
    eps = check_epsilon(eps)
    if eps == 0:
        return h_min(s, target, condition)
    joint, da, db, target, condition = _split(s, target, condition)
    sol = solve(smooth_min_entropy_program(joint.matrix, da, db, eps))
    _require(sol, f"smooth min-entropy (eps={eps}); retrying with eps reduced by 1e-9 may help")
    smooth = project_psd(joint.matrix + eps * sol.block_values["delta"])
    tr = np.trace(smooth).real
    if tr > 1:
        smooth = smooth / tr
    return EntropyResult(
        value=-math.log2(sol.primal_value),
        certificate_sigma=_sigma_state(sol.block_values["sigma"], joint, condition),
        certificate_smooth=MultipartiteState(smooth, joint.dims, joint.labels),
        gap=sol.gap,
        epsilon=eps,
    )


def h_max_direct(s, target, condition=()) -> EntropyResult:
    """``max_sigma 2 log2 F(rho_AB, 1_A ⊗ sigma_B)``, solved without purifying."""
    joint, da, db, _, condition = _split(s, target, condition)
    sol = _require(solve(max_entropy_program(joint.matrix, da, db)), "max-entropy")
    return EntropyResult(
        value=2 * math.log2(sol.primal_value),
        certificate_sigma=_sigma_state(sol.block_values["sigma"], joint, condition),
        gap=sol.gap,
    )


def h_max_dual(s_pure, target, condition=()) -> EntropyResult:
    """``-H_min(target | complement)`` for a pure state on all its subsystems."""
    s = as_state(s_pure)
    if not s.is_pure():
        raise ArgumentError("h_max_dual needs a pure state; purify it first")
    target = _labels_tuple(target)
    condition = _labels_tuple(condition)
    for lb in target + condition:
        s.index(lb)
    complement = tuple(lb for lb in s.labels if lb not in target and lb not in condition)
    dual = h_min(s, target, complement)
    return EntropyResult(value=-dual.value, gap=dual.gap)


def h_max_smooth(s, target, condition=(), eps: float = 0.0) -> EntropyResult:
    """Smooth max-entropy through the duality with a minimal purification of ``rho_{target,condition}``."""
    eps = check_epsilon(eps)
    joint, _, _, target, condition = _split(s, target, condition)
    pure = purify(joint, new_label=_PURIFIER)
    dual = h_min_smooth(pure, target, (_PURIFIER,), eps)
    smooth = dual.certificate_smooth.relabel({_PURIFIER: "R"}) if dual.certificate_smooth is not None else None
    return EntropyResult(value=-dual.value, certificate_smooth=smooth, gap=dual.gap, epsilon=eps)


def _entropy_bits(m: np.ndarray) -> float:
    w = np.linalg.eigvalsh(m)
    w = w[w > LOG_EIG_CUTOFF]
    return float(-np.sum(w * np.log2(w)))


def von_neumann(s, target, condition=()) -> float:
    """``H(target | condition) = H(target, condition) - H(condition)`` in bits."""
    joint, _, _, target, condition = _split(s, target, condition)
    h_joint = _entropy_bits(joint.matrix)
    if not condition:
        return h_joint
    return h_joint - _entropy_bits(joint.reduce(condition).matrix)


def _probabilities(p: Sequence[float]) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.size == 0 or np.any(p < -1e-12) or p.sum() > 1 + 1e-9:
        raise ArgumentError("expected a (sub)probability vector")
    p = np.clip(p, 0.0, None)
    if not np.any(p > 0):
        raise ArgumentError("probability vector is all zero")
    return p


def renyi_inf(p: Sequence[float]) -> float:
    """``-log2 max_x p_x``."""
    return float(-math.log2(np.max(_probabilities(p))))


def renyi_half(p: Sequence[float]) -> float:
    """``2 log2 sum_x sqrt(p_x)``."""
    return float(2 * math.log2(np.sum(np.sqrt(_probabilities(p)))))


def binary_entropy(d: float) -> float:
    d = float(d)
    if not 0 <= d <= 1:
        raise ArgumentError(f"binary entropy needs 0 <= d <= 1, got {d}")
    if d in (0.0, 1.0):
        return 0.0
    return -d * math.log2(d) - (1 - d) * math.log2(1 - d)
