"""Checks of the entropic uncertainty relations on concrete instances.

Every check returns a :class:`RelationReport` whose ``slack`` is the left-hand
side minus ``q``. The four relations are

* ``class``: ``H(X|S) + H(Z|S) >= q`` with a classical register ``S``
* ``child``: ``H(X|B) + H(Z|C) >= q``
* ``mother``: ``H_min^eps(X|B) + H_max^eps(Z|C) >= q``
* ``maassen_uffink``: ``H_inf(X) + H_1/2(Z) >= q``
"""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from sek import io
from sek.entropy import h_max_direct, h_max_smooth, h_min, h_min_smooth, renyi_half, renyi_inf, von_neumann
from sek.errors import ArgumentError, NumericalFailure, RelationViolation
from sek.linalg import kron, lambda_min, ptrace
from sek.measurement import (
    Povm,
    bb84_pair,
    channel_operator,
    measure_to_cq,
    overlap,
    random_povm,
    random_projective,
    stinespring,
)
from sek.states import (
    RNG_ALGORITHM,
    MultipartiteState,
    _labels_tuple,
    as_state,
    basis_state,
    maximally_entangled,
    purify,
    random_state,
    tensor,
)

RELATIONS = ("class", "child", "mother", "maassen_uffink")
TOLERANCES = {"class": 1e-6, "child": 1e-6, "mother": 2e-5, "maassen_uffink": 1e-9}
TIGHT_SLACK = 1e-3
MAX_TOTAL_DIM = 64


@dataclass
class RelationReport:
    relation_id: str
    lhs: float
    rhs_q: float
    slack: float
    epsilon: float = 0.0
    tolerance: float = 0.0
    instance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tolerance

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _report(rid, lhs, q, eps, instance, tolerance=None) -> RelationReport:
    tol = TOLERANCES[rid] if tolerance is None else max(float(tolerance), TOLERANCES[rid])
    return RelationReport(rid, float(lhs), float(q), float(lhs - q), float(eps), tol, dict(instance or {}))


def _check_povms(s: MultipartiteState, measured: str, x: Povm, z: Povm) -> None:
    d = s.dims[s.index(measured)]
    if x.dim != d or z.dim != d:
        raise ArgumentError(f"POVM dimensions ({x.dim}, {z.dim}) do not match subsystem {measured!r} of dimension {d}")


def post_measurement(s, povm: Povm, side, measured: str = "A", register: str = "X") -> MultipartiteState:
    """``rho_{X side} = sum_x |x><x| ⊗ Tr_rest((M_x ⊗ 1) rho)`` with the register first."""
    return measure_to_cq(s, povm, measured, side).to_state(register)


def check_child(s, x: Povm, z: Povm, b=("B",), c=("C",), measured: str = "A", instance=None, tolerance=None) -> RelationReport:
    """``H(X|B) + H(Z|C) >= q``; ``b`` or ``c`` may be empty for a trivial system."""
    s = as_state(s)
    _check_povms(s, measured, x, z)
    b, c = _labels_tuple(b), _labels_tuple(c)
    xb = post_measurement(s, x, b, measured, "X")
    zc = post_measurement(s, z, c, measured, "Z")
    lhs = von_neumann(xb, "X", b) + von_neumann(zc, "Z", c)
    return _report("child", lhs, overlap(x, z).q, 0.0, instance, tolerance)


def check_mother(s, x: Povm, z: Povm, eps: float = 0.0, b=("B",), c=("C",), measured: str = "A", instance=None, tolerance=None) -> RelationReport:
    """``H_min^eps(X|B) + H_max^eps(Z|C) >= q``."""
    s = as_state(s)
    _check_povms(s, measured, x, z)
    if not 0 <= eps <= 0.3:
        raise ArgumentError(f"eps must lie in [0, 0.3] for reliable smoothing, got {eps}")
    b, c = _labels_tuple(b), _labels_tuple(c)
    xb = post_measurement(s, x, b, measured, "X")
    zc = post_measurement(s, z, c, measured, "Z")
    try:
        lhs = h_min_smooth(xb, "X", b, eps).value + h_max_smooth(zc, "Z", c, eps).value
    except NumericalFailure as exc:
        exc.diagnostics = {**exc.diagnostics, "instance": dict(instance or {})}
        raise
    return _report("mother", lhs, overlap(x, z).q, eps, instance, tolerance)


def is_classical_register(s: MultipartiteState, register: str, tol: float = 1e-9) -> bool:
    """True when ``s`` is block diagonal in the computational basis of ``register``."""
    ordered = s.permute((register,) + tuple(lb for lb in s.labels if lb != register))
    n = ordered.dims[0]
    d = ordered.dim // n
    t = ordered.matrix.reshape(n, d, n, d)
    for i in range(n):
        for j in range(n):
            if i != j and np.max(np.abs(t[i, :, j, :])) > tol:
                return False
    return True


def check_class(s, x: Povm, z: Povm, register: str | None = "S", measured: str = "A", instance=None, tolerance=None) -> RelationReport:
    """``H(X|S) + H(Z|S) >= q`` with ``S`` a classical register (or ``None`` for none)."""
    s = as_state(s)
    _check_povms(s, measured, x, z)
    side: tuple[str, ...] = ()
    if register is not None:
        if not is_classical_register(s.reduce((measured, register)), register):
            raise ArgumentError(f"conditioning register {register!r} is not classical")
        side = (register,)
    xs = post_measurement(s, x, side, measured, "X")
    zs = post_measurement(s, z, side, measured, "Z")
    lhs = von_neumann(xs, "X", side) + von_neumann(zs, "Z", side)
    return _report("class", lhs, overlap(x, z).q, 0.0, instance, tolerance)


def check_maassen_uffink(rho_a, x: Povm, z: Povm, instance=None, tolerance=None) -> RelationReport:
    """``H_inf(X) + H_1/2(Z) >= q`` from the Born-rule distributions of a single system."""
    s = as_state(rho_a)
    if len(s.dims) != 1:
        raise ArgumentError("Maassen-Uffink check expects a single-system state")
    if x.dim != s.dim or z.dim != s.dim:
        raise ArgumentError("POVM dimensions do not match the state")
    rho = s.matrix / s.trace
    lhs = renyi_inf(x.probabilities(rho)) + renyi_half(z.probabilities(rho))
    return _report("maassen_uffink", lhs, overlap(x, z).q, 0.0, instance, tolerance)


# ---------------------------------------------------------------------------
# Proof audit


@dataclass
class ProofAudit:
    """Residuals of each step of the proof for one pure instance at ``eps = 0``.

    ``duality`` is ``H_max(Z|C) + H_min(Z|Z'AB)`` (should vanish),
    ``reduction`` is ``H_min(X|B) - q - H_min(Z|Z'AB)`` (should be >= 0),
    ``transfer`` and ``domination`` are the smallest eigenvalues of the two
    operator inequalities that carry the optimal ``sigma_{Z'AB}`` over to
    ``X|B`` (both should be >= 0), and ``channel`` is the largest eigenvalue of
    the channel output minus ``c 1_X ⊗ sigma_B`` (should be <= 0).
    """

    duality: float
    reduction: float
    transfer: float
    domination: float
    channel: float


def audit_proof(s, x: Povm, z: Povm, b=("B",), c=("C",), measured: str = "A") -> ProofAudit:
    s = as_state(s)
    _check_povms(s, measured, x, z)
    b, c = _labels_tuple(b), _labels_tuple(c)
    keep = (measured,) + b + c
    s = s.reduce(keep)
    if not s.is_pure():
        s = as_state(purify(s, new_label="D"))
        c = c + ("D",)
    q = overlap(x, z).q
    v = stinespring(z, measured, ("Z", "Z'"))
    rho_z = v.apply(s)
    cond = ("Z'", measured) + b
    hz = h_min(rho_z, "Z", cond)
    zc = post_measurement(s, z, c, measured, "Z")
    hmax_zc = h_max_direct(zc, "Z", c).value
    xb = post_measurement(s, x, b, measured, "X")
    hx = h_min(xb, "X", b).value

    sigma = hz.certificate_sigma.matrix * 2 ** (-hz.value)
    nz, da = len(z), z.dim
    db = sigma.shape[0] // (nz * da)
    sigma_b = ptrace(sigma, (nz, da, db), [2])
    rho_xb = xb.matrix
    channel_out = channel_operator(z, x, sigma)
    cval = overlap(x, z).c
    return ProofAudit(
        duality=hmax_zc + hz.value,
        reduction=hx - q - hz.value,
        transfer=lambda_min(channel_out - rho_xb),
        domination=lambda_min(cval * kron(np.eye(len(x)), sigma_b) - rho_xb),
        channel=float(np.linalg.eigvalsh(channel_out - cval * kron(np.eye(len(x)), sigma_b))[-1]),
    )


# ---------------------------------------------------------------------------
# Randomized suite


def _trial_rng(seed: int, relation: str, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), RELATIONS.index(relation), int(trial)])
    return np.random.Generator(np.random.PCG64(ss))


def _random_pair(rng, dim: int, trial: int) -> tuple[Povm, Povm]:
    """Alternate between projective pairs and 3-outcome POVM pairs."""
    if trial % 2 == 0:
        return random_projective(dim, rng), random_projective(dim, rng)
    return random_povm(dim, 3, rng), random_povm(dim, 3, rng)


def _random_cq(rng, da: int, ds: int) -> MultipartiteState:
    p = rng.dirichlet(np.ones(ds))
    m = np.zeros((da * ds, da * ds), dtype=complex)
    # register S first, then A
    for i in range(ds):
        rho = random_state((da,), seed=rng).matrix
        m[i * da:(i + 1) * da, i * da:(i + 1) * da] = p[i] * rho
    return MultipartiteState(m, (ds, da), ("S", "A"))


def anchor_instance(relation: str):
    """Known tight instance: maximal entanglement / eigenstate with BB84 measurements."""
    x, z = bb84_pair()
    if relation in ("child", "mother"):
        phi = as_state(maximally_entangled(2, ("A", "B")))
        return tensor(phi, basis_state((2,), ("C",))), x, z
    if relation == "class":
        return tensor(basis_state((1,), ("S",)), basis_state((2,), ("A",))), x, z
    return basis_state((2,), ("A",)), x, z


def _run(relation: str, s, x, z, eps: float, descriptor: dict, tolerance=None) -> RelationReport:
    if relation == "child":
        return check_child(s, x, z, instance=descriptor, tolerance=tolerance)
    if relation == "mother":
        return check_mother(s, x, z, eps, instance=descriptor, tolerance=tolerance)
    if relation == "class":
        return check_class(s, x, z, instance=descriptor, tolerance=tolerance)
    return check_maassen_uffink(s, x, z, instance=descriptor, tolerance=tolerance)


def _instance(relation: str, rng, dims, trial: int):
    da = dims[0]
    x, z = _random_pair(rng, da, trial)
    if relation in ("child", "mother"):
        s = random_state(tuple(dims[:3]), seed=rng, labels=("A", "B", "C"))
    elif relation == "class":
        s = _random_cq(rng, da, dims[1])
    else:
        s = random_state((da,), seed=rng, labels=("A",))
    return s, x, z


def write_replay(path, relation: str, s, x: Povm, z: Povm, eps: float, report: RelationReport) -> Path:
    path = Path(path)
    payload = {
        "relation": relation,
        "epsilon": eps,
        "report": report.to_dict(),
        "state": io.state_to_dict(s),
        "x": io.povm_to_dict(x),
        "z": io.povm_to_dict(z),
    }
    path.write_text(io.dumps(payload), encoding="utf-8")
    return path


def load_replay(path) -> RelationReport:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    s = io.state_from_dict(obj["state"])
    x, z = io.povm_from_dict(obj["x"]), io.povm_from_dict(obj["z"])
    return _run(obj["relation"], s, x, z, float(obj["epsilon"]), obj["report"]["instance"])


def randomized_suite(config: dict, report_path=None, replay_dir=".") -> dict:
    """Run seeded random instances of each relation and aggregate the slacks.

    ``config`` keys: ``trials`` (default 10), ``dims`` (default ``[2, 2, 2]``),
    ``eps_list`` (default ``[0.0]``, used by ``mother``), ``seed`` (default 0),
    ``relations`` (default all four) and ``tolerance`` (may only loosen the
    per-relation defaults). Numerical failures are recorded and the suite
    continues; a violation beyond tolerance writes a replay file into
    ``replay_dir`` and raises :class:`RelationViolation`.
    """
    trials = int(config.get("trials", 10))
    dims = [int(d) for d in config.get("dims", [2, 2, 2])]
    eps_list = [float(e) for e in config.get("eps_list", [0.0])]
    seed = int(config.get("seed", 0))
    relations = tuple(config.get("relations", RELATIONS))
    tolerance = config.get("tolerance")
    if trials < 0:
        raise ArgumentError("trials must be nonnegative")
    if len(dims) != 3 or min(dims) < 1 or dims[0] < 2:
        raise ArgumentError("dims must list three dimensions with dim(A) >= 2")
    if math.prod(dims) > MAX_TOTAL_DIM:
        raise ArgumentError(f"total dimension {math.prod(dims)} exceeds {MAX_TOTAL_DIM}")
    for r in relations:
        if r not in RELATIONS:
            raise ArgumentError(f"unknown relation {r!r}")

    sections = {}
    for relation in relations:
        slacks, failures, tight = [], [], []
        runs = [("anchor", -1)] + [("random", t) for t in range(trials)]
        for kind, t in runs:
            if kind == "anchor":
                s, x, z = anchor_instance(relation)
            else:
                s, x, z = _instance(relation, _trial_rng(seed, relation, t), dims, t)
            eps_values = eps_list if relation == "mother" else [0.0]
            if kind == "anchor":
                eps_values = [0.0]
            for eps in eps_values:
                descriptor = {
                    "kind": kind,
                    "trial": t,
                    "seed": seed,
                    "dims": list(s.dims),
                    "povms": [x.name, z.name],
                    "epsilon": eps,
                }
                try:
                    rep = _run(relation, s, x, z, eps, descriptor, tolerance)
                except NumericalFailure as exc:
                    failures.append({**descriptor, "error": str(exc)})
                    continue
                slacks.append(rep.slack)
                if not rep.passed:
                    name = f"replay_{relation}_seed{seed}_trial{t}_eps{eps:g}.json"
                    path = write_replay(Path(replay_dir) / name, relation, s, x, z, eps, rep)
                    raise RelationViolation(
                        f"{relation} relation violated: slack {rep.slack:.3e} < -{rep.tolerance:g}",
                        replay_path=str(path),
                        report=rep,
                    )
                if rep.slack <= TIGHT_SLACK:
                    tight.append({**descriptor, "slack": rep.slack})
        sections[relation] = {
            "trials": len(slacks) + len(failures),
            "min_slack": min(slacks) if slacks else None,
            "mean_slack": float(np.mean(slacks)) if slacks else None,
            "tolerance": max(TOLERANCES[relation], float(tolerance or 0.0)),
            "failures": failures,
            "tight": tight,
        }
    report = {
        "config": {"trials": trials, "dims": dims, "eps_list": eps_list, "seed": seed, "relations": list(relations)},
        "rng": RNG_ALGORITHM,
        "relations": sections,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if report_path is not None:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report
