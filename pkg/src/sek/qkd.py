"""BB84 key lengths from the uncertainty relation, plus a small entanglement-based simulation.

The formulas are the idealized (asymptotic-form) ones: the raw key of ``n``
bits with disagreement fraction ``delta`` yields ``n (q - 2 h(delta))`` secret
bits, where one ``n h(delta)`` pays for error correction and the other bounds
Eve's information through ``H_min(X|E) >= q n - H_max(X|X')``. No finite-size
corrections are applied.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from sek.entropy import binary_entropy, h_max_smooth, h_min_smooth
from sek.errors import ArgumentError
from sek.measurement import bb84_pair, measurement_channel
from sek.states import RNG_ALGORITHM, MultipartiteState, as_state, make_rng, maximally_entangled, purify

FORM = "asymptotic-form"
MAX_ROUNDS = 10**7
BASES = ("Z", "X")


@dataclass(frozen=True)
class QkdParams:
    n: int
    delta: float
    q: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ArgumentError(f"n must be a positive integer, got {self.n}")
        if not 0 <= self.delta <= 0.5:
            raise ArgumentError(f"delta must lie in [0, 1/2], got {self.delta}")
        if not self.q >= 0 or not math.isfinite(self.q):
            raise ArgumentError(f"q must be a nonnegative number, got {self.q}")
        if not 0 < self.epsilon < 1:
            raise ArgumentError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        object.__setattr__(self, "n", int(self.n))


def max_entropy_bound(n: int, delta: float) -> float:
    """``n h(delta)``: the error-correction cost, used as the value of ``H_max(X|X')``."""
    return n * binary_entropy(delta)


def rate(q: float, delta: float) -> float:
    """Secret bits per raw-key bit, ``max(0, q - 2 h(delta))``."""
    return max(0.0, q - 2 * binary_entropy(delta))


def key_length(p: QkdParams) -> int:
    return max(0, math.floor(p.n * (p.q - 2 * binary_entropy(p.delta))))


def key_length_details(p: QkdParams) -> dict:
    """Key length with the intermediate bounds it is assembled from."""
    hmax = max_entropy_bound(p.n, p.delta)
    return {
        "l": key_length(p),
        "n": p.n,
        "delta": p.delta,
        "q": p.q,
        "epsilon": p.epsilon,
        "hmax_bound": hmax,
        "hmin_bound": p.q * p.n - hmax,
        "substitution": "H_min^eps(X|E) >= q n - H_max^eps(X|X') (hypothetical opposite-basis run)",
        "form": FORM,
    }


def key_length_entropic(hmin: float, hmax: float) -> int:
    """``max(0, floor(H_min^eps(X|E) - H_max^eps(X|X')))``."""
    if not (math.isfinite(hmin) and math.isfinite(hmax)):
        raise ArgumentError("entropies must be finite")
    return max(0, math.floor(hmin - hmax))


def critical_delta(q: float = 1.0) -> float:
    """Smallest ``delta`` in ``[0, 1/2]`` at which the rate reaches zero."""
    if q <= 0:
        return 0.0
    if q - 2 >= 0:
        return 0.5
    return float(brentq(lambda d: q - 2 * binary_entropy(d), 0.0, 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def rate_curve(q: float, delta_min: float, delta_max: float, steps: int) -> list[tuple[float, float]]:
    if not 0 <= delta_min <= delta_max <= 0.5:
        raise ArgumentError("need 0 <= delta_min <= delta_max <= 1/2")
    if steps < 1:
        raise ArgumentError("steps must be positive")
    if q < 0:
        raise ArgumentError("q must be nonnegative")
    grid = np.linspace(delta_min, delta_max, steps) if steps > 1 else np.array([delta_min])
    return [(float(d), rate(q, float(d))) for d in grid]


def rate_curve_csv(rows) -> str:
    lines = ["delta,rate"] + [f"{d:.10g},{r:.10g}" for d, r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Simulation


def depolarized_pair(noise_p: float) -> MultipartiteState:
    """``(1 - p) |Phi+><Phi+| + p 1/4`` on ``A ⊗ B``."""
    phi = as_state(maximally_entangled(2, ("A", "B"))).matrix
    return MultipartiteState((1 - noise_p) * phi + noise_p * np.eye(4) / 4, (2, 2), ("A", "B"))


def joint_outcomes(rho: MultipartiteState, basis_a: int, basis_b: int) -> np.ndarray:
    """Born-rule distribution ``P[a, b]`` of Alice's and Bob's outcomes."""
    povms = bb84_pair()
    pa, pb = povms[basis_a], povms[basis_b]
    probs = np.empty((2, 2))
    for i, ma in enumerate(pa.elements):
        for j, mb in enumerate(pb.elements):
            probs[i, j] = np.trace(np.kron(ma, mb) @ rho.matrix).real
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _bits(a) -> str:
    return "".join("1" if v else "0" for v in a)


@dataclass
class SimTranscript:
    n: int
    sample_size: int
    basis_choices_alice: str
    basis_choices_bob: str
    raw_alice: str
    raw_bob: str
    sample_positions: list[int]
    sampled_delta: float
    key_length: int
    seed: int
    noise_p: float
    sample_fraction: float
    n_sifted: int
    n_key: int
    aborted: bool
    abort_reason: str = ""
    rng: str = RNG_ALGORITHM
    form: str = FORM

    def to_dict(self) -> dict:
        return asdict(self)


def sampled_delta_from(transcript: dict) -> float:
    """Recompute the disagreement fraction from the disclosed positions only."""
    pos = transcript["sample_positions"]
    if not pos:
        return 0.0
    a, b = transcript["raw_alice"], transcript["raw_bob"]
    return sum(a[i] != b[i] for i in pos) / len(pos)


def basis_disagreement(transcript: dict) -> dict[str, tuple[int, int]]:
    """``{basis: (disagreements, rounds)}`` over sifted rounds, per basis."""
    out = {}
    ba, bb = transcript["basis_choices_alice"], transcript["basis_choices_bob"]
    a, b = transcript["raw_alice"], transcript["raw_bob"]
    for k, name in enumerate(BASES):
        idx = [i for i in range(len(ba)) if ba[i] == bb[i] == str(k)]
        out[name] = (sum(a[i] != b[i] for i in idx), len(idx))
    return out


def simulate_bb84(n: int, noise_p: float, sample_fraction: float, seed: int) -> SimTranscript:
    """Entanglement-based BB84: depolarized pairs, random bases, sifting, sampling.

    Basis bit 0 is Z and 1 is X. ``sample_positions`` index rounds of the raw
    strings; the key is the sifted rounds that were not disclosed. A run with
    no sifted rounds, no sample, or ``sampled_delta >= critical_delta(1)`` is
    an abort with ``key_length = 0``.
    """
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= MAX_ROUNDS:
        raise ArgumentError(f"n must be an integer in [1, {MAX_ROUNDS}]")
    if not 0 <= noise_p <= 1:
        raise ArgumentError("noise_p must lie in [0, 1]")
    if not 0 < sample_fraction < 1:
        raise ArgumentError("sample_fraction must lie in (0, 1)")
    n = int(n)
    seed = int(seed)
    rng = make_rng(seed)
    rho = depolarized_pair(noise_p)
    ba = rng.integers(0, 2, n)
    bb = rng.integers(0, 2, n)
    outcomes = rng.random(n)
    ra = np.zeros(n, dtype=np.int8)
    rb = np.zeros(n, dtype=np.int8)
    for i in range(2):
        for j in range(2):
            mask = (ba == i) & (bb == j)
            cdf = np.cumsum(joint_outcomes(rho, i, j).ravel())
            k = np.minimum(np.searchsorted(cdf, outcomes[mask], side="right"), 3)
            ra[mask] = k // 2
            rb[mask] = k % 2
    sifted = np.flatnonzero(ba == bb)
    n_sifted = int(sifted.size)
    sample_size = int(round(sample_fraction * n_sifted))
    positions = np.sort(rng.choice(sifted, size=sample_size, replace=False)) if sample_size else np.array([], int)
    sampled = float(np.count_nonzero(ra[positions] != rb[positions]) / sample_size) if sample_size else 0.0
    n_key = n_sifted - sample_size

    reason = ""
    if n_sifted == 0:
        reason = "no sifted rounds"
    elif sample_size == 0:
        reason = "empty sample"
    elif n_key == 0:
        reason = "no rounds left for the key"
    elif sampled >= critical_delta(1.0):
        reason = "disagreement above the critical value"
    ell = 0 if reason else key_length(QkdParams(n_key, sampled, 1.0))
    return SimTranscript(
        n=n,
        sample_size=sample_size,
        basis_choices_alice=_bits(ba),
        basis_choices_bob=_bits(bb),
        raw_alice=_bits(ra),
        raw_bob=_bits(rb),
        sample_positions=[int(p) for p in positions],
        sampled_delta=sampled,
        key_length=ell,
        seed=seed,
        noise_p=float(noise_p),
        sample_fraction=float(sample_fraction),
        n_sifted=n_sifted,
        n_key=n_key,
        aborted=bool(reason),
        abort_reason=reason,
    )


def disagreement_probability(noise_p: float) -> float:
    """Matched-basis disagreement of a depolarized ``Phi+``: ``p / 2``."""
    return noise_p / 2


def single_round_entropies(noise_p: float = 0.0, eps: float = 0.0) -> dict:
    """SDP entropies of one Z-basis round: ``H_min^eps(X|E)`` and ``H_max^eps(X|X')``.

    ``E`` purifies the pair, so it holds everything not in Alice's or Bob's hands.
    """
    rho = depolarized_pair(noise_p)
    z = bb84_pair()[0]
    pure = as_state(purify(rho, new_label="E"))
    xe = measurement_channel(pure.reduce(("A", "E")), z, "A", "X")
    xx = measurement_channel(measurement_channel(rho, z, "A", "X"), z, "B", "X'")
    hmin = h_min_smooth(xe, "X", ("E",), eps).value
    hmax = h_max_smooth(xx, "X", ("X'",), eps).value
    return {"hmin": hmin, "hmax": hmax, "l": key_length_entropic(hmin, hmax), "epsilon": eps}
