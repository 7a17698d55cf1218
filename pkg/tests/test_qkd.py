import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import binary_entropy as h_ref
from oracles import rate_zero_crossing
from sek.errors import ArgumentError
from sek.qkd import (
    QkdParams,
    basis_disagreement,
    critical_delta,
    depolarized_pair,
    disagreement_probability,
    joint_outcomes,
    key_length,
    key_length_details,
    key_length_entropic,
    max_entropy_bound,
    rate_curve,
    rate_curve_csv,
    sampled_delta_from,
    simulate_bb84,
    single_round_entropies,
)


def test_max_entropy_bound():
    assert max_entropy_bound(100, 0.0) == 0.0
    assert max_entropy_bound(1000, 0.5) == 1000.0
    assert max_entropy_bound(10_000, 0.05) == pytest.approx(2863.97, abs=0.01)


def test_key_length_examples():
    assert key_length(QkdParams(5000, 0.0)) == 5000
    assert key_length(QkdParams(10**6, 0.11)) == math.floor(10**6 * (1 - 2 * h_ref(0.11)))
    assert key_length(QkdParams(10**6, 0.11)) == 168
    assert key_length(QkdParams(10_000, 0.05)) == 4272


def test_key_length_metadata():
    d = key_length_details(QkdParams(10_000, 0.05, epsilon=0.001))
    assert d["form"] == "asymptotic-form" and d["epsilon"] == 0.001 and d["l"] == 4272
    assert d["hmin_bound"] - d["hmax_bound"] == pytest.approx(4272.06, abs=0.01)


def test_params_validation():
    for bad in (dict(n=0, delta=0.1), dict(n=10, delta=0.6), dict(n=10, delta=0.1, q=-1), dict(n=10, delta=0.1, epsilon=0)):
        with pytest.raises(ArgumentError):
            QkdParams(**bad)


@given(st.integers(1, 10**6), st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 2))
def test_key_length_monotone(n, d1, d2, q):
    lo, hi = sorted((d1, d2))
    assert key_length(QkdParams(n, hi, q)) <= key_length(QkdParams(n, lo, q))
    assert key_length(QkdParams(n, lo, q)) <= key_length(QkdParams(n + 1, lo, q))
    assert key_length(QkdParams(n, lo, q)) <= key_length(QkdParams(n, lo, q + 0.1))


def test_key_length_entropic():
    assert key_length_entropic(10, 3) == 7
    assert key_length_entropic(2.5, 2.5) == 0
    assert key_length_entropic(1, 4) == 0


def test_rate_curve_and_crossing():
    rows = rate_curve(1.0, 0.0, 0.25, 26)
    assert len(rows) == 26 and rows[0] == (0.0, 1.0)
    assert rate_curve(0.5, 0, 0.1, 3)[0][1] == 0.5
    assert 0.1099 < critical_delta(1.0) < 0.1101
    assert critical_delta(1.0) == pytest.approx(rate_zero_crossing(1.0), abs=1e-12)
    csv = rate_curve_csv(rows)
    assert csv.startswith("delta,rate\n0,1\n") and csv.endswith("\n")
    with pytest.raises(ArgumentError):
        rate_curve(1.0, 0.3, 0.2, 5)


def test_depolarized_statistics():
    p = 0.3
    rho = depolarized_pair(p)
    for basis in (0, 1):
        probs = joint_outcomes(rho, basis, basis)
        assert probs[0, 1] + probs[1, 0] == pytest.approx(disagreement_probability(p), abs=1e-12)
    assert np.allclose(joint_outcomes(rho, 0, 1), 0.25)


def test_simulation_noiseless():
    tr = simulate_bb84(1000, 0.0, 0.1, 5)
    assert tr.sampled_delta == 0.0
    assert tr.key_length == tr.n_key == tr.n_sifted - tr.sample_size
    assert not tr.aborted


def test_simulation_fully_depolarized():
    tr = simulate_bb84(20_000, 1.0, 0.2, 1)
    sigma = math.sqrt(0.25 / tr.sample_size)
    assert abs(tr.sampled_delta - 0.5) <= 4 * sigma
    assert tr.key_length == 0 and tr.aborted


def test_simulation_deterministic_and_replayable():
    a = simulate_bb84(2000, 0.1, 0.2, 11).to_dict()
    b = simulate_bb84(2000, 0.1, 0.2, 11).to_dict()
    assert a == b
    assert sampled_delta_from(a) == a["sampled_delta"]
    ba, bb = a["basis_choices_alice"], a["basis_choices_bob"]
    assert all(ba[i] == bb[i] for i in a["sample_positions"])
    assert set(a["raw_alice"]) <= {"0", "1"}


def test_basis_symmetry():
    tr = simulate_bb84(40_000, 0.2, 0.1, 3).to_dict()
    stats = basis_disagreement(tr)
    (ez, nz), (ex, nx) = stats["Z"], stats["X"]
    pz, px = ez / nz, ex / nx
    sigma = math.sqrt(0.1 * 0.9 * (1 / nz + 1 / nx))
    assert abs(pz - px) <= 4 * sigma


def test_simulation_validation():
    with pytest.raises(ArgumentError):
        simulate_bb84(0, 0.1, 0.1, 1)
    with pytest.raises(ArgumentError):
        simulate_bb84(10, 1.5, 0.1, 1)
    with pytest.raises(ArgumentError):
        simulate_bb84(10, 0.1, 1.0, 1)


def test_entropic_path_noiseless():
    r = single_round_entropies(0.0)
    assert r["hmin"] == pytest.approx(1.0, abs=1e-6)
    assert r["hmax"] == pytest.approx(0.0, abs=1e-6)
    assert r["l"] == 1
    # both key-length paths agree per round
    assert r["hmin"] - r["hmax"] == pytest.approx(key_length(QkdParams(1, 0.0)), abs=2e-5)


def test_simulated_delta_is_unbiased_binomial():
    # 60 seeds at disagreement 0.05: the sampled delta has the binomial mean and spread
    deltas, sizes = [], []
    for seed in range(60):
        tr = simulate_bb84(20_000, 0.1, 0.1, 1000 + seed)
        deltas.append(tr.sampled_delta)
        sizes.append(tr.sample_size)
    deltas = np.array(deltas)
    sigma = math.sqrt(0.05 * 0.95 / np.mean(sizes))
    assert abs(deltas.mean() - 0.05) <= 4 * sigma / math.sqrt(len(deltas))
    assert 0.7 * sigma <= deltas.std() <= 1.3 * sigma
