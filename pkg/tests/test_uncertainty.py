import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import born
from sek.entropy import renyi_half, renyi_inf
from sek.errors import ArgumentError, RelationViolation
from sek.measurement import bb84_pair, computational, hadamard, random_povm, random_projective
from sek.states import (
    MultipartiteState,
    as_state,
    basis_state,
    maximally_entangled,
    maximally_mixed,
    purify,
    random_pure,
    random_state,
    tensor,
)
from sek.uncertainty import (
    RelationReport,
    anchor_instance,
    audit_proof,
    check_child,
    check_class,
    check_maassen_uffink,
    check_mother,
    load_replay,
    randomized_suite,
    write_replay,
)

seeds = st.integers(0, 2**32 - 1)
X, Z = bb84_pair()


def _phi_abc():
    return tensor(as_state(maximally_entangled(2)), basis_state((2,), ("C",)))


def test_child_tight_for_maximal_entanglement():
    rep = check_child(_phi_abc(), X, Z)
    assert rep.lhs == pytest.approx(1.0, abs=1e-9)
    assert rep.slack == pytest.approx(0.0, abs=1e-9)
    assert rep.passed


def test_child_mixed_a():
    s = tensor(maximally_mixed((2,), ("A",)), random_state((2, 2), seed=3, labels=("B", "C")))
    assert check_child(s, X, Z).slack == pytest.approx(1.0, abs=1e-9)


def test_child_dimension_mismatch():
    with pytest.raises(ArgumentError):
        check_child(random_state((3, 2, 2), seed=1), X, Z)


@settings(max_examples=30)
@given(seeds)
def test_child_random(seed):
    rng = np.random.default_rng(seed)
    s = random_state((2, 2, 2), seed=rng)
    assert check_child(s, random_povm(2, 3, rng), random_projective(2, rng)).slack >= -1e-6


def test_mother_tight_at_zero():
    rep = check_mother(_phi_abc(), X, Z, 0.0)
    assert -2e-5 <= rep.slack <= 1e-3


def test_mother_trivial_sides_reduce_to_renyi():
    rho = random_state((2,), seed=8, labels=("A",))
    rep = check_mother(rho, X, Z, 0.0, b=(), c=())
    expected = renyi_inf(born(X.elements, rho.matrix)) + renyi_half(born(Z.elements, rho.matrix))
    assert rep.lhs == pytest.approx(expected, abs=2e-6)


def test_mother_eps_range():
    with pytest.raises(ArgumentError):
        check_mother(_phi_abc(), X, Z, 0.5)


@settings(max_examples=6)
@given(seeds, st.sampled_from([0.0, 0.05]))
def test_mother_random(seed, eps):
    rng = np.random.default_rng(seed)
    s = random_state((2, 2, 2), seed=rng)
    assert check_mother(s, random_povm(2, 3, rng), random_povm(2, 3, rng), eps).slack >= -2e-5


@settings(max_examples=3)
@given(seeds)
def test_mother_purification_independent(seed):
    s = random_state((2, 2, 2), rank=2, seed=seed)
    # two purifications of rho_ABC: minimal, and one rotated on the purifier
    p = as_state(purify(s, new_label="D"))
    u = np.kron(np.eye(8), np.array([[0, 1], [1, 0]]))
    q = MultipartiteState(u @ p.matrix @ u.conj().T, p.dims, p.labels)
    a = check_mother(p, X, Z, 0.05, c=("C", "D")).lhs
    b = check_mother(q, X, Z, 0.05, c=("C", "D")).lhs
    assert a == pytest.approx(b, abs=2e-5)


def test_class_examples():
    s = tensor(basis_state((1,), ("S",)), maximally_mixed((2,), ("A",)))
    assert check_class(s, X, Z).slack == pytest.approx(1.0, abs=1e-9)
    # S records which of |0>, |+> was prepared, each with probability 1/2
    zero = basis_state((2,), ("A",), 0).matrix
    plus = np.full((2, 2), 0.5)
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = zero / 2
    m[2:, 2:] = plus / 2
    rep = check_class(MultipartiteState(m, (2, 2), ("S", "A")), X, Z)
    assert rep.slack >= -1e-6
    # H(X|S) = H(Z|S) = 1/2
    assert rep.lhs == pytest.approx(1.0, abs=1e-9)


def test_class_rejects_quantum_register():
    s = MultipartiteState(as_state(maximally_entangled(2, ("S", "A"))).matrix, (2, 2), ("S", "A"))
    with pytest.raises(ArgumentError):
        check_class(s, X, Z)


def test_maassen_uffink_examples():
    assert check_maassen_uffink(basis_state((2,), ("A",)), X, Z).slack == pytest.approx(0.0, abs=1e-12)
    assert check_maassen_uffink(maximally_mixed((2,), ("A",)), X, Z).lhs == pytest.approx(2.0, abs=1e-12)


@given(seeds)
def test_maassen_uffink_random(seed):
    assert check_maassen_uffink(random_state((2,), seed=seed), X, Z).slack >= -1e-9


def test_report_passed_flag():
    assert RelationReport("child", 0.9, 1.0, -0.1, tolerance=1e-6).passed is False
    assert RelationReport("child", 1.0, 1.0, -1e-7, tolerance=1e-6).passed is True


def test_tolerance_can_only_loosen():
    rep = check_child(_phi_abc(), X, Z, tolerance=1e-12)
    assert rep.tolerance == 1e-6


@settings(max_examples=4)
@given(seeds)
def test_proof_steps(seed):
    rng = np.random.default_rng(seed)
    s = random_pure((2, 2, 2), seed=rng)
    x, z = random_povm(2, 3, rng), random_projective(2, rng)
    a = audit_proof(s, x, z)
    assert abs(a.duality) <= 2e-6
    assert a.reduction >= -2e-6
    assert a.transfer >= -1e-7
    assert a.domination >= -1e-7
    assert a.channel <= 1e-9


def test_proof_steps_bb84_anchor():
    a = audit_proof(_phi_abc(), X, Z)
    assert abs(a.duality) <= 2e-6 and abs(a.reduction) <= 2e-6


def test_suite_structure(tmp_path):
    path = tmp_path / "r.json"
    rep = randomized_suite({"trials": 10, "dims": [2, 2, 2], "eps_list": [0.0], "seed": 3}, report_path=path)
    assert set(rep["relations"]) == {"class", "child", "mother", "maassen_uffink"}
    for sec in rep["relations"].values():
        assert {"trials", "min_slack", "mean_slack", "failures"} <= set(sec)
        assert sec["min_slack"] >= -sec["tolerance"]
    assert rep["relations"]["child"]["tight"][0]["kind"] == "anchor"
    assert json.loads(path.read_text())["config"]["seed"] == 3


def test_suite_deterministic(tmp_path):
    cfg = {"trials": 3, "seed": 9, "relations": ["child", "class", "maassen_uffink"]}
    a = randomized_suite(cfg, report_path=tmp_path / "a.json")
    b = randomized_suite(cfg, report_path=tmp_path / "b.json")
    a.pop("timestamp"), b.pop("timestamp")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    ta = [ln for ln in (tmp_path / "a.json").read_text().splitlines() if "timestamp" not in ln]
    tb = [ln for ln in (tmp_path / "b.json").read_text().splitlines() if "timestamp" not in ln]
    assert ta == tb


def test_suite_config_validation():
    with pytest.raises(ArgumentError):
        randomized_suite({"dims": [4, 4, 8]})
    with pytest.raises(ArgumentError):
        randomized_suite({"relations": ["grandmother"]})


def test_violation_writes_replay(tmp_path, monkeypatch):
    import sek.uncertainty as unc

    def broken(s, x, z, **kw):
        return unc._report("child", 0.0, 1.0, 0.0, kw.get("instance"))

    monkeypatch.setattr(unc, "check_child", broken)
    with pytest.raises(RelationViolation) as info:
        randomized_suite({"trials": 1, "relations": ["child"]}, replay_dir=tmp_path)
    replay = json.loads(open(info.value.replay_path).read())
    assert replay["relation"] == "child" and replay["report"]["slack"] == -1.0


def test_replay_roundtrip(tmp_path):
    s, x, z = anchor_instance("child")
    rep = check_child(s, x, z, instance={"kind": "anchor"})
    path = write_replay(tmp_path / "r.json", "child", s, x, z, 0.0, rep)
    again = load_replay(path)
    assert again.slack == pytest.approx(rep.slack, abs=1e-12)


def test_single_system_relations_use_hadamard_labels():
    assert hadamard().outcome_labels == ("+", "-")
    assert computational(2).outcome_labels == ("0", "1")
