"""Symmetry verdicts, witnesses and the braid relation."""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncprob.errors import ValidationError, WindowError
from ncprob.matalg import SIGMA_X, BlockAlgebra, FaithfulState
from ncprob.seqmodel import (
    StarHom,
    codomain_perturbed_sequence,
    coin_mixture_sequence,
    custom_sequence,
    flip,
    iid_tensor_sequence,
    phase,
    u_omega,
    yang_baxter_sequence,
)
from ncprob.symcheck import check_braid_relation, check_symmetry, symmetry_hierarchy_audit

M2 = BlockAlgebra.full(2)


@pytest.mark.parametrize("omega", [1, 1j, -1, cmath.exp(1j * cmath.pi / 3)])
def test_stationarity_fails_exactly_when_omega_is_not_one(omega):
    m = codomain_perturbed_sequence(omega, 4)
    v = check_symmetry(m, "stationary", 4, tol=1e-10)
    assert v.passed is (omega == 1)
    if omega != 1:
        # the sx-moments of (0,1,0,1) and (2,3,2,3) alone differ by 1 - Re(omega)
        assert v.max_violation >= 1 - omega.real - 1e-12


def test_counterexample_witness():
    v = check_symmetry(codomain_perturbed_sequence(-1, 4), "stationary", 4, tol=1e-10)
    w = v.witness
    assert w.gap == pytest.approx(2, abs=1e-12)
    assert w.reference == (0, 1, 0, 1) and w.tuple == (1, 2, 1, 2)
    assert w.basis_labels == ("sx",) * 4
    assert w.reference_value == pytest.approx(-1) and w.tuple_value == pytest.approx(1)
    assert v.notes  # no shift semantics is recorded
    d = v.to_dict()
    assert d["witness"]["gap"] == pytest.approx(2) and d["pass"] is False
    assert d["scope"] == "up to degree 4, window 4"


def test_iid_hierarchy():
    m = iid_tensor_sequence(M2, FaithfulState.tracial(M2), 6)
    audit = symmetry_hierarchy_audit(m, degree=4, window=6, tol=1e-10)
    assert all(v.passed and v.max_violation <= 1e-10 for v in audit.verdicts)
    assert audit.monotone


def test_hierarchy_pattern_for_counterexample():
    audit = symmetry_hierarchy_audit(codomain_perturbed_sequence(-1, 4), degree=4, tol=1e-10)
    assert [v.passed for v in audit.verdicts] == [False, False, False]
    assert audit.monotone


def perturbed_state_model(delta, window=3):
    """Tensor legs with the state density (1 + delta X (x) X (x) 1 ...) / 2^L."""
    base = iid_tensor_sequence(M2, FaithfulState.tracial(M2), window)
    xx = np.kron(np.kron(SIGMA_X, SIGMA_X), np.eye(2 ** (window - 2)))
    state = FaithfulState.from_density(base.ambient, (np.eye(2**window) + delta * xx) / 2**window)
    legs = [StarHom(M2, base.base_state, base.ambient, state, e.images) for e in base.embeddings]
    return custom_sequence(M2, base.base_state, base.ambient, state, legs, shift_semantics=True)


@pytest.mark.parametrize("kind", ["exchangeable", "spreadable", "stationary"])
def test_calibration_small_perturbation_is_caught(kind):
    delta = 1e-3
    v = check_symmetry(perturbed_state_model(delta), kind, degree=3, window=3, tol=1e-9)
    assert not v.passed
    assert v.max_violation == pytest.approx(delta, rel=1e-9)
    assert v.witness.basis_labels == ("sx", "sx")
    unperturbed = check_symmetry(perturbed_state_model(0.0), kind, degree=3, window=3, tol=1e-9)
    assert unperturbed.passed


def test_coin_exchangeable():
    m = coin_mixture_sequence([(0.3, 0.5), (0.7, 0.5)], 4)
    assert check_symmetry(m, "exchangeable", 3, tol=1e-10).passed


def test_yang_baxter_spreadable():
    m = yang_baxter_sequence(u_omega(1j), 5)
    assert check_symmetry(m, "spreadable", 3, 5, tol=1e-9).passed
    # exchangeability is recorded, not asserted
    v = check_symmetry(m, "exchangeable", 3, 5, tol=1e-9)
    assert v.to_dict()["kind"] == "exchangeable"


def test_flip_model_is_exchangeable():
    m = yang_baxter_sequence(flip(2), 4)
    assert all(v.passed for v in symmetry_hierarchy_audit(m, 3).verdicts)


def test_arguments():
    m = iid_tensor_sequence(M2, FaithfulState.tracial(M2), 3)
    with pytest.raises(WindowError):
        check_symmetry(m, "stationary", 2, window=4)
    with pytest.raises(ValidationError):
        check_symmetry(m, "rotatable")
    with pytest.raises(ValidationError):
        check_symmetry(m, "stationary", 0)
    assert check_symmetry(m, "stationary", 2).window == 3


def braid_oracle(u):
    d = int(round(np.sqrt(u.shape[0])))
    a, b = np.kron(u, np.eye(d)), np.kron(np.eye(d), u)
    return np.linalg.norm(a @ b @ a - b @ a @ b, 2)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 360))
def test_u_omega_satisfies_braid_relation(deg):
    u = u_omega(phase(deg))
    r = check_braid_relation(u)
    assert r.holds and r.residual <= 1e-12
    assert braid_oracle(u) <= 1e-12


def test_generic_unitary_fails_braid_relation():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    r = check_braid_relation(q)
    assert not r.holds
    assert r.residual == pytest.approx(braid_oracle(q), rel=1e-9)


def test_braid_input_validation():
    with pytest.raises(ValidationError):
        check_braid_relation(np.eye(3))
    with pytest.raises(ValidationError):
        check_braid_relation(2 * np.eye(4))
