"""Central limit moments by brute force and by order classes."""

import math

import numpy as np
import pytest

from ncprob.errors import ConditioningError, PreconditionError, ResourceError, ValidationError, WindowError
from ncprob.clt import (
    class_moments,
    clt_limit,
    clt_study,
    conditional_limit_Ap,
    reference_moment,
    sn_moment_bruteforce,
    sn_moment_by_classes,
    spreadability_violation,
)
from ncprob.matalg import SIGMA_X, BlockAlgebra, FaithfulState
from ncprob.seqmodel import codomain_perturbed_sequence, coin_mixture_sequence, iid_tensor_sequence
from ncprob.subalg import generate_subalgebra
from ncprob.tuplecomb import enumerate_pair_classes

M2 = BlockAlgebra.full(2)
SX = M2.basis_labels.index("sx")
ATOMS = [(0.3, 0.5), (0.7, 0.5)]


@pytest.fixture(scope="module")
def iid32():
    return iid_tensor_sequence(M2, FaithfulState.tracial(M2), 32)


def test_fourth_moment_both_paths(iid32):
    # N^-2 (N E x^4 + 3 N (N - 1) (E x^2)^2) with x = sigma_x
    for N in (2, 3, 4, 8, 16, 32):
        want = 3 - 2 / N
        assert sn_moment_by_classes(iid32, SX, 4, N) == pytest.approx(want, abs=1e-10)
    for N in (2, 3, 4, 8, 16, 32):
        assert sn_moment_bruteforce(iid32, SX, 4, N) == pytest.approx(3 - 2 / N, abs=1e-10)


def test_sixth_moment():
    m = iid_tensor_sequence(M2, FaithfulState.tracial(M2), 8)
    for N in (2, 5, 8):
        # pairings of 6 points with matched blocks: sum over set partitions into even blocks
        want = (N + 15 * N * (N - 1) + 15 * N * (N - 1) * (N - 2)) / N**3
        assert sn_moment_by_classes(m, SX, 6, N) == pytest.approx(want, abs=1e-10)
        assert sn_moment_bruteforce(m, SX, 6, N) == pytest.approx(want, abs=1e-10)
    lim = clt_limit(m, SX, 6)
    assert lim.value == pytest.approx(15) and lim.double_factorial == 15


def test_limit_and_study(iid32):
    lim = clt_limit(iid32, SX, 4)
    assert lim.value == pytest.approx(3, abs=1e-12) and lim.a_p == pytest.approx(1)
    assert len(lim.class_table) == 6
    r = clt_study(iid32, SX, 4, [2, 8, 32], ratios=True)
    assert r.max_path_disagreement <= 1e-10
    assert r.references == {"gaussian": 3.0, "semicircle": 2.0}
    assert r.ratios["a_4/a_2^2"] == pytest.approx(1)
    lines = r.table_csv().splitlines()
    assert lines[0].startswith("N,p,") and len(lines) == 4
    assert clt_limit(iid32, SX, 3).value == 0


def test_odd_and_zero_degree(iid32):
    assert sn_moment_by_classes(iid32, SX, 3, 5) == pytest.approx(0, abs=1e-12)
    assert clt_limit(iid32, SX, 0).value == 1


def test_non_spreadable_model_is_refused():
    m = codomain_perturbed_sequence(-1, 4)
    assert spreadability_violation(m, SX, 4) == pytest.approx(2)
    with pytest.raises(PreconditionError):
        sn_moment_by_classes(m, SX, 4, 4)
    r = clt_study(m, SX, 4, [2, 4])
    assert r.limit is None and r.classes == (None, None) and r.notes
    assert r.bruteforce[0] is not None


def test_brute_force_guards(iid32):
    with pytest.raises(ResourceError):
        sn_moment_bruteforce(iid32, SX, 8, 32)
    with pytest.raises(ValidationError):
        sn_moment_bruteforce(iid32, M2.from_matrix(np.array([[0, 1], [0, 0]])), 2, 2)
    with pytest.raises(WindowError):
        sn_moment_bruteforce(iid_tensor_sequence(M2, FaithfulState.tracial(M2), 3), SX, 2, 4)


def test_centering_against_candidate():
    m = coin_mixture_sequence(ATOMS, 4)
    h = m.base.basis_labels.index("b0:1")
    with pytest.raises(PreconditionError):
        clt_limit(m, h, 4, candidate=m.candidate("scalars"))
    lim = clt_limit(m, h, 4, candidate=m.candidate("scalars"), auto_center=True)
    assert lim.centering["auto_centered"] and lim.centering["subtracted"]["re"] == pytest.approx(0.5)
    # not centerable in the base algebra over the fiber scalars
    with pytest.raises(PreconditionError, match="not a scalar"):
        clt_limit(m, h, 4, candidate=m.candidate("fiber_scalars"), auto_center=True)


def test_conditional_fourth_moment_for_coins():
    m = coin_mixture_sequence(ATOMS, 4)
    h = m.base.basis_labels.index("b0:1")
    r = conditional_limit_Ap(m, h, 4, m.candidate("fiber_scalars"))
    assert r.closed_form_deviation <= 1e-9
    # E(y_0^2) = sum_k p_k (1 - p_k) 1_k
    units = m.extras["fiber_units"]
    want = units[0] * (3 * 0.21**2) + units[1] * (3 * 0.21**2)
    assert r.value.allclose(want, 1e-9)
    assert conditional_limit_Ap(m, h, 3, m.candidate("fiber_scalars")).closed_form_deviation == 0


def test_conditional_needs_valid_candidate():
    st = FaithfulState.from_density(M2, np.diag([0.8, 0.2]))
    m = iid_tensor_sequence(M2, st, 4)
    bad = generate_subalgebra(m.ambient, m.state, [m.image(0, M2.from_matrix(SIGMA_X))])
    with pytest.raises(ConditioningError):
        conditional_limit_Ap(m, SX, 4, bad)


@pytest.mark.parametrize("p", [0, 2, 4, 6, 8, 10])
def test_reference_endpoints(p):
    assert reference_moment("q_interp", p, 1.0) == pytest.approx(reference_moment("gaussian", p))
    assert reference_moment("q_interp", p, 0.0) == pytest.approx(reference_moment("semicircle", p))
    assert reference_moment("gaussian", p) == (math.prod(range(p - 1, 0, -2)) if p else 1)


def test_q_gaussian_fourth_moment():
    # 2 + q for the q-Gaussian
    assert reference_moment("q_interp", 4, 0.3) == pytest.approx(2.3)
    assert reference_moment("gaussian", 5) == 0


def test_reference_errors():
    with pytest.raises(ValidationError):
        reference_moment("cauchy", 2)
    with pytest.raises(ValidationError):
        reference_moment("q_interp", 2, 1.5)
    with pytest.raises(ValidationError):
        reference_moment("gaussian", -2)


def test_class_moments_for_pairs(iid32):
    vals = class_moments(iid32, SX, enumerate_pair_classes(4))
    assert np.allclose(vals, 1)
