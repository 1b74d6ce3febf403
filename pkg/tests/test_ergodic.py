"""Shifted moments, mixing, Cesàro averages and the refined averages T_N."""

import itertools

import pytest

from ncprob.errors import PreconditionError, ValidationError, WindowError
from ncprob.ergodic import (
    IDENTITY,
    TN_SEED,
    MonomialSpec,
    cesaro_average,
    induced_endomorphism_check,
    mixing_gap,
    refined_average_TN,
    required_window,
    shifted_moment,
    tail_estimate_deviation,
)
from ncprob.matalg import BlockAlgebra, FaithfulState
from ncprob.seqmodel import codomain_perturbed_sequence, coin_mixture_sequence, iid_tensor_sequence
from ncprob.tuplecomb import partial_shift

M2 = BlockAlgebra.full(2)
SX, SZ = M2.basis_labels.index("sx"), M2.basis_labels.index("sz")
ATOMS = [(0.3, 0.5), (0.7, 0.5)]


@pytest.fixture(scope="module")
def iid():
    return iid_tensor_sequence(M2, FaithfulState.tracial(M2), 5)


@pytest.fixture(scope="module")
def coin():
    return coin_mixture_sequence(ATOMS, 5)


def heads(model):
    return model.base.basis_labels.index("b0:1")


def test_monomial_spec():
    m = MonomialSpec((0, 2), (1, 3))
    assert m.shifted(2).tuple == (2, 4)
    assert m.adjoint() == MonomialSpec((2, 0), (3, 1))
    assert m.max_index == 2 and IDENTITY.max_index == -1
    with pytest.raises(ValidationError):
        MonomialSpec((0,), ())
    with pytest.raises(ValidationError):
        MonomialSpec((-1,), (0,))


def test_required_window():
    assert required_window(2, shift=3) == 6
    assert [required_window(1, N=N) for N in (1, 2, 3)] == [3, 6, 9]


def test_mixing_gap_vanishes_once_supports_separate(iid, coin):
    x = MonomialSpec((0,), (SX,))
    for k in range(1, 5):
        assert mixing_gap(iid, x, x, iid.candidate("scalars"), k) <= 1e-10
    h = MonomialSpec((0,), (heads(coin),))
    for k in range(1, 5):
        # psi(e0 alpha^k(e0)) = sum w p^2 = psi(e0 E(e0)) over the fiber scalars
        assert mixing_gap(coin, h, h, coin.candidate("fiber_scalars"), k) <= 1e-10
        assert mixing_gap(coin, h, h, coin.candidate("scalars"), k) == pytest.approx(0.04, abs=1e-10)


def test_cesaro_average_oracle(coin):
    h = MonomialSpec((0,), (heads(coin),))
    for n in range(1, 5):
        # k = 0 contributes psi(e0) = 0.5, every k >= 1 contributes 0.29
        want = (0.5 + (n - 1) * 0.29) / n
        assert cesaro_average(coin, h, h, n) == pytest.approx(want, abs=1e-12)


def test_cesaro_step_bound(coin):
    h = MonomialSpec((0,), (heads(coin),))
    c = [cesaro_average(coin, h, h, n) for n in range(1, 5)]
    shifted = [abs(shifted_moment(coin, h, h, k)) for k in range(4)]
    for n in range(1, 4):
        assert abs(c[n] - c[n - 1]) <= 2 * max(shifted[: n + 1]) / n + 1e-12


def test_shift_semantics_required():
    m = codomain_perturbed_sequence(-1, 4)
    x = MonomialSpec((0,), (SX,))
    with pytest.raises(PreconditionError):
        shifted_moment(m, x, x, 1)
    assert shifted_moment(m, x, x, 1, require_shift_semantics=False) == pytest.approx(0)
    with pytest.raises(ValidationError):
        shifted_moment(iid_tensor_sequence(M2, FaithfulState.tracial(M2), 3), x, x, -1)


def test_window_errors(iid):
    x = MonomialSpec((0,), (SX,))
    with pytest.raises(WindowError):
        shifted_moment(iid, x, x, 5)
    with pytest.raises(WindowError):
        cesaro_average(iid, x, x, 6)
    with pytest.raises(WindowError):
        refined_average_TN(iid, MonomialSpec((1,), (SX,)), 2)


def composite_oracle(N, kvec):
    def apply(n):
        for i in range(N, -1, -1):
            for _ in range(i * N + kvec[i]):
                n = partial_shift(i, n)
        return n
    return apply


@pytest.mark.parametrize("N", [1, 2, 3])
def test_TN_exact_matches_direct_enumeration(N):
    m = coin_mixture_sequence(ATOMS, required_window(1, N=N))
    h = heads(m)
    x = MonomialSpec((0, 1, 0), (h, h, h))
    tests = [IDENTITY, MonomialSpec((0,), (h,)), MonomialSpec((1, 0), (h, h))]
    r = refined_average_TN(m, x, N, tests)
    assert r.mode == "exact" and r.composites == N ** (N + 1)
    for t, got in zip(tests, r.values):
        acc = 0
        for kvec in itertools.product(range(N), repeat=N + 1):
            f = composite_oracle(N, kvec)
            img = tuple(f(i) for i in x.tuple)
            acc += m.psi_moment(t.tuple + img, t.basis_choice + x.basis_choice)
        assert abs(got - acc / N ** (N + 1)) <= 1e-12


def test_TN_values_and_monotone_gap():
    m = iid_tensor_sequence(M2, FaithfulState.tracial(M2), 6)
    x = MonomialSpec((0,), (SX,))
    y = [MonomialSpec((0,), (SX,))]
    vals = [refined_average_TN(m, x, N, y).values[0] for N in range(1, 5)]
    # theta_{N,k}(0) = 0 for exactly one choice of k_0 in N
    assert vals == pytest.approx([1, 1 / 2, 1 / 3, 1 / 4], abs=1e-12)
    gaps = [abs(v) for v in vals]  # psi(y) psi(x) = 0
    assert all(a >= b for a, b in zip(gaps, gaps[1:]))


def test_TN_monte_carlo_is_seeded():
    m = iid_tensor_sequence(M2, FaithfulState.tracial(M2), 6)
    x = MonomialSpec((0,), (SX,))
    y = [MonomialSpec((0,), (SX,))]
    a = refined_average_TN(m, x, 5, y, samples=400)
    b = refined_average_TN(m, x, 5, y, samples=400)
    assert a.mode == "monte_carlo" and a.seed == TN_SEED
    assert a.values == b.values and a.stderr[0] > 0
    assert abs(a.values[0] - 0.2) <= 4 * a.stderr[0]
    assert a.to_dict()["seed"] == TN_SEED
    with pytest.raises(ValidationError):
        refined_average_TN(m, x, 0)


def test_induced_endomorphism(iid):
    v = induced_endomorphism_check(iid, 1, degree=2, tol=1e-10)
    assert v.status == "pass" and v.max_violation <= 1e-10 and v.comparisons > 0
    s = induced_endomorphism_check(codomain_perturbed_sequence(-1, 4), 1, degree=2, tol=1e-10)
    assert s.status == "skipped" and "spreadable" in s.reason
    with pytest.raises(WindowError):
        induced_endomorphism_check(iid, 1, window=9)


def test_tail_estimate(iid, coin):
    assert tail_estimate_deviation(iid, 2, 1, 1) <= 1e-12
    # the mixture correlates the past with the far future
    assert tail_estimate_deviation(coin, 2, 1, 1) == pytest.approx(0.04, abs=1e-10)
