import numpy as np
import pytest
from hypothesis import strategies as st

from ncprob.matalg import BlockAlgebra, FaithfulState

SHAPES = [(1,), (2,), (3,), (1, 1), (2, 1), (1, 1, 1), (2, 2), (1, 2, 1)]


def random_element(alg, rng, hermitian=False):
    parts = []
    for d in alg.blocks:
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        parts.append(m + m.conj().T if hermitian else m)
    return alg.element(parts)


def random_density(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = g @ g.conj().T + 0.1 * np.eye(d)
    return r / np.trace(r).real


def random_state(alg, rng):
    w = rng.uniform(0.2, 1.0, size=alg.n_blocks)
    return FaithfulState(alg, w / w.sum(), [random_density(d, rng) for d in alg.blocks])


def dense(x):
    """Block-diagonal matrix of an element, as an independent representation."""
    n = sum(x.parent.blocks)
    out = np.zeros((n, n), dtype=complex)
    k = 0
    for b in x.blocks:
        d = b.shape[0]
        out[k:k + d, k:k + d] = b
        k += d
    return out


def state_oracle(state, x):
    """sum_b w_b tr(rho_b x_b), computed block by block."""
    return sum(w * np.trace(r @ b) for w, r, b in zip(state.weights, state.densities, x.blocks))


@st.composite
def algebra_and_seed(draw):
    return BlockAlgebra(draw(st.sampled_from(SHAPES))), draw(st.integers(0, 2**32 - 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
