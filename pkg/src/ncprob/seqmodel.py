"""Concrete random-sequence models on a finite window.

A model is a window of ``L`` injective, state-compatible *-homomorphisms
``iota_0 .. iota_{L-1}`` from a base algebra into an ambient block algebra.
The ambient algebra is built lazily: product-structured models (iid
tensor, coin mixtures) can also evaluate moments leg by leg, which lets
central-limit sums run on windows far beyond the dense dimension cap.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError, ResourceError, StructuralError, ValidationError, WindowError
from .matalg import (
    DEFAULT_CHAIN_CAP,
    AlgElement,
    BlockAlgebra,
    FaithfulState,
    TensorChain,
    trace_p,
)
from .subalg import Subalgebra, generate_subalgebra

HOM_TOL = 1e-9
WORD_STACK_BYTES = 1 << 28


@dataclass(frozen=True, eq=False)
class StarHom:
    """Linear map fixed by the images of the domain's hermitian basis."""

    domain: BlockAlgebra
    domain_state: FaithfulState
    codomain: BlockAlgebra
    codomain_state: FaithfulState
    images: tuple[AlgElement, ...]

    def __call__(self, x: AlgElement) -> AlgElement:
        c = self.domain.coefficients(x)
        out = self.codomain.zero()
        for ck, img in zip(c, self.images):
            if ck != 0:
                out = out + ck * img
        return out

    def compose(self, inner: StarHom) -> StarHom:
        """``self ∘ inner``."""
        if inner.codomain != self.domain:
            raise StructuralError("cannot compose maps with mismatched algebras")
        return StarHom(inner.domain, inner.domain_state, self.codomain, self.codomain_state,
                       tuple(self(img) for img in inner.images))

    def defects(self) -> dict[str, float]:
        """Residuals of the *-homomorphism, state-compatibility and injectivity conditions."""
        basis = self.domain.hermitian_basis
        unital = (self(self.domain.identity()) - self.codomain.identity()).norm()
        mult = star = 0.0
        for a, ia in zip(basis, self.images):
            star = max(star, (self(a.adj()) - ia.adj()).norm())
            for b, ib in zip(basis, self.images):
                mult = max(mult, (self(a @ b) - ia @ ib).norm())
        compat = max(abs(self.codomain_state(ia) - self.domain_state(a)) for a, ia in zip(basis, self.images))
        vecs = np.stack([self.codomain_state.whiten(ia) for ia in self.images], axis=1)
        sv = np.linalg.svd(vecs, compute_uv=False)
        return {
            "unital": float(unital),
            "multiplicative": float(mult),
            "star": float(star),
            "state_compatible": float(compat),
            "gram_min_singular": float(sv.min()),
        }

    def is_valid(self, tol: float = HOM_TOL) -> bool:
        d = self.defects()
        return (d["unital"] <= tol and d["multiplicative"] <= tol and d["star"] <= tol
                and d["state_compatible"] <= tol and d["gram_min_singular"] > tol)


def inner_automorphism(alg: BlockAlgebra, state: FaithfulState, v: AlgElement) -> StarHom:
    """``x -> v x v*`` for a unitary ``v``."""
    if not (v @ v.adj()).allclose(alg.identity(), 1e-10):
        raise ValidationError("inner automorphisms need a unitary")
    return StarHom(alg, state, alg, state, tuple(v @ b @ v.adj() for b in alg.hermitian_basis))


def identity_hom(alg: BlockAlgebra, state: FaithfulState) -> StarHom:
    return StarHom(alg, state, alg, state, alg.hermitian_basis)


@dataclass(frozen=True)
class _Dense:
    ambient: BlockAlgebra
    state: FaithfulState
    embeddings: tuple[StarHom, ...]
    extras: dict


class RandomSequenceModel:
    """Window of embeddings ``iota_0 .. iota_{L-1}`` with the mixed-moment functional.

    ``fibers`` is set for product-structured models: a list of
    ``(weight, leg_state)`` such that ``psi`` is the weighted sum over fibers
    of product states and ``iota_n`` acts on leg ``n`` only.
    """

    def __init__(
        self,
        kind: str,
        params: dict,
        base: BlockAlgebra,
        base_state: FaithfulState,
        window: int,
        builder: Callable[[], _Dense],
        shift_semantics: bool,
        fibers: Sequence[tuple[float, FaithfulState]] | None = None,
        dense_entries: int | None = None,
        cap: int = DEFAULT_CHAIN_CAP,
    ):
        if window < 1:
            raise ValidationError("window must be >= 1")
        self.kind = kind
        self.params = dict(params)
        self.base = base
        self.base_state = base_state
        self.window = window
        self.shift_semantics = shift_semantics
        self.fibers = tuple(fibers) if fibers is not None else None
        self._builder = builder
        self._dense_entries = dense_entries
        self._cap = cap

    # -- dense realization -------------------------------------------------
    @property
    def dense_available(self) -> bool:
        return self._dense_entries is None or self._dense_entries <= self._cap

    @cached_property
    def _dense(self) -> _Dense:
        if not self.dense_available:
            raise ResourceError(
                f"{self.kind} model with window {self.window} needs {self._dense_entries} complex entries "
                f"per ambient element, cap is {self._cap}"
            )
        return self._builder()

    @property
    def ambient(self) -> BlockAlgebra:
        return self._dense.ambient

    @property
    def state(self) -> FaithfulState:
        return self._dense.state

    @property
    def embeddings(self) -> tuple[StarHom, ...]:
        return self._dense.embeddings

    @property
    def extras(self) -> dict:
        return self._dense.extras

    @property
    def basis(self) -> tuple[AlgElement, ...]:
        return self.base.hermitian_basis

    def describe(self) -> dict:
        return {"kind": self.kind, "params": self.params, "window": self.window}

    def __repr__(self) -> str:
        return f"RandomSequenceModel({self.kind}, window={self.window})"

    def _check_indices(self, tup: Sequence[int]) -> None:
        for i in tup:
            if not 0 <= i < self.window:
                raise WindowError(f"index {i} outside the model window 0..{self.window - 1}; rebuild with a larger window")

    def image(self, n: int, x: AlgElement) -> AlgElement:
        """``iota_n(x)``."""
        self._check_indices((n,))
        return self.embeddings[n](x)

    def monomial(self, tup: Sequence[int], basis_choice: Sequence[int]) -> AlgElement:
        """The ambient element ``iota_{i(1)}(a_1) ... iota_{i(n)}(a_n)``."""
        if len(tup) != len(basis_choice):
            raise ValidationError("tuple and basis choice must have equal length")
        self._check_indices(tup)
        out = self.ambient.identity()
        for i, a in zip(tup, basis_choice):
            out = out @ self.embeddings[i].images[a]
        return out

    # -- moments -----------------------------------------------------------
    def psi_moment(self, tup: Sequence[int], basis_choice: Sequence[int]) -> complex:
        """``psi(iota_{i(1)}(a_1) ... iota_{i(n)}(a_n))`` with ``a_k`` taken from the hermitian basis."""
        tup, basis_choice = tuple(int(i) for i in tup), tuple(int(a) for a in basis_choice)
        if len(tup) != len(basis_choice):
            raise ValidationError("tuple and basis choice must have equal length")
        self._check_indices(tup)
        if not tup:
            return 1.0 + 0j
        if not self.dense_available:
            return self.factorized_moment(tup, [self.basis[a] for a in basis_choice])
        return self.state(self.monomial(tup, basis_choice))

    def moment_of(self, tup: Sequence[int], elements: Sequence[AlgElement]) -> complex:
        """Mixed moment with arbitrary base elements in place of basis indices."""
        if len(tup) != len(elements):
            raise ValidationError("tuple and element list must have equal length")
        self._check_indices(tup)
        if not tup:
            return 1.0 + 0j
        if not self.dense_available:
            return self.factorized_moment(tup, elements)
        out = self.ambient.identity()
        for i, x in zip(tup, elements):
            out = out @ self.embeddings[i](x)
        return self.state(out)

    def factorized_moment(self, tup: Sequence[int], elements: Sequence[AlgElement]) -> complex:
        """Leg-by-leg evaluation for product-structured models."""
        if self.fibers is None:
            raise PreconditionError(f"{self.kind} models have no product structure to factorize")
        self._check_indices(tup)
        per_leg: dict[int, AlgElement] = {}
        for i, x in zip(tup, elements):
            per_leg[i] = per_leg[i] @ x if i in per_leg else x
        total = 0j
        for w, leg_state in self.fibers:
            val = complex(w)
            for x in per_leg.values():
                val *= leg_state(x)
            total += val
        return total

    @cached_property
    def engine(self) -> MomentEngine:
        return MomentEngine(self)

    def moments(self, tup: Sequence[int], cache: bool = True) -> np.ndarray:
        """All basis-choice moments of ``tup`` as an array of shape ``(B,) * len(tup)``."""
        tup = tuple(int(i) for i in tup)
        self._check_indices(tup)
        return self.engine.moments(tup, cache)

    def identical_distribution_defect(self) -> float:
        vals = np.array([[self.psi_moment((i,), (a,)) for a in range(len(self.basis))] for i in range(self.window)])
        return float(np.abs(vals - vals[0]).max())

    def candidate(self, name: str) -> Subalgebra:
        """A named conditioning candidate: ``"scalars"`` or model-specific ones such as ``"fiber_scalars"``."""
        if name == "scalars":
            return generate_subalgebra(self.ambient, self.state, [self.ambient.identity()], labels=["1"])
        cands = self.extras.get("candidates", {})
        if name not in cands:
            raise ValidationError(f"unknown candidate {name!r}; available: {['scalars', *cands]}")
        return cands[name]()


class MomentEngine:
    """Batched mixed moments over all basis choices of a tuple.

    For a tuple split as ``left + right`` the moments are
    ``psi(L_i R_j) = sum_b w_b tr(rho_b L_i R_j)``, one matrix product of the
    weighted left word stack against the transposed right word stack.
    Word stacks are cached per sub-tuple.
    """

    def __init__(self, model: RandomSequenceModel):
        self.model = model
        st = model.state
        self.B = len(model.basis)
        self.w = st.w_parts
        self.rho = st.rho_parts
        self.images = [
            tuple(np.stack([img.parts[g] for img in emb.images]) for g in range(len(model.ambient.groups)))
            for emb in model.embeddings
        ]
        self._words: dict[tuple[int, ...], tuple[np.ndarray, ...]] = {}
        self._weighted: dict[tuple[int, ...], tuple[np.ndarray, ...]] = {}
        self._moments: dict[tuple[int, ...], np.ndarray] = {}

    def words(self, t: tuple[int, ...]) -> tuple[np.ndarray, ...]:
        if t in self._words:
            return self._words[t]
        if len(t) == 1:
            out = self.images[t[0]]
        else:
            prev, img = self.words(t[:-1]), self.images[t[-1]]
            size = sum(p.nbytes for p in prev) * self.B
            if size > WORD_STACK_BYTES:
                raise ResourceError(f"word stack for a length-{len(t)} tuple needs {size} bytes")
            out = tuple((p[:, None] @ q[None, :]).reshape((-1,) + p.shape[1:]) for p, q in zip(prev, img))
        self._words[t] = out
        return out

    def weighted(self, t: tuple[int, ...]) -> tuple[np.ndarray, ...]:
        if t not in self._weighted:
            self._weighted[t] = tuple(
                w[None, :, None, None] * (r[None] @ p) for w, r, p in zip(self.w, self.rho, self.words(t))
            )
        return self._weighted[t]

    def moments(self, t: tuple[int, ...], cache: bool = True) -> np.ndarray:
        if t in self._moments:
            return self._moments[t]
        n = len(t)
        if n == 0:
            return np.array(1.0 + 0j)
        h = (n + 1) // 2
        left = self.weighted(t[:h])
        if n == h:
            out = sum(np.einsum("knii->k", p) for p in left)
        else:
            right = self.words(t[h:])
            out = 0
            for lp, rp in zip(left, right):
                rt = np.swapaxes(rp, -1, -2)
                out = out + lp.reshape(len(lp), -1) @ rt.reshape(len(rt), -1).T
        out = np.asarray(out).reshape((self.B,) * n)
        out.setflags(write=False)
        if cache:
            self._moments[t] = out
        return out


# -- constructors -------------------------------------------------------------

def _leg_hom(chain: TensorChain, leg: int) -> StarHom:
    return StarHom(chain.base, chain.base_state, chain.algebra, chain.state,
                   tuple(chain.embed(b, leg) for b in chain.base.hermitian_basis))


def _chain_entries(base: BlockAlgebra, length: int) -> int:
    return sum(d * d for d in base.blocks) ** length


def iid_tensor_sequence(base: BlockAlgebra, base_state: FaithfulState, window: int, cap: int = DEFAULT_CHAIN_CAP) -> RandomSequenceModel:
    """``iota_n(x) = 1 ⊗ ... ⊗ x ⊗ ... ⊗ 1`` with ``x`` on leg ``n`` and the product state."""
    if base_state.parent != base:
        raise StructuralError("base state lives on a different algebra")

    def build() -> _Dense:
        chain = TensorChain(base, base_state, window, cap)
        return _Dense(chain.algebra, chain.state, tuple(_leg_hom(chain, n) for n in range(window)), {"chain": chain})

    return RandomSequenceModel(
        "iid_tensor", {"base_blocks": list(base.blocks), "base_weights": base_state.weights.tolist()},
        base, base_state, window, build, shift_semantics=True,
        fibers=[(1.0, base_state)], dense_entries=_chain_entries(base, window), cap=cap,
    )


def u_omega(omega: complex) -> np.ndarray:
    """The 4x4 unitary exchanging |01> and |10> and multiplying |11> by ``omega``."""
    u = np.zeros((4, 4), complex)
    u[0, 0] = 1
    u[1, 2] = u[2, 1] = 1
    u[3, 3] = omega
    return u


def flip(d: int = 2) -> np.ndarray:
    """The tensor flip on C^d ⊗ C^d."""
    f = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            f[j * d + i, i * d + j] = 1
    return f.astype(complex)


def _check_unimodular(omega: complex) -> complex:
    omega = complex(omega)
    if abs(abs(omega) - 1) > 1e-12:
        raise ValidationError(f"omega must be unimodular, |omega| = {abs(omega)}")
    return omega


def codomain_perturbed_sequence(omega: complex, window: int, cap: int = DEFAULT_CHAIN_CAP) -> RandomSequenceModel:
    """M_2 tensor chain with ``iota_1`` replaced by ``Ad(U_omega on legs 0,1) ∘ iota_0``."""
    omega = _check_unimodular(omega)
    if window < 4:
        raise ValidationError("the codomain-perturbed model needs a window of at least 4")
    base = BlockAlgebra.full(2)
    base_state = FaithfulState.tracial(base)

    def build() -> _Dense:
        chain = TensorChain(base, base_state, window, cap)
        legs = [_leg_hom(chain, n) for n in range(window)]
        u = chain.local(u_omega(omega), 0)
        legs[1] = StarHom(base, base_state, chain.algebra, chain.state,
                          tuple(u @ img @ u.adj() for img in legs[0].images))
        return _Dense(chain.algebra, chain.state, tuple(legs), {"chain": chain})

    return RandomSequenceModel(
        "codomain_perturbed", {"omega": {"re": omega.real, "im": omega.imag}},
        base, base_state, window, build, shift_semantics=False,
        dense_entries=_chain_entries(base, window), cap=cap,
    )


def coin_mixture_sequence(atoms: Sequence[tuple[float, float]], window: int, cap: int = DEFAULT_CHAIN_CAP) -> RandomSequenceModel:
    """Finite mixture of coin-toss product measures on ``⊕_k (C^2)^{⊗L}``.

    ``atoms`` are ``(p_k, weight_k)``.  The fiber-scalar subalgebra is
    available as the ``"fiber_scalars"`` candidate.
    """
    atoms = [(float(p), float(w)) for p, w in atoms]
    if not atoms:
        raise ValidationError("coin mixture needs at least one atom")
    ps = [p for p, _ in atoms]
    ws = np.array([w for _, w in atoms])
    if (ws <= 0).any() or abs(ws.sum() - 1) > 1e-12:
        raise ValidationError(f"atom weights must be positive and sum to 1, got {ws.tolist()}")
    if any(not 0 < p < 1 for p in ps):
        raise ValidationError(f"atom parameters must lie in (0, 1), got {ps}")
    if len(set(ps)) != len(ps):
        raise ValidationError("atom parameters must be pairwise distinct")
    base = BlockAlgebra.diagonal(2)
    pbar = float(np.dot(ws, ps))
    base_state = trace_p(pbar)
    fibers = [(w, trace_p(p)) for p, w in atoms]

    def build() -> _Dense:
        chains = [TensorChain(base, st, window, cap) for _, st in fibers]
        n_fib = len(chains[0].multi)
        ambient = BlockAlgebra.diagonal(len(atoms) * n_fib)
        weights = np.concatenate([w * c.state.weights for (w, _), c in zip(fibers, chains)])
        state = FaithfulState.from_weights(ambient, weights)

        def stitch(elems: Sequence[AlgElement]) -> AlgElement:
            return ambient.element([blk for e in elems for blk in e.blocks])

        legs = tuple(
            StarHom(base, base_state, ambient, state,
                    tuple(stitch([c.embed(b, n) for c in chains]) for b in base.hermitian_basis))
            for n in range(window)
        )
        units = [
            ambient.element([float(k * n_fib <= j < (k + 1) * n_fib) for j in range(len(atoms) * n_fib)])
            for k in range(len(atoms))
        ]
        fiber_scalars = _once(lambda: generate_subalgebra(ambient, state, units, labels=[f"fiber{k}" for k in range(len(atoms))]))
        return _Dense(ambient, state, legs, {"candidates": {"fiber_scalars": fiber_scalars}, "fiber_units": units})

    return RandomSequenceModel(
        "coin_mixture", {"atoms": [[p, w] for p, w in atoms]},
        base, base_state, window, build, shift_semantics=True,
        fibers=fibers, dense_entries=len(atoms) * 2**window, cap=cap,
    )


def _once(fn: Callable):
    box: list = []

    def get():
        if not box:
            box.append(fn())
        return box[0]

    return get


def yang_baxter_sequence(
    u: np.ndarray | AlgElement,
    window: int,
    base_state: FaithfulState | None = None,
    tol: float = 1e-10,
    cap: int = DEFAULT_CHAIN_CAP,
) -> RandomSequenceModel:
    """Braided sequence ``iota_n = rho(sigma_n ... sigma_1) iota_0`` with ``rho(sigma_k) = Ad(u on legs k-1, k)``."""
    from .symcheck import check_braid_relation

    mat = u.blocks[0] if isinstance(u, AlgElement) else np.asarray(u, dtype=complex)
    d = math.isqrt(mat.shape[0])
    if d * d != mat.shape[0] or mat.shape != (d * d, d * d):
        raise ValidationError(f"u must act on C^d ⊗ C^d, got shape {mat.shape}")
    report = check_braid_relation(mat, tol)
    if not report.holds:
        raise PreconditionError(f"u violates the braid relation: residual {report.residual:.3e} > {tol:g}")
    base = BlockAlgebra.full(d)
    base_state = base_state or FaithfulState.tracial(base)
    rho2 = np.kron(base_state.densities[0], base_state.densities[0])
    if not np.allclose(mat @ rho2 @ mat.conj().T, rho2, atol=tol):
        raise ValidationError("Ad(u) does not preserve the product state")

    def build() -> _Dense:
        chain = TensorChain(base, base_state, window, cap)
        leg0 = _leg_hom(chain, 0)
        legs = [leg0]
        w = chain.algebra.identity()
        for n in range(1, window):
            w = chain.local(mat, n - 1) @ w
            legs.append(StarHom(base, base_state, chain.algebra, chain.state,
                                tuple(w @ img @ w.adj() for img in leg0.images)))
        return _Dense(chain.algebra, chain.state, tuple(legs), {"chain": chain})

    return RandomSequenceModel(
        "yang_baxter", {"u": {"re": mat.real.tolist(), "im": mat.imag.tolist()}},
        base, base_state, window, build, shift_semantics=True,
        dense_entries=_chain_entries(base, window), cap=cap,
    )


def custom_sequence(
    base: BlockAlgebra,
    base_state: FaithfulState,
    ambient: BlockAlgebra,
    state: FaithfulState,
    embeddings: Sequence[StarHom],
    params: dict | None = None,
    shift_semantics: bool = False,
) -> RandomSequenceModel:
    """Wrap explicit embeddings (all sharing domain and codomain) as a model."""
    embeddings = tuple(embeddings)
    for e in embeddings:
        if e.domain != base or e.codomain != ambient:
            raise StructuralError("all embeddings must share the model's domain and codomain")
    dense = _Dense(ambient, state, embeddings, {})
    return RandomSequenceModel("custom", params or {}, base, base_state, len(embeddings),
                               lambda: dense, shift_semantics=shift_semantics)


def perturbed_domain_sequence(model: RandomSequenceModel, position: int, gamma: StarHom, tol: float = HOM_TOL) -> RandomSequenceModel:
    """Replace ``iota_position`` by ``iota_position ∘ gamma`` for a state-preserving automorphism ``gamma``."""
    if gamma.domain != model.base or gamma.codomain != model.base:
        raise StructuralError("gamma must be an endomorphism of the base algebra")
    d = gamma.defects()
    if d["state_compatible"] > tol:
        raise ValidationError(f"gamma does not preserve the base state (defect {d['state_compatible']:.3e})")
    if max(d["unital"], d["multiplicative"], d["star"]) > tol or d["gram_min_singular"] <= tol:
        raise ValidationError("gamma is not a *-automorphism of the base algebra")
    if not 0 <= position < model.window:
        raise WindowError(f"position {position} outside the window")
    legs = list(model.embeddings)
    legs[position] = legs[position].compose(gamma)
    dense = _Dense(model.ambient, model.state, tuple(legs), model.extras)
    params = dict(model.params, perturbed_position=position)
    trivial = all((g - b).norm() <= tol for g, b in zip(gamma.images, model.base.hermitian_basis))
    return RandomSequenceModel(model.kind if trivial else f"{model.kind}+domain_perturbed", params,
                               model.base, model.base_state, model.window, lambda: dense,
                               shift_semantics=model.shift_semantics and trivial)


def phase(degrees: float) -> complex:
    return cmath.exp(1j * math.radians(degrees))
