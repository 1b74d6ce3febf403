"""Generated *-subalgebras and psi-preserving conditional expectations.

Every subalgebra is stored as an orthonormal frame in whitened GNS
coordinates (see :meth:`FaithfulState.whiten`), so the GNS-orthogonal
projection onto it is ``Q Q^H``.  The projection always exists; whether it
is the conditional expectation is decided by modular invariance and
recorded as :class:`Validity` instead of raised.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import NCProbError, PreconditionError, ResourceError, StructuralError
from .matalg import AlgElement, BlockAlgebra, FaithfulState

MAX_ITER = 64
SUBALGEBRA_CAP = 4096
POSITIVITY_SAMPLES = 200
POSITIVITY_SEED = 20_080_611
POSITIVITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Subalgebra:
    """Unital *-subalgebra given by a psi-orthonormal frame.

    ``words`` are the (unnormalized) spanning products accepted while
    generating, with ``recipes`` naming the generators multiplied left to
    right; factorization checks and witnesses use them.
    """

    parent: BlockAlgebra
    state: FaithfulState
    frame: np.ndarray
    words: tuple[AlgElement, ...]
    recipes: tuple[tuple[str, ...], ...]
    contains_identity: bool

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @cached_property
    def basis(self) -> tuple[AlgElement, ...]:
        return tuple(self.state.unwhiten(self.frame[:, k]) for k in range(self.dim))

    def project(self, x: AlgElement) -> AlgElement:
        v = self.state.whiten(x)
        return self.state.unwhiten(self.frame @ (self.frame.conj().T @ v))

    def residual(self, x: AlgElement) -> float:
        """GNS norm of the component of ``x`` orthogonal to the subalgebra."""
        v = self.state.whiten(x)
        return float(np.linalg.norm(v - self.frame @ (self.frame.conj().T @ v)))

    def contains(self, x: AlgElement, tol: float = 1e-9) -> bool:
        scale = max(1.0, float(np.linalg.norm(self.state.whiten(x))))
        return self.residual(x) <= tol * scale

    def includes(self, other: Subalgebra, tol: float = 1e-9) -> bool:
        """Span containment ``other ⊆ self``."""
        r = other.frame - self.frame @ (self.frame.conj().T @ other.frame)
        return float(np.abs(r).max(initial=0.0)) <= tol

    def closure_defect(self) -> float:
        """Largest residual of products and adjoints of basis elements."""
        worst = 0.0
        for a in self.basis:
            worst = max(worst, self.residual(a.adj()))
            for b in self.basis:
                worst = max(worst, self.residual(a @ b))
        return worst

    def __repr__(self) -> str:
        return f"Subalgebra(dim={self.dim} in {self.parent.blocks})"


def generate_subalgebra(
    ambient: BlockAlgebra,
    state: FaithfulState,
    generators: Sequence[AlgElement],
    tol: float = 1e-9,
    labels: Sequence[str] | None = None,
    max_iter: int = MAX_ITER,
    cap: int = SUBALGEBRA_CAP,
) -> Subalgebra:
    """Smallest unital *-subalgebra containing ``generators``.

    Breadth-first closure: every accepted word is multiplied on the right by
    every generator (and generator adjoint) and kept when it is linearly
    independent of the current span.  Basis order is therefore the
    generator order followed by product-generation order.
    """
    if not generators:
        raise PreconditionError("generate_subalgebra needs at least one generator")
    if state.parent != ambient:
        raise StructuralError("state lives on a different algebra")
    labels = list(labels) if labels is not None else [f"g{k}" for k in range(len(generators))]
    gens, gen_labels = [], []
    for g, lab in zip(generators, labels):
        ambient._check(g)
        gens.append(g)
        gen_labels.append(lab)
    for g, lab in list(zip(gens, gen_labels)):
        if not g.is_hermitian(1e-12):
            gens.append(g.adj())
            gen_labels.append(lab + "*")

    rank_tol = 1e-10 * ambient.dim
    frame = np.zeros((ambient.dim, min(cap, ambient.dim) + 1), complex)
    words: list[AlgElement] = []
    recipes: list[tuple[str, ...]] = []
    depth: list[int] = []

    def accept(x: AlgElement, recipe: tuple[str, ...], level: int) -> None:
        v = state.whiten(x)
        n0 = float(np.linalg.norm(v))
        if n0 == 0.0:
            return
        r = len(words)
        q = frame[:, :r]
        for _ in range(2):
            v = v - q @ (q.conj().T @ v)
        nv = float(np.linalg.norm(v))
        if nv <= rank_tol * n0:
            return
        if r >= cap:
            raise ResourceError(f"generated subalgebra exceeds the dimension cap {cap}")
        frame[:, r] = v / nv
        words.append(x)
        recipes.append(recipe)
        depth.append(level)

    accept(ambient.identity(), (), 0)
    for g, lab in zip(gens, gen_labels):
        accept(g, (lab,), 1)
    i = 0
    while i < len(words):
        if depth[i] > max_iter:
            raise NCProbError(f"subalgebra generation did not stabilize within {max_iter} rounds")
        w, rec = words[i], recipes[i]
        for g, lab in zip(gens, gen_labels):
            accept(w @ g, rec + (lab,), depth[i] + 1)
        i += 1
    r = len(words)
    q = frame[:, :r].copy()
    q.setflags(write=False)
    return Subalgebra(ambient, state, q, tuple(words), tuple(recipes), contains_identity=True)


def scalars(ambient: BlockAlgebra, state: FaithfulState) -> Subalgebra:
    """The trivial subalgebra C1."""
    return generate_subalgebra(ambient, state, [ambient.identity()], labels=["1"])


class Validity(enum.Enum):
    VALID = "Valid"
    NOT_MODULARLY_INVARIANT = "NotModularlyInvariant"
    NOT_POSITIVE = "NotPositive"


@dataclass(frozen=True)
class ModularReport:
    invariant: bool
    residual: float

    def __bool__(self) -> bool:
        return self.invariant


def check_modular_invariance(state: FaithfulState, target: Subalgebra, tol: float = 1e-9) -> ModularReport:
    """Whether conjugation by the density maps the subalgebra into itself.

    In finite dimension this is equivalent to invariance under the modular
    group ``D^{it} . D^{-it}``; the block weights cancel in the conjugation.
    """
    if state.is_tracial:
        return ModularReport(True, 0.0)
    rho = state.rho_parts
    rho_inv = [np.linalg.inv(r) for r in rho]
    worst = 0.0
    for e in target.basis:
        c = AlgElement(e.parent, [r @ p @ ri for r, p, ri in zip(rho, e.parts, rho_inv)])
        scale = max(1.0, float(np.linalg.norm(state.whiten(c))))
        worst = max(worst, target.residual(c) / scale)
    return ModularReport(worst <= tol, worst)


@dataclass(frozen=True, eq=False)
class CondExp:
    """GNS-orthogonal projection onto ``target`` plus its validity verdict."""

    target: Subalgebra
    validity: Validity
    diagnostics: dict = field(default_factory=dict)

    @property
    def source(self) -> BlockAlgebra:
        return self.target.parent

    @property
    def valid(self) -> bool:
        return self.validity is Validity.VALID

    def __call__(self, x: AlgElement) -> AlgElement:
        return self.target.project(x)

    @property
    def matrix(self) -> np.ndarray:
        """Projection matrix in the whitened orthonormal frame of the ambient algebra."""
        q = self.target.frame
        return q @ q.conj().T


def _random_element(alg: BlockAlgebra, rng: np.random.Generator) -> AlgElement:
    parts = [rng.standard_normal((len(idx), d, d)) + 1j * rng.standard_normal((len(idx), d, d)) for d, idx in alg.groups]
    x = AlgElement(alg, parts)
    return x / x.op_norm()


def conditional_expectation(
    ambient: BlockAlgebra,
    state: FaithfulState,
    target: Subalgebra,
    tol: float = 1e-9,
    samples: int = POSITIVITY_SAMPLES,
    seed: int = POSITIVITY_SEED,
) -> CondExp:
    """Projection onto ``target`` classified as Valid / NotModularlyInvariant / NotPositive.

    Positivity is sampled on ``samples`` random positive elements ``x* x``
    with a fixed seed; the bimodule defect is recorded in the diagnostics.
    """
    if target.parent != ambient or state.parent != ambient:
        raise StructuralError("target, state and ambient algebra must agree")
    if not target.contains_identity:
        raise PreconditionError("conditional expectations need a unital target")
    modular = check_modular_invariance(state, target, tol)
    rng = np.random.default_rng(seed)
    min_eig, bimodule = np.inf, 0.0
    basis = target.basis
    for k in range(samples):
        x = _random_element(ambient, rng)
        min_eig = min(min_eig, target.project(x.adj() @ x).min_eigenvalue())
        if k < 20:
            a, b = basis[k % len(basis)], basis[(3 * k + 1) % len(basis)]
            lhs = target.project(a @ x @ b)
            rhs = a @ target.project(x) @ b
            bimodule = max(bimodule, (lhs - rhs).norm())
    diagnostics = {
        "modular_residual": modular.residual,
        "min_eigenvalue_of_E(x*x)": float(min_eig),
        "bimodule_defect": float(bimodule),
        "positivity_samples": samples,
        "seed": seed,
    }
    if not modular:
        validity = Validity.NOT_MODULARLY_INVARIANT
    elif min_eig < -POSITIVITY_TOL:
        validity = Validity.NOT_POSITIVE
    else:
        validity = Validity.VALID
    return CondExp(target, validity, diagnostics)


@dataclass(frozen=True)
class SquareCondition:
    holds: bool
    deviation: float


@dataclass(frozen=True)
class CommutingSquareReport:
    independence: SquareCondition
    image_in_m0: SquareCondition
    product_is_e0: SquareCondition
    commute_and_meet: SquareCondition
    intersection_dim: int
    m0_dim: int

    @property
    def conditions(self) -> dict[str, SquareCondition]:
        return {
            "independence": self.independence,
            "E1(M2)=M0": self.image_in_m0,
            "E1E2=E0": self.product_is_e0,
            "E1E2=E2E1 and M1^M2=M0": self.commute_and_meet,
        }

    @property
    def all_agree(self) -> bool:
        flags = {c.holds for c in self.conditions.values()}
        return len(flags) == 1

    @property
    def is_commuting_square(self) -> bool:
        return all(c.holds for c in self.conditions.values())


def _complement_frame(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Orthonormal frame of span(outer) minus span(inner), assuming inner ⊆ outer."""
    r = outer - inner @ (inner.conj().T @ outer)
    u, s, _ = np.linalg.svd(r, full_matrices=False)
    k = int((s > 1e-8).sum())
    return u[:, :k]


def verify_commuting_square(e1: CondExp, e2: CondExp, e0: CondExp, tol: float = 1e-9) -> CommutingSquareReport:
    """Evaluate the four equivalent commuting-square conditions for ``M0 ⊆ M1 ∩ M2``."""
    for name, e in (("E1", e1), ("E2", e2), ("E0", e0)):
        if not e.valid:
            raise PreconditionError(f"{name} is not a valid conditional expectation ({e.validity.value})")
    m1, m2, m0 = e1.target, e2.target, e0.target
    if not (m1.includes(m0, 1e-8) and m2.includes(m0, 1e-8)):
        raise PreconditionError("commuting-square check assumes M0 ⊂ M1 ∩ M2")

    # (i) M0-independence on spanning words (M1 v M0 = M1 here)
    dev_i = 0.0
    for x in m1.words:
        ex = e0(x)
        for y in m2.words:
            dev_i = max(dev_i, (e0(x @ y) - ex @ e0(y)).norm())

    # (ii) E1 maps M2 into M0
    dev_ii = 0.0
    for y in m2.basis:
        z = e1(y)
        dev_ii = max(dev_ii, (z - e0(z)).norm())

    # (iii) E1 E2 = E0: operator norm of (P1 - P0)(P2 - P0), the largest principal
    # cosine between M1 ⊖ M0 and M2 ⊖ M0
    a = _complement_frame(m1.frame, m0.frame)
    b = _complement_frame(m2.frame, m0.frame)
    cross = a.conj().T @ b
    dev_iii = float(np.linalg.norm(cross, ord=2)) if cross.size else 0.0

    # (iv) commutation and M1 ∩ M2 = M0
    if a.shape[1] and b.shape[1]:
        c = np.linalg.qr(np.concatenate([a, b], axis=1))[0]
        pa, pb = c.conj().T @ a, c.conj().T @ b
        p1, p2 = pa @ pa.conj().T, pb @ pb.conj().T
        comm = float(np.linalg.norm(p1 @ p2 - p2 @ p1, ord=2))
    else:
        comm = 0.0
    sv = np.linalg.svd(m1.frame.conj().T @ m2.frame, compute_uv=False)
    inter_dim = int((sv > 1 - 1e-8).sum())
    meet_ok = inter_dim == m0.dim
    dev_iv = comm if meet_ok else max(comm, float(sv[m0.dim]))

    return CommutingSquareReport(
        SquareCondition(dev_i <= tol, dev_i),
        SquareCondition(dev_ii <= tol, dev_ii),
        SquareCondition(dev_iii <= tol, dev_iii),
        SquareCondition(comm <= tol and meet_ok, dev_iv),
        intersection_dim=inter_dim,
        m0_dim=m0.dim,
    )
