"""Finite-dimensional *-algebra arithmetic.

A :class:`BlockAlgebra` is a finite direct sum of full matrix blocks
``M_{d_1} + ... + M_{d_m}``.  Elements store their blocks packed by block
size: blocks of equal dimension share one ``(n, d, d)`` array so that
products, adjoints and state evaluations are a handful of batched numpy
calls even for commutative algebras with many one-dimensional blocks.

States are faithful weighted density matrices; the GNS form
``<x, y> = psi(x* y)`` becomes the Euclidean inner product after the
whitening ``x_b -> sqrt(w_b) x_b rho_b^{1/2}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ResourceError, StructuralError, ValidationError

DEFAULT_TOL = 1e-9
DEFAULT_CHAIN_CAP = 4**8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BlockAlgebra:
    """Direct sum of full complex matrix blocks; equality is structural."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple(int(d) for d in self.blocks)
        if not blocks:
            raise ValidationError("a block algebra needs at least one block")
        if any(d < 1 for d in blocks):
            raise ValidationError(f"block dimensions must be >= 1, got {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def full(cls, d: int) -> BlockAlgebra:
        return cls((d,))

    @classmethod
    def diagonal(cls, n: int) -> BlockAlgebra:
        """The commutative algebra C^n."""
        return cls((1,) * n)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @cached_property
    def dim(self) -> int:
        return sum(d * d for d in self.blocks)

    @cached_property
    def groups(self) -> tuple[tuple[int, np.ndarray], ...]:
        """(block dimension, block indices) in order of first appearance."""
        order: dict[int, list[int]] = {}
        for b, d in enumerate(self.blocks):
            order.setdefault(d, []).append(b)
        return tuple((d, _readonly(np.array(idx))) for d, idx in order.items())

    @cached_property
    def _slots(self) -> tuple[tuple[int, int], ...]:
        slots = [None] * self.n_blocks
        for g, (_, idx) in enumerate(self.groups):
            for j, b in enumerate(idx):
                slots[b] = (g, j)
        return tuple(slots)

    @property
    def is_commutative(self) -> bool:
        return all(d == 1 for d in self.blocks)

    def zero(self) -> AlgElement:
        return AlgElement(self, [np.zeros((len(idx), d, d), complex) for d, idx in self.groups])

    def identity(self) -> AlgElement:
        return AlgElement(
            self, [np.broadcast_to(np.eye(d, dtype=complex), (len(idx), d, d)).copy() for d, idx in self.groups]
        )

    def element(self, blocks: Sequence[np.ndarray]) -> AlgElement:
        """Element from a list of per-block matrices (scalars allowed for 1x1 blocks)."""
        if len(blocks) != self.n_blocks:
            raise StructuralError(f"expected {self.n_blocks} blocks, got {len(blocks)}")
        parts = [np.empty((len(idx), d, d), complex) for d, idx in self.groups]
        for b, m in enumerate(blocks):
            d = self.blocks[b]
            m = np.asarray(m, dtype=complex).reshape(d, d) if np.ndim(m) == 0 else np.asarray(m, dtype=complex)
            if m.shape != (d, d):
                raise StructuralError(f"block {b} must be {d}x{d}, got {m.shape}")
            g, j = self._slots[b]
            parts[g][j] = m
        return AlgElement(self, parts)

    def from_matrix(self, m: np.ndarray) -> AlgElement:
        """Element of a single-block algebra from its matrix."""
        if self.n_blocks != 1:
            raise StructuralError("from_matrix needs a single-block algebra")
        return self.element([m])

    def from_vec(self, v: np.ndarray) -> AlgElement:
        parts, pos = [], 0
        for d, idx in self.groups:
            size = len(idx) * d * d
            parts.append(np.asarray(v[pos : pos + size], dtype=complex).reshape(len(idx), d, d))
            pos += size
        if pos != len(v):
            raise StructuralError(f"vector of length {len(v)} does not match dimension {self.dim}")
        return AlgElement(self, parts)

    def matrix_unit(self, block: int, i: int, j: int) -> AlgElement:
        blocks = [np.zeros((d, d), complex) for d in self.blocks]
        blocks[block][i, j] = 1.0
        return self.element(blocks)

    def block_identity(self, block: int) -> AlgElement:
        blocks = [np.zeros((d, d), complex) for d in self.blocks]
        blocks[block] = np.eye(self.blocks[block], dtype=complex)
        return self.element(blocks)

    @cached_property
    def hermitian_basis(self) -> tuple[AlgElement, ...]:
        """Hermitian linear basis: per block, its unit followed by generalized Gell-Mann matrices.

        For M_2 this is (1, sigma_x, sigma_y, sigma_z); for C^n the minimal projections.
        """
        out = []
        for b, d in enumerate(self.blocks):
            for m in [np.eye(d, dtype=complex)] + _gell_mann(d):
                blocks = [np.zeros((dd, dd), complex) for dd in self.blocks]
                blocks[b] = m
                out.append(self.element(blocks))
        return tuple(out)

    @cached_property
    def basis_labels(self) -> tuple[str, ...]:
        if self.blocks == (2,):
            return ("1", "sx", "sy", "sz")
        labels = []
        for b, d in enumerate(self.blocks):
            tag = f"b{b}:" if self.n_blocks > 1 else ""
            labels += [f"{tag}1"] + [f"{tag}g{k}" for k in range(d * d - 1)]
        return tuple(labels)

    @cached_property
    def _basis_pinv(self) -> np.ndarray:
        mat = np.stack([e.vec() for e in self.hermitian_basis], axis=1)
        return _readonly(np.linalg.pinv(mat))

    def coefficients(self, x: AlgElement) -> np.ndarray:
        """Coordinates of ``x`` in :attr:`hermitian_basis`."""
        self._check(x)
        return self._basis_pinv @ x.vec()

    def _check(self, x: AlgElement) -> None:
        if x.parent != self:
            raise StructuralError(f"element of {x.parent} used in {self}")


def _gell_mann(d: int) -> list[np.ndarray]:
    sym, anti, diag = [], [], []
    for j, k in itertools.combinations(range(d), 2):
        s = np.zeros((d, d), complex)
        s[j, k] = s[k, j] = 1
        sym.append(s)
        a = np.zeros((d, d), complex)
        a[j, k], a[k, j] = -1j, 1j
        anti.append(a)
    for l in range(1, d):
        m = np.zeros((d, d), complex)
        m[np.arange(l), np.arange(l)] = 1
        m[l, l] = -l
        diag.append(np.sqrt(2.0 / (l * (l + 1))) * m)
    return sym + anti + diag


class AlgElement:
    """Immutable element of a :class:`BlockAlgebra`.

    ``@`` is the algebra product, ``*`` scalar multiplication.
    """

    __slots__ = ("parent", "parts")

    def __init__(self, parent: BlockAlgebra, parts: Iterable[np.ndarray]):
        parts = tuple(np.asarray(p, dtype=complex) for p in parts)
        if len(parts) != len(parent.groups):
            raise StructuralError("packed parts do not match the algebra's block groups")
        for p, (d, idx) in zip(parts, parent.groups):
            if p.shape != (len(idx), d, d):
                raise StructuralError(f"packed part has shape {p.shape}, expected {(len(idx), d, d)}")
            if p.flags.writeable:
                p.setflags(write=False)
        self.parent = parent
        self.parts = parts

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.parts[g][j] for g, j in self.parent._slots]

    def vec(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parts])

    def _same(self, other: AlgElement) -> None:
        if not isinstance(other, AlgElement):
            raise TypeError(f"expected AlgElement, got {type(other).__name__}")
        if other.parent != self.parent:
            raise StructuralError(f"algebra mismatch: {self.parent} vs {other.parent}")

    def __add__(self, other: AlgElement) -> AlgElement:
        self._same(other)
        return AlgElement(self.parent, [a + b for a, b in zip(self.parts, other.parts)])

    def __sub__(self, other: AlgElement) -> AlgElement:
        self._same(other)
        return AlgElement(self.parent, [a - b for a, b in zip(self.parts, other.parts)])

    def __neg__(self) -> AlgElement:
        return AlgElement(self.parent, [-a for a in self.parts])

    def __mul__(self, c) -> AlgElement:
        if isinstance(c, AlgElement):
            raise TypeError("use @ for the algebra product")
        return AlgElement(self.parent, [complex(c) * a for a in self.parts])

    __rmul__ = __mul__

    def __truediv__(self, c) -> AlgElement:
        return self * (1.0 / complex(c))

    def __matmul__(self, other: AlgElement) -> AlgElement:
        self._same(other)
        return AlgElement(self.parent, [a @ b for a, b in zip(self.parts, other.parts)])

    def adj(self) -> AlgElement:
        return AlgElement(self.parent, [np.conj(np.swapaxes(a, -1, -2)) for a in self.parts])

    def norm(self) -> float:
        """Largest absolute matrix entry (cheap max-norm used for tolerances)."""
        return max(float(np.abs(a).max()) if a.size else 0.0 for a in self.parts)

    def op_norm(self) -> float:
        return max(float(np.linalg.norm(a, ord=2, axis=(1, 2)).max()) for a in self.parts)

    def allclose(self, other: AlgElement, atol: float = DEFAULT_TOL) -> bool:
        return (self - other).norm() <= atol

    def is_hermitian(self, atol: float = DEFAULT_TOL) -> bool:
        return self.allclose(self.adj(), atol)

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the hermitian part over all blocks."""
        h = [(a + np.conj(np.swapaxes(a, -1, -2))) / 2 for a in self.parts]
        return min(float(np.linalg.eigvalsh(a).min()) for a in h)

    def __repr__(self) -> str:
        if self.parent.n_blocks == 1:
            return f"AlgElement({self.parent.blocks}, {np.round(self.blocks[0], 6).tolist()})"
        return f"AlgElement({self.parent.blocks}, dim={self.parent.dim})"


class FaithfulState:
    """State ``psi(x) = sum_b w_b tr(rho_b x_b)``.

    The constructor accepts rank-deficient densities so that
    :func:`check_faithful` can report on them; GNS whitening refuses them.
    """

    def __init__(self, parent: BlockAlgebra, weights: Sequence[float], densities: Sequence[np.ndarray], tol: float = DEFAULT_TOL):
        w = np.asarray(weights, dtype=float)
        if w.shape != (parent.n_blocks,):
            raise ValidationError(f"need {parent.n_blocks} weights, got {w.shape}")
        if (w < 0).any() or abs(w.sum() - 1) > tol:
            raise ValidationError(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
        if len(densities) != parent.n_blocks:
            raise ValidationError(f"need {parent.n_blocks} density matrices")
        rhos = []
        for b, (d, r) in enumerate(zip(parent.blocks, densities)):
            r = np.asarray(r, dtype=complex).reshape(d, d)
            if not np.allclose(r, r.conj().T, atol=tol):
                raise ValidationError(f"density of block {b} is not hermitian")
            if abs(np.trace(r) - 1) > tol:
                raise ValidationError(f"density of block {b} must have unit trace")
            if np.linalg.eigvalsh(r).min() < -tol:
                raise ValidationError(f"density of block {b} is not positive")
            rhos.append(r)
        self.parent = parent
        self.weights = _readonly(w)
        self.densities = tuple(_readonly(r) for r in rhos)
        self.w_parts = tuple(_readonly(w[idx]) for _, idx in parent.groups)
        self.rho_parts = tuple(_readonly(np.stack([rhos[b] for b in idx])) for _, idx in parent.groups)

    @classmethod
    def from_weights(cls, parent: BlockAlgebra, weights: Sequence[float]) -> FaithfulState:
        """Block weights with normalized trace inside every block."""
        return cls(parent, weights, [np.eye(d) / d for d in parent.blocks])

    @classmethod
    def tracial(cls, parent: BlockAlgebra) -> FaithfulState:
        """The normalized canonical trace (weights proportional to block size)."""
        w = np.array(parent.blocks, dtype=float)
        return cls.from_weights(parent, w / w.sum())

    @classmethod
    def from_density(cls, parent: BlockAlgebra, density: np.ndarray) -> FaithfulState:
        """State on a single-block algebra given by one density matrix."""
        if parent.n_blocks != 1:
            raise StructuralError("from_density needs a single-block algebra")
        return cls(parent, [1.0], [density])

    def __call__(self, x: AlgElement) -> complex:
        return state_eval(self, x)

    @property
    def is_tracial(self) -> bool:
        """``psi(xy) = psi(yx)``: every block density is a multiple of the identity; weights are free."""
        return all(np.allclose(r, np.eye(len(r)) / len(r), atol=1e-12) for r in self.densities)

    @cached_property
    def _sqrt(self) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
        fwd, inv = [], []
        for w, rho in zip(self.w_parts, self.rho_parts):
            vals, vecs = np.linalg.eigh(rho)
            if vals.min() <= 0 or w.min() <= 0:
                raise ValidationError("GNS whitening needs a faithful state")
            s = np.sqrt(vals)
            sw = np.sqrt(w)[:, None, None]
            fwd.append(_readonly((vecs * s[:, None, :]) @ np.conj(np.swapaxes(vecs, -1, -2)) * sw))
            inv.append(_readonly((vecs / s[:, None, :]) @ np.conj(np.swapaxes(vecs, -1, -2)) / sw))
        return tuple(fwd), tuple(inv)

    def whiten(self, x: AlgElement) -> np.ndarray:
        """Coordinates in which the GNS form is the standard inner product."""
        self.parent._check(x)
        fwd, _ = self._sqrt
        return np.concatenate([(p @ s).ravel() for p, s in zip(x.parts, fwd)])

    def unwhiten(self, v: np.ndarray) -> AlgElement:
        _, inv = self._sqrt
        x = self.parent.from_vec(v)
        return AlgElement(self.parent, [p @ s for p, s in zip(x.parts, inv)])

    def whiten_stack(self, vecs: np.ndarray) -> np.ndarray:
        """Whiten many flattened elements at once (rows of ``vecs``)."""
        fwd, _ = self._sqrt
        out, pos = [], 0
        for (d, idx), s in zip(self.parent.groups, fwd):
            size = len(idx) * d * d
            blk = vecs[:, pos : pos + size].reshape(-1, len(idx), d, d)
            out.append((blk @ s).reshape(len(vecs), size))
            pos += size
        return np.concatenate(out, axis=1)

    def unwhiten_stack(self, vecs: np.ndarray) -> np.ndarray:
        _, inv = self._sqrt
        out, pos = [], 0
        for (d, idx), s in zip(self.parent.groups, inv):
            size = len(idx) * d * d
            blk = vecs[:, pos : pos + size].reshape(-1, len(idx), d, d)
            out.append((blk @ s).reshape(len(vecs), size))
            pos += size
        return np.concatenate(out, axis=1)

    def density_element(self) -> AlgElement:
        """The block-weighted density ``D = sum_b w_b rho_b`` with ``psi(x) = Tr(D x)``."""
        return AlgElement(self.parent, [w[:, None, None] * r for w, r in zip(self.w_parts, self.rho_parts)])

    def __repr__(self) -> str:
        return f"FaithfulState({self.parent.blocks}, weights={np.round(self.weights, 6).tolist()})"


def trace_p(p: float) -> FaithfulState:
    """The state ``(a_1, a_2) -> p a_1 + (1 - p) a_2`` on C^2."""
    return FaithfulState.from_weights(BlockAlgebra.diagonal(2), [p, 1 - p])


def state_eval(state: FaithfulState, x: AlgElement) -> complex:
    if x.parent != state.parent:
        raise StructuralError(f"state on {state.parent} evaluated on element of {x.parent}")
    total = 0j
    for w, rho, p in zip(state.w_parts, state.rho_parts, x.parts):
        total += complex(np.einsum("n,nij,nji->", w, rho, p))
    return total


def gns_inner(state: FaithfulState, x: AlgElement, y: AlgElement) -> complex:
    """The GNS form ``psi(x* y)``."""
    return state_eval(state, x.adj() @ y)


@dataclass(frozen=True)
class FaithfulnessReport:
    faithful: bool
    min_eigenvalue: float
    min_weight: float
    tol: float

    def __bool__(self) -> bool:
        return self.faithful


def check_faithful(state: FaithfulState, tol: float = 1e-12) -> FaithfulnessReport:
    min_eig = min(float(np.linalg.eigvalsh(r).min()) for r in state.densities)
    min_w = float(state.weights.min())
    return FaithfulnessReport(min_eig > tol and min_w > tol, min_eig, min_w, tol)


class TensorChain:
    """Length-``L`` tensor power of a base algebra with the product state.

    Blocks are indexed by multi-indices ``(b_0, ..., b_{L-1})`` in
    lexicographic order, leg 0 most significant.  Iterating yields
    ``(algebra, state)``.
    """

    def __init__(self, base: BlockAlgebra, base_state: FaithfulState, length: int, cap: int = DEFAULT_CHAIN_CAP):
        if length < 1:
            raise ValidationError("tensor chain length must be >= 1")
        if base_state.parent != base:
            raise StructuralError("base state lives on a different algebra")
        multi = list(itertools.product(range(base.n_blocks), repeat=length))
        dims = [int(np.prod([base.blocks[b] for b in m])) for m in multi]
        total = sum(d * d for d in dims)
        if total > cap:
            raise ResourceError(
                f"tensor chain of {base.blocks} with length {length} needs {total} complex entries "
                f"(largest block {max(dims)}x{max(dims)}), cap is {cap}"
            )
        self.base = base
        self.base_state = base_state
        self.length = length
        self.multi = multi
        if length == 1:
            self.algebra, self.state = base, base_state
            return
        self.algebra = BlockAlgebra(tuple(dims))
        weights = [float(np.prod([base_state.weights[b] for b in m])) for m in multi]
        dens = [_kron_all([base_state.densities[b] for b in m]) for m in multi]
        self.state = FaithfulState(self.algebra, weights, dens)

    def __iter__(self) -> Iterator:
        return iter((self.algebra, self.state))

    def embed(self, x: AlgElement, leg: int) -> AlgElement:
        """``1 (x) ... (x) x (x) ... (x) 1`` with ``x`` at ``leg``."""
        self.base._check(x)
        if not 0 <= leg < self.length:
            raise StructuralError(f"leg {leg} outside chain of length {self.length}")
        xb = x.blocks
        blocks = []
        for m in self.multi:
            pre = int(np.prod([self.base.blocks[b] for b in m[:leg]]))
            post = int(np.prod([self.base.blocks[b] for b in m[leg + 1 :]]))
            blocks.append(np.kron(np.kron(np.eye(pre), xb[m[leg]]), np.eye(post)))
        return self.algebra.element(blocks)

    def local(self, u: np.ndarray, first_leg: int) -> AlgElement:
        """Operator ``u`` acting on legs ``first_leg, first_leg + 1`` (single-block base only)."""
        if self.base.n_blocks != 1:
            raise StructuralError("two-leg operators need a single-block base")
        d = self.base.blocks[0]
        if u.shape != (d * d, d * d):
            raise StructuralError(f"two-leg operator must be {d * d}x{d * d}")
        if not 0 <= first_leg < self.length - 1:
            raise StructuralError(f"legs ({first_leg}, {first_leg + 1}) outside chain of length {self.length}")
        m = np.kron(np.kron(np.eye(d**first_leg), u), np.eye(d ** (self.length - first_leg - 2)))
        return self.algebra.from_matrix(m)


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def tensor_chain(base: BlockAlgebra, base_state: FaithfulState, length: int, cap: int = DEFAULT_CHAIN_CAP) -> TensorChain:
    return TensorChain(base, base_state, length, cap)


def element_json(x: AlgElement) -> dict:
    """Block dimensions plus row-major entries as interleaved ``re, im`` pairs."""
    data = np.concatenate([b.ravel() for b in x.blocks])
    return {"blocks": list(x.parent.blocks), "data": np.column_stack([data.real, data.imag]).ravel().tolist()}
