"""Exchangeability, spreadability and stationarity verdicts on a finite window.

Each tuple of length ``<= degree`` with entries ``< window`` is compared
against the canonical representative of its class (symmetric, order or
translation equivalence).  Moments are multilinear in the basis choice, so
comparing on the domain's hermitian basis is enough.  Verdicts are finite
evidence only: "up to degree n, window L".
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, WindowError
from .seqmodel import RandomSequenceModel
from .tuplecomb import canon

KINDS = {"exchangeable": "symmetric", "spreadable": "order", "stationary": "theta"}
DEFAULT_DEGREE = 4
DEFAULT_WINDOW = 6
DEFAULT_TOL = 1e-9
TIE_TOL = 1e-12


def _cjson(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


@dataclass(frozen=True)
class SymmetryWitness:
    """``reference`` is the class representative, ``tuple`` the violating member."""

    reference: tuple[int, ...]
    tuple: tuple[int, ...]
    basis_choice: tuple[int, ...]
    basis_labels: tuple[str, ...]
    reference_value: complex
    tuple_value: complex

    @property
    def gap(self) -> float:
        return abs(self.tuple_value - self.reference_value)

    def to_dict(self) -> dict:
        return {
            "reference": list(self.reference),
            "tuple": list(self.tuple),
            "basis_choice": list(self.basis_choice),
            "basis_labels": list(self.basis_labels),
            "reference_value": _cjson(self.reference_value),
            "tuple_value": _cjson(self.tuple_value),
            "gap": self.gap,
        }


@dataclass(frozen=True)
class SymmetryVerdict:
    kind: str
    degree: int
    window: int
    tol: float
    passed: bool
    max_violation: float
    witness: SymmetryWitness | None
    comparisons: int
    notes: tuple[str, ...] = field(default=())

    @property
    def scope(self) -> str:
        return f"up to degree {self.degree}, window {self.window}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "window": self.window,
            "tol": self.tol,
            "pass": self.passed,
            "max_violation": self.max_violation,
            "scope": self.scope,
            "comparisons": self.comparisons,
            "witness": self.witness.to_dict() if self.witness else None,
            "notes": list(self.notes),
        }


def check_symmetry(
    model: RandomSequenceModel,
    kind: str,
    degree: int = DEFAULT_DEGREE,
    window: int | None = None,
    tol: float = DEFAULT_TOL,
) -> SymmetryVerdict:
    """Compare every tuple's moments against its class representative.

    The witness is the first maximal violator in length-major lexicographic
    tuple order, then lexicographic basis order; later violators replace it
    only when larger by more than ``1e-12``.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown symmetry kind {kind!r}; expected one of {sorted(KINDS)}")
    if degree < 1:
        raise ValidationError("degree must be >= 1")
    window = min(DEFAULT_WINDOW, model.window) if window is None else int(window)
    if window > model.window:
        raise WindowError(f"check window {window} exceeds the model window {model.window}")
    if window < 1:
        raise ValidationError("window must be >= 1")
    relation = KINDS[kind]
    worst, witness_gap, best = 0.0, 0.0, None
    comparisons = 0
    for n in range(1, degree + 1):
        for t in itertools.product(range(window), repeat=n):
            c = canon(relation, t)
            if c == t:
                continue
            mt, mc = model.moments(t, cache=False), model.moments(c)
            diff = np.abs(mt - mc)
            comparisons += diff.size
            k = int(np.argmax(diff))
            v = float(diff.flat[k])
            worst = max(worst, v)
            if v > witness_gap + TIE_TOL or (best is None and v > 0):
                witness_gap = v
                choice = np.unravel_index(k, diff.shape)
                best = (c, t, tuple(int(a) for a in choice), complex(mc[choice]), complex(mt[choice]))
    witness = None
    if best is not None:
        c, t, choice, vc, vt = best
        labels = model.base.basis_labels
        witness = SymmetryWitness(c, t, choice, tuple(labels[a] for a in choice), vc, vt)
    notes = ()
    if not model.shift_semantics and kind != "exchangeable":
        notes = ("model construction is not translation covariant; index shifts compare different construction rules",)
    return SymmetryVerdict(kind, degree, window, tol, worst <= tol, worst, witness, comparisons, notes)


@dataclass(frozen=True)
class BraidReport:
    holds: bool
    residual: float
    unitary_defect: float
    distant_commute: bool = True

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "residual": self.residual,
                "unitary_defect": self.unitary_defect, "distant_commute": self.distant_commute}


def check_braid_relation(u: np.ndarray, tol: float = 1e-10) -> BraidReport:
    """Operator-norm residual of ``(u⊗1)(1⊗u)(u⊗1) - (1⊗u)(u⊗1)(1⊗u)`` on three legs.

    Generators acting on non-adjacent leg pairs commute automatically, since
    the conjugations have disjoint supports; this is reported, not tested.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    d = int(round(np.sqrt(n)))
    if u.shape != (n, n) or d * d != n:
        raise ValidationError(f"u must be a square matrix on C^d ⊗ C^d, got shape {u.shape}")
    unitary = float(np.linalg.norm(u @ u.conj().T - np.eye(n), ord=2))
    if unitary > max(tol, 1e-10):
        raise ValidationError(f"u is not unitary (defect {unitary:.3e})")
    a = np.kron(u, np.eye(d))
    b = np.kron(np.eye(d), u)
    residual = float(np.linalg.norm(a @ b @ a - b @ a @ b, ord=2))
    return BraidReport(residual <= tol, residual, unitary)


@dataclass(frozen=True)
class HierarchyAudit:
    exchangeable: SymmetryVerdict
    spreadable: SymmetryVerdict
    stationary: SymmetryVerdict

    @property
    def verdicts(self) -> tuple[SymmetryVerdict, SymmetryVerdict, SymmetryVerdict]:
        return (self.exchangeable, self.spreadable, self.stationary)

    @property
    def monotone(self) -> bool:
        """exchangeable ⇒ spreadable ⇒ stationary on the verdicts."""
        e, s, t = (v.passed for v in self.verdicts)
        return (not e or s) and (not s or t)

    def to_dict(self) -> dict:
        return {
            "verdicts": [v.to_dict() for v in self.verdicts],
            "pattern": ["pass" if v.passed else "fail" for v in self.verdicts],
            "monotone": self.monotone,
        }


def symmetry_hierarchy_audit(
    model: RandomSequenceModel,
    degree: int = DEFAULT_DEGREE,
    window: int | None = None,
    tol: float = DEFAULT_TOL,
) -> HierarchyAudit:
    """Run all three checks; a non-monotone pattern indicates a checker bug."""
    return HierarchyAudit(*(check_symmetry(model, k, degree, window, tol) for k in KINDS))
