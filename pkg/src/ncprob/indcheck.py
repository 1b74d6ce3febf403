"""Conditional independence and factorizability verdicts.

Four modes relative to a conditioning candidate ``N``:

* ``CI``  -- ``E_N(xy) = E_N(x)E_N(y)`` for ``x ∈ M_I ∨ N``, ``y ∈ M_J ∨ N``, ``I ∩ J = ∅``;
* ``CIo`` -- the same for ordered pairs (``I < J`` or ``I > J``);
* ``CF``  -- ``x ∈ M_I``, ``y ∈ M_J`` without joining ``N``, disjoint pairs;
* ``CFo`` -- plain algebras, ordered pairs.

``(x, y) -> E(xy) - E(x)E(y)`` is bilinear, so checking spanning words of
the two algebras suffices.  The tail algebra itself is never computed: a
scenario names the candidate and the checks verify what the theory proves
for the true tail.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConditioningError, ValidationError, WindowError
from .ergodic import MonomialSpec, tail_estimate_deviation
from .matalg import AlgElement, element_json
from .seqmodel import RandomSequenceModel
from .subalg import CondExp, Subalgebra, conditional_expectation, generate_subalgebra
from .symcheck import check_symmetry

MODES = {"CI": (True, False), "CIo": (True, True), "CF": (False, False), "CFo": (False, True)}
TIE_TOL = 1e-12

IndexSet = tuple[int, ...]


@dataclass(frozen=True)
class IndependenceWitness:
    I: IndexSet
    J: IndexSet
    x_recipe: tuple[str, ...]
    y_recipe: tuple[str, ...]
    lhs: AlgElement  # E(xy)
    rhs: AlgElement  # E(x) E(y)

    @property
    def gap(self) -> float:
        return (self.lhs - self.rhs).norm()

    def to_dict(self) -> dict:
        return {
            "I": list(self.I), "J": list(self.J),
            "x": " ".join(self.x_recipe) or "1", "y": " ".join(self.y_recipe) or "1",
            "E(xy)": element_json(self.lhs), "E(x)E(y)": element_json(self.rhs), "gap": self.gap,
        }


@dataclass(frozen=True)
class IndependenceVerdict:
    mode: str
    conditioning: str
    I: IndexSet
    J: IndexSet
    tol: float
    passed: bool
    max_violation: float
    witness: IndependenceWitness | None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "conditioning": self.conditioning, "I": list(self.I), "J": list(self.J),
            "tol": self.tol, "pass": self.passed, "max_violation": self.max_violation,
            "witness": self.witness.to_dict() if self.witness else None,
        }


@dataclass(frozen=True)
class SequenceIndependenceVerdict:
    mode: str
    conditioning: str
    window: int
    max_set_size: int
    tol: float
    passed: bool
    max_violation: float
    witness: IndependenceWitness | None
    pairs: tuple[tuple[IndexSet, IndexSet, float], ...] = field(repr=False)

    @property
    def scope(self) -> str:
        return f"index sets of size <= {self.max_set_size} in window {self.window}"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "conditioning": self.conditioning, "window": self.window,
            "max_set_size": self.max_set_size, "scope": self.scope, "tol": self.tol,
            "pass": self.passed, "max_violation": self.max_violation, "pairs_checked": len(self.pairs),
            "witness": self.witness.to_dict() if self.witness else None,
        }

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["I", "J", "mode", "max_violation"])
        for I, J, v in self.pairs:
            w.writerow([" ".join(map(str, I)), " ".join(map(str, J)), self.mode, repr(v)])
        return buf.getvalue()


class IndependenceChecker:
    """Shares the conditional expectation and generated algebras across checks on one model."""

    def __init__(self, model: RandomSequenceModel, candidate: Subalgebra | CondExp, label: str = "N", tol: float = 1e-9):
        self.model = model
        self.label = label
        self.tol = tol
        e = candidate if isinstance(candidate, CondExp) else conditional_expectation(model.ambient, model.state, candidate)
        if not e.valid:
            raise ConditioningError(f"conditional expectation onto {label} is {e.validity.value}")
        self.E = e
        self._algebras: dict[tuple[IndexSet, bool], Subalgebra] = {}
        self._pairs: dict[tuple[IndexSet, IndexSet, bool], tuple[float, IndependenceWitness | None]] = {}

    def algebra(self, I: IndexSet, joined: bool) -> Subalgebra:
        key = (I, joined)
        if key not in self._algebras:
            m = self.model
            gens = [m.embeddings[i].images[b] for i in I for b in range(len(m.basis))]
            labels = [f"i{i}({lab})" for i in I for lab in m.base.basis_labels]
            if joined:
                gens += list(self.E.target.words[1:])
                labels += [f"{self.label}[{' '.join(r)}]" for r in self.E.target.recipes[1:]]
            self._algebras[key] = generate_subalgebra(m.ambient, m.state, gens, labels=labels)
        return self._algebras[key]

    def _pair(self, I: IndexSet, J: IndexSet, joined: bool) -> tuple[float, IndependenceWitness | None]:
        key = (I, J, joined)
        if key in self._pairs:
            return self._pairs[key]
        A, B = self.algebra(I, joined), self.algebra(J, joined)
        ex = [self.E(x) for x in A.words]
        ey = [self.E(y) for y in B.words]
        worst, best_gap, best = 0.0, 0.0, None
        for a, x in enumerate(A.words):
            for b, y in enumerate(B.words):
                lhs = self.E(x @ y)
                rhs = ex[a] @ ey[b]
                v = (lhs - rhs).norm()
                worst = max(worst, v)
                if v > best_gap + TIE_TOL:
                    best_gap = v
                    best = IndependenceWitness(I, J, A.recipes[a], B.recipes[b], lhs, rhs)
        self._pairs[key] = (worst, best)
        return self._pairs[key]

    def check(self, I: Sequence[int], J: Sequence[int], joined: bool, mode: str | None = None) -> IndependenceVerdict:
        I, J = _index_set(I, self.model.window), _index_set(J, self.model.window)
        worst, witness = self._pair(I, J, joined)
        mode = mode or ("CI" if joined else "CF")
        return IndependenceVerdict(mode, self.label, I, J, self.tol, worst <= self.tol, worst, witness)

    def sequence(self, mode: str, max_set_size: int = 2, window: int | None = None) -> SequenceIndependenceVerdict:
        if mode not in MODES:
            raise ValidationError(f"unknown independence mode {mode!r}; expected one of {list(MODES)}")
        joined, ordered = MODES[mode]
        window = self.model.window if window is None else int(window)
        if window > self.model.window:
            raise WindowError(f"check window {window} exceeds the model window {self.model.window}")
        if max_set_size < 1:
            raise ValidationError("max_set_size must be >= 1")
        worst, witness_gap, witness, rows = 0.0, 0.0, None, []
        for I, J in index_pairs(window, max_set_size, ordered):
            v, w = self._pair(I, J, joined)
            rows.append((I, J, v))
            worst = max(worst, v)
            if v > witness_gap + TIE_TOL:
                witness_gap, witness = v, w
        return SequenceIndependenceVerdict(mode, self.label, window, max_set_size, self.tol,
                                           worst <= self.tol, worst, witness, tuple(rows))


def _index_set(I: Sequence[int], window: int) -> IndexSet:
    I = tuple(sorted(set(int(i) for i in I)))
    if not I:
        raise ValidationError("index sets must be nonempty")
    if I[0] < 0 or I[-1] >= window:
        raise WindowError(f"index set {I} outside the window 0..{window - 1}")
    return I


def index_pairs(window: int, max_set_size: int, ordered: bool) -> list[tuple[IndexSet, IndexSet]]:
    """Pairs of nonempty index sets: disjoint, or additionally ``I < J`` / ``I > J`` when ``ordered``."""
    sets = [s for k in range(1, max_set_size + 1) for s in itertools.combinations(range(window), k)]
    out = []
    for I in sets:
        for J in sets:
            if set(I) & set(J):
                continue
            if ordered and not (I[-1] < J[0] or J[-1] < I[0]):
                continue
            out.append((I, J))
    return out


def check_factorizability(
    model: RandomSequenceModel,
    candidate: Subalgebra | CondExp,
    I: Sequence[int],
    J: Sequence[int],
    joined: bool,
    tol: float = 1e-9,
    label: str = "N",
) -> IndependenceVerdict:
    """``E_N(xy) = E_N(x) E_N(y)`` on spanning words of ``M_I`` and ``M_J`` (joined with ``N`` if asked)."""
    return IndependenceChecker(model, candidate, label, tol).check(I, J, joined)


def check_sequence_independence(
    model: RandomSequenceModel,
    candidate: Subalgebra | CondExp,
    mode: str,
    max_set_size: int = 2,
    tol: float = 1e-9,
    window: int | None = None,
    label: str = "N",
) -> SequenceIndependenceVerdict:
    return IndependenceChecker(model, candidate, label, tol).sequence(mode, max_set_size, window)


@dataclass(frozen=True)
class ZeroOneReport:
    status: str  # "trivial", "nontrivial" or "skipped"
    tol: float
    max_deviation: float | None = None
    shift: int | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status, "tol": self.tol, "max_deviation": self.max_deviation,
                "shift": self.shift, "reason": self.reason}


def zero_one_diagnostic(
    model: RandomSequenceModel,
    candidate: Subalgebra | CondExp | None = None,
    tol: float = 1e-9,
    max_set_size: int = 1,
) -> ZeroOneReport:
    """Finite shadow of the zero-one law.

    Precondition: order independence (``CIo``) over the candidate, by
    default ``C1``, on the model window; otherwise the report is "skipped".
    Then every monomial at index 0 is pushed to the last window index and the
    functional ``y -> psi(y alpha^k(x))`` on monomials left of it is compared
    with a scalar multiple of ``psi``: scalar tail estimates everywhere mean a
    trivial tail at this scale.
    """
    if candidate is None:
        candidate = model.candidate("scalars")
    pre = check_sequence_independence(model, candidate, "CIo", max_set_size, tol)
    if not pre.passed:
        return ZeroOneReport("skipped", tol, reason=f"order independence over the candidate fails "
                                                    f"(violation {pre.max_violation:.3e})")
    k = model.window - 1
    if k < 1:
        raise WindowError("zero-one diagnostic needs a window of at least 2")
    dev = tail_estimate_deviation(model, k)
    return ZeroOneReport("trivial" if dev <= tol else "nontrivial", tol, dev, k)


def _fixed_under_shift(model: RandomSequenceModel, candidate: Subalgebra, degree: int = 2) -> float:
    """``max |psi(iota[i+1;b] n) - psi(iota[i;b] n)|`` over monomials and a basis of the candidate."""
    B = len(model.basis)
    worst = 0.0
    for n in candidate.basis:
        for d in range(1, degree + 1):
            for t in itertools.product(range(model.window - 1), repeat=d):
                for c in itertools.product(range(B), repeat=d):
                    y = MonomialSpec(t, c)
                    a = model.state(model.monomial(y.shifted(1).tuple, c) @ n)
                    b = model.state(model.monomial(y.tuple, c) @ n)
                    worst = max(worst, abs(a - b))
    return worst


@dataclass(frozen=True)
class FactorizabilityAudit:
    verdicts: dict
    implications: dict
    preconditions: dict
    findings: tuple[str, ...]

    @property
    def coherent(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {
            "verdicts": {m: v.to_dict() for m, v in self.verdicts.items()},
            "implications": self.implications,
            "preconditions": self.preconditions,
            "findings": list(self.findings),
            "coherent": self.coherent,
        }


def factorizability_vs_independence_audit(
    model: RandomSequenceModel,
    candidate: Subalgebra,
    tol: float = 1e-9,
    max_set_size: int = 2,
    label: str = "N",
    stationarity_degree: int = 3,
) -> FactorizabilityAudit:
    """Side-by-side CI/CIo/CF/CFo verdicts and the factorizability ⇒ independence implications.

    The implication is only claimed under its hypotheses (stationarity and a
    shift-fixed candidate); otherwise it is reported as not applicable.  A
    violated implication is a finding, never an exception.
    """
    stat = check_symmetry(model, "stationary", stationarity_degree, None, tol)
    fixed = _fixed_under_shift(model, candidate)
    pre = {
        "stationary": {"pass": stat.passed, "max_violation": stat.max_violation, "scope": stat.scope},
        "candidate_shift_fixed": {"pass": fixed <= tol, "max_violation": fixed},
    }
    checker = IndependenceChecker(model, candidate, label, tol)
    verdicts = {m: checker.sequence(m, max_set_size) for m in MODES}
    hyp = stat.passed and fixed <= tol
    implications, findings = {}, []
    for f, i in (("CF", "CI"), ("CFo", "CIo")):
        name = f"{f} => {i}"
        if not hyp:
            implications[name] = "not applicable (hypotheses fail)"
        elif not verdicts[f].passed:
            implications[name] = f"not applicable ({f} fails)"
        elif verdicts[i].passed:
            implications[name] = "confirmed"
        else:
            implications[name] = "violated"
            findings.append(f"{f} passes but {i} fails ({verdicts[i].max_violation:.3e})")
    return FactorizabilityAudit(verdicts, implications, pre, tuple(findings))

