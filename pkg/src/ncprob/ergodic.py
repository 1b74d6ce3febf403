"""Index shifts at the moment level: shifted moments, Cesàro averages,
mixing gaps, the refined averaging operator ``T_N`` and the induced
partial-shift endomorphisms.

A finite window cannot host a shift endomorphism, so everything here acts on
monomials ``iota[i; a]`` through their index tuples.  Sums use
``math.fsum`` so the result does not depend on summation order.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningError, PreconditionError, ValidationError, WindowError
from .matalg import AlgElement
from .seqmodel import RandomSequenceModel
from .subalg import CondExp, Subalgebra, conditional_expectation
from .symcheck import check_symmetry
from .tuplecomb import theta_composite, theta_image_bound

EXACT_TN_CAP = 4
TN_SAMPLES = 2000
TN_SEED = 0x5EED


@dataclass(frozen=True)
class MonomialSpec:
    """``iota_{i(1)}(a_1) ... iota_{i(n)}(a_n)`` with ``a_k`` indices into the hermitian basis."""

    tuple: tuple[int, ...]
    basis_choice: tuple[int, ...]

    def __post_init__(self):
        t = tuple(int(i) for i in self.tuple)
        b = tuple(int(a) for a in self.basis_choice)
        if len(t) != len(b):
            raise ValidationError("monomial tuple and basis choice must have equal length")
        if any(i < 0 for i in t):
            raise ValidationError("monomial indices must be nonnegative")
        object.__setattr__(self, "tuple", t)
        object.__setattr__(self, "basis_choice", b)

    def shifted(self, k: int) -> MonomialSpec:
        return MonomialSpec(tuple(i + k for i in self.tuple), self.basis_choice)

    def adjoint(self) -> MonomialSpec:
        """Basis elements are hermitian, so the adjoint just reverses the word."""
        return MonomialSpec(self.tuple[::-1], self.basis_choice[::-1])

    def mapped(self, f) -> MonomialSpec:
        return MonomialSpec(tuple(f(i) for i in self.tuple), self.basis_choice)

    @property
    def max_index(self) -> int:
        return max(self.tuple, default=-1)

    def to_dict(self) -> dict:
        return {"tuple": list(self.tuple), "basis_choice": list(self.basis_choice)}


IDENTITY = MonomialSpec((), ())


def required_window(max_entry: int, shift: int = 0, N: int | None = None) -> int:
    """Smallest window holding index ``max_entry`` after a shift by ``shift`` or after every ``theta_{N,l}``."""
    if N is None:
        return max_entry + shift + 1
    return theta_image_bound(N, max_entry) + 1


def _fsum_complex(vals) -> complex:
    vals = [complex(v) for v in vals]
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


def _moment(model: RandomSequenceModel, *parts: MonomialSpec) -> complex:
    tup = sum((p.tuple for p in parts), ())
    choice = sum((p.basis_choice for p in parts), ())
    return model.psi_moment(tup, choice)


def _check_fits(model: RandomSequenceModel, specs: Sequence[MonomialSpec], need: int, what: str) -> None:
    top = max([need - 1] + [s.max_index for s in specs])
    if top >= model.window:
        raise WindowError(f"{what} reaches index {top}; rebuild the model with window >= {top + 1}")


def shifted_moment(model: RandomSequenceModel, y: MonomialSpec, x: MonomialSpec, k: int,
                   require_shift_semantics: bool = True) -> complex:
    """``psi(iota[j_y; b] iota[i_x + k; a])``.

    Models whose construction is not translation covariant are refused
    unless ``require_shift_semantics`` is switched off explicitly.
    """
    if k < 0:
        raise ValidationError("shift must be >= 0")
    if require_shift_semantics and not model.shift_semantics:
        raise PreconditionError(f"{model.kind} model has no shift semantics; pass require_shift_semantics=False to compare anyway")
    xs = x.shifted(k)
    _check_fits(model, [y, xs], 0, "shifted monomial")
    return _moment(model, y, xs)


def cesaro_average(model: RandomSequenceModel, y: MonomialSpec, x: MonomialSpec, n: int,
                   require_shift_semantics: bool = True) -> complex:
    """``(1/n) sum_{k<n} psi(y alpha^k(x))``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    _check_fits(model, [y, x.shifted(n - 1)], 0, f"Cesàro average of length {n}")
    return _fsum_complex(shifted_moment(model, y, x, k, require_shift_semantics) for k in range(n)) / n


def _valid_condexp(model: RandomSequenceModel, candidate: Subalgebra | CondExp) -> CondExp:
    e = candidate if isinstance(candidate, CondExp) else conditional_expectation(model.ambient, model.state, candidate)
    if not e.valid:
        raise ConditioningError(f"conditional expectation onto the candidate is {e.validity.value}")
    return e


def mixing_gap(model: RandomSequenceModel, x: MonomialSpec, y: MonomialSpec,
               candidate: Subalgebra | CondExp, k: int) -> float:
    """``|psi(y* alpha^k(x)) - psi(y* E_N(x))|``."""
    e = _valid_condexp(model, candidate)
    ys = y.adjoint()
    lhs = shifted_moment(model, ys, x, k)
    ex = e(model.monomial(x.tuple, x.basis_choice))
    return abs(lhs - element_moment(model, ys, ex))


@dataclass(frozen=True)
class TNResult:
    N: int
    x: MonomialSpec
    tests: tuple[MonomialSpec, ...]
    values: tuple[complex, ...]
    mode: str
    composites: int
    stderr: tuple[float, ...] = ()
    seed: int | None = None

    def to_dict(self) -> dict:
        out = {
            "N": self.N,
            "x": self.x.to_dict(),
            "mode": self.mode,
            "composites": self.composites,
            "values": [{"test": t.to_dict(), "re": v.real, "im": v.imag} for t, v in zip(self.tests, self.values)],
        }
        if self.mode == "monte_carlo":
            out["stderr"] = list(self.stderr)
            out["seed"] = self.seed
        return out


def default_tests(model: RandomSequenceModel) -> tuple[MonomialSpec, ...]:
    """The identity and every basis element at index 0."""
    return (IDENTITY,) + tuple(MonomialSpec((0,), (b,)) for b in range(len(model.basis)))


def refined_average_TN(
    model: RandomSequenceModel,
    x: MonomialSpec,
    N: int,
    tests: Sequence[MonomialSpec] | None = None,
    exact_cap: int = EXACT_TN_CAP,
    samples: int = TN_SAMPLES,
    seed: int = TN_SEED,
) -> TNResult:
    """Moment-level action of ``T_N``: the average over ``k in {0..N-1}^{N+1}``
    of ``psi(y iota[theta_{N,k} ∘ i_x; a_x])`` for each test monomial ``y``.

    Exact for ``N <= exact_cap``; beyond that ``samples`` uniform draws of
    ``k`` with a fixed seed, reporting standard errors.
    """
    if N < 1:
        raise ValidationError("N must be >= 1")
    if samples < 2:
        raise ValidationError("Monte Carlo mode needs at least 2 samples")
    tests = tuple(tests) if tests is not None else default_tests(model)
    need = required_window(x.max_index, N=N) if x.tuple else 0
    _check_fits(model, tests, need, f"T_{N} images")

    cache: dict[tuple[int, ...], np.ndarray] = {}

    def values_for(kvec) -> np.ndarray:
        img = x.mapped(theta_composite(N, kvec))
        if img.tuple not in cache:
            cache[img.tuple] = np.array([_moment(model, y, img) for y in tests])
        return cache[img.tuple]

    if N <= exact_cap:
        kvecs = list(itertools.product(range(N), repeat=N + 1))
        rows = [values_for(k) for k in kvecs]
        vals = tuple(_fsum_complex(col) / len(rows) for col in zip(*rows))
        return TNResult(N, x, tests, vals, "exact", len(kvecs))
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, N, size=(samples, N + 1))
    rows = np.array([values_for(tuple(int(v) for v in k)) for k in draws])
    vals = tuple(_fsum_complex(col) / samples for col in rows.T)
    stderr = tuple(float(np.std(col, ddof=1) / math.sqrt(samples)) for col in rows.T)
    return TNResult(N, x, tests, vals, "monte_carlo", samples, stderr, seed)


@dataclass(frozen=True)
class EndomorphismVerdict:
    N: int
    degree: int
    window: int
    tol: float
    status: str  # "pass", "fail" or "skipped"
    max_violation: float | None
    witness: dict | None = None
    reason: str = ""
    comparisons: int = 0

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "N": self.N, "degree": self.degree, "window": self.window, "tol": self.tol,
            "status": self.status, "max_violation": self.max_violation,
            "witness": self.witness, "reason": self.reason, "comparisons": self.comparisons,
        }


def induced_endomorphism_check(
    model: RandomSequenceModel,
    N: int,
    degree: int = 3,
    window: int | None = None,
    tol: float = 1e-9,
) -> EndomorphismVerdict:
    """Isometry identity ``psi(iota[i;a]* iota[j;b]) = psi(iota[θ_N i;a]* iota[θ_N j;b])``.

    Checked for all ``i, j`` of length ``<= degree`` whose images stay in the
    window (default ``N + 2``, the smallest window where ``theta_N`` moves
    an index).  The compared moments have length up to ``2 * degree``, so the
    precondition is spreadability at that degree; when it fails the verdict
    is "skipped" rather than an error.
    """
    if N < 0 or degree < 1:
        raise ValidationError("need N >= 0 and degree >= 1")
    window = min(model.window, N + 2) if window is None else int(window)
    if window > model.window:
        raise WindowError(f"check window {window} exceeds the model window {model.window}")
    spread = check_symmetry(model, "spreadable", 2 * degree, window, tol)
    if not spread.passed:
        return EndomorphismVerdict(N, degree, window, tol, "skipped", None,
                                   reason=f"model is not spreadable up to degree {2 * degree}, window {window} "
                                          f"(violation {spread.max_violation:.3e})")
    # entries e with theta_N(e) < window
    top = window - 1 if window - 1 < N else window - 2
    if top < 0:
        raise WindowError(f"window {window} leaves no room for theta_{N}")
    shift = lambda n: n if n < N else n + 1  # noqa: E731
    tuples = [t for n in range(1, degree + 1) for t in itertools.product(range(top + 1), repeat=n)]
    worst, witness, count = 0.0, None, 0
    for a, i in enumerate(tuples):
        ti = tuple(map(shift, i))
        for j in tuples[a:]:
            tj = tuple(map(shift, j))
            lhs = model.moments(i[::-1] + j, cache=False)
            rhs = model.moments(ti[::-1] + tj, cache=False)
            diff = np.abs(lhs - rhs)
            count += diff.size
            v = float(diff.max())
            if v > worst + 1e-12:
                worst = v
                witness = {"i": list(i), "j": list(j), "theta_i": list(ti), "theta_j": list(tj)}
    status = "pass" if worst <= tol else "fail"
    return EndomorphismVerdict(N, degree, window, tol, status, worst, witness, comparisons=count)


def tail_estimate_deviation(model: RandomSequenceModel, k: int, x_degree: int = 2, y_degree: int = 2) -> float:
    """How far the large-shift functionals ``y -> psi(y alpha^k(x))`` are from scalar multiples of ``psi``.

    ``x`` ranges over monomials at index 0 up to ``x_degree``; ``y`` over
    monomials on indices ``< k`` up to ``y_degree``.  The scalar fitted for
    each ``x`` is the value at ``y = 1``.
    """
    B = len(model.basis)
    xs = [MonomialSpec((0,) * n, c) for n in range(1, x_degree + 1) for c in itertools.product(range(B), repeat=n)]
    ys = [MonomialSpec(t, c) for n in range(1, y_degree + 1)
          for t in itertools.product(range(k), repeat=n) for c in itertools.product(range(B), repeat=n)]
    worst = 0.0
    for x in xs:
        xk = x.shifted(k)
        c = _moment(model, xk)
        for y in ys:
            worst = max(worst, abs(_moment(model, y, xk) - _moment(model, y) * c))
    return worst


def convergence_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def element_moment(model: RandomSequenceModel, y: MonomialSpec, z: AlgElement) -> complex:
    """``psi(y z)`` for an ambient element ``z``."""
    return model.state(model.monomial(y.tuple, y.basis_choice) @ z)
