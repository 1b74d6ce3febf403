"""Central-limit moments ``psi(S_N(x)^p)`` with ``S_N(x) = N^{-1/2} sum_{n<N} iota_n(x)``.

Two exact finite-``N`` evaluators:

* brute force over all ``N^p`` index tuples;
* order-class decomposition, valid for spreadable sequences, where each
  class ``[i] ∈ O(p)`` contributes ``binomial(N, k) * psi(iota[i; x])``.

The limit is ``p!! a_p(x)`` with ``a_p`` the average moment over the pair
classes ``O_2(p)``; ``p!!`` is ``(p-1)(p-3)...1`` (0 for odd ``p``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConditioningError, PreconditionError, ResourceError, ValidationError, WindowError
from .matalg import AlgElement, element_json
from .seqmodel import RandomSequenceModel
from .subalg import CondExp, Subalgebra, conditional_expectation
from .tuplecomb import (
    canon,
    catalan,
    count_tuples_in_class,
    crossing_number,
    double_factorial,
    enumerate_order_classes,
    enumerate_pair_classes,
    enumerate_pair_partitions,
)

BRUTE_FORCE_CAP = 10**7
CHUNK = 1 << 17
LAWS = ("gaussian", "semicircle", "q_interp")


def _element(model: RandomSequenceModel, x: AlgElement | int) -> AlgElement:
    if isinstance(x, (int, np.integer)):
        return model.basis[int(x)]
    if x.parent != model.base:
        raise ValidationError("x must be an element of the base algebra")
    return x


def _tuple_moments(model: RandomSequenceModel, x: AlgElement, tuples: np.ndarray) -> np.ndarray:
    """``psi(iota_{t_1}(x) ... iota_{t_p}(x))`` for every row ``t`` of ``tuples``.

    Product-structured models factor over legs: ranges of distinct legs
    commute, so a row contributes ``prod_legs phi(x^{multiplicity})``.
    """
    tuples = np.asarray(tuples, dtype=np.int64)
    T, p = tuples.shape
    if p == 0:
        return np.ones(T, complex)
    if tuples.max(initial=0) >= model.window:
        raise WindowError(f"index {int(tuples.max())} outside the model window 0..{model.window - 1}")
    if model.fibers is None:
        cache: dict[tuple, complex] = {}
        out = np.empty(T, complex)
        for r, t in enumerate(map(tuple, tuples.tolist())):
            if t not in cache:
                cache[t] = model.moment_of(t, [x] * p)
            out[r] = cache[t]
        return out
    powers = [x.parent.identity()]
    for _ in range(p):
        powers.append(powers[-1] @ x)
    out = np.zeros(T, complex)
    for start in range(0, T, CHUNK):
        s = np.sort(tuples[start : start + CHUNK], axis=1)
        first = np.ones(s.shape, bool)
        first[:, 1:] = s[:, 1:] != s[:, :-1]
        counts = (s[:, :, None] == s[:, None, :]).sum(-1)
        for w, st in model.fibers:
            mom = np.array([st(pw) for pw in powers])
            out[start : start + CHUNK] += w * np.where(first, mom[counts], 1).prod(axis=1)
    return out


def _all_tuples(N: int, p: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    cols = []
    for _ in range(p):
        cols.append(idx % N)
        idx = idx // N
    return np.stack(cols[::-1], axis=1) if cols else np.zeros((stop - start, 0), np.int64)


def sn_moment_bruteforce(model: RandomSequenceModel, x: AlgElement | int, p: int, N: int,
                         cap: int = BRUTE_FORCE_CAP) -> float:
    """``N^{-p/2} sum_{i:[p]->[N]} psi(iota[i; x, ..., x])``."""
    x = _element(model, x)
    if p < 0 or N < 1:
        raise ValidationError("need p >= 0 and N >= 1")
    if not x.is_hermitian():
        raise ValidationError("x must be hermitian")
    if N > model.window:
        raise WindowError(f"N = {N} exceeds the model window {model.window}")
    total = N**p
    if total > cap:
        raise ResourceError(f"brute force needs {total} tuples (cap {cap}); use the class decomposition")
    acc = 0j
    step = CHUNK
    for start in range(0, total, step):
        acc += _tuple_moments(model, x, _all_tuples(N, p, start, min(total, start + step))).sum()
    return float((acc / N ** (p / 2)).real)


def spreadability_violation(model: RandomSequenceModel, x: AlgElement | int, p: int, window: int | None = None) -> float:
    """Largest ``|psi(iota[i; x..x]) - psi(iota[canon(i); x..x])|`` over ``p``-tuples in the window.

    This is the part of spreadability the class decomposition relies on.
    """
    x = _element(model, x)
    window = min(model.window, p) if window is None else window
    if window > model.window:
        raise WindowError(f"window {window} exceeds the model window {model.window}")
    tuples = _all_tuples(window, p, 0, window**p)
    reps = np.array([canon("order", t) for t in tuples.tolist()], dtype=np.int64).reshape(tuples.shape)
    if reps.max(initial=0) >= model.window:
        raise WindowError(f"order classes of degree {p} need a window of at least {p}")
    return float(np.abs(_tuple_moments(model, x, tuples) - _tuple_moments(model, x, reps)).max(initial=0.0))


def _gate(model: RandomSequenceModel, x: AlgElement, p: int, tol: float) -> float:
    if p > model.window:
        raise WindowError(f"degree {p} needs a model window of at least {p}, got {model.window}")
    v = spreadability_violation(model, x, p)
    if v > tol:
        raise PreconditionError(
            f"model is not spreadable for this x at degree {p} (violation {v:.3e}); class decomposition is unsound"
        )
    return v


def class_moments(model: RandomSequenceModel, x: AlgElement | int, classes) -> np.ndarray:
    x = _element(model, x)
    if not classes:
        return np.zeros(0, complex)
    reps = np.array([c.rep for c in classes], dtype=np.int64).reshape(len(classes), -1)
    return _tuple_moments(model, x, reps)


def sn_moment_by_classes(model: RandomSequenceModel, x: AlgElement | int, p: int, N: int,
                         tol: float = 1e-9, check_spreadable: bool = True) -> float:
    """``N^{-p/2} sum_{[i] ∈ O(p)} binomial(N, k_i) psi(iota[i; x])``; refuses non-spreadable models."""
    x = _element(model, x)
    if p < 0 or N < 1:
        raise ValidationError("need p >= 0 and N >= 1")
    if check_spreadable:
        _gate(model, x, p, tol)
    classes = enumerate_order_classes(p)
    vals = class_moments(model, x, classes)
    counts = np.array([count_tuples_in_class(c, N) for c in classes], dtype=float)
    return float(((counts * vals).sum() / N ** (p / 2)).real)


def limit_from_class_moments(p: int, moments: Sequence[complex]) -> complex:
    """``p!! * mean(moments)`` with the moments indexed by ``O_2(p)``."""
    if p % 2:
        return 0j
    return double_factorial(p) * complex(np.mean(moments)) if len(moments) else 0j


@dataclass(frozen=True)
class CLTLimit:
    p: int
    value: float
    a_p: float
    double_factorial: int
    class_table: tuple[tuple[tuple[int, ...], complex], ...]
    centering: dict = field(default_factory=dict)
    centered_x: AlgElement | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "p": self.p, "value": self.value, "a_p": self.a_p, "p!!": self.double_factorial,
            "class_table": [{"class": list(c), "moment": {"re": m.real, "im": m.imag}} for c, m in self.class_table],
            "centering": self.centering,
        }


def _centering(model: RandomSequenceModel, x: AlgElement, candidate, auto_center: bool, tol: float):
    """Check ``E_N(iota_0(x)) = 0``; optionally subtract a scalar mean."""
    if candidate is None:
        return x, {}
    e = _valid(model, candidate)
    ex = e(model.image(0, x))
    one = model.ambient.identity()
    c = model.state(ex)
    dev = ex.norm()
    if dev <= tol:
        return x, {"deviation": dev, "auto_centered": False}
    scalar = (ex - c * one).norm() <= tol
    if auto_center and scalar:
        return x - c * model.base.identity(), {"deviation": dev, "auto_centered": True, "subtracted": {"re": c.real, "im": c.imag}}
    why = "" if scalar else "; the conditional mean is not a scalar, so x cannot be centered in the base algebra"
    raise PreconditionError(f"x is not centered for the candidate: |E(iota_0(x))| = {dev:.3e}{why}")


def clt_limit(model: RandomSequenceModel, x: AlgElement | int, p: int,
              candidate: Subalgebra | CondExp | None = None, auto_center: bool = False, tol: float = 1e-9) -> CLTLimit:
    """``p!! a_p(x)``, gated on spreadability and, with a candidate tail, on centering."""
    x = _element(model, x)
    if not x.is_hermitian():
        raise ValidationError("x must be hermitian")
    x, info = _centering(model, x, candidate, auto_center, tol)
    if p % 2:
        return CLTLimit(p, 0.0, 0.0, 0, (), info, x)
    _gate(model, x, p, tol)
    classes = enumerate_pair_classes(p)
    vals = class_moments(model, x, classes)
    a_p = complex(np.mean(vals)) if len(vals) else 1 + 0j
    value = limit_from_class_moments(p, vals) if p else 1 + 0j
    return CLTLimit(p, float(value.real), float(a_p.real), double_factorial(p),
                    tuple((c.rep, complex(v)) for c, v in zip(classes, vals)), info, x)


def _valid(model: RandomSequenceModel, candidate: Subalgebra | CondExp) -> CondExp:
    e = candidate if isinstance(candidate, CondExp) else conditional_expectation(model.ambient, model.state, candidate)
    if not e.valid:
        raise ConditioningError(f"conditional expectation onto the candidate is {e.validity.value}")
    return e


@dataclass(frozen=True)
class ConditionalLimit:
    p: int
    value: AlgElement
    closed_form: AlgElement | None
    closed_form_deviation: float | None
    auto_centered: bool

    def to_dict(self) -> dict:
        return {
            "p": self.p, "A_p": element_json(self.value),
            "closed_form": element_json(self.closed_form) if self.closed_form is not None else None,
            "closed_form_deviation": self.closed_form_deviation, "auto_centered": self.auto_centered,
        }


def conditional_limit_Ap(model: RandomSequenceModel, x: AlgElement | int, p: int,
                         candidate: Subalgebra | CondExp, auto_center: bool = True, tol: float = 1e-9) -> ConditionalLimit:
    """``p!!/|O_2(p)| sum_{[i] ∈ O_2(p)} E_N(y_{i(1)} ... y_{i(p)})`` with ``y_n = iota_n(x) - E_N(iota_n(x))``.

    On commutative ambients the result is compared with ``p!! E_N(y_0^2)^{p/2}``.
    """
    x = _element(model, x)
    e = _valid(model, candidate)
    _gate(model, x, p, tol)
    amb = model.ambient
    if p % 2:
        return ConditionalLimit(p, amb.zero(), amb.zero() if amb.is_commutative else None,
                                0.0 if amb.is_commutative else None, auto_center)
    half = p // 2
    ys = []
    for n in range(max(half, 1)):
        z = model.image(n, x)
        ez = e(z)
        if auto_center:
            z = z - ez
        elif ez.norm() > tol:
            raise PreconditionError(f"iota_{n}(x) is not centered for the candidate: |E| = {ez.norm():.3e}")
        ys.append(z)
    classes = enumerate_pair_classes(p)
    acc = amb.zero()
    for c in classes:
        w = amb.identity()
        for i in c.rep:
            w = w @ ys[i]
        acc = acc + e(w)
    value = acc * (double_factorial(p) / len(classes)) if classes else amb.identity()
    closed, dev = None, None
    if amb.is_commutative:
        q = e(ys[0] @ ys[0])
        closed = amb.identity()
        for _ in range(half):
            closed = closed @ q
        closed = closed * double_factorial(p)
        dev = (value - closed).norm()
    return ConditionalLimit(p, value, closed, dev, auto_center)


def reference_moment(law: str, p: int, q: float | None = None) -> float:
    """Unit-variance ``p``-th moments: Gaussian ``p!!``, semicircle ``C_{p/2}``, ``sum_pi q^{cr(pi)}``."""
    if p < 0:
        raise ValidationError("p must be >= 0")
    if law not in LAWS:
        raise ValidationError(f"unknown law {law!r}; expected one of {LAWS}")
    if p % 2:
        return 0.0
    if law == "gaussian":
        return float(double_factorial(p))
    if law == "semicircle":
        return float(catalan(p // 2))
    if q is None or not 0 <= q <= 1:
        raise ValidationError(f"q_interp needs 0 <= q <= 1, got {q}")
    return float(math.fsum(q ** crossing_number(pi) for pi in enumerate_pair_partitions(p)))


@dataclass(frozen=True)
class CLTResult:
    p: int
    Ns: tuple[int, ...]
    bruteforce: tuple[float | None, ...]
    classes: tuple[float | None, ...]
    limit: CLTLimit | None
    variance: float
    references: dict
    ratios: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def max_path_disagreement(self) -> float | None:
        d = [abs(a - b) for a, b in zip(self.bruteforce, self.classes) if a is not None and b is not None]
        return max(d) if d else None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "rows": [{"N": n, "bruteforce": b, "classes": c} for n, b, c in zip(self.Ns, self.bruteforce, self.classes)],
            "max_path_disagreement": self.max_path_disagreement,
            "limit": self.limit.to_dict() if self.limit else None,
            "variance": self.variance,
            "references": self.references,
            "ratios": self.ratios,
            "notes": list(self.notes),
        }

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "p", "moment_bruteforce", "moment_classes", "limit", "gaussian", "semicircle"])
        lim = self.limit.value if self.limit else ""
        for n, b, c in zip(self.Ns, self.bruteforce, self.classes):
            w.writerow([n, self.p, "" if b is None else repr(b), "" if c is None else repr(c),
                        repr(lim) if lim != "" else "", repr(self.references["gaussian"]), repr(self.references["semicircle"])])
        return buf.getvalue()


def clt_study(model: RandomSequenceModel, x: AlgElement | int, p: int, Ns: Sequence[int],
              candidate: Subalgebra | CondExp | None = None, auto_center: bool = False,
              ratios: bool = False, tol: float = 1e-9, cap: int = BRUTE_FORCE_CAP) -> CLTResult:
    """Both evaluation paths for each ``N`` where they apply, the limit and reference laws."""
    x = _element(model, x)
    notes = []
    try:
        spreadable = p <= model.window and spreadability_violation(model, x, p) <= tol
    except WindowError:
        spreadable = False
    if not spreadable:
        notes.append(f"not spreadable for this x at degree {p} within the window; class path and limit skipped")
    limit, x_used = None, x
    if spreadable:
        try:
            limit = clt_limit(model, x, p, candidate, auto_center, tol)
            x_used = limit.centered_x
        except PreconditionError as exc:
            notes.append(f"limit not computed: {exc}")
    brute, cls = [], []
    for N in Ns:
        brute.append(sn_moment_bruteforce(model, x_used, p, N, cap) if N <= model.window and N**p <= cap else None)
        cls.append(sn_moment_by_classes(model, x_used, p, N, tol, check_spreadable=False) if spreadable else None)
    var = float(model.moment_of((0, 0), [x_used, x_used]).real)
    refs = {law: reference_moment(law, p) * var ** (p / 2) for law in ("gaussian", "semicircle")}
    rat = {}
    if ratios and spreadable:
        a2 = float(class_moments(model, x_used, enumerate_pair_classes(2)).mean().real)
        for k in range(1, p // 2 + 1):
            if k > model.window:  # pair classes of 2k points use k indices
                break
            a = float(class_moments(model, x_used, enumerate_pair_classes(2 * k)).mean().real)
            rat[f"a_{2 * k}/a_2^{k}"] = a / a2**k if a2 else None
    return CLTResult(p, tuple(Ns), tuple(brute), tuple(cls), limit, var, refs, rat, tuple(notes))

