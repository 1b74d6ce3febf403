"""Check execution and report assembly.

Every check returns a status (pass, fail, skipped or error), a JSON-ready
result body and optional CSV tables.  Reports are assembled in declared
check order, so the body is identical however the checks were scheduled.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..clt import clt_study, conditional_limit_Ap, reference_moment
from ..errors import NCProbError, PreconditionError, ResourceError, WindowError
from ..ergodic import (
    TN_SEED,
    cesaro_average,
    convergence_csv,
    induced_endomorphism_check,
    mixing_gap,
    refined_average_TN,
    shifted_moment,
)
from ..indcheck import IndependenceChecker, factorizability_vs_independence_audit, zero_one_diagnostic
from ..matalg import DEFAULT_TOL
from ..seqmodel import RandomSequenceModel
from ..subalg import POSITIVITY_SEED, conditional_expectation, generate_subalgebra, verify_commuting_square
from ..symcheck import check_braid_relation, check_symmetry, symmetry_hierarchy_audit
from ..tuplecomb import (
    are_equivalent,
    canon,
    catalan,
    class_table_csv,
    crossing_number,
    double_factorial,
    enumerate_order_classes,
    enumerate_pair_classes,
    enumerate_pair_partitions,
    theta_composite,
)
from . import config as cfg

STATUSES = ("pass", "fail", "skipped", "error")


def cjson(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


@dataclass
class Outcome:
    status: str
    result: dict
    tables: dict[str, str] = field(default_factory=dict)


class Context:
    """The model plus lazily built, shared conditioning candidates."""

    def __init__(self, config: dict, model: RandomSequenceModel, tol: float):
        self.config = config
        self.model = model
        self.tol = tol
        self.seed = config.get("seed", TN_SEED)
        self._lock = threading.Lock()
        self._checkers: dict[str, IndependenceChecker] = {}

    def candidate(self, name: str):
        return self.checker(name).E.target

    def checker(self, name: str) -> IndependenceChecker:
        with self._lock:
            if name not in self._checkers:
                self._checkers[name] = IndependenceChecker(self.model, self.model.candidate(name), name, self.tol)
            return self._checkers[name]

    def warm(self) -> None:
        """Build shared state up front so worker threads only read it."""
        if self.model.dense_available:
            self.model.ambient
        for chk in self.config["checks"]:
            if "candidate" in chk and chk["type"] not in ("zero_one",):
                try:
                    self.checker(chk["candidate"])
                except NCProbError:
                    pass  # surfaced by the check itself


def _ptr(i: int) -> str:
    return f"/checks/{i}"


def _pass(ok: bool) -> str:
    return "pass" if ok else "fail"


def _symmetry(ctx: Context, c: dict, tol: float) -> Outcome:
    v = check_symmetry(ctx.model, c["kind"], c.get("degree", 4), c.get("window"), tol)
    return Outcome(_pass(v.passed), v.to_dict())


def _hierarchy(ctx: Context, c: dict, tol: float) -> Outcome:
    audit = symmetry_hierarchy_audit(ctx.model, c.get("degree", 4), c.get("window"), tol)
    ok = audit.monotone and all(v.passed for v in audit.verdicts)
    return Outcome(_pass(ok), audit.to_dict())


def _braid(ctx: Context, c: dict, tol: float) -> Outcome:
    u = ctx.model.params["u"]
    r = check_braid_relation(np.array(u["re"]) + 1j * np.array(u["im"]), tol)
    return Outcome(_pass(r.holds), r.to_dict())


def _moment(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model
    basis = [cfg.basis_index(m, b, "/basis") for b in c["basis"]]
    val = m.psi_moment(c["tuple"], basis)
    out = {"tuple": c["tuple"], "basis": [m.base.basis_labels[b] for b in basis], "value": cjson(val)}
    if "expected" not in c:
        return Outcome("pass", out)
    exp = cfg.parse_complex(c["expected"])
    out["expected"] = cjson(exp)
    out["deviation"] = abs(val - exp)
    return Outcome(_pass(out["deviation"] <= tol), out)


def _identical(ctx: Context, c: dict, tol: float) -> Outcome:
    d = ctx.model.identical_distribution_defect()
    return Outcome(_pass(d <= tol), {"max_deviation": d})


def _commuting_square(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model

    def gen(I):
        gens = [m.ambient.identity()] + [m.image(i, b) for i in I for b in m.basis]
        return generate_subalgebra(m.ambient, m.state, gens, tol)

    e1, e2 = (conditional_expectation(m.ambient, m.state, gen(c[k])) for k in ("M1", "M2"))
    e0 = conditional_expectation(m.ambient, m.state, m.candidate(c.get("candidate", "scalars")))
    r = verify_commuting_square(e1, e2, e0, tol)
    body = {
        "M1": c["M1"], "M2": c["M2"],
        "conditions": {k: {"holds": v.holds, "deviation": v.deviation} for k, v in r.conditions.items()},
        "all_agree": r.all_agree, "is_commuting_square": r.is_commuting_square,
        "intersection_dim": r.intersection_dim, "m0_dim": r.m0_dim,
    }
    return Outcome(_pass(r.is_commuting_square and r.all_agree), body)


def _independence(ctx: Context, c: dict, tol: float) -> Outcome:
    v = ctx.checker(c.get("candidate", "scalars")).sequence(c["mode"], c.get("max_set_size", 2), c.get("window"))
    return Outcome(_pass(v.passed), v.to_dict(), {"pairs": v.table_csv()})


def _factorizability(ctx: Context, c: dict, tol: float) -> Outcome:
    v = ctx.checker(c.get("candidate", "scalars")).check(c["I"], c["J"], c.get("joined", True))
    return Outcome(_pass(v.passed), v.to_dict())


def _audit(ctx: Context, c: dict, tol: float) -> Outcome:
    a = factorizability_vs_independence_audit(ctx.model, ctx.candidate(c.get("candidate", "scalars")), tol,
                                              c.get("max_set_size", 2), c.get("candidate", "scalars"))
    return Outcome(_pass(a.coherent), a.to_dict())


def _zero_one(ctx: Context, c: dict, tol: float) -> Outcome:
    name = c.get("candidate", "scalars")
    r = zero_one_diagnostic(ctx.model, ctx.candidate(name), tol)
    status = {"trivial": "pass", "nontrivial": "fail", "skipped": "skipped"}[r.status]
    return Outcome(status, r.to_dict())


def _mixing(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model
    x, y = cfg.monomial(m, c["x"], "/x"), cfg.monomial(m, c["y"], "/y")
    e = ctx.checker(c.get("candidate", "scalars")).E
    rows = [(k, mixing_gap(m, x, y, e, k)) for k in c["shifts"]]
    worst = max(g for _, g in rows)
    body = {"x": x.to_dict(), "y": y.to_dict(), "gaps": [{"k": k, "gap": g} for k, g in rows], "max_gap": worst}
    return Outcome(_pass(worst <= tol), body, {"gaps": convergence_csv(["k", "gap"], [(k, repr(g)) for k, g in rows])})


def _cesaro(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model
    x, y = cfg.monomial(m, c["x"], "/x"), cfg.monomial(m, c["y"], "/y")
    target = m.psi_moment(y.tuple, y.basis_choice) * m.psi_moment(x.tuple, x.basis_choice)
    rows, ok = [], True
    for n in c["n_values"]:
        cn = cesaro_average(m, y, x, n)
        row = {"n": n, "value": cjson(cn), "gap_to_product": abs(cn - target)}
        if x.max_index + n < m.window:
            cn1 = cesaro_average(m, y, x, n + 1)
            bound = 2 * max(abs(shifted_moment(m, y, x, k)) for k in range(n + 1)) / n
            row.update(step=abs(cn1 - cn), bound=bound, holds=abs(cn1 - cn) <= bound + tol)
            ok &= row["holds"]
        rows.append(row)
    body = {"x": x.to_dict(), "y": y.to_dict(), "product": cjson(target), "rows": rows}
    csv_rows = [(r["n"], repr(r["value"]["re"]), repr(r["value"]["im"]), repr(r["gap_to_product"]),
                 repr(r.get("step", "")), repr(r.get("bound", ""))) for r in rows]
    return Outcome(_pass(ok), body, {"cesaro": convergence_csv(["n", "re", "im", "gap", "step", "bound"], csv_rows)})


def _refined(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model
    x = cfg.monomial(m, c["x"], "/x")
    tests = None
    if "tests" in c:
        tests = [cfg.monomial(m, t, f"/tests/{k}") for k, t in enumerate(c["tests"])]
    results = [refined_average_TN(m, x, N, tests, seed=ctx.seed) for N in c["N_values"]]
    px = m.psi_moment(x.tuple, x.basis_choice)
    targets = [m.psi_moment(t.tuple, t.basis_choice) * px for t in results[0].tests]
    gaps = [[abs(v - g) for v, g in zip(r.values, targets)] for r in results]
    # non-increasing distance to the tail estimate, per test monomial
    slack = [r.stderr for r in results]
    monotone = True
    for a in range(1, len(results)):
        for j in range(len(targets)):
            allow = tol + (3 * (slack[a][j] + slack[a - 1][j]) if slack[a] and slack[a - 1] else 0.0)
            monotone &= gaps[a][j] <= gaps[a - 1][j] + allow
    body = {"x": x.to_dict(), "tail_estimate": [cjson(t) for t in targets],
            "results": [r.to_dict() for r in results], "gaps": gaps, "monotone": monotone}
    rows = [(r.N, j, r.mode, repr(complex(v).real), repr(complex(v).imag), repr(g[j]))
            for r, g in zip(results, gaps) for j, v in enumerate(r.values)]
    return Outcome(_pass(monotone), body, {"TN": convergence_csv(["N", "test", "mode", "re", "im", "gap"], rows)})


def _induced(ctx: Context, c: dict, tol: float) -> Outcome:
    v = induced_endomorphism_check(ctx.model, c["N"], c.get("degree", 3), c.get("window"), tol)
    return Outcome(v.status, v.to_dict())


def _clt(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model
    x = cfg.element(m, c["x"], "/x")
    cand = ctx.candidate(c["candidate"]) if "candidate" in c else None
    r = clt_study(m, x, c["p"], c["N_values"], cand, c.get("auto_center", False), c.get("ratios", False), tol)
    body = r.to_dict()
    d = r.max_path_disagreement
    ok = d is None or d <= tol
    if "expected_limit" in c:
        exp = c["expected_limit"]
        body["expected_limit"] = exp
        ok &= r.limit is not None and abs(r.limit.value - exp) <= tol
    tables = {"moments": r.table_csv()}
    if r.limit is not None:
        rows = [(" ".join(map(str, cls)), repr(v.real), repr(v.imag)) for cls, v in r.limit.class_table]
        tables["pair_classes"] = convergence_csv(["class", "re", "im"], rows)
    return Outcome(_pass(ok), body, tables)


def _conditional(ctx: Context, c: dict, tol: float) -> Outcome:
    m = ctx.model
    x = cfg.element(m, c["x"], "/x")
    r = conditional_limit_Ap(m, x, c["p"], ctx.checker(c.get("candidate", "scalars")).E,
                             c.get("auto_center", True), tol)
    ok = r.closed_form_deviation is None or r.closed_form_deviation <= tol
    return Outcome(_pass(ok), r.to_dict())


def _reference(ctx: Context, c: dict, tol: float) -> Outcome:
    v = reference_moment(c["law"], c["p"], c.get("q"))
    body = {"law": c["law"], "p": c["p"], "q": c.get("q"), "value": v}
    if "expected" not in c:
        return Outcome("pass", body)
    body["expected"] = c["expected"]
    return Outcome(_pass(abs(v - c["expected"]) <= tol), body)


def _counting(ctx: Context, c: dict, tol: float) -> Outcome:
    N = c.get("N", ctx.model.window)
    rows, ok, tables = [], True, {}
    for p in c["p_values"]:
        pp = len(enumerate_pair_partitions(p)) if p % 2 == 0 else 0
        o2 = len(enumerate_pair_classes(p))
        op = len(enumerate_order_classes(p))
        nc = sum(1 for pi in enumerate_pair_partitions(p) if not crossing_number(pi) > 0) if p % 2 == 0 else 0
        df = double_factorial(p) if p % 2 == 0 else 0
        row = {"p": p, "pair_partitions": pp, "pair_classes": o2, "order_classes": op,
               "noncrossing": nc, "p!!": df}
        if p % 2 == 0:
            row["identities"] = {
                "pair_partitions == p!!": pp == df,
                "pair_classes == p!!*(p/2)!": o2 == df * math.factorial(p // 2),
                "noncrossing == catalan": nc == catalan(p // 2),
            }
            ok &= all(row["identities"].values())
        rows.append(row)
        if p <= 6:
            tables[f"order_classes_p{p}"] = class_table_csv(enumerate_order_classes(p), N)
    return Outcome(_pass(ok), {"N": N, "rows": rows}, tables)


def _tuple_calculus(ctx: Context, c: dict, tol: float) -> Outcome:
    L, E, N = c.get("max_length", 5), c.get("max_entry", 5), c.get("theta_N", 3)
    base = (1, 3, 1, 3, 4, 2, 4, 2, 4)
    pair = {n: are_equivalent("order", base, tuple(e + n if k >= 4 else e for k, e in enumerate(base)))
            for n in range(6)}
    pair_ok = all(v == (n == 0) for n, v in pair.items())
    chain_bad = 0
    checked = 0
    for n in range(1, L + 1):
        tuples = list(itertools.product(range(E), repeat=n))
        by = {r: {} for r in ("theta", "order", "symmetric")}
        for t in tuples:
            for r in by:
                by[r].setdefault(canon(r, t), []).append(t)
        # each theta class lies inside one order class, each order class inside one symmetric class
        for r, coarser in (("theta", "order"), ("order", "symmetric")):
            for members in by[r].values():
                checked += 1
                chain_bad += len({canon(coarser, t) for t in members}) != 1
    theta_bad = cross_bad = 0
    domain = range(N * (N + 2) + 2)
    maps = [theta_composite(N, l) for l in itertools.product(range(N), repeat=N + 1)]
    for f in maps:
        img = [f(a) for a in domain]
        theta_bad += any(img[a] >= img[a + 1] for a in range(len(img) - 1))
    # different composites keep the indices below N apart: i < j < N gives f(i) < g(j)
    for f, g in itertools.product(maps, repeat=2):
        cross_bad += any(f(i) >= g(j) for i in range(N) for j in range(i + 1, N))
    body = {
        "order_pair": {str(n): v for n, v in pair.items()}, "order_pair_ok": pair_ok,
        "implication_chain": {"max_length": L, "max_entry": E, "classes_checked": checked, "violations": chain_bad},
        "theta": {"N": N, "composites": len(maps), "non_strictly_increasing": theta_bad,
                  "cross_order_violations": cross_bad},
    }
    return Outcome(_pass(pair_ok and chain_bad == 0 and theta_bad == 0 and cross_bad == 0), body)


RUNNERS = {
    "symmetry": _symmetry, "hierarchy": _hierarchy, "braid": _braid, "moment": _moment,
    "identical_distribution": _identical, "commuting_square": _commuting_square,
    "independence": _independence, "factorizability": _factorizability, "audit": _audit,
    "zero_one": _zero_one, "mixing": _mixing, "cesaro": _cesaro, "refined_average": _refined,
    "induced_endomorphism": _induced, "clt": _clt, "conditional_clt": _conditional,
    "reference": _reference, "counting": _counting, "tuple_calculus": _tuple_calculus,
}


def run_check(ctx: Context, index: int, spec: dict) -> tuple[Outcome, float]:
    tol = spec.get("tol", ctx.tol)
    t0 = time.perf_counter()
    try:
        out = RUNNERS[spec["type"]](ctx, spec, tol)
    except (WindowError, ResourceError) as exc:
        out = Outcome("error", {"error": type(exc).__name__, "message": str(exc), "pointer": _ptr(index)})
    except PreconditionError as exc:
        out = Outcome("skipped", {"reason": f"precondition not met: {exc}"})
    except NCProbError as exc:
        out = Outcome("error", {"error": type(exc).__name__, "message": str(exc), "pointer": _ptr(index)})
    out.result.setdefault("tol", tol)
    return out, time.perf_counter() - t0


def check_id(index: int, spec: dict) -> str:
    return spec.get("id", f"{index:02d}-{spec['type']}")


def scenario_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def run_scenario(config: dict, out_dir: str | Path | None = None, jobs: int = 1,
                 tol: float | None = None) -> tuple[dict, int]:
    """Execute every check; return the report and the exit status.

    Raises ``ConfigError`` for invalid scenarios before anything runs.
    """
    t0 = time.perf_counter()
    model = cfg.prepare(config)
    default_tol = tol if tol is not None else config.get("tolerance", DEFAULT_TOL)
    ctx = Context(config, model, default_tol)
    ctx.warm()
    specs = config["checks"]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(lambda a: run_check(ctx, *a), enumerate(specs)))
    else:
        done = [run_check(ctx, i, s) for i, s in enumerate(specs)]

    default_expect = config.get("expect", "pass")
    checks, timing, tables = [], {}, {}
    for i, (spec, (out, secs)) in enumerate(zip(specs, done)):
        cid = check_id(i, spec)
        expect = spec.get("expect", default_expect)
        as_expected = out.status != "error" and (expect == "any" or out.status == expect)
        checks.append({"id": cid, "type": spec["type"], "status": out.status, "expect": expect,
                       "as_expected": as_expected, "result": out.result,
                       "tables": sorted(f"{cid}.{name}.csv" for name in out.tables)})
        timing[cid] = secs
        for name, text in out.tables.items():
            tables[f"{cid}.{name}.csv"] = text
    if any(c["status"] == "error" for c in checks):
        code = 2
    elif all(c["as_expected"] for c in checks):
        code = 0
    else:
        code = 1
    report = {
        "artifact": {"name": "artifact", "package": "ncprob", "version": __version__, "numpy": np.__version__},
        "scenario": config,
        "provenance": {
            "scenario_sha256": scenario_hash(config),
            "default_tolerance": default_tol,
            "tolerance_override": tol,
            "seeds": {"refined_average": ctx.seed, "positivity_sampling": POSITIVITY_SEED},
            "jobs_independent": True,
        },
        "model": model.describe(),
        "checks": checks,
        "summary": {
            "overall": {0: "pass", 1: "fail", 2: "error"}[code],
            "exit_code": code,
            "counts": {s: sum(c["status"] == s for c in checks) for s in STATUSES},
            "unexpected": [c["id"] for c in checks if not c["as_expected"]],
        },
        "timing": {"total_seconds": time.perf_counter() - t0, "checks": timing},
    }
    if out_dir is not None:
        if not config.get("outputs", {}).get("csv", True):
            tables = {}
        write_report(report, tables, Path(out_dir))
    return report, code


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False, allow_nan=True) + "\n"


def write_report(report: dict, tables: dict[str, str], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    name = report["scenario"]["name"]
    written = [out_dir / f"{name}.report.json"]
    written[0].write_text(report_json(report), encoding="utf-8")
    for fname, text in sorted(tables.items()):
        p = out_dir / f"{name}.{fname}"
        p.write_text(text, encoding="utf-8", newline="")
        written.append(p)
    return written
