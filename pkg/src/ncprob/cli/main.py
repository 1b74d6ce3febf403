"""Command line entry point: ``run``, ``list`` and ``describe``.

Exit status: 0 when every check ends as expected, 1 when at least one does
not, 2 for configuration or resource errors.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from . import config as cfg
from .runner import run_scenario

WINDOW_NOTE = ("Verdicts are finite evidence: they hold 'up to degree n, window L', "
               "where degree bounds the tuple length and window bounds the indices (0..L-1).")

CHECK_DOCS = {
    "exchangeable": "Every tuple of length <= degree with entries < window has the same moments as its "
                    "sorted rearrangement (symmetric equivalence). " + WINDOW_NOTE,
    "spreadable": "Every tuple of length <= degree with entries < window has the same moments as its rank "
                  "normalization (order equivalence: same relative order of indices). " + WINDOW_NOTE,
    "stationary": "Every tuple of length <= degree with entries < window has the same moments as its "
                  "translate starting at 0 (translation equivalence). " + WINDOW_NOTE,
    "symmetry": "One of exchangeable, spreadable or stationary; fields kind, degree (default 4), "
                "window (default min(6, L)). The witness is the first maximal violator in length-major "
                "lexicographic order.",
    "hierarchy": "All three symmetry checks at one degree and window; the pattern must be monotone "
                 "(exchangeable => spreadable => stationary).",
    "braid": "Braid relation of the yang_baxter unitary on three legs, operator-norm residual.",
    "moment": "A single mixed moment psi(iota_i1(a1)...iota_in(an)) compared with an expected value.",
    "identical_distribution": "Largest moment difference between the legs iota_n and iota_0.",
    "commuting_square": "Commuting-square conditions for the subalgebras generated by index sets M1, M2 "
                        "over a candidate (default scalars); all equivalent formulations must agree.",
    "independence": "Sequence independence of mode CI, CIo, CF or CFo over a candidate, for index sets of "
                    "size <= max_set_size within the window.",
    "CI": "Conditional independence: E(xy) = E(x)E(y) for x, y in the algebras generated by disjoint index "
          "sets joined with the candidate.",
    "CIo": "Order conditional independence: as CI, restricted to index sets with I < J.",
    "CF": "Conditional factorizability: as CI, without joining the candidate.",
    "CFo": "Order conditional factorizability: as CF, restricted to index sets with I < J.",
    "factorizability": "One factorization test for index sets I and J, joined or not.",
    "audit": "Side-by-side CI/CIo/CF/CFo verdicts and the factorizability => independence implications "
             "under their hypotheses; violated implications are findings.",
    "zero_one": "Finite zero-one diagnostic: order independence over the candidate, then scalar tail "
                "estimates at the last window index. Skipped when the precondition fails.",
    "mixing": "|psi(y* alpha^k(x)) - psi(y* E(x))| for the listed shifts k.",
    "cesaro": "Cesaro averages (1/n) sum_k psi(y alpha^k(x)) and the step bound |c(n+1) - c(n)| <= 2 max/n.",
    "refined_average": "Moment-level T_N averages over theta composites, exact for N <= 4, Monte Carlo beyond; "
                       "the distance to the product estimate must not increase with N.",
    "induced_endomorphism": "Isometry identity for theta_N on tuples up to degree; skipped unless the model "
                            "is spreadable at twice that degree.",
    "clt": "Moments of the normalized sums S_N by brute force and by class counting, the limit p!! a_p(x) "
           "and Gaussian/semicircle references.",
    "conditional_clt": "Conditional limit A_p over a candidate, compared with p!! E(y0^2)^(p/2) on commutative "
                       "ambients.",
    "reference": "Reference moments of the Gaussian, semicircle and q-interpolated laws.",
    "counting": "Pair partitions, pair classes, order classes and noncrossing pairings against their "
                "closed forms.",
    "tuple_calculus": "Order equivalence of a worked tuple pair, the implication chain theta => order => "
                      "symmetric, and order preservation of theta composites.",
}


def _run(args) -> int:
    config = cfg.load(args.config)
    out = args.out or config.get("outputs", {}).get("dir", "reports")
    report, code = run_scenario(config, out, args.jobs, args.tol)
    for c in report["checks"]:
        mark = "ok " if c["as_expected"] else "BAD"
        print(f"[{mark}] {c['id']}: {c['status']} (expect {c['expect']})")
    print(f"{report['scenario']['name']}: {report['summary']['overall']} -> {out}")
    return code


def _list(args) -> int:
    for name, path in cfg.shipped_scenarios().items():
        try:
            desc = cfg.load(path).get("description", "")
        except ConfigError:
            desc = "(unreadable)"
        print(f"{name}: {desc}")
    return 0


def _describe(args) -> int:
    if args.kind not in CHECK_DOCS:
        print(f"unknown kind {args.kind!r}; valid kinds: {', '.join(sorted(CHECK_DOCS))}", file=sys.stderr)
        return 2
    print(f"{args.kind}: {CHECK_DOCS[args.kind]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncprob", description="Finite-window checks for noncommutative random sequences.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or a shipped scenario by name")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: the scenario's outputs.dir, else ./reports)")
    r.add_argument("--jobs", type=int, default=1, help="checks run concurrently (default 1)")
    r.add_argument("--tol", type=float, default=None, help="tolerance for checks without their own")
    r.set_defaults(func=_run)
    sub.add_parser("list", help="list shipped scenarios").set_defaults(func=_list)
    d = sub.add_parser("describe", help="document a check kind")
    d.add_argument("kind")
    d.set_defaults(func=_describe)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
