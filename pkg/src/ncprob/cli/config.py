"""Scenario loading: schema validation, model construction and window checks.

Everything that can be rejected without computing moments is rejected here,
so a bad scenario fails fast with a JSON pointer to the offending field.
"""

from __future__ import annotations

import cmath
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..errors import ConfigError, NCProbError
from ..ergodic import MonomialSpec, required_window
from ..matalg import AlgElement, BlockAlgebra, FaithfulState
from ..seqmodel import (
    RandomSequenceModel,
    codomain_perturbed_sequence,
    coin_mixture_sequence,
    flip,
    identity_hom,
    inner_automorphism,
    iid_tensor_sequence,
    perturbed_domain_sequence,
    u_omega,
    yang_baxter_sequence,
)

SCENARIO_DIR = "scenarios"


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("scenario.schema.json").read_text())


def shipped_scenarios() -> dict[str, Path]:
    root = resources.files(__package__).joinpath(SCENARIO_DIR)
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name) if p.name.endswith(".json")}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def load(path: str | Path) -> dict:
    """Read a scenario file, or a shipped scenario by name."""
    p = Path(path)
    if not p.exists():
        shipped = shipped_scenarios()
        if str(path) in shipped:
            p = shipped[str(path)]
        else:
            raise ConfigError(f"no such scenario file or shipped scenario: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc


def validate_schema(config: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(config))
    if err is not None:
        raise ConfigError(err.message, _pointer(err.absolute_path) or "/")


def parse_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if "phase_degrees" in v:
        return cmath.exp(1j * math.radians(v["phase_degrees"]))
    return complex(v["re"], v.get("im", 0.0))


def parse_matrix(rows) -> np.ndarray:
    return np.array([[parse_complex(z) for z in row] for row in rows], dtype=complex)


def _base(spec: dict) -> tuple[BlockAlgebra, FaithfulState]:
    if spec["kind"] == "full":
        alg = BlockAlgebra.full(spec["d"])
        if "density" in spec:
            return alg, FaithfulState.from_density(alg, parse_matrix(spec["density"]))
        return alg, FaithfulState.tracial(alg)
    alg = BlockAlgebra.diagonal(len(spec["weights"]))
    return alg, FaithfulState.from_weights(alg, spec["weights"])


def _unitary(spec: dict) -> np.ndarray:
    if spec.get("preset") == "u_omega":
        return u_omega(parse_complex(spec["omega"]))
    if spec.get("preset") == "flip":
        return flip(spec.get("d", 2))
    return parse_matrix(spec["matrix"])


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _gamma(model: RandomSequenceModel, spec):
    base, st = model.base, model.base_state
    if spec == "identity":
        return identity_hom(base, st)
    if isinstance(spec, str):
        if base.blocks != (2,):
            raise ConfigError(f"gamma preset {spec!r} needs an M_2 base", "/model/gamma")
        v = SIGMA_X if spec == "ad_sigma_x" else HADAMARD
    else:
        v = parse_matrix(spec["unitary"])
    return inner_automorphism(base, st, base.from_matrix(v))


def build_model(spec: dict, window: int, pointer: str = "/model") -> RandomSequenceModel:
    """Construct the (lazy) model; invalid parameters become config errors."""
    try:
        kind = spec["kind"]
        if kind == "iid_tensor":
            base, st = _base(spec["base"])
            return iid_tensor_sequence(base, st, window)
        if kind == "codomain_perturbed":
            return codomain_perturbed_sequence(parse_complex(spec["omega"]), window)
        if kind == "coin_mixture":
            return coin_mixture_sequence([tuple(a) for a in spec["atoms"]], window)
        if kind == "yang_baxter":
            st = None
            u = _unitary(spec["u"])
            if "density" in spec:
                d = math.isqrt(u.shape[0])
                st = FaithfulState.from_density(BlockAlgebra.full(d), parse_matrix(spec["density"]))
            return yang_baxter_sequence(u, window, st)
        if kind == "perturbed_domain":
            inner = build_model(spec["model"], window, pointer + "/model")
            return perturbed_domain_sequence(inner, spec["position"], _gamma(inner, spec["gamma"]))
    except ConfigError:
        raise
    except (NCProbError, ValueError) as exc:
        raise ConfigError(str(exc), pointer) from exc
    raise ConfigError(f"unknown model kind {spec.get('kind')!r}", pointer + "/kind")


def candidate_names(model: RandomSequenceModel) -> list[str]:
    names = ["scalars"]
    if model.kind.startswith("coin_mixture"):
        names.append("fiber_scalars")
    return names


def basis_index(model: RandomSequenceModel, ref, pointer: str) -> int:
    labels = model.base.basis_labels
    if isinstance(ref, int):
        if ref >= len(labels):
            raise ConfigError(f"basis index {ref} out of range (basis has {len(labels)} elements)", pointer)
        return ref
    if ref not in labels:
        raise ConfigError(f"unknown basis label {ref!r}; valid labels: {list(labels)}", pointer)
    return labels.index(ref)


def element(model: RandomSequenceModel, spec, pointer: str) -> AlgElement:
    if isinstance(spec, dict):
        out = model.base.zero()
        for lab, c in spec["combination"].items():
            ref = int(lab) if lab.isdigit() else lab
            out = out + parse_complex(c) * model.basis[basis_index(model, ref, f"{pointer}/combination/{lab}")]
        return out
    return model.basis[basis_index(model, spec, pointer)]


def monomial(model: RandomSequenceModel, spec: dict, pointer: str) -> MonomialSpec:
    if len(spec["tuple"]) != len(spec["basis"]):
        raise ConfigError("tuple and basis must have equal length", pointer)
    return MonomialSpec(tuple(spec["tuple"]), tuple(basis_index(model, b, f"{pointer}/basis/{k}")
                                                    for k, b in enumerate(spec["basis"])))


def _need(ok: bool, msg: str, pointer: str) -> None:
    if not ok:
        raise ConfigError(msg, pointer)


def validate_semantics(config: dict, model: RandomSequenceModel) -> None:
    """Window and reference consistency of every check, before any computation."""
    L = config["window"]
    for i, chk in enumerate(config["checks"]):
        ptr = f"/checks/{i}"
        t = chk["type"]
        if "window" in chk:
            _need(chk["window"] <= L, f"check window {chk['window']} exceeds the scenario window {L}", ptr + "/window")
        if "candidate" in chk:
            names = candidate_names(model)
            _need(chk["candidate"] in names, f"unknown candidate {chk['candidate']!r} for {model.kind}; valid: {names}",
                  ptr + "/candidate")
        for key in ("M1", "M2", "I", "J"):
            if key in chk:
                _need(max(chk[key]) < L, f"index set {chk[key]} outside the window 0..{L - 1}", f"{ptr}/{key}")
        if t == "moment":
            _need(len(chk["tuple"]) == len(chk["basis"]), "tuple and basis must have equal length", ptr)
            _need(max(chk["tuple"], default=-1) < L, f"tuple {chk['tuple']} outside the window 0..{L - 1}", ptr + "/tuple")
            for k, b in enumerate(chk["basis"]):
                basis_index(model, b, f"{ptr}/basis/{k}")
        if t in ("mixing", "cesaro", "refined_average"):
            x = monomial(model, chk["x"], ptr + "/x")
            ys = [monomial(model, chk["y"], ptr + "/y")] if "y" in chk else []
            ys += [monomial(model, s, f"{ptr}/tests/{k}") for k, s in enumerate(chk.get("tests", []))]
            for y in ys:
                _need(y.max_index < L, "test monomial outside the window", ptr)
            if t == "mixing":
                need = required_window(x.max_index, max(chk["shifts"]))
            elif t == "cesaro":
                need = required_window(x.max_index, max(chk["n_values"]))
            else:
                need = required_window(x.max_index, N=max(chk["N_values"])) if x.tuple else 1
            _need(need <= L, f"needs a window of at least {need}, scenario window is {L}", ptr)
        if t in ("clt", "conditional_clt"):
            element(model, chk["x"], ptr + "/x")
            if t == "conditional_clt":
                _need(chk["p"] <= L, f"degree {chk['p']} needs a window of at least {chk['p']}", ptr + "/p")
        if t == "braid":
            _need(model.kind == "yang_baxter", "braid checks need a yang_baxter model", ptr)
        if t == "induced_endomorphism" and "window" not in chk:
            _need(chk["N"] + 2 <= L, f"theta_{chk['N']} needs a window of at least {chk['N'] + 2}", ptr + "/N")


def prepare(config: dict) -> RandomSequenceModel:
    validate_schema(config)
    model = build_model(config["model"], config["window"])
    validate_semantics(config, model)
    return model
