"""Experiment configuration: TOML files checked against a JSON schema.

A config has the top-level keys ``experiment``, ``seed``, ``group``,
``measure``, ``engine``, ``params``, ``pathological`` and ``output``.
Unknown keys are rejected at every level.  See ``docs/config.md`` for the
per-experiment parameters.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import InputError, SchemaError
from .green import GreenConfig
from .groups import Group, GroupSpec
from .measures import Measure, TailFamily, lazy, loads, nearest_neighbor, realize, srw

EXPERIMENTS = ("green", "martin", "spectral", "ancona-scan", "pre-ancona", "hourglass",
               "strong-ancona", "llt-fit", "patho-solve", "patho-certify",
               "patho-oscillation", "templates-bound")

_word = {"type": "string"}
_words = {"type": "array", "items": _word}
_ints = {"type": "array", "items": {"type": "integer"}}
_nums = {"type": "array", "items": {"type": "number"}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "group"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer"},
        "group": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["free", "free_product"]},
                           "rank": {"type": "integer"}, "orders": _ints, "symbols": _words,
                           "ball_cap": {"type": "integer", "minimum": 1}},
        },
        "measure": {
            "type": "object", "additionalProperties": False, "required": ["source"],
            "properties": {
                "source": {"enum": ["srw", "lazy_srw", "nearest_neighbor", "inline", "file",
                                    "family", "pathological"]},
                "weights": {"type": "object", "additionalProperties": {"type": "number"}},
                "text": {"type": "string"},
                "path": {"type": "string"},
                "family": {"enum": ["gaussian", "geometric"]},
                "param": {"type": "number"},
                "mass_eps": {"type": "number", "exclusiveMinimum": 0},
                "exact": {"type": "boolean"},
                "normalized": {"type": "boolean"},
            },
        },
        "engine": {
            "type": "object", "additionalProperties": False,
            "properties": {"working_radius": {"type": "integer", "minimum": 0},
                           "path_cap": {"type": "integer", "minimum": 0},
                           "mode": {"enum": ["float", "rational"]},
                           "center": {"type": "string"},
                           "engine": {"enum": ["auto", "explicit", "lumped"]},
                           "tol": {"type": "number", "exclusiveMinimum": 0}},
        },
        "params": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "x": _word, "y": _word, "points": _words, "targets": _words,
                "omega": {"type": "object", "additionalProperties": False,
                          "properties": {"kind": {"enum": ["full", "ball_complement", "point_complement"]},
                                         "center": _word, "radius": {"type": "integer", "minimum": 0}}},
                "first_visit": {"type": "boolean"},
                "n": {"type": "integer", "minimum": 2},
                "n_max": {"type": "integer", "minimum": 2},
                "n_values": _ints,
                "triples": {"type": "array", "items": {"type": "array", "items": _word,
                                                       "minItems": 3, "maxItems": 3}},
                "random_triples": {"type": "integer", "minimum": 0},
                "d1": {"type": "integer", "minimum": 0},
                "d2": {"type": "integer", "minimum": 0},
                "H0": {"type": "number", "minimum": 0},
                "rule": {"enum": ["axis", "all-axes"]},
                "multiplier": {"type": "integer", "minimum": 1},
                "offsets": _words,
                "levels": _ints,
                "z_lengths": _nums,
                "weight_floor": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "pathological": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["prop", "thm"]},
                "r_limit": {"type": "number", "exclusiveMinimum": 0},
                "depth": {"type": "integer", "minimum": 0},
                "rho_bound": {"type": "number"},
                "s0_rule": {"enum": ["extend", "r0"]},
                "z_marker": _word,
                "generator": _word,
                "universe": {"type": "object", "additionalProperties": False,
                             "required": ["rho", "r", "n"],
                             "properties": {"rho": {"type": "number"}, "r": _nums, "s": _nums,
                                            "n": _ints, "r_limit": {"type": "number"}}},
            },
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "name": {"type": "string"}},
        },
    },
}


def parse(text: str) -> dict:
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"not valid TOML: {exc}") from exc
    check(cfg)
    return cfg


def load(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {p}: {exc}") from exc
    cfg = parse(text)
    cfg.setdefault("_base_dir", str(p.parent))
    return cfg


def check(cfg: dict):
    """Raise SchemaError with the path of the first offending key."""
    data = {k: v for k, v in cfg.items() if not k.startswith("_")}
    errs = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(data), key=lambda e: list(e.path))
    if errs:
        e = errs[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise SchemaError(f"{where}: {e.message}")


def config_hash(cfg: dict) -> str:
    data = {k: v for k, v in cfg.items() if not k.startswith("_")}
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


# ------------------------------------------------------------------ builders
def build_group(cfg: dict) -> Group:
    g = dict(cfg["group"])
    cap = g.pop("ball_cap", None)
    spec = GroupSpec.from_dict(g)
    return Group(spec) if cap is None else Group(spec, ball_cap=cap)


def build_engine(cfg: dict, group: Group) -> GreenConfig:
    e = dict(cfg.get("engine", {}))
    c = e.get("center")
    if c is not None and c not in ("origin", "source", "target", "tube"):
        e["center"] = group.parse(c)
    return GreenConfig(**e)


def build_measure(cfg: dict, group: Group) -> Measure:
    """The measure of a config; pathological sources are built by the runner."""
    m = cfg.get("measure")
    if m is None:
        raise SchemaError("measure: required for this experiment")
    src = m["source"]
    if src == "srw":
        mu = srw(group)
    elif src == "lazy_srw":
        mu = lazy(srw(group))
    elif src == "nearest_neighbor":
        if "weights" not in m:
            raise SchemaError("measure/weights: required for nearest_neighbor")
        mu = nearest_neighbor(group, m["weights"])
    elif src == "inline":
        mu = loads(group, m.get("text", ""), m.get("exact"))
    elif src == "file":
        if "path" not in m:
            raise SchemaError("measure/path: required for file")
        p = Path(m["path"])
        if not p.is_absolute():
            p = Path(cfg.get("_base_dir", ".")) / p
        try:
            mu = loads(group, p.read_text(), m.get("exact"))
        except OSError as exc:
            raise InputError(f"cannot read measure file {p}: {exc}") from exc
    elif src == "family":
        for k in ("family", "param", "mass_eps"):
            if k not in m:
                raise SchemaError(f"measure/{k}: required for family")
        fam = TailFamily(m["family"], m["param"])
        mu, _ = realize(group, fam, m["mass_eps"], exact=m.get("exact", False))
    else:
        raise SchemaError("measure/source: pathological measures come from the pathological table")
    if m.get("normalized"):
        mu = mu.normalized()
    return mu
