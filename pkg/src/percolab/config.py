"""TOML experiment configs checked against a JSON schema and turned into dataclasses."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field

import jsonschema

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}
_rect = {"type": "array", "items": _num, "minItems": 4, "maxItems": 4}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_polyline = {"type": "array", "items": _point, "minItems": 2}
_pos_list = {"type": "array", "items": _pos, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


PARAM_SCHEMAS = {
    "gluing": _obj({"q0": _rect, "curve": _polyline, "s": _pos_list, "meshes": _pos_list,
                    "eps": _pos, "n_outer": _count, "n_inner": _count},
                   ("q0", "curve", "s", "meshes", "eps", "n_outer", "n_inner")),
    "coupling-sum": _obj({"q0": _rect, "curve": _polyline, "s": _pos, "r": _pos, "n": _count,
                          "n_pi4": _count}, ("q0", "curve", "s", "n")),
    "finite-predictor": _obj({"q0": _rect, "curve": _polyline,
                              "family_sizes": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                               "minItems": 1},
                              "n_train": _count, "n_test": _count},
                             ("q0", "curve", "family_sizes", "n_train", "n_test")),
    "appendix-b": _obj({"R": _count, "r": _count, "delta": _pos, "n": _count}, ("R", "r", "delta", "n")),
    "arm-probability": _obj({"pattern": {"enum": ["one-arm", "closed-one-arm", "four-arm"]},
                             "center": _point, "r": _pos, "R": _pos_list, "n": _count,
                             "annuli": {"type": "array", "items": {**_point, "items": _pos}, "minItems": 1},
                             "fit": {"type": "boolean"}},
                            ("pattern", "n")),
    "perturbation-stability": _obj({"rect": _rect, "deltas": _pos_list, "n": _count},
                                   ("rect", "deltas", "n")),
    "boundary-three-arm": _obj({"rect": _rect, "deltas": _pos_list, "n": _count},
                               ("rect", "deltas", "n")),
}

SCHEMA = _obj({
    "experiment": {"enum": sorted(PARAM_SCHEMAS)},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 63 - 1},
    "threads": _count,
    "out_dir": {"type": "string"},
    "lattice": _obj({"kind": {"enum": ["triangular-site", "square-bond"]}, "mesh": _pos}, ("kind",)),
    "model": _obj({"p": {"type": "number", "minimum": 0, "maximum": 1}}),
    "params": {"type": "object"},
}, ("experiment", "seed", "lattice", "params"))


@dataclass(frozen=True)
class LatticeConfig:
    kind: str
    mesh: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    lattice: LatticeConfig
    params: dict = field(default_factory=dict)
    p: float = 0.5
    threads: int = 1
    out_dir: str = "out"


def _where(err):
    path = ".".join(str(x) for x in err.absolute_path)
    if err.validator == "additionalProperties":
        return f"{path + ': ' if path else ''}{err.message}"
    if err.validator == "required":
        return f"{path + ': ' if path else ''}{err.message}"
    return f"{path or '<root>'}: {err.message}"


def validate(data):
    errs = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errs:
        raise ConfigError(_where(errs[0]))
    sub = PARAM_SCHEMAS[data["experiment"]]
    params = data["params"]
    errs = sorted(jsonschema.Draft202012Validator(sub).iter_errors(data["params"]),
                  key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        path = ".".join(["params", *map(str, e.absolute_path)])
        raise ConfigError(f"{path}: {e.message}")
    if data["experiment"] == "arm-probability":
        if "annuli" in params and ("r" in params or "R" in params):
            raise ConfigError("params.annuli: give either annuli or r and R, not both")
        if "annuli" not in params and not ("r" in params and "R" in params):
            raise ConfigError("params: arm-probability needs annuli or both r and R")


def from_dict(data) -> ExperimentConfig:
    validate(data)
    lat = data["lattice"]
    return ExperimentConfig(
        experiment=data["experiment"], seed=int(data["seed"]),
        lattice=LatticeConfig(lat["kind"], float(lat.get("mesh", 1.0))),
        params=dict(data["params"]), p=float(data.get("model", {}).get("p", 0.5)),
        threads=int(data.get("threads", 1)), out_dir=data.get("out_dir", "out"))


def load(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data)
