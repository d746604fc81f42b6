"""Run configuration: a versioned YAML document validated by JSON Schema.

Layout (``schema_version: 1``)::

    schema_version: 1
    defaults:            # optional, applied to every job
      C: null            # tube constant, null = calibrated
      cull_tol: 1.0e-12
      nodes: 8           # H^s Gauss-Hermite nodes
      padding: 12.0
      t_samples: null    # null = canonical region default
      x_samples: null
      freq_samples: 16
      cap: 1048576
      seed: 0
      out: out
      hs_s: [0, 1]       # Sobolev indices reported by ``build``
    jobs:
      - name: lp-p1
        kind: scan       # or build
        required: true
        family: {family: LambdaP, n: 1, R: 256}
        scan: {R_list: [256, 512, 1024], p: 1, q: 2, alpha: 0, s: 0, region: paper}
    checks:
      fixtures: [oracle-lambda, plancherel]   # omit for all, [] for none

Errors carry the dotted field path and the source line.
"""

from dataclasses import dataclass
import math
import re

import jsonschema
import yaml

from .exceptions import ConfigurationError

SCHEMA_VERSION = 1

_POS_NUM = {"type": "number", "exclusiveMinimum": 0}

_FAMILY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": {"enum": ["LambdaP", "GammaP", "GP", "LambdaQ", "GammaQ", "GQ"]},
        "n": {"type": "integer", "minimum": 1, "maximum": 3},
        "R": {"type": "number", "minimum": 4},
        "C": {"type": ["number", "null"], "minimum": 1},
        "m": {"type": ["integer", "null"], "minimum": 1},
        "direction": {"type": ["array", "null"], "items": {"type": "number"}, "minItems": 1, "maxItems": 3},
        "coordinate_floor": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

_EXPONENT = {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]}

_REGION = {
    "anyOf": [
        {"enum": ["paper", "paper-p-region", "paper-q-region"]},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["time_interval", "space_box"],
            "properties": {
                "time_interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "space_box": {
                    "type": "array",
                    "minItems": 1,
                    "maxItems": 3,
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                },
                "t_samples": {"type": "integer", "minimum": 1},
                "x_samples": {"type": "integer", "minimum": 1},
                "t_rule": {"enum": ["midpoint", "gauss-legendre"]},
                "x_rule": {"enum": ["midpoint", "gauss-legendre"]},
            },
        },
    ]
}

_SCAN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["R_list"],
    "properties": {
        "R_list": {"type": "array", "items": {"type": "number", "minimum": 4}, "minItems": 3},
        "p": _EXPONENT,
        "q": _EXPONENT,
        "alpha": {"type": "number", "minimum": 0},
        "s": {"type": "number", "minimum": 0},
        "region": _REGION,
    },
}

_DEFAULTS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "C": {"type": ["number", "null"], "minimum": 1},
        "cull_tol": {"type": ["number", "null"], "exclusiveMinimum": 0, "maximum": 1e-6},
        "nodes": {"type": "integer", "minimum": 1, "maximum": 256},
        "padding": _POS_NUM,
        "t_samples": {"type": ["integer", "null"], "minimum": 1},
        "x_samples": {"type": ["integer", "null"], "minimum": 1},
        "freq_samples": {"type": "integer", "minimum": 1, "maximum": 256},
        "cap": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string", "minLength": 1},
        "hs_s": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "defaults": _DEFAULTS,
        "jobs": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "kind", "family"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "kind": {"enum": ["build", "scan"]},
                    "required": {"type": "boolean"},
                    "family": _FAMILY,
                    "scan": _SCAN,
                    "write_terms": {"type": "boolean"},
                },
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fixtures": {"type": "array", "items": {"type": "string"}},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "C": None,
    "cull_tol": 1e-12,
    "nodes": 8,
    "padding": 12.0,
    "t_samples": None,
    "x_samples": None,
    "freq_samples": 16,
    "cap": 2 ** 20,
    "seed": 0,
    "out": "out",
    "hs_s": [0, 1],
}


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-12`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9_]+)(?:[eE][-+]?[0-9]+)?$|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."),
)
# the float pattern above also matches plain integers; keep those as int
_Loader.yaml_implicit_resolvers = {
    ch: sorted(res, key=lambda r: r[0] != "tag:yaml.org,2002:int")
    for ch, res in _Loader.yaml_implicit_resolvers.items()
}


def _line_of(root, path):
    """Source line (1-based) of the node at ``path`` in a composed YAML tree."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = k if v is None else v
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
        line = node.start_mark.line + 1
    return line


def _dotted(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass(frozen=True)
class Job:
    name: str
    kind: str
    family: dict
    scan: dict = None
    required: bool = False
    write_terms: bool = False


@dataclass(frozen=True)
class RunConfig:
    defaults: dict
    jobs: tuple
    fixtures: tuple = None
    check_seed: int = 0

    def job(self, name):
        for j in self.jobs:
            if j.name == name:
                return j
        raise ConfigurationError(f"no job named {name!r}; have {[j.name for j in self.jobs]}")


def parse_config(text, source="<config>"):
    """Parse and validate a config document; returns a RunConfig."""
    try:
        root = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{source}: YAML syntax error: {exc}") from None
    if data is None:
        raise ConfigurationError(f"{source}: empty config")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for err in errors:
            path = list(err.absolute_path)
            lines.append(f"{source}:{_line_of(root, path)}: field {_dotted(path)}: {err.message}")
        raise ConfigurationError("invalid config\n" + "\n".join(lines))

    defaults = {**DEFAULTS, **data.get("defaults", {})}
    jobs = []
    names = set()
    for i, raw in enumerate(data.get("jobs", [])):
        if raw["name"] in names:
            line = _line_of(root, ["jobs", i, "name"])
            raise ConfigurationError(f"{source}:{line}: field jobs[{i}].name: duplicate job name {raw['name']!r}")
        names.add(raw["name"])
        if raw["kind"] == "scan" and "scan" not in raw:
            line = _line_of(root, ["jobs", i])
            raise ConfigurationError(f"{source}:{line}: field jobs[{i}].scan: scan jobs need a scan block")
        jobs.append(Job(
            raw["name"], raw["kind"], dict(raw["family"]), raw.get("scan"),
            raw.get("required", False), raw.get("write_terms", False),
        ))
    checks = data.get("checks", {})
    fixtures = checks.get("fixtures")
    return RunConfig(defaults, tuple(jobs), None if fixtures is None else tuple(fixtures), checks.get("seed", 0))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def exponent(v):
    return math.inf if v == "inf" else float(v)
