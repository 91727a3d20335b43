"""Experiment configuration files (TOML) and their validation."""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from .errors import ConfigError
from .fields import parse_components, T, X, Y

KINDS = ("hull-check", "hull-like", "certificate", "lambda-sweep", "bifurcation",
         "ma-solve", "ma-verify", "transport", "remark1")

# field keys each kind needs; "domain" and "probe" name whole tables
REQUIRED = {
    "hull-check": ("domain", "f"),
    "hull-like": ("domain", "f"),
    "certificate": ("domain", "f", "probe"),
    "lambda-sweep": ("domain", "f", "g"),
    "bifurcation": ("domain", "f", "g", "probe"),
    "ma-solve": ("domain", "h", "boundary"),
    "ma-verify": ("domain", "h", "boundary"),
    "transport": ("domain", "beta", "F"),
    "remark1": (),
}

TABLES = ("domain", "fields", "probe", "tolerances", "lambda", "params", "output")
PROBE_KINDS = ("linear", "norm", "max_linear")


@dataclass
class ExperimentConfig:
    kind: str
    name: str = "experiment"
    domain: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    lam: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "name": self.name}
        for key, table in (("domain", self.domain), ("fields", self.fields), ("probe", self.probe),
                           ("tolerances", self.tolerances), ("lambda", self.lam),
                           ("params", self.params), ("output", self.output)):
            if table:
                d[key] = copy.deepcopy(table)
        return d

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def scaled(self, k: int) -> "ExperimentConfig":
        """Copy with nx and ny multiplied by ``k``."""
        out = copy.deepcopy(self)
        if k != 1 and out.domain:
            out.domain["nx"] = int(out.domain["nx"]) * k
            out.domain["ny"] = int(out.domain["ny"]) * k
        return out

    def tol(self, key: str, default=None):
        return self.tolerances.get(key, default)


def _locate(text: str, key: str):
    """Line and column (1-based) of the first ``key = ...`` assignment, if any."""
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for n, line in enumerate(text.splitlines(), 1):
        m = pat.match(line)
        if m:
            return n, len(line) - len(line.lstrip()) + 1
    return None, None


def _fail(text: str, key: str, message: str):
    line, col = _locate(text, key)
    raise ConfigError(message, line, col)


def _check_domain(d: dict, text: str, kind: str) -> None:
    for key in ("box", "nx", "ny"):
        if key not in d:
            _fail(text, "domain", f"domain.{key} is required")
    box = d["box"]
    if not (isinstance(box, list) and len(box) == 4 and all(isinstance(v, (int, float)) for v in box)):
        _fail(text, "box", "domain.box must be [x0, x1, y0, y1]")
    if not (box[0] < box[1] and box[2] < box[3]):
        _fail(text, "box", "domain.box must have x0 < x1 and y0 < y1")
    for key in ("nx", "ny"):
        if not isinstance(d[key], int) or d[key] < 3:
            _fail(text, key, f"domain.{key} must be an integer >= 3")
    if kind.startswith("ma-") and d.get("mask") not in (None, "all"):
        _fail(text, "mask", "the Monge-Ampere solver needs a rectangular domain (no mask)")


def _check_probe(p: dict, text: str) -> None:
    kind = p.get("kind")
    if kind not in PROBE_KINDS:
        _fail(text, "kind", f"probe.kind must be one of {', '.join(PROBE_KINDS)}")
    need = {"linear": "direction", "norm": "center", "max_linear": "directions"}[kind]
    if need not in p:
        _fail(text, "probe", f"probe.{need} is required for a {kind} probe")


def validate(cfg: ExperimentConfig, text: str = "") -> ExperimentConfig:
    if cfg.kind not in KINDS:
        _fail(text, "kind", f"unknown kind {cfg.kind!r}; expected one of {', '.join(KINDS)}")
    for key in REQUIRED[cfg.kind]:
        if key == "domain":
            if not cfg.domain:
                _fail(text, "kind", f"kind {cfg.kind} needs a [domain] table")
        elif key == "probe":
            if not cfg.probe:
                _fail(text, "kind", f"kind {cfg.kind} needs a [probe] table")
        elif key not in cfg.fields:
            _fail(text, "kind", f"kind {cfg.kind} needs fields.{key}")
    if cfg.domain:
        _check_domain(cfg.domain, text, cfg.kind)
    if cfg.probe:
        _check_probe(cfg.probe, text)
    for key, expr in cfg.fields.items():
        if not isinstance(expr, str):
            _fail(text, key, f"fields.{key} must be a string expression")
        try:
            parse_components(expr, (T,) if key == "F" else (X, Y))
        except ValueError as exc:
            _fail(text, key, f"fields.{key}: {exc}")
    for key, v in cfg.tolerances.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            _fail(text, key, f"tolerance {key} must be a positive number")
    lam = cfg.lam
    if cfg.kind in ("lambda-sweep", "bifurcation"):
        if "values" not in lam and not {"min", "max", "steps"} <= set(lam):
            _fail(text, "kind", f"kind {cfg.kind} needs lambda.values or lambda.min/max/steps")
    if "values" in lam and not all(isinstance(v, (int, float)) for v in lam["values"]):
        _fail(text, "values", "lambda.values must be numbers")
    return cfg


def from_dict(data: dict, text: str = "", name: Optional[str] = None) -> ExperimentConfig:
    extra = set(data) - {"kind", "name", *TABLES}
    if extra:
        key = sorted(extra)[0]
        _fail(text, key, f"unknown top-level key {key!r}")
    if "kind" not in data:
        raise ConfigError("missing top-level key 'kind'", 1, 1)
    for t in TABLES:
        if t in data and not isinstance(data[t], dict):
            _fail(text, t, f"{t} must be a table")
    cfg = ExperimentConfig(
        kind=data["kind"],
        name=data.get("name", name or data["kind"]),
        domain=dict(data.get("domain", {})),
        fields=dict(data.get("fields", {})),
        probe=dict(data.get("probe", {})),
        tolerances=dict(data.get("tolerances", {})),
        lam=dict(data.get("lambda", {})),
        params=dict(data.get("params", {})),
        output=dict(data.get("output", {})),
    )
    return validate(cfg, text)


def parse_config(text: str, name: Optional[str] = None) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}", getattr(exc, "lineno", None),
                          getattr(exc, "colno", None)) from exc
    return from_dict(data, text, name)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), name=path.stem)
