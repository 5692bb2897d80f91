"""Declarative run configuration read from YAML (``schema: 1``).

Every section is a flat mapping. Unknown keys are errors naming the dotted
path of the offending key; required keys are ``grid.d``, ``grid.N``,
``kernel.s``, ``time.dt`` and ``time.t_end``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

# section -> {key: default}; REQUIRED marks keys without defaults
REQUIRED = object()

SCHEMA: dict = {
    "grid": {"d": REQUIRED, "N": REQUIRED, "L": 6.283185307179586},
    "kernel": {"family": "fractional", "s": REQUIRED, "lambda": 2.0, "modulation": None,
               "table": None, "pv_scheme": "corrected"},
    "drift": {"mode": "none", "preset": None, "amplitude": 1.0, "wavenumber": 1, "omega": 0.0,
              "vector": None, "project": False, "tol": 1e-10, "inversion": "auto", "max_iter": 500},
    "forcing": {"kind": "none", "amplitude": 0.0, "width": 0.5, "center": None, "wavevector": None,
                "q": None},
    "initial": {"kind": "zero", "amplitude": 1.0, "width": 0.5, "center": None, "modes": None,
                "value": 0.0, "slope": 2.0, "kmax": 8, "smoothing": 0.0, "file": None},
    "time": {"dt": REQUIRED, "t_end": REQUIRED, "scheme": "cn", "picard": 4, "adaptive": False,
             "max_halvings": 6, "energy_tol": 0.02},
    "diagnostics": {"snapshot_every": 1, "holder": False, "energy_law": True},
    "output": {"dir": "run", "snapshots": True},
}
TOP_LEVEL = {"schema", "seed", "name"} | set(SCHEMA)

KERNEL_FAMILIES = ("fractional", "modulated", "tabulated")
DRIFT_MODES = ("none", "prescribed", "sqg")
SCHEMES = ("cn", "euler", "etd")
INVERSIONS = ("auto", "spectral-fractional", "iterative-general")
FORCING_KINDS = ("none", "bump", "cosine")
INITIAL_KINDS = ("zero", "constant", "bump", "cosine", "random", "critical", "file")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with every default filled in."""

    data: Mapping[str, Any]

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def name(self) -> str:
        return str(self.data["name"])

    @property
    def d(self) -> int:
        return int(self.data["grid"]["d"])

    @property
    def s(self) -> float:
        return float(self.data["kernel"]["s"])

    def to_dict(self) -> dict:
        return copy.deepcopy(dict(self.data))

    def replace(self, dotted: str, value) -> "RunConfig":
        """Copy with one dotted key changed (re-validated)."""
        raw = self.to_dict()
        sec, key = dotted.split(".", 1)
        raw[sec][key] = value
        return validate_config(raw)


def _number(value, key, kind=float, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}", key)
    if kind is int and int(value) != value:
        raise ConfigError(f"{key} must be an integer, got {value!r}", key)
    value = kind(value)
    if positive and not value > 0:
        raise ConfigError(f"{key} must be positive, got {value!r}", key)
    return value


def _choice(value, key, options):
    if value not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}, got {value!r}", key)
    return value


def validate_config(raw: Mapping[str, Any]) -> RunConfig:
    """Check keys and values, fill defaults, return a :class:`RunConfig`."""
    if not isinstance(raw, Mapping):
        raise ConfigError("configuration must be a mapping", None)
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError(f"unknown key {key!r}", str(key))
    if "schema" not in raw:
        raise ConfigError("missing schema version", "schema")
    if raw["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {raw['schema']!r}", "schema")
    out: dict = {"schema": SCHEMA_VERSION, "seed": _number(raw.get("seed", 0), "seed", int),
                 "name": str(raw.get("name", "run"))}
    for sec, fields in SCHEMA.items():
        given = raw.get(sec, {}) or {}
        if not isinstance(given, Mapping):
            raise ConfigError(f"section {sec} must be a mapping", sec)
        for key in given:
            if key not in fields:
                raise ConfigError(f"unknown key {sec}.{key}", f"{sec}.{key}")
        block = {}
        for key, default in fields.items():
            if key in given:
                block[key] = copy.deepcopy(given[key])
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {sec}.{key}", f"{sec}.{key}")
            else:
                block[key] = copy.deepcopy(default)
        out[sec] = block

    g = out["grid"]
    g["d"] = _number(g["d"], "grid.d", int)
    if g["d"] not in (1, 2):
        raise ConfigError("grid.d must be 1 or 2", "grid.d")
    g["N"] = _number(g["N"], "grid.N", int)
    if g["N"] < 8 or g["N"] & (g["N"] - 1):
        raise ConfigError("grid.N must be a power of two >= 8", "grid.N")
    g["L"] = _number(g["L"], "grid.L", float, positive=True)

    k = out["kernel"]
    _choice(k["family"], "kernel.family", KERNEL_FAMILIES)
    k["s"] = _number(k["s"], "kernel.s")
    if not 0 < k["s"] <= 0.5:
        raise ConfigError("kernel.s must lie in (0, 1/2]", "kernel.s")
    k["lambda"] = _number(k["lambda"], "kernel.lambda")
    if not k["lambda"] > 1:
        raise ConfigError("kernel.lambda must exceed 1", "kernel.lambda")
    if k["family"] == "modulated" and not isinstance(k["modulation"], Mapping):
        raise ConfigError("modulated kernels need kernel.modulation", "kernel.modulation")
    if k["family"] == "tabulated" and not isinstance(k["table"], Mapping):
        raise ConfigError("tabulated kernels need kernel.table with r and k", "kernel.table")
    _choice(k["pv_scheme"], "kernel.pv_scheme", ("corrected", "symmetric-exclusion"))

    dr = out["drift"]
    _choice(dr["mode"], "drift.mode", DRIFT_MODES)
    _choice(dr["inversion"], "drift.inversion", INVERSIONS)
    dr["tol"] = _number(dr["tol"], "drift.tol", positive=True)
    if dr["mode"] == "sqg" and g["d"] != 2:
        raise ConfigError("sqg drift needs grid.d = 2", "drift.mode")
    if dr["mode"] == "prescribed" and dr["preset"] is None and dr["vector"] is None:
        raise ConfigError("prescribed drift needs drift.preset or drift.vector", "drift.preset")

    _choice(out["forcing"]["kind"], "forcing.kind", FORCING_KINDS)
    _choice(out["initial"]["kind"], "initial.kind", INITIAL_KINDS)

    t = out["time"]
    t["dt"] = _number(t["dt"], "time.dt", positive=True)
    t["t_end"] = _number(t["t_end"], "time.t_end", positive=True)
    _choice(t["scheme"], "time.scheme", SCHEMES)
    t["picard"] = _number(t["picard"], "time.picard", int, positive=True)

    dg = out["diagnostics"]
    dg["snapshot_every"] = _number(dg["snapshot_every"], "diagnostics.snapshot_every", int, positive=True)
    if dg["holder"]:
        q = out["forcing"]["q"]
        bound = (g["d"] + 1) / (2 * k["s"])
        if q is None or not _number(q, "forcing.q") > bound:
            raise ConfigError(f"Hoelder diagnostics need forcing.q > (d+1)/(2s) = {bound:g}", "forcing.q")
    return RunConfig(out)


def load_config(path) -> RunConfig:
    """Read and validate a YAML configuration file."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", None) from exc
    return validate_config(raw)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
