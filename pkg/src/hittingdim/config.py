"""Flat ``key = value`` experiment configuration with overrides and manifests."""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .correlation import DEFAULT_LAGS, DecayModel, Observable
from .errors import ConfigError
from .experiments import refuse_rational
from .hitting import RadiusLadder
from .systems import SystemSpec, parse_system

EXPERIMENTS = ("hit", "dim", "sbc", "corr", "verify")
OUT_ENV = "HITTINGDIM_OUT"
SECTION = "experiment"

_DEFAULTS = {
    "common": {"system": "doubling", "x0": "0.3", "seed": "2024", "jobs": "0", "plots": "1",
               "tail_window": "8"},
    "hit": {"ladder": "geometric:r0=1,lam=0.5,k=4..18", "trials": "100", "n_max": "10000000",
            "mode": "hitting"},
    "dim": {"ladder": "geometric:r0=1,lam=0.5,k=4..10", "M": "1000000", "method": "auto",
            "tail_window": "7"},
    "sbc": {"ladder": "power:beta=0.5,k=5..100000", "trials": "200", "n_max": "100000",
            "checkpoints": "auto", "decay": "exponential:rate=0.6931471805599453,C=1",
            "alpha": "0.2", "epsilon": "0.01", "shape": "ball", "M": "1000000"},
    "corr": {"phi": "bump:x0=0.3,r_in=0.05,r_out=0.2", "psi": "bump:x0=0.6,r_in=0.02,r_out=0.3",
             "M": "1000000", "lags": "default", "method": "auto"},
    "verify": {},
}


def _int(text: str) -> int:
    v = float(text)
    if not math.isfinite(v) or v != int(v):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(v)


def parse_point(text: str):
    parts = text.replace(",", " ").split()
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"bad point {text!r}") from None


def parse_observable(text: str) -> Observable:
    """``bump:x0=0.3,r_in=0.05,r_out=0.2`` (torus centres as ``x0=0.3 0.4``) or ``constant:v=1``."""
    kind, _, rest = text.strip().partition(":")
    opts = dict(item.split("=", 1) for item in rest.split(",") if item)
    try:
        if kind == "constant":
            return Observable.constant(float(opts.get("v", 1.0)))
        return Observable.bump(parse_point(opts["x0"]), float(opts["r_in"]), float(opts["r_out"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad observable {text!r}: {exc}") from None


def parse_decay(text: str) -> DecayModel:
    kind, _, rest = text.strip().partition(":")
    try:
        opts = {k: float(v) for k, v in (item.split("=", 1) for item in rest.split(",") if item)}
        C = opts.get("C", 1.0)
        if kind == "exponential":
            return DecayModel.exponential(opts["rate"], C)
        if kind == "polynomial":
            return DecayModel.polynomial(opts["p"], C)
        if kind in ("constant", "none"):
            return DecayModel.constant(C)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad decay model {text!r}: {exc}") from None
    raise ConfigError(f"unknown decay model {text!r}")


def parse_lags(text: str) -> np.ndarray:
    if text == "default":
        return DEFAULT_LAGS
    if ".." in text:
        lo, hi = text.split("..")
        return np.arange(_int(lo), _int(hi) + 1)
    return np.array(sorted({_int(t) for t in text.replace(",", " ").split()}))


@dataclass
class ExperimentConfig:
    """Fully resolved configuration; ``raw`` keeps the textual values for the manifest."""

    experiment: str
    raw: dict
    system: SystemSpec | None = None
    x0: object = None
    ladder: RadiusLadder | None = None
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def manifest(self) -> str:
        lines = [f"[{SECTION}]", f"experiment = {self.experiment}"]
        lines += [f"{k} = {v}" for k, v in sorted(self.raw.items())]
        return "\n".join(lines) + "\n"


def read_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        text = fh.read()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = f"[{SECTION}]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    out = {}
    for sec in parser.sections():
        out.update(parser[sec])
    return out


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def resolve(experiment: str, file_values: dict, overrides: dict) -> ExperimentConfig:
    """Merge defaults, file values and overrides (later wins) and validate everything."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    raw = dict(_DEFAULTS["common"])
    raw.update(_DEFAULTS[experiment])
    raw.update(file_values)
    raw.update(overrides)
    raw.pop("experiment", None)
    known = set(_DEFAULTS["common"]) | set(_DEFAULTS[experiment]) | {"out"}
    unknown = sorted(set(raw) - known)
    if unknown and experiment != "verify":
        raise ConfigError(f"unknown keys for {experiment}: {', '.join(unknown)}")
    if "out" not in raw:
        raw["out"] = os.path.join(os.environ.get(OUT_ENV, "hittingdim-out"), experiment)
    cfg = ExperimentConfig(experiment, raw)
    if experiment == "verify":
        return cfg
    try:
        _validate(cfg)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    raw = cfg.raw
    sys = parse_system(raw["system"])
    refuse_rational(sys)
    cfg.system = sys
    v = cfg.values
    v["seed"] = _int(raw["seed"])
    v["jobs"] = _int(raw["jobs"]) or (os.cpu_count() or 1)
    v["plots"] = raw["plots"].lower() in ("1", "true", "yes")
    v["tail_window"] = _int(raw["tail_window"])
    v["out"] = raw["out"]
    if raw["x0"] == "random":
        cfg.x0 = tuple(np.random.default_rng(v["seed"]).random(sys.dim))
    else:
        cfg.x0 = parse_point(raw["x0"])
    if len(cfg.x0) != sys.dim:
        raise ConfigError(f"x0 has {len(cfg.x0)} coordinates, {sys.space} needs {sys.dim}")
    if "ladder" in raw:
        cfg.ladder = RadiusLadder.parse(raw["ladder"])
        if not 1 <= v["tail_window"] <= len(cfg.ladder):
            raise ConfigError("tail_window must be between 1 and the ladder length")
    for key in ("trials", "n_max", "M"):
        if key in raw:
            v[key] = _int(raw[key])
            if v[key] < 1:
                raise ConfigError(f"{key} must be >= 1")
    if "method" in raw:
        v["method"] = None if raw["method"] == "auto" else raw["method"]
    exp = cfg.experiment
    if exp == "hit":
        if raw["mode"] not in ("hitting", "recurrence"):
            raise ConfigError("mode must be hitting or recurrence")
        v["mode"] = raw["mode"]
    elif exp == "sbc":
        if v["trials"] < 30:
            raise ConfigError("sbc ensembles need trials >= 30")
        cps = raw["checkpoints"]
        v["checkpoints"] = None if cps == "auto" else [_int(c) for c in cps.replace(",", " ").split()]
        if v["checkpoints"] and max(v["checkpoints"]) > v["n_max"]:
            raise ConfigError("checkpoints must not exceed n_max")
        if raw["shape"] not in ("ball", "dyadic"):
            raise ConfigError("shape must be ball or dyadic")
        if raw["shape"] == "dyadic" and sys.family != "doubling":
            raise ConfigError("dyadic targets are defined for the doubling map only")
        v["shape"] = raw["shape"]
        v["decay"] = parse_decay(raw["decay"])
        v["alpha"] = float(raw["alpha"])
        v["epsilon"] = float(raw["epsilon"])
    elif exp == "corr":
        v["phi"] = parse_observable(raw["phi"])
        v["psi"] = parse_observable(raw["psi"])
        v["lags"] = parse_lags(raw["lags"])
        for obs in (v["phi"], v["psi"]):
            if obs.kind == "bump" and len(obs.x0) != sys.dim:
                raise ConfigError("observable centre does not match the phase space")
