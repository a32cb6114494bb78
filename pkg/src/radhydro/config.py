"""INI experiment configuration for the command-line harness.

One file may hold a section per experiment kind::

    [spectral-sweep]
    xi_min = 1e-3
    xi_max = 1e3
    points = 200
    spacing = log

    [linear-decay]
    profile_rho = gaussian 1.0 1.0
    profile_shear = gaussian 1.0 1.0
    t_max = 1e4
    fit_t1 = 100
    fit_t2 = 1e4

    [nonlinear-run]
    n = 32
    dt = 0.05
    t_end = 50

Missing keys take their defaults.  All problems in a section are collected
and reported together.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .decay import COMPRESSIBLE, PROFILE_KINDS, DecayExperimentConfig, Profile, RadialQuadrature
from .fourier import CutoffPair
from .sim import SimConfig

KINDS = ("spectral-sweep", "linear-decay", "nonlinear-run", "report")


class ConfigError(ValueError):
    """Raised with the complete list of validation problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def config_hash(kind: str, payload: dict) -> str:
    blob = json.dumps({"kind": kind, "payload": payload}, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SweepConfig:
    xi_min: float = 1e-3
    xi_max: float = 1e3
    points: int = 200
    spacing: str = "log"

    def validation_errors(self) -> list[str]:
        errs = []
        if self.xi_min < 0:
            errs.append("xi_min must be non-negative")
        if self.xi_min > self.xi_max:
            errs.append(f"xi_min ({self.xi_min}) exceeds xi_max ({self.xi_max})")
        if self.points < 1:
            errs.append("points must be at least 1")
        if self.spacing not in ("log", "linear"):
            errs.append(f"spacing must be 'log' or 'linear', got {self.spacing!r}")
        elif self.spacing == "log" and self.xi_min == 0 and self.xi_max > 0:
            errs.append("log spacing needs xi_min > 0")
        if self.xi_min == self.xi_max and self.points != 1:
            errs.append("a degenerate range needs points = 1")
        return errs

    def samples(self) -> np.ndarray:
        if self.points == 1 or self.xi_min == self.xi_max:
            return np.array([float(self.xi_min)])
        if self.spacing == "log":
            return np.logspace(np.log10(self.xi_min), np.log10(self.xi_max), self.points)
        return np.linspace(self.xi_min, self.xi_max, self.points)


@dataclass
class DecaySettings:
    """Flat, file-friendly view of a ``DecayExperimentConfig``."""

    profiles: dict = field(default_factory=lambda: {
        c: "gaussian 1.0 1.0" for c in COMPRESSIBLE + ("shear",)})
    t_min: float = 0.1
    t_max: float = 1e4
    t_points: int = 121
    fit_t1: float = 1e2
    fit_t2: float = 1e4
    r0: float = 0.2
    R0: float = 2.0
    cutoff_shape: str = "smooth"
    r_max: float = 40.0
    panel_order: int = 64
    refine: int = 8

    def _parsed_profiles(self):
        out, errs = {}, []
        for name, text in sorted(self.profiles.items()):
            if name not in COMPRESSIBLE + ("shear",):
                errs.append(f"unknown profile component {name!r}")
                continue
            parts = text.split()
            if not parts or parts[0] not in PROFILE_KINDS:
                errs.append(f"profile_{name}: kind must be one of {PROFILE_KINDS}")
                continue
            try:
                nums = [float(p) for p in parts[1:]]
            except ValueError:
                errs.append(f"profile_{name}: numeric parameters expected, got {text!r}")
                continue
            kind = parts[0]
            if kind == "zero":
                prof = Profile("zero")
            elif kind == "bump":
                if len(nums) != 3:
                    errs.append(f"profile_{name}: bump needs 'amplitude lo hi'")
                    continue
                prof = Profile("bump", nums[0], lo=nums[1], hi=nums[2])
            else:
                if len(nums) != 2:
                    errs.append(f"profile_{name}: {kind} needs 'amplitude width'")
                    continue
                prof = Profile(kind, nums[0], nums[1])
            errs.extend(prof.validation_errors(f"profile_{name}"))
            out[name] = prof
        return out, errs

    def validation_errors(self) -> list[str]:
        _, errs = self._parsed_profiles()
        if self.t_points < 2:
            errs.append("time grid is empty: t_points must be at least 2")
        if not 0 < self.t_min < self.t_max:
            errs.append("need 0 < t_min < t_max")
        if not 0 <= self.fit_t1 < self.fit_t2:
            errs.append("need 0 <= fit_t1 < fit_t2")
        errs.extend(_cutoff_errors(self.r0, self.R0, self.cutoff_shape))
        if not self.r_max > 4:
            errs.append("r_max must exceed 4")
        if self.panel_order < 2:
            errs.append("panel_order must be at least 2")
        if self.refine < 0:
            errs.append("refine must be non-negative")
        return errs

    @property
    def l1_type(self) -> bool:
        profs, _ = self._parsed_profiles()
        return any(abs(p.value_at_origin()) > 0 for p in profs.values())

    def build(self) -> DecayExperimentConfig:
        errs = self.validation_errors()
        if errs:
            raise ConfigError(errs)
        profs, _ = self._parsed_profiles()
        t = np.concatenate([[0.0], np.logspace(np.log10(self.t_min), np.log10(self.t_max),
                                               self.t_points)])
        return DecayExperimentConfig(
            profiles=profs, t_grid=t, orders=(0, 1, 2),
            fit_window=(self.fit_t1, self.fit_t2),
            cutoffs=CutoffPair(self.r0, self.R0, self.cutoff_shape),
            quadrature=RadialQuadrature.composite((0.0, 0.25, 4.0, self.r_max),
                                                  self.panel_order, self.refine),
            require_l1_type=False)


def _cutoff_errors(r0, R0, shape) -> list[str]:
    try:
        CutoffPair(r0, R0, shape)
    except ValueError as exc:
        return str(exc).split("; ")
    return []


def _coerce(value: str, typ, key: str, errs: list):
    try:
        if typ is bool:
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
        return value.strip()
    except ValueError:
        errs.append(f"{key}: cannot read {value!r} as {typ.__name__}")
        return None


def _fill(cls, section, errs, prefix, extra=()):
    """Build ``cls`` from a config section, recording problems in ``errs``."""
    kwargs = {}
    types = {f.name: {"int": int, "float": float, "str": str, "bool": bool}.get(f.type, str)
             for f in fields(cls)}
    for key, raw in section.items():
        if key in extra:
            continue
        if key not in types or key == "profiles":
            errs.append(f"[{prefix}] unknown key {key!r}")
            continue
        val = _coerce(raw, types[key], f"[{prefix}] {key}", errs)
        if val is not None:
            kwargs[key] = val
    return kwargs


@dataclass
class ExperimentConfig:
    kind: str
    payload: object
    hash: str


def _sweep(section, errs):
    kw = _fill(SweepConfig, section, errs, "spectral-sweep")
    cfg = SweepConfig(**kw)
    errs.extend(f"[spectral-sweep] {e}" for e in cfg.validation_errors())
    return cfg


def _decay(section, errs):
    prof_keys = [k for k in section if k.startswith("profile_")]
    kw = _fill(DecaySettings, section, errs, "linear-decay", extra=prof_keys)
    settings = DecaySettings(**kw)
    for k in prof_keys:
        settings.profiles[k[len("profile_"):]] = section[k]
    errs.extend(f"[linear-decay] {e}" for e in settings.validation_errors())
    return settings


def _nonlinear(section, errs, seed):
    kw = _fill(SimConfig, section, errs, "nonlinear-run")
    if seed is not None:
        kw["seed"] = seed
    try:
        cfg = SimConfig(**kw)
    except TypeError as exc:
        errs.append(f"[nonlinear-run] {exc}")
        return None
    errs.extend(f"[nonlinear-run] {e}" for e in cfg.validation_errors())
    return cfg


def load_experiment(kind: str, path=None, seed: int | None = None) -> ExperimentConfig:
    """Read the section for ``kind`` (defaults when ``path`` is None or the
    section is absent) and validate it exhaustively."""
    if kind not in KINDS:
        raise ConfigError([f"unknown experiment kind {kind!r}"])
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    errs: list[str] = []
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    section = dict(parser[kind]) if parser.has_section(kind) else {}
    if kind == "spectral-sweep":
        payload = _sweep(section, errs)
    elif kind == "linear-decay":
        payload = _decay(section, errs)
    elif kind == "nonlinear-run":
        payload = _nonlinear(section, errs, seed)
    else:
        payload = None
        if section:
            errs.append("[report] takes no keys")
    if errs:
        raise ConfigError(errs)
    body = asdict(payload) if payload is not None else {}
    return ExperimentConfig(kind, payload, config_hash(kind, body))


__all__ = [
    "KINDS",
    "ConfigError",
    "SweepConfig",
    "DecaySettings",
    "ExperimentConfig",
    "load_experiment",
    "config_hash",
]
