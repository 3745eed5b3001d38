"""Run configuration: a single JSON document with defaults and strict keys."""

from __future__ import annotations

import copy
import hashlib
import json
import math

from .potential import ModelParams, ParameterError, Potential
from .scattering import GridSpec


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


DEFAULTS = {
    "params": {"N": 10000, "kappa": 0.0, "ell": 0.25, "alpha": 0.3, "beta": 0.1, "mu": 0.3},
    "potential": {"kind": "soft_sphere", "V0": 2.0, "R": 1.0},
    "grid": {"n_inner": 4096, "n_outer": 4096, "exterior": "analytic"},
    "pmax": 40 * math.pi,
    "Mmax": 128,
    "ell_list": [0.1, 0.25, 0.4],
    "convolution": "full",
    "constant_term": True,
    "max_levels": 200,
    "threshold_scale": 1.0,
    "fock": {
        "modes_shells": 1,
        "ncap": 4,
        "Nparam": 10,
        "ncap_sweep": [2, 3, 4],
        "pair_ncaps": [10, 20, 40],
        "table_ncaps": [2, 4, 6, 8],
        "levels": 6,
    },
    "tolerances": {
        "ccr": 1e-13,
        "bogoliubov": 1e-6,
        "psd_relative": 1e-10,
        "bound_ceiling": 1000.0,
        "neumann_residual": 1e-8,
        "acceleration_ceiling": 0.05,
    },
    "output_dir": "out",
}

# keys whose values are free-form and not checked against DEFAULTS recursively
_OPAQUE = {("potential",)}


def _merge(base, update, path=()):
    for key, val in update.items():
        where = path + (key,)
        if key not in base:
            raise ConfigError(f"unknown config key {'.'.join(where)!r}")
        if isinstance(base[key], dict) and where not in _OPAQUE:
            if not isinstance(val, dict):
                raise ConfigError(f"config key {'.'.join(where)!r} must be an object")
            _merge(base[key], val, where)
        else:
            base[key] = val


class RunConfig:
    """Validated configuration with typed accessors.

    ``RunConfig.from_dict(c.to_dict())`` reproduces ``c``.
    """

    def __init__(self, data=None):
        doc = copy.deepcopy(DEFAULTS)
        if data:
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
            _merge(doc, data)
        self._doc = doc
        self._validate()

    @classmethod
    def from_dict(cls, d):
        return cls(d)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls(data)

    def to_dict(self):
        return copy.deepcopy(self._doc)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.canonical() == other.canonical()

    def canonical(self):
        return json.dumps(self._doc, sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_overrides(self, assignments):
        """Apply ``key.path=value`` strings; values are parsed as JSON when possible."""
        doc = self.to_dict()
        for item in assignments or ():
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, raw = item.split("=", 1)
            try:
                val = json.loads(raw)
            except json.JSONDecodeError:
                val = raw
            parts = key.strip().split(".")
            upd = val
            for part in reversed(parts):
                upd = {part: upd}
            _merge(doc, upd)
        return RunConfig(doc)

    def _validate(self):
        try:
            self.params = ModelParams(**self._doc["params"])
            self.potential = Potential.from_dict(self._doc["potential"])
            self.grid = GridSpec(**self._doc["grid"])
            self.params.check_support(self.potential)
        except (ParameterError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        d = self._doc
        if not (isinstance(d["pmax"], (int, float)) and d["pmax"] >= 4 * math.pi):
            raise ConfigError("pmax must be a number >= 4 pi")
        if not (isinstance(d["Mmax"], int) and d["Mmax"] >= 16 and d["Mmax"] % 4 == 0):
            raise ConfigError("Mmax must be an integer >= 16 divisible by 4")
        if d["convolution"] not in ("full", "high"):
            raise ConfigError("convolution must be 'full' or 'high'")
        if not all(isinstance(x, (int, float)) and 0 < x < 0.5 for x in d["ell_list"]):
            raise ConfigError("ell_list entries must lie in (0, 1/2)")
        if not (isinstance(d["threshold_scale"], (int, float)) and d["threshold_scale"] > 0):
            raise ConfigError("threshold_scale must be positive")
        if not (isinstance(d["max_levels"], int) and d["max_levels"] >= 1):
            raise ConfigError("max_levels must be a positive integer")
        f = d["fock"]
        for key in ("modes_shells", "ncap", "Nparam", "levels"):
            if not (isinstance(f[key], int) and f[key] >= 1):
                raise ConfigError(f"fock.{key} must be a positive integer")
        if f["Nparam"] < f["ncap"]:
            raise ConfigError("fock.Nparam must be at least fock.ncap")
        for key in ("ncap_sweep", "pair_ncaps", "table_ncaps"):
            if not (f[key] and all(isinstance(x, int) and x >= 1 for x in f[key])):
                raise ConfigError(f"fock.{key} must be a nonempty list of positive integers")
        for key, val in d["tolerances"].items():
            if not (isinstance(val, (int, float)) and val > 0):
                raise ConfigError(f"tolerances.{key} must be positive")
        if not isinstance(d["output_dir"], str):
            raise ConfigError("output_dir must be a string")

    def __getitem__(self, key):
        return self._doc[key]
