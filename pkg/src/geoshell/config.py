"""Run configuration: defaults, a flat ``key = value`` file format and flag overrides.

Example file::

    # material
    lambda = 1.0
    mu = 1.0
    delta = 0.01
    backend = subdivisionFem
    tolerance = 1e-4
    K = 8

Blank lines and lines starting with ``#`` are ignored.  Unknown keys are errors.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace

from .energy import BACKENDS, MaterialParams, make_backend
from .errors import GeoShellError
from .solver import SolverConfig
from .subdivision import BOUNDARY_MODES, SCHEMES

__all__ = ["RunConfig", "ConfigError", "load_config"]


class ConfigError(GeoShellError):
    pass


@dataclass(frozen=True)
class RunConfig:
    backend: str = "subdivisionFem"
    lam: float = 1.0
    mu: float = 1.0
    delta: float = 0.01
    tolerance: float = 1e-4
    max_iterations: int = 100
    rigid_handling: str = "constraints"
    K: int | None = None
    kappa: float = 0.5
    levels: int = 3
    scheme: str = "binary4"
    boundary: str = "clampedEndpoints"
    samples: int = 16
    t: float = 1.0
    out: str = "out"
    seed: int = 0

    def validate(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {sorted(BACKENDS)}, got {self.backend!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.boundary not in BOUNDARY_MODES:
            raise ConfigError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        if self.K is not None and self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        try:
            self.material()
            self.solver()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def material(self):
        return MaterialParams(self.lam, self.mu, self.delta)

    def solver(self):
        return SolverConfig(tolerance=self.tolerance, max_iterations=self.max_iterations,
                            rigid_handling=self.rigid_handling)

    def make_backend(self):
        return make_backend(self.backend, params=self.material())

    def steps(self, default):
        return self.K if self.K is not None else default

    def to_dict(self):
        return asdict(self)


# File keys that differ from the attribute names.
_ALIASES = {"lambda": "lam", "max_iters": "max_iterations", "max-iters": "max_iterations",
            "tol": "tolerance", "epsilon": "tolerance"}


def _coerce(name, raw):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text):
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, raw in cp["run"].items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = _coerce(name, raw.strip())
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then non-``None`` entries of ``overrides``."""
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return replace(RunConfig(), **values).validate()
