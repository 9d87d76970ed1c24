"""Experiment configuration: strict YAML parsing and validation."""
from __future__ import annotations

import itertools
import re
from dataclasses import asdict, dataclass, field, fields

import yaml

from .families import FAMILIES, MatrixFamilySpec

MODES = ("solve", "verify-bounds", "autonomize", "sweep")
METHODS = ("block_forward", "generic")

FAMILY_AXES = {"N", "K", "gap", "eigenvalue", "target_kappa_V", "s"}
AXES = {
    "solve": {"epsilon"},
    "verify-bounds": {"k", "m", "p"} | FAMILY_AXES,
    "autonomize": {"Ns", "epsilon"},
    "sweep": {"N", "k", "m", "p"},
}
DEFAULT_AXES = {
    "solve": {},
    "verify-bounds": {"k": [6], "m": [2]},
    "autonomize": {"Ns": [8, 16, 32]},
    "sweep": {},
}
TOLERANCE_KEYS = {"residual_rtol": 1e-10, "oracle_tol": 1e-9}

_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}{where}")
        self.field, self.line, self.column = field, line, column


@dataclass
class ExperimentConfig:
    mode: str
    problem: str | None = None
    family: str | None = None
    epsilon: float = 0.1
    method: str = "block_forward"
    sweep: dict = field(default_factory=dict)
    seed: int | None = None
    out: str | None = None
    jobs: int = 1
    T: float | None = None
    tolerances: dict = field(default_factory=dict)
    n_samples: int = 256

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------------
    def validate(self):
        # PyYAML reads 1e-6 (no dot) as a string
        for name in ("epsilon", "T"):
            val = getattr(self, name)
            if isinstance(val, str):
                try:
                    setattr(self, name, float(val))
                except ValueError:
                    raise ConfigError(f"not a number: {val!r}", name) from None
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}", "mode")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}", "method")
        if not isinstance(self.epsilon, (int, float)) or not 0 < self.epsilon < 0.5:
            raise ConfigError(f"must lie in (0, 1/2), got {self.epsilon!r}", "epsilon")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"must be a positive integer, got {self.jobs!r}", "jobs")
        if not isinstance(self.n_samples, int) or self.n_samples < 2:
            raise ConfigError(f"must be an integer >= 2, got {self.n_samples!r}", "n_samples")
        if self.T is not None and not (isinstance(self.T, (int, float)) and self.T > 0):
            raise ConfigError(f"must be positive, got {self.T!r}", "T")
        if self.seed is not None:
            if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
                raise ConfigError(f"must be a 64-bit unsigned integer, got {self.seed!r}", "seed")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("must be a mapping", "tolerances")
        for key, val in self.tolerances.items():
            if key not in TOLERANCE_KEYS:
                raise ConfigError(f"unknown tolerance {key!r}", f"tolerances.{key}")
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"must be a positive number, got {val!r}", f"tolerances.{key}")
        if not isinstance(self.sweep, dict):
            raise ConfigError("must be a mapping of axis name to values", "sweep")
        self.sweep = {k: expand_axis(v, f"sweep.{k}") for k, v in self.sweep.items()}
        for key in self.sweep:
            if key not in AXES[self.mode]:
                raise ConfigError(f"axis {key!r} is not valid in {self.mode} mode "
                                  f"(allowed: {', '.join(sorted(AXES[self.mode]))})", f"sweep.{key}")
        if self.mode == "sweep":
            if not self.sweep:
                raise ConfigError("sweep mode needs at least one axis", "sweep")
            for key, vals in self.sweep.items():
                if not vals:
                    raise ConfigError("axis is empty", f"sweep.{key}")
        if self.mode in ("solve", "autonomize") and not self.problem:
            raise ConfigError(f"{self.mode} mode needs a problem", "problem")
        if self.mode == "verify-bounds" and not self.family:
            raise ConfigError("verify-bounds mode needs a matrix family", "family")
        if self.family is not None:
            try:
                spec = MatrixFamilySpec.parse(self.family)
            except ValueError as exc:
                raise ConfigError(str(exc), "family") from None
            if self.uses_randomness and self.seed is None and "seed" not in spec.params:
                raise ConfigError(f"family {spec.family} is random, so a seed is required", "seed")
        elif self.mode == "sweep" and self.seed is None:
            raise ConfigError("sweep mode draws random problems, so a seed is required", "seed")

    @property
    def family_spec(self) -> MatrixFamilySpec:
        return MatrixFamilySpec.parse(self.family or "random_sparse")

    @property
    def uses_randomness(self) -> bool:
        return self.mode == "sweep" or (self.family is not None and self.family_spec.randomized)

    @property
    def tol(self) -> dict:
        return {**TOLERANCE_KEYS, **self.tolerances}

    def axes(self) -> dict:
        return {**DEFAULT_AXES[self.mode], **self.sweep}

    def cells(self) -> list[dict]:
        """Cartesian product of the sweep axes, first axis slowest."""
        ax = self.axes()
        names = list(ax)
        return [dict(zip(names, combo)) for combo in itertools.product(*(ax[n] for n in names))]

    def to_dict(self) -> dict:
        return asdict(self)


def expand_axis(value, name="axis") -> list:
    """Accept a list, a scalar, or an inclusive integer range ``"a..b"``."""
    if isinstance(value, str):
        m = _RANGE.match(value)
        if not m:
            raise ConfigError(f"cannot read {value!r} as a list or a range a..b", name)
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise ConfigError(f"empty range {value!r}", name)
        return list(range(lo, hi + 1))
    if isinstance(value, (list, tuple)):
        return list(value)
    if value is None:
        return []
    return [value]


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line, col = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"malformed YAML: {problem}", line=line, column=col) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", str(key))
    if "mode" not in data:
        raise ConfigError("missing required key", "mode")
    return ExperimentConfig(**data)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


__all__ = ["ConfigError", "ExperimentConfig", "FAMILIES", "MODES", "expand_axis",
           "load_config", "parse_config"]
