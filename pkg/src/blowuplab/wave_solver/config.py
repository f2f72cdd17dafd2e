"""Flat key=value run configurations."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from ..errors import ConfigurationError, ParameterError
from ..grid import ModelParams


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigurationError(f"line {lineno}: empty key")
        out[k.replace("-", "_")] = v
    return out


def _coerce(value, typ):
    if isinstance(value, str):
        if typ is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ConfigurationError(f"not a boolean: {value!r}")
        if typ is int:
            return int(float(value))
        if typ is float:
            return float(value)
    return typ(value)


@dataclass
class SolveConfig:
    p: float = 3.0
    preset: str = "exact-soliton"
    x_min: float = -1.0
    x_max: float = 1.0
    nx: int = 401
    cfl: float = 0.9
    u_max: float = 1e8
    mask_ratio: float = 8.0
    t_max: float = 10.0
    levels: int = 3
    # preset parameters
    d: float = 0.3
    T: float = 1.0
    x0: float = 0.0
    A: float = 3.0
    sigma: float = 0.5
    c: float = 1.0
    # refinement around x0 (0 disables)
    zoom_nodes: int = 0
    zoom_s_max: float = 14.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, _coerce(getattr(self, f.name), {"float": float, "int": int, "str": str}.get(f.type, str)
                                          if isinstance(f.type, str) else f.type))
        try:
            ModelParams(self.p)
        except ParameterError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.nx < 5 or not self.x_max > self.x_min:
            raise ConfigurationError("need nx >= 5 and x_max > x_min")
        if self.levels < 1:
            raise ConfigurationError("levels must be >= 1")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SolveConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - names)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**mapping)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "SolveConfig":
        m = parse_kv(text)
        m.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(m)

    def preset_kwargs(self) -> dict:
        return {"d": self.d, "T": self.T, "x0": self.x0, "A": self.A, "sigma": self.sigma, "c": self.c}

    def to_text(self) -> str:
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n"
                       for k, v in asdict(self).items())

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]
