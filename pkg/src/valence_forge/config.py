"""Flat ``key = value`` run configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from .construction import PARAM_FIELDS, Params, validate_params


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    params: Params = field(default_factory=Params)
    probe_grid_size: int = 64
    mc_samples: int = 200
    seed: int = 0
    r_min: float = 5.6
    r_max: float = 7.4
    r_steps: int = 19
    output: str = "out"

    def __post_init__(self):
        for name in ("probe_grid_size", "mc_samples", "r_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if not self.r_min < self.r_max:
            raise ConfigError(f"need r_min < r_max, got {self.r_min} >= {self.r_max}")

    def as_dict(self) -> dict:
        out = asdict(self.params)
        out.update({f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"})
        return out

    def replace(self, **kw) -> "RunConfig":
        cur = self.as_dict()
        cur.update(kw)
        return _build(cur)


RUN_FIELDS = {f.name: f.type for f in fields(RunConfig) if f.name != "params"}
_CASTS = {
    "epsilon": float, "delta": float, "growth_c": float, "k0": int, "k_max": int,
    "quad_tol": float, "winding_tol": float, "alpha_rule": str,
    "probe_grid_size": int, "mc_samples": int, "seed": int,
    "r_min": float, "r_max": float, "r_steps": int, "output": str,
}
KNOWN_KEYS = tuple(PARAM_FIELDS) + tuple(RUN_FIELDS)


def _build(values: dict) -> RunConfig:
    p = {k: values[k] for k in PARAM_FIELDS if k in values}
    params = validate_params(Params(**p))
    rest = {k: values[k] for k in RUN_FIELDS if k in values}
    return RunConfig(params=params, **rest)


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; omitted keys take defaults."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _CASTS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not val:
            raise ConfigError(f"missing value for {key!r}", lineno)
        cast = _CASTS[key]
        try:
            values[key] = cast(val)
        except ValueError:
            raise ConfigError(f"{key} = {val!r} is not a valid {cast.__name__}", lineno) from None
    return _build(values)


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
