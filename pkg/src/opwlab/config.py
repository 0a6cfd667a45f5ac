"""Flat ``key = value`` experiment configs with dotted sections.

Example::

    theorem = t1
    grid.center = 0
    grid.half_width = 16
    grid.n = 4096
    target.kind = sinusoid
    target.beta = 1.5
    target.window = 2        # zero outside [-2, 2]
    box.alpha = 1
    box.gamma = 1
    budget.epsilon_rel = 0.1

Blank lines and ``#`` comments are ignored. Unknown keys, duplicates and
malformed values are rejected with the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, InvalidArgument
from .pipelines import DEFAULT_LAMBDAS, BudgetSplit
from .signal import (
    Gaussian,
    Indicator,
    Sinc,
    Sinusoid,
    load_signal,
    l2_norm,
    make_grid,
    restrict,
    sample,
)
from .synth import SynthesisConfig

THEOREMS = ("t1", "t2", "obstruction", "synth-only")
TARGET_KINDS = ("indicator", "sinc", "sinusoid", "gaussian", "table")


def _float(s):
    return float(s)


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _floats(s):
    vals = tuple(float(t) for t in s.split(",") if t.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _choice(options):
    def conv(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return conv


# key -> (attribute, converter)
_KEYS = {
    "theorem": ("theorem", _choice(THEOREMS)),
    "seed": ("seed", int),
    "grid.center": ("grid_center", _float),
    "grid.half_width": ("grid_half_width", _float),
    "grid.n": ("grid_n", _pos_int),
    "target.kind": ("target_kind", _choice(TARGET_KINDS)),
    "target.B": ("target_B", _float),
    "target.beta": ("target_beta", _float),
    "target.phase": ("target_phase", _float),
    "target.width": ("target_width", _float),
    "target.window": ("target_window", _float),
    "target.path": ("target_path", str),
    "box.alpha": ("alpha", _float),
    "box.beta": ("beta", _float),
    "box.gamma": ("gamma", _float),
    "budget.epsilon": ("epsilon", _float),
    "budget.epsilon_rel": ("epsilon_rel", _float),
    "budget.c": ("c", _float),
    "synth.B": ("synth_B", _float),
    "synth.extent_factor": ("extent_factor", _float),
    "synth.lambdas": ("lambdas", _floats),
    "synth.oversample": ("oversample", _pos_int),
    "pipeline.B": ("fixed_B", _float),
    "pipeline.delta": ("fixed_delta", _float),
    "obstruction.N": ("N", _float),
    "obstruction.trials": ("trials", _pos_int),
    "output.dir": ("output_dir", str),
}


@dataclass(frozen=True)
class ExperimentConfig:
    theorem: str = "t1"
    seed: int = 0
    grid_center: float = 0.0
    grid_half_width: float = 16.0
    grid_n: int = 4096
    target_kind: str = "sinusoid"
    target_B: float = 1.0
    target_beta: float = 1.5
    target_phase: float = 0.0
    target_width: float = 1.0
    target_window: float | None = None
    target_path: str | None = None
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    epsilon: float | None = None
    epsilon_rel: float | None = None
    c: float = 0.5
    synth_B: float | None = None
    extent_factor: float = 3.0
    lambdas: tuple = DEFAULT_LAMBDAS
    oversample: int = 8
    fixed_B: float | None = None
    fixed_delta: float | None = None
    N: float = 2.0
    trials: int = 32
    output_dir: str = "out"
    base_dir: Path = field(default=Path("."), compare=False)

    def with_values(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    # -- builders ---------------------------------------------------------

    def grid(self):
        return make_grid(self.grid_center, self.grid_half_width, self.grid_n)

    def target(self):
        g = self.grid()
        k = self.target_kind
        if k == "table":
            if self.target_path is None:
                raise InvalidArgument("target.kind = table needs target.path")
            y = load_signal(self.base_dir / self.target_path)
            if not y.grid.matches(g):
                raise InvalidArgument("table grid does not match the configured grid")
        else:
            kind = {
                "indicator": lambda: Indicator(self.target_B),
                "sinc": lambda: Sinc(self.target_B),
                "sinusoid": lambda: Sinusoid(self.target_beta, self.target_phase),
                "gaussian": lambda: Gaussian(self.target_width),
            }[k]()
            y = sample(kind, g)
        if self.target_window is not None:
            y = restrict(y, self.target_window)
        return y

    def budget(self, y) -> BudgetSplit:
        if self.epsilon is not None:
            eps = self.epsilon
        elif self.epsilon_rel is not None:
            eps = self.epsilon_rel * l2_norm(y)
        else:
            raise InvalidArgument("set budget.epsilon or budget.epsilon_rel")
        return BudgetSplit(eps, self.c)

    def synthesis(self, alpha, B=1.0) -> SynthesisConfig:
        return SynthesisConfig(
            alpha=alpha,
            B=B,
            extent_factor=self.extent_factor,
            lam=self.lambdas[0],
            collocation_oversample=self.oversample,
        )

    @property
    def out_path(self) -> Path:
        # relative to the working directory, like any other CLI output path
        return Path(self.output_dir)

    def as_dict(self) -> dict:
        inv = {attr: key for key, (attr, _) in _KEYS.items()}
        out = {}
        for attr, key in inv.items():
            v = getattr(self, attr)
            out[key] = list(v) if isinstance(v, tuple) else v
        return out


def parse_config(text: str, base_dir=".") -> ExperimentConfig:
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        if not val:
            raise ConfigError(f"missing value for {key!r}", lineno)
        attr, conv = _KEYS[key]
        try:
            values[attr] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
        seen[key] = lineno
    cfg = ExperimentConfig(base_dir=Path(base_dir), **values)
    _validate(cfg, seen)
    return cfg


def _validate(cfg: ExperimentConfig, seen: dict):
    def fail(msg, key):
        raise ConfigError(f"{key}: {msg}", seen.get(key))

    if cfg.grid_half_width <= 0:
        fail("must be positive", "grid.half_width")
    if cfg.grid_n < 2:
        fail("must be >= 2", "grid.n")
    for key, attr in [("box.alpha", "alpha"), ("box.beta", "beta"), ("box.gamma", "gamma")]:
        if getattr(cfg, attr) <= 0:
            fail("must be positive", key)
    if not 0 < cfg.c < 1:
        fail("must lie in (0, 1)", "budget.c")
    if cfg.epsilon is not None and cfg.epsilon_rel is not None:
        fail("give only one of budget.epsilon and budget.epsilon_rel", "budget.epsilon_rel")
    for key, attr in [("budget.epsilon", "epsilon"), ("budget.epsilon_rel", "epsilon_rel")]:
        v = getattr(cfg, attr)
        if v is not None and v <= 0:
            fail("must be positive", key)
    if cfg.theorem in ("t1", "t2") and cfg.epsilon is None and cfg.epsilon_rel is None:
        raise ConfigError("budget.epsilon or budget.epsilon_rel is required")
    if cfg.extent_factor < 1:
        fail("must be >= 1", "synth.extent_factor")
    if any(l < 0 for l in cfg.lambdas):
        fail("weights must be non-negative", "synth.lambdas")
    if cfg.oversample < 2:
        fail("must be >= 2", "synth.oversample")
    if cfg.target_kind == "table" and cfg.target_path is None:
        fail("required for table targets", "target.kind")
    if cfg.theorem == "obstruction" and cfg.N < 1 + cfg.alpha:
        fail("need N >= 1 + alpha", "obstruction.N")
    for key, attr in [("pipeline.B", "fixed_B"), ("pipeline.delta", "fixed_delta"),
                      ("synth.B", "synth_B"), ("target.window", "target_window")]:
        v = getattr(cfg, attr)
        if v is not None and v <= 0:
            fail("must be positive", key)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)
