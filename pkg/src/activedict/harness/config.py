"""Experiment configuration: profiles, flat ``key = value`` files, overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..encoders import canonical_kind, default_penalty
from ..errors import ParameterError
from ..selection import POLICIES
from ..synthgen import glyph_pool_size


class ConfigError(ParameterError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    # dictionary
    dictionary: str = "gabor"
    patch_side: int = 8
    K: int = 24
    # generation
    k: int = 5
    lam: float = 1.0
    snr_db: float = 6.0
    N: int = 5000
    # selection
    policy: str = "uniform"
    n: int = 250
    select_fraction: float | None = None
    # encoder
    encoder: str = "l1"
    penalty: float | None = None
    encoder_k: int | None = None
    tol: float = 1e-6
    # learner
    eta0: float = 2.0
    decay: float = 0.02
    floor: float = 0.01
    gamma: float = 0.2
    inner_iters: int = 10
    epochs: int = 200
    fresh_data: bool = True
    # run
    seed: int = 0
    replicates: int = 5
    checkpoint_interval: int = 0
    hist_bins: int = 32
    record_wall_time: bool = False
    out: str = "runs/experiment"

    @property
    def P(self) -> int:
        return self.patch_side * self.patch_side

    @property
    def n_selected(self) -> int:
        if self.select_fraction is not None:
            return max(1, int(round(self.select_fraction * self.N)))
        return self.n

    @property
    def l1_penalty(self) -> float:
        return self.penalty if self.penalty is not None else default_penalty(self.lam, self.P, self.k)

    @property
    def sparsity(self) -> int:
        return self.encoder_k if self.encoder_k is not None else self.k

    def validate(self) -> "ExperimentConfig":
        if self.dictionary not in ("gabor", "glyph"):
            raise ConfigError(f"dictionary must be 'gabor' or 'glyph', got {self.dictionary!r}")
        if self.dictionary == "glyph":
            if self.patch_side != 8:
                raise ConfigError("glyph dictionaries are 8x8; set patch_side = 8")
            if self.K > glyph_pool_size():
                raise ConfigError(f"glyph pool holds at most {glyph_pool_size()} atoms")
        if self.patch_side < 4 or self.K < 1:
            raise ConfigError("need patch_side >= 4 and K >= 1")
        if not 1 <= self.k <= self.K:
            raise ConfigError(f"need 1 <= k <= K, got k={self.k}, K={self.K}")
        if not 1 <= self.sparsity <= self.K:
            raise ConfigError(f"encoder sparsity must be in [1, K], got {self.sparsity}")
        if self.lam <= 0:
            raise ConfigError("lam must be positive")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.select_fraction is not None and not 0 < self.select_fraction <= 1:
            raise ConfigError(f"select_fraction must be in (0, 1], got {self.select_fraction}")
        if not 1 <= self.n_selected <= self.N:
            raise ConfigError(f"need 1 <= n <= N, got n={self.n_selected}, N={self.N}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {sorted(POLICIES)}")
        try:
            canonical_kind(self.encoder)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        if self.penalty is not None and self.penalty <= 0:
            raise ConfigError("penalty must be positive")
        if self.epochs < 1 or self.replicates < 1:
            raise ConfigError("epochs and replicates must be >= 1")
        if self.inner_iters < 0 or self.checkpoint_interval < 0:
            raise ConfigError("inner_iters and checkpoint_interval must be >= 0")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must be in [0, 1]")
        if self.eta0 <= 0 or self.floor <= 0 or self.decay < 0:
            raise ConfigError("need eta0 > 0, floor > 0, decay >= 0")
        if self.hist_bins < 2:
            raise ConfigError("hist_bins must be >= 2")
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


PROFILES = {
    "desk": {},
    "paper": {"K": 100, "N": 50000, "n": 500, "epochs": 1000},
}

_OPTIONAL = {"select_fraction", "penalty", "encoder_k"}


def _coerce(name: str, raw: str):
    spec = {f.name: f for f in fields(ExperimentConfig)}
    if name not in spec:
        raise ConfigError(f"unknown config key {name!r}")
    text = raw.strip()
    if name in _OPTIONAL and text.lower() in ("", "none", "auto"):
        return None
    default = spec[name].default
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int) or name == "encoder_k":
            return int(text)
        if isinstance(default, float) or name in ("select_fraction", "penalty"):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = _coerce(key, value)
    return values


def load_config(path=None, profile: str = "desk", overrides: dict | None = None) -> ExperimentConfig:
    """Profile defaults, then the config file, then explicit overrides."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    values = dict(PROFILES[profile])
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key, value in (overrides or {}).items():
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        lines.append(f"{key} = {'auto' if value is None else value}")
    return "\n".join(lines) + "\n"


SWEEP_AXES = ("snr_db", "k", "select_fraction", "K")

SWEEP_DEFAULTS = {
    "snr_db": [0.0, 3.0, 6.0, 9.0, 12.0],
    "k": [2, 3, 5, 8, 12],
    "select_fraction": [0.005, 0.01, 0.02, 0.05, 0.1],
    "K": [25, 50, 100, 200],
}


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    base: ExperimentConfig
    policies: tuple[str, ...] = field(default_factory=lambda: tuple(POLICIES))

    def validate(self) -> "SweepSpec":
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if not self.policies:
            raise ConfigError("sweep needs at least one policy")
        for value in self.values:
            for policy in self.policies:
                self.cell_config(value, policy, self.base.out)
        return self

    def cell_config(self, value, policy: str, out) -> ExperimentConfig:
        changes = {"policy": policy, "out": str(out)}
        if self.axis == "select_fraction":
            changes["select_fraction"] = float(value)
        elif self.axis == "snr_db":
            changes["snr_db"] = float(value)
        else:
            changes[self.axis] = int(value)
        return self.base.replace(**changes).validate()
