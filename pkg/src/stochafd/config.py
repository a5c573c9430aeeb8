"""Experiment configuration: flat ``key=value`` text with dotted section keys.

Example::

    # Brownian bridge, 126 nodes
    methods = kl, spoafd
    family = poisson
    m = 126
    n_values = 25, 50, 100, 125
    seed = 7
    paths = 1
    search.radial_points = 40
    search.rho = 1.0
    snb.max_sweeps = 50
    output_dir = out

Blank lines and ``#`` comments are ignored.  Unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

from .dictionary import Family
from .errors import ConfigError
from .search import SearchConfig

METHODS = ("kl", "spoafd", "safd", "snb", "poafd", "afd")
COVARIANCES = ("closed_form", "empirical")

_SEARCH_KEYS = {"radial_points": int, "angular_points": int, "refine_levels": int,
                "rho": float, "r_max": float, "mult_escalation": "bool", "screen": int}


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple = ("kl",)
    family: str = "poisson"
    m: int = 126
    n_values: tuple = (25, 50, 100)
    seed: int = 0
    paths: int = 1
    covariance: str = "closed_form"
    search: SearchConfig = field(default_factory=SearchConfig)
    snb_max_sweeps: int = 50
    snb_tol: float = 1e-10
    output_dir: str = "out"

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r} (key 'methods'); choose from {', '.join(METHODS)}")
        if not self.methods:
            raise ConfigError("key 'methods' is empty")
        try:
            Family(self.family)
        except ValueError:
            raise ConfigError(f"unknown family {self.family!r} (key 'family')") from None
        if self.covariance not in COVARIANCES:
            raise ConfigError(f"unknown covariance {self.covariance!r} (key 'covariance')")
        if self.m < 3:
            raise ConfigError("key 'm' must be at least 3")
        if not self.n_values:
            raise ConfigError("key 'n_values' is empty")
        for n in self.n_values:
            if n < 1 or n > self.m:
                raise ConfigError(f"n = {n} outside 1..m (key 'n_values')")
        if self.paths < 1:
            raise ConfigError("key 'paths' must be positive")
        if self.covariance == "empirical" and self.paths < 2:
            raise ConfigError("an empirical covariance needs paths >= 2")
        if self.snb_max_sweeps < 1 or not self.snb_tol >= 0:
            raise ConfigError("snb.max_sweeps must be >= 1 and snb.tol >= 0")

    def snapshot(self) -> dict:
        """Flat key -> value mapping, suitable for archives."""
        out = {"methods": ",".join(self.methods), "family": self.family, "m": self.m,
               "n_values": ",".join(str(n) for n in self.n_values), "seed": self.seed,
               "paths": self.paths, "covariance": self.covariance,
               "snb.max_sweeps": self.snb_max_sweeps, "snb.tol": self.snb_tol}
        for k, v in asdict(self.search).items():
            out[f"search.{k}"] = v
        return out


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())


def _str_list(text):
    return tuple(x.strip().lower() for x in text.replace(";", ",").split(",") if x.strip())


_TOP_KEYS = {"methods": _str_list, "family": lambda s: s.strip().lower(), "m": int,
             "n_values": _int_list, "seed": int, "paths": int,
             "covariance": lambda s: s.strip().lower(), "output_dir": str.strip}


def apply_settings(cfg: ExperimentConfig, pairs: Iterable[tuple]) -> ExperimentConfig:
    """Return ``cfg`` with ``(key, text)`` settings applied in order."""
    top, search = {}, {}
    for key, text in pairs:
        key = key.strip()
        try:
            if key in _TOP_KEYS:
                top[key] = _TOP_KEYS[key](text)
            elif key.startswith("search.") and key[7:] in _SEARCH_KEYS:
                conv = _SEARCH_KEYS[key[7:]]
                search[key[7:]] = _to_bool(text) if conv == "bool" else conv(text)
            elif key == "snb.max_sweeps":
                top["snb_max_sweeps"] = int(text)
            elif key == "snb.tol":
                top["snb_tol"] = float(text)
            else:
                raise ConfigError(f"unknown configuration key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    try:
        new_search = cfg.search.with_(**search) if search else cfg.search
    except ValueError as exc:
        raise ConfigError(f"search settings: {exc}") from None
    return replace(cfg, search=new_search, **top)


def parse_config_text(text: str, base: ExperimentConfig = None) -> ExperimentConfig:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return apply_settings(base or ExperimentConfig(), pairs)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise
    return parse_config_text(text)
