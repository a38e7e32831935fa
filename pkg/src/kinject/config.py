"""Flat key = value run configuration with CLI overrides.

One dataclass holds every knob of a run: decoding weights, pool sizes,
selection size, and artifact paths.  File keys and flag names match the
field names, except the fidelity weight whose external key is
``lambda`` (a Python keyword, stored as ``lam``).  The fully resolved
mapping is echoed into every trace.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .injection import DecodeConfig


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_str(raw: str) -> str | None:
    stripped = raw.strip()
    return stripped if stripped and stripped.lower() != "none" else None


_PARSERS = {
    "alpha": float,
    "lam": float,
    "gamma": float,
    "iterations": int,
    "step_size": float,
    "tau": float,
    "max_len": int,
    "deterministic_final": _parse_bool,
    "n_nonparametric": int,
    "per_phrase": int,
    "select_size": int,
    "beta_init": float,
    "nucleus_p": float,
    "max_phrases": int,
    "max_history_turns": int,
    "seed": int,
    "workers": int,
    "model_path": _parse_str,
    "scorer_path": _parse_str,
    "head_path": _parse_str,
    "vocab_path": _parse_str,
    "index_path": _parse_str,
    "stopwords_path": _parse_str,
    "blocklist_path": _parse_str,
    "generator_url": _parse_str,
}

# External spelling for the fidelity weight.
_KEY_ALIASES = {"lambda": "lam"}


@dataclass
class PipelineConfig:
    alpha: float = 1.0
    lam: float = 1.0
    gamma: float = 0.45
    iterations: int = 5
    step_size: float = 0.02
    tau: float = 1.0
    max_len: int = 100
    deterministic_final: bool = True
    n_nonparametric: int = 100
    per_phrase: int = 5
    select_size: int = 5
    beta_init: float = 1.0
    nucleus_p: float = 0.95
    max_phrases: int = 5
    max_history_turns: int = 0
    seed: int = 0
    workers: int = 1
    model_path: str | None = None
    scorer_path: str | None = None
    head_path: str | None = None
    vocab_path: str | None = None
    index_path: str | None = None
    stopwords_path: str | None = None
    blocklist_path: str | None = None
    generator_url: str | None = None

    def validate(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be strictly inside (0, 1), got {self.gamma}")
        if not 0.0 < self.nucleus_p <= 1.0:
            raise ConfigError(f"nucleus_p must be in (0, 1], got {self.nucleus_p}")
        if not 0.0 < self.beta_init <= 1.0:
            raise ConfigError(f"beta_init must be in (0, 1], got {self.beta_init}")
        for name in ("n_nonparametric", "per_phrase", "select_size",
                     "max_phrases", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        for name in ("step_size", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")

    def decode(self) -> DecodeConfig:
        return DecodeConfig(
            alpha=self.alpha, lam=self.lam, gamma=self.gamma,
            iterations=self.iterations, step_size=self.step_size,
            tau=self.tau, max_len=self.max_len,
            deterministic_final=self.deterministic_final,
        )

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            key = "lambda" if f.name == "lam" else f.name
            out[key] = getattr(self, f.name)
        return dict(sorted(out.items()))


def set_key(cfg: PipelineConfig, key: str, raw_value: str) -> None:
    """Parse and assign one external ``key = value`` pair."""
    name = _KEY_ALIASES.get(key, key)
    parser = _PARSERS.get(name)
    if parser is None:
        raise ConfigError(f"unknown config key: {key}")
    try:
        setattr(cfg, name, parser(raw_value))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw_value!r} ({exc})") from exc


def load_config(path: str | None = None,
                overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Defaults, then the config file, then explicit overrides; validated."""
    cfg = PipelineConfig()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            set_key(cfg, key.strip(), value.strip())
    for key, value in (overrides or {}).items():
        set_key(cfg, key, value)
    cfg.validate()
    return cfg
