"""Run configuration, environment overrides and output manifests.

Configuration lives in a single TOML file; any scalar can be overridden
by an environment variable named VM_<SECTION>_<KEY> (uppercased). A run
copies its resolved configuration into the output directory and writes a
manifest hashing every input byte consumed.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

TOOL_VERSION = "0.1.0"
ENV_PREFIX = "VM_"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # input file names, resolved against inputs_dir when relative
    organizations: str = "organizations.csv"
    funding_rounds: str = "funding_rounds.csv"
    exits: str = "exits.csv"
    index: str = "index.csv"
    tbill: str = "tbill.csv"
    inputs_dir: str = "."
    # sample window
    window_start: dt.date = dt.date(2010, 1, 1)
    window_end: dt.date = dt.date(2022, 5, 31)
    # returns
    dilution_mode: str = "standard"  # or "as_printed"
    days_per_quarter: float = 365.25 / 4.0
    first_round_only: bool = False
    # impute
    impute_enabled: bool = True
    imputer_kind: str = "ridge"
    imputer_seed: int = 7
    knn_k: int = 10
    country_top_k: int = 20
    # fit
    min_quarters: int = 3
    riskfree_simple: bool = False
    # report
    geo_top_k: int = 4
    trend_max_missing: int = 20
    ipo_min_obs: int = 10
    figures: bool = True
    # logging
    log_level: str = "INFO"

    def path(self, name: str) -> Path:
        raw = getattr(self, name)
        p = Path(raw)
        return p if p.is_absolute() else Path(self.inputs_dir) / p

    def as_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["window_start"] = self.window_start.isoformat()
        doc["window_end"] = self.window_end.isoformat()
        return doc


_SECTION_FIELDS = {
    "inputs": ["organizations", "funding_rounds", "exits", "index", "tbill", "inputs_dir"],
    "window": ["window_start", "window_end"],
    "returns": ["dilution_mode", "days_per_quarter", "first_round_only"],
    "impute": ["impute_enabled", "imputer_kind", "imputer_seed", "knn_k", "country_top_k"],
    "fit": ["min_quarters", "riskfree_simple"],
    "report": ["geo_top_k", "trend_max_missing", "ipo_min_obs", "figures"],
    "output": ["log_level"],
}

# flat keys accepted in [window] etc. map onto RunConfig attributes
_TOML_KEY_MAP = {
    ("window", "start"): "window_start",
    ("window", "end"): "window_end",
    ("impute", "enabled"): "impute_enabled",
    ("impute", "kind"): "imputer_kind",
    ("impute", "seed"): "imputer_seed",
    ("returns", "mode"): "dilution_mode",
}


def _coerce(current: Any, raw: Any) -> Any:
    if isinstance(current, dt.date):
        if isinstance(raw, dt.date):
            return raw
        return dt.date.fromisoformat(str(raw))
    if isinstance(current, bool):
        if isinstance(raw, bool):
            return raw
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return str(raw)


def load_config(path: Optional[str | Path] = None,
                env: Optional[Mapping[str, str]] = None) -> RunConfig:
    """TOML file -> RunConfig, then VM_* environment overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        for section, table in doc.items():
            if not isinstance(table, dict):
                raise ConfigError(f"top-level key {section!r} is not a section")
            for key, raw in table.items():
                attr = _TOML_KEY_MAP.get((section, key), key)
                if section not in _SECTION_FIELDS or attr not in _SECTION_FIELDS[section]:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                setattr(cfg, attr, _coerce(getattr(cfg, attr), raw))
    env = os.environ if env is None else env
    for section, attrs in _SECTION_FIELDS.items():
        for attr in attrs:
            var = f"{ENV_PREFIX}{attr.upper()}"
            if var in env:
                setattr(cfg, attr, _coerce(getattr(cfg, attr), env[var]))
    if cfg.dilution_mode not in ("standard", "as_printed"):
        raise ConfigError(f"dilution_mode {cfg.dilution_mode!r} not in {{standard, as_printed}}")
    if cfg.imputer_kind not in ("ridge", "knn"):
        raise ConfigError(f"imputer kind {cfg.imputer_kind!r} not in {{ridge, knn}}")
    if cfg.window_end < cfg.window_start:
        raise ConfigError("window end precedes window start")
    return cfg


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, config: RunConfig, inputs: Mapping[str, Path],
                   artifacts: Mapping[str, Path]) -> Path:
    config_doc = config.as_dict()
    manifest = {
        "tool": "venturemetrics",
        "tool_version": TOOL_VERSION,
        "config": config_doc,
        "config_hash": sha256_text(json.dumps(config_doc, sort_keys=True)),
        "inputs": {name: sha256_file(path) for name, path in sorted(inputs.items())},
        "artifacts": {name: sha256_file(path) for name, path in sorted(artifacts.items())},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
