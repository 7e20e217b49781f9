"""Run configuration files: INI-style key/value sections.

Grammar (configparser): ``[section]`` headers, ``key = value`` lines, ``#``
comments. Recognized keys and their sections:

    [paths]    weights, input, output, report_dir
    [reface]   tile = X,Y,Z | dropout_p | seed | winsorize_cap
    [evaluate] reid_threshold | report_scale = raw | x100

CLI flags override config values; unknown keys are rejected so typos fail
loudly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import UsageError

_KNOWN = {
    "paths": {"weights", "input", "output", "report_dir"},
    "reface": {"tile", "dropout_p", "seed", "winsorize_cap"},
    "evaluate": {"reid_threshold", "report_scale"},
}


@dataclass
class RunConfig:
    weights: Path | None = None
    input: Path | None = None
    output: Path | None = None
    report_dir: Path | None = None
    tile: tuple[int, int, int] = (128, 128, 128)
    dropout_p: float = 0.25
    seed: int = 0
    winsorize_cap: float | None = None
    reid_threshold: float = 0.4
    report_scale: str = "raw"
    source: Path | None = None

    def validate_paths(self) -> None:
        for name in ("weights", "input"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise UsageError(f"[paths] {name} = {value}: no such file")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from exc

    cfg = RunConfig(source=path)
    for section in parser.sections():
        if section not in _KNOWN:
            raise UsageError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _KNOWN[section]:
                raise UsageError(f"{path}: unknown key {key!r} in [{section}]")
            try:
                _assign(cfg, key, value)
            except ValueError as exc:
                raise UsageError(f"{path}: bad value for {key}: {exc}") from exc
    if cfg.report_scale not in ("raw", "x100"):
        raise UsageError(f"{path}: report_scale must be raw or x100")
    return cfg


def _assign(cfg: RunConfig, key: str, value: str) -> None:
    if key in ("weights", "input", "output", "report_dir"):
        setattr(cfg, key, Path(value))
    elif key == "tile":
        parts = [int(v) for v in value.replace("x", ",").split(",")]
        if len(parts) != 3 or min(parts) < 1:
            raise ValueError("tile must be three positive integers")
        cfg.tile = tuple(parts)
    elif key == "dropout_p":
        cfg.dropout_p = float(value)
    elif key == "seed":
        cfg.seed = int(value)
    elif key == "winsorize_cap":
        cfg.winsorize_cap = float(value)
    elif key == "reid_threshold":
        cfg.reid_threshold = float(value)
    elif key == "report_scale":
        cfg.report_scale = value.strip()
