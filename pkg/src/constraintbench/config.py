"""Flat key=value configuration file for harness settings.

Understood keys: port_pool (range ``8080-8099`` or comma list), workers,
request_timeout, health_interval, health_max_attempts, health_total_timeout,
setup_timeout, provider_timeout, shutdown_grace, pg_url, workspace_root,
aliases (path to a layer-alias JSON). ``#`` comments and ``[section]``
headers are tolerated and ignored.
"""

from __future__ import annotations

from pathlib import Path

from .errors import TaskSetupError
from .harness import HarnessConfig
from .verifiers import LayerAliasMap

_FLOAT_KEYS = {
    "request_timeout",
    "health_interval",
    "health_total_timeout",
    "setup_timeout",
    "provider_timeout",
    "shutdown_grace",
}
_INT_KEYS = {"workers", "health_max_attempts"}


def _parse_ports(raw: str) -> list[int]:
    ports: list[int] = []
    for piece in raw.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "-" in piece:
            low, _, high = piece.partition("-")
            ports.extend(range(int(low), int(high) + 1))
        else:
            ports.append(int(piece))
    if not ports:
        raise TaskSetupError("port_pool must contain at least one port")
    return ports


def parse_config_text(text: str, base_dir: Path | None = None) -> HarnessConfig:
    config = HarnessConfig.from_env()
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise TaskSetupError(f"config line {line_number} is not key=value: {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip().strip("\"'")
        if key == "port_pool":
            config.port_pool = _parse_ports(value)
        elif key in _INT_KEYS:
            setattr(config, key, int(value))
        elif key in _FLOAT_KEYS:
            setattr(config, key, float(value))
        elif key == "pg_url":
            config.pg_url = value or None
        elif key == "workspace_root":
            config.workspace_root = value
        elif key == "aliases":
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            config.aliases = LayerAliasMap.from_file(path)
        else:
            raise TaskSetupError(f"unknown config key {key!r} (line {line_number})")
    return config


def load_config(path) -> HarnessConfig:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), base_dir=path.parent)
