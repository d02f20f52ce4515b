"""key=value / JSON config parsing shared by plans and channel profiles."""

from __future__ import annotations

import json
from pathlib import Path


def parse_config(text: str) -> dict:
    """Parse either a JSON object or ``key=value`` lines (``#`` comments allowed)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())
