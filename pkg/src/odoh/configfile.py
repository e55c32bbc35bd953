"""Flat `key = value` config files with environment-variable overrides."""

from __future__ import annotations

import os


def load_kv_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip().lower()] = value.strip()
    return values


def env_overrides(values: dict[str, str], prefix: str) -> dict[str, str]:
    """Overlay ODOH_<PREFIX>_<KEY> environment variables onto `values`."""
    out = dict(values)
    for name, value in os.environ.items():
        if name.startswith(prefix):
            out[name[len(prefix) :].lower()] = value
    return out
