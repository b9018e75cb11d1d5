"""Bundled case configurations."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def _files():
    return sorted((p for p in resources.files(__name__).iterdir() if p.name.endswith(".toml")),
                  key=lambda p: p.name)


def list_presets() -> list:
    """``(name, description)`` for every bundled preset."""
    from ..config import loads_config

    out = []
    for p in _files():
        cfg = loads_config(p.read_text(encoding="utf-8"))
        out.append((p.name[:-5], cfg.description))
    return out


def preset_path(name: str):
    stem = name[:-5] if name.endswith(".toml") else name
    for p in _files():
        if p.name[:-5] == stem:
            return Path(str(p))
    return None
