"""Shipped example configurations."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

NAMES = ("coint_ou", "ou_stationary", "delay", "mcarma", "var")


def fixture_path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    return Path(str(resources.files(__name__).joinpath(f"{name}.json")))


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text()
