"""Integrated airline disruption recovery: aircraft, crew and passengers."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

from .model import ProblemInstance

__version__ = "0.1.0"


def demo_dir() -> Path:
    """Directory of the bundled three-aircraft example instance."""
    return Path(str(files(__name__) / "data" / "demo"))


def demo_instance() -> ProblemInstance:
    from .io import read_instance

    return read_instance(demo_dir(), format="tables")
