"""Simulation toolkit for threshold classifiers facing strategic agents."""

from __future__ import annotations

__version__ = "0.1.0"
