"""Symbolic and numeric tools for the balanced geodesic Weyl calculus on curved manifolds."""

from __future__ import annotations

__version__ = "0.1.0"
