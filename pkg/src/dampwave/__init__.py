"""Finite-difference simulator and verification harness for 2-D elastic waves
with space-dependent critical damping."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402,F401
