"""Volt-VAr curve-update simulation and detection."""

from ._core import *  # noqa: F401,F403
from ._core import DEFAULT_CURVE, DroopCurve, Error

__all__ = [name for name in dir() if not name.startswith("_")]
