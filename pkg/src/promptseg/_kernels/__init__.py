"""Kernel backend selection.

The compiled Cython backend is preferred when its extension module
imported cleanly; the NumPy fallback is always available. The initial
choice honors the PROMPTSEG_BACKEND environment variable ("auto",
"compiled", or "python"); `set_backend` switches at runtime (used by
bench --compare and the test suite).
"""
from __future__ import annotations

import os
from types import ModuleType

from ..errors import ConfigError
from . import _pyk

try:
    from . import _ck
except ImportError:  # extension not built; fall back silently
    _ck = None

_BACKENDS: dict[str, ModuleType] = {"python": _pyk}
if _ck is not None:
    _BACKENDS["compiled"] = _ck


def resolve(name: str | None = "auto") -> ModuleType:
    if name in (None, "", "auto"):
        return _ck if _ck is not None else _pyk
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ConfigError(
            f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)} + ['auto']"
        ) from None


_active = resolve(os.environ.get("PROMPTSEG_BACKEND", "auto"))


def set_backend(name: str | None) -> ModuleType:
    global _active
    _active = resolve(name)
    return _active


def active() -> ModuleType:
    return _active


def backend_name() -> str:
    return _active.NAME


def available() -> list[str]:
    return sorted(_BACKENDS)
