"""Hot state-vector kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``QUDITPHI4_BACKEND``
(``numba`` or ``numpy``). Without the variable, numba is used when it
imports cleanly. Both backends stay importable through :func:`get_backend`
so tests and benchmarks can compare them directly.
"""
from __future__ import annotations

import importlib
import os
from types import ModuleType

__all__ = [
    "BACKEND",
    "apply_all_sites",
    "apply_chain_diag",
    "apply_dense",
    "apply_diag",
    "apply_pair_diag",
    "available_backends",
    "get_backend",
    "marginal",
]


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        importlib.import_module("numba")
    except ImportError:
        return names
    return names + ["numba"]


def get_backend(name: str) -> ModuleType:
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown kernel backend {name!r}")
    return importlib.import_module(f"{__name__}._{name}")


def _select() -> str:
    requested = os.environ.get("QUDITPHI4_BACKEND", "").strip().lower()
    if requested:
        if requested not in ("numpy", "numba"):
            raise ValueError(f"QUDITPHI4_BACKEND must be numpy or numba, got {requested!r}")
        return requested
    return "numba" if "numba" in available_backends() else "numpy"


BACKEND = _select()
_impl = get_backend(BACKEND)

apply_dense = _impl.apply_dense
apply_diag = _impl.apply_diag
apply_pair_diag = _impl.apply_pair_diag
marginal = _impl.marginal
apply_all_sites = _impl.apply_all_sites
apply_chain_diag = _impl.apply_chain_diag
