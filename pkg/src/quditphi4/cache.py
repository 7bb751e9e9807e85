"""On-disk cache of synthesized ansatz parameters.

One JSON document per result, named by a hash of its key tuple
``(target kind, N, n_bumper, blocks, seed, tolerance)``. The key is stored
inside the document too and re-checked on load, so a file whose key does
not match (for example a different tolerance) is never reused.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .synthesis import AnsatzParams, SynthesisReport

__all__ = ["cache_key", "cache_path", "load_entry", "save_entry"]

FORMAT_VERSION = 1


def cache_key(kind: str, n_logical: int, n_bumper: int, blocks: int, seed: int, tolerance: float):
    return [str(kind), int(n_logical), int(n_bumper), int(blocks), int(seed), float(tolerance)]


def _digest(key) -> str:
    return hashlib.sha256(json.dumps(key).encode()).hexdigest()[:16]


def cache_path(directory, key) -> Path:
    return Path(directory) / f"{key[0]}-{_digest(key)}.json"


def save_entry(directory, key, params: AnsatzParams, report: SynthesisReport) -> Path:
    path = cache_path(directory, key)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": FORMAT_VERSION,
        "key": key,
        "alphas": [[float(a.real), float(a.imag)] for a in params.alphas],
        "thetas": params.thetas.tolist(),
        "final_cost": float(report.final_cost),
        "fidelity": float(report.fidelity),
        "bumper_leakage": float(report.bumper_leakage),
        "iterations": int(report.iterations),
        "converged": bool(report.converged),
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return path


def load_entry(directory, key):
    """Return ``(params, report)`` for ``key`` or ``None`` when absent or stale."""
    path = cache_path(directory, key)
    if not path.exists():
        return None
    doc = json.loads(path.read_text())
    if doc.get("format") != FORMAT_VERSION or doc.get("key") != key:
        return None
    alphas = np.array([complex(re, im) for re, im in doc["alphas"]])
    params = AnsatzParams(alphas, np.array(doc["thetas"], dtype=float))
    report = SynthesisReport(
        final_cost=doc["final_cost"],
        iterations=doc["iterations"],
        fidelity=doc["fidelity"],
        bumper_leakage=doc["bumper_leakage"],
        converged=doc["converged"],
    )
    return params, report
