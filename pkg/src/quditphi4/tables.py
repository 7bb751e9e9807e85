"""Comma-separated tables for trajectories and basis-state distributions.

Floats are written with ``repr`` so reading a table back reproduces the
in-memory values exactly.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .state import StateVector, basis_digits

__all__ = [
    "distribution_header",
    "emit_distribution",
    "emit_trajectory",
    "read_distribution",
    "read_trajectory",
    "trajectory_header",
]


def trajectory_header(sites: int, dim: int) -> list[str]:
    cols = ["step", "time"]
    for s in range(sites):
        cols += [f"p{s}_{n}" for n in range(dim)]
        cols += [f"phi_mean_{s}", f"phi_sq_{s}", f"leakage_{s}"]
    return cols


def emit_trajectory(records, path, sites: int | None = None, dim: int | None = None) -> Path:
    """One row per record: step, time, then per site the marginal
    probabilities, ``<phi>``, ``<phi^2>`` and bumper leakage."""
    records = list(records)
    if records:
        sites, dim = records[0].marginals.shape
    if sites is None or dim is None:
        raise ValueError("empty trajectory needs explicit sites and dim")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(sites, dim))
        for r in records:
            row = [str(int(r.step)), repr(float(r.time))]
            for s in range(sites):
                row += [repr(float(p)) for p in r.marginals[s]]
                row += [repr(float(r.phi_mean[s])), repr(float(r.phi_sq[s])), repr(float(r.leakage[s]))]
            w.writerow(row)
    return path


def read_trajectory(path):
    """Return ``(header, array)`` with one row per record."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return header, data


def distribution_header(sites: int) -> list[str]:
    return ["index"] + [f"q{s}" for s in range(sites - 1, -1, -1)] + ["probability"]


def emit_distribution(state: StateVector, path) -> Path:
    """Joint basis-state probabilities; occupations listed from the last site to site 0."""
    probs = np.abs(state.amplitudes) ** 2
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(distribution_header(state.sites))
        for idx, p in enumerate(probs):
            digits = basis_digits(idx, state.dim, state.sites)
            w.writerow([idx, *reversed(digits), repr(float(p))])
    return path


def read_distribution(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([float(r[-1]) for r in rows])
