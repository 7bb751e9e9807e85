from __future__ import annotations

import numpy as np
import pytest

from quditphi4 import _kernels

KERNEL_NAMES = ("apply_dense", "apply_diag", "apply_pair_diag", "marginal", "apply_all_sites", "apply_chain_diag")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=_kernels.available_backends())
def backend(request, monkeypatch):
    """Route every state operation through one kernel backend."""
    mod = _kernels.get_backend(request.param)
    for name in KERNEL_NAMES:
        monkeypatch.setattr(_kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state_vector(rng, size):
    v = rng.normal(size=size) + 1j * rng.normal(size=size)
    return v / np.linalg.norm(v)


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
