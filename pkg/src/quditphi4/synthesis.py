"""Variational SNAP + displacement synthesis of single-qudit states and gates.

The ansatz is a product of blocks ``B(theta, alpha) = D(alpha)^dag S(theta) D(alpha)``
with ``S(theta) = diag(exp(i theta_n))`` over every level, bumpers included.
``U = B_k ... B_1`` (block 1 acts first).

Both costs come with exact gradients obtained by back-propagating through
the block product. The displacement derivative uses the eigenbasis of its
Hermitian generator (Daleckii-Krein divided differences), so a gradient
costs about as much as two cost evaluations. Central finite differences
remain available for cross-checks and for arbitrary user cost functions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .gates import displacement_eigh, truncated_ladder
from .state import DenseGate, QuditSpec, StateVector

__all__ = [
    "AnsatzParams",
    "GateCost",
    "OptimizerConfig",
    "StateCost",
    "SynthesisDiverged",
    "SynthesisReport",
    "ansatz_unitary",
    "block",
    "cost_gate",
    "cost_state",
    "default_blocks",
    "forward_difference_gradient",
    "gradient",
    "optimize",
    "prepared_state",
    "synthesize_gate",
    "synthesize_state",
]


class SynthesisDiverged(ArithmeticError):
    """Non-finite cost during the search; ``trace`` holds the cost history."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


@dataclass
class AnsatzParams:
    """``alphas[j]`` and ``thetas[j]`` parametrize block ``j + 1``."""

    alphas: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=complex).reshape(-1)
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        if self.alphas.size < 1:
            raise ValueError("ansatz needs at least one block")
        if self.thetas.shape[0] != self.alphas.size:
            raise ValueError(
                f"{self.alphas.size} displacements but {self.thetas.shape[0]} phase vectors"
            )

    @property
    def n_blocks(self) -> int:
        return self.alphas.size

    @property
    def dim(self) -> int:
        return self.thetas.shape[1]

    @property
    def blocks(self) -> list[tuple[complex, np.ndarray]]:
        return list(zip(self.alphas, self.thetas))

    def to_vector(self) -> np.ndarray:
        """Flatten as ``[Re a_1, Im a_1, theta_1..., Re a_2, ...]``."""
        head = np.stack([self.alphas.real, self.alphas.imag], axis=1)
        return np.concatenate([head, self.thetas], axis=1).reshape(-1)

    @classmethod
    def from_vector(cls, vec, n_blocks: int, dim: int) -> AnsatzParams:
        rows = np.asarray(vec, dtype=float).reshape(n_blocks, dim + 2)
        return cls(rows[:, 0] + 1j * rows[:, 1], rows[:, 2:].copy())

    @classmethod
    def identity(cls, n_blocks: int, dim: int) -> AnsatzParams:
        return cls(np.zeros(n_blocks, dtype=complex), np.zeros((n_blocks, dim)))

    @classmethod
    def random(
        cls, n_blocks: int, dim: int, rng, alpha_radius: float = 0.5, theta_scale: float = 0.0
    ) -> AnsatzParams:
        """Displacements uniform on the disk ``|alpha| <= alpha_radius``,
        phases uniform in ``[-theta_scale, theta_scale]``."""
        r = alpha_radius * np.sqrt(rng.uniform(size=n_blocks))
        phi = rng.uniform(0, 2 * np.pi, size=n_blocks)
        thetas = rng.uniform(-theta_scale, theta_scale, size=(n_blocks, dim))
        return cls(r * np.exp(1j * phi), thetas)


# ---------------------------------------------------------------- forward model


class _Block:
    """Cached factors of one block for forward and adjoint passes."""

    __slots__ = ("w", "v", "d", "s", "matrix")

    def __init__(self, alpha, theta):
        dim = theta.size
        if alpha == 0:
            self.w = np.zeros(dim)
            self.v = np.eye(dim, dtype=complex)
            self.d = np.eye(dim, dtype=complex)
        else:
            self.w, self.v = displacement_eigh(dim, alpha)
            self.d = (self.v * np.exp(-1j * self.w)) @ self.v.conj().T
        self.s = np.exp(1j * theta)
        self.matrix = self.d.conj().T @ (self.s[:, None] * self.d)

    def d_displacement(self, directions):
        """Derivatives of ``D(alpha)`` along generator directions."""
        w = self.w
        diff = 0.5 * (w[:, None] - w[None, :])
        gamma = np.exp(-0.5j * (w[:, None] + w[None, :])) * np.sinc(diff / np.pi)
        vh = self.v.conj().T
        return [self.v @ (gamma * (vh @ e @ self.v)) @ vh for e in directions]


def _generator_directions(dim):
    a = truncated_ladder(dim)
    ad = a.conj().T
    # d/dRe(alpha) and d/dIm(alpha) of (alpha a - alpha* a^dag)
    return a - ad, 1j * (a + ad)


def block(alpha: complex, theta, dim: int | None = None) -> DenseGate:
    """``D(alpha)^dag diag(exp(i theta)) D(alpha)``."""
    theta = np.asarray(theta, dtype=float)
    if dim is not None and theta.shape != (dim,):
        raise ValueError(f"theta must have length {dim}, got shape {theta.shape}")
    return DenseGate(_Block(complex(alpha), theta).matrix)


def ansatz_unitary(params: AnsatzParams) -> DenseGate:
    u = np.eye(params.dim, dtype=complex)
    for alpha, theta in params.blocks:
        u = _Block(alpha, theta).matrix @ u
    return DenseGate(u, check=False)


def prepared_state(params: AnsatzParams, spec: QuditSpec | None = None) -> StateVector:
    """``U(params) |0>``."""
    psi = np.zeros(params.dim, dtype=complex)
    psi[0] = 1.0
    for alpha, theta in params.blocks:
        psi = _Block(alpha, theta).matrix @ psi
    spec = spec or QuditSpec(params.dim)
    return StateVector(spec, 1, psi)


# ---------------------------------------------------------------- costs


class StateCost:
    """``|<target|U|0> - 1|^2 + |P_bumper U|0>|^2``.

    With ``phase_insensitive`` the first term becomes ``1 - |<target|U|0>|^2``.
    """

    def __init__(self, target: StateVector, n_bumper: int | None = None, phase_insensitive=False):
        self.target = np.asarray(target.amplitudes, dtype=complex)
        self.dim = self.target.size
        nb = target.spec.n_bumper if n_bumper is None else n_bumper
        self.n_logical = self.dim - nb
        self.phase_insensitive = phase_insensitive

    def _forward(self, params):
        blocks = [_Block(a, t) for a, t in params.blocks]
        psis = [np.zeros(self.dim, dtype=complex)]
        psis[0][0] = 1.0
        for b in blocks:
            psis.append(b.matrix @ psis[-1])
        return blocks, psis

    def _terms(self, psi):
        o = np.vdot(self.target, psi)
        bump = psi[self.n_logical :]
        leak = float(np.vdot(bump, bump).real)
        if self.phase_insensitive:
            return float(1.0 - abs(o) ** 2) + leak, o, leak
        return float(abs(o - 1.0) ** 2) + leak, o, leak

    def __call__(self, params: AnsatzParams) -> float:
        return self._terms(self._forward(params)[1][-1])[0]

    def report(self, params):
        psi = self._forward(params)[1][-1]
        cost, o, leak = self._terms(psi)
        return cost, float(abs(o) ** 2), leak

    def value_and_grad(self, params: AnsatzParams):
        blocks, psis = self._forward(params)
        psi = psis[-1]
        cost, o, _ = self._terms(psi)
        w = -o if self.phase_insensitive else o - 1.0
        lam = w * self.target
        lam[self.n_logical :] += psi[self.n_logical :]
        directions = _generator_directions(self.dim)
        grad = np.empty((len(blocks), self.dim + 2))
        for j in range(len(blocks) - 1, -1, -1):
            b = blocks[j]
            u = b.d @ psis[j]
            v = b.d @ lam
            grad[j, 2:] = 2.0 * np.real(np.conj(v) * 1j * b.s * u)
            for col, dd in enumerate(b.d_displacement(directions)):
                term = np.vdot(dd @ lam, b.s * u) + np.vdot(v, b.s * (dd @ psis[j]))
                grad[j, col] = 2.0 * term.real
            lam = b.matrix.conj().T @ lam
        return cost, grad.reshape(-1)


class GateCost:
    """``|Tr(U_target^dag U) / dim - 1|^2``; ``phase_insensitive`` gives ``1 - |Tr| / dim``."""

    def __init__(self, target: DenseGate, phase_insensitive=False, n_bumper: int = 0):
        self.target = np.asarray(target.matrix if isinstance(target, DenseGate) else target)
        self.dim = self.target.shape[0]
        self.n_logical = self.dim - n_bumper
        self.phase_insensitive = phase_insensitive

    def _tau(self, u):
        return np.vdot(self.target, u) / self.dim  # Tr(T^dag U) / dim

    def _cost(self, tau):
        if self.phase_insensitive:
            return float(1.0 - abs(tau))
        return float(abs(tau - 1.0) ** 2)

    def __call__(self, params: AnsatzParams) -> float:
        return self._cost(self._tau(ansatz_unitary(params).matrix))

    def report(self, params):
        u = ansatz_unitary(params).matrix
        tau = self._tau(u)
        # mean bumper population reached from logical basis inputs
        leak = float(np.sum(np.abs(u[self.n_logical :, : self.n_logical]) ** 2)) / max(
            self.n_logical, 1
        )
        return self._cost(tau), float(abs(tau)), leak

    def value_and_grad(self, params: AnsatzParams):
        if params.dim != self.dim:
            raise ValueError(f"ansatz dimension {params.dim} != target dimension {self.dim}")
        blocks = [_Block(a, t) for a, t in params.blocks]
        k = len(blocks)
        prefix = [np.eye(self.dim, dtype=complex)]
        for b in blocks[:-1]:
            prefix.append(b.matrix @ prefix[-1])
        u = blocks[-1].matrix @ prefix[-1]
        tau = self._tau(u)
        cost = self._cost(tau)
        if self.phase_insensitive:
            w = -tau / (2.0 * abs(tau)) if abs(tau) > 0 else 0.0
        else:
            w = tau - 1.0
        directions = _generator_directions(self.dim)
        grad = np.empty((k, self.dim + 2))
        q = self.target.conj().T
        for j in range(k - 1, -1, -1):
            b = blocks[j]
            m = prefix[j] @ q  # d tau = Tr(m dB) / dim
            dmd = b.d @ m @ b.d.conj().T
            dtau_theta = 1j * b.s * np.diagonal(dmd) / self.dim
            grad[j, 2:] = 2.0 * np.real(np.conj(w) * dtau_theta)
            md = m @ b.d.conj().T
            for col, dd in enumerate(b.d_displacement(directions)):
                # Tr(m dD^dag S D) + Tr(m D^dag S dD)
                t1 = np.sum((m @ dd.conj().T) * (b.s[:, None] * b.d).T)
                t2 = np.sum(md * (b.s[:, None] * dd).T)
                grad[j, col] = 2.0 * np.real(np.conj(w) * (t1 + t2) / self.dim)
            q = q @ b.matrix
        return cost, grad.reshape(-1)


def cost_state(params: AnsatzParams, target: StateVector, phase_insensitive=False) -> float:
    return StateCost(target, phase_insensitive=phase_insensitive)(params)


def cost_gate(params: AnsatzParams, target: DenseGate, phase_insensitive=False) -> float:
    target_m = target.matrix if isinstance(target, DenseGate) else np.asarray(target)
    if target_m.shape != (params.dim, params.dim):
        raise ValueError(f"target shape {target_m.shape} does not match ansatz dim {params.dim}")
    return GateCost(target, phase_insensitive)(params)


def gradient(cost_fn, params: AnsatzParams, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient over every real parameter."""
    if step <= 0:
        raise ValueError("gradient step must be positive")
    x0 = params.to_vector()
    k, dim = params.n_blocks, params.dim
    out = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        fp = cost_fn(AnsatzParams.from_vector(xp, k, dim))
        fm = cost_fn(AnsatzParams.from_vector(xm, k, dim))
        out[i] = (fp - fm) / (2 * step)
    return out


def forward_difference_gradient(cost_fn, params: AnsatzParams, step: float = 1e-6) -> np.ndarray:
    x0 = params.to_vector()
    k, dim = params.n_blocks, params.dim
    f0 = cost_fn(params)
    out = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xp[i] += step
        out[i] = (cost_fn(AnsatzParams.from_vector(xp, k, dim)) - f0) / step
    return out


# ---------------------------------------------------------------- optimizer


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings.

    ``method`` is ``"lbfgs"`` (quasi-Newton, scipy) or ``"adam"``
    (per-parameter adaptive steps with momentum). ``gradient`` selects
    ``"analytic"`` or ``"finite-difference"`` (central, ``gradient_step``).
    Failed runs restart from a fresh random point up to ``restarts`` times.
    """

    max_iterations: int = 2000
    cost_tolerance: float = 1e-8
    gradient_step: float = 1e-6
    method: str = "lbfgs"
    gradient: str = "analytic"
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 1234
    alpha_radius: float = 0.5
    theta_scale: float = 0.0
    restarts: int = 0
    phase_insensitive: bool = False

    def __post_init__(self):
        if self.cost_tolerance <= 0:
            raise ValueError("cost_tolerance must be positive")
        if self.gradient_step <= 0:
            raise ValueError("gradient_step must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.method not in ("lbfgs", "adam"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.gradient not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")


@dataclass
class SynthesisReport:
    final_cost: float
    iterations: int
    fidelity: float = float("nan")
    bumper_leakage: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    restarts_used: int = 0
    cost_trace: list = field(default_factory=list, repr=False)


def default_blocks(n_logical: int) -> int:
    return 12 if n_logical <= 16 else max(1, (2 * n_logical) // 3)


class _Objective:
    """Vector-in, cost/grad-out adapter that remembers the best point seen."""

    def __init__(self, cost_fn, n_blocks, dim, config):
        self.cost_fn = cost_fn
        self.n_blocks = n_blocks
        self.dim = dim
        self.config = config
        self.trace: list[float] = []
        self.best_cost = math.inf
        self.best_x = None
        self.evaluations = 0

    def __call__(self, x):
        params = AnsatzParams.from_vector(x, self.n_blocks, self.dim)
        self.evaluations += 1
        if self.config.gradient == "analytic" and hasattr(self.cost_fn, "value_and_grad"):
            cost, grad = self.cost_fn.value_and_grad(params)
        else:
            cost = self.cost_fn(params)
            grad = gradient(self.cost_fn, params, self.config.gradient_step)
        if not (math.isfinite(cost) and np.all(np.isfinite(grad))):
            raise SynthesisDiverged(f"non-finite cost {cost!r}", self.trace + [cost])
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_x = np.array(x, copy=True)
        return cost, grad


def _run_lbfgs(obj, x0, config, budget):
    iters = 0

    def callback(intermediate_result):
        nonlocal iters
        iters += 1
        obj.trace.append(float(intermediate_result.fun))
        if intermediate_result.fun <= config.cost_tolerance:
            raise StopIteration

    minimize(
        obj, x0, jac=True, method="L-BFGS-B", callback=callback,
        options={"maxiter": budget, "ftol": 1e-16, "gtol": 1e-14, "maxcor": 30},
    )
    return iters


def _run_adam(obj, x0, config, budget):
    x = x0.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    iters = 0
    for t in range(1, budget + 1):
        cost, g = obj(x)
        obj.trace.append(cost)
        if cost <= config.cost_tolerance:
            break
        m = config.beta1 * m + (1 - config.beta1) * g
        v = config.beta2 * v + (1 - config.beta2) * g * g
        mhat = m / (1 - config.beta1**t)
        vhat = v / (1 - config.beta2**t)
        x = x - config.learning_rate * mhat / (np.sqrt(vhat) + 1e-12)
        iters = t
    else:
        obj(x)
    return iters


def optimize(cost_fn, init: AnsatzParams, config: OptimizerConfig | None = None):
    """Minimize ``cost_fn`` over ansatz parameters starting from ``init``.

    Stops at ``cost_tolerance`` or after ``max_iterations`` (per attempt).
    The returned parameters are the best point evaluated, so the final
    cost never exceeds the cost at ``init``. Returns ``(params, report)``.
    """
    config = config or OptimizerConfig()
    start = time.perf_counter()
    k, dim = init.n_blocks, init.dim
    obj = _Objective(cost_fn, k, dim, config)
    x0 = init.to_vector()
    c0 = cost_fn(init)
    if not math.isfinite(c0):
        raise SynthesisDiverged(f"non-finite initial cost {c0!r}", [c0])
    obj.best_cost, obj.best_x = c0, x0.copy()
    obj.trace.append(c0)
    if c0 <= config.cost_tolerance:
        return init, _finish(cost_fn, init, c0, 0, start, obj, True, 0)

    rng = np.random.default_rng(config.seed)
    runner = _run_lbfgs if config.method == "lbfgs" else _run_adam
    iterations = 0
    attempt = 0
    for attempt in range(config.restarts + 1):
        if attempt == 0:
            xs = x0
        else:
            xs = AnsatzParams.random(k, dim, rng, config.alpha_radius, max(config.theta_scale, 0.1)).to_vector()
        iterations += runner(obj, xs, config, config.max_iterations)
        if obj.best_cost <= config.cost_tolerance:
            break
    best = AnsatzParams.from_vector(obj.best_x, k, dim)
    return best, _finish(
        cost_fn, best, obj.best_cost, iterations, start, obj,
        obj.best_cost <= config.cost_tolerance, attempt,
    )


def _finish(cost_fn, params, cost, iterations, start, obj, converged, restarts):
    report = SynthesisReport(
        final_cost=float(cost),
        iterations=int(iterations),
        converged=bool(converged),
        restarts_used=int(restarts),
        cost_trace=list(obj.trace),
    )
    if hasattr(cost_fn, "report"):
        _, report.fidelity, report.bumper_leakage = cost_fn.report(params)
    report.wall_time = time.perf_counter() - start
    return report


def _initial(k, dim, config, init):
    if init is not None:
        return init
    rng = np.random.default_rng(config.seed)
    return AnsatzParams.random(k, dim, rng, config.alpha_radius, config.theta_scale)


def synthesize_state(
    target: StateVector,
    k: int | None = None,
    config: OptimizerConfig | None = None,
    init: AnsatzParams | None = None,
):
    """Find blocks preparing ``target`` from the vacuum. Returns ``(params, report)``."""
    config = config or OptimizerConfig()
    if abs(target.norm() - 1.0) > 1e-10:
        raise ValueError("target state must be normalized")
    k = k or default_blocks(target.spec.n_logical)
    cost = StateCost(target, phase_insensitive=config.phase_insensitive)
    return optimize(cost, _initial(k, target.dim, config, init), config)


def synthesize_gate(
    target: DenseGate,
    k: int | None = None,
    config: OptimizerConfig | None = None,
    init: AnsatzParams | None = None,
    n_bumper: int = 0,
):
    """Find blocks reproducing the (bumper-embedded) unitary ``target``."""
    config = config or OptimizerConfig()
    m = target.matrix if isinstance(target, DenseGate) else np.asarray(target)
    if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > 1e-10:
        raise ValueError("target gate must be unitary")
    k = k or default_blocks(m.shape[0] - n_bumper)
    cost = GateCost(target, config.phase_insensitive, n_bumper)
    return optimize(cost, _initial(k, m.shape[0], config, init), config)


def with_seed(config: OptimizerConfig, seed: int) -> OptimizerConfig:
    return replace(config, seed=seed)
