"""Command-line experiment runner.

``quditphi4 run CONFIG`` executes one configured experiment and writes into
the output directory::

    summary.json        resolved config, final observables, cache keys
    timing.json         wall-clock times (kept out of summary.json so that
                        summaries are byte-identical across reruns)
    trajectory.csv      per-record marginals and field moments
    distribution.csv    final joint basis-state probabilities
    cache/              synthesized ansatz parameters

``quditphi4 sweep CONFIG --vary section.key=v1,v2`` runs the cartesian
product of the given values in parallel, one subdirectory per point.

Exit codes: 0 success, 2 configuration error, 3 runtime integrity error.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cache import cache_key, load_entry, save_entry
from .config import ConfigError, ExperimentConfig, load_config
from .evolution import IntegrityError, prepare_and_evolve_lattice, prepare_ground_state_single
from .gates import embed_logical, fourier
from .oracle import build_lattice_h, build_local_h, ground_state, target_gaussian_state
from .state import (
    StateVector,
    bumper_leakage,
    field_expectations,
    marginal_probabilities,
    new_vacuum,
    product_state,
)
from .synthesis import (
    GateCost,
    StateCost,
    SynthesisDiverged,
    ansatz_unitary,
    prepared_state,
    synthesize_gate,
    synthesize_state,
    with_seed,
)
from .tables import emit_distribution, emit_trajectory

log = logging.getLogger("quditphi4")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRITY = 3


def _floats(a):
    return [float(x) for x in np.ravel(a)]


def _state_summary(state: StateVector) -> dict:
    sites = range(state.sites)
    fe = [field_expectations(state, j) for j in sites]
    return {
        "norm": float(state.norm()),
        "marginals": [_floats(marginal_probabilities(state, j)) for j in sites],
        "phi_mean": [float(v[0]) for v in fe],
        "phi_sq": [float(v[1]) for v in fe],
        "leakage": [float(bumper_leakage(state, j)) for j in sites],
    }


def _trajectory_summary(traj) -> dict:
    if not traj:
        return {"records": 0}
    norms = np.array([r.norm for r in traj])
    means = np.array([r.phi_mean for r in traj])
    return {
        "records": len(traj),
        "max_norm_drift": float(np.max(np.abs(norms - 1.0))),
        "max_abs_phi_mean": float(np.max(np.abs(means))),
    }


class _Runner:
    """Carries one experiment; collects summary fields and timings."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.cache_dir = out / "cache"
        self.summary: dict = {"command": cfg.command, "config": cfg.echo(), "cache_keys": []}
        self.timing: dict = {}
        self.artifacts: list[str] = []

    # ------------------------------------------------------------ synthesis

    def _synth(self, kind):
        cfg = self.cfg
        spec = cfg.spec
        key = cache_key(kind, spec.n_logical, spec.n_bumper, cfg.blocks, cfg.seed,
                        cfg.optimizer.cost_tolerance)
        self.summary["cache_keys"].append(key)
        hit = load_entry(self.cache_dir, key)
        if hit is not None:
            log.info("cache hit for %s", kind)
            params, report = hit
        else:
            opt = with_seed(cfg.optimizer, cfg.seed)
            t0 = time.perf_counter()
            if kind == "fourier":
                target = embed_logical(fourier(spec.n_logical), spec.n_bumper)
                params, report = synthesize_gate(target, cfg.blocks, opt, n_bumper=spec.n_bumper)
            else:
                params, report = synthesize_state(target_gaussian_state(spec), cfg.blocks, opt)
            self.timing[f"synthesis_{kind}"] = time.perf_counter() - t0
            save_entry(self.cache_dir, key, params, report)
            log.info("synthesized %s: cost %.3e fidelity %.6f", kind, report.final_cost, report.fidelity)
        self.summary.setdefault("synthesis", {})[kind] = {
            "final_cost": float(report.final_cost),
            "fidelity": float(report.fidelity),
            "bumper_leakage": float(report.bumper_leakage),
            "iterations": int(report.iterations),
            "converged": bool(report.converged),
        }
        # cache hits live with the timings so reruns keep summary.json identical
        self.timing.setdefault("cache_hit", {})[kind] = hit is not None
        return params

    def _initial_state(self):
        kind = self.cfg.initial_state
        if kind == "vacuum":
            return new_vacuum(self.cfg.spec, 1)
        if kind == "synthesized":
            return prepared_state(self._synth("gaussian"), self.cfg.spec)
        return target_gaussian_state(self.cfg.spec)

    def _fourier_gate(self):
        if not self.cfg.synthesized_fourier:
            return None
        return ansatz_unitary(self._synth("fourier"))

    # ------------------------------------------------------------- commands

    def synthesize_gate(self):
        params = self._synth("fourier")
        spec = self.cfg.spec
        target = embed_logical(fourier(spec.n_logical), spec.n_bumper)
        cost, tau, leak = GateCost(target, self.cfg.phase_insensitive_cost, spec.n_bumper).report(params)
        self.summary["result"] = {"cost": float(cost), "fidelity": float(tau), "bumper_leakage": float(leak)}

    def synthesize_state(self):
        params = self._synth("gaussian")
        spec = self.cfg.spec
        target = target_gaussian_state(spec)
        cost, fid, leak = StateCost(target, phase_insensitive=self.cfg.phase_insensitive_cost).report(params)
        state = prepared_state(params, spec)
        self.summary["result"] = {"cost": float(cost), "fidelity": float(fid), "bumper_leakage": float(leak)}
        self.summary["final_state"] = _state_summary(state)
        self._distribution(state)

    def _evolve(self):
        cfg = self.cfg
        init = self._initial_state()
        fgate = self._fourier_gate()
        t0 = time.perf_counter()
        if cfg.params.sites == 1:
            final, traj = prepare_ground_state_single(
                cfg.spec, cfg.params, cfg.schedule, init,
                record_stride=cfg.record_stride, fourier_gate=fgate,
            )
            start = init
        else:
            start = product_state(cfg.spec, [init.amplitudes] * cfg.params.sites)
            final, traj = prepare_and_evolve_lattice(
                cfg.spec, cfg.params, cfg.schedule, init,
                ground_schedule=cfg.ground_schedule,
                simultaneous=cfg.simultaneous_ramp,
                periodic=cfg.periodic_boundary,
                record_stride=cfg.record_stride,
                fourier_gate=fgate,
            )
        self.timing["evolution"] = time.perf_counter() - t0
        p0 = np.abs(start.amplitudes) ** 2
        p1 = np.abs(final.amplitudes) ** 2
        self.summary["final_state"] = _state_summary(final)
        self.summary["final_state"]["max_distribution_change"] = float(np.max(np.abs(p1 - p0)))
        self.summary["trajectory"] = _trajectory_summary(traj)
        self._trajectory(traj)
        self._distribution(final)
        return final

    def _oracle_fields(self, final: StateVector):
        cfg = self.cfg
        if cfg.params.sites == 1:
            h = build_local_h(cfg.spec, cfg.params)
        else:
            h = build_lattice_h(cfg.spec, cfg.params, periodic=cfg.periodic_boundary, cap=cfg.dense_cap)
        e0, gs = ground_state(h, cfg.spec, cfg.params.sites)
        psi = final.amplitudes
        energy = float(np.real(np.vdot(psi, h @ psi)))
        return {
            "fidelity": float(abs(np.vdot(gs.amplitudes, psi)) ** 2),
            "energy_circuit": energy,
            "energy_oracle": float(e0),
            "energy_difference": energy - float(e0),
        }

    def ground_state(self):
        final = self._evolve()
        self.summary["oracle"] = self._oracle_fields(final)

    def lattice_evolve(self):
        self._evolve()

    def oracle_compare(self):
        final = self._evolve()
        self.summary["oracle"] = self._oracle_fields(final)

    # -------------------------------------------------------------- outputs

    def _trajectory(self, traj):
        if traj:
            emit_trajectory(traj, self.out / "trajectory.csv")
            self.artifacts.append("trajectory.csv")

    def _distribution(self, state):
        emit_distribution(state, self.out / "distribution.csv")
        self.artifacts.append("distribution.csv")

    def write(self, status: str, detail: str | None = None):
        self.summary["status"] = status
        self.summary["partial"] = status != "ok"
        if detail:
            self.summary["error"] = detail
        self.summary["artifacts"] = sorted(set(self.artifacts))
        self.summary["version"] = __version__
        (self.out / "summary.json").write_text(json.dumps(self.summary, indent=1, sort_keys=True) + "\n")
        (self.out / "timing.json").write_text(json.dumps(self.timing, indent=1, sort_keys=True) + "\n")
        marker = self.out / "PARTIAL"
        if status != "ok":
            marker.write_text(f"{status}: {detail}\n")
        elif marker.exists():
            marker.unlink()


def run_experiment(cfg: ExperimentConfig, out: Path | None = None) -> int:
    """Run one validated experiment. Returns the process exit code."""
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = _Runner(cfg, out)
    t0 = time.perf_counter()
    try:
        getattr(runner, cfg.command.replace("-", "_"))()
    except IntegrityError as exc:
        if len(exc.args) > 1 and exc.args[1]:
            emit_trajectory(exc.args[1], out / "trajectory.csv")
            runner.artifacts.append("trajectory.csv")
        runner.timing["total"] = time.perf_counter() - t0
        runner.write("integrity-error", str(exc.args[0]))
        log.error("integrity error: %s", exc.args[0])
        return EXIT_INTEGRITY
    except (SynthesisDiverged, ArithmeticError) as exc:
        runner.timing["total"] = time.perf_counter() - t0
        runner.write("integrity-error", str(exc))
        log.error("numerical failure: %s", exc)
        return EXIT_INTEGRITY
    runner.timing["total"] = time.perf_counter() - t0
    runner.write("ok")
    return EXIT_OK


def _overrides(args) -> list[str]:
    sets = list(args.set or [])
    if args.seed is not None:
        sets.append(f"run.seed={args.seed}")
    if args.out is not None:
        sets.append(f"run.output_dir={args.out}")
    return sets


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg)


def _sweep_one(config, overrides, out):
    logging.basicConfig(level=logging.WARNING)
    cfg = load_config(config, overrides)
    return run_experiment(cfg, out)


def _parse_vary(items):
    axes = []
    for item in items:
        if "=" not in item:
            raise ConfigError([f"--vary {item!r}: expected section.key=v1,v2,..."])
        key, vals = item.split("=", 1)
        axes.append([(key.strip(), v.strip()) for v in vals.split(",") if v.strip()])
    return axes


def _cmd_sweep(args) -> int:
    base = _overrides(args)
    try:
        axes = _parse_vary(args.vary)
        cfg = load_config(args.config, base)
        points = []
        for combo in itertools.product(*axes):
            sets = base + [f"{k}={v}" for k, v in combo]
            load_config(args.config, sets)  # reject bad points before starting any
            tag = "_".join(f"{k.split('.')[-1]}={v}" for k, v in combo) or "base"
            points.append((sets, cfg.output_dir / f"{len(points):03d}-{tag}"))
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    jobs = args.jobs or os.cpu_count() or 1
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        codes = list(pool.map(_sweep_one, [args.config] * len(points),
                              [p[0] for p in points], [p[1] for p in points]))
    for (sets, out), code in zip(points, codes):
        print(f"{out}\texit {code}")
    return max(codes, default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditphi4", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="action", required=True)

    def common(p):
        p.add_argument("config", help="INI experiment file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", help="override run.output_dir")

    p_run = sub.add_parser("run", help="run one experiment")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid in parallel")
    common(p_sweep)
    p_sweep.add_argument("--vary", action="append", required=True, metavar="SECTION.KEY=V1,V2")
    p_sweep.add_argument("--jobs", type=int, default=None)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
