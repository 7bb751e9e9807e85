"""INI-style experiment configuration with up-front validation.

Every section and key is declared in ``SCHEMA``; unknown keys, bad types
and violated preconditions of the downstream modules are all reported
together, each tagged with ``section.key`` and its line in the file.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .model import ModelParams, Schedule
from .state import QuditSpec
from .synthesis import OptimizerConfig, default_blocks

__all__ = ["COMMANDS", "ConfigError", "ExperimentConfig", "SCHEMA", "load_config", "parse_config"]

COMMANDS = ("synthesize-gate", "synthesize-state", "ground-state", "lattice-evolve", "oracle-compare")
INITIAL_STATES = ("exact", "synthesized", "vacuum")
MAX_STATE_SIZE = 1 << 22

_REQUIRED = object()
AUTO = "auto"

# section -> key -> (type, default)
SCHEMA = {
    "run": {
        "command": (str, _REQUIRED),
        "seed": (int, 1234),
        "output_dir": (str, "out"),
        "record_stride": (int, 100),
    },
    "qudit": {
        "n_logical": (int, _REQUIRED),
        "n_bumper": (int, 4),
        "mass": ("float_or_auto", AUTO),
        "delta_phi": ("float_or_auto", AUTO),
    },
    "model": {
        "mu2": (float, 1.0),
        "g": (float, 0.0),
        "f": (float, 0.0),
        "d": (int, 1),
        "sites": (int, 1),
    },
    "schedule": {
        "total_time": (float, 2.0),
        "dt": (float, 1e-3),
        "ground_total_time": ("float_or_auto", AUTO),
    },
    "optimizer": {
        "method": (str, "lbfgs"),
        "gradient": (str, "analytic"),
        "max_iterations": (int, 2000),
        "cost_tolerance": (float, 1e-8),
        "gradient_step": (float, 1e-6),
        "learning_rate": (float, 0.02),
        "blocks": ("int_or_auto", AUTO),
        "alpha_radius": (float, 0.5),
        "theta_scale": (float, 0.0),
        "restarts": (int, 0),
    },
    "flags": {
        "simultaneous_ramp": (bool, False),
        "synthesized_fourier": (bool, False),
        "phase_insensitive_cost": (bool, False),
        "periodic_boundary": (bool, False),
        "initial_state": (str, "exact"),
    },
    "oracle": {
        "dense_cap": (int, 4096),
    },
}


class ConfigError(ValueError):
    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


@dataclass
class ExperimentConfig:
    command: str
    spec: QuditSpec
    params: ModelParams
    schedule: Schedule
    ground_schedule: Schedule
    optimizer: OptimizerConfig
    blocks: int
    output_dir: Path
    record_stride: int
    seed: int
    simultaneous_ramp: bool
    synthesized_fourier: bool
    phase_insensitive_cost: bool
    periodic_boundary: bool
    initial_state: str
    dense_cap: int
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Fully resolved settings, for run summaries."""
        return {sec: dict(vals) for sec, vals in sorted(self.raw.items())}


def _line_numbers(text: str) -> dict:
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = no
            continue
        m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def _convert(kind, text):
    text = text.strip()
    if kind is str:
        return text
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        val = float(text)
        if not math.isfinite(val):
            raise ValueError(f"expected a finite number, got {text!r}")
        return val
    if kind in ("float_or_auto", "int_or_auto"):
        if text.lower() == AUTO:
            return AUTO
        return _convert(float if kind == "float_or_auto" else int, text)
    raise TypeError(kind)


def parse_config(text: str, overrides=(), source: str = "<config>") -> ExperimentConfig:
    """Parse and validate config text. ``overrides`` are ``section.key=value`` strings."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc
    lines = _line_numbers(text)
    errors: list[str] = []

    def where(sec, key=None):
        no = lines.get((sec, key))
        tag = f"{sec}.{key}" if key else f"[{sec}]"
        return f"{source}:{no}: {tag}" if no else f"{source}: {tag}"

    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            errors.append(f"override {ov!r}: expected section.key=value")
            continue
        lhs, value = ov.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        if not parser.has_section(sec):
            parser.add_section(sec)
        parser.set(sec, key.strip().lower(), value)
        lines.pop((sec, key.strip().lower()), None)

    values: dict = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            errors.append(f"{where(sec)}: unknown section")
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        present = parser[sec] if parser.has_section(sec) else {}
        for key in present:
            if key not in keys:
                errors.append(f"{where(sec, key)}: unknown key")
        for key, (kind, default) in keys.items():
            if key in present:
                try:
                    values[sec][key] = _convert(kind, present[key])
                except ValueError as exc:
                    errors.append(f"{where(sec, key)}: {exc}")
            elif default is _REQUIRED:
                errors.append(f"{where(sec)}: missing required key {key!r}")
            else:
                values[sec][key] = default
    converted = all(key in values[sec] for sec, keys in SCHEMA.items() for key in keys)
    if not converted:
        raise ConfigError(errors)
    try:
        cfg = _validate(values, where)
    except ConfigError as exc:
        raise ConfigError(errors + exc.messages) from None
    if errors:
        raise ConfigError(errors)
    return cfg


def _state_size(total_dim: int, sites: int):
    # avoid building huge integers for absurd site counts
    if sites * math.log2(max(total_dim, 1)) > 62:
        return math.inf
    return total_dim**sites


def _validate(v, where) -> ExperimentConfig:
    errors: list[str] = []

    def check(cond, sec, key, msg):
        if not cond:
            errors.append(f"{where(sec, key)}: {msg}")
        return cond

    run, qd, md, sc, op, fl = (v[s] for s in ("run", "qudit", "model", "schedule", "optimizer", "flags"))
    command = run["command"]
    check(command in COMMANDS, "run", "command", f"must be one of {', '.join(COMMANDS)}")
    check(run["record_stride"] >= 1, "run", "record_stride", "must be >= 1")
    check(qd["n_logical"] >= 2, "qudit", "n_logical", "must be >= 2")
    check(qd["n_bumper"] >= 0, "qudit", "n_bumper", "must be >= 0")
    check(fl["initial_state"] in INITIAL_STATES, "flags", "initial_state",
          f"must be one of {', '.join(INITIAL_STATES)}")
    check(v["oracle"]["dense_cap"] >= 1, "oracle", "dense_cap", "must be positive")

    params = None
    try:
        params = ModelParams(md["mu2"], md["g"], md["f"], md["d"], md["sites"])
    except ValueError as exc:
        errors.append(f"{where('model')}: {exc}")

    mass = qd["mass"]
    if mass == AUTO:
        mass = params.default_mass if params else 1.0
    else:
        check(mass > 0, "qudit", "mass", "must be positive")
    delta_phi = None if qd["delta_phi"] == AUTO else qd["delta_phi"]
    if delta_phi is not None:
        check(delta_phi > 0, "qudit", "delta_phi", "must be positive")

    spec = None
    if not errors:
        spec = QuditSpec(qd["n_logical"], qd["n_bumper"], mass, delta_phi)

    schedule = ground = None
    if check(sc["dt"] > 0, "schedule", "dt", "must be positive") and check(
        sc["total_time"] >= 0, "schedule", "total_time", "must be non-negative"
    ):
        try:
            schedule = Schedule.from_time(sc["total_time"], sc["dt"])
        except ValueError as exc:
            errors.append(f"{where('schedule', 'total_time')}: {exc}")
        gt = sc["ground_total_time"]
        if gt == AUTO:
            ground = schedule
        elif check(gt >= 0, "schedule", "ground_total_time", "must be non-negative"):
            try:
                ground = Schedule.from_time(gt, sc["dt"])
            except ValueError as exc:
                errors.append(f"{where('schedule', 'ground_total_time')}: {exc}")

    optimizer = None
    try:
        optimizer = OptimizerConfig(
            max_iterations=op["max_iterations"],
            cost_tolerance=op["cost_tolerance"],
            gradient_step=op["gradient_step"],
            method=op["method"],
            gradient=op["gradient"],
            learning_rate=op["learning_rate"],
            seed=run["seed"],
            alpha_radius=op["alpha_radius"],
            theta_scale=op["theta_scale"],
            restarts=op["restarts"],
            phase_insensitive=fl["phase_insensitive_cost"],
        )
    except ValueError as exc:
        errors.append(f"{where('optimizer')}: {exc}")
    check(op["alpha_radius"] >= 0, "optimizer", "alpha_radius", "must be non-negative")
    check(op["theta_scale"] >= 0, "optimizer", "theta_scale", "must be non-negative")
    blocks = op["blocks"]
    if blocks == AUTO:
        blocks = default_blocks(qd["n_logical"])
    else:
        check(blocks >= 1, "optimizer", "blocks", "must be >= 1")

    sites = md["sites"]
    if command == "lattice-evolve":
        check(sites >= 2, "model", "sites", "lattice-evolve needs at least 2 sites")
    if command in ("ground-state", "synthesize-gate", "synthesize-state"):
        check(sites == 1, "model", "sites", f"{command} runs a single qudit (sites = 1)")
    total_dim = qd["n_logical"] + max(qd["n_bumper"], 0)
    if sites >= 1 and total_dim >= 1:
        size = _state_size(total_dim, sites)
        shown = "over 2**62" if size == math.inf else str(size)
        check(size <= MAX_STATE_SIZE, "model", "sites",
              f"state would have {shown} amplitudes (limit {MAX_STATE_SIZE})")
        if command == "oracle-compare":
            check(size <= v["oracle"]["dense_cap"], "oracle", "dense_cap",
                  f"oracle-compare needs total_dim**sites = {shown} <= dense_cap")
    if fl["simultaneous_ramp"] and command != "lattice-evolve":
        check(False, "flags", "simultaneous_ramp", "only applies to lattice-evolve")

    if errors:
        raise ConfigError(errors)
    raw = {sec: {k: (str(val) if isinstance(val, Path) else val) for k, val in vals.items()}
           for sec, vals in v.items()}
    raw["qudit"]["mass"] = spec.mass
    raw["qudit"]["delta_phi"] = spec.delta_phi
    raw["optimizer"]["blocks"] = blocks
    return ExperimentConfig(
        command=command,
        spec=spec,
        params=params,
        schedule=schedule,
        ground_schedule=ground,
        optimizer=optimizer,
        blocks=blocks,
        output_dir=Path(run["output_dir"]),
        record_stride=run["record_stride"],
        seed=run["seed"],
        simultaneous_ramp=fl["simultaneous_ramp"],
        synthesized_fourier=fl["synthesized_fourier"],
        phase_insensitive_cost=fl["phase_insensitive_cost"],
        periodic_boundary=fl["periodic_boundary"],
        initial_state=fl["initial_state"],
        dense_cap=v["oracle"]["dense_cap"],
        raw=raw,
    )


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config ({exc.strerror})"]) from exc
    return parse_config(text, overrides, source=str(path))
