"""Flat ``key = value`` run configuration.

A config file holds one assignment per line, with dotted namespaces such as
``collision.stepper`` and ``#`` comments::

    mode = homogeneous
    dt = 0.001
    t_end = 0.2
    grid.radial.n = 200
    grid.radial.r_max = 6

Every command has its own key table.  Unknown keys, malformed values and
violated invariants raise :class:`ConfigError` naming the key.  The parsed
configuration is a :class:`RunConfig`; :meth:`RunConfig.normalized` writes it
back with every default filled in, and parsing that text reproduces it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .collision import POTENTIAL_VARIANTS, STEPPERS, CollisionSettings
from .criterion import CriterionInput, k_of_m
from .grids import Grid3, PhaseGrid, RadialGrid, WeightParams
from .linear_scheme import LinearConfig
from .simulation import SimConfig, gaussian_phase, gaussian_radial
from .transport import LIMITERS

__all__ = ["ConfigError", "RunConfig", "COMMANDS", "parse_config", "parse_text"]

COMMANDS = ("simulate", "iterate", "criterion", "potential-verify")

REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# value types


def _float(text):
    x = float(text)
    if not math.isfinite(x):
        raise ValueError("not finite")
    return x


def _int(text):
    return int(text, 10)


def _bool(text):
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _optional(conv):
    def parse(text):
        return None if text.lower() == "none" else conv(text)

    return parse


def _vec3(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(_float(p) for p in parts)


def _int_list(text):
    vals = tuple(_int(p.strip()) for p in text.split(","))
    if not vals:
        raise ValueError("expected a comma-separated list of integers")
    return vals


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# key tables: key -> (parser, default)

_GRID_PHASE = {
    "grid.space.n": (_int, REQUIRED),
    "grid.space.L": (_float, REQUIRED),
    "grid.velocity.n": (_int, REQUIRED),
    "grid.velocity.L": (_float, REQUIRED),
}

_SIM_COMMON = {
    "mode": (_choice("homogeneous", "vpil"), REQUIRED),
    "sign": (_optional(_choice("gravitational", "plasma")), None),
    "dt": (_float, REQUIRED),
    "t_end": (_float, REQUIRED),
    "diagnostics_every": (_int, 1),
    "snapshot_every": (_int, 0),
    "collisions": (_bool, True),
    "field": (_bool, True),
    "limiter": (_choice(*LIMITERS), "mc"),
    "collision_substeps": (_int, 1),
    "abort_negative_fraction": (_float, 0.01),
    "collision.potential_variant": (_choice(*POTENTIAL_VARIANTS), "conservative"),
    "collision.stepper": (_choice(*STEPPERS), "explicit-euler"),
    "collision.positivity_floor": (_float, 0.0),
    "collision.c_stab": (_float, 1.0 / 6.0),
    "collision.cutoff_epsilon": (_optional(_float), None),
    "weight.m": (_float, 7.0),
    "weight.T": (_float, 1.0),
    "weight.epsilon": (_float, 1.0),
    "initial.kind": (_choice("gaussian", "random"), "gaussian"),
}

_SIM_HOMOGENEOUS = {
    "grid.radial.n": (_int, REQUIRED),
    "grid.radial.r_max": (_float, REQUIRED),
    "initial.amplitude": (_float, 1.0),
    "initial.width": (_float, 1.0),
}

_SIM_VPIL = {
    **_GRID_PHASE,
    "initial.mass": (_float, 1.0),
    "initial.x_width": (_float, 1.0),
    "initial.v_width": (_float, 1.0),
    "initial.center": (_vec3, (0.0, 0.0, 0.0)),
    "initial.drift": (_vec3, (0.0, 0.0, 0.0)),
}

_ITERATE = {
    **_GRID_PHASE,
    "sign": (_choice("gravitational", "plasma"), "gravitational"),
    "iterate.N": (_int, REQUIRED),
    "iterate.M": (_float, 1.0),
    "iterate.kappa": (_float, 1.0),
    "iterate.cutoff_radius": (_float, 4.0),
    "iterate.dt": (_optional(_float), None),
    "iterate.safety": (_float, 0.5),
    "iterate.norm_tolerance": (_float, 0.05),
    "weight.m": (_float, 4.0),
    "weight.T": (_float, 1.0),
    "initial.x_width": (_float, 1.0),
    "initial.v_width": (_float, 1.0),
    "initial.norm_fraction": (_float, 0.5),
}

_CRITERION = {
    "criterion.I0": (_float, REQUIRED),
    "criterion.Ip0": (_float, REQUIRED),
    "criterion.KE0": (_float, REQUIRED),
    "criterion.EE0": (_float, REQUIRED),
    "criterion.C1": (_float, REQUIRED),
    "criterion.m": (_float, 7.0),
    "criterion.k": (_optional(_float), None),
    "criterion.C": (_optional(_float), None),
    "criterion.ratio": (_optional(_float), None),
}

_POTENTIAL = {
    "potential.radial_points": (_int, 512),
    "potential.cartesian_points": (_int, 64),
    "potential.cartesian_extent": (_float, 6.0),
    "potential.refinement_points": (_int_list, (16, 32, 64)),
    "potential.refinement_extent": (_float, 2.0),
}


def _schema(command: str, values: dict) -> dict:
    if command == "simulate":
        mode = values.get("mode")
        extra = _SIM_HOMOGENEOUS if mode == "homogeneous" else _SIM_VPIL if mode == "vpil" else {}
        return {**_SIM_COMMON, **extra}
    if command == "iterate":
        return _ITERATE
    if command == "criterion":
        return _CRITERION
    if command == "potential-verify":
        return _POTENTIAL
    raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")


def _infer_command(raw: dict) -> str:
    if "mode" in raw:
        return "simulate"
    for prefix, command in (("iterate.", "iterate"), ("criterion.", "criterion"), ("potential.", "potential-verify")):
        if any(k.startswith(prefix) for k in raw):
            return command
    raise ConfigError("cannot tell which command this config is for; set 'mode' for simulate runs")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Typed, validated configuration for one command."""

    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def normalized(self) -> str:
        lines = [f"# normalized {self.command} configuration"]
        lines += [f"{k} = {_format(self.values[k])}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    # builders -------------------------------------------------------------

    def phase_grid(self) -> PhaseGrid:
        v = self.values
        return PhaseGrid(
            Grid3(v["grid.space.L"], v["grid.space.n"]),
            Grid3(v["grid.velocity.L"], v["grid.velocity.n"]),
        )

    def sim_config(self) -> SimConfig:
        self._expect("simulate")
        v = self.values
        homogeneous = v["mode"] == "homogeneous"
        return SimConfig(
            mode=v["mode"], dt=v["dt"], t_end=v["t_end"], sign=v["sign"],
            phase=None if homogeneous else self.phase_grid(),
            radial=RadialGrid(v["grid.radial.r_max"], v["grid.radial.n"]) if homogeneous else None,
            collision=CollisionSettings(
                potential_variant=v["collision.potential_variant"], stepper=v["collision.stepper"],
                positivity_floor=v["collision.positivity_floor"], c_stab=v["collision.c_stab"],
                cutoff_epsilon=v["collision.cutoff_epsilon"],
            ),
            weight=WeightParams(v["weight.m"], v["weight.T"], v["weight.epsilon"]),
            diagnostics_every=v["diagnostics_every"], collisions=v["collisions"], field=v["field"],
            limiter=v["limiter"], collision_substeps=v["collision_substeps"],
            snapshot_every=v["snapshot_every"], abort_negative_fraction=v["abort_negative_fraction"],
        )  # fmt: skip

    def initial_data(self, seed: int = 0) -> np.ndarray:
        """Initial density for a simulate run.

        ``initial.kind = random`` multiplies the Gaussian by independent
        uniform factors in ``[0.5, 1.5]`` drawn from ``seed``.
        """
        self._expect("simulate")
        v = self.values
        if v["mode"] == "homogeneous":
            grid = RadialGrid(v["grid.radial.r_max"], v["grid.radial.n"])
            f = gaussian_radial(grid, v["initial.amplitude"], v["initial.width"])
        else:
            f = gaussian_phase(
                self.phase_grid(), v["initial.mass"], v["initial.x_width"], v["initial.v_width"],
                v["initial.center"], v["initial.drift"],
            )  # fmt: skip
        if v["initial.kind"] == "random":
            rng = np.random.default_rng(seed)
            f = f * rng.uniform(0.5, 1.5, size=f.shape)
        return f

    def linear_config(self) -> LinearConfig:
        self._expect("iterate")
        v = self.values
        return LinearConfig(
            phase=self.phase_grid(), weight=WeightParams(m=v["weight.m"], T=v["weight.T"]),
            M=v["iterate.M"], kappa=v["iterate.kappa"], sign=v["sign"],
            cutoff_radius=v["iterate.cutoff_radius"], dt=v["iterate.dt"],
            safety=v["iterate.safety"], norm_tolerance=v["iterate.norm_tolerance"],
        )  # fmt: skip

    def criterion_input(self) -> CriterionInput:
        self._expect("criterion")
        v = self.values
        k = v["criterion.k"] if v["criterion.k"] is not None else k_of_m(v["criterion.m"])
        return CriterionInput(
            I0=v["criterion.I0"], Ip0=v["criterion.Ip0"], KE0=v["criterion.KE0"],
            EE0=v["criterion.EE0"], C1=v["criterion.C1"], k=k, m=v["criterion.m"],
        )  # fmt: skip

    def _expect(self, command):
        if self.command != command:
            raise ConfigError(f"this is a {self.command} configuration, not {command}")


def _split_lines(text: str, source: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _validate(command: str, v: dict) -> None:
    if command == "simulate":
        _check(v["dt"] > 0, "dt", "must be positive")
        _check(v["t_end"] >= 0, "t_end", "must be non-negative")
        _check(v["diagnostics_every"] >= 1, "diagnostics_every", "must be >= 1")
        _check(v["snapshot_every"] >= 0, "snapshot_every", "must be >= 0")
        _check(v["collision_substeps"] >= 1, "collision_substeps", "must be >= 1")
        _check(0 < v["abort_negative_fraction"] <= 1, "abort_negative_fraction", "must lie in (0, 1]")
        _check(v["collision.c_stab"] > 0, "collision.c_stab", "must be positive")
        _check(v["collision.positivity_floor"] >= 0, "collision.positivity_floor", "must be >= 0")
        if v["mode"] == "vpil":
            _check(v["sign"] is not None, "sign", "required when mode = vpil (gravitational or plasma)")
        else:
            _check(v["grid.radial.n"] >= 2, "grid.radial.n", "must be >= 2")
            _check(v["grid.radial.r_max"] > 0, "grid.radial.r_max", "must be positive")
    if command in ("simulate", "iterate") and "grid.space.n" in v:
        for key in ("grid.space.n", "grid.velocity.n"):
            _check(v[key] >= 2, key, "must be >= 2")
        for key in ("grid.space.L", "grid.velocity.L"):
            _check(v[key] > 0, key, "must be positive")
    if command in ("simulate", "iterate"):
        _check(v["weight.m"] > 3, "weight.m", "must exceed 3")
        _check(v["weight.T"] > 0, "weight.T", "must be positive")
    if command == "iterate":
        _check(v["iterate.N"] >= 1, "iterate.N", "must be >= 1")
        _check(v["iterate.M"] > 0, "iterate.M", "must be positive")
        _check(v["initial.norm_fraction"] > 0, "initial.norm_fraction", "must be positive")
    if command == "criterion":
        for key in ("criterion.I0", "criterion.KE0", "criterion.EE0"):
            _check(v[key] >= 0, key, "must be non-negative")
        _check(v["criterion.C1"] > 0, "criterion.C1", "must be positive")
        _check(v["criterion.m"] > 6, "criterion.m", "must exceed 6")
    if command == "potential-verify":
        _check(v["potential.radial_points"] >= 8, "potential.radial_points", "must be >= 8")
        _check(len(v["potential.refinement_points"]) >= 2, "potential.refinement_points", "needs two or more levels")


def parse_text(text: str, command: str | None = None, source: str = "<config>") -> RunConfig:
    """Parse config text for ``command`` (inferred from the keys when omitted)."""
    raw = _split_lines(text, source)
    if command is None:
        command = _infer_command(raw)
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    mode_raw = raw.get("mode")
    if command == "simulate" and mode_raw is not None:
        try:
            _choice("homogeneous", "vpil")(mode_raw)
        except ValueError as exc:
            raise ConfigError(f"mode: {exc}") from None
    schema = _schema(command, raw)
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    values = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw[key]!r} ({exc})") from None
        elif default is REQUIRED:
            raise ConfigError(f"{key}: required key missing")
        else:
            values[key] = default
    _validate(command, values)
    cfg = RunConfig(command, values)
    try:
        if command == "simulate":
            cfg.sim_config()
        elif command == "iterate":
            cfg.linear_config()
        elif command == "criterion":
            cfg.criterion_input()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config(path, command: str | None = None) -> RunConfig:
    """Read and validate a config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_text(path.read_text(encoding="utf-8"), command, source=str(path))
