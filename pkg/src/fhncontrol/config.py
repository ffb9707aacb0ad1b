"""Experiment configuration: one flat dataclass, INI-style persistence,
and the named presets used by the command line.

Serialization keeps floats in repr form so a save/load round trip is
bit-for-bit exact.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace

PRESETS = ("example1-unconstrained", "example1-box", "example1-sparse",
           "example2-terminal", "example2-sparse", "tikhonov-sweep",
           "forward-only")

_INF = float("inf")


@dataclass
class OcpConfig:
    # geometry
    length: float = 100.0
    height: float = 5.0
    nx: int = 200
    ny: int = 10
    # physics
    c1: float = 9.0
    c2: float = 0.02
    c3: float = 5.0
    epsilon: float = 0.1
    d_activator: float = 1.0
    d_inhibitor: float = 1.0
    v_max: float = 16.0
    # time
    t_final: float = 1.0
    n_steps: int = 20
    # initial activator pulse (nodal values; inhibitor starts at zero)
    pulse_start: float = 0.0
    pulse_end: float = 0.1
    pulse_amplitude: float = 1.0
    # objective
    track_y: float = 0.0
    track_z: float = 0.0
    terminal_y: float = 0.0
    terminal_z: float = 0.0
    tikhonov: float = 1e-5
    l1_weight: float = 0.0
    target_mode: str = "space-time"   # or "terminal"
    # control bounds
    lower: float = -_INF
    upper: float = _INF
    # discretization and solver settings
    sigma_interior: float = 6.0
    sigma_boundary: float = 12.0
    newton_tol_abs: float = 1e-10
    newton_tol_rel: float = 1e-12
    newton_max_iter: int = 25
    newton_damping: bool = True
    linear_solver: str = "direct"
    # optimizer settings
    beta_variant: str = "hager-zhang"
    tol_gradient: float = 1e-3
    tol_objective: float = 1e-5
    max_iterations: int = 2000
    restart_every: int = 50
    initial_step: float = 1.0
    gradient_norm: str = "weighted"
    # experiment bookkeeping
    preset: str = ""
    output_dir: str = "out"
    coarse: bool = False
    profile_time: float = 0.75
    sweep_values: tuple = ()
    sweep_reference: float = 1e-10

    def validate(self):
        if self.length <= 0 or self.height <= 0 or self.nx < 1 or self.ny < 1:
            raise ValueError("invalid channel geometry")
        if self.t_final <= 0 or self.n_steps < 1:
            raise ValueError("invalid time grid")
        if self.lower > self.upper:
            raise ValueError("control bounds are inverted")
        if self.target_mode not in ("space-time", "terminal"):
            raise ValueError(f"unknown target mode {self.target_mode!r}")
        return self


_SECTIONS = {
    "geometry": ("length", "height", "nx", "ny"),
    "physics": ("c1", "c2", "c3", "epsilon", "d_activator", "d_inhibitor", "v_max"),
    "time": ("t_final", "n_steps"),
    "initial": ("pulse_start", "pulse_end", "pulse_amplitude"),
    "objective": ("track_y", "track_z", "terminal_y", "terminal_z",
                  "tikhonov", "l1_weight", "target_mode"),
    "bounds": ("lower", "upper"),
    "solver": ("sigma_interior", "sigma_boundary", "newton_tol_abs",
               "newton_tol_rel", "newton_max_iter", "newton_damping",
               "linear_solver"),
    "optimizer": ("beta_variant", "tol_gradient", "tol_objective",
                  "max_iterations", "restart_every", "initial_step",
                  "gradient_norm"),
    "experiment": ("preset", "output_dir", "coarse", "profile_time",
                   "sweep_values", "sweep_reference"),
}

_TYPES = {f.name: f.type for f in fields(OcpConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return str(value)


def _parse(name: str, text: str):
    kind = _TYPES[name]
    if kind == "bool":
        return text.strip().lower() in ("true", "1", "yes")
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "tuple":
        text = text.strip()
        return tuple(float(v) for v in text.split(",")) if text else ()
    return text.strip()


def save_config(config: OcpConfig, path) -> None:
    parser = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        parser[section] = {n: _format(getattr(config, n)) for n in names}
    with open(path, "w") as fh:
        parser.write(fh)


def load_config(path) -> OcpConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for name, text in parser[section].items():
            if name not in _SECTIONS[section]:
                raise ValueError(f"unknown key {name!r} in [{section}]")
            values[name] = _parse(name, text)
    return OcpConfig(**values).validate()


def _example1_base(**overrides) -> OcpConfig:
    base = dict(nx=200, ny=10, v_max=16.0, track_y=1.0, track_z=1.0,
                tikhonov=1e-5, target_mode="space-time", profile_time=0.75,
                pulse_start=0.0, pulse_end=0.1, pulse_amplitude=1.0)
    base.update(overrides)
    return OcpConfig(**base)


def _example2_base(**overrides) -> OcpConfig:
    base = dict(nx=800, ny=40, v_max=16.0, terminal_y=1.0, terminal_z=1.0,
                tikhonov=1e-5, target_mode="terminal", profile_time=1.0,
                pulse_start=2.0, pulse_end=2.2, pulse_amplitude=1.0,
                lower=0.0, upper=0.2)
    base.update(overrides)
    return OcpConfig(**base)


def make_preset(name: str) -> OcpConfig:
    """Named experiment bundles; raises ValueError for unknown names."""
    if name == "example1-unconstrained":
        config = _example1_base()
    elif name == "example1-box":
        config = _example1_base(lower=-0.2, upper=0.0)
    elif name == "example1-sparse":
        config = _example1_base(lower=-0.2, upper=0.0, v_max=32.0,
                                l1_weight=1.0 / 100.0)
    elif name == "example2-terminal":
        config = _example2_base()
    elif name == "example2-sparse":
        config = _example2_base(v_max=64.0, l1_weight=1.0 / 200.0)
    elif name == "tikhonov-sweep":
        config = _example2_base(v_max=64.0, l1_weight=1.0 / 200.0,
                                sweep_values=tuple(10.0**-k for k in range(10)),
                                sweep_reference=1e-10)
    elif name == "forward-only":
        config = _example1_base()
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    config.preset = name
    return config.validate()


def apply_coarse(config: OcpConfig) -> OcpConfig:
    """Desk-scale reduction: channel-length examples drop to half their
    full resolution, the regularization sweep keeps six decades plus the
    reference. Trend checks survive; absolute values shift."""
    config = replace(config, coarse=True)
    if config.preset.startswith("example2") or config.preset == "tikhonov-sweep":
        config = replace(config, nx=200, ny=10)
        if config.preset == "tikhonov-sweep":
            config = replace(
                config, sweep_values=tuple(10.0**-k for k in range(1, 7)))
    else:
        config = replace(config, nx=100, ny=5, tol_objective=1e-4,
                         max_iterations=400)
    return config.validate()
