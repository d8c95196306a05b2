"""Run configuration: the flat ``key = value`` format, presets and initial data.

A config file looks like::

    # comments start with '#'
    preset = perturbed-surface      # optional, supplies every default below
    formulation = surface
    N = 128
    lambda = -1
    kappa = 2
    t_end = 50
    scheme = imex

    [initial]
    amplitude = 0.1
    phi.cos(1,0) = 0.05             # inline Fourier coefficients switch off the noise
    tau.const = 1

Keys in ``[initial]`` of the form ``<field>.cos(k...)``, ``<field>.sin(k...)``
and ``<field>.const`` build the field as a finite Fourier sum. Wave vectors
have one integer per real axis (2 for n = 1, 4 for n = 2).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import ClosedForm
from .integrator import PotentialSystem, StepperConfig, SurfaceSystem
from .potential import FlowProblem, PotentialState
from .spectral import Grid, band_limited_noise, integrate, poisson_solve_flat
from .surface import SurfaceState

PRESETS = ("stationary", "perturbed-surface", "perturbed-potential-n1",
           "perturbed-potential-n2", "kappa1-surface", "constant-data-ode")

FIELDS = {"surface": ("phi", "tau"), "potential": ("varphi", "F", "u")}

_COEF = re.compile(r"^(\w+)\.(cos|sin)\(\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\)$")
_CONST = re.compile(r"^(\w+)\.const$")


@dataclass
class RunConfig:
    formulation: str = "surface"
    n_complex: int = 1
    N: int = 128
    lam: float = -1.0
    kappa: float = 2.0
    t_end: float = 1.0
    scheme: str = "imex"
    dt: float = 1e-3
    adaptive: bool = False
    cfl_safety: float = 0.9
    sample_stride: int = 10
    stop_tolerance: float = 0.0
    dt_max: float = 0.05
    residuals: bool = True
    snapshot_every: int = 0  # in samples; 0 disables snapshots
    laplacian: str = "evolving"
    initial: str = "perturbed-surface"
    amplitude: float = 0.1
    modes: int = 8
    coefficients: dict = field(default_factory=dict)
    output_dir: str = "run"
    seed: int = 0
    preset: str = ""

    def validate(self) -> "RunConfig":
        if self.formulation not in FIELDS:
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if self.formulation == "surface" and self.n_complex != 1:
            raise ConfigError("the surface formulation forces n_complex = 1")
        if self.n_complex not in (1, 2):
            raise ConfigError("n_complex must be 1 or 2")
        if not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        if self.laplacian != "evolving":
            raise ConfigError("only laplacian = evolving is implemented")
        if self.N < 8 or self.N & (self.N - 1):
            raise ConfigError(f"N must be a power of two >= 8, got {self.N}")
        if self.initial not in PRESETS and self.initial != "fourier":
            raise ConfigError(f"unknown initial data {self.initial!r}")
        for name in {k[0] for k in self.coefficients}:
            if name not in FIELDS[self.formulation]:
                raise ConfigError(f"no field {name!r} in the {self.formulation} formulation")
        for key in self.coefficients:
            if key[1] != "const" and len(key[2]) != 2 * self.n_complex:
                raise ConfigError(f"wave vector {key[2]} needs {2 * self.n_complex} entries")
        try:
            self.stepper()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def grid(self) -> Grid:
        return Grid(self.n_complex, self.N)

    def stepper(self) -> StepperConfig:
        return StepperConfig(scheme=self.scheme, dt=self.dt, adaptive=self.adaptive,
                             cfl_safety=self.cfl_safety, t_end=self.t_end,
                             sample_stride=self.sample_stride,
                             stop_tolerance=self.stop_tolerance, dt_max=self.dt_max,
                             residuals=self.residuals)


# -- presets ----------------------------------------------------------------

def preset_config(name: str) -> RunConfig:
    """The shipped experiment presets; each one backs an acceptance check."""
    base = dict(initial=name, preset=name, output_dir=f"run-{name}")
    if name == "stationary":
        cfg = RunConfig(N=32, scheme="rk4", dt=1e-3, t_end=1.0, stop_tolerance=1e-10, **base)
    elif name == "constant-data-ode":
        cfg = RunConfig(N=32, scheme="rk4", dt=1e-3, t_end=5.0, sample_stride=10, **base)
    elif name in ("perturbed-surface", "kappa1-surface"):
        cfg = RunConfig(N=128, kappa=1.0 if name == "kappa1-surface" else 2.0, t_end=50.0,
                        scheme="imex", dt=1e-4, adaptive=True, sample_stride=20,
                        stop_tolerance=1e-10, seed=1, **base)
    elif name == "perturbed-potential-n1":
        cfg = RunConfig(formulation="potential", N=128, t_end=50.0, scheme="imex", dt=1e-4,
                        adaptive=True, sample_stride=20, stop_tolerance=1e-10, seed=2, **base)
    elif name == "perturbed-potential-n2":
        cfg = RunConfig(formulation="potential", n_complex=2, N=16, t_end=1.0, scheme="imex",
                        dt=2e-3, sample_stride=5, modes=2, seed=3, **base)
    else:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return cfg


# -- parsing ----------------------------------------------------------------

_ALIASES = {"lambda": "lam"}
_TYPES = {f.name: f.type for f in fields(RunConfig)}
_TOP_KEYS = {f.name for f in fields(RunConfig)} - {"coefficients", "amplitude", "modes"}
_INITIAL_KEYS = {"amplitude", "modes", "preset", "seed"}


def _convert(key: str, text: str, line: int):
    kind = _TYPES[key]
    try:
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return low in ("true", "yes", "1")
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}", line) from None
    return text


def parse_config(text: str) -> RunConfig:
    """Parse the flat key-value format; errors carry the offending line number."""
    entries: list[tuple[int, str, str, str]] = []
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in ("initial",):
                raise ConfigError(f"unknown section {line!r}", lineno)
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in {line!r}", lineno)
        entries.append((lineno, section, key, value))

    preset = next(((n, v) for n, sec, k, v in entries if k == "preset" and sec == ""), None)
    if preset:
        try:
            cfg = preset_config(preset[1])
        except ConfigError as exc:
            raise ConfigError(str(exc), preset[0]) from None
    else:
        cfg = RunConfig()
    if not preset:
        cfg.initial = "fourier"
    updates: dict = {}
    coefficients: dict = {}
    for lineno, section, key, value in entries:
        if section == "":
            key = _ALIASES.get(key, key)
            if key not in _TOP_KEYS:
                raise ConfigError(f"unknown key {key!r}", lineno)
            if key != "preset":
                updates[key] = _convert(key, value, lineno)
            continue
        if key in _INITIAL_KEYS:
            updates["initial" if key == "preset" else key] = _convert(
                "initial" if key == "preset" else key, value, lineno)
            continue
        number = _convert("lam", value, lineno)
        if m := _CONST.match(key):
            coefficients[(m.group(1), "const", ())] = number
        elif m := _COEF.match(key):
            wave = tuple(int(v) for v in m.group(3).split(","))
            coefficients[(m.group(1), m.group(2), wave)] = number
        else:
            raise ConfigError(f"unknown initial-data key {key!r}", lineno)
    if coefficients:
        updates["initial"] = "fourier"
        updates["coefficients"] = coefficients
    try:
        cfg = replace(cfg, **updates)
        return cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: RunConfig) -> str:
    """Render a config in the key-value format; ``parse_config`` inverts it."""
    lines = [f"preset = {cfg.preset}"] if cfg.preset else []
    for f in fields(RunConfig):
        if f.name in ("coefficients", "amplitude", "modes", "initial", "preset"):
            continue
        value = getattr(cfg, f.name)
        text = repr(value) if isinstance(value, float) else str(value).lower() if isinstance(value, bool) else str(value)
        lines.append(f"{'lambda' if f.name == 'lam' else f.name} = {text}")
    lines += ["", "[initial]", f"amplitude = {cfg.amplitude!r}", f"modes = {cfg.modes}"]
    if cfg.initial != "fourier":
        lines.append(f"preset = {cfg.initial}")
    for (name, kind, wave), value in cfg.coefficients.items():
        args = "" if kind == "const" else "(" + ",".join(str(k) for k in wave) + ")"
        lines.append(f"{name}.{kind}{args} = {value!r}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


# -- initial data -----------------------------------------------------------

def fourier_field(grid: Grid, terms: dict) -> np.ndarray:
    """Sum of const + a cos(2 pi k.x / L) + b sin(2 pi k.x / L) terms."""
    out = grid.zeros()
    for (kind, wave), value in terms.items():
        if kind == "const":
            out += value
            continue
        phase = sum(2.0 * np.pi * k * x / grid.period for k, x in zip(wave, grid.coords))
        out += value * (np.cos(phase) if kind == "cos" else np.sin(phase))
    return out


def _fourier_fields(cfg: RunConfig, grid: Grid) -> dict:
    per: dict = {}
    for (name, kind, wave), value in cfg.coefficients.items():
        per.setdefault(name, {})[(kind, wave)] = value
    return {name: fourier_field(grid, terms) for name, terms in per.items()}


def _potential_from_laplacian(grid: Grid, rng, cfg: RunConfig) -> np.ndarray:
    """Potential whose flat Laplacian is band-limited noise of sup-norm ``amplitude``."""
    noise = band_limited_noise(grid, rng, cfg.modes, cfg.amplitude)
    return poisson_solve_flat(grid, noise)


def build_surface_state(cfg: RunConfig) -> SurfaceState:
    g = cfg.grid()
    name = cfg.initial
    if name == "fourier":
        given = _fourier_fields(cfg, g)
        phi = given.get("phi", g.zeros())
        tau = given.get("tau", g.constant(-cfg.lam))
    elif name in ("stationary", "constant-data-ode"):
        phi = g.zeros()
        tau = g.constant(-cfg.lam if name == "stationary" else 0.5)
    elif name in ("perturbed-surface", "kappa1-surface"):
        rng = np.random.default_rng(cfg.seed)
        phi = band_limited_noise(g, rng, cfg.modes, cfg.amplitude)
        phi = phi - np.log(integrate(g, np.exp(phi)) / g.volume)
        tau = 1.0 + band_limited_noise(g, rng, cfg.modes, cfg.amplitude)
        # class matched: int tau e^phi = -lambda V
        tau = tau * (-cfg.lam * g.volume / integrate(g, tau, np.exp(phi)))
    else:
        raise ConfigError(f"initial data {name!r} does not apply to the surface formulation")
    return SurfaceState(g, phi, tau, lam=cfg.lam, kappa=cfg.kappa)


def build_potential(cfg: RunConfig) -> tuple[FlowProblem, PotentialState]:
    g = cfg.grid()
    name = cfg.initial
    if name == "fourier":
        given = _fourier_fields(cfg, g)
        varphi, F, u = (given.get(k, g.zeros()) for k in ("varphi", "F", "u"))
        u = u - np.mean(u)
    elif name in ("stationary", "constant-data-ode"):
        varphi, F, u = g.zeros(), g.zeros(), g.zeros()
        if name == "constant-data-ode":
            F = g.constant(0.5)
    elif name.startswith("perturbed"):
        rng = np.random.default_rng(cfg.seed)
        varphi = _potential_from_laplacian(g, rng, cfg)
        F = _potential_from_laplacian(g, rng, cfg)
        u = _potential_from_laplacian(g, rng, cfg)
    else:
        raise ConfigError(f"initial data {name!r} does not apply to the potential formulation")
    alpha0 = ClosedForm(g, -cfg.lam, u)
    problem = FlowProblem.create(g, cfg.lam, cfg.kappa, alpha0)
    return problem, PotentialState(g, varphi, F, lam=cfg.lam, kappa=cfg.kappa)


def build(cfg: RunConfig):
    """(system, initial state) ready for :func:`lyzflow.integrator.run`."""
    if cfg.formulation == "surface":
        return SurfaceSystem(cfg.grid(), cfg.lam, cfg.kappa), build_surface_state(cfg)
    problem, state = build_potential(cfg)
    return PotentialSystem(problem), state
