"""INI run configuration: parsing, validation, serialization and object building."""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import coeffs
from .grid import Boundary, Grid, load_field
from .manufactured import MANUFACTURED


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


def _floats(text):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return tuple(float(p) for p in parts)


def _opt_float(text):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# (section, key) -> (attribute, parser)
SCHEMA = {
    ("model", "regime"): ("regime", str),
    ("model", "a"): ("a", float),
    ("model", "b"): ("b", float),
    ("model", "c"): ("c", float),
    ("model", "epsilon"): ("epsilon", float),
    ("model", "eps_ladder"): ("eps_ladder", _floats),
    ("model", "nu"): ("nu", float),
    ("model", "mu"): ("mu", float),
    ("model", "mu_ladder"): ("mu_ladder", _floats),
    ("model", "nu_ladder"): ("nu_ladder", _floats),
    ("grid", "nx"): ("nx", int),
    ("grid", "ny"): ("ny", int),
    ("grid", "lx"): ("lx", float),
    ("grid", "ly"): ("ly", float),
    ("grid", "boundary_kind"): ("boundary_kind", str),
    ("flux", "d"): ("d", float),
    ("flux", "u_thr"): ("u_thr", float),
    ("flux", "g_thr"): ("g_thr", float),
    ("flux", "ramp_width"): ("ramp_width", float),
    ("forcing", "u_peak"): ("u_peak", float),
    ("forcing", "m_peak"): ("m_peak", float),
    ("forcing", "mean_flow"): ("mean_flow", _floats),
    ("forcing", "direction"): ("direction", _floats),
    ("forcing", "theta_alpha"): ("theta_alpha", float),
    ("forcing", "theta_omega"): ("theta_omega", float),
    ("forcing", "modulation"): ("modulation", float),
    ("forcing", "freeze"): ("freeze", _bool),
    ("forcing", "freeze_level"): ("freeze_level", _opt_float),
    ("forcing", "freeze_width"): ("freeze_width", float),
    ("forcing", "spring_neap"): ("spring_neap", float),
    ("forcing", "tide_period"): ("tide_period", float),
    ("data", "z0"): ("z0", str),
    ("data", "g"): ("g", str),
    ("time", "T_final"): ("T_final", float),
    ("time", "dt"): ("dt", _opt_float),
    ("time", "store_every"): ("store_every", int),
    ("cell", "t"): ("cell_t", float),
    ("cell", "tau"): ("cell_tau", float),
    ("cell", "theta_steps"): ("theta_steps", int),
    ("cell", "theta_scheme"): ("theta_scheme", str),
    ("cell", "tol_periodic"): ("tol_periodic", float),
    ("cell", "max_periods"): ("max_periods", int),
    ("cell", "g_thr_tilde"): ("g_thr_tilde", _opt_float),
    ("validate", "sample_density"): ("sample_density", int),
    ("twoscale", "corrector_source"): ("corrector_source", str),
    ("run", "out"): ("out", str),
    ("run", "seed"): ("seed", int),
}


@dataclass
class RunConfig:
    """Flat run configuration; every field maps to one INI key (see docs/config.md)."""

    regime: str = "short"
    a: float = 1.0
    b: float = 1.0
    c: float = 0.5
    epsilon: float = 1.0 / 16.0
    eps_ladder: tuple = (0.125, 0.0625, 0.03125, 0.015625)
    nu: float = 0.0
    mu: float = 0.0
    mu_ladder: tuple = ()
    nu_ladder: tuple = ()
    nx: int = 32
    ny: int = 32
    lx: float = 1.0
    ly: float = 1.0
    boundary_kind: str = "robin"
    d: float = 5.0
    u_thr: float = 1.0
    g_thr: float = 2.5
    ramp_width: float = 0.8
    u_peak: float = 0.6
    m_peak: float = 0.15
    mean_flow: tuple = (1.4, 0.0)
    direction: tuple = (1.0, 0.0)
    theta_alpha: float = 0.1
    theta_omega: float = 0.4
    modulation: float = 0.1
    freeze: bool = True
    freeze_level: Optional[float] = None
    freeze_width: float = 0.5
    spring_neap: float = 0.15
    tide_period: float = 1.0
    z0: str = "gaussian(0.5, 0.5, 0.15, 1.0)"
    g: str = "zero"
    T_final: float = 1.0
    dt: Optional[float] = None
    store_every: int = 16
    cell_t: float = 0.0
    cell_tau: float = 0.0
    theta_steps: int = 128
    theta_scheme: str = "euler"
    tol_periodic: float = 1e-9
    max_periods: int = 500
    g_thr_tilde: Optional[float] = None
    sample_density: int = 64
    corrector_source: str = "solve"
    out: str = "out"
    seed: int = 0

    # -- building -----------------------------------------------------------

    def flux_law(self):
        return coeffs.FluxLaw(d=self.d, u_thr=self.u_thr, g_thr=self.g_thr, ramp_width=self.ramp_width)

    def forcing(self):
        mod = None
        if self.modulation and self.regime != "long":
            mod = coeffs.BumpModulation(self.modulation, self.lx, self.ly)
        return coeffs.TidalForcing(
            regime=self.regime,
            u_peak=self.u_peak,
            m_peak=self.m_peak,
            mean_flow=self.mean_flow,
            direction=self.direction,
            theta_alpha=self.theta_alpha,
            theta_omega=self.theta_omega,
            spatial_modulation=mod,
            freeze=self.freeze,
            freeze_level=self.u_thr if self.freeze_level is None else self.freeze_level,
            freeze_width=self.freeze_width,
            spring_neap=self.spring_neap,
            tide_period=self.tide_period,
            extent=(self.lx, self.ly),
        )

    def constants(self, epsilon=None):
        return coeffs.ModelConstants(
            a=self.a, b=self.b, c=self.c,
            epsilon=self.epsilon if epsilon is None else epsilon,
            nu=self.nu, mu=self.mu,
        )

    def grid(self):
        return Grid(self.nx, self.ny, self.lx, self.ly, self.boundary_kind)

    def initial_field(self, grid: Grid):
        name, args = _preset(self.z0)
        if name == "zero":
            _arity(name, args, 0)
            return grid.zeros()
        if name == "gaussian":
            from .eps_solver import gaussian_bump

            _arity(name, args, 4)
            return gaussian_bump(grid, (args[0], args[1]), args[2], args[3])
        if name in MANUFACTURED:
            return MANUFACTURED[name](*args).on_grid(grid, 0.0)
        if name == "file":
            dims, vals = load_field(self._path_arg)
            if dims[:2] != grid.shape:
                raise ConfigError(f"[data] z0: file holds a {dims[0]}x{dims[1]} field, grid is {grid.shape}")
            return vals
        raise ConfigError(f"[data] z0: unknown preset {self.z0!r}")

    def boundary_data(self, grid: Grid):
        """A Boundary, a callable of t, or None (zero)."""
        name, args = _preset(self.g)
        if name == "zero":
            _arity(name, args, 0)
            return None
        if name == "constant":
            _arity(name, args, 1)
            return Boundary.constant(grid, args[0])
        if name == "trace-of":
            sol = MANUFACTURED[self._trace_id](*args)
            return lambda t: sol.robin_trace(grid, t)
        raise ConfigError(f"[data] g: unknown preset {self.g!r}")

    @property
    def _path_arg(self):
        return self.z0.strip()[len("file:"):].strip() if self.z0.strip().startswith("file:") else self.z0.strip()

    @property
    def _trace_id(self):
        m = re.match(r"\s*trace-of\(\s*([\w-]+)", self.g)
        return m.group(1)

    def validate(self):
        """Rebuild every domain object so their own invariants run."""
        try:
            if self.regime not in coeffs.REGIMES:
                raise ValueError(f"regime must be one of {coeffs.REGIMES}")
            if len(self.mean_flow) != 2 or len(self.direction) != 2:
                raise ValueError("mean_flow and direction take two components")
            if self.modulation < 0 or self.modulation >= 1:
                raise ValueError("modulation must lie in [0, 1)")
            law = self.flux_law()
            forcing = self.forcing()
            consts = self.constants()
            coeffs.check_constants(consts, forcing)
            grid = self.grid()
            self.initial_field(grid)
            self.boundary_data(grid)
            if not self.T_final >= 0:
                raise ValueError("T_final must be nonnegative")
            if self.dt is not None and not self.dt > 0:
                raise ValueError("dt must be positive")
            if self.store_every < 1:
                raise ValueError("store_every must be >= 1")
            if self.theta_steps < 32:
                raise ValueError("theta_steps must be at least 32")
            if self.theta_scheme not in ("euler", "cn"):
                raise ValueError("theta_scheme must be euler or cn")
            if self.sample_density < 16:
                raise ValueError("sample_density must be at least 16")
            if self.corrector_source not in ("solve", "synthetic"):
                raise ValueError("corrector_source must be solve or synthetic")
            for name in ("eps_ladder", "mu_ladder", "nu_ladder"):
                vals = getattr(self, name)
                if any(v <= 0 for v in vals):
                    raise ValueError(f"{name} entries must be positive")
            if any(not 0 < e < 1 for e in self.eps_ladder):
                raise ValueError("eps_ladder entries must lie in (0, 1)")
        except ConfigError:
            raise
        except (ValueError, TypeError, OSError, KeyError) as err:
            raise ConfigError(str(err)) from err
        return law, forcing, consts, grid

    # -- text ---------------------------------------------------------------

    def to_ini(self) -> str:
        sections: dict = {}
        for (sec, key), (attr, _) in SCHEMA.items():
            sections.setdefault(sec, []).append(f"{key} = {_fmt(getattr(self, attr))}")
        return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())


def _preset(text):
    text = text.strip()
    if text.startswith("file:"):
        return "file", ()
    m = re.fullmatch(r"([\w-]+)\s*(?:\((.*)\))?", text)
    if not m:
        raise ConfigError(f"cannot parse preset {text!r}")
    name, inner = m.group(1), m.group(2)
    if name == "trace-of":
        parts = [p.strip() for p in (inner or "").split(",") if p.strip()]
        if not parts or parts[0] not in MANUFACTURED:
            raise ConfigError(f"trace-of needs one of {sorted(MANUFACTURED)}")
        return name, tuple(float(p) for p in parts[1:]) or (1.0,)
    try:
        args = _floats(inner) if inner else ()
    except ValueError as err:
        raise ConfigError(f"bad arguments in {text!r}") from err
    if name in MANUFACTURED and not args:
        args = (1.0,)
    return name, args


def _arity(name, args, n):
    if len(args) != n:
        raise ConfigError(f"preset {name} takes {n} arguments, got {len(args)}")


def parse_config(text: str, source="<config>") -> RunConfig:
    """Parse INI text; unknown sections or keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"{source}: {err}") from err
    known_sections = {s for s, _ in SCHEMA}
    values = {}
    for sec in cp.sections():
        if sec not in known_sections:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if (sec, key) not in SCHEMA:
                raise ConfigError(f"{source}: unknown key '{key}' in [{sec}]")
            attr, conv = SCHEMA[(sec, key)]
            try:
                values[attr] = conv(raw)
            except ValueError as err:
                raise ConfigError(f"{source}: [{sec}] {key} = {raw!r}: {err}") from err
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err
    return parse_config(text, source=str(path))


def config_fields():
    """Names of all RunConfig fields (used by the docs check)."""
    return [f.name for f in fields(RunConfig)]
