"""INI-style experiment configuration.

Sections: [grid] [system] [ladder] [time] [indicators] [output].
Unknown sections or keys are hard errors (no silent typos); every
violated constraint is reported with its key path.  Potentials and
orbitals are small "name key=value ..." expressions sampled onto the
grid at build time.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grids import Field, Grid, make_grid, normalize

__all__ = ["ConfigError", "ExperimentConfig", "parse_config"]

DEFAULT_DT = 1e-3
DEFAULT_XI = 0.2
DEFAULT_SEED = 0
DEFAULT_CAP = 200_000

_KNOWN_KEYS = {
    "grid": {"dim", "points", "length"},
    "system": {"mode", "v1", "v2", "v12", "u0", "v0", "w0", "c1",
               "a1", "a2", "a12", "a", "b", "kinetic", "seed",
               "potential", "n_values", "beta_values"},
    "ladder": {"entries", "cap", "ratio_fixed"},
    "time": {"t", "dt", "sample_every"},
    "indicators": {"xi", "probe_time"},
    "output": {"dir", "snapshots"},
}

_MODES = ("mean_field", "hartree", "gross_pitaevskii", "rabi", "spin1", "scattering")


class ConfigError(ValueError):
    pass


def _parse_expr(text: str, path: str, errors: list[str]) -> tuple[str, dict[str, float]]:
    parts = text.split()
    if not parts:
        errors.append(f"{path}: empty expression")
        return "zero", {}
    name, kwargs = parts[0], {}
    for tok in parts[1:]:
        key, eq, val = tok.partition("=")
        if not eq:
            errors.append(f"{path}: expected key=value, got {tok!r}")
            continue
        try:
            kwargs[key] = float(val)
        except ValueError:
            errors.append(f"{path}: non-numeric value {val!r} for {key!r}")
    return name, kwargs


def _potential_values(grid: Grid, name: str, kw: dict[str, float]) -> np.ndarray:
    """Sample an even periodic potential on the grid."""
    L = grid.length_per_axis
    d = grid.signed_coordinates()[0]
    if name == "zero":
        return np.zeros(grid.shape)
    if name == "cosine":
        return kw.get("amp", 1.0) * np.cos(2.0 * np.pi * kw.get("k", 1.0) * d / L)
    if name == "gaussian":
        sigma = kw.get("sigma", 0.5)
        out = np.zeros(grid.shape)
        for shift in (-L, 0.0, L):
            out += np.exp(-((d + shift) ** 2) / (2.0 * sigma**2))
        return kw.get("amp", 1.0) * out
    if name == "box":
        return kw.get("amp", 1.0) * (np.abs(d) <= kw.get("radius", 1.0)).astype(float)
    raise ConfigError(f"unknown potential form {name!r}")


def _orbital_values(grid: Grid, name: str, kw: dict[str, float]) -> np.ndarray:
    L = grid.length_per_axis
    x = grid.coordinate_arrays()[0]
    if name == "zero":
        return np.zeros(grid.shape, dtype=complex)
    if name == "uniform":
        return np.ones(grid.shape, dtype=complex)
    if name == "mode":
        return np.exp(2j * np.pi * kw.get("k", 1.0) * x / L)
    if name == "cospack":
        return (1.0 + kw.get("eps", 0.3)
                * np.cos(2.0 * np.pi * kw.get("k", 1.0) * x / L)).astype(complex)
    if name == "gaussian":
        x0 = kw.get("x0", L / 2.0)
        sigma = kw.get("sigma", L / 10.0)
        out = np.zeros(grid.shape)
        for shift in (-L, 0.0, L):
            out += np.exp(-((x - x0 + shift) ** 2) / (2.0 * sigma**2))
        phase = np.exp(2j * np.pi * kw.get("k", 0.0) * x / L)
        return out * phase
    raise ConfigError(f"unknown orbital form {name!r}")


@dataclass
class ExperimentConfig:
    """Validated configuration for sweep / effective / scattering runs."""

    dim: int = 1
    points: int = 10
    length: float = 2.0 * math.pi
    mode: str = "mean_field"
    v1: str = "zero"
    v2: str = "zero"
    v12: str = "zero"
    u0: str = "uniform"
    v0: str = "uniform"
    w0: str = "zero"
    c1: float = 0.5
    a1: float = 0.0
    a2: float = 0.0
    a12: float = 0.0
    a: float = 0.0
    b_field: float = 0.0
    kinetic: str = "spectral"
    seed: int = DEFAULT_SEED
    ladder: list[tuple[int, int]] = dc_field(default_factory=list)
    cap: int = DEFAULT_CAP
    ratio_fixed: bool = True
    T: float = 0.5
    dt: float = DEFAULT_DT
    sample_every: int = 50
    xi: float = DEFAULT_XI
    probe_time: float = 0.5
    out_dir: str = "out"
    snapshots: int = 0
    scatter_potential: str = "box amp=2 radius=1"
    n_values: list[int] = dc_field(default_factory=lambda: [8, 16, 32])
    beta_values: list[float] = dc_field(default_factory=lambda: [1.0])
    echo: dict = dc_field(default_factory=dict, repr=False)

    def build_grid(self) -> Grid:
        return make_grid(self.dim, self.points, self.length)

    def potential_field(self, which: str) -> Field:
        expr = {"v1": self.v1, "v2": self.v2, "v12": self.v12}[which]
        name, kw = _parse_expr(expr, f"[system] {which}", [])
        grid = self.build_grid()
        return Field(grid, _potential_values(grid, name, kw))

    def orbital_field(self, which: str) -> Field:
        expr = {"u0": self.u0, "v0": self.v0, "w0": self.w0}[which]
        name, kw = _parse_expr(expr, f"[system] {which}", [])
        grid = self.build_grid()
        vals = _orbital_values(grid, name, kw)
        if name == "zero":
            return Field(grid, vals)
        return normalize(Field(grid, vals))


def _ladder_dim(M: int, n1: int, n2: int) -> int:
    return math.comb(M + n1 - 1, n1) * math.comb(M + n2 - 1, n2)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate an experiment document.

    All violations are collected and raised together, each tagged with
    its section/key path.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str  # keep keys case-sensitive; grammar is lowercase
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed document: {exc}") from exc

    errors: list[str] = []
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                errors.append(f"unknown key [{section}] {key}")

    cfg = ExperimentConfig()

    def read(section, key, cast, default, check=None, describe=""):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                val = cast(raw)
            except (ValueError, TypeError):
                errors.append(f"[{section}] {key}: cannot parse {raw!r}{describe}")
                return default
        else:
            val = default
        if check is not None and val is not None:
            msg = check(val)
            if msg:
                errors.append(f"[{section}] {key}: {msg}")
        return val

    cfg.dim = read("grid", "dim", int, 1, lambda v: None if v in (1, 2, 3) else f"dim must be 1..3, got {v}")
    cfg.points = read("grid", "points", int, cfg.points,
                      lambda v: None if v >= 4 else f"need at least 4 points, got {v}")
    cfg.length = read("grid", "length", float, cfg.length,
                      lambda v: None if v > 0 else f"length must be positive, got {v}")

    cfg.mode = read("system", "mode", str, cfg.mode,
                    lambda v: None if v in _MODES else f"unknown mode {v!r}")
    for key in ("v1", "v2", "v12", "u0", "v0", "w0"):
        val = read("system", key, str, getattr(cfg, key))
        name, kw = _parse_expr(val, f"[system] {key}", errors)
        known = {"zero", "cosine", "gaussian", "box", "uniform", "mode", "cospack"}
        if name not in known:
            errors.append(f"[system] {key}: unknown form {name!r}")
        setattr(cfg, key, val)
    cfg.c1 = read("system", "c1", float, cfg.c1,
                  lambda v: None if 0.0 < v < 1.0 else f"c1 must lie in (0,1), got {v}")
    cfg.a1 = read("system", "a1", float, cfg.a1)
    cfg.a2 = read("system", "a2", float, cfg.a2)
    cfg.a12 = read("system", "a12", float, cfg.a12)
    cfg.a = read("system", "a", float, cfg.a)
    cfg.b_field = read("system", "b", float, cfg.b_field)
    cfg.kinetic = read("system", "kinetic", str, cfg.kinetic,
                       lambda v: None if v in ("spectral", "stencil") else f"unknown kinetic {v!r}")
    cfg.seed = read("system", "seed", int, cfg.seed,
                    lambda v: None if v >= 0 else "seed must be nonnegative")
    cfg.scatter_potential = read("system", "potential", str, cfg.scatter_potential)

    def int_list(raw: str) -> list[int]:
        return [int(tok) for tok in raw.replace(";", " ").split()]

    def float_list(raw: str) -> list[float]:
        return [float(tok) for tok in raw.replace(";", " ").split()]

    cfg.n_values = read("system", "n_values", int_list, cfg.n_values,
                        lambda v: None if all(n >= 2 for n in v) else "all N must be >= 2")
    cfg.beta_values = read("system", "beta_values", float_list, cfg.beta_values,
                           lambda v: None if all(0 < b <= 1 for b in v) else "beta must lie in (0,1]")

    def ladder_list(raw: str) -> list[tuple[int, int]]:
        out = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            n1, n2 = (int(tok) for tok in chunk.split(","))
            out.append((n1, n2))
        return out

    cfg.ladder = read("ladder", "entries", ladder_list, cfg.ladder)
    cfg.cap = read("ladder", "cap", int, cfg.cap,
                   lambda v: None if v > 0 else "cap must be positive")
    cfg.ratio_fixed = read("ladder", "ratio_fixed", lambda r: r.lower() in ("1", "true", "yes"),
                           cfg.ratio_fixed)
    for (n1, n2) in cfg.ladder:
        if n1 < 1 or n2 < 1:
            errors.append(f"[ladder] entries: particle numbers must be >= 1, got ({n1},{n2})")
            continue
        dim = _ladder_dim(cfg.points, n1, n2)
        if dim > cfg.cap:
            errors.append(
                f"[ladder] entries: ({n1},{n2}) has basis dimension {dim} > cap {cfg.cap}"
            )
    if cfg.ratio_fixed and len(cfg.ladder) >= 2:
        ratios = {round(n1 / (n1 + n2), 12) for (n1, n2) in cfg.ladder if n1 >= 1 and n2 >= 1}
        if len(ratios) > 1:
            errors.append("[ladder] entries: population ratio varies but ratio_fixed is on")

    cfg.T = read("time", "t", float, cfg.T,
                 lambda v: None if v > 0 else f"t must be positive, got {v}")
    cfg.dt = read("time", "dt", float, cfg.dt,
                  lambda v: None if v > 0 else f"dt must be positive, got {v}")
    cfg.sample_every = read("time", "sample_every", int, cfg.sample_every,
                            lambda v: None if v >= 1 else "sample_every must be >= 1")
    if cfg.dt > cfg.T:
        errors.append("[time] dt: dt exceeds t")

    cfg.xi = read("indicators", "xi", float, cfg.xi,
                  lambda v: None if v > 0 else f"xi must be positive, got {v}")
    cfg.probe_time = read("indicators", "probe_time", float, cfg.T)
    if cfg.probe_time > cfg.T + cfg.dt:
        errors.append("[indicators] probe_time: beyond the final time")

    cfg.out_dir = read("output", "dir", str, cfg.out_dir)
    cfg.snapshots = read("output", "snapshots", int, cfg.snapshots,
                         lambda v: None if v >= 0 else "snapshots must be >= 0")

    # zero potentials are legal; zero initial orbitals are not
    required_orbitals = ("u0", "v0", "w0") if cfg.mode == "spin1" else ("u0", "v0")
    for key in required_orbitals:
        if key == "w0":
            continue  # the third spinor component may start empty
        if getattr(cfg, key).split()[0] == "zero":
            errors.append(f"[system] {key}: initial orbital must be nonzero")

    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))

    cfg.echo = {s: dict(parser[s]) for s in parser.sections()}
    return cfg
