"""Split-step integration of the effective condensate systems.

Four couplings are supported through one Strang-split stepper:

* ``hartree``          -- two components with convolution nonlinearities
                          (V1*|u|^2) u + c2 (V12*|v|^2) u and the mirror,
* ``gross_pitaevskii`` -- local cubic system with couplings 8 pi a_j and
                          cross coupling c_j 8 pi a_12,
* ``rabi``             -- equal-species cubic term 8 pi a (|u|^2+|v|^2)
                          plus the linear population transfer B(t),
* ``spin1``            -- three components with spin-exchange terms.

One step is: half potential flow, full kinetic flow (diagonal in the
transform basis), half potential flow.  For hartree/gp the potential
substep is an exact phase multiplication because the densities are
invariant under it; for rabi the pointwise 2x2 rotation is applied
exactly; for spin1 the exchange terms require one explicit midpoint
substep (second order, checked against a norm-drift tolerance but never
renormalized).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import math
from typing import Callable, Sequence

import numpy as np

from .grids import Field, Grid, inner, l2_norm, periodic_convolve, save_field

__all__ = [
    "CouplingSpec",
    "OrbitalState",
    "Trajectory",
    "EffectiveError",
    "step",
    "evolve",
    "mass",
    "magnetization",
    "kinetic_energy",
    "gp_energy",
    "hartree_energy",
    "conserved_energy",
]


class EffectiveError(ValueError):
    """Invalid state/spec combination or a failed integration step."""


def _check_even(f: Field, name: str):
    v = f.values
    for axis in range(f.grid.dim):
        flipped = np.roll(np.flip(v, axis=axis), 1, axis=axis)
        scale = np.max(np.abs(v)) or 1.0
        if np.max(np.abs(v - flipped)) > 1e-10 * scale:
            raise EffectiveError(f"potential {name} is not even under x -> -x on the grid")


@dataclass(frozen=True)
class CouplingSpec:
    """Mode tag plus the couplings of one effective system.

    Use the classmethod constructors; they validate the mode-specific
    fields.  `kinetic` selects the transform-space symbol of -Laplacian:
    "spectral" (default, |k|^2) or "stencil" (3-point lattice symbol,
    for consistency runs against the many-body harness).
    """

    mode: str
    grid: Grid
    c1: float = 0.5
    V1: Field | None = None
    V2: Field | None = None
    V12: Field | None = None
    a1: float = 0.0
    a2: float = 0.0
    a12: float = 0.0
    a: float = 0.0
    rabi_field: Callable[[float], float] | None = None
    kinetic: str = "spectral"
    exchange_tol: float = 1e-7

    @property
    def c2(self) -> float:
        return 1.0 - self.c1

    @property
    def n_components(self) -> int:
        return 3 if self.mode == "spin1" else 2

    @classmethod
    def hartree(cls, V1: Field, V2: Field, V12: Field, c1: float = 0.5,
                kinetic: str = "spectral") -> "CouplingSpec":
        if not (0.0 < c1 < 1.0):
            raise EffectiveError(f"c1 must lie in (0,1), got {c1}")
        grid = V1.grid
        for name, V in (("V1", V1), ("V2", V2), ("V12", V12)):
            if V.grid != grid:
                raise EffectiveError("potentials must share one grid")
            if not V.is_real(1e-10):
                raise EffectiveError(f"potential {name} must be real")
            _check_even(V, name)
        return cls(mode="hartree", grid=grid, c1=c1, V1=V1, V2=V2, V12=V12, kinetic=kinetic)

    @classmethod
    def gross_pitaevskii(cls, grid: Grid, a1: float, a2: float, a12: float,
                         c1: float = 0.5, kinetic: str = "spectral") -> "CouplingSpec":
        if not (0.0 < c1 < 1.0):
            raise EffectiveError(f"c1 must lie in (0,1), got {c1}")
        for name, val in (("a1", a1), ("a2", a2), ("a12", a12)):
            if not math.isfinite(val):
                raise EffectiveError(f"{name} must be finite")
        return cls(mode="gross_pitaevskii", grid=grid, c1=c1, a1=a1, a2=a2, a12=a12,
                   kinetic=kinetic)

    @classmethod
    def rabi(cls, grid: Grid, a: float, B: Callable[[float], float] | float,
             kinetic: str = "spectral") -> "CouplingSpec":
        if not math.isfinite(a):
            raise EffectiveError("a must be finite")
        B_fn = (lambda t, _B=float(B): _B) if not callable(B) else B
        return cls(mode="rabi", grid=grid, a=a, rabi_field=B_fn, kinetic=kinetic)

    @classmethod
    def spin1(cls, grid: Grid, a: float, kinetic: str = "spectral",
              exchange_tol: float = 1e-7) -> "CouplingSpec":
        if not math.isfinite(a):
            raise EffectiveError("a must be finite")
        return cls(mode="spin1", grid=grid, a=a, kinetic=kinetic, exchange_tol=exchange_tol)


@dataclass(frozen=True)
class OrbitalState:
    """Tuple of condensate orbitals at one time.

    Mixture modes expect each component normalized to one; the spinor
    modes conserve only the total norm, so per-component norms are free
    to move.  Normalization is the caller's contract (the soliton and
    damping oracles legitimately feed non-unit components).
    """

    components: tuple[Field, ...]
    time: float = 0.0

    def __post_init__(self):
        if len(self.components) not in (2, 3):
            raise EffectiveError("expected 2 or 3 components")
        g = self.components[0].grid
        if any(c.grid != g for c in self.components):
            raise EffectiveError("components must share one grid")

    @property
    def grid(self) -> Grid:
        return self.components[0].grid


def mass(state: OrbitalState) -> tuple[float, ...]:
    """Discrete L2 mass of each component."""
    return tuple(l2_norm(c) ** 2 for c in state.components)


def magnetization(state: OrbitalState) -> float:
    """Integral of |u|^2 - |w|^2 for a three-component state."""
    if len(state.components) != 3:
        raise EffectiveError("magnetization is defined for spin1 states")
    u, _, w = state.components
    hd = state.grid.volume_element
    return float(hd * np.sum(np.abs(u.values) ** 2 - np.abs(w.values) ** 2))


def _densities(arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.abs(a) ** 2 for a in arrays]


def _spin_exchange_rhs(u, v, w, g):
    """Right-hand sides of the spin-1 potential flow, i ds/dt = g * N(s)."""
    du = (np.abs(v) ** 2) * u + np.conj(w) * v * v + (np.abs(u) ** 2) * u - (np.abs(w) ** 2) * u
    dv = (np.abs(u) ** 2) * v + 2.0 * np.conj(v) * w * u + (np.abs(w) ** 2) * v
    dw = (np.abs(v) ** 2) * w + np.conj(u) * v * v - (np.abs(u) ** 2) * w + (np.abs(w) ** 2) * w
    return (-1j * g) * du, (-1j * g) * dv, (-1j * g) * dw


def _potential_substep(arrays, spec: CouplingSpec, t0: float, tau: float):
    """Advance the potential-only flow from t0 by tau."""
    if spec.mode == "hartree":
        u, v = arrays
        rho_u = Field(spec.grid, np.abs(u) ** 2)
        rho_v = Field(spec.grid, np.abs(v) ** 2)
        Wu = periodic_convolve(spec.V1, rho_u).values.real \
            + spec.c2 * periodic_convolve(spec.V12, rho_v).values.real
        Wv = periodic_convolve(spec.V2, rho_v).values.real \
            + spec.c1 * periodic_convolve(spec.V12, rho_u).values.real
        return [np.exp(-1j * tau * Wu) * u, np.exp(-1j * tau * Wv) * v]

    if spec.mode == "gross_pitaevskii":
        u, v = arrays
        rho_u, rho_v = _densities(arrays)
        Wu = 8.0 * np.pi * (spec.a1 * rho_u + spec.c2 * spec.a12 * rho_v)
        Wv = 8.0 * np.pi * (spec.a2 * rho_v + spec.c1 * spec.a12 * rho_u)
        return [np.exp(-1j * tau * Wu) * u, np.exp(-1j * tau * Wv) * v]

    if spec.mode == "rabi":
        u, v = arrays
        n_tot = np.abs(u) ** 2 + np.abs(v) ** 2
        phase = np.exp(-1j * tau * 8.0 * np.pi * spec.a * n_tot)
        # The 2x2 rotation exp(-i theta sigma_x) commutes with the common
        # nonlinear phase; theta uses the midpoint value of B.
        theta = tau * spec.rabi_field(t0 + 0.5 * tau)
        c, s = math.cos(theta), -1j * math.sin(theta)
        return [phase * (c * u + s * v), phase * (s * u + c * v)]

    if spec.mode == "spin1":
        u, v, w = arrays
        g = 8.0 * np.pi * spec.a
        mass_in = float(np.sum(np.abs(u) ** 2 + np.abs(v) ** 2 + np.abs(w) ** 2))
        fu, fv, fw = _spin_exchange_rhs(u, v, w, g)
        um, vm, wm = u + 0.5 * tau * fu, v + 0.5 * tau * fv, w + 0.5 * tau * fw
        fu, fv, fw = _spin_exchange_rhs(um, vm, wm, g)
        u2, v2, w2 = u + tau * fu, v + tau * fv, w + tau * fw
        mass_out = float(np.sum(np.abs(u2) ** 2 + np.abs(v2) ** 2 + np.abs(w2) ** 2))
        if mass_in > 0 and abs(mass_out - mass_in) > spec.exchange_tol * mass_in:
            raise EffectiveError(
                f"spin-exchange substep lost {abs(mass_out - mass_in) / mass_in:.3e} "
                f"relative mass; reduce dt"
            )
        return [u2, v2, w2]

    raise EffectiveError(f"unknown mode {spec.mode!r}")


def step(state: OrbitalState, spec: CouplingSpec, dt: float) -> OrbitalState:
    """One Strang step of length dt (dt < 0 runs the flow backwards)."""
    if len(state.components) != spec.n_components:
        raise EffectiveError(
            f"{spec.mode} expects {spec.n_components} components, got {len(state.components)}"
        )
    if state.grid != spec.grid:
        raise EffectiveError("state and spec grids differ")
    if dt == 0.0:
        raise EffectiveError("dt must be nonzero")
    t = state.time
    arrays = [c.values for c in state.components]
    arrays = _potential_substep(arrays, spec, t, 0.5 * dt)
    kin_phase = np.exp(-1j * dt * spec.grid.laplacian_symbol(spec.kinetic))
    arrays = [np.fft.ifftn(kin_phase * np.fft.fftn(a)) for a in arrays]
    arrays = _potential_substep(arrays, spec, t + 0.5 * dt, 0.5 * dt)
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise EffectiveError("non-finite values produced during step")
    comps = tuple(Field(spec.grid, a) for a in arrays)
    return OrbitalState(comps, time=t + dt)


@dataclass
class Trajectory:
    """Sampled times, states and conserved quantities of one run."""

    times: list[float] = field(default_factory=list)
    states: list[OrbitalState] = field(default_factory=list)
    masses: list[tuple[float, ...]] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    magnetizations: list[float] | None = None

    def append(self, state: OrbitalState, spec: CouplingSpec):
        if self.times and state.time <= self.times[-1]:
            raise EffectiveError("trajectory times must be strictly increasing")
        self.times.append(state.time)
        self.states.append(state)
        self.masses.append(mass(state))
        self.energies.append(conserved_energy(state, spec))
        if spec.mode == "spin1":
            if self.magnetizations is None:
                self.magnetizations = []
            self.magnetizations.append(magnetization(state))

    def write_csv(self, path, snapshot_dir=None) -> None:
        """CSV columns: t, mass_1, mass_2[, mass_3], energy[, magnetization]."""
        ncomp = len(self.masses[0]) if self.masses else 2
        header = ["t"] + [f"mass_{i + 1}" for i in range(ncomp)] + ["energy"]
        if self.magnetizations is not None:
            header.append("magnetization")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.times):
                row = [t, *self.masses[i], self.energies[i]]
                if self.magnetizations is not None:
                    row.append(self.magnetizations[i])
                writer.writerow([format(float(x), ".17g") for x in row])
        if snapshot_dir is not None:
            for i, st in enumerate(self.states):
                for j, comp in enumerate(st.components):
                    save_field(comp, f"{snapshot_dir}/snap_{i:05d}_c{j + 1}.bin")


def evolve(state: OrbitalState, spec: CouplingSpec, T: float, dt: float,
           sample_every: int = 1) -> Trajectory:
    """Repeat `step` until time T, sampling every `sample_every` steps.

    The step count is round(T/dt); T must sit within dt of that lattice.
    """
    if T <= 0 or dt <= 0 or dt > T:
        raise EffectiveError("need 0 < dt <= T")
    if sample_every < 1:
        raise EffectiveError("sample_every must be >= 1")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > dt:
        raise EffectiveError("T is not within dt of an integer number of steps")
    traj = Trajectory()
    traj.append(state, spec)
    for k in range(1, n_steps + 1):
        state = step(state, spec, dt)
        if k % sample_every == 0 or k == n_steps:
            traj.append(state, spec)
    return traj


def kinetic_energy(f: Field, kinetic: str = "spectral") -> float:
    """<f, -Laplacian f> with the requested lattice symbol (Parseval form)."""
    g = f.grid
    fhat = np.fft.fftn(f.values)
    k2 = g.laplacian_symbol(kinetic)
    return float(np.sum(k2 * np.abs(fhat) ** 2) * g.volume_element / g.total_points)


def _quartic(f: np.ndarray, g: np.ndarray, hd: float) -> float:
    return float(hd * np.sum(np.abs(f) ** 2 * np.abs(g) ** 2))


def gp_energy(state: OrbitalState, spec: CouplingSpec) -> float:
    """Gross-Pitaevskii energy functional of a two-component state.

    kinetic(u) + kinetic(v) + 4 pi a1 int |u|^4 + 4 pi a2 int |v|^4
    + 8 pi a12 int |u|^2 |v|^2.  Note this unweighted form is the
    energy whose vanishing-coupling limit is the total kinetic energy;
    the quantity conserved by the c-weighted flow is
    `conserved_energy`, which carries c1/c2 weights.
    """
    if spec.mode != "gross_pitaevskii":
        raise EffectiveError(f"gp_energy needs gross_pitaevskii mode, got {spec.mode}")
    u, v = (c.values for c in state.components)
    hd = spec.grid.volume_element
    kin = kinetic_energy(state.components[0], spec.kinetic) \
        + kinetic_energy(state.components[1], spec.kinetic)
    return (kin
            + 4.0 * np.pi * spec.a1 * _quartic(u, u, hd)
            + 4.0 * np.pi * spec.a2 * _quartic(v, v, hd)
            + 8.0 * np.pi * spec.a12 * _quartic(u, v, hd))


def hartree_energy(state: OrbitalState, spec: CouplingSpec) -> float:
    """Conserved energy of the convolution system, per-particle normalized.

    c1 <u,-Du> + c2 <v,-Dv> + (c1/2) <|u|^2, V1*|u|^2>
    + (c2/2) <|v|^2, V2*|v|^2> + c1 c2 <|u|^2, V12*|v|^2>.

    These weights are the unique ones (up to overall scale) whose
    gradient flow reproduces the c-weighted coupled system, and the
    scale is fixed so the value is the large-N limit of the many-body
    energy per particle at product states.
    """
    if spec.mode != "hartree":
        raise EffectiveError(f"hartree_energy needs hartree mode, got {spec.mode}")
    u, v = state.components
    rho_u = Field(spec.grid, np.abs(u.values) ** 2)
    rho_v = Field(spec.grid, np.abs(v.values) ** 2)
    hd = spec.grid.volume_element
    self1 = float(hd * np.sum(periodic_convolve(spec.V1, rho_u).values.real * rho_u.values.real))
    self2 = float(hd * np.sum(periodic_convolve(spec.V2, rho_v).values.real * rho_v.values.real))
    cross = float(hd * np.sum(periodic_convolve(spec.V12, rho_v).values.real * rho_u.values.real))
    c1, c2 = spec.c1, spec.c2
    return (c1 * kinetic_energy(u, spec.kinetic) + c2 * kinetic_energy(v, spec.kinetic)
            + 0.5 * c1 * self1 + 0.5 * c2 * self2 + c1 * c2 * cross)


def conserved_energy(state: OrbitalState, spec: CouplingSpec) -> float:
    """The functional each mode's flow actually conserves.

    hartree: `hartree_energy`.  gross_pitaevskii: the c-weighted cubic
    functional.  rabi: kinetic + 4 pi a int (|u|^2+|v|^2)^2 + 2 B Re<u,v>
    (conserved for constant B; for time-dependent B the current value of
    B(t) is used).  spin1: kinetic + 4 pi a int |F|^2 with F the spin
    density vector.
    """
    hd = spec.grid.volume_element
    if spec.mode == "hartree":
        return hartree_energy(state, spec)
    if spec.mode == "gross_pitaevskii":
        u, v = (c.values for c in state.components)
        c1, c2 = spec.c1, spec.c2
        kin = c1 * kinetic_energy(state.components[0], spec.kinetic) \
            + c2 * kinetic_energy(state.components[1], spec.kinetic)
        return (kin
                + 4.0 * np.pi * spec.a1 * c1 * _quartic(u, u, hd)
                + 4.0 * np.pi * spec.a2 * c2 * _quartic(v, v, hd)
                + 8.0 * np.pi * spec.a12 * c1 * c2 * _quartic(u, v, hd))
    if spec.mode == "rabi":
        u, v = state.components
        n_tot = np.abs(u.values) ** 2 + np.abs(v.values) ** 2
        kin = kinetic_energy(u, spec.kinetic) + kinetic_energy(v, spec.kinetic)
        B = spec.rabi_field(state.time)
        return (kin + 4.0 * np.pi * spec.a * float(hd * np.sum(n_tot**2))
                + 2.0 * B * inner(u, v).real)
    if spec.mode == "spin1":
        u, v, w = (c.values for c in state.components)
        fz = np.abs(u) ** 2 - np.abs(w) ** 2
        fplus = np.sqrt(2.0) * (np.conj(u) * v + np.conj(v) * w)
        f_sq = fz**2 + np.abs(fplus) ** 2
        kin = sum(kinetic_energy(c, spec.kinetic) for c in state.components)
        return kin + 4.0 * np.pi * spec.a * float(hd * np.sum(f_sq))
    raise EffectiveError(f"unknown mode {spec.mode!r}")
