"""Zero-energy s-wave scattering on the half-line.

The reduced radial problem u'' = (1/2) V(r) u with u(0) = 0 is
integrated outward; beyond the support of V the solution is the line
u = kappa (r - a) and a is the scattering length.  The profile
f = u / (kappa r) tends to 1 at infinity and its deficit g = 1 - f
measures the short-range correlation hole.

`calibrate_shell` finds the outer radius C N^{-beta} of a repulsive
spherical-shell potential of amplitude 4 pi a N^{3 beta - 1} such that
the scaled potential minus the shell has zero scattering length.  The
deficit profile of that modified problem is compactly supported, which
is what makes its norms shrink with N.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

__all__ = [
    "RadialPotential",
    "ShellPotential",
    "ScatteringResult",
    "ScatteringError",
    "BoundStateError",
    "CalibrationError",
    "scattering_length",
    "scale_potential",
    "square_barrier",
    "calibrate_shell",
    "modified_potential",
    "g_norms",
]


class ScatteringError(ValueError):
    pass


class BoundStateError(ScatteringError):
    """The radial solution crossed zero: attractive enough for a bound state."""


class CalibrationError(ScatteringError):
    pass


@dataclass(frozen=True)
class RadialPotential:
    """Compactly supported radial profile V(r), zero for r > support_radius.

    `breakpoints` lists radii where V jumps; the integrator restarts
    there so adaptive stepping never straddles a discontinuity.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    positive: bool = True
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.support_radius >= 0):
            raise ScatteringError("support_radius must be nonnegative")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r <= self.support_radius, self.profile(r), 0.0)
        return out if out.ndim else float(out)


def square_barrier(height: float, radius: float) -> RadialPotential:
    return RadialPotential(
        profile=lambda r, _h=height: np.full_like(np.asarray(r, dtype=float), _h),
        support_radius=radius,
        positive=height >= 0,
        breakpoints=(radius,),
    )


def scale_potential(V: RadialPotential, N: int, beta: float = 1.0) -> RadialPotential:
    """Short-range rescaling N^{3 beta - 1} V(N^beta r).

    At beta = 1 this is the strong dilute-gas scaling N^2 V(N r), whose
    scattering length is exactly a(V)/N; for beta < 1 the amplitude is
    softened so the integral of the potential stays of order 1/N.
    """
    if N < 1:
        raise ScatteringError("N must be >= 1")
    s = float(N) ** beta
    amp = float(N) ** (3.0 * beta - 1.0)
    return RadialPotential(
        profile=lambda r, _V=V, _s=s, _a=amp: _a * _V(np.asarray(r) * _s),
        support_radius=V.support_radius / s,
        positive=V.positive,
        breakpoints=tuple(b / s for b in V.breakpoints),
    )


@dataclass(frozen=True)
class ShellPotential:
    """Repulsive spherical shell used to cancel a scattering length.

    amplitude = 4 pi a N^{3 beta - 1}, supported on the shell
    N^{-beta} < r < C N^{-beta}.
    """

    amplitude: float
    inner_radius: float
    outer_radius: float
    species: str
    beta: float
    n_particles: int

    def __post_init__(self):
        if self.amplitude != 0.0 and not (self.inner_radius < self.outer_radius):
            raise ScatteringError("shell needs inner_radius < outer_radius")
        if self.species not in ("1", "2", "12"):
            raise ScatteringError(f"species must be '1', '2' or '12', got {self.species!r}")

    @property
    def C(self) -> float:
        return self.outer_radius / self.inner_radius

    @classmethod
    def for_species(cls, a: float, N: int, beta: float, C: float,
                    species: str = "1") -> "ShellPotential":
        inner = float(N) ** (-beta)
        return cls(
            amplitude=4.0 * np.pi * a * float(N) ** (3.0 * beta - 1.0),
            inner_radius=inner,
            outer_radius=C * inner,
            species=species,
            beta=beta,
            n_particles=N,
        )

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where((r > self.inner_radius) & (r < self.outer_radius), self.amplitude, 0.0)
        return out if out.ndim else float(out)


def modified_potential(V_scaled: RadialPotential, shell: ShellPotential) -> RadialPotential:
    """The scaled potential minus the compensating shell."""
    support = max(V_scaled.support_radius, shell.outer_radius)
    breaks = {b for b in V_scaled.breakpoints if 0 < b < support}
    breaks.update(b for b in (shell.inner_radius, shell.outer_radius) if 0 < b < support)
    if 0 < V_scaled.support_radius < support:
        breaks.add(V_scaled.support_radius)
    return RadialPotential(
        profile=lambda r, _V=V_scaled, _W=shell: _V(r) - _W(r),
        support_radius=support,
        positive=False,
        breakpoints=tuple(sorted(breaks)),
    )


@dataclass
class ScatteringResult:
    scattering_length: float
    r: np.ndarray
    f: np.ndarray
    g: np.ndarray
    slope: float
    support_radius: float


def _segments(V: RadialPotential, r_max: float) -> list[tuple[float, float]]:
    pts = {0.0, r_max}
    pts.update(b for b in V.breakpoints if 0.0 < b < r_max)
    if 0.0 < V.support_radius < r_max:
        pts.add(V.support_radius)
    pts = sorted(pts)
    return list(zip(pts[:-1], pts[1:]))


_RESCALE_LIMIT = 1e120


def _integrate(V: RadialPotential, r_max: float, n_samples: int):
    """March u'' = V u / 2 outward with occasional renormalization.

    Returns sample radii and u on them, expressed in the scale of the
    final segment (earlier samples are multiplied down; hard barriers
    grow like exp(kappa r) and the constant factor cancels in the
    scattering length).
    """
    r_all = np.linspace(0.0, r_max, n_samples)
    u_all = np.zeros(n_samples)
    log_at = np.zeros(n_samples)  # log factor already removed when sample was stored
    removed = 0.0
    state = np.array([0.0, 1.0])
    R = max(V.support_radius, 1e-12)
    h_cap = R / 1000.0

    def rhs(r, y):
        return (y[1], 0.5 * V(r) * y[0])

    filled = 1  # u(0) = 0 already stored
    for lo, hi in _segments(V, r_max):
        interior = lo < V.support_radius - 1e-300
        n_chunks = max(1, int(np.ceil((hi - lo) / (R / 20.0)))) if interior else 1
        edges = np.linspace(lo, hi, n_chunks + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            eps = 1e-9 * (b - a)
            mask = (r_all > a + eps) & (r_all <= b + eps)
            pts = np.clip(r_all[mask], a, b)
            t_eval = np.unique(np.append(pts, b))
            sol = solve_ivp(
                rhs, (a, b), state, method="RK45", t_eval=t_eval,
                rtol=1e-12, atol=1e-14,
                max_step=h_cap if interior else np.inf,
            )
            if not sol.success:
                raise ScatteringError(f"radial integration failed on [{a}, {b}]: {sol.message}")
            idx = np.searchsorted(t_eval, pts)
            u_all[filled:filled + pts.size] = sol.y[0][idx]
            log_at[filled:filled + pts.size] = removed
            filled += pts.size
            state = sol.y[:, -1].copy()
            scale = max(abs(state[0]), abs(state[1]))
            if scale > _RESCALE_LIMIT:
                state /= scale
                removed += np.log(scale)
    with np.errstate(under="ignore"):
        u_all *= np.exp(log_at - removed)
    return r_all, u_all


def scattering_length(V: RadialPotential, r_max: float, *,
                      n_samples: int = 4001,
                      allow_crossing_window: tuple[float, float] | None = None
                      ) -> ScatteringResult:
    """Scattering length and correlation profile of a radial potential.

    The exterior line through the samples at 1.5 R and 2 R (R the
    support radius) yields slope kappa and intercept a; f = u/(kappa r)
    then approaches 1 - a/r outside the support.  A zero crossing of u
    flags the bound-state regime and raises, except inside an explicitly
    allowed window (shell-modified problems may push u through zero
    between the shell radii without invalidating the exterior line).
    """
    R = V.support_radius
    if R == 0.0:
        r = np.linspace(0.0, max(r_max, 1.0), n_samples)
        return ScatteringResult(0.0, r, np.ones_like(r), np.zeros_like(r), 1.0, 0.0)
    if not (r_max > 2.0 * R):
        raise ScatteringError(f"r_max must exceed twice the support radius {R}")
    r, u = _integrate(V, r_max, n_samples)

    positive_r = r > 0
    sign_flip = np.where(np.diff(np.signbit(u[positive_r])))[0]
    if sign_flip.size:
        cross_r = r[positive_r][sign_flip]
        cross_r = cross_r[cross_r > r[1]]  # ignore the trivial zero at the origin
        if cross_r.size:
            if allow_crossing_window is None:
                raise BoundStateError(
                    f"radial solution crosses zero near r = {cross_r[0]:.6g}; "
                    "the potential supports a bound state"
                )
            lo, hi = allow_crossing_window
            outside = cross_r[(cross_r < lo) | (cross_r > hi)]
            if outside.size:
                raise BoundStateError(
                    f"radial solution crosses zero near r = {outside[0]:.6g}, "
                    f"outside the allowed window [{lo:.6g}, {hi:.6g}]"
                )

    r1, r2 = 1.5 * R, 2.0 * R
    u1, u2 = np.interp(r1, r, u), np.interp(r2, r, u)
    kappa = (u2 - u1) / (r2 - r1)
    scale = max(abs(u1), abs(u2), 1e-300)
    if abs(kappa) < 1e-13 * scale / R:
        raise ScatteringError("degenerate exterior asymptote: slope is numerically zero")
    a = r1 - u1 / kappa
    with np.errstate(invalid="ignore", divide="ignore"):
        f = u / (kappa * r)
    # u is odd in r, so f = u/(kappa r) is even; extrapolate in r^2 to r = 0
    f[0] = (4.0 * f[1] - f[2]) / 3.0 if n_samples > 2 else 1.0
    return ScatteringResult(float(a), r, f, 1.0 - f, float(kappa), R)


def g_norms(result: ScatteringResult) -> tuple[float, float, float]:
    """Radial L1, L2 and sup norms of the correlation deficit over R^3.

    ||g||_1 = 4 pi int |g| r^2 dr, ||g||_2 = sqrt(4 pi int g^2 r^2 dr),
    ||g||_inf = max |g|, integrated on the stored sample grid.
    """
    if result.support_radius > 0:
        inside = int(np.sum(result.r <= result.support_radius))
        if inside < 1000:
            raise ScatteringError(
                f"profile resolution too coarse: {inside} samples inside the support"
            )
    r, g = result.r, result.g
    l1 = 4.0 * np.pi * np.trapezoid(np.abs(g) * r**2, r)
    l2 = float(np.sqrt(4.0 * np.pi * np.trapezoid(g**2 * r**2, r)))
    return float(l1), l2, float(np.max(np.abs(g)))


def calibrate_shell(V: RadialPotential, N: int, beta: float, species: str = "1", *,
                    a: float | None = None, c_max: float = 8.0,
                    residual_tol: float = 1e-8, scan_step: float = 0.25,
                    n_samples: int = 4001) -> ShellPotential:
    """Find the smallest C > 1 whose shell cancels the scaled scattering length.

    The residual a(V_scaled - shell(C)) is walked upward from C = 1
    until its sign flips; walking further would eventually deepen the
    effective well past the bound-state threshold, where the residual
    jumps, so the walk stops at the first bracket (this also selects the
    smallest root).  The bracket is spot-checked for continuity and
    monotonicity, then refined by Brent's method until the residual is
    below residual_tol times the problem's length scale.  Raises
    CalibrationError, with the walked residuals, if no bracket exists.
    """
    if not (0.0 < beta <= 1.0):
        raise ScatteringError(f"beta must lie in (0, 1], got {beta}")
    if N < 2:
        raise ScatteringError("calibration needs N >= 2")
    if a is None:
        a = scattering_length(V, 2.5 * V.support_radius if V.support_radius else 1.0,
                              n_samples=n_samples).scattering_length
    inner = float(N) ** (-beta)
    if a == 0.0:
        # nothing to cancel; C = 1 by convention (empty shell)
        return ShellPotential(0.0, inner, inner, species, beta, N)
    if a < 0.0:
        raise CalibrationError("calibration expects a positive scattering length")

    V_scaled = scale_potential(V, N, beta)

    def residual(C: float) -> float:
        shell = ShellPotential.for_species(a, N, beta, C, species)
        mod = modified_potential(V_scaled, shell)
        res = scattering_length(
            mod, 2.5 * mod.support_radius, n_samples=n_samples,
            allow_crossing_window=(shell.inner_radius, shell.outer_radius),
        )
        return res.scattering_length

    c_lo = 1.0 + 1e-6
    walked = [(c_lo, residual(c_lo))]
    bracket = None
    c = c_lo
    while c < c_max and bracket is None:
        c = min(c + scan_step, c_max)
        try:
            val = residual(c)
        except BoundStateError as exc:
            raise CalibrationError(
                f"hit the bound-state regime at C = {c:.6g} before bracketing a root; "
                f"walked residuals: {[(round(cc, 6), float(vv)) for cc, vv in walked]}"
            ) from exc
        walked.append((c, val))
        if np.signbit(val) != np.signbit(walked[0][1]):
            bracket = (walked[-2][0], c)
    if bracket is None:
        raise CalibrationError(
            f"no root bracketed for C in ({c_lo:.6g}, {c_max:.6g}]: "
            f"residuals run from {walked[0][1]:.6g} to {walked[-1][1]:.6g}"
        )
    lo, hi = bracket
    # continuity/monotonicity spot check across the bracket
    probes = np.linspace(lo, hi, 6)
    probe_vals = ([walked[-2][1]] + [residual(cc) for cc in probes[1:-1]]
                  + [walked[-1][1]])
    diffs = np.diff(probe_vals)
    slack = 1e-10 * max(1.0, float(np.max(np.abs(probe_vals))))
    if not (np.all(diffs <= slack) or np.all(diffs >= -slack)):
        raise CalibrationError("residual scattering length is not monotone over the bracket")
    length_scale = max(V_scaled.support_radius, hi * inner)
    c_star = float(brentq(residual, lo, hi, xtol=1e-9, rtol=8.9e-16, maxiter=200))
    final = residual(c_star)
    if abs(final) > residual_tol * length_scale:
        raise CalibrationError(
            f"calibration residual {final:.3e} exceeds {residual_tol:.1e} * {length_scale:.3e}"
        )
    return ShellPotential.for_species(a, N, beta, c_star, species)
