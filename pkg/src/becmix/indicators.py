"""Condensation indicators for two-species lattice states.

Everything measured during a convergence run lives here:

* reduced density matrices of one A particle, one B particle, or the
  A-B pair, by contraction of the occupation-basis coefficients,
* the overlap deficit alpha = 1 - <u x v, gamma u x v> and the trace
  distance to the condensed reference, with the two-sided comparison
  alpha <= Tr|..| <= 2 sqrt(alpha) for pure references,
* the marginal sandwich max{depletion_A, depletion_B} <= alpha <= sum,
* counting projectors P_k onto "exactly k particles outside the
  condensate orbital", weight operators sum g(k) P_k, and the weight
  families s(k) = k/N, n(k) = sqrt(k/N) and the regularized m,
* the time-derivative decomposition of alpha into the three commutator
  channels (one per potential), an exact identity along the coupled
  many-body + effective flow when both share the lattice kinetic term,
* the sixteen projector-insertion sandwiches of the cross-potential
  commutator, whose vanishing combinations are structural identities,
* the corrected convergence functionals that subtract pair-correlation
  terms weighted by shifted counting operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np

from .grids import Field
from .manybody import (
    Hamiltonian,
    HamiltonianSpec,
    ManyBodyError,
    ManyBodyState,
    TwoSpeciesBasis,
    _circulant,
    _intra_diagonal,
)
from .fock import (
    axis_diagonal,
    firstquant_vector,
    one_body_apply,
    orbital_project,
    pair_diagonal,
    site_vector,
)

__all__ = [
    "ReducedDensity",
    "MarginalBounds",
    "WeightFunction",
    "CountingProjectorSet",
    "DerivativeChannels",
    "IndicatorError",
    "reduce_density",
    "alpha_11",
    "condensate_depletion",
    "trace_distance",
    "marginal_bounds_check",
    "counting_projectors",
    "weight_s",
    "weight_n",
    "weight_m",
    "weight_expectation",
    "derivative_decomposition",
    "insertion_terms",
    "INSERTION_KEYS",
    "corrected_alpha",
]


class IndicatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# mode machinery: annihilate / count the condensate orbital per species

class _ModeOps:
    """Apply a(u), a+(u), n_u and Q = N - n_u for one species."""

    def __init__(self, basis: TwoSpeciesBasis, species: str, u: Field):
        self.basis = basis
        self.species = species
        self.N = basis.particle_number(species)
        self.u_site = site_vector(u)
        if abs(np.linalg.norm(self.u_site) - 1.0) > 1e-8:
            raise IndicatorError("orbital must be normalized")
        self.ops = basis.lowering_ops(species)

    def annihilate(self, psi: np.ndarray) -> np.ndarray:
        """a(u) psi, mapping into the (N-1)-particle sector of the species."""
        work = psi if self.species == "A" else psi.T
        out = None
        for x, op in enumerate(self.ops):
            c = np.conj(self.u_site[x])
            if c == 0:
                continue
            out = c * (op @ work) if out is None else out + c * (op @ work)
        if out is None:
            out = np.zeros((self.ops[0].shape[0], work.shape[1]), dtype=complex)
        return out if self.species == "A" else out.T

    def create(self, phi: np.ndarray) -> np.ndarray:
        """a+(u) phi, mapping back into the N-particle sector."""
        work = phi if self.species == "A" else phi.T
        out = None
        for x, op in enumerate(self.ops):
            c = self.u_site[x]
            if c == 0:
                continue
            if out is None:
                out = c * (op.T @ work)
            else:
                out += c * (op.T @ work)
        if out is None:
            out = np.zeros((self.ops[0].shape[1], work.shape[1]), dtype=complex)
        return out if self.species == "A" else out.T

    def n_u(self, psi: np.ndarray) -> np.ndarray:
        return self.create(self.annihilate(psi))

    def q_total(self, psi: np.ndarray) -> np.ndarray:
        """Q psi with Q = sum_i q_i = N - n_u."""
        return self.N * psi - self.n_u(psi)


# ---------------------------------------------------------------------------
# reduced density matrices

@dataclass
class ReducedDensity:
    """Hermitian, positive, trace-one matrix on the one-particle or pair space."""

    kind: tuple[int, int]
    matrix: np.ndarray
    N1: int
    N2: int
    time: float = 0.0

    def validate(self, tol: float = 1e-12) -> None:
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > tol:
            raise IndicatorError(f"reduced density not Hermitian: residual {herm:.2e}")
        tr = abs(np.trace(m).real - 1.0)
        if tr > tol:
            raise IndicatorError(f"reduced density trace deviates by {tr:.2e}")
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w.min() < -tol:
            raise IndicatorError(f"reduced density has eigenvalue {w.min():.2e}")


def _lowered_stack(state: ManyBodyState, species: str) -> np.ndarray:
    """Stack of a_x psi over sites x, shape (M, dim', other_dim)."""
    b = state.basis
    ops = b.lowering_ops(species)
    work = state.psi if species == "A" else state.psi.T
    return np.stack([op @ work for op in ops])


def reduce_density(state: ManyBodyState, kind: tuple[int, int]) -> ReducedDensity:
    """Partial trace of |psi><psi| down to one A and/or one B particle.

    kind (1,0)/(0,1): matrix on the M-site single-particle space,
    gamma[x, x'] = <a+_{x'} a_x> / N.  kind (1,1): matrix on the pair
    space with row index x*M + y, gamma = <a+_{x'} b+_{y'} b_y a_x> /
    (N1 N2).  Tracing the pair result over species B reproduces the
    (1,0) marginal.
    """
    b = state.basis
    if kind == (1, 0):
        phi = _lowered_stack(state, "A")
        gamma = np.einsum("xab,yab->xy", phi, np.conj(phi)) / b.N1
    elif kind == (0, 1):
        phi = _lowered_stack(state, "B")
        gamma = np.einsum("xab,yab->xy", phi, np.conj(phi)) / b.N2
    elif kind == (1, 1):
        ops_b = b.lowering_ops("B")
        phi_a = _lowered_stack(state, "A")          # (M, dimA', dimB)
        stack = np.stack([
            np.stack([(op_b @ phi_a[x].T).T for op_b in ops_b]) for x in range(b.M)
        ])                                          # (M, M, dimA', dimB')
        W = stack.reshape(b.M * b.M, -1)
        gamma = (W @ W.conj().T) / (b.N1 * b.N2)
    else:
        raise IndicatorError(f"kind must be (1,0), (0,1) or (1,1), got {kind}")
    return ReducedDensity(kind, gamma, b.N1, b.N2, state.time)


def alpha_11(state: ManyBodyState, u: Field, v: Field) -> float:
    """Overlap deficit 1 - <u x v, gamma^(1,1) u x v>.

    Evaluated as 1 - <n_u n_v> / (N1 N2), which avoids building the pair
    density matrix.
    """
    b = state.basis
    mode_a = _ModeOps(b, "A", u)
    mode_b = _ModeOps(b, "B", v)
    w = mode_a.n_u(mode_b.n_u(state.psi))
    val = np.vdot(state.psi, w).real / (b.N1 * b.N2)
    return float(1.0 - val)


def condensate_depletion(state: ManyBodyState, orbital: Field, species: str) -> float:
    """1 - <orbital, gamma^(1,0 or 0,1) orbital> = <Q>/N for one species."""
    mode = _ModeOps(state.basis, species, orbital)
    val = np.vdot(state.psi, mode.n_u(state.psi)).real / mode.N
    return float(1.0 - val)


def trace_distance(gamma: ReducedDensity, u: Field | None = None,
                   v: Field | None = None) -> float:
    """Tr |gamma - reference| with the pure condensed reference.

    Reference is |u><u|, |v><v| or |u x v><u x v| according to the kind;
    computed by eigendecomposition of the Hermitian difference.
    """
    if gamma.kind == (1, 1):
        if u is None or v is None:
            raise IndicatorError("pair marginal needs both orbitals")
        ref = np.kron(site_vector(u), site_vector(v))
    elif gamma.kind == (1, 0):
        if u is None:
            raise IndicatorError("the (1,0) marginal needs the first-species orbital")
        ref = site_vector(u)
    else:
        if v is None:
            raise IndicatorError("the (0,1) marginal needs the second-species orbital")
        ref = site_vector(v)
    if ref.size != gamma.matrix.shape[0]:
        raise IndicatorError("orbital dimension does not match the marginal")
    diff = gamma.matrix - np.outer(ref, np.conj(ref))
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(np.sum(np.abs(w)))


@dataclass
class MarginalBounds:
    lhs_max: float
    middle: float
    rhs_sum: float
    lower_holds: bool
    upper_holds: bool


def marginal_bounds_check(state: ManyBodyState, u: Field, v: Field,
                          slack: float = 1e-10) -> MarginalBounds:
    """The two-sided bound tying single-species depletions to the pair deficit.

    max{1-<u,g10 u>, 1-<v,g01 v>} <= 1-<uv,g11 uv> <= their sum; this is
    a theorem for every state, so a violation beyond round-off indicates
    a bug upstream.
    """
    d_a = condensate_depletion(state, u, "A")
    d_b = condensate_depletion(state, v, "B")
    middle = alpha_11(state, u, v)
    lhs = max(d_a, d_b)
    rhs = d_a + d_b
    return MarginalBounds(lhs, middle, rhs,
                          lower_holds=(middle - lhs) >= -slack,
                          upper_holds=(rhs - middle) >= -slack)


# ---------------------------------------------------------------------------
# counting projectors and weights

def _binomial_split(apply_q: Callable[[np.ndarray], np.ndarray], psi: np.ndarray,
                    N: int) -> list[np.ndarray]:
    """All P_k psi from powers of the excitation-number operator Q.

    Uses the falling-factorial basis B_m = binom(Q, m), built by the
    recurrence B_m = (Q - m + 1) B_{m-1} / m, and the inversion
    P_k = sum_{m>=k} (-1)^{m-k} C(m,k) B_m.  Exact on the integer
    spectrum {0..N}; coefficients stay small at desk-scale N.
    """
    bs = [psi]
    cur = psi
    for m in range(1, N + 1):
        cur = (apply_q(cur) - (m - 1) * cur) / m
        bs.append(cur)
    out = []
    for k in range(N + 1):
        acc = np.zeros_like(psi)
        for m in range(k, N + 1):
            acc += ((-1) ** (m - k)) * math.comb(m, k) * bs[m]
        out.append(acc)
    return out


@dataclass(frozen=True)
class WeightFunction:
    """Nonnegative weight g(k) on the excitation count k = 0..N.

    `fn` must be defined for every k >= 0; values beyond N feed the
    shifted operators sum g(k+j) P_k.
    """

    kind: str
    N: int
    fn: Callable[[int], float]

    @property
    def values(self) -> np.ndarray:
        return np.array([self.fn(k) for k in range(self.N + 1)], dtype=float)

    def __call__(self, k: int) -> float:
        return float(self.fn(k))

    def shifted_values(self, j: int) -> np.ndarray:
        return np.array([self.fn(k + j) for k in range(self.N + 1)], dtype=float)

    def max_step(self) -> float:
        """sup_k |g(k+1) - g(k)| over k = 0..N (the shift-gap norm bound)."""
        vals = np.array([self.fn(k) for k in range(self.N + 2)], dtype=float)
        return float(np.max(np.abs(np.diff(vals))))


def weight_s(N: int) -> WeightFunction:
    return WeightFunction("s", N, lambda k: k / N)


def weight_n(N: int) -> WeightFunction:
    return WeightFunction("n", N, lambda k: math.sqrt(k / N))


def weight_m(N: int, xi: float) -> WeightFunction:
    """The regularized square-root weight.

    sqrt(k/N) above the crossover k = N^(1-2 xi), and the tangent-like
    line (N^(xi-1) k + N^(-xi))/2 below it; both branches meet at the
    crossover with value N^(-xi), and AM-GM gives
    n(k) <= m(k) <= max(n(k), N^(-xi)) everywhere.
    """
    if xi <= 0:
        raise IndicatorError("xi must be positive")
    crossover = float(N) ** (1.0 - 2.0 * xi)

    def fn(k: int) -> float:
        if k >= crossover:
            return math.sqrt(k / N)
        return 0.5 * (float(N) ** (xi - 1.0) * k + float(N) ** (-xi))

    return WeightFunction("m", N, fn)


@dataclass
class CountingProjectorSet:
    """The family P_k of projections onto "exactly k excited" sectors.

    Realized through the spectral calculus of Q = sum_i q_i rather than
    the symmetrized projector strings; the two definitions agree (unit
    tested against the literal strings at small N) and this one costs N
    applications of Q.
    """

    basis: TwoSpeciesBasis
    species: str
    orbital: Field

    def __post_init__(self):
        self._mode = _ModeOps(self.basis, self.species, self.orbital)

    @property
    def N(self) -> int:
        return self._mode.N

    def split(self, state: ManyBodyState) -> list[np.ndarray]:
        return _binomial_split(self._mode.q_total, state.psi, self.N)

    def apply(self, k: int, state: ManyBodyState) -> np.ndarray:
        if not (0 <= k <= self.N):
            return np.zeros_like(state.psi)
        return self.split(state)[k]

    def sector_weights(self, state: ManyBodyState) -> np.ndarray:
        """||P_k psi||^2 for k = 0..N."""
        return np.array([np.vdot(p, p).real for p in self.split(state)])

    def weighted_apply(self, g: WeightFunction, state: ManyBodyState) -> np.ndarray:
        vals = g.values
        parts = self.split(state)
        return sum(vals[k] * parts[k] for k in range(self.N + 1))


def counting_projectors(basis: TwoSpeciesBasis, u: Field, species: str) -> CountingProjectorSet:
    return CountingProjectorSet(basis, species, u)


def weight_expectation(state: ManyBodyState, g: WeightFunction, species: str,
                       orbital: Field) -> float:
    """<psi, g^ psi> = sum_k g(k) ||P_k psi||^2 for the given species."""
    cp = counting_projectors(state.basis, orbital, species)
    if g.N != cp.N:
        raise IndicatorError(f"weight defined for N={g.N}, species has N={cp.N}")
    return float(np.dot(g.values, cp.sector_weights(state)))


# ---------------------------------------------------------------------------
# derivative decomposition into potential channels

@dataclass
class DerivativeChannels:
    """The three commutator expectations; each is purely imaginary and
    d alpha/dt = i (c_v1 + c_v2 + c_v12) along the coupled flow."""

    c_v1: complex
    c_v2: complex
    c_v12: complex

    @property
    def alpha_dot(self) -> float:
        return float((1j * (self.c_v1 + self.c_v2 + self.c_v12)).real)


def _dressing(kernel_bare: np.ndarray, density: np.ndarray, h: float) -> np.ndarray:
    """Mean-field one-body multiplier (V * rho)(x) = h sum_y V(x-y) rho(y)."""
    return h * (_circulant(kernel_bare) @ density)


def derivative_decomposition(state: ManyBodyState, u: Field, v: Field,
                             spec: HamiltonianSpec) -> DerivativeChannels:
    """Split d alpha/dt into the V1, V2 and V12 commutator channels.

    Each channel is <psi, [X, S] psi> with S = sum_{k,l} (1 - p_k p_l) /
    (N1 N2) and X the corresponding interaction minus its mean-field
    dressing; the orbitals must be the effective solution at the same
    time as the state, evolved with the lattice kinetic term.
    """
    if spec.scaling != "mean_field":
        raise IndicatorError("derivative channels are defined for the mean-field scaling")
    b = state.basis
    if spec.grid.points_per_axis != b.M or u.grid != spec.grid or v.grid != spec.grid:
        raise IndicatorError("state, orbitals and interaction spec must share one grid")
    h = spec.grid.spacing
    occ_a = b.A.occs.astype(float)
    occ_b = b.B.occs.astype(float)
    rho_u = np.abs(u.values.ravel()) ** 2
    rho_v = np.abs(v.values.ravel()) ** 2

    # diagonal operators (occupation basis): pair interactions and dressings
    w1 = _intra_diagonal(b.A, spec.kernel1)             # (1/N1) sum_{i<j} V1
    w2 = _intra_diagonal(b.B, spec.kernel2)
    cross = occ_a @ _circulant(spec.kernel12) @ occ_b.T  # (1/(N1+N2)) sum V12
    d1 = occ_a @ _dressing(spec.bare_kernel("1"), rho_u, h)
    d2 = occ_b @ _dressing(spec.bare_kernel("2"), rho_v, h)
    d12_a = occ_a @ _dressing(spec.bare_kernel("12"), rho_v, h)
    d12_b = occ_b @ _dressing(spec.bare_kernel("12"), rho_u, h)

    x1 = (w1 - d1)[:, None] + np.zeros((1, b.B.dim))
    x2 = (w2 - d2)[None, :] + np.zeros((b.A.dim, 1))
    x12 = cross - spec.c2 * d12_a[:, None] - spec.c1 * d12_b[None, :]

    mode_a = _ModeOps(b, "A", u)
    mode_b = _ModeOps(b, "B", v)
    psi = state.psi
    w = mode_a.n_u(mode_b.n_u(psi)) / (b.N1 * b.N2)   # P-bar psi

    def channel(xdiag: np.ndarray) -> complex:
        # <[X, S]> with S = 1 - P-bar  =>  -<[X, P-bar]>
        return complex(-(np.vdot(psi, xdiag * w) - np.vdot(w, xdiag * psi)))

    return DerivativeChannels(channel(x1), channel(x2), channel(x12))


# ---------------------------------------------------------------------------
# the sixteen projector-insertion sandwiches

INSERTION_KEYS = tuple(f"{a}{b},{c}{d}"
                       for a in "pq" for b in "pq" for c in "pq" for d in "pq")


def insertion_terms(state: ManyBodyState, u: Field, v: Field,
                    V12: Field) -> dict[str, complex]:
    """All sixteen sandwiches a1 b1 [K, P-bar] c1 d1 of the cross channel.

    K = V12(x1 - y1) - (V12*|v|^2)(x1) - (V12*|u|^2)(y1) and
    P-bar = sum_{k,l} p_k p_l / (N1 N2); the first A and B particles are
    projected onto/against the condensate orbitals on both sides.
    The sum of all sixteen equals <psi, [K, P-bar] psi>; the diagonal
    combinations (pp,pp), (qq,qq), (pq,pq)+(qp,qp) vanish identically
    and the mean-field dressing kills (pp,qp) + its conjugate.
    """
    b = state.basis
    if V12.grid.points_per_axis != b.M or u.grid != V12.grid or v.grid != V12.grid:
        raise IndicatorError("state, orbitals and potential must share one grid")
    h = V12.grid.spacing
    psi = firstquant_vector(state)
    n1, n2 = b.N1, b.N2
    axis_a1, axis_b1 = 0, n1
    usite, vsite = site_vector(u), site_vector(v)
    kernel = V12.values.real.ravel()
    rho_u = np.abs(u.values.ravel()) ** 2
    rho_v = np.abs(v.values.ravel()) ** 2
    dress_a = _dressing(kernel, rho_v, h)   # (V12 * |v|^2)(x_1)
    dress_b = _dressing(kernel, rho_u, h)   # (V12 * |u|^2)(y_1)

    def apply_K(x: np.ndarray) -> np.ndarray:
        out = pair_diagonal(x, kernel, axis_a1, axis_b1)
        out -= axis_diagonal(x, dress_a, axis_a1)
        out -= axis_diagonal(x, dress_b, axis_b1)
        return out

    def apply_pbar(x: np.ndarray) -> np.ndarray:
        out = x
        acc = np.zeros_like(x)
        for i in range(n1):
            acc += orbital_project(out, usite, i)
        out = acc
        acc = np.zeros_like(x)
        for r in range(n2):
            acc += orbital_project(out, vsite, n1 + r)
        return acc / (n1 * n2)

    def sandwich_vec(tag: str, x: np.ndarray) -> np.ndarray:
        a, bb = tag[0], tag[1]
        out = orbital_project(x, usite, axis_a1, complement=(a == "q"))
        return orbital_project(out, vsite, axis_b1, complement=(bb == "q"))

    sides = {t: sandwich_vec(t, psi) for t in ("pp", "pq", "qp", "qq")}
    commuted = {t: apply_K(apply_pbar(s)) - apply_pbar(apply_K(s))
                for t, s in sides.items()}
    return {f"{left},{right}": complex(np.vdot(sides[left], commuted[right]))
            for left in ("pp", "pq", "qp", "qq")
            for right in ("pp", "pq", "qp", "qq")}


# ---------------------------------------------------------------------------
# corrected convergence functionals

def corrected_alpha(state: ManyBodyState, u: Field, v: Field,
                    g_pair_same: np.ndarray | None, g_pair_cross: np.ndarray | None,
                    weight: WeightFunction, energies: tuple[float, float],
                    species: str = "A") -> float:
    """Weighted depletion plus energy gap, minus pair-correlation corrections.

    base = <psi, w^ psi> + |E_many - E_eff|; the corrections are
    N1(N1-1) Re <psi, g_same(x1-x2) R psi> and
    N1 N2 Re <psi, g_cross(x1-y1) R psi> with
    R = p1 p2 (w^ - w^_2) + (p1 q2 + q1 p2)(w^ - w^_1), where w^_j acts
    as the weight evaluated at k+j on the k-excitation sector.  Pair
    kernels are sampled on the periodic displacement grid; pass None to
    drop a correction (both corrections vanish structurally when the
    species has fewer than two particles).
    """
    b = state.basis
    if species == "A":
        n_own, n_other = b.N1, b.N2
        ax1, ax2, ax_cross = 0, 1, b.N1
        own_orb = u
    elif species == "B":
        n_own, n_other = b.N2, b.N1
        ax1, ax2, ax_cross = b.N1, b.N1 + 1, 0
        own_orb = v
    else:
        raise IndicatorError("species must be 'A' or 'B'")
    if weight.N != n_own:
        raise IndicatorError(f"weight defined for N={weight.N}, species has N={n_own}")

    e_many, e_eff = energies
    base = weight_expectation(state, weight, species, own_orb) + abs(e_many - e_eff)

    no_same = g_pair_same is None or not np.any(g_pair_same)
    no_cross = g_pair_cross is None or not np.any(g_pair_cross)
    if (no_same and no_cross) or n_own < 2:
        return float(base)

    psi = firstquant_vector(state)
    own_site = site_vector(own_orb)
    own_axes = (range(0, b.N1) if species == "A"
                else range(b.N1, b.N1 + b.N2))

    def apply_q_total(x: np.ndarray) -> np.ndarray:
        out = n_own * x
        for i in own_axes:
            out = out - orbital_project(x, own_site, i)
        return out

    parts = _binomial_split(apply_q_total, psi, n_own)
    w0 = weight.values
    w1 = weight.shifted_values(1)
    w2 = weight.shifted_values(2)
    y1 = sum((w0[k] - w1[k]) * parts[k] for k in range(n_own + 1))
    y2 = sum((w0[k] - w2[k]) * parts[k] for k in range(n_own + 1))

    p1p2 = orbital_project(orbital_project(y2, own_site, ax1), own_site, ax2)
    p1q2 = orbital_project(orbital_project(y1, own_site, ax2, complement=True),
                           own_site, ax1)
    q1p2 = orbital_project(orbital_project(y1, own_site, ax1, complement=True),
                           own_site, ax2)
    r_psi = p1p2 + p1q2 + q1p2

    corr = 0.0
    if not no_same:
        val = np.vdot(psi, pair_diagonal(r_psi, np.asarray(g_pair_same, float), ax1, ax2))
        corr += n_own * (n_own - 1) * val.real
    if not no_cross:
        val = np.vdot(psi, pair_diagonal(r_psi, np.asarray(g_pair_cross, float),
                                         ax1, ax_cross))
        corr += b.N1 * b.N2 * val.real
    return float(base - corr)
