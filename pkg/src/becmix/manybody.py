"""Exact two-species bosonic dynamics on a 1D periodic lattice.

States live in the tensor product of the two symmetric sectors, stored
as coefficients over pairs of occupation vectors (one per species).
The Hamiltonian is hopping (3-point periodic stencil of -Laplacian, so
the matrix stays sparse) plus density-density two-body terms sampled on
the periodic displacement:

    H = sum_species kinetic
        + g1 * sum_{i<j} V1(x_i - x_j)   (within species A)
        + g2 * sum_{r<s} V2(y_r - y_s)   (within species B)
        + g12 * sum_{i,r} V12(x_i - y_r) (across species)

with mean-field prefactors g = (1/N1, 1/N2, 1/(N1+N2)) or the
short-range family amplitudes N^{2 beta - 1} V(N^beta x) in which the
argument scaling is folded into the sampled kernel.

Time propagation is a Lanczos approximation of exp(-i dt H) with full
reorthogonalization and adaptive substepping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .grids import Field, Grid, l2_norm

__all__ = [
    "TwoSpeciesBasis",
    "ManyBodyState",
    "HamiltonianSpec",
    "Hamiltonian",
    "ManyBodyError",
    "build_basis",
    "occupation_states",
    "apply_hamiltonian",
    "propagate",
    "product_state",
    "random_state",
    "manybody_energy",
    "save_state",
    "load_state",
]

BASIS_ORDER_TAG = "lex-v1"
DEFAULT_DIM_CAP = 200_000


class ManyBodyError(ValueError):
    pass


def occupation_states(M: int, N: int) -> list[tuple[int, ...]]:
    """All occupation vectors of N bosons on M sites, descending lexicographic.

    (N,0,...,0) comes first, so the single-particle sector enumerates in
    plain site order.
    """
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for n in range(remaining, -1, -1):
            rec(prefix + (n,), remaining - n, slots - 1)

    rec((), N, M)
    return out


@dataclass
class _SpeciesBasis:
    """Occupation enumeration for one species, with site-lowering maps."""

    M: int
    N: int
    occs: np.ndarray                 # (dim, M) int
    index: dict[tuple[int, ...], int]

    @classmethod
    def build(cls, M: int, N: int) -> "_SpeciesBasis":
        occs = occupation_states(M, N)
        arr = np.array(occs, dtype=np.int64).reshape(len(occs), M)
        return cls(M=M, N=N, occs=arr, index={occ: i for i, occ in enumerate(occs)})

    @property
    def dim(self) -> int:
        return self.occs.shape[0]


class TwoSpeciesBasis:
    """Joint basis: (A occupation) x (B occupation), A-major flattening."""

    def __init__(self, M: int, N1: int, N2: int, dim_cap: int = DEFAULT_DIM_CAP):
        if M < 2:
            raise ManyBodyError(f"need at least 2 sites, got {M}")
        if N1 < 1 or N2 < 1:
            raise ManyBodyError("particle numbers must be >= 1")
        dim = math.comb(M + N1 - 1, N1) * math.comb(M + N2 - 1, N2)
        if dim > dim_cap:
            raise ManyBodyError(
                f"basis dimension {dim} exceeds the cap {dim_cap} "
                f"(M={M}, N1={N1}, N2={N2})"
            )
        self.M = M
        self.N1 = N1
        self.N2 = N2
        self.A = _SpeciesBasis.build(M, N1)
        self.B = _SpeciesBasis.build(M, N2)
        self._lowered: dict[str, "TwoSpeciesBasis | _SpeciesBasis"] = {}
        self._lowering: dict[str, list[sp.csr_matrix]] = {}

    @property
    def dim(self) -> int:
        return self.A.dim * self.B.dim

    @property
    def shape(self) -> tuple[int, int]:
        return (self.A.dim, self.B.dim)

    def species(self, tag: str) -> _SpeciesBasis:
        if tag == "A":
            return self.A
        if tag == "B":
            return self.B
        raise ManyBodyError(f"species must be 'A' or 'B', got {tag!r}")

    def particle_number(self, tag: str) -> int:
        return self.N1 if tag == "A" else self.N2

    def lowering_ops(self, tag: str) -> list[sp.csr_matrix]:
        """Per-site annihilation maps into the (N-1)-particle sector.

        lowering_ops(tag)[x] @ psi_species has amplitude sqrt(n_x) on the
        occupation with one particle removed from site x.
        """
        if tag not in self._lowering:
            src = self.species(tag)
            dst = _SpeciesBasis.build(self.M, src.N - 1)
            ops = []
            for x in range(self.M):
                rows, cols, vals = [], [], []
                for i in range(src.dim):
                    n_x = src.occs[i, x]
                    if n_x == 0:
                        continue
                    occ = src.occs[i].copy()
                    occ[x] -= 1
                    j = dst.index[tuple(occ)]
                    rows.append(j)
                    cols.append(i)
                    vals.append(math.sqrt(n_x))
                ops.append(sp.csr_matrix((vals, (rows, cols)), shape=(dst.dim, src.dim)))
            self._lowering[tag] = ops
            self._lowered[tag] = dst
        return self._lowering[tag]

    def lowered_species(self, tag: str) -> _SpeciesBasis:
        self.lowering_ops(tag)
        return self._lowered[tag]  # type: ignore[return-value]


def build_basis(M: int, N1: int, N2: int, dim_cap: int = DEFAULT_DIM_CAP) -> TwoSpeciesBasis:
    return TwoSpeciesBasis(M, N1, N2, dim_cap)


@dataclass
class ManyBodyState:
    """Coefficient array over the joint occupation basis, shape (dimA, dimB)."""

    basis: TwoSpeciesBasis
    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.complex128)
        if psi.shape != self.basis.shape:
            if psi.size == self.basis.dim:
                psi = psi.reshape(self.basis.shape)
            else:
                raise ManyBodyError(
                    f"coefficient count {psi.size} does not match basis dim {self.basis.dim}"
                )
        self.psi = psi

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def normalized(self) -> "ManyBodyState":
        n = self.norm
        if n == 0:
            raise ManyBodyError("cannot normalize the zero state")
        return ManyBodyState(self.basis, self.psi / n, self.time)


def _displacement_kernel(grid: Grid, V) -> np.ndarray:
    """Sample V on the signed periodic displacement of a 1D grid.

    Accepts a Field (values are taken as the kernel directly, validated
    even) or a callable evaluated at the wrapped displacement.
    """
    if grid.dim != 1:
        raise ManyBodyError("the many-body harness is one-dimensional")
    M = grid.points_per_axis
    if isinstance(V, Field):
        if V.grid != grid:
            raise ManyBodyError("potential field lives on a different grid")
        vals = V.values.real.copy()
        if not V.is_real(1e-10):
            raise ManyBodyError("potential must be real")
    else:
        d = grid.signed_coordinates()[0]
        vals = np.asarray(V(np.abs(d)), dtype=float)
    if np.max(np.abs(vals - np.roll(vals[::-1], 1))) > 1e-10 * (np.max(np.abs(vals)) or 1.0):
        raise ManyBodyError("potential kernel is not even under site reflection")
    return vals


@dataclass
class HamiltonianSpec:
    """Scaling tag plus sampled two-body kernels and particle numbers.

    Kernels carry their interaction prefactors already folded in, so the
    Hamiltonian is literally hopping + sum of sampled kernels.
    """

    grid: Grid
    N1: int
    N2: int
    kernel1: np.ndarray
    kernel2: np.ndarray
    kernel12: np.ndarray
    scaling: str = "mean_field"
    beta: float | None = None

    @property
    def c1(self) -> float:
        return self.N1 / (self.N1 + self.N2)

    @property
    def c2(self) -> float:
        return self.N2 / (self.N1 + self.N2)

    @classmethod
    def mean_field(cls, grid: Grid, V1, V2, V12, N1: int, N2: int) -> "HamiltonianSpec":
        k1 = _displacement_kernel(grid, V1) / N1
        k2 = _displacement_kernel(grid, V2) / N2
        k12 = _displacement_kernel(grid, V12) / (N1 + N2)
        return cls(grid, N1, N2, k1, k2, k12, scaling="mean_field")

    @classmethod
    def beta_family(cls, grid: Grid, V1: Callable, V2: Callable, V12: Callable,
                    N1: int, N2: int, beta: float) -> "HamiltonianSpec":
        """1D short-range family: kernel_N(x) = N^{2 beta - 1} V(N^beta x).

        beta -> 0 recovers the mean-field prefactor 1/N; beta -> 1 is the
        strongly concentrated limit (out of desk-scale reach, but exposed).
        """
        if not (0.0 < beta < 1.0):
            raise ManyBodyError("beta must lie in (0, 1) for the lattice family")
        d = np.abs(grid.signed_coordinates()[0])

        def sample(V, N):
            s = float(N) ** beta
            return float(N) ** (2.0 * beta - 1.0) * np.asarray(V(d * s), dtype=float)

        return cls(grid, N1, N2, sample(V1, N1), sample(V2, N2), sample(V12, N1 + N2),
                   scaling="beta_family", beta=beta)

    def bare_kernel(self, which: str) -> np.ndarray:
        """Kernel without the mean-field 1/N prefactor (dressing potentials)."""
        if self.scaling != "mean_field":
            raise ManyBodyError("bare kernels are defined for the mean-field scaling")
        if which == "1":
            return self.kernel1 * self.N1
        if which == "2":
            return self.kernel2 * self.N2
        if which == "12":
            return self.kernel12 * (self.N1 + self.N2)
        raise ManyBodyError(f"which must be '1', '2' or '12', got {which!r}")


def _circulant(kernel: np.ndarray) -> np.ndarray:
    M = kernel.size
    i = np.arange(M)
    return kernel[(i[:, None] - i[None, :]) % M]


def _hop_matrix(species: _SpeciesBasis, h: float) -> sp.csr_matrix:
    """Off-diagonal part of the stencil kinetic term, second-quantized.

    (1/h^2) sum_j [-a+_{j+1} a_j - a+_j a_{j+1}]; the diagonal 2 N / h^2
    is accounted for separately as a constant.
    """
    M = species.M
    rows, cols, vals = [], [], []
    for i in range(species.dim):
        occ = species.occs[i]
        for s in range(M):
            n_s = occ[s]
            if n_s == 0:
                continue
            for t in ((s + 1) % M, (s - 1) % M):
                if t == s:
                    continue
                new = occ.copy()
                new[s] -= 1
                new[t] += 1
                j = species.index[tuple(new)]
                rows.append(j)
                cols.append(i)
                vals.append(-math.sqrt(n_s * (occ[t] + 1)) / h**2)
    out = sp.csr_matrix((vals, (rows, cols)), shape=(species.dim, species.dim))
    out.sum_duplicates()
    return out


def _intra_diagonal(species: _SpeciesBasis, kernel: np.ndarray) -> np.ndarray:
    """sum_{i<j} V(x_i - x_j) evaluated on each occupation vector.

    Equals (1/2)[n . C n - V(0) N] with C the circulant kernel matrix;
    the subtraction removes self-pairs so on-site pairs count n(n-1)/2.
    """
    C = _circulant(kernel)
    occ = species.occs.astype(float)
    quad = np.einsum("im,mn,in->i", occ, C, occ)
    return 0.5 * (quad - kernel[0] * species.N)


class Hamiltonian:
    """Action of one HamiltonianSpec on a fixed basis.

    Assembled once as a sparse matrix over the flattened joint index
    (hopping is a two-sided Kronecker sum, interactions are diagonal);
    `apply` accepts either the flat or the (dimA, dimB) layout.
    """

    def __init__(self, spec: HamiltonianSpec, basis: TwoSpeciesBasis):
        if (spec.N1, spec.N2) != (basis.N1, basis.N2):
            raise ManyBodyError("spec particle numbers do not match the basis")
        if spec.grid.points_per_axis != basis.M:
            raise ManyBodyError("spec grid size does not match the basis")
        self.spec = spec
        self.basis = basis
        h = spec.grid.spacing
        self.hop_A = _hop_matrix(basis.A, h)
        self.hop_B = _hop_matrix(basis.B, h)
        kin_const = 2.0 * (basis.N1 + basis.N2) / h**2
        diag = (kin_const
                + _intra_diagonal(basis.A, spec.kernel1)[:, None]
                + _intra_diagonal(basis.B, spec.kernel2)[None, :])
        # cross term: sum_{s,t} V12(d(s,t)) nA_s nB_t
        C12 = _circulant(spec.kernel12)
        diag = diag + basis.A.occs.astype(float) @ C12 @ basis.B.occs.T.astype(float)
        self.diag = diag
        self.matrix = (sp.kron(self.hop_A, sp.identity(basis.B.dim, format="csr"))
                       + sp.kron(sp.identity(basis.A.dim, format="csr"), self.hop_B)
                       + sp.diags(diag.ravel())).tocsr()

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if psi.ndim == 1:
            return self.matrix @ psi
        return (self.matrix @ psi.ravel()).reshape(psi.shape)

    def expectation(self, state: ManyBodyState) -> float:
        val = np.vdot(state.psi, self.apply(state.psi))
        return float(val.real)

    def propagate(self, state: ManyBodyState, dt: float, *, krylov_dim: int = 30,
                  tol: float = 1e-12, max_substeps: int = 4096) -> ManyBodyState:
        return propagate(self, state, dt, krylov_dim=krylov_dim, tol=tol,
                         max_substeps=max_substeps)


def apply_hamiltonian(spec: HamiltonianSpec | Hamiltonian, state: ManyBodyState) -> ManyBodyState:
    """H applied to a state (unnormalized result; Hermitian, sector-preserving)."""
    H = spec if isinstance(spec, Hamiltonian) else Hamiltonian(spec, state.basis)
    if H.basis is not state.basis and H.basis.shape != state.basis.shape:
        raise ManyBodyError("state and Hamiltonian bases differ")
    return ManyBodyState(state.basis, H.apply(state.psi), state.time)


def _expi_tridiag(alphas: Sequence[float], betas: Sequence[float], dt: float) -> np.ndarray:
    """First column of exp(-i dt T) for the real symmetric tridiagonal T."""
    if len(alphas) == 1:
        return np.array([np.exp(-1j * dt * alphas[0])])
    lam, U = scipy.linalg.eigh_tridiagonal(np.asarray(alphas, float), np.asarray(betas, float))
    return U @ (np.exp(-1j * dt * lam) * U[0, :])


def _lanczos_expm(apply_H, psi: np.ndarray, dt: float, m_max: int, tol: float):
    """One Krylov approximation of exp(-i dt H) psi.

    Returns (result, converged).  Convergence uses the standard residual
    estimate beta_m * |last component of exp(-i dt T) e1|; full
    reorthogonalization (vectorized against the stored basis) keeps the
    basis clean at these sizes.
    """
    beta0 = np.linalg.norm(psi)
    if beta0 == 0:
        return psi, True
    dim = psi.size
    V = np.empty((m_max + 1, dim), dtype=np.complex128)
    V[0] = psi / beta0
    alphas: list[float] = []
    betas: list[float] = []
    w = apply_H(V[0])
    a = float(np.vdot(V[0], w).real)
    alphas.append(a)
    w = w - a * V[0]
    scale = max(1.0, abs(a))
    y = np.array([np.exp(-1j * dt * a)])
    for j in range(1, m_max + 1):
        # reorthogonalize against everything computed so far (two passes)
        for _ in range(2):
            coeffs = V[:j].conj() @ w
            w = w - V[:j].T @ coeffs
        b = float(np.linalg.norm(w))
        if b < 1e-14 * scale:
            # breakdown: the Krylov space is invariant, the result is exact
            y = _expi_tridiag(alphas, betas, dt)
            return beta0 * (V[:j].T @ y), True
        betas.append(b)
        scale = max(scale, b)
        V[j] = w / b
        w = apply_H(V[j])
        a = float(np.vdot(V[j], w).real)
        alphas.append(a)
        scale = max(scale, abs(a))
        w = w - a * V[j] - b * V[j - 1]
        y = _expi_tridiag(alphas, betas, dt)
        if j >= 2 and abs(betas[-1] * y[-1]) < tol:
            return beta0 * (V[:j + 1].T @ y), True
    return beta0 * (V[:len(y)].T @ y), False


def propagate(spec: HamiltonianSpec | Hamiltonian, state: ManyBodyState, dt: float, *,
              krylov_dim: int = 30, tol: float = 1e-12,
              max_substeps: int = 4096) -> ManyBodyState:
    """exp(-i dt H) state by Lanczos, substepping until the residual converges.

    dt may be negative (backward evolution); norm is preserved to the
    Krylov tolerance per step and never renormalized.
    """
    if dt == 0.0:
        raise ManyBodyError("dt must be nonzero")
    H = spec if isinstance(spec, Hamiltonian) else Hamiltonian(spec, state.basis)
    shape = state.psi.shape
    flat_apply = lambda x: H.apply(x.reshape(shape)).ravel()
    n_sub = 1
    while n_sub <= max_substeps:
        psi = state.psi.ravel().copy()
        ok = True
        for _ in range(n_sub):
            psi, converged = _lanczos_expm(flat_apply, psi, dt / n_sub, krylov_dim, tol)
            if not converged:
                ok = False
                break
        if ok:
            return ManyBodyState(state.basis, psi.reshape(shape), state.time + dt)
        n_sub *= 2
    raise ManyBodyError(f"Krylov propagation failed to converge with {max_substeps} substeps")


def product_state(u: Field, v: Field, basis: TwoSpeciesBasis) -> ManyBodyState:
    """Condensed state u^(N1) x v^(N2) in the occupation basis.

    The coefficient on occupation n is sqrt(N!/prod n_j!) prod u_j^{n_j}
    with u expressed as a unit vector in the site basis (values times
    sqrt(h)); the result is normalized to kill round-off.
    """
    for name, f in (("u", u), ("v", v)):
        n = l2_norm(f)
        if n == 0:
            raise ManyBodyError(f"orbital {name} has zero norm")
        if abs(n - 1.0) > 1e-8:
            raise ManyBodyError(f"orbital {name} must be normalized, got norm {n}")

    def species_coeffs(f: Field, species: _SpeciesBasis) -> np.ndarray:
        site = f.values.ravel() * math.sqrt(f.grid.volume_element)
        coeffs = np.empty(species.dim, dtype=np.complex128)
        logN = math.lgamma(species.N + 1)
        for i in range(species.dim):
            occ = species.occs[i]
            amp = math.exp(0.5 * (logN - sum(math.lgamma(n + 1) for n in occ)))
            prod = 1.0 + 0.0j
            for x in range(species.M):
                if occ[x]:
                    prod *= site[x] ** int(occ[x])
            coeffs[i] = amp * prod
        return coeffs

    psi = np.outer(species_coeffs(u, basis.A), species_coeffs(v, basis.B))
    psi /= np.linalg.norm(psi)
    return ManyBodyState(basis, psi, 0.0)


def random_state(basis: TwoSpeciesBasis, rng: np.random.Generator) -> ManyBodyState:
    psi = rng.standard_normal(basis.shape) + 1j * rng.standard_normal(basis.shape)
    return ManyBodyState(basis, psi / np.linalg.norm(psi), 0.0)


def manybody_energy(spec: HamiltonianSpec | Hamiltonian, state: ManyBodyState) -> float:
    """Energy per particle <psi, H psi> / (N1 + N2)."""
    H = spec if isinstance(spec, Hamiltonian) else Hamiltonian(spec, state.basis)
    return H.expectation(state) / (state.basis.N1 + state.basis.N2)


_STATE_MAGIC = "becmix-state 1"


def save_state(state: ManyBodyState, grid: Grid, path) -> None:
    """Checkpoint: structured-text header plus little-endian coefficients."""
    b = state.basis
    header = (
        f"{_STATE_MAGIC}\n"
        f"M = {b.M}\n"
        f"L = {grid.length_per_axis!r}\n"
        f"N1 = {b.N1}\n"
        f"N2 = {b.N2}\n"
        f"time = {state.time!r}\n"
        f"basis_order = {BASIS_ORDER_TAG}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(state.psi).astype("<c16").tobytes())


def load_state(path) -> tuple[ManyBodyState, Grid]:
    with open(path, "rb") as fh:
        raw = fh.read()
    head, _, payload = raw.partition(b"\n\n")
    lines = head.decode("ascii").splitlines()
    if not lines or lines[0] != _STATE_MAGIC:
        raise ManyBodyError(f"{path}: not a state checkpoint")
    meta = {}
    for line in lines[1:]:
        key, _, val = line.partition("=")
        meta[key.strip()] = val.strip()
    if meta.get("basis_order") != BASIS_ORDER_TAG:
        raise ManyBodyError(
            f"{path}: basis order {meta.get('basis_order')!r} does not match {BASIS_ORDER_TAG!r}"
        )
    basis = build_basis(int(meta["M"]), int(meta["N1"]), int(meta["N2"]))
    grid = Grid(1, basis.M, float(meta["L"]))
    psi = np.frombuffer(payload, dtype="<c16", count=basis.dim)
    return ManyBodyState(basis, psi.reshape(basis.shape), float(meta["time"])), grid
