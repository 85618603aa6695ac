import math

import numpy as np
import pytest

from becmix.grids import Field, Grid, make_grid, normalize
from becmix.fock import firstquant_vector, site_vector
from becmix.manybody import (
    Hamiltonian,
    HamiltonianSpec,
    ManyBodyState,
    build_basis,
    product_state,
    random_state,
)
from becmix.indicators import (
    IndicatorError,
    alpha_11,
    condensate_depletion,
    corrected_alpha,
    counting_projectors,
    derivative_decomposition,
    insertion_terms,
    marginal_bounds_check,
    reduce_density,
    trace_distance,
    weight_expectation,
    weight_m,
    weight_n,
    weight_s,
)


def _grid_and_orbitals(M=4, L=2.0):
    g = Grid(1, M, L)
    x = g.axis_coordinates
    u = normalize(Field(g, 1 + 0.4 * np.cos(2 * np.pi * x / L)))
    v = normalize(Field(g, np.exp(2j * np.pi * x / L) * (1 + 0.2 * np.cos(2 * np.pi * x / L))))
    return g, u, v


def _perp(orbital: Field, other: Field) -> Field:
    """Normalized component of `other` orthogonal to `orbital`."""
    us = orbital.values
    ovr = np.vdot(us, other.values) / np.vdot(us, us)
    return normalize(Field(orbital.grid, other.values - ovr * us))


def _state_from_pair(basis, a: Field, b: Field) -> ManyBodyState:
    # N1 = N2 = 1 state with coefficients a(x) b(y)
    h = a.grid.spacing
    return ManyBodyState(basis, np.outer(a.values * np.sqrt(h), b.values * np.sqrt(h)))


# ---------------------------------------------------------------------------
# reduced density matrices

def test_reduce_product_is_rank_one():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 2, 2)
    ps = product_state(u, v, basis)
    gam = reduce_density(ps, (1, 1))
    gam.validate(1e-10)
    ref = np.outer(np.kron(site_vector(u), site_vector(v)),
                   np.conj(np.kron(site_vector(u), site_vector(v))))
    assert np.max(np.abs(gam.matrix - ref)) < 1e-12


def test_reduce_schmidt_oracle():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 1, 1)
    rng = np.random.default_rng(0)
    psi = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    psi /= np.linalg.norm(psi)
    st = ManyBodyState(basis, psi)
    gam = reduce_density(st, (1, 0))
    eig = np.sort(np.linalg.eigvalsh(gam.matrix))
    schmidt = np.sort(np.linalg.svd(psi, compute_uv=False) ** 2)
    assert np.max(np.abs(eig - schmidt)) < 1e-12


def test_reduce_maximally_mixed():
    basis = build_basis(2, 1, 1)
    psi = np.zeros((2, 2), dtype=complex)
    psi[0, 1] = psi[1, 0] = 1 / math.sqrt(2)
    st = ManyBodyState(basis, psi)
    gam = reduce_density(st, (1, 0))
    assert np.max(np.abs(gam.matrix - np.eye(2) / 2)) < 1e-12


def test_reduce_pair_traces_to_single_species():
    basis = build_basis(4, 2, 2)
    st = random_state(basis, np.random.default_rng(1))
    g11 = reduce_density(st, (1, 1)).matrix.reshape(4, 4, 4, 4)
    for kind, spec_axis in (((1, 0), "xyzy->xz"), ((0, 1), "yxyz->xz")):
        partial = np.einsum(spec_axis, g11)
        single = reduce_density(st, kind).matrix
        assert np.max(np.abs(partial - single)) < 1e-12


def test_reduce_invariants_on_random_states():
    basis = build_basis(3, 2, 2)
    rng = np.random.default_rng(2)
    for _ in range(10):
        st = random_state(basis, rng)
        for kind in ((1, 0), (0, 1), (1, 1)):
            reduce_density(st, kind).validate(1e-12)


def test_reduce_rejects_unknown_kind():
    basis = build_basis(3, 1, 1)
    st = random_state(basis, np.random.default_rng(3))
    with pytest.raises(IndicatorError):
        reduce_density(st, (2, 0))


# ---------------------------------------------------------------------------
# overlap deficit, trace distance, marginal bounds

def test_alpha_examples():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 2, 2)
    ps = product_state(u, v, basis)
    assert abs(alpha_11(ps, u, v)) < 1e-12

    u_perp = _perp(u, Field(g, np.exp(2j * np.pi * g.axis_coordinates / 2.0)))
    assert alpha_11(ps, u_perp, v) == pytest.approx(1.0, abs=1e-12)

    basis11 = build_basis(4, 1, 1)
    v_perp = _perp(v, Field(g, 1 + 0.7 * np.cos(4 * np.pi * g.axis_coordinates / 2.0)))
    half = ManyBodyState(basis11, (_state_from_pair(basis11, u, v).psi
                                   + _state_from_pair(basis11, u_perp, v_perp).psi)
                         / math.sqrt(2))
    assert alpha_11(half, u, v) == pytest.approx(0.5, abs=1e-12)


def test_trace_distance_examples():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 1, 1)
    ps = _state_from_pair(basis, u, v)
    gam = reduce_density(ps, (1, 1))
    assert trace_distance(gam, u, v) < 1e-12

    u_perp = _perp(u, Field(g, np.exp(2j * np.pi * g.axis_coordinates / 2.0)))
    assert trace_distance(gam, u_perp, v) == pytest.approx(2.0, abs=1e-12)

    # pure states with squared overlap 1/2: distance 2 sqrt(1 - 1/2)
    mix = normalize(Field(g, u.values + u_perp.values))
    gam2 = reduce_density(_state_from_pair(basis, mix, v), (1, 1))
    assert trace_distance(gam2, u, v) == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_marginal_bounds_product_and_fully_depleted():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 1, 1)
    ps = _state_from_pair(basis, u, v)
    mb = marginal_bounds_check(ps, u, v)
    assert abs(mb.lhs_max) < 1e-12 and abs(mb.middle) < 1e-12 and abs(mb.rhs_sum) < 1e-12

    v_perp = _perp(v, Field(g, 1 + 0.7 * np.cos(4 * np.pi * g.axis_coordinates / 2.0)))
    depleted = _state_from_pair(basis, u, v_perp)
    mb2 = marginal_bounds_check(depleted, u, v)
    assert mb2.lhs_max == pytest.approx(1.0, abs=1e-12)
    assert mb2.middle == pytest.approx(1.0, abs=1e-12)
    assert mb2.rhs_sum == pytest.approx(1.0, abs=1e-12)
    assert mb2.lower_holds and mb2.upper_holds


def test_marginal_bounds_random_states():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 2, 2)
    rng = np.random.default_rng(4)
    for _ in range(50):
        st = random_state(basis, rng)
        mb = marginal_bounds_check(st, u, v)
        assert mb.lower_holds and mb.upper_holds


# ---------------------------------------------------------------------------
# counting projectors and weights

def test_counting_on_product_state():
    g, u, v = _grid_and_orbitals()
    basis = build_basis(4, 3, 2)
    ps = product_state(u, v, basis)
    cp = counting_projectors(basis, u, "A")
    parts = cp.split(ps)
    assert np.max(np.abs(parts[0] - ps.psi)) < 1e-12
    for k in range(1, 4):
        assert np.linalg.norm(parts[k]) < 1e-12


def _occ_from_fq(basis, psi_fq):
    """Inverse of firstquant_vector (representative-tuple evaluation)."""
    out = np.zeros(basis.shape, dtype=complex)
    for iA in range(basis.A.dim):
        occ_a = basis.A.occs[iA]
        tupA = tuple(int(s) for s in np.repeat(np.arange(basis.M), occ_a))
        ampA = math.sqrt(math.factorial(basis.N1)
                         / np.prod([math.factorial(int(n)) for n in occ_a]))
        for iB in range(basis.B.dim):
            occ_b = basis.B.occs[iB]
            tupB = tuple(int(s) for s in np.repeat(np.arange(basis.M), occ_b))
            ampB = math.sqrt(math.factorial(basis.N2)
                             / np.prod([math.factorial(int(n)) for n in occ_b]))
            out[iA, iB] = psi_fq[tupA + tupB] * ampA * ampB
    return out


def test_counting_one_excitation_state():
    g, u, v = _grid_and_orbitals(M=3)
    basis = build_basis(3, 2, 1)
    u_perp = _perp(u, Field(g, np.exp(2j * np.pi * g.axis_coordinates / 2.0)))
    us, ps_ = site_vector(u), site_vector(u_perp)
    vs = site_vector(v)
    fq = (np.einsum("a,b,c->abc", us, ps_, vs)
          + np.einsum("a,b,c->abc", ps_, us, vs)) / math.sqrt(2)
    st = ManyBodyState(basis, _occ_from_fq(basis, fq))
    assert abs(st.norm - 1.0) < 1e-12
    cp = counting_projectors(basis, u, "A")
    parts = cp.split(st)
    assert np.max(np.abs(parts[1] - st.psi)) < 1e-12
    assert np.linalg.norm(parts[0]) < 1e-12
    assert np.linalg.norm(parts[2]) < 1e-12


def test_counting_resolution_orthogonality_and_q():
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 3, 1)
    rng = np.random.default_rng(5)
    cp = counting_projectors(basis, u, "A")
    st = random_state(basis, rng)
    parts = cp.split(st)
    assert np.max(np.abs(sum(parts) - st.psi)) < 1e-12
    weights = cp.sector_weights(st)
    assert np.sum(weights) == pytest.approx(1.0, abs=1e-12)
    # orthogonality: re-splitting one sector leaves it alone
    again = cp.split(ManyBodyState(basis, parts[2]))
    for j, p in enumerate(again):
        target = parts[2] if j == 2 else np.zeros_like(parts[2])
        assert np.max(np.abs(p - target)) < 1e-12
    # sum_k k P_k reproduces Q
    from becmix.indicators import _ModeOps
    mode = _ModeOps(basis, "A", u)
    q_direct = mode.q_total(st.psi)
    q_spectral = sum(k * p for k, p in enumerate(parts))
    assert np.max(np.abs(q_direct - q_spectral)) < 1e-12


def test_counting_matches_literal_symmetrized_strings():
    # N = 2, M = 3: P0 = p1 p2, P1 = q1 p2 + p1 q2, P2 = q1 q2
    g, u, v = _grid_and_orbitals(M=3)
    basis = build_basis(3, 2, 1)
    us = site_vector(u)
    P = np.outer(us, np.conj(us))
    Q = np.eye(3) - P

    def embed(mats):
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    I = np.eye(3)
    strings = [embed([P, P, I]),
               embed([Q, P, I]) + embed([P, Q, I]),
               embed([Q, Q, I])]
    rng = np.random.default_rng(6)
    st = random_state(basis, rng)
    fq = firstquant_vector(st).reshape(-1)
    cp = counting_projectors(basis, u, "A")
    parts = cp.split(st)
    for k in range(3):
        ours = firstquant_vector(ManyBodyState(basis, parts[k])).reshape(-1)
        theirs = strings[k] @ fq
        assert np.max(np.abs(ours - theirs)) < 1e-12


def test_weight_families():
    N = 5
    ws, wn = weight_s(N), weight_n(N)
    assert ws.values[0] == 0.0 and ws.values[-1] == 1.0
    assert np.allclose(wn.values, np.sqrt(np.arange(N + 1) / N))
    assert np.all(wn.values >= ws.values)

    for N, xi in ((2, 0.2), (3, 0.2), (8, 0.35), (16, 0.1)):
        wm = weight_m(N, xi)
        vals = wm.values
        assert wm(0) == pytest.approx(0.5 * N ** (-xi))
        assert wm(N) == pytest.approx(1.0)
        nvals = weight_n(N).values
        cap = np.maximum(nvals, N ** (-xi))
        assert np.all(vals >= nvals - 1e-12)
        assert np.all(vals <= cap + 1e-12)
    with pytest.raises(IndicatorError):
        weight_m(4, 0.0)


def test_weight_m_crossover_continuity():
    # choose N, xi with an integer crossover: N = 16, xi = 0.25 -> k* = 4
    N, xi = 16, 0.25
    wm = weight_m(N, xi)
    k_star = round(N ** (1 - 2 * xi))
    upper = math.sqrt(k_star / N)
    lower = 0.5 * (N ** (xi - 1.0) * k_star + N ** (-xi))
    assert upper == pytest.approx(lower, abs=1e-14)
    assert wm(k_star) == pytest.approx(N ** (-xi), abs=1e-14)


def test_weight_expectations():
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 2, 2)
    ps = product_state(u, v, basis)
    for w in (weight_s(2), weight_n(2), weight_m(2, 0.2)):
        assert weight_expectation(ps, w, "A", u) == pytest.approx(w(0), abs=1e-12)

    rng = np.random.default_rng(7)
    from becmix.indicators import _ModeOps
    mode = _ModeOps(basis, "A", u)
    for _ in range(10):
        st = random_state(basis, rng)
        es = weight_expectation(st, weight_s(2), "A", u)
        en = weight_expectation(st, weight_n(2), "A", u)
        em = weight_expectation(st, weight_m(2, 0.2), "A", u)
        q_exp = np.vdot(st.psi, mode.q_total(st.psi)).real / 2
        assert es == pytest.approx(q_exp, abs=1e-12)   # s = Q/N
        assert en >= es - 1e-12                        # n >= s pointwise
        assert em >= en - 1e-12                        # m >= n pointwise
        lo, hi = 0.0, 1.0
        assert lo - 1e-12 <= es <= hi + 1e-12


def test_weight_expectation_species_b():
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 1, 3)
    ps = product_state(u, v, basis)
    assert weight_expectation(ps, weight_n(3), "B", v) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(IndicatorError):
        weight_expectation(ps, weight_n(2), "B", v)


def test_shift_gap_norm_bound():
    # ||(m^ - m^_1) psi|| <= sup_k |m(k+1) - m(k)| ||psi||
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 3, 1)
    wm = weight_m(3, 0.2)
    bound = wm.max_step()
    cp = counting_projectors(basis, u, "A")
    rng = np.random.default_rng(8)
    for _ in range(10):
        st = random_state(basis, rng)
        parts = cp.split(st)
        w0, w1 = wm.values, wm.shifted_values(1)
        diff = sum((w0[k] - w1[k]) * parts[k] for k in range(4))
        assert np.linalg.norm(diff) <= bound + 1e-12


# ---------------------------------------------------------------------------
# derivative channels

def _meanfield_problem(M=6, N1=2, N2=2, amps=(0.6, 0.4, 0.5)):
    g = make_grid(1, M, 2 * np.pi)
    x = g.axis_coordinates
    V1 = Field(g, amps[0] * np.cos(x))
    V2 = Field(g, amps[1] * np.cos(2 * x))
    V12 = Field(g, amps[2] * np.cos(x))
    u = normalize(Field(g, 1 + 0.3 * np.cos(x)))
    v = normalize(Field(g, 1 + 0.25 * np.cos(2 * x)))
    basis = build_basis(M, N1, N2)
    spec = HamiltonianSpec.mean_field(g, V1, V2, V12, N1, N2)
    return g, V1, V2, V12, u, v, basis, spec


def test_derivative_channels_vanish_without_potentials():
    g, *_ = _meanfield_problem()
    zero = Field(g, np.zeros(6))
    basis = build_basis(6, 2, 2)
    spec = HamiltonianSpec.mean_field(g, zero, zero, zero, 2, 2)
    _, _, _, _, u, v, _, _ = _meanfield_problem()
    st = random_state(basis, np.random.default_rng(9))
    ch = derivative_decomposition(st, u, v, spec)
    assert abs(ch.c_v1) < 1e-12 and abs(ch.c_v2) < 1e-12 and abs(ch.c_v12) < 1e-12


def test_derivative_channels_purely_imaginary_and_v12_zero():
    g, V1, V2, _, u, v, basis, _ = _meanfield_problem()
    zero = Field(g, np.zeros(6))
    spec = HamiltonianSpec.mean_field(g, V1, V2, zero, 2, 2)
    st = random_state(basis, np.random.default_rng(10))
    ch = derivative_decomposition(st, u, v, spec)
    assert abs(ch.c_v12) < 1e-12
    for c in (ch.c_v1, ch.c_v2):
        assert abs(c.real) < 1e-10


def test_derivative_identity_second_order():
    from becmix.effective import CouplingSpec, OrbitalState, step

    g, V1, V2, V12, u, v, basis, spec = _meanfield_problem(M=8)
    H = Hamiltonian(spec, basis)
    eff_spec = CouplingSpec.hartree(V1, V2, V12, c1=0.5, kinetic="stencil")
    psi = product_state(u, v, basis)
    eff = OrbitalState((u, v), 0.0)
    for _ in range(50):
        psi = H.propagate(psi, 1e-3)
        eff = step(eff, eff_spec, 1e-3)
    ch = derivative_decomposition(psi, eff.components[0], eff.components[1], spec)

    def fd(dt, nsub=32):
        plus, minus = H.propagate(psi, dt), H.propagate(psi, -dt)
        ep = em = eff
        for _ in range(nsub):
            ep = step(ep, eff_spec, dt / nsub)
            em = step(em, eff_spec, -dt / nsub)
        ap = alpha_11(plus, ep.components[0], ep.components[1])
        am = alpha_11(minus, em.components[0], em.components[1])
        return (ap - am) / (2 * dt)

    errs = [abs(fd(dt) - ch.alpha_dot) for dt in (1e-3, 5e-4, 2.5e-4)]
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=1.0)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=1.0)


def test_derivative_requires_mean_field_scaling():
    g, *_ = _meanfield_problem()
    V = lambda r: np.exp(-np.asarray(r) ** 2)
    spec = HamiltonianSpec.beta_family(g, V, V, V, 2, 2, beta=0.5)
    basis = build_basis(6, 2, 2)
    _, _, _, _, u, v, _, _ = _meanfield_problem()
    st = random_state(basis, np.random.default_rng(11))
    with pytest.raises(IndicatorError):
        derivative_decomposition(st, u, v, spec)


# ---------------------------------------------------------------------------
# insertion sandwiches

def test_insertion_identities_random_states():
    g, u, v = _grid_and_orbitals(M=4)
    x = g.axis_coordinates
    V12 = Field(g, 0.7 * np.cos(2 * np.pi * x / 2.0) + 0.2 * np.cos(4 * np.pi * x / 2.0))
    basis = build_basis(4, 2, 2)
    rng = np.random.default_rng(12)
    for _ in range(10):
        st = random_state(basis, rng)
        t = insertion_terms(st, u, v, V12)
        assert len(t) == 16
        assert abs(t["pp,pp"]) < 1e-12
        assert abs(t["qq,qq"]) < 1e-12
        assert abs(t["pq,pq"] + t["qp,qp"]) < 1e-12
        assert abs(t["pp,qp"] + np.conj(t["pp,qp"])) < 1e-10
        total = sum(t.values())
        assert abs(total.real) < 1e-10  # the full commutator expectation is imaginary


def test_insertion_sum_matches_direct_commutator():
    from becmix.fock import axis_diagonal, orbital_project, pair_diagonal
    from becmix.manybody import _circulant

    g, u, v = _grid_and_orbitals(M=4)
    x = g.axis_coordinates
    V12 = Field(g, 0.6 * np.cos(2 * np.pi * x / 2.0))
    basis = build_basis(4, 2, 2)
    st = random_state(basis, np.random.default_rng(13))
    t = insertion_terms(st, u, v, V12)

    psi = firstquant_vector(st)
    us, vs = site_vector(u), site_vector(v)
    h = g.spacing
    kern = V12.values.real
    dress_a = h * (_circulant(kern) @ (np.abs(v.values) ** 2))
    dress_b = h * (_circulant(kern) @ (np.abs(u.values) ** 2))

    def K(xv):
        out = pair_diagonal(xv, kern, 0, 2)
        out -= axis_diagonal(xv, dress_a, 0)
        out -= axis_diagonal(xv, dress_b, 2)
        return out

    def Pbar(xv):
        acc = np.zeros_like(xv)
        for i in (0, 1):
            acc += orbital_project(xv, us, i)
        out = acc
        acc = np.zeros_like(xv)
        for r in (2, 3):
            acc += orbital_project(out, vs, r)
        return acc / 4

    direct = np.vdot(psi, K(Pbar(psi)) - Pbar(K(psi)))
    assert abs(sum(t.values()) - direct) < 1e-12


def test_insertion_zero_potential():
    g, u, v = _grid_and_orbitals(M=3)
    basis = build_basis(3, 2, 2)
    st = random_state(basis, np.random.default_rng(14))
    t = insertion_terms(st, u, v, Field(g, np.zeros(3)))
    assert max(abs(val) for val in t.values()) < 1e-14


# ---------------------------------------------------------------------------
# corrected functionals

def test_corrected_alpha_product_reduces_to_weight_floor():
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 3, 2)
    ps = product_state(u, v, basis)
    wm = weight_m(3, 0.2)
    val = corrected_alpha(ps, u, v, None, None, wm, (2.0, 2.0))
    assert val == pytest.approx(wm(0), abs=1e-12)
    # the energy gap enters through its absolute value
    val2 = corrected_alpha(ps, u, v, None, None, wm, (2.0, 1.5))
    assert val2 == pytest.approx(wm(0) + 0.5, abs=1e-12)


def test_corrected_alpha_dense_oracle():
    # dense spectral reimplementation on the full tensor grid at (2,1), M=3
    g, u, v = _grid_and_orbitals(M=3)
    basis = build_basis(3, 2, 1)
    rng = np.random.default_rng(15)
    st = random_state(basis, rng)
    M = 3
    d = np.where(g.axis_coordinates >= 1.0, g.axis_coordinates - 2.0, g.axis_coordinates)
    g_same = 0.3 * np.exp(-np.abs(d))
    g_cross = 0.2 * np.cos(2 * np.pi * d / 2.0) ** 2
    wm = weight_m(2, 0.3)
    energies = (1.3, 1.1)
    ours = corrected_alpha(st, u, v, g_same, g_cross, wm, energies)

    us = site_vector(u)
    P1 = np.outer(us, np.conj(us))
    Q1 = np.eye(M) - P1

    def embed(mats):
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    I = np.eye(M)
    p1, p2 = embed([P1, I, I]), embed([I, P1, I])
    q1, q2 = embed([Q1, I, I]), embed([I, Q1, I])
    Q_op = q1 + q2
    lam, U = np.linalg.eigh(Q_op)
    projs = []
    for k in range(3):
        sel = np.abs(lam - k) < 1e-8
        projs.append(U[:, sel] @ U[:, sel].conj().T)
    m_hat = sum(wm(k) * projs[k] for k in range(3))
    m_1 = sum(wm(k + 1) * projs[k] for k in range(3))
    m_2 = sum(wm(k + 2) * projs[k] for k in range(3))
    R = p1 @ p2 @ (m_hat - m_2) + (p1 @ q2 + q1 @ p2) @ (m_hat - m_1)

    idx = np.arange(M**3)
    coords = np.stack([(idx // M**2) % M, (idx // M) % M, idx % M])
    G1 = np.diag(g_same[(coords[0] - coords[1]) % M])
    G12 = np.diag(g_cross[(coords[0] - coords[2]) % M])

    fq = firstquant_vector(st).reshape(-1)
    base = np.vdot(fq, m_hat @ fq).real + abs(energies[0] - energies[1])
    corr = (2 * 1 * np.vdot(fq, G1 @ R @ fq).real
            + 2 * 1 * np.vdot(fq, G12 @ R @ fq).real)
    assert ours == pytest.approx(base - corr, abs=1e-12)


def test_corrected_alpha_single_particle_has_no_corrections():
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 1, 2)
    ps = product_state(u, v, basis)
    wm = weight_m(1, 0.2)
    g_any = np.ones(4)
    val = corrected_alpha(ps, u, v, g_any, g_any, wm, (1.0, 1.0))
    assert val == pytest.approx(wm(0), abs=1e-12)


def test_condensate_depletion_on_pure_orbital():
    g, u, v = _grid_and_orbitals(M=4)
    basis = build_basis(4, 2, 2)
    ps = product_state(u, v, basis)
    assert abs(condensate_depletion(ps, u, "A")) < 1e-12
    u_perp = _perp(u, Field(g, np.exp(2j * np.pi * g.axis_coordinates / 2.0)))
    assert condensate_depletion(ps, u_perp, "A") == pytest.approx(1.0, abs=1e-12)


def test_trace_distance_kind_requirements():
    basis = build_basis(4, 1, 1)
    st = random_state(basis, np.random.default_rng(16))
    g, u, v = _grid_and_orbitals()
    g10 = reduce_density(st, (1, 0))
    g01 = reduce_density(st, (0, 1))
    assert trace_distance(g10, u=u) >= 0.0
    assert trace_distance(g01, v=v) >= 0.0
    with pytest.raises(IndicatorError):
        trace_distance(g01, u=v)  # missing the second-species orbital
    with pytest.raises(IndicatorError):
        trace_distance(reduce_density(st, (1, 1)), u=u)


def test_grid_consistency_guards():
    g, u, v = _grid_and_orbitals(M=4)
    g_other = Grid(1, 6, 2.0)
    x = g_other.axis_coordinates
    basis = build_basis(4, 2, 2)
    st = random_state(basis, np.random.default_rng(17))
    bad_v12 = Field(g_other, np.cos(2 * np.pi * x / 2.0))
    with pytest.raises(IndicatorError):
        insertion_terms(st, u, v, bad_v12)
    g6 = Grid(1, 6, 2.0)
    spec6 = HamiltonianSpec.mean_field(
        g6, Field(g6, np.cos(2 * np.pi * x / 2.0)), Field(g6, np.cos(2 * np.pi * x / 2.0)),
        Field(g6, np.cos(2 * np.pi * x / 2.0)), 2, 2)
    with pytest.raises(IndicatorError):
        derivative_decomposition(st, u, v, spec6)


from hypothesis import given, settings, strategies as st_


@settings(max_examples=15, deadline=None)
@given(seed=st_.integers(0, 10_000))
def test_insertion_identities_random_orbitals(seed):
    rng = np.random.default_rng(seed)
    g = Grid(1, 3, 2.0)
    basis = build_basis(3, 2, 2)

    def rand_orbital():
        return normalize(Field(g, rng.standard_normal(3) + 1j * rng.standard_normal(3)))

    u, v = rand_orbital(), rand_orbital()
    # random even potential: cosine combination
    x = g.axis_coordinates
    V12 = Field(g, rng.standard_normal() * np.cos(2 * np.pi * x / 2.0)
                + rng.standard_normal() * np.cos(4 * np.pi * x / 2.0))
    st = random_state(basis, rng)
    t = insertion_terms(st, u, v, V12)
    assert abs(t["pp,pp"]) < 1e-12
    assert abs(t["qq,qq"]) < 1e-12
    assert abs(t["pq,pq"] + t["qp,qp"]) < 1e-12
    assert abs(t["pp,qp"] + np.conj(t["pp,qp"])) < 1e-10
