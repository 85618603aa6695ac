import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from becmix.grids import Field, make_grid, normalize
from becmix.effective import (
    CouplingSpec,
    EffectiveError,
    OrbitalState,
    conserved_energy,
    evolve,
    gp_energy,
    hartree_energy,
    kinetic_energy,
    magnetization,
    mass,
    step,
)


def _hartree_setup(M=64, L=2 * np.pi, amps=(0.8, 0.6, 0.5), c1=0.5, kinetic="spectral"):
    g = make_grid(1, M, L)
    x = g.axis_coordinates
    V1 = Field(g, amps[0] * np.cos(2 * np.pi * x / L))
    V2 = Field(g, amps[1] * np.cos(4 * np.pi * x / L))
    V12 = Field(g, amps[2] * np.cos(2 * np.pi * x / L))
    u0 = normalize(Field(g, 1 + 0.3 * np.cos(2 * np.pi * x / L)))
    v0 = normalize(Field(g, 1 + 0.25 * np.cos(4 * np.pi * x / L)))
    spec = CouplingSpec.hartree(V1, V2, V12, c1=c1, kinetic=kinetic)
    return g, spec, OrbitalState((u0, v0), 0.0)


def test_free_plane_wave_is_exact():
    g = make_grid(1, 32, 2 * np.pi)
    x = g.axis_coordinates
    u0 = normalize(Field(g, np.exp(2j * x)))
    v0 = normalize(Field(g, np.ones(32)))
    spec = CouplingSpec.gross_pitaevskii(g, 0.0, 0.0, 0.0)
    out = step(OrbitalState((u0, v0), 0.0), spec, 0.37)
    assert np.max(np.abs(out.components[0].values - np.exp(-4j * 0.37) * u0.values)) < 1e-13
    assert out.time == pytest.approx(0.37)


def test_rabi_two_level_oracle():
    g = make_grid(1, 32, 2 * np.pi)
    x = g.axis_coordinates
    phi = normalize(Field(g, np.exp(-((x - np.pi) ** 2))))
    spec = CouplingSpec.rabi(g, 0.0, 1.0)
    state = OrbitalState((phi, Field(g, np.zeros(32))), 0.0)
    traj = evolve(state, spec, 1.0, 1e-3, sample_every=1000)
    m1, m2 = traj.masses[-1]
    assert abs(m1 - math.cos(1.0) ** 2) < 1e-6
    assert abs(m2 - math.sin(1.0) ** 2) < 1e-6


def test_rabi_time_dependent_field_midpoint():
    # B(t) = t: the accumulated angle is t^2/2, exact for the midpoint rule
    g = make_grid(1, 16, 2 * np.pi)
    phi = normalize(Field(g, np.ones(16)))
    spec = CouplingSpec.rabi(g, 0.0, lambda t: t)
    state = OrbitalState((phi, Field(g, np.zeros(16))), 0.0)
    for _ in range(1000):
        state = step(state, spec, 1e-3)
    m1, m2 = mass(state)
    assert abs(m1 - math.cos(0.5) ** 2) < 1e-6
    assert abs(m2 - math.sin(0.5) ** 2) < 1e-6


def test_bright_soliton_oracle_focusing_sign():
    L, M, eta = 40.0, 256, 1.0
    g = make_grid(1, M, L)
    x = g.axis_coordinates - L / 2
    a1 = -1.0 / (8 * np.pi)  # focusing cubic coefficient g = 1
    prof = eta * np.sqrt(2.0) / np.cosh(eta * x)
    state = OrbitalState((Field(g, prof.astype(complex)), Field(g, np.zeros(M))), 0.0)
    spec = CouplingSpec.gross_pitaevskii(g, a1, 0.0, 0.0)
    for _ in range(1000):
        state = step(state, spec, 1e-3)
    exact = prof * np.exp(1j * eta**2)
    assert np.max(np.abs(state.components[0].values - exact)) < 1e-4


def test_second_order_against_fine_reference():
    _, spec, state0 = _hartree_setup()

    def final(dt):
        st = state0
        for _ in range(int(round(0.5 / dt))):
            st = step(st, spec, dt)
        return np.concatenate([c.values for c in st.components])

    ref = final(0.5e-3 / 4)
    errs = [np.linalg.norm(final(dt) - ref) for dt in (4e-3, 2e-3, 1e-3)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)
    assert np.log2(errs[1] / errs[2]) == pytest.approx(2.0, abs=0.2)


def test_mass_and_energy_conservation_hartree():
    _, spec, state0 = _hartree_setup()
    traj = evolve(state0, spec, 1.0, 1e-3, sample_every=100)
    masses = np.array(traj.masses)
    assert np.max(np.abs(masses - masses[0])) < 1e-10
    energies = np.array(traj.energies)
    assert np.max(np.abs(energies - energies[0])) / abs(energies[0]) < 1e-6


def test_energy_conserved_with_asymmetric_populations():
    # the c-weighted functional must be flat even when c1 != 1/2
    _, spec, state0 = _hartree_setup(c1=0.3)
    traj = evolve(state0, spec, 0.5, 1e-3, sample_every=100)
    energies = np.array(traj.energies)
    assert np.max(np.abs(energies - energies[0])) / abs(energies[0]) < 1e-6


def test_gp_energy_examples_and_conservation():
    # constant fields on a unit-volume box with a1 = a2 = 1: 4 pi + 4 pi
    g = make_grid(1, 16, 1.0)
    u = normalize(Field(g, np.ones(16)))
    spec = CouplingSpec.gross_pitaevskii(g, 1.0, 1.0, 0.0)
    st = OrbitalState((u, u), 0.0)
    assert gp_energy(st, spec) == pytest.approx(8 * np.pi, rel=1e-12)

    g2 = make_grid(1, 32, 2 * np.pi)
    x = g2.axis_coordinates
    u2 = normalize(Field(g2, np.exp(2j * x)))
    v2 = normalize(Field(g2, np.ones(32)))
    spec2 = CouplingSpec.gross_pitaevskii(g2, 0.0, 0.0, 0.0)
    assert gp_energy(OrbitalState((u2, v2), 0.0), spec2) == pytest.approx(4.0, rel=1e-12)

    # without cross coupling the functional is conserved along the flow
    spec3 = CouplingSpec.gross_pitaevskii(g2, 0.02, 0.015, 0.0)
    st3 = OrbitalState((normalize(Field(g2, 1 + 0.3 * np.cos(x))),
                        normalize(Field(g2, 1 + 0.2 * np.cos(2 * x)))), 0.0)
    vals = [gp_energy(st3, spec3)]
    for _ in range(1000):
        st3 = step(st3, spec3, 1e-3)
        vals.append(gp_energy(st3, spec3))
    drift = np.max(np.abs(np.array(vals) - vals[0])) / abs(vals[0])
    assert drift < 1e-6


def test_gp_conserved_energy_with_cross_coupling():
    g = make_grid(1, 32, 2 * np.pi)
    x = g.axis_coordinates
    spec = CouplingSpec.gross_pitaevskii(g, 0.02, 0.015, 0.01, c1=0.4)
    st = OrbitalState((normalize(Field(g, 1 + 0.3 * np.cos(x))),
                       normalize(Field(g, 1 + 0.2 * np.cos(2 * x)))), 0.0)
    traj = evolve(st, spec, 1.0, 1e-3, sample_every=100)
    energies = np.array(traj.energies)
    assert np.max(np.abs(energies - energies[0])) / abs(energies[0]) < 1e-6


def test_hartree_energy_values():
    g, spec, st = _hartree_setup(M=32, amps=(0.0, 0.0, 0.0))
    u, v = st.components
    expect = spec.c1 * kinetic_energy(u) + spec.c2 * kinetic_energy(v)
    assert hartree_energy(st, spec) == pytest.approx(expect, rel=1e-12)

    # delta-like V1 acting on a constant u: c2 kin(v) + (c1/2) int |u|^4
    g2 = make_grid(1, 16, 1.0)
    x2 = g2.axis_coordinates
    delta = np.zeros(16)
    delta[0] = 1.0 / g2.spacing
    V1 = Field(g2, delta)
    zero = Field(g2, np.zeros(16))
    u2 = normalize(Field(g2, np.ones(16)))
    v2 = normalize(Field(g2, 1 + 0.4 * np.cos(2 * np.pi * x2)))
    spec2 = CouplingSpec.hartree(V1, zero, zero, c1=0.5)
    st2 = OrbitalState((u2, v2), 0.0)
    expect2 = 0.5 * kinetic_energy(v2) + 0.25  # int |u|^4 = 1 on the unit box
    assert hartree_energy(st2, spec2) == pytest.approx(expect2, rel=1e-12)


def test_wrong_mode_errors():
    g, spec, st = _hartree_setup(M=16)
    with pytest.raises(EffectiveError):
        gp_energy(st, spec)
    spec_gp = CouplingSpec.gross_pitaevskii(g, 0.0, 0.0, 0.0)
    with pytest.raises(EffectiveError):
        hartree_energy(st, spec_gp)


def test_evolve_sampling_and_monotone_times():
    _, spec, st = _hartree_setup(M=16)
    traj = evolve(st, spec, 10e-3, 1e-3, sample_every=1)
    assert len(traj.times) == 11
    assert traj.times[0] == 0.0
    assert np.all(np.diff(traj.times) > 0)


def test_time_reversal():
    for mode in ("hartree", "gp", "rabi"):
        if mode == "hartree":
            _, spec, st = _hartree_setup(M=32)
        else:
            g = make_grid(1, 32, 2 * np.pi)
            x = g.axis_coordinates
            u0 = normalize(Field(g, 1 + 0.3 * np.cos(x)))
            v0 = normalize(Field(g, 1 + 0.2 * np.cos(2 * x)))
            if mode == "gp":
                spec = CouplingSpec.gross_pitaevskii(g, 0.03, 0.02, 0.01)
            else:
                spec = CouplingSpec.rabi(g, 0.03, 0.7)
            st = OrbitalState((u0, v0), 0.0)
        start = np.concatenate([c.values for c in st.components])
        fwd = st
        for _ in range(200):
            fwd = step(fwd, spec, 1e-3)
        back = fwd
        for _ in range(200):
            back = step(back, spec, -1e-3)
        final = np.concatenate([c.values for c in back.components])
        assert np.max(np.abs(final - start)) < 1e-8, mode


@settings(max_examples=10, deadline=None)
@given(theta1=st.floats(0, 2 * np.pi), theta2=st.floats(0, 2 * np.pi))
def test_gauge_covariance_mixture(theta1, theta2):
    _, spec, st = _hartree_setup(M=16)
    u, v = st.components
    rotated = OrbitalState((Field(u.grid, np.exp(1j * theta1) * u.values),
                            Field(v.grid, np.exp(1j * theta2) * v.values)), 0.0)
    a = step(st, spec, 1e-2)
    b = step(rotated, spec, 1e-2)
    assert np.max(np.abs(b.components[0].values
                         - np.exp(1j * theta1) * a.components[0].values)) < 1e-12
    assert np.max(np.abs(b.components[1].values
                         - np.exp(1j * theta2) * a.components[1].values)) < 1e-12


def test_rabi_common_phase_only():
    g = make_grid(1, 16, 2 * np.pi)
    x = g.axis_coordinates
    u = normalize(Field(g, 1 + 0.3 * np.cos(x)))
    v = normalize(Field(g, 1 + 0.2 * np.cos(2 * x)))
    spec = CouplingSpec.rabi(g, 0.02, 0.8)
    st = OrbitalState((u, v), 0.0)
    theta = 0.83
    common = OrbitalState((Field(g, np.exp(1j * theta) * u.values),
                           Field(g, np.exp(1j * theta) * v.values)), 0.0)
    a, b = step(st, spec, 1e-2), step(common, spec, 1e-2)
    for i in range(2):
        assert np.max(np.abs(b.components[i].values
                             - np.exp(1j * theta) * a.components[i].values)) < 1e-12
    # a relative phase does not commute with the population transfer
    rel = OrbitalState((u, Field(g, np.exp(1j * theta) * v.values)), 0.0)
    c = step(rel, spec, 1e-2)
    assert np.max(np.abs(c.components[0].values - a.components[0].values)) > 1e-6


def _spin1_state(g):
    x = g.axis_coordinates
    u = normalize(Field(g, np.exp(-((x - np.pi) ** 2))))
    v = normalize(Field(g, np.exp(-((x - np.pi + 0.5) ** 2)) * np.exp(1j * x)))
    M = g.points_per_axis
    return OrbitalState((Field(g, u.values * np.sqrt(0.5)),
                         Field(g, v.values * np.sqrt(0.5)),
                         Field(g, np.zeros(M))), 0.0)


def test_spin1_conservation_and_exchange_activity():
    g = make_grid(1, 32, 2 * np.pi)
    spec = CouplingSpec.spin1(g, 0.05)
    traj = evolve(_spin1_state(g), spec, 1.0, 1e-3, sample_every=100)
    masses = np.array(traj.masses)
    total = masses.sum(axis=1)
    assert np.max(np.abs(total - total[0])) < 1e-8
    mags = np.array(traj.magnetizations)
    assert np.max(np.abs(mags - mags[0])) < 1e-8
    assert np.max(np.abs(masses - masses[0])) > 1e-2  # exchange is really moving mass
    energies = np.array(traj.energies)
    assert np.max(np.abs(energies - energies[0])) / abs(energies[0]) < 1e-5


def test_spin1_substep_tolerance_trips_on_absurd_step():
    g = make_grid(1, 16, 2 * np.pi)
    spec = CouplingSpec.spin1(g, 5.0, exchange_tol=1e-10)
    with pytest.raises(EffectiveError):
        step(_spin1_state(g), spec, 5.0)


def test_component_count_mismatch_and_nonfinite():
    g = make_grid(1, 16, 2 * np.pi)
    u = normalize(Field(g, np.ones(16)))
    spec = CouplingSpec.spin1(g, 0.1)
    with pytest.raises(EffectiveError):
        step(OrbitalState((u, u), 0.0), spec, 1e-3)
    bad = Field(g, np.full(16, np.nan, dtype=complex))
    spec2 = CouplingSpec.gross_pitaevskii(g, 0.0, 0.0, 0.0)
    with pytest.raises(EffectiveError):
        step(OrbitalState((bad, u), 0.0), spec2, 1e-3)


def test_potentials_must_be_even_and_real():
    g = make_grid(1, 16, 2.0)
    x = g.axis_coordinates
    odd = Field(g, np.sin(2 * np.pi * x / 2.0))
    even = Field(g, np.cos(2 * np.pi * x / 2.0))
    with pytest.raises(EffectiveError):
        CouplingSpec.hartree(odd, even, even)
    with pytest.raises(EffectiveError):
        CouplingSpec.hartree(Field(g, even.values * 1j), even, even)


def test_trajectory_csv(tmp_path):
    g = make_grid(1, 16, 2 * np.pi)
    spec = CouplingSpec.spin1(g, 0.05)
    traj = evolve(_spin1_state(g), spec, 0.05, 1e-2, sample_every=1)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    lines = path.read_bytes().split(b"\r\n")
    assert lines[0] == b"t,mass_1,mass_2,mass_3,energy,magnetization"
    assert len([ln for ln in lines if ln]) == 1 + len(traj.times)


def test_magnetization_requires_three_components():
    g = make_grid(1, 8, 1.0)
    u = normalize(Field(g, np.ones(8)))
    with pytest.raises(EffectiveError):
        magnetization(OrbitalState((u, u), 0.0))


def test_trajectory_snapshots_roundtrip(tmp_path):
    from becmix.grids import load_field

    g = make_grid(1, 16, 2 * np.pi)
    spec = CouplingSpec.spin1(g, 0.05)
    traj = evolve(_spin1_state(g), spec, 0.02, 1e-2, sample_every=1)
    snap = tmp_path / "snaps"
    snap.mkdir()
    traj.write_csv(tmp_path / "t.csv", snapshot_dir=snap)
    files = sorted(snap.glob("snap_*_c1.bin"))
    assert len(files) == len(traj.times)
    first = load_field(files[0])
    assert np.array_equal(first.values, traj.states[0].components[0].values)
