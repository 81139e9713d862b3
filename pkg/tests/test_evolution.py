import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard_dyn.errors import InsufficientSnapshots, InvalidParams, SupportLeak
from choquard_dyn.evolution import (EvolutionConfig, angular_fraction, Termination, evolve, integrate_fixed,
                                    nonlinear_phase_step, scattering_diagnostic, spectral_tail,
                                    strang_step, write_trajectory)
from choquard_dyn.invariants import conserved_set, mass
from choquard_dyn.model import ProblemParams, time_reversal
from choquard_dyn.spectral import Field, free_propagator, h1_norm

from conftest import gaussian


@pytest.fixture(scope="module")
def small():
    return ProblemParams(3, 2, 3, L=8.0, n=32)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-0.5, 0.5))
def test_nonlinear_step_is_unimodular(amplitude, dt):
    params = ProblemParams(2, 1, 3, L=8.0, n=32)
    u = gaussian(params.grid, amplitude)
    out = nonlinear_phase_step(params, u, dt)
    assert np.allclose(np.abs(out.values), np.abs(u.values), rtol=0, atol=1e-14 * amplitude)


def test_nonlinear_step_phase_oracle():
    # p = 2, gamma = 2, N = 3: V = K * e^{-r^2} is 2 pi at the origin
    params = ProblemParams(3, 2, 2, L=10.0, n=64)
    g = params.grid
    u = Field(g, np.exp(-g.r2 / 2).astype(complex))
    out = nonlinear_phase_step(params, u, 0.1)
    assert np.angle(out.values[g.origin_index()]) == pytest.approx(0.2 * np.pi, rel=1e-6)


def test_nonlinear_step_zero_dt_and_guard(small):
    u = gaussian(small.grid)
    assert np.array_equal(nonlinear_phase_step(small, u, 0.0).values, u.values)
    with pytest.raises(SupportLeak):
        nonlinear_phase_step(small, gaussian(small.grid, width=3.0), 0.1)


def test_zero_coupling_is_free_flow(small):
    u = gaussian(small.grid)
    out = strang_step(small, u, 0.05, coupling=0.0)
    assert np.allclose(out.values, free_propagator(u, 0.05).values, atol=1e-14)


def test_fused_stepper_matches_plain_steps(small):
    u = gaussian(small.grid, 0.8)
    plain = u
    for _ in range(5):
        plain = strang_step(small, plain, 0.01, support_tol=None)
    fused = integrate_fixed(small, u, 0.01, 5)
    assert np.max(np.abs(fused.values - plain.values)) < 1e-13


def test_mass_conserved_exactly(small):
    u = gaussian(small.grid, 0.8)
    out = integrate_fixed(small, u, 0.01, 20)
    assert mass(out) == pytest.approx(mass(u), rel=1e-12)


def test_time_reversal_round_trip(small):
    u = gaussian(small.grid, 0.8)
    fwd = integrate_fixed(small, u, 0.01, 10)
    back = time_reversal(integrate_fixed(small, time_reversal(fwd), 0.01, 10))
    assert h1_norm(back.values - u.values, small.grid) < 1e-10


@pytest.mark.parametrize("kw", [dict(dt0=0.0), dict(dt0=2.0, T=1.0), dict(blowup_factor=5.0),
                                dict(sample_every=0), dict(conservation_guard=0.0)])
def test_config_validation(kw):
    with pytest.raises(InvalidParams):
        EvolutionConfig(**kw)


def test_config_digest_is_stable():
    assert EvolutionConfig().digest() == EvolutionConfig().digest()
    assert EvolutionConfig(T=2.0).digest() != EvolutionConfig().digest()


def test_spectral_tail():
    g = ProblemParams(2, 1, 3, L=8.0, n=32).grid
    assert spectral_tail(gaussian(g, width=1.5).values, g) < 1e-12
    k = g.xi[15]
    wave = np.exp(1j * k * g.coords()[0]) * np.ones(g.shape)
    assert spectral_tail(wave, g) == pytest.approx(1.0)


def test_evolve_small_data_reaches_horizon(small):
    cfg = EvolutionConfig(dt0=0.01, T=0.2, sample_every=5, snapshot_every=5)
    traj = evolve(small, gaussian(small.grid, 0.5), cfg)
    assert traj.termination is Termination.HORIZON
    assert traj.t_stop == pytest.approx(0.2)
    times = [t for t, _ in traj.snapshots]
    assert times[0] == 0.0 and len(times) >= 5 and np.all(np.diff(times) > 0)
    d = traj.drifts()
    assert d["M"] < 1e-12 and d["E"] < 1e-5 and d["P"] < 1e-12


def test_evolve_reports_leak(small):
    cfg = EvolutionConfig(dt0=0.01, T=0.1)
    traj = evolve(small, gaussian(small.grid, 1.0, width=2.5), cfg)
    assert traj.termination is Termination.LEAK
    assert traj.steps == 0


def test_evolve_detects_gradient_blowup():
    # strongly supercritical lump on a coarse grid: growth past blowup_factor or a stall
    params = ProblemParams(3, 2, 3, L=8.0, n=32)
    cfg = EvolutionConfig(dt0=2e-3, T=0.5, blowup_factor=20.0, conservation_guard=1e-4,
                          dt_floor=1e-5)
    traj = evolve(params, gaussian(params.grid, 4.0, width=0.8), cfg)
    assert traj.termination is Termination.BLOWUP
    assert traj.angular_fraction is not None
    assert "not distinguished" in traj.note


def test_scattering_needs_snapshots(small):
    traj = evolve(small, gaussian(small.grid, 0.5), EvolutionConfig(dt0=0.01, T=0.05))
    with pytest.raises(InsufficientSnapshots):
        scattering_diagnostic(traj)


def test_write_trajectory(tmp_path, small):
    cfg = EvolutionConfig(dt0=0.01, T=0.1, sample_every=5, snapshot_every=5)
    traj = evolve(small, gaussian(small.grid, 0.5), cfg)
    mpath = write_trajectory(traj, tmp_path, "run")
    manifest = json.loads(mpath.read_text())
    assert manifest["termination"] == "HorizonReached"
    assert manifest["config_hash"] == cfg.digest()
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    rows = (tmp_path / "run.csv").read_text().splitlines()
    assert len(rows) == 1 + len(traj.samples)


def test_angular_fraction():
    g = ProblemParams(3, 2, 3, L=8.0, n=32).grid
    assert angular_fraction(gaussian(g)) < 1e-15
    assert angular_fraction(gaussian(g, width=0.6)) < 1e-6
    assert angular_fraction(gaussian(g, center=[0.5, 0.0, 0.0])) > 1e-3
