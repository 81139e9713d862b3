import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard_dyn.errors import InvalidParams, MassCriticalTheta, SingularTime
from choquard_dyn.invariants import mass, momentum
from choquard_dyn.model import (CriticalityClass, ProblemParams, classify_criticality, critical_index,
                                galilean_boost, phase_rotation, pseudo_conformal, scaling_map, theta,
                                translate)
from choquard_dyn.spectral import Grid, homogeneous_norm

from conftest import gaussian


@pytest.mark.parametrize("N,gamma,p,expected", [
    (3, 1, 2, 0.0), (4, 2, 2, 0.0), (5, 3, 2, 0.0),
    (5, 1, 2, 1.0), (3, 2, 5, 1.0), (3, 1, 4, 1.0),
    (3, 2, 3, 0.5),
])
def test_critical_index_table(N, gamma, p, expected):
    assert critical_index(ProblemParams(N, gamma, p)) == pytest.approx(expected, abs=1e-12)


def test_critical_index_monotone_on_lattice():
    N = 4
    gammas = np.linspace(0.2, 3.8, 10)
    ps = np.linspace(2.0, 6.0, 10)
    table = np.array([[critical_index(ProblemParams(N, g, p)) for p in ps] for g in gammas])
    assert np.all(np.diff(table, axis=0) < 0)
    assert np.all(np.diff(table, axis=1) > 0)


@pytest.mark.parametrize("N,gamma,p,cls", [
    (3, 1, 2, CriticalityClass.MASS_CRITICAL),
    (3, 2, 3, CriticalityClass.INTERCRITICAL),
    (5, 1, 2, CriticalityClass.ENERGY_CRITICAL),
    (3, 2, 6, CriticalityClass.UNSUPPORTED),
    (3, 2, 2, CriticalityClass.UNSUPPORTED),
])
def test_classification(N, gamma, p, cls):
    assert classify_criticality(ProblemParams(N, gamma, p)) is cls


def test_theta():
    assert theta(ProblemParams(3, 2, 3)) == pytest.approx(1.0)
    with pytest.raises(MassCriticalTheta):
        theta(ProblemParams(3, 1, 2))


@pytest.mark.parametrize("kw", [dict(N=3, gamma=3, p=2), dict(N=3, gamma=1, p=1.5),
                                dict(N=3, gamma=1, p=2, n=48), dict(N=3, gamma=1, p=2, L=0)])
def test_invalid_params(kw):
    with pytest.raises(InvalidParams):
        ProblemParams(**kw)


def test_scaling_identity_and_gaussian():
    params = ProblemParams(3, 2, 3, L=10.0, n=64)
    u = gaussian(params.grid)
    assert np.array_equal(scaling_map(params, u, 1.0).values, u.values)
    out = scaling_map(params, u, 2.0)
    expected = 2.0**params.scaling_exponent * np.exp(-4.0 * params.grid.r2 / 2.0)
    assert np.max(np.abs(out.values - expected)) < 1e-12


def test_homogeneous_norm_of_gaussian():
    # ||e^{-r^2/(2w^2)}||^2_{H^s dot} in three dimensions, in closed form
    g = Grid(3, 64, 12.0)
    w, s = 1.3, 0.5
    exact = (2 * math.pi) ** -3 * (2 * math.pi * w * w) ** 3 * 4 * math.pi * math.gamma(s + 1.5) / 2 * w ** -(2 * s + 3)
    assert homogeneous_norm(gaussian(g, width=w), s) ** 2 == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("lam", [0.5, 0.8, 1.25, 2.0])
@pytest.mark.parametrize("symmetric", [True, False])
def test_scaling_preserves_critical_norm(lam, symmetric):
    params = ProblemParams(3, 2, 3, L=12.0, n=64)
    g = params.grid
    u = gaussian(g, width=1.3)
    if not symmetric:
        u = u.with_values(u.values * (1 + 0.3 * g.coords()[0]) * np.exp(0.4j * g.coords()[2]))
    s = params.s_c
    before = homogeneous_norm(u, s)
    after = homogeneous_norm(scaling_map(params, u, lam), s)
    assert after == pytest.approx(before, rel=1e-6)


def test_scaling_round_trip_and_composition():
    params = ProblemParams(2, 1, 3, L=12.0, n=128)
    u = gaussian(params.grid, width=1.5)
    back = scaling_map(params, scaling_map(params, u, 2.0), 0.5)
    assert np.max(np.abs(back.values - u.values)) < 1e-10
    two_step = scaling_map(params, scaling_map(params, u, 1.25), 1.6)
    one_step = scaling_map(params, u, 2.0)
    assert np.max(np.abs(two_step.values - one_step.values)) < 1e-10


def test_galilean_identity_cases():
    g = Grid(3, 16, 6.0)
    u = gaussian(g)
    assert np.allclose(galilean_boost(u, [0, 0, 0], 0.7).values, u.values, atol=1e-14)
    with pytest.raises(InvalidParams):
        galilean_boost(u, [g.nyquist, 0, 0])


def test_galilean_momentum_shift():
    g = Grid(3, 64, 10.0)
    u = gaussian(g)
    out = galilean_boost(u, [1.0, 0.0, 0.0], 0.0)
    assert mass(out) == pytest.approx(mass(u), rel=1e-14)
    assert np.allclose(momentum(out), [math.pi**1.5, 0.0, 0.0], atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=2), st.floats(-1.0, 1.0))
def test_galilean_mass_and_momentum(xi0, t):
    g = Grid(2, 64, 12.0)
    u = gaussian(g, amplitude=0.7, width=1.2)
    out = galilean_boost(u, xi0, t)
    m = mass(u)
    assert mass(out) == pytest.approx(m, rel=1e-12)
    assert np.allclose(momentum(out) - momentum(u), np.asarray(xi0) * m, atol=1e-10)


def test_pseudo_conformal():
    g = Grid(2, 64, 10.0)
    u = gaussian(g, width=1.0)
    one = pseudo_conformal(u, 1.0)
    assert np.allclose(np.abs(one.values), np.abs(u.values), atol=1e-13)
    assert np.allclose(np.angle(one.values[32, 32:40]), (g.x[32:40] ** 2 / 4.0), atol=1e-12)
    half = pseudo_conformal(u, 0.5)
    assert mass(half) == pytest.approx(mass(u), rel=1e-6)
    with pytest.raises(SingularTime):
        pseudo_conformal(u, 1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(-math.pi, math.pi), st.integers(-4, 4), st.integers(-4, 4))
def test_phase_and_lattice_translation_preserve_modulus(angle, i, j):
    g = Grid(2, 32, 8.0)
    u = gaussian(g, width=0.9)
    v = translate(phase_rotation(u, angle), [i * g.h, j * g.h])
    assert mass(v) == pytest.approx(mass(u), rel=1e-14)
    assert np.allclose(np.abs(v.values), np.roll(np.abs(u.values), (i, j), axis=(0, 1)))
