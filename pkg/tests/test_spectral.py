import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from choquard_dyn.errors import InvalidParams, NonFiniteField, ResampleOutOfBand, SupportLeak
from choquard_dyn.model import ProblemParams
from choquard_dyn.spectral import (Field, Grid, forward_transform, free_propagator, gradient_apply,
                                   gradient_norm_sq, inverse_transform, laplacian_apply,
                                   read_snapshot, resample_dilated, riesz_constant, riesz_convolve,
                                   riesz_symbol, sphere_area, write_snapshot)

from conftest import gaussian


def test_grid_geometry():
    g = Grid(3, 16, 4.0)
    assert g.h == pytest.approx(0.5)
    assert g.shape == (16, 16, 16)
    assert g.x[g.n // 2] == 0.0
    assert g.x[0] == -4.0
    xi = np.sort(g.xi)
    assert xi[0] == pytest.approx(-g.nyquist)
    assert np.allclose(xi[1:] + xi[1:][::-1], 0.0)


def test_field_rejects_nonfinite():
    g = Grid(1, 8, 1.0)
    v = np.zeros(8, dtype=complex)
    v[3] = np.nan
    with pytest.raises(NonFiniteField):
        Field(g, v)
    with pytest.raises(InvalidParams):
        Field(g, np.zeros(7))


def test_constant_has_single_mode():
    g = Grid(2, 16, 3.0)
    c = forward_transform(Field(g, np.ones(g.shape, dtype=complex))).coeffs
    nz = np.abs(c) > 1e-12 * np.abs(c).max()
    assert nz.sum() == 1 and nz[0, 0]


def test_plane_wave_is_a_delta():
    g = Grid(2, 16, 3.0)
    k = (3, -2)
    X, Y = g.coords()
    u = Field(g, np.exp(1j * (g.xi[k[0]] * X + g.xi[k[1]] * Y)))
    c = np.abs(forward_transform(u).coeffs)
    assert np.unravel_index(np.argmax(c), c.shape) == (k[0] % 16, k[1] % 16)
    assert np.sum(c > 1e-10 * c.max()) == 1


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 16, 16), elements=st.floats(-1e3, 1e3)))
def test_round_trip_and_parseval(data):
    g = Grid(2, 16, 2.5)
    u = Field(g, data[0] + 1j * data[1])
    uh = forward_transform(u)
    back = inverse_transform(uh)
    scale = max(np.abs(u.values).max(), 1.0)
    assert np.max(np.abs(back.values - u.values)) <= 1e-12 * scale
    lhs = np.sum(np.abs(u.values) ** 2) * g.h**g.N
    rhs = np.sum(np.abs(uh.coeffs) ** 2) * g.dxi**g.N
    assert abs(lhs - rhs) <= 1e-12 * max(lhs, 1e-300)


def test_newtonian_constant():
    assert riesz_constant(3, 2.0) == pytest.approx(4 * math.pi, rel=1e-15)


@pytest.mark.parametrize("N,gamma", [(3, 0.5), (3, 2.0), (4, 1.3), (5, 4.2)])
def test_symbol_radially_decreasing(N, gamma):
    params = ProblemParams(N, gamma, 2.0)
    ks = np.linspace(0.05, 20, 200)
    vals = riesz_symbol(params, np.stack([ks] + [np.zeros_like(ks)] * (N - 1), axis=-1))
    assert np.all(np.diff(vals) < 0)
    assert riesz_symbol(params, np.zeros(N)) == pytest.approx(sphere_area(N) * 16.0**gamma / gamma)


def test_symbol_constant_against_quadrature():
    # (|x|^{-2} * e^{-|x|^2})(0) computed in physical space and through the multiplier
    N, gamma = 3, 1.0
    direct = quad(lambda r: sphere_area(3) * r ** (gamma - 1) * math.exp(-r * r), 0, np.inf,
                  epsabs=0, epsrel=1e-13)[0]
    c = riesz_constant(N, gamma)
    # non-unitary transform of e^{-|x|^2} is pi^{3/2} e^{-|xi|^2/4}
    spectral = (2 * math.pi) ** -3 * quad(
        lambda k: sphere_area(3) * k * k * c * k**-gamma * math.pi**1.5 * math.exp(-k * k / 4),
        0, np.inf, epsabs=0, epsrel=1e-13)[0]
    assert spectral == pytest.approx(direct, rel=1e-8)


def test_convolve_zero():
    params = ProblemParams(3, 2, 2, L=8.0, n=16)
    assert np.all(riesz_convolve(params, np.zeros(params.grid.shape)) == 0.0)


def test_convolve_at_origin():
    params = ProblemParams(3, 2, 2, L=10.0, n=64)
    g = params.grid
    V = riesz_convolve(params, np.exp(-g.r2))
    assert V[g.origin_index()] == pytest.approx(2 * math.pi, rel=1e-6)


def test_convolve_far_field():
    params = ProblemParams(3, 2, 2, L=16.0, n=64)
    g = params.grid
    sigma = 0.75
    f = np.exp(-g.r2 / sigma**2) / (math.pi**1.5 * sigma**3)
    V = riesz_convolve(params, f)
    i0 = g.n // 2
    j = i0 + int(round(10 * sigma / g.h))
    r = g.x[j]
    assert V[j, i0, i0] * r == pytest.approx(1.0, abs=1e-3)


def test_convolve_support_guard():
    params = ProblemParams(3, 2, 2, L=4.0, n=16)
    with pytest.raises(SupportLeak):
        riesz_convolve(params, np.ones(params.grid.shape))
    with pytest.raises(InvalidParams):
        riesz_convolve(params, -np.exp(-params.grid.r2))


def test_free_propagator_plane_wave():
    g = Grid(1, 32, math.pi)
    k = g.xi[5]
    u = Field(g, np.exp(1j * k * g.x))
    out = free_propagator(u, 0.3)
    assert np.allclose(out.values, np.exp(-1j * k * k * 0.3) * u.values, atol=1e-13)


def test_derivatives_of_gaussian():
    g = Grid(3, 64, 8.0)
    u = gaussian(g)
    X = g.coords()[0]
    assert np.allclose(gradient_apply(u)[0], -X * u.values, atol=1e-10)
    assert np.allclose(laplacian_apply(u).values, (g.r2 - 3.0) * u.values, atol=1e-10)
    # ||grad e^{-r^2/2}||^2 = (3/2) pi^{3/2}
    assert gradient_norm_sq(u) == pytest.approx(1.5 * math.pi**1.5, rel=1e-12)


@pytest.mark.parametrize("lam", [2.0, 0.5, 1.5])
def test_resample_dilated_matches_exact(lam):
    g = Grid(2, 64, 10.0)
    u = gaussian(g, width=1.2).values
    exact = np.exp(-lam * lam * g.r2 / (2 * 1.2**2))
    assert np.max(np.abs(resample_dilated(u, g, lam) - exact)) < 1e-10


def test_resample_out_of_band():
    g = Grid(1, 16, 4.0)
    with pytest.raises(ResampleOutOfBand):
        resample_dilated(gaussian(g, width=0.3).values, g, 4.0)
    with pytest.raises(ResampleOutOfBand):
        resample_dilated(gaussian(g, width=2.0).values, g, 0.25)


def test_snapshot_round_trip(tmp_path):
    g = Grid(2, 8, 1.5)
    rng = np.random.default_rng(1)
    u = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    path = tmp_path / "u.chqf"
    write_snapshot(path, u, 1.5, 3.0, 0.25)
    raw = path.read_bytes()
    assert raw[:4] == b"CHQF" and len(raw) == 64 + 16 * 64
    back, meta = read_snapshot(path)
    assert np.array_equal(back.values, u.values)
    assert meta == {"N": 2, "n": 8, "L": 1.5, "gamma": 1.5, "p": 3.0, "t": 0.25, "version": 1}
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(InvalidParams):
        read_snapshot(path)
