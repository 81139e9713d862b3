import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from choquard_dyn.errors import MeshGap, RangeError
from choquard_dyn.groundstate import (RadialProfile, constants_from_mass, gn_coefficient,
                                      grid_residual, petviashvili_solve, pohozaev_ratio,
                                      radial_integrals, rescale_normalizations, sharp_constant,
                                      shoot_radial_choquard, shooting_ground_state,
                                      uniqueness_monitor, volterra_potential, weinstein_residual,
                                      weinstein_scales, write_archive)
from choquard_dyn.invariants import mass, potential_Z, weinstein_J
from choquard_dyn.model import ProblemParams
from choquard_dyn.spectral import gradient_norm_sq, sphere_area


@pytest.fixture(scope="module")
def shot3():
    return shoot_radial_choquard(3)


@pytest.mark.parametrize("N,gamma,p,ratio", [(3, 2, 2, 1 / 3), (3, 2, 3, 2.0), (4, 2, 2, 1.0)])
def test_pohozaev_ratio(N, gamma, p, ratio):
    assert pohozaev_ratio(N, gamma, p) == pytest.approx(ratio)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.5, 4.1234])
@pytest.mark.parametrize("N", [3, 4, 5])
def test_volterra_against_quadrature(r, N):
    mesh = np.linspace(0.0, 5.0, 5001)
    Q = np.exp(-mesh**2)
    ref = quad(lambda s: sphere_area(N) * (1 - (s / r) ** (N - 2)) * s * math.exp(-2 * s * s), 0, r,
               epsabs=1e-14, epsrel=1e-13)[0]
    assert volterra_potential(mesh, Q, r, N) == pytest.approx(ref, abs=1e-8)


def test_volterra_mesh_gap():
    mesh = np.linspace(0.0, 5.0, 11)
    with pytest.raises(MeshGap):
        volterra_potential(mesh, np.exp(-mesh**2), 2.0, 3)
    with pytest.raises(MeshGap):
        volterra_potential(np.linspace(0, 1, 101), np.ones(101), 2.0, 3)
    assert volterra_potential(mesh, np.exp(-mesh**2), 0.0, 3) == 0.0


def test_shooting_range():
    with pytest.raises(RangeError):
        shoot_radial_choquard(6)


def test_shooting_profile_shape(shot3):
    Q = shot3.profile.Q
    assert Q[0] > 0 and np.all(np.diff(Q) < 0)
    assert Q[-1] < 1e-6 * Q[0]


def test_shooting_pohozaev(shot3):
    M, G2, Z = radial_integrals(shot3.profile)
    assert G2 / M == pytest.approx(1 / 3, rel=1e-6)
    assert Z == pytest.approx(M + G2, rel=1e-6)


def test_shooting_ground_state_summary():
    gs = shooting_ground_state(3)
    assert gs.method == "shooting"
    assert gs.residual < 1e-6
    assert gs.pohozaev_ratio_residual < 1e-6


def test_uniqueness_monitor_orders_profiles(shot3):
    prof = shot3.profile
    bigger = RadialProfile(3, prof.r, 1.01 * prof.Q)
    rep = uniqueness_monitor(prof, bigger)
    assert rep.ok and rep.first_violation is None
    crossing = RadialProfile(3, prof.r, prof.Q * (1 + 0.05 * np.cos(prof.r)))
    assert not uniqueness_monitor(prof, crossing).ok


def test_constants_identity():
    # J(Q) C_GN = 1 is an algebraic identity once the Pohozaev relations hold
    for N, gamma, p in [(3, 2, 3), (3, 1.5, 2.5), (4, 2, 2.5)]:
        A = N * (p - 1) - gamma
        B = N + gamma - (N - 2) * p
        M = 4.2
        G2 = A / B * M
        Z = M + G2
        J = M ** (B / 2) * G2 ** (A / 2) / Z
        C = constants_from_mass(N, gamma, p, M).C_GN
        assert J * C == pytest.approx(1.0, rel=1e-13)
        assert gn_coefficient(N, gamma, p) * M ** (-(p - 1)) == pytest.approx(C)


@pytest.fixture(scope="module")
def grid_gs():
    params = ProblemParams(3, 2, 2, L=28.0, n=64)
    return petviashvili_solve(params)


def test_petviashvili_converges(grid_gs):
    assert grid_gs.residual < 1e-9
    assert grid_gs.pohozaev_ratio_residual < 1e-4
    assert grid_gs.pohozaev_sum_residual < 1e-6
    Q = grid_gs.profile
    # positive up to spectral ringing in the far tail
    assert Q.values.real.min() >= -1e-6 * Q.values.real.max()
    assert mass(Q) == pytest.approx(grid_gs.massQ, rel=1e-12)


def test_petviashvili_residual_recomputed(grid_gs):
    pr = grid_gs.params
    assert grid_residual(pr, grid_gs.profile.values, pr.grid) < 1e-9


def test_sharp_constant_on_grid(grid_gs):
    C = sharp_constant(grid_gs)
    assert weinstein_J(grid_gs.params, grid_gs.profile) * C.C_GN == pytest.approx(1.0, abs=1e-4)


def test_weinstein_rescaling(grid_gs):
    pr = grid_gs.params
    Qw = rescale_normalizations(pr, grid_gs.profile, "to_weinstein")
    M, G2 = mass(Qw), gradient_norm_sq(Qw)
    Z = potential_Z(pr.with_grid(L=Qw.grid.L), Qw, support_tol=None)
    assert G2 == pytest.approx(M, rel=1e-4)
    assert Z == pytest.approx(M, rel=1e-4)
    assert weinstein_residual(pr.with_grid(L=Qw.grid.L), Qw) < 1e-8
    back = rescale_normalizations(pr, Qw, "to_unit")
    assert back.grid.L == pytest.approx(pr.L)
    assert np.allclose(back.values, grid_gs.profile.values, atol=1e-14)


def test_weinstein_scales_radial(shot3):
    _, _, k, c = weinstein_scales(3, 2.0, 2.0)
    Qw = rescale_normalizations(ProblemParams(3, 2, 2), shot3.profile)
    assert Qw.Q[0] == pytest.approx(c * shot3.profile.Q[0])
    assert Qw.r[-1] == pytest.approx(shot3.profile.r[-1] / k)
    M, G2, Z = radial_integrals(Qw)
    assert G2 == pytest.approx(M, rel=1e-5) and Z == pytest.approx(M, rel=1e-5)


def test_write_archive(tmp_path, grid_gs):
    files = write_archive(grid_gs, tmp_path, "g")
    assert files["profile"].read_bytes()[:4] == b"CHQF"
    meta = json.loads(files["manifest"].read_text())
    assert meta["massQ"] == pytest.approx(grid_gs.massQ)
    assert meta["profile_file"] == "g.chqf"
