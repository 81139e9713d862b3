import numpy as np
import pytest

from choquard_dyn.model import ProblemParams
from choquard_dyn.spectral import Field, Grid


def gaussian(grid: Grid, amplitude: float = 1.0, width: float = 1.0, center=None) -> Field:
    coords = grid.coords()
    center = np.zeros(grid.N) if center is None else np.asarray(center, dtype=float)
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    return Field(grid, (amplitude * np.exp(-r2 / (2.0 * width**2))).astype(complex))


@pytest.fixture(scope="session")
def fine_ground_323():
    """Ground state at (N, gamma, p) = (3, 2, 3), resolved finely enough for 1e-4 checks."""
    from choquard_dyn.groundstate import petviashvili_solve, sharp_constant

    params = ProblemParams(3, 2, 3, L=12.0, n=128)
    gs = petviashvili_solve(params)
    return params, gs, sharp_constant(gs)


@pytest.fixture(scope="session")
def coarse_ground_323():
    """Cheap (3, 2, 3) ground state for logic tests; Pohozaev error about 5e-3."""
    from choquard_dyn.groundstate import petviashvili_solve, sharp_constant

    params = ProblemParams(3, 2, 3, L=12.0, n=64)
    gs = petviashvili_solve(params)
    return params, gs, sharp_constant(gs)
