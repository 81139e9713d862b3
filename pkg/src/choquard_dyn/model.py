"""Problem parameters, criticality classes and the symmetry maps of

    i u_t + Delta u + (|x|^{-(N-gamma)} * |u|^p) |u|^{p-2} u = 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, MassCriticalTheta, SingularTime
from .spectral import Field, Grid, resample_dilated, spectral_shift

ENDPOINT_TOL = 1e-12


class CriticalityClass(enum.Enum):
    MASS_CRITICAL = "MassCritical"
    INTERCRITICAL = "Intercritical"
    ENERGY_CRITICAL = "EnergyCritical"
    UNSUPPORTED = "Unsupported"


@dataclass(frozen=True)
class ProblemParams:
    """The triple (N, gamma, p) plus box half-width L and points per axis n."""

    N: int
    gamma: float
    p: float
    L: float = 16.0
    n: int = 64

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParams(f"N must be a positive integer, got {self.N}")
        if not 0 < self.gamma < self.N:
            raise InvalidParams(f"need 0 < gamma < N, got gamma={self.gamma}, N={self.N}")
        if not self.p >= 2:
            raise InvalidParams(f"need p >= 2, got {self.p}")
        if not self.L > 0:
            raise InvalidParams("L must be positive")
        if self.n < 8 or self.n & (self.n - 1):
            raise InvalidParams(f"n must be a power of two >= 8, got {self.n}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "L", float(self.L))

    @property
    def grid(self) -> Grid:
        return Grid(self.N, self.n, self.L)

    @property
    def s_c(self) -> float:
        return critical_index(self)

    @property
    def theta(self) -> float:
        return theta(self)

    @property
    def scaling_exponent(self) -> float:
        """(gamma + 2) / (2 (p - 1)), the amplitude exponent of the scaling symmetry."""
        return (self.gamma + 2.0) / (2.0 * (self.p - 1.0))

    @property
    def criticality(self) -> CriticalityClass:
        return classify_criticality(self)

    def with_grid(self, L: float | None = None, n: int | None = None) -> "ProblemParams":
        return ProblemParams(self.N, self.gamma, self.p,
                             self.L if L is None else L, self.n if n is None else n)


def critical_index(params: ProblemParams) -> float:
    return params.N / 2.0 - (params.gamma + 2.0) / (2.0 * (params.p - 1.0))


def classify_criticality(params: ProblemParams) -> CriticalityClass:
    s = critical_index(params)
    if abs(s) <= ENDPOINT_TOL:
        return CriticalityClass.MASS_CRITICAL
    if abs(s - 1.0) <= ENDPOINT_TOL:
        return CriticalityClass.ENERGY_CRITICAL
    if 0.0 < s < 1.0:
        return CriticalityClass.INTERCRITICAL
    return CriticalityClass.UNSUPPORTED


def theta_from_sc(s_c: float) -> float:
    if abs(s_c) <= ENDPOINT_TOL:
        raise MassCriticalTheta("theta = (1 - s_c)/s_c is undefined at s_c = 0")
    return (1.0 - s_c) / s_c


def theta(params: ProblemParams) -> float:
    return theta_from_sc(critical_index(params))


def scaling_map(params: ProblemParams, u: Field, lam: float) -> Field:
    """lam^{(gamma+2)/(2(p-1))} u(lam x), resampled onto the same grid."""
    if not lam > 0:
        raise InvalidParams("scaling factor must be positive")
    if lam == 1.0:
        return u.with_values(u.values.copy())
    vals = resample_dilated(u.values, u.grid, lam)
    return u.with_values(lam**params.scaling_exponent * vals)


def galilean_boost(u: Field, xi0, t: float = 0.0) -> Field:
    """e^{i(x.xi0 - t|xi0|^2)} u(x - 2 xi0 t), with the shift wrapped periodically.

    The factor 2 in the translation is the group velocity of i u_t + Delta u = 0.
    """
    g = u.grid
    xi0 = np.broadcast_to(np.asarray(xi0, dtype=float), (g.N,))
    if np.any(np.abs(xi0) >= g.nyquist):
        raise InvalidParams("boost velocity must lie below the grid Nyquist frequency")
    vals = u.values
    if t != 0.0 and np.any(xi0 != 0.0):
        vals = spectral_shift(vals, g, 2.0 * xi0 * t)
    phase = -t * float(xi0 @ xi0)
    for x, k in zip(g.coords(), xi0):
        phase = phase + x * k
    return u.with_values(np.exp(1j * phase) * vals)


def pseudo_conformal(u: Field, t: float, dt_floor: float = 1e-12) -> Field:
    """|t|^{-N/2} u(x/t) e^{i|x|^2/(4t)} on the grid.

    A symmetry only in the mass-critical case; the caller maps the time
    argument to -1/t.
    """
    if abs(t) < dt_floor:
        raise SingularTime(f"|t| = {abs(t):.3e} below floor {dt_floor:.1e}")
    g = u.grid
    vals = resample_dilated(u.values, g, 1.0 / t)
    return u.with_values(abs(t) ** (-g.N / 2) * vals * np.exp(1j * g.r2 / (4.0 * t)))


def phase_rotation(u: Field, angle: float) -> Field:
    return u.with_values(np.exp(1j * angle) * u.values)


def translate(u: Field, shift) -> Field:
    """u(x - shift); exact index roll when the shift is a lattice vector."""
    g = u.grid
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (g.N,))
    steps = shift / g.h
    if np.allclose(steps, np.round(steps), atol=1e-12, rtol=0):
        return u.with_values(np.roll(u.values, tuple(int(s) for s in np.round(steps)),
                                     axis=tuple(range(g.N))))
    return u.with_values(spectral_shift(u.values, g, shift))


def time_reversal(u: Field) -> Field:
    return u.conj()


__all__ = [
    "CriticalityClass", "ProblemParams", "critical_index", "classify_criticality",
    "theta", "theta_from_sc", "scaling_map", "galilean_boost", "pseudo_conformal",
    "phase_rotation", "translate", "time_reversal",
]
