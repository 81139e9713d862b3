"""Conserved quantities, the Weinstein quotient, renormalized thresholds and
variance functionals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import NotApplicable, SupportLeak, ThetaUndefined, ZeroField, ZeroPotential
from .model import ENDPOINT_TOL, ProblemParams, critical_index
from .spectral import (Field, SUPPORT_TOL, fftn, gradient_apply, gradient_norm_sq,
                       riesz_convolve)

if TYPE_CHECKING:
    from .groundstate import GroundStateConstants


@dataclass(frozen=True)
class ConservedSet:
    M: float
    E: float
    P: tuple[float, ...]
    Z: float
    G2: float
    t: float = 0.0

    @property
    def P_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.P))


@dataclass(frozen=True)
class RenormalizedSet:
    ME: float
    G: float
    Pren: tuple[float, ...]

    @property
    def Pren_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.Pren))


def mass(u: Field) -> float:
    v = u.values
    return float(np.sum(v.real**2 + v.imag**2) * u.grid.cell)


def momentum(u: Field) -> np.ndarray:
    """Im int conj(u) grad u, evaluated as sum xi |u_hat|^2."""
    g = u.grid
    U = fftn(u.values)
    P2 = U.real**2 + U.imag**2
    scale = g.cell / g.n**g.N
    return np.array([float(np.sum(k * P2) * scale) for k in g.freqs_odd()])


def density_p(u: Field | np.ndarray, p: float) -> np.ndarray:
    v = u.values if isinstance(u, Field) else u
    a2 = v.real**2 + v.imag**2
    return a2 if p == 2.0 else a2 ** (p / 2.0)


def potential_Z(params: ProblemParams, u: Field, support_tol: float | None = SUPPORT_TOL) -> float:
    """Z(u) = int (|x|^{-(N-gamma)} * |u|^p) |u|^p dx."""
    f = density_p(u, params.p)
    V = riesz_convolve(params, f, grid=u.grid, support_tol=support_tol)
    return float(np.sum(V * f) * u.grid.cell)


def energy(params: ProblemParams, u: Field, support_tol: float | None = SUPPORT_TOL) -> float:
    return 0.5 * gradient_norm_sq(u) - potential_Z(params, u, support_tol) / (2.0 * params.p)


def conserved_set(params: ProblemParams, u: Field, t: float = 0.0,
                  support_tol: float | None = SUPPORT_TOL) -> ConservedSet:
    G2 = gradient_norm_sq(u)
    Z = potential_Z(params, u, support_tol)
    return ConservedSet(M=mass(u), E=0.5 * G2 - Z / (2.0 * params.p),
                        P=tuple(momentum(u)), Z=Z, G2=G2, t=t)


def conserved_from_arrays(params: ProblemParams, u: Field, V: np.ndarray, f: np.ndarray,
                          t: float) -> ConservedSet:
    """Same as conserved_set, reusing a potential V = K * f already computed."""
    g = u.grid
    U = fftn(u.values)
    P2 = U.real**2 + U.imag**2
    scale = g.cell / g.n**g.N
    G2 = float(np.sum(g.k2 * P2) * scale)
    P = tuple(float(np.sum(k * P2) * scale) for k in g.freqs_odd())
    M = float(np.sum(P2) * scale)
    Z = float(np.sum(V * f) * g.cell)
    return ConservedSet(M=M, E=0.5 * G2 - Z / (2.0 * params.p), P=P, Z=Z, G2=G2, t=t)


# ---------------------------------------------------------------------------
# Renormalized quantities


def _require_intercritical(params: ProblemParams) -> tuple[float, float]:
    s = critical_index(params)
    if not ENDPOINT_TOL < s < 1.0 - ENDPOINT_TOL:
        raise ThetaUndefined(f"renormalized quantities need 0 < s_c < 1, got s_c = {s}")
    return s, (1.0 - s) / s


def renormalized_from_set(params: ProblemParams, cs: ConservedSet,
                          gsc: "GroundStateConstants") -> RenormalizedSet:
    _, th = _require_intercritical(params)
    norm = math.sqrt(cs.M)
    denom_g = gsc.qnorm_theta_grad
    ME = cs.M**th * cs.E / gsc.MEQ
    G = norm**th * math.sqrt(cs.G2) / denom_g
    Pren = tuple(norm ** (th - 1.0) * c / denom_g for c in cs.P) if norm > 0 else tuple(0.0 for _ in cs.P)
    return RenormalizedSet(ME=ME, G=G, Pren=Pren)


def renormalized(params: ProblemParams, u: Field, gsc: "GroundStateConstants",
                 support_tol: float | None = SUPPORT_TOL) -> RenormalizedSet:
    return renormalized_from_set(params, conserved_set(params, u, support_tol=support_tol), gsc)


def weinstein_J(params: ProblemParams, u: Field, support_tol: float | None = SUPPORT_TOL) -> float:
    N, gam, p = params.N, params.gamma, params.p
    M = mass(u)
    if M == 0.0:
        raise ZeroField("Weinstein functional undefined for u = 0")
    Z = potential_Z(params, u, support_tol)
    if Z < 1e-14 * M**p:
        raise ZeroPotential(f"Z(u) = {Z:.3e} is numerically zero")
    G2 = gradient_norm_sq(u)
    return M ** (((N + gam) - (N - 2) * p) / 2.0) * G2 ** ((N * p - (N + gam)) / 2.0) / Z


# ---------------------------------------------------------------------------
# Variance functionals
#
# Localizing profile phi (radial): phi(r) = r^2 for r <= 2; on r = 2 + t,
# t in [0, 1], phi = 4 + 4t + t^2 - 5.5 t^4 + 3.2 t^5; phi = 6.7 for r >= 3.
# C^3 at r = 2, C^2 at r = 3, phi' >= 0 and phi'' <= 2 everywhere.

PHI_CORE = 2.0
PHI_EDGE = 3.0
PHI_TAIL = 6.7


def phi(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    t = np.clip(r - PHI_CORE, 0.0, 1.0)
    trans = 4.0 + 4.0 * t + t**2 - 5.5 * t**4 + 3.2 * t**5
    return np.where(r <= PHI_CORE, r * r, np.where(r >= PHI_EDGE, PHI_TAIL, trans))


def dphi(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    t = np.clip(r - PHI_CORE, 0.0, 1.0)
    trans = 4.0 + 2.0 * t - 22.0 * t**3 + 16.0 * t**4
    return np.where(r <= PHI_CORE, 2.0 * r, np.where(r >= PHI_EDGE, 0.0, trans))


def d2phi(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    t = np.clip(r - PHI_CORE, 0.0, 1.0)
    trans = 2.0 - 66.0 * t**2 + 64.0 * t**3
    return np.where(r <= PHI_CORE, 2.0, np.where(r >= PHI_EDGE, 0.0, trans))


def check_variance_support(u: Field, tol: float = SUPPORT_TOL) -> None:
    g = u.grid
    w = g.r2 * (u.values.real**2 + u.values.imag**2)
    total = w.sum()
    if total > 0 and w[g.outer_mask].sum() > tol * total:
        raise SupportLeak("variance integrand reaches the outer half of the box")


def variance(u: Field, support_tol: float | None = SUPPORT_TOL) -> float:
    if support_tol is not None:
        check_variance_support(u, support_tol)
    g = u.grid
    return float(np.sum(g.r2 * (u.values.real**2 + u.values.imag**2)) * g.cell)


def variance_local(u: Field, R: float) -> float:
    g = u.grid
    w = R * R * phi(np.sqrt(g.r2) / R)
    return float(np.sum(w * (u.values.real**2 + u.values.imag**2)) * g.cell)


def variance_local_rate(u: Field, R: float) -> float:
    """2R Im int conj(u) grad u . (grad phi)(x/R)."""
    g = u.grid
    r = np.sqrt(g.r2)
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.where(r > 0, dphi(r / R) / np.where(r > 0, r / R, 1.0), 2.0)
    total = 0.0
    for x, du in zip(g.coords(), gradient_apply(u)):
        # (grad phi)(x/R) = phi'(|x|/R) (x/R)/(|x|/R)
        total += float(np.sum(np.imag(np.conj(u.values) * du) * radial * (x / R)))
    return 2.0 * R * total * g.cell


def variance_rate(u: Field) -> float:
    """V'(t) = 4 Im int conj(u) x . grad u."""
    g = u.grid
    total = 0.0
    for x, du in zip(g.coords(), gradient_apply(u)):
        total += float(np.sum(np.imag(np.conj(u.values) * du) * x))
    return 4.0 * total * g.cell


def virial_rhs(params: ProblemParams, u: Field | float, E0: float) -> float:
    """16 (s_c(p-1) + 1) E0 - 8 s_c(p-1) ||grad u||^2.  ``u`` may be ||grad u||^2."""
    a = critical_index(params) * (params.p - 1.0)
    G2 = u if isinstance(u, (float, int)) else gradient_norm_sq(u)
    return 16.0 * (a + 1.0) * E0 - 8.0 * a * G2


def convexity_gap(params: ProblemParams, u: Field, gsc: "GroundStateConstants",
                  support_tol: float | None = SUPPORT_TOL) -> tuple[float, float]:
    """(lhs, rhs) of the variance-convexity lower bound; lhs <= rhs is the claim."""
    s, _ = _require_intercritical(params)
    cs = conserved_set(params, u, support_tol=support_tol)
    rn = renormalized_from_set(params, cs, gsc)
    if not (rn.ME < 1.0 and rn.G < 1.0):
        raise NotApplicable(f"needs ME < 1 and G < 1, got ME={rn.ME:.6g}, G={rn.G:.6g}")
    a = s * (params.p - 1.0)
    lhs = 16.0 * cs.E * (1.0 - max(rn.ME, 0.0) ** a)
    rhs = 8.0 * (cs.G2 - (a + 1.0) * cs.Z / params.p)
    return lhs, rhs


def eg_sandwich(params: ProblemParams, u: Field, gsc: "GroundStateConstants",
                support_tol: float | None = SUPPORT_TOL) -> tuple[float, float, float]:
    """(lower, E, upper) with lower = a/(2a+2) ||grad u||^2, upper = ||grad u||^2 / 2."""
    s, _ = _require_intercritical(params)
    cs = conserved_set(params, u, support_tol=support_tol)
    rn = renormalized_from_set(params, cs, gsc)
    if not (rn.ME < 1.0 and rn.G < 1.0):
        raise NotApplicable(f"needs ME < 1 and G < 1, got ME={rn.ME:.6g}, G={rn.G:.6g}")
    a = s * (params.p - 1.0)
    return a / (2.0 * a + 2.0) * cs.G2, cs.E, 0.5 * cs.G2


# ---------------------------------------------------------------------------
# CSV time series


def csv_header(N: int) -> list[str]:
    return (["t", "M", "E"] + [f"P_{i + 1}" for i in range(N)]
            + ["G2", "Z", "ME", "G", "Pren", "V_loc", "virial_rhs"])


def csv_row(cs: ConservedSet, rn: RenormalizedSet | None, v_loc: float, vrhs: float) -> list[str]:
    nan = float("nan")
    vals = [cs.t, cs.M, cs.E, *cs.P, cs.G2, cs.Z,
            rn.ME if rn else nan, rn.G if rn else nan, rn.Pren_norm if rn else nan, v_loc, vrhs]
    return [repr(float(v)) for v in vals]


def write_invariant_csv(path, N: int, rows: Iterable[list[str]]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(N))
        for r in rows:
            w.writerow(r)
    tmp.replace(path)


__all__ = [
    "ConservedSet", "RenormalizedSet", "mass", "momentum", "potential_Z", "energy",
    "conserved_set", "renormalized", "renormalized_from_set", "weinstein_J", "variance",
    "variance_local", "variance_local_rate", "variance_rate", "virial_rhs", "convexity_gap",
    "eg_sandwich", "phi", "dphi", "d2phi",
]
