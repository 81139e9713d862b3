"""Ground states of  -Q + Delta Q + (|x|^{-(N-gamma)} * |Q|^p)|Q|^{p-2}Q = 0.

Two independent solvers:

* :func:`petviashvili_solve` - stabilized fixed point on the periodic grid,
  any (N, gamma, p).
* :func:`shoot_radial_choquard` - radial shooting for p = 2, gamma = 2 using
  Newton's theorem, which turns the convolution into a Volterra integral so
  the profile can be integrated outward from r = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import (BisectionStall, CollapseToZero, MeshGap, NoConvergence, RangeError,
                     SupportLeak)
from .invariants import density_p
from .model import ENDPOINT_TOL, ProblemParams, critical_index
from .spectral import (Field, Grid, SUPPORT_TOL, check_support, convolve_raw, resample_dilated,
                       riesz_rmult, spectral_shift, sphere_area, write_snapshot)


def pohozaev_ratio(N: int, gamma: float, p: float) -> float:
    """||grad Q||^2 / ||Q||^2 for any solution of the unit-coefficient equation."""
    return (N * (p - 1) - gamma) / (N + gamma - (N - 2) * p)


@dataclass
class RadialProfile:
    """Radial samples of a ground state on a uniform mesh starting at r = 0."""

    N: int
    r: np.ndarray
    Q: np.ndarray
    dQ: np.ndarray | None = None

    def interpolant(self) -> CubicSpline:
        return CubicSpline(self.r, self.Q, bc_type=((1, 0.0), "not-a-knot"))

    def to_grid(self, grid: Grid) -> Field:
        """Sample Q(|x|) on a Cartesian grid; zero beyond the last radius."""
        rr = np.sqrt(grid.r2)
        vals = np.where(rr <= self.r[-1], self.interpolant()(np.minimum(rr, self.r[-1])), 0.0)
        return Field(grid, vals.astype(complex))


@dataclass
class GroundState:
    params: ProblemParams
    method: str
    massQ: float
    gradQ2: float
    ZQ: float
    residual: float
    profile: Field | None = None
    radial: RadialProfile | None = None
    history: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def pohozaev_ratio_residual(self) -> float:
        target = pohozaev_ratio(self.params.N, self.params.gamma, self.params.p)
        return abs(self.gradQ2 / self.massQ - target) / target

    @property
    def pohozaev_sum_residual(self) -> float:
        return abs(self.ZQ - self.massQ - self.gradQ2) / self.ZQ

    def summary(self) -> dict:
        return {
            "method": self.method,
            "massQ": self.massQ,
            "gradQ2": self.gradQ2,
            "ZQ": self.ZQ,
            "residual": self.residual,
            "pohozaev_ratio_residual": self.pohozaev_ratio_residual,
            "pohozaev_sum_residual": self.pohozaev_sum_residual,
            **self.meta,
        }


@dataclass(frozen=True)
class GroundStateConstants:
    """Threshold constants derived from ||Q||^2 and the Pohozaev ratio."""

    N: int
    gamma: float
    p: float
    massQ: float
    C_GN: float
    critnorm: float
    MEQ: float | None
    gradQ2: float
    qnorm_theta_grad: float | None

    @property
    def s_c(self) -> float:
        return self.N / 2.0 - (self.gamma + 2.0) / (2.0 * (self.p - 1.0))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("N", "gamma", "p", "massQ", "C_GN", "critnorm", "MEQ", "gradQ2", "qnorm_theta_grad")}


def gn_coefficient(N: int, gamma: float, p: float) -> float:
    """Coefficient c with C_GN = c * ||Q||^{-2(p-1)} for the unit-coefficient Q."""
    A = N * (p - 1) - gamma
    B = N + gamma - (N - 2) * p
    return 2.0 * p / A * (B / A) ** (A / 2.0 - 1.0)


def constants_from_mass(N: int, gamma: float, p: float, massQ: float) -> GroundStateConstants:
    s = N / 2.0 - (gamma + 2.0) / (2.0 * (p - 1.0))
    C = gn_coefficient(N, gamma, p) * massQ ** (-(p - 1.0))
    a = s * (p - 1.0)
    critnorm = (p / C / (a + 1.0)) ** (1.0 / (2.0 * (p - 1.0)))
    gradQ2 = pohozaev_ratio(N, gamma, p) * massQ
    if s > ENDPOINT_TOL:
        th = (1.0 - s) / s
        MEQ = a / (2.0 * a + 2.0) * massQ**th * gradQ2
        # ||Q||^theta ||grad Q|| = (||Q||^{1-s} ||grad Q||^s)^{1/s}
        qtg = critnorm ** (1.0 / s)
    else:
        MEQ = None
        qtg = None
    return GroundStateConstants(N=N, gamma=float(gamma), p=float(p), massQ=massQ, C_GN=C,
                                critnorm=critnorm, MEQ=MEQ, gradQ2=gradQ2, qnorm_theta_grad=qtg)


def sharp_constant(gs: GroundState) -> GroundStateConstants:
    pr = gs.params
    return constants_from_mass(pr.N, pr.gamma, pr.p, gs.massQ)


# ---------------------------------------------------------------------------
# Grid solver


def _nonlinearity(u: np.ndarray, grid: Grid, gamma: float, p: float) -> np.ndarray:
    a = np.abs(u)
    f = a**p
    V = convolve_raw(f, grid, gamma)
    return V * (u if p == 2.0 else a ** (p - 2.0) * u)


def grid_residual(params: ProblemParams, Q: np.ndarray, grid: Grid,
                  lin: float = 1.0, lap: float = 1.0) -> float:
    """L2 norm of -lin Q + lap Delta Q + N(Q) for a real profile."""
    Qr = np.real(Q)
    LQ = sfft.irfftn(-grid.k2[..., : grid.n // 2 + 1] * sfft.rfftn(Qr), s=grid.shape)
    r = -lin * Qr + lap * LQ + _nonlinearity(Qr, grid, params.gamma, params.p)
    return math.sqrt(float(np.sum(r * r)) * grid.cell)


def _grid_integrals(params: ProblemParams, Q: np.ndarray, grid: Grid) -> tuple[float, float, float]:
    Qh = sfft.rfftn(Q)
    k2 = grid.k2[..., : grid.n // 2 + 1]
    w = np.full(Qh.shape, 2.0)
    w[..., 0] = 1.0
    if grid.n % 2 == 0:
        w[..., -1] = 1.0
    P2 = w * (Qh.real**2 + Qh.imag**2)
    scale = grid.cell / grid.n**grid.N
    M = float(np.sum(P2) * scale)
    G2 = float(np.sum(k2 * P2) * scale)
    f = np.abs(Q) ** params.p
    Z = float(np.sum(convolve_raw(f, grid, params.gamma) * f) * grid.cell)
    return M, G2, Z


def gaussian_guess(grid: Grid, amplitude: float = 1.0, width: float = 1.0, center=None) -> np.ndarray:
    r2 = grid.r2
    if center is not None:
        r2 = sum((x - c) ** 2 for x, c in zip(grid.coords(), center))
    return amplitude * np.exp(-r2 / (2.0 * width**2))


def petviashvili_solve(params: ProblemParams, init: Field | np.ndarray | None = None,
                       tol: float = 1e-11, max_iter: int = 500,
                       support_tol: float | None = SUPPORT_TOL, floor: float = 1e-12) -> GroundState:
    """Stabilized fixed-point iteration

        u <- S^nu (1 - Delta)^{-1} N(u),  S = <(1 - Delta)u, u> / <N(u), u>,

    with nu = (2p - 1)/(2p - 2).  Stops once the equation residual and |S - 1|
    are both below ``tol``.
    """
    grid = params.grid
    p, gam = params.p, params.gamma
    if init is None:
        u = gaussian_guess(grid, 1.0, 1.5)
    else:
        u = np.real(init.values if isinstance(init, Field) else np.asarray(init)).astype(float)
    nu = (2.0 * p - 1.0) / (2.0 * p - 2.0)
    half = grid.n // 2 + 1
    k2 = grid.k2[..., :half]
    rmult = riesz_rmult(grid, gam)
    w = np.full(k2.shape, 2.0)
    w[..., 0] = 1.0
    w[..., -1] = 1.0
    s_hist, r_hist = [], []

    def rfft(a):
        return sfft.rfftn(a, workers=-1)

    def irfft(a):
        return sfft.irfftn(a, s=grid.shape, workers=-1)

    for it in range(1, max_iter + 1):
        a = np.abs(u)
        f = a**p
        V = irfft(rmult * rfft(f))
        Nu = V * (u if p == 2.0 else a ** (p - 2.0) * u)
        Uh = rfft(u)
        Nh = rfft(Nu)
        lhs = float(np.sum(w * (1.0 + k2) * (Uh.real**2 + Uh.imag**2)))
        rhs = float(np.sum(w * (Nh.real * Uh.real + Nh.imag * Uh.imag)))
        if rhs <= 0 or not math.isfinite(rhs):
            raise CollapseToZero("nonlinear pairing <N(u), u> is not positive")
        S = lhs / rhs
        # residual of the current iterate: -(1 - Delta)u + N(u)
        res_h = Nh - (1.0 + k2) * Uh
        res = math.sqrt(float(np.sum(w * (res_h.real**2 + res_h.imag**2))) * grid.cell / grid.n**grid.N)
        s_hist.append(S)
        r_hist.append(res)
        if res < tol and abs(S - 1.0) < tol:
            break
        u = irfft(S**nu * Nh / (1.0 + k2))
        if math.sqrt(float(np.sum(u * u)) * grid.cell) < floor:
            raise CollapseToZero("iterate norm fell below floor")
    else:
        raise NoConvergence(f"no convergence in {max_iter} iterations: residual={r_hist[-1]:.3e}, "
                            f"|S-1|={abs(s_hist[-1] - 1):.3e}")
    if support_tol is not None:
        check_support(np.abs(u) ** p, grid, support_tol)
    if u[grid.origin_index()] < 0:
        u = -u
    M, G2, Z = _grid_integrals(params, u, grid)
    return GroundState(params=params, method="petviashvili", massQ=M, gradQ2=G2, ZQ=Z,
                       residual=grid_residual(params, u, grid), profile=Field(grid, u.astype(complex)),
                       history={"S": s_hist, "residual": r_hist},
                       meta={"iterations": it, "L": grid.L, "n": grid.n})


def recenter(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Shift a real profile so that the centroid of |u|^2 sits at the origin."""
    w = u * u
    total = float(np.sum(w))
    shift = [-float(np.sum(x * w)) / total for x in grid.coords()]
    return np.real(spectral_shift(u, grid, shift))


def multistart_petviashvili(params: ProblemParams, starts: int = 5, seed: int = 0,
                            tol: float = 1e-11, rough_tol: float = 1e-6) -> tuple[list[GroundState], float]:
    """Solve from random positive Gaussian-mixture seeds; returns states and the
    relative spread (max - min)/mean of massQ.

    Off-centre seeds converge to translates of the solution, which are exact
    solutions only for lattice shifts; their residual stalls near 1e-7.  Each
    start is therefore iterated to ``rough_tol``, recentred on its centroid
    and then polished to ``tol``.  The seed still decides the basin.
    """
    rng = np.random.default_rng(seed)
    grid = params.grid
    out = []
    for _ in range(starts):
        init = np.zeros(grid.shape)
        for _ in range(rng.integers(1, 4)):
            c = rng.uniform(-0.5, 0.5, size=grid.N)
            init += gaussian_guess(grid, rng.uniform(0.3, 2.0), rng.uniform(0.8, 2.5), center=c)
        rough = petviashvili_solve(params, init, tol=rough_tol, support_tol=None)
        centred = recenter(rough.profile.values.real, grid)
        gs = petviashvili_solve(params, centred, tol=tol)
        gs.meta["rough_iterations"] = rough.meta["iterations"]
        out.append(gs)
    masses = np.array([g.massQ for g in out])
    return out, float((masses.max() - masses.min()) / masses.mean())


# ---------------------------------------------------------------------------
# Radial shooting (p = 2, gamma = 2)


def _newton_kernel(N: int, r: float, s: np.ndarray) -> np.ndarray:
    """K(r, s) = |S^{N-1}| (1 - (s/r)^{N-2}) s for 0 <= s <= r."""
    if r == 0:
        return np.zeros_like(s)
    return sphere_area(N) * (1.0 - (s / r) ** (N - 2)) * s


def volterra_potential(r_samples: np.ndarray, Q_samples: np.ndarray, r: float, N: int,
                       max_gap: float = 5e-2) -> float:
    """U_Q(r) = int_0^r K(r, s) Q(s)^2 ds by composite Simpson on the stored mesh."""
    r_samples = np.asarray(r_samples, dtype=float)
    Q_samples = np.asarray(Q_samples, dtype=float)
    if r <= 0.0:
        return 0.0
    if r > r_samples[-1] + 1e-12:
        raise MeshGap(f"samples end at {r_samples[-1]} < r = {r}")
    k = int(np.searchsorted(r_samples, r, side="right"))
    s = r_samples[:k]
    q = Q_samples[:k]
    if np.any(np.diff(s) > max_gap) or (r - s[-1]) > max_gap:
        raise MeshGap("sample spacing exceeds tolerance")
    if r - s[-1] > 1e-14:
        qr = float(CubicSpline(r_samples, Q_samples)(r)) if len(r_samples) > 3 else float(np.interp(r, r_samples, Q_samples))
        s = np.append(s, r)
        q = np.append(q, qr)
    if len(s) < 3:
        return float(np.trapezoid(_newton_kernel(N, r, s) * q * q, s)) if len(s) > 1 else 0.0
    return float(simpson(_newton_kernel(N, r, s) * q * q, x=s))


def newton_potential(N: int, r: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """(|x|^{-(N-2)} * Q^2)(r) via Newton's theorem, on the whole mesh."""
    S = sphere_area(N)
    f = Q * Q
    A = _cumulative_simpson(f * r, r)
    B = _cumulative_simpson(f * r ** (N - 1), r)
    with np.errstate(divide="ignore", invalid="ignore"):
        U = S * (A - np.where(r > 0, B / np.where(r > 0, r, 1.0) ** (N - 2), 0.0))
    return S * A[-1] - U


def _cumulative_simpson(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    from scipy.integrate import cumulative_simpson
    return np.concatenate([[0.0], cumulative_simpson(y, x=x)])


@dataclass
class Shot:
    b: float
    kind: str  # "low", "high" or "open"
    r: np.ndarray
    Q: np.ndarray
    dQ: np.ndarray
    r_event: float

    @property
    def min_value(self) -> float:
        return float(self.Q.min())


def _shot(b: float, N: float, h: float, r_max: float, keep: bool) -> Shot:
    S = sphere_area(N)
    n1 = N - 1.0
    e2 = 2.0 - N

    def rhs(r, q, dq, A, B):
        U = S * (A - B * r**e2)
        q2 = q * q
        return dq, -n1 / r * dq - q + U * q, r * q2, r**n1 * q2

    r = h
    q = b - b * h * h / (2.0 * N)
    dq = -b * h / N
    A = b * b * h * h / 2.0
    B = b * b * h**N / N
    rs, qs, dqs = [0.0, r], [b, q], [0.0, dq]
    steps = int(round((r_max - h) / h))
    kind = "open"
    for i in range(steps):
        k1 = rhs(r, q, dq, A, B)
        hh = 0.5 * h
        k2 = rhs(r + hh, q + hh * k1[0], dq + hh * k1[1], A + hh * k1[2], B + hh * k1[3])
        k3 = rhs(r + hh, q + hh * k2[0], dq + hh * k2[1], A + hh * k2[2], B + hh * k2[3])
        k4 = rhs(r + h, q + h * k3[0], dq + h * k3[1], A + h * k3[2], B + h * k3[3])
        h6 = h / 6.0
        q += h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        dq += h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        A += h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        B += h6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        r = h * (i + 2)
        if keep:
            rs.append(r)
            qs.append(q)
            dqs.append(dq)
        if q < 0.0:
            kind = "low"
            break
        if dq > 0.0:
            kind = "high"
            break
    return Shot(b, kind, np.array(rs), np.array(qs), np.array(dqs), r)


@dataclass
class ShootingResult:
    N: int
    b: float
    bracket: tuple[float, float]
    a: float
    raw: RadialProfile
    profile: RadialProfile
    shots: int


def _bisect(N, h, r_max, tol, bracket_tol):
    lo = None
    hi = None
    b = 1e-3
    shots = 0
    while hi is None:
        s = _shot(b, N, h, r_max, keep=False)
        shots += 1
        if s.kind == "low":
            lo = b
        else:
            hi = b
        b *= 1.5
        if b > 1e6:
            raise BisectionStall("failed to bracket the shooting parameter")
    if lo is None:
        raise BisectionStall("smallest trial already overshoots")

    def accepted(s: Shot) -> bool:
        return s.kind != "low" and s.min_value < tol * s.b

    best = None
    while True:
        mid = 0.5 * (lo + hi)
        s = _shot(mid, N, h, r_max, keep=True)
        shots += 1
        if s.kind == "low":
            lo = mid
        else:
            hi = mid
            best = s
        width = hi - lo
        if width < 1e-10 * hi and best is not None and best.kind == "high" and accepted(best):
            return best, lo, hi, shots
        if width <= bracket_tol * hi or shots > 400:
            if best is not None and accepted(best):
                return best, lo, hi, shots
            raise BisectionStall(f"bracket [{lo}, {hi}] collapsed without an accepted shot")


def shoot_radial_choquard(N: int, r_max: float = 30.0, tol: float = 1e-8, h: float = 1e-3,
                          bracket_tol: float = 1e-14) -> ShootingResult:
    """Radial ground state of -Q + Delta Q + (|x|^{-(N-2)} * Q^2) Q = 0.

    Shoots Q'' + (N-1)/r Q' + Q - U_Q Q = 0, Q(0) = b, Q'(0) = 0 (eigenvalue
    normalized to 1) with the Volterra potential U_Q carried as two running
    integrals inside the RK4 state.  Bisection on b between "low" (crosses
    zero) and "high" (turns upward).  A shot is accepted once it decays
    monotonically below ``tol * b`` before its event.  The result is mapped
    back to unit coefficients via Q(rho) = a P(sqrt(a) rho).
    """
    if not 2 < N < 6:
        raise RangeError(f"shooting needs 2 < N < 6, got {N}")
    shots = 0
    for _ in range(4):
        best, lo, hi, k = _bisect(N, h, r_max, tol, bracket_tol)
        shots += k
        if best.kind == "high":
            break
        # shots still running at r_max: the tail is too slow for this range
        r_max *= 1.5
    # keep the monotone decaying part, up to the turning point
    stop = int(np.argmin(best.Q))
    r, P, dP = best.r[: stop + 1], best.Q[: stop + 1], best.dQ[: stop + 1]
    raw = RadialProfile(N, r, P, dP)
    S = sphere_area(N)
    I1 = float(simpson(P * P * r, x=r))
    a = 1.0 / (S * I1 - 1.0)
    rho = r / math.sqrt(a)
    prof = RadialProfile(N, rho, a * P, a ** 1.5 * dP)
    return ShootingResult(N=N, b=best.b, bracket=(lo, hi), a=a, raw=raw, profile=prof, shots=shots)


def radial_integrals(prof: RadialProfile, p: float = 2.0, gamma: float = 2.0) -> tuple[float, float, float]:
    """(||Q||^2, ||grad Q||^2, Z(Q)) for a radial profile with gamma = N - 2 kernels."""
    N, r, Q = prof.N, prof.r, prof.Q
    S = sphere_area(N)
    w = r ** (N - 1)
    M = S * float(simpson(Q * Q * w, x=r))
    dQ = prof.dQ if prof.dQ is not None else np.gradient(Q, r, edge_order=2)
    G2 = S * float(simpson(dQ * dQ * w, x=r))
    f = np.abs(Q) ** p
    V = newton_potential(N, r, np.sqrt(f))
    Z = S * float(simpson(V * f * w, x=r))
    return M, G2, Z


def radial_residual(prof: RadialProfile) -> float:
    """L2 norm of -Q + Delta Q + (|x|^{-(N-2)} * Q^2) Q using finite differences
    of the samples and the Newton-theorem potential (independent of the RK state)."""
    N, r, Q = prof.N, prof.r, prof.Q
    h = r[1] - r[0]
    d1 = np.gradient(Q, h, edge_order=2)
    d2 = np.gradient(d1, h, edge_order=2)
    # five-point stencils in the interior
    d1[2:-2] = (-Q[4:] + 8 * Q[3:-1] - 8 * Q[1:-3] + Q[:-4]) / (12 * h)
    d2[2:-2] = (-Q[4:] + 16 * Q[3:-1] - 30 * Q[2:-2] + 16 * Q[1:-3] - Q[:-4]) / (12 * h * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = np.where(r > 0, d2 + (N - 1) / np.where(r > 0, r, 1.0) * d1, N * d2)
    V = newton_potential(N, r, Q)
    res = -Q + lap + V * Q
    sl = slice(2, len(r) - 2)
    return math.sqrt(sphere_area(N) * float(simpson(res[sl] ** 2 * r[sl] ** (N - 1), x=r[sl])))


def shooting_ground_state(N: int, L: float = 24.0, n: int = 64, **kw) -> GroundState:
    res = shoot_radial_choquard(N, **kw)
    params = ProblemParams(N, 2.0, 2.0, L, n) if N <= 4 else None
    M, G2, Z = radial_integrals(res.profile)
    return GroundState(params=params if params is not None else _radial_params(N), method="shooting",
                       massQ=M, gradQ2=G2, ZQ=Z, residual=radial_residual(res.profile),
                       radial=res.profile,
                       meta={"b": res.b, "a": res.a, "bracket": list(res.bracket), "shots": res.shots,
                             "r_end": float(res.profile.r[-1]), "h_r": float(res.raw.r[1] - res.raw.r[0])})


def _radial_params(N: int) -> ProblemParams:
    return ProblemParams(N, 2.0, 2.0)


# ---------------------------------------------------------------------------
# Normalizations


def weinstein_scales(N: int, gamma: float, p: float) -> tuple[float, float, float, float]:
    """(alpha^2, beta, k, c) with Qw(x) = c Q(k x) mapping the unit-coefficient
    ground state to the Weinstein normalization ||Qw||^2 = ||grad Qw||^2 = Z(Qw)."""
    alpha2 = (N * (p - 1) - gamma) / (2 * p)
    beta = (N + gamma - (N - 2) * p) / (2 * p)
    k = math.sqrt(beta / alpha2)
    c = (beta * k**gamma) ** (1.0 / (2.0 * (p - 1.0)))
    return alpha2, beta, k, c


def rescale_normalizations(params: ProblemParams, profile: Field | RadialProfile,
                           direction: str = "to_weinstein",
                           same_grid: bool = False) -> Field | RadialProfile:
    """Map between the unit-coefficient equation and the Weinstein-normalized one

        -beta Qw + alpha^2 Delta Qw + (K * |Qw|^p)|Qw|^{p-2} Qw = 0.

    ``direction`` is "to_weinstein" or "to_unit".  Grid fields come back on
    the box dilated by the same factor, which is exact; ``same_grid=True``
    interpolates onto the original nodes instead.
    """
    _, _, k, c = weinstein_scales(params.N, params.gamma, params.p)
    if direction == "to_weinstein":
        lam, amp = k, c
    elif direction == "to_unit":
        lam, amp = 1.0 / k, 1.0 / c
    else:
        raise ValueError("direction must be 'to_weinstein' or 'to_unit'")
    if isinstance(profile, RadialProfile):
        dQ = None if profile.dQ is None else amp * lam * profile.dQ
        return RadialProfile(profile.N, profile.r / lam, amp * profile.Q, dQ)
    g = profile.grid
    if not same_grid:
        # dilate the box with the profile: node values carry over exactly
        return Field(Grid(g.N, g.n, g.L / lam), amp * profile.values)
    return profile.with_values(amp * resample_dilated(profile.values, g, lam))


def weinstein_residual(params: ProblemParams, Qw: Field) -> float:
    alpha2, beta, _, _ = weinstein_scales(params.N, params.gamma, params.p)
    return grid_residual(params, Qw.values, Qw.grid, lin=beta, lap=alpha2)


# ---------------------------------------------------------------------------
# Uniqueness ordering


@dataclass
class OrderingReport:
    ok: bool
    first_violation: float | None
    r_common: float
    min_gap_Q: float
    min_gap_U: float


def uniqueness_monitor(A: RadialProfile, B: RadialProfile, rel_tol: float = 0.0) -> OrderingReport:
    """Check the no-intersection ordering: if A(0) > B(0) then A > B and U_A > U_B
    on the common mesh (r > 0).  Report-only."""
    if A.N != B.N:
        raise ValueError("profiles must share the dimension")
    if B.Q[0] > A.Q[0]:
        A, B = B, A
    r_end = min(A.r[-1], B.r[-1])
    mesh = A.r[A.r <= r_end]
    qa = A.Q[: mesh.size]
    qb = np.interp(mesh, B.r, B.Q) if not np.array_equal(A.r[: mesh.size], B.r[: mesh.size]) else B.Q[: mesh.size]
    if A.Q[0] == B.Q[0] and np.allclose(qa, qb, rtol=0, atol=0):
        return OrderingReport(True, None, float(r_end), 0.0, 0.0)
    S = sphere_area(A.N)

    def U(q):
        f = q * q
        a = _cumulative_simpson(f * mesh, mesh)
        b = _cumulative_simpson(f * mesh ** (A.N - 1), mesh)
        with np.errstate(divide="ignore", invalid="ignore"):
            return S * (a - np.where(mesh > 0, b / np.where(mesh > 0, mesh, 1.0) ** (A.N - 2), 0.0))

    dq = qa - qb
    du = U(qa) - U(qb)
    scale = max(abs(qa[0]), 1e-300)
    bad = np.where((mesh > 0) & ((dq <= -rel_tol * scale) | (du < 0)))[0]
    first = float(mesh[bad[0]]) if bad.size else None
    return OrderingReport(first is None, first, float(r_end), float(dq[1:].min()), float(du[1:].min()))


# ---------------------------------------------------------------------------
# Archive


def write_archive(gs: GroundState, directory, stem: str = "ground") -> dict[str, Path]:
    """JSON manifest plus a snapshot (grid) or CSV (radial) next to it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pr = gs.params
    files: dict[str, Path] = {}
    if gs.profile is not None:
        snap = directory / f"{stem}.chqf"
        write_snapshot(snap, gs.profile, pr.gamma, pr.p, 0.0)
        files["profile"] = snap
        mesh = {"kind": "grid", "N": pr.N, "n": gs.profile.grid.n, "L": gs.profile.grid.L}
    else:
        csvp = directory / f"{stem}.csv"
        tmp = csvp.with_suffix(".csv.tmp")
        arr = np.column_stack([gs.radial.r, gs.radial.Q])
        np.savetxt(tmp, arr, delimiter=",", header="r,Q", comments="", fmt="%.17g")
        tmp.replace(csvp)
        files["profile"] = csvp
        mesh = {"kind": "radial", "N": gs.radial.N, "points": int(gs.radial.r.size),
                "r_end": float(gs.radial.r[-1]), "h_r": float(gs.radial.r[1] - gs.radial.r[0])}
    C = sharp_constant(gs)
    manifest = {
        "params": {"N": pr.N, "gamma": pr.gamma, "p": pr.p},
        "method": gs.method,
        "massQ": gs.massQ,
        "gradQ2": gs.gradQ2,
        "ZQ": gs.ZQ,
        "C_GN": C.C_GN,
        "residual": gs.residual,
        "mesh": mesh,
        "profile_file": files["profile"].name,
    }
    mpath = directory / f"{stem}.json"
    tmp = mpath.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    tmp.replace(mpath)
    files["manifest"] = mpath
    return files


__all__ = [
    "GroundState", "GroundStateConstants", "RadialProfile", "ShootingResult", "OrderingReport",
    "petviashvili_solve", "multistart_petviashvili", "shoot_radial_choquard", "shooting_ground_state",
    "volterra_potential", "newton_potential", "sharp_constant", "constants_from_mass",
    "rescale_normalizations", "weinstein_residual", "uniqueness_monitor", "pohozaev_ratio",
    "gn_coefficient", "grid_residual", "radial_integrals", "radial_residual", "write_archive",
    "density_p", "critical_index", "SupportLeak",
]
