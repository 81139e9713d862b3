"""Periodic grids, Fourier transforms and Fourier multipliers.

Nodes per axis are ``x_j = -L + j h`` with ``h = 2L/n``; the origin sits at
index ``n/2``.  Frequencies follow FFT ordering, ``xi_k = pi k / L``.

Two transform conventions coexist and are kept apart on purpose:

* :func:`forward_transform` is unitary, ``(2 pi)^{-N/2} int f e^{-i xi x} dx``,
  so Parseval reads ``sum |u|^2 h^N = sum |u_hat|^2 dxi^N``.
* Multipliers (Riesz potential, Laplacian, propagator) act on raw FFT
  coefficients, where the convolution theorem for ``int f e^{-i xi x} dx``
  holds without extra factors.
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING

import mpmath
import numpy as np
import scipy.fft as sfft
from scipy.special import gamma as gamma_fn

from .errors import InvalidParams, NonFiniteField, ResampleOutOfBand, SupportLeak

if TYPE_CHECKING:
    from .model import ProblemParams

MAX_GRID_DIM = 4
SUPPORT_TOL = 1e-8


def _fft_workers() -> int:
    return -1


def fftn(a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, workers=_fft_workers())


def ifftn(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, workers=_fft_workers())


@dataclass(frozen=True)
class Grid:
    N: int
    n: int
    L: float

    def __post_init__(self):
        if not 1 <= self.N <= MAX_GRID_DIM:
            raise InvalidParams(f"grid dimension must be in 1..{MAX_GRID_DIM}, got {self.N}")
        if self.n < 8 or self.n & (self.n - 1):
            raise InvalidParams(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise InvalidParams("L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def dxi(self) -> float:
        return math.pi / self.L

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.N

    @property
    def cell(self) -> float:
        """Quadrature weight h^N."""
        return self.h**self.N

    @property
    def nyquist(self) -> float:
        return math.pi / self.h

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def xi(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        return _broadcast_axes(self.x, self.N)

    def freqs(self) -> list[np.ndarray]:
        return _broadcast_axes(self.xi, self.N)

    @cached_property
    def xi_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives: the unpaired Nyquist entry is zeroed."""
        k = self.xi.copy()
        k[self.n // 2] = 0.0
        return k

    def freqs_odd(self) -> list[np.ndarray]:
        return _broadcast_axes(self.xi_odd, self.N)

    @cached_property
    def r2(self) -> np.ndarray:
        return _sum_sq(self.coords())

    @cached_property
    def k2(self) -> np.ndarray:
        return _sum_sq(self.freqs())

    @cached_property
    def outer_mask(self) -> np.ndarray:
        """Nodes outside the ball of radius L/2."""
        return self.r2 > (0.5 * self.L) ** 2

    @functools.lru_cache(maxsize=4)
    def tail_mask(self, band: float) -> np.ndarray:
        """Frequencies with some |xi_i| above ``band`` times Nyquist."""
        mask = np.zeros(self.shape, dtype=bool)
        for k in self.freqs():
            mask = mask | (np.abs(k) > band * self.nyquist)
        return mask

    def origin_index(self) -> tuple[int, ...]:
        return (self.n // 2,) * self.N


def _broadcast_axes(v: np.ndarray, N: int) -> list[np.ndarray]:
    out = []
    for ax in range(N):
        shape = [1] * N
        shape[ax] = v.size
        out.append(v.reshape(shape))
    return out


def _sum_sq(parts: list[np.ndarray]) -> np.ndarray:
    total = parts[0] ** 2
    for a in parts[1:]:
        total = total + a**2
    return total


@dataclass(frozen=True, eq=False)
class Field:
    """Complex grid function; the state u(x, t)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise InvalidParams(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteField("field contains NaN or Inf")
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def conj(self) -> "Field":
        return Field(self.grid, self.values.conj())


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Unitary Fourier coefficients in FFT ordering."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)


def _phase(grid: Grid) -> np.ndarray:
    # (-1)^k per axis accounts for the box starting at x = -L.
    sign = np.where(np.fft.fftfreq(grid.n, d=1.0 / grid.n).astype(int) % 2 == 0, 1.0, -1.0)
    out = np.ones(grid.shape)
    for s in _broadcast_axes(sign, grid.N):
        out = out * s
    return out


def forward_transform(u: Field) -> SpectralField:
    g = u.grid
    scale = g.cell / (2.0 * np.pi) ** (g.N / 2)
    return SpectralField(g, scale * _phase(g) * fftn(u.values))


def inverse_transform(uh: SpectralField) -> Field:
    g = uh.grid
    scale = g.cell / (2.0 * np.pi) ** (g.N / 2)
    return Field(g, ifftn(uh.coeffs * _phase(g)) / scale)


# ---------------------------------------------------------------------------
# Riesz potential


def riesz_constant(N: int, gamma: float) -> float:
    """c_{N,gamma} with FT(|x|^{-(N-gamma)}) = c |xi|^{-gamma}."""
    return 2.0**gamma * math.pi ** (N / 2) * gamma_fn(gamma / 2) / gamma_fn((N - gamma) / 2)


def sphere_area(N: int) -> float:
    """|S^{N-1}|."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def riesz_symbol(params: "ProblemParams", xi) -> np.ndarray | float:
    """Free-space symbol c |xi|^{-gamma}, with the truncated-kernel value at xi = 0.

    ``xi`` is a single frequency vector (last axis = components) or an array of
    vectors.  The zero mode is ``|S^{N-1}| L^gamma / gamma``.
    """
    xi = np.asarray(xi, dtype=float)
    k = np.sqrt(np.sum(xi * xi, axis=-1))
    c = riesz_constant(params.N, params.gamma)
    zero = sphere_area(params.N) * params.L**params.gamma / params.gamma
    with np.errstate(divide="ignore"):
        out = np.where(k > 0, c * np.power(np.where(k > 0, k, 1.0), -params.gamma), zero)
    return float(out) if out.ndim == 0 else out


def truncated_riesz_symbol(N: int, gamma: float, R: float, k: np.ndarray) -> np.ndarray:
    """Fourier transform of |x|^{-(N-gamma)} restricted to the ball |x| < R.

    Equals ``|S^{N-1}| R^gamma / gamma * 1F2(gamma/2; N/2, gamma/2 + 1; -(kR)^2/4)``,
    which tends to ``c |k|^{-gamma}`` as ``kR -> inf`` and to the truncated-kernel
    zero mode at ``k = 0``.
    """
    k = np.asarray(k, dtype=float)
    pref = sphere_area(N) * R**gamma / gamma
    if N == 3 and gamma == 2.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            kr = k * R
            out = np.where(kr > 1e-4,
                           pref * 2.0 * (1.0 - np.cos(kr)) / np.where(kr > 0, kr, 1.0) ** 2,
                           pref * (1.0 - kr**2 / 12.0))
        return out
    flat = k.ravel()
    uniq, inv = np.unique(np.round(flat, 12), return_inverse=True)
    vals = np.array(
        [float(mpmath.hyp1f2(gamma / 2, N / 2, gamma / 2 + 1, -(q * R) ** 2 / 4)) for q in uniq]
    )
    return (pref * vals[inv]).reshape(k.shape)


@functools.lru_cache(maxsize=16)
def _riesz_multiplier(grid: Grid, gamma: float) -> np.ndarray:
    k = np.sqrt(grid.k2)
    return truncated_riesz_symbol(grid.N, gamma, grid.L, k)


def riesz_multiplier(grid: Grid, gamma: float) -> np.ndarray:
    """Raw-FFT multiplier for the Riesz convolution on ``grid`` (cached, read-only)."""
    m = _riesz_multiplier(grid, float(gamma))
    m.flags.writeable = False
    return m


def check_support(f: np.ndarray, grid: Grid, tol: float = SUPPORT_TOL) -> None:
    """Raise SupportLeak unless |f| outside radius L/2 stays below tol * max|f|."""
    a = np.abs(f)
    peak = a.max()
    if peak == 0.0:
        return
    outer = a[grid.outer_mask].max() if grid.outer_mask.any() else 0.0
    if outer > tol * peak:
        raise SupportLeak(f"outer/peak = {outer / peak:.3e} exceeds {tol:.1e}")


def convolve_raw(f: np.ndarray, grid: Grid, gamma: float) -> np.ndarray:
    """K * f for a real array without the support guard (used inside hot loops)."""
    out = sfft.irfftn(riesz_rmult(grid, gamma) * sfft.rfftn(f, workers=_fft_workers()),
                      s=grid.shape, workers=_fft_workers())
    return out


@functools.lru_cache(maxsize=16)
def _riesz_rmult(grid: Grid, gamma: float) -> np.ndarray:
    full = _riesz_multiplier(grid, gamma)
    return np.ascontiguousarray(full[..., : grid.n // 2 + 1])


def riesz_rmult(grid: Grid, gamma: float) -> np.ndarray:
    m = _riesz_rmult(grid, float(gamma))
    m.flags.writeable = False
    return m


def riesz_convolve(params: "ProblemParams", f: Field | np.ndarray,
                   grid: Grid | None = None, support_tol: float | None = SUPPORT_TOL) -> np.ndarray:
    """(|x|^{-(N-gamma)} * f) for a real nonnegative density f on the periodic box.

    Uses the truncated-kernel symbol with truncation radius L, which reproduces
    the free-space convolution exactly (up to spectral accuracy) at |x| < L/2
    when f vanishes outside |x| < L/2.  ``support_tol=None`` skips the guard.
    """
    if isinstance(f, Field):
        grid = f.grid
        arr = f.values
    else:
        arr = np.asarray(f)
        if grid is None:
            grid = params.grid
    if np.iscomplexobj(arr):
        if np.abs(arr.imag).max() > 1e-12 * max(np.abs(arr.real).max(), 1e-300):
            raise InvalidParams("riesz_convolve expects a real density")
        arr = arr.real
    arr = np.asarray(arr, dtype=float)
    if arr.min(initial=0.0) < -1e-12 * max(arr.max(initial=0.0), 1e-300):
        raise InvalidParams("riesz_convolve expects a nonnegative density")
    if support_tol is not None:
        check_support(arr, grid, support_tol)
    return convolve_raw(arr, grid, params.gamma)


# ---------------------------------------------------------------------------
# Linear operators


def free_propagator(u: Field, dt: float) -> Field:
    """Exact solution operator of i u_t + Delta u = 0 over time dt."""
    g = u.grid
    return u.with_values(ifftn(np.exp(-1j * g.k2 * dt) * fftn(u.values)))


def laplacian_apply(u: Field) -> Field:
    g = u.grid
    return u.with_values(ifftn(-g.k2 * fftn(u.values)))


def gradient_apply(u: Field) -> list[np.ndarray]:
    """Spectral gradient components."""
    g = u.grid
    U = fftn(u.values)
    return [ifftn(1j * k * U) for k in g.freqs_odd()]


def spectral_weight_sum(values: np.ndarray, grid: Grid, weight: np.ndarray) -> float:
    """sum_xi weight(xi) |u_hat(xi)|^2 dxi^N, unitary convention, from raw values."""
    U = fftn(values)
    return float(np.sum(weight * (U.real**2 + U.imag**2)) * grid.cell / grid.n**grid.N)


def gradient_norm_sq(u: Field) -> float:
    return spectral_weight_sum(u.values, u.grid, u.grid.k2)


def h1_norm(u: Field | np.ndarray, grid: Grid | None = None) -> float:
    if isinstance(u, Field):
        grid, u = u.grid, u.values
    return math.sqrt(spectral_weight_sum(u, grid, 1.0 + grid.k2))


def homogeneous_norm(u: Field, s: float) -> float:
    """Homogeneous Sobolev norm ||u||_{H^s dot}, as a quadrature of |xi|^{2s}|u_hat|^2.

    The plain lattice sum converges slowly because |xi|^{2s} is not smooth at
    the origin.  A Gaussian F0 exp(-|xi|^2/sigma^2) matching |u_hat|^2 and its
    Laplacian at xi = 0 (from the moments of u) is subtracted and integrated in
    closed form.  What remains is odd or traceless at second order, both of
    which cancel on the cubic lattice.
    """
    g = u.grid
    k2 = g.k2
    U = fftn(u.values)
    P = (U.real**2 + U.imag**2) * (g.cell / g.n**g.N)
    w = np.power(k2, s)
    F0 = P.flat[0]
    a0 = complex(np.sum(u.values))
    sigma2 = None
    if F0 > 0 and abs(a0) > 0:
        a2 = complex(np.sum(g.r2 * u.values))
        a1 = [complex(np.sum(x * u.values)) for x in g.coords()]
        lap = (-2.0 * (a2 * a0.conjugate()).real + 2.0 * sum(abs(c) ** 2 for c in a1)) / abs(a0) ** 2
        if lap < 0:
            sigma2 = -2.0 * g.N / lap
    if sigma2 is None:
        return math.sqrt(float(np.sum(w * P)))
    lattice = float(np.sum(w * (P - F0 * np.exp(-k2 / sigma2))))
    # int |xi|^{2s} exp(-|xi|^2/sigma^2) d xi over R^N, divided by the lattice cell
    closed = sphere_area(g.N) * sigma2 ** (s + g.N / 2) * gamma_fn(s + g.N / 2) / 2.0 / g.dxi**g.N
    return math.sqrt(max(lattice + F0 * closed, 0.0))


# ---------------------------------------------------------------------------
# Band-limited resampling


def _eval_matrix(grid: Grid, y: np.ndarray) -> np.ndarray:
    """Matrix E with (E @ u)[j] = trigonometric interpolant of u evaluated at y[j].

    Operates on node values; the Nyquist term is split symmetrically so the
    interpolant of real data is real.
    """
    n = grid.n
    kk = np.fft.fftfreq(n, d=1.0 / n)
    xi = kk * grid.dxi
    t = (y[:, None] + grid.L)
    E = np.exp(1j * xi[None, :] * t)
    nyq = n // 2
    E[:, nyq] = np.cos(grid.dxi * nyq * t[:, 0])
    # E @ FFT(u) / n; fold the DFT in so the matrix acts on node values.
    F = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    out = (E @ F) / n
    # points pushed outside the box see the localized field as zero, not its periodic image
    out[np.abs(y) > grid.L * (1 + 1e-12)] = 0.0
    return out


def _apply_axes(values: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    out = values
    for ax, M in enumerate(mats):
        out = np.moveaxis(np.tensordot(M, out, axes=([1], [ax])), 0, ax)
    return out


def out_of_band_fraction(u: np.ndarray, grid: Grid, lam: float) -> float:
    """Fraction of the spectral (|lam| > 1) or spatial (|lam| < 1) energy that
    the map x -> lam x pushes outside the representable band or box."""
    a = abs(lam)
    total = np.sum(np.abs(u) ** 2)
    if total == 0.0 or a == 1.0:
        return 0.0
    if a > 1.0:
        P = np.abs(fftn(u)) ** 2
        cut = grid.nyquist / a
        mask = np.zeros(grid.shape, dtype=bool)
        for k in grid.freqs():
            mask = mask | (np.abs(k) > cut)
        return float(P[mask].sum() / P.sum())
    cut = a * grid.L
    mask = np.zeros(grid.shape, dtype=bool)
    for x in grid.coords():
        mask = mask | (np.abs(x) > cut)
    return float(np.sum(np.abs(u[mask]) ** 2) / total)


def resample_dilated(u: np.ndarray, grid: Grid, lam: float, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Values of x -> u(lam x) at the grid nodes.

    Integer ``lam`` uses exact node mapping (periodic wrap); anything else uses
    band-limited trigonometric interpolation.  Raises ResampleOutOfBand when the
    dilation would push more than ``tol`` of the energy out of band.
    """
    if lam == 0:
        raise InvalidParams("dilation factor must be nonzero")
    frac = out_of_band_fraction(u, grid, lam)
    if frac > tol:
        raise ResampleOutOfBand(f"dilation by {lam} loses fraction {frac:.2e}")
    m = round(lam)
    if abs(lam - m) < 1e-14 and m != 0:
        j = m * (np.arange(grid.n) - grid.n // 2) + grid.n // 2
        inside = ((j >= 0) & (j < grid.n)) | (abs(m) == 1)
        out = u[np.ix_(*([j % grid.n] * grid.N))].copy()
        for ax in range(grid.N):
            shape = [1] * grid.N
            shape[ax] = grid.n
            out = out * inside.reshape(shape)
        return out
    M = _eval_matrix(grid, lam * grid.x)
    return _apply_axes(np.asarray(u, dtype=complex), [M] * grid.N)


def spectral_shift(u: np.ndarray, grid: Grid, shift) -> np.ndarray:
    """u(x - shift) by the Fourier shift theorem (periodic)."""
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (grid.N,))
    ph = np.ones(grid.shape, dtype=complex)
    for k, a in zip(grid.freqs(), shift):
        ph = ph * np.exp(-1j * k * a)
    return ifftn(ph * fftn(u))


# ---------------------------------------------------------------------------
# Snapshot file format

SNAPSHOT_MAGIC = b"CHQF"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdddd16x")


def write_snapshot(path, u: Field, gamma: float, p: float, t: float) -> None:
    """Write the 64-byte header followed by little-endian complex128 values (row-major)."""
    g = u.grid
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.N, g.n, g.L, gamma, p, t)
    assert len(header) == 64
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes(order="C"))
    tmp.replace(path)


def read_snapshot(path) -> tuple[Field, dict]:
    raw = Path(path).read_bytes()
    magic, version, N, n, L, gamma, p, t = _HEADER.unpack(raw[:64])
    if magic != SNAPSHOT_MAGIC:
        raise InvalidParams(f"bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise InvalidParams(f"unsupported snapshot version {version}")
    grid = Grid(N, n, L)
    vals = np.frombuffer(raw[64:], dtype="<c16")
    if vals.size != n**N:
        raise InvalidParams("snapshot payload size does not match header")
    meta = {"N": N, "n": n, "L": L, "gamma": gamma, "p": p, "t": t, "version": version}
    return Field(grid, vals.reshape(grid.shape).astype(complex)), meta
