"""Strang split-step integration of

    i u_t + Delta u + (|x|^{-(N-gamma)} * |u|^p)|u|^{p-2} u = 0

with energy-controlled step halving, blow-up detection and a scattering
diagnostic based on pulling the solution back by the free flow.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import InsufficientSnapshots, InvalidParams, SupportLeak
from .invariants import (ConservedSet, conserved_from_arrays, csv_row, variance_local,
                         virial_rhs, write_invariant_csv)
from .model import ProblemParams
from .spectral import (Field, SUPPORT_TOL, check_support, convolve_raw, fftn, free_propagator,
                       h1_norm, ifftn, write_snapshot)


class Termination(enum.Enum):
    HORIZON = "HorizonReached"
    BLOWUP = "BlowupDetected"
    LEAK = "SupportLeak"
    STEP_FLOOR = "StepFloor"


@dataclass(frozen=True)
class EvolutionConfig:
    """Step control for :func:`evolve`.

    ``sample_every`` steps form one batch: invariants are recorded and the
    energy drift is checked once per batch.  A batch whose drift exceeds
    ``conservation_guard`` is redone with half the step.

    Besides ``blowup_factor`` and step collapse, blow-up is also declared when
    the gradient has grown by ``stall_growth`` and then turns over while the
    spectral tail (share of |u_hat|^2 beyond 2/3 of Nyquist) exceeds
    ``tail_tol``: the growth stopped at the grid cutoff, not in the solution.
    """

    dt0: float = 1e-2
    T: float = 1.0
    dt_floor: float = 1e-6
    blowup_factor: float = 1e3
    snapshot_every: int = 0
    sample_every: int = 10
    conservation_guard: float = 1e-7
    leak_tol: float = 1e-6
    local_variance_radius: float | None = None
    stall_growth: float = 2.0
    tail_tol: float = 1e-2

    def __post_init__(self):
        if not 0 < self.dt_floor < self.dt0 < self.T:
            raise InvalidParams("need 0 < dt_floor < dt0 < T")
        if not self.blowup_factor > 10:
            raise InvalidParams("blowup_factor must exceed 10")
        if self.sample_every < 1 or self.snapshot_every < 0:
            raise InvalidParams("sample_every >= 1 and snapshot_every >= 0 required")
        if not self.conservation_guard > 0 or not self.leak_tol > 0:
            raise InvalidParams("guards must be positive")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class Trajectory:
    params: ProblemParams
    config: EvolutionConfig
    samples: tuple[ConservedSet, ...]
    v_loc: tuple[float, ...]
    variance: tuple[float, ...]
    snapshots: tuple[tuple[float, Field], ...]
    termination: Termination
    t_stop: float
    final: Field
    dt_final: float
    steps: int
    wall_time: float
    note: str = ""
    angular_fraction: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    def drifts(self) -> dict[str, float]:
        s0 = self.samples[0]
        M = self.series("M")
        E = self.series("E")
        P = np.array([s.P for s in self.samples])
        pscale = math.sqrt(s0.M * max(s0.G2, 1e-300))
        return {
            "M": float(np.max(np.abs(M - s0.M)) / s0.M),
            "E": float(np.max(np.abs(E - s0.E)) / max(abs(s0.E), 1e-300)),
            "P": float(np.max(np.linalg.norm(P - np.array(s0.P), axis=1)) / pscale),
        }


# ---------------------------------------------------------------------------
# Steps


def _powers(a2: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray | None]:
    """(|u|^p, |u|^{p-2}) from |u|^2, with cheap paths for integer p;
    the second entry is None when p = 2."""
    if p == 2.0:
        return a2, None
    if p == 3.0:
        a = np.sqrt(a2)
        return a2 * a, a
    if p == 4.0:
        return a2 * a2, a2
    w = a2 ** ((p - 2.0) / 2.0)
    return a2 * w, w


def _potential(params: ProblemParams, u: np.ndarray, grid, support_tol):
    f, w = _powers(u.real**2 + u.imag**2, params.p)
    if support_tol is not None:
        check_support(f, grid, support_tol)
    V = convolve_raw(f, grid, params.gamma)
    return V, f, (V if w is None else V * w)


def _rotate(u: np.ndarray, theta: np.ndarray) -> np.ndarray:
    ph = np.empty(u.shape, dtype=complex)
    ph.real = np.cos(theta)
    ph.imag = np.sin(theta)
    ph *= u
    return ph


def nonlinear_phase_step(params: ProblemParams, u: Field, dt: float,
                         support_tol: float | None = SUPPORT_TOL, coupling: float = 1.0) -> Field:
    """u <- exp(i dt (K * |u|^p)|u|^{p-2}) u, the exact flow of the nonlinear part."""
    if dt == 0.0 or coupling == 0.0:
        return u.with_values(u.values.copy())
    _, _, coef = _potential(params, u.values, u.grid, support_tol)
    return u.with_values(_rotate(u.values, (dt * coupling) * coef))


def strang_step(params: ProblemParams, u: Field, dt: float,
                support_tol: float | None = SUPPORT_TOL, coupling: float = 1.0) -> Field:
    """Half free step, full nonlinear phase, half free step."""
    half = free_propagator(u, 0.5 * dt)
    mid = nonlinear_phase_step(params, half, dt, support_tol, coupling)
    return free_propagator(mid, 0.5 * dt)


class _Stepper:
    """Fused Strang steps on raw arrays; consecutive half free steps merge."""

    def __init__(self, params: ProblemParams, grid):
        self.params = params
        self.grid = grid
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _mult(self, dt):
        if dt not in self._cache:
            k2 = self.grid.k2
            self._cache = {dt: (np.exp(-0.5j * dt * k2), np.exp(-1j * dt * k2))}
        return self._cache[dt]

    def advance(self, u: np.ndarray, dt: float, steps: int) -> np.ndarray:
        half, full = self._mult(dt)
        U = fftn(u) * half
        for i in range(steps):
            u = ifftn(U)
            _, _, coef = _potential(self.params, u, self.grid, None)
            u = _rotate(u, dt * coef)
            U = fftn(u) * (full if i < steps - 1 else half)
        return ifftn(U)


def integrate_fixed(params: ProblemParams, u0: Field, dt: float, steps: int) -> Field:
    """``steps`` Strang steps of size ``dt`` with no step control."""
    if steps == 0:
        return u0.with_values(u0.values.copy())
    return u0.with_values(_Stepper(params, u0.grid).advance(u0.values, dt, steps))


def leak_fraction(params: ProblemParams, u: np.ndarray, V: np.ndarray, f: np.ndarray,
                  G2: float, grid) -> float:
    """Share of the interaction energy carried by |x| > L/2, relative to the
    kinetic scale: int_{outer} V f / (p ||grad u||^2)."""
    Zout = float(np.sum(V[grid.outer_mask] * f[grid.outer_mask]) * grid.cell)
    return Zout / (params.p * max(G2, 1e-300))


def spectral_tail(u: np.ndarray, grid, band: float = 2.0 / 3.0) -> float:
    """Fraction of sum |u_hat|^2 with some |xi_i| above ``band`` times Nyquist."""
    U = fftn(u)
    P = U.real**2 + U.imag**2
    return float(np.sum(P[grid.tail_mask(band)]) / np.sum(P))


def _shear(u: np.ndarray, grid, axis: int, along: int, factor: float) -> np.ndarray:
    """u(x) -> u(x - factor * x_along e_axis) by Fourier shifts along ``axis``."""
    k = grid.freqs_odd()[axis]
    y = grid.coords()[along]
    return sfft.ifft(np.exp(-1j * k * factor * y) * sfft.fft(u, axis=axis), axis=axis)


def angular_fraction(u: Field, angle: float = 0.7) -> float:
    """Estimate of the share of ||u||^2 outside the radial (angular degree 0) part.

    Rotates u by ``angle`` in each coordinate plane using the three-shear
    factorization of a rotation (exact for band-limited data) and reports
    max ||R u - u||^2 / (2 ||u||^2), which vanishes for radial fields.
    """
    g = u.grid
    total = float(np.sum(np.abs(u.values) ** 2))
    if g.N < 2 or total == 0.0:
        return 0.0
    a, b = -math.tan(angle / 2.0), math.sin(angle)
    worst = 0.0
    for i in range(g.N):
        for j in range(i + 1, g.N):
            v = _shear(u.values, g, i, j, a)
            v = _shear(v, g, j, i, b)
            v = _shear(v, g, i, j, a)
            worst = max(worst, float(np.sum(np.abs(v - u.values) ** 2)) / (2.0 * total))
    return worst


def evolve(params: ProblemParams, u0: Field, config: EvolutionConfig,
           on_sample=None) -> Trajectory:
    """Integrate to ``config.T`` or until a termination event.

    Terminations are encoded in the returned trajectory, never raised.
    ``on_sample(cs, dt, tail)`` is called after every accepted batch.
    """
    wall0 = time.perf_counter()
    grid = u0.grid
    stepper = _Stepper(params, grid)
    R = config.local_variance_radius or grid.L / 4.0

    def measure(u, t):
        V, f, _ = _potential(params, u, grid, None)
        cs = conserved_from_arrays(params, Field(grid, u), V, f, t)
        return cs, V, f

    u = u0.values.copy()
    cs, V, f = measure(u, 0.0)
    samples = [cs]
    tail = [spectral_tail(u, grid)]
    field0 = Field(grid, u)
    v_loc = [variance_local(field0, R)]
    var = [float(np.sum(grid.r2 * (u.real**2 + u.imag**2)) * grid.cell)]
    snaps: list[tuple[float, Field]] = []
    if config.snapshot_every:
        snaps.append((0.0, field0))
    G0 = math.sqrt(cs.G2)
    t = 0.0
    dt = config.dt0
    steps = 0
    since_snap = 0
    termination = Termination.HORIZON
    note = ""
    eps = 1e-12 * config.T
    if leak_fraction(params, u, V, f, cs.G2, grid) > config.leak_tol:
        termination, note = Termination.LEAK, "initial data leaks past L/2"
    while termination is Termination.HORIZON and t < config.T - eps:
        remaining = config.T - t
        n = min(config.sample_every, max(1, math.ceil(remaining / dt - 1e-9)))
        dt_batch = min(dt, remaining / n) if n * dt > remaining else dt
        u_new = stepper.advance(u, dt_batch, n)
        if not np.all(np.isfinite(u_new)):
            drift = math.inf
        else:
            cs_new, V, f = measure(u_new, t + n * dt_batch)
            scale = 0.5 * cs.G2 + cs.Z / (2.0 * params.p)
            drift = abs(cs_new.E - cs.E) / scale
        if drift > config.conservation_guard:
            dt *= 0.5
            if dt < config.dt_floor:
                growing = len(samples) >= 3 and samples[-1].G2 > samples[-2].G2 > samples[-3].G2
                if growing and samples[-1].G2 > samples[0].G2:
                    termination = Termination.BLOWUP
                    note = ("step collapse with growing gradient; finite-time blow-up and "
                            "divergence along a sequence are not distinguished")
                else:
                    termination = Termination.STEP_FLOOR
                break
            continue
        u = u_new
        cs = cs_new
        t = cs.t
        steps += n
        since_snap += n
        samples.append(cs)
        tail.append(spectral_tail(u, grid))
        if on_sample is not None:
            on_sample(cs, dt, tail[-1])
        fu = Field(grid, u)
        v_loc.append(variance_local(fu, R))
        var.append(float(np.sum(grid.r2 * (u.real**2 + u.imag**2)) * grid.cell))
        if config.snapshot_every and since_snap >= config.snapshot_every:
            snaps.append((t, fu))
            since_snap = 0
        if math.sqrt(cs.G2) > config.blowup_factor * G0:
            termination = Termination.BLOWUP
            note = ("gradient exceeded blowup_factor; finite-time blow-up and divergence "
                    "along a sequence are not distinguished")
        elif (cs.G2 < samples[-2].G2 and tail[-2] > config.tail_tol
              and math.sqrt(samples[-2].G2) > config.stall_growth * G0):
            termination = Termination.BLOWUP
            note = (f"gradient growth stalled at the grid cutoff (spectral tail {tail[-2]:.2e}); "
                    "finite-time blow-up and divergence along a sequence are not distinguished")
        elif leak_fraction(params, u, V, f, cs.G2, grid) > config.leak_tol:
            termination = Termination.LEAK
            note = f"interaction energy beyond L/2 exceeds {config.leak_tol:g}"
    final = Field(grid, u)
    radial = angular_fraction(final) if termination is Termination.BLOWUP else None
    return Trajectory(params=params, config=config, samples=tuple(samples), v_loc=tuple(v_loc),
                      variance=tuple(var), snapshots=tuple(snaps), termination=termination,
                      t_stop=t, final=final, dt_final=dt, steps=steps,
                      wall_time=time.perf_counter() - wall0, note=note, angular_fraction=radial)


# ---------------------------------------------------------------------------
# Scattering


@dataclass(frozen=True)
class ScatteringReport:
    times: tuple[float, ...]
    increments: tuple[float, ...]
    Z: tuple[float, ...]
    decreasing: bool
    z_decay: float
    verdict: str  # "ScatterLikely" or "NotScattering"


def scattering_diagnostic(traj: Trajectory, rel_tol: float = 1e-2, z_factor: float = 10.0) -> ScatteringReport:
    """Pull snapshots back by the free flow, v_i = e^{-i t_i Delta} u(t_i), and
    look at the Cauchy increments ||v_{i+1} - v_i||_{H^1} and the decay of Z."""
    if traj.termination is not Termination.HORIZON or len(traj.snapshots) < 4:
        raise InsufficientSnapshots("need a completed run with at least 4 snapshots")
    params = traj.params
    ts, vs, zs = [], [], []
    for t, u in traj.snapshots:
        vs.append(free_propagator(u, -t).values)
        ts.append(t)
        V, f, _ = _potential(params, u.values, u.grid, None)
        zs.append(float(np.sum(V * f) * u.grid.cell))
    g = traj.snapshots[0][1].grid
    inc = [h1_norm(b - a, g) for a, b in zip(vs, vs[1:])]
    decreasing = all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(inc, inc[1:]))
    scale = h1_norm(traj.snapshots[0][1].values, g)
    z_decay = zs[0] / zs[-1] if zs[-1] > 0 else math.inf
    ok = decreasing and inc[-1] < rel_tol * scale and z_decay >= z_factor
    return ScatteringReport(tuple(ts), tuple(inc), tuple(zs), decreasing, z_decay,
                            "ScatterLikely" if ok else "NotScattering")


# ---------------------------------------------------------------------------
# Output


def trajectory_rows(traj: Trajectory, gsc=None) -> list[list[str]]:
    from .invariants import renormalized_from_set
    from .model import CriticalityClass

    rows = []
    E0 = traj.samples[0].E
    inter = traj.params.criticality is CriticalityClass.INTERCRITICAL
    for cs, vl in zip(traj.samples, traj.v_loc):
        rn = renormalized_from_set(traj.params, cs, gsc) if (gsc is not None and inter) else None
        rows.append(csv_row(cs, rn, vl, virial_rhs(traj.params, cs.G2, E0)))
    return rows


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_trajectory(traj: Trajectory, directory, stem: str = "trajectory", gsc=None,
                     config_hash: str | None = None, extra: dict | None = None) -> Path:
    """Invariant CSV, snapshot files and a JSON manifest listing each with its hash."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    write_invariant_csv(csv_path, traj.params.N, trajectory_rows(traj, gsc))
    files = {csv_path.name: _sha256(csv_path)}
    for i, (t, u) in enumerate(traj.snapshots):
        sp = directory / f"{stem}_{i:04d}.chqf"
        write_snapshot(sp, u, traj.params.gamma, traj.params.p, t)
        files[sp.name] = _sha256(sp)
    pr = traj.params
    manifest = {
        "params": {"N": pr.N, "gamma": pr.gamma, "p": pr.p, "L": pr.L, "n": pr.n},
        "config": asdict(traj.config),
        "config_hash": config_hash or traj.config.digest(),
        "termination": traj.termination.value,
        "t_stop": traj.t_stop,
        "steps": traj.steps,
        "dt_final": traj.dt_final,
        "note": traj.note,
        "wall_time": traj.wall_time,
        "files": files,
    }
    if traj.angular_fraction is not None:
        manifest["angular_fraction"] = traj.angular_fraction
        manifest["radial"] = traj.angular_fraction < 1e-6
    if extra:
        manifest.update(extra)
    mpath = directory / f"{stem}.json"
    tmp = mpath.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    tmp.replace(mpath)
    return mpath


__all__ = [
    "Termination", "EvolutionConfig", "Trajectory", "ScatteringReport", "nonlinear_phase_step",
    "strang_step", "integrate_fixed", "spectral_tail", "angular_fraction", "evolve", "scattering_diagnostic", "leak_fraction", "write_trajectory",
    "trajectory_rows", "SupportLeak",
]
