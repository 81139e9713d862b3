"""Self-check suite behind ``choquard-dyn verify``.

Each check returns a dict ``{"name", "passed", "detail"}``; checks never raise,
a failure inside a check is reported as a failed check.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .evolution import nonlinear_phase_step, strang_step
from .groundstate import petviashvili_solve, sharp_constant, volterra_potential
from .invariants import conserved_set, mass, weinstein_J
from .model import CriticalityClass, ProblemParams, critical_index, phase_rotation, time_reversal, translate
from .spectral import Field, h1_norm, sphere_area


def random_smooth_fields(grid, count: int, seed: int):
    """Sums of a few random Gaussians with random phases, kept inside L/4."""
    rng = np.random.default_rng(seed)
    coords = grid.coords()
    for _ in range(count):
        v = np.zeros(grid.shape, dtype=complex)
        for _ in range(rng.integers(1, 4)):
            c = rng.uniform(-grid.L / 8, grid.L / 8, size=grid.N)
            w = rng.uniform(0.7, 2.0)
            r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
            v += rng.uniform(0.2, 1.5) * np.exp(1j * rng.uniform(0, 2 * np.pi)) * np.exp(-r2 / (2 * w * w))
        yield Field(grid, v)


def gn_corpus(params: ProblemParams, JQ: float, count: int = 100, seed: int = 0,
              slack: float = 1e-3) -> tuple[int, float]:
    """(violations, min J(u)/J(Q)) over a random corpus."""
    worst = math.inf
    bad = 0
    for u in random_smooth_fields(params.grid, count, seed):
        ratio = weinstein_J(params, u, support_tol=None) / JQ
        worst = min(worst, ratio)
        bad += ratio < 1.0 - slack
    return bad, worst


def _check(name: str, fn: Callable[[], tuple[bool, str]]) -> dict:
    try:
        ok, detail = fn()
    except Exception as exc:  # report, do not abort the suite
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "passed": bool(ok), "detail": detail}


def run_suite(cfg) -> list[dict]:
    params: ProblemParams = cfg.params
    grid = params.grid
    seed = cfg.seed
    gauss = Field(grid, np.exp(-grid.r2 / 2.0).astype(complex))
    report = []

    def criticality():
        table = [((N, N - 2, 2), 0.0) for N in (3, 4, 5)] + [((5, 1, 2), 1.0), ((3, 2, 5), 1.0), ((3, 1, 4), 1.0)]
        err = max(abs(critical_index(ProblemParams(*k)) - v) for k, v in table)
        return err < 1e-12, f"max error {err:.1e}"

    report.append(_check("criticality_table", criticality))

    def phase_step():
        out = nonlinear_phase_step(params, gauss, 0.1)
        d = float(np.max(np.abs(np.abs(out.values) - np.abs(gauss.values))))
        return d < 1e-13, f"max modulus change {d:.1e}"

    report.append(_check("nonlinear_step_unimodular", phase_step))

    def symmetries():
        base = conserved_set(params, gauss)
        shifted = translate(gauss, [grid.h * 2] * grid.N)
        rot = phase_rotation(gauss, 0.7)
        worst = 0.0
        for v in (shifted, rot):
            cs = conserved_set(params, v)
            for a, b in ((cs.M, base.M), (cs.E, base.E), (cs.Z, base.Z), (cs.G2, base.G2)):
                worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
        return worst < 1e-10, f"max relative change {worst:.1e}"

    report.append(_check("phase_translation_invariance", symmetries))

    def reversal():
        dt, steps = 1e-2, 10
        u = gauss
        for _ in range(steps):
            u = strang_step(params, u, dt)
        u = time_reversal(u)
        for _ in range(steps):
            u = strang_step(params, u, dt)
        u = time_reversal(u)
        err = h1_norm(u.values - gauss.values, grid)
        return err < 1e-5, f"H1 error {err:.1e}"

    report.append(_check("time_reversal", reversal))

    def conservation():
        u = gauss
        c0 = conserved_set(params, u)
        for _ in range(20):
            u = strang_step(params, u, 1e-3)
        c1 = conserved_set(params, u)
        dm = abs(c1.M - c0.M) / c0.M
        de = abs(c1.E - c0.E) / max(abs(c0.E), 1e-300)
        return dm < 1e-12 and de < 1e-6, f"mass {dm:.1e}, energy {de:.1e}"

    report.append(_check("short_conservation", conservation))

    def volterra():
        r = np.linspace(0.0, 5.0, 5001)
        Q = np.exp(-r * r)
        worst = 0.0
        for rr in (0.5, 2.0, 3.3337):
            ref = quad(lambda s: sphere_area(3) * (1 - s / rr) * s * math.exp(-2 * s * s), 0, rr,
                       epsabs=1e-14, epsrel=1e-13)[0]
            worst = max(worst, abs(volterra_potential(r, Q, rr, 3) - ref))
        return worst < 1e-8, f"max error {worst:.1e}"

    report.append(_check("volterra_oracle", volterra))

    state = {}

    def ground():
        gs = petviashvili_solve(params)
        state["gs"] = gs
        ok = gs.residual < 1e-6 and gs.pohozaev_sum_residual < 1e-4 and gs.pohozaev_ratio_residual < 1e-4
        return ok, (f"residual {gs.residual:.1e}, pohozaev ratio {gs.pohozaev_ratio_residual:.1e}, "
                    f"sum {gs.pohozaev_sum_residual:.1e}")

    report.append(_check("ground_state", ground))

    def sharp():
        gs = state["gs"]
        C = sharp_constant(gs)
        JQ = weinstein_J(params, gs.profile)
        err = abs(JQ * C.C_GN - 1.0)
        state["JQ"] = JQ
        return err < 1e-4, f"|J(Q) C_GN - 1| = {err:.1e}"

    report.append(_check("sharp_constant", sharp))

    def corpus():
        bad, worst = gn_corpus(params, state["JQ"], 100, seed)
        return bad == 0, f"{bad} violations, min J/J(Q) = {worst:.4f}"

    report.append(_check("gn_corpus", corpus))

    if params.criticality is CriticalityClass.INTERCRITICAL:
        from .invariants import renormalized

        def thresholds():
            gs = state["gs"]
            C = sharp_constant(gs)
            rn = renormalized(params, gs.profile, C)
            err = max(abs(rn.ME - 1.0), abs(rn.G - 1.0))
            return err < 1e-4, f"ME(Q) = {rn.ME:.8f}, G(Q) = {rn.G:.8f}"

        report.append(_check("threshold_normalization", thresholds))
    return report


__all__ = ["run_suite", "gn_corpus", "random_smooth_fields"]
