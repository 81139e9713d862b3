"""Threshold predictions below the mass-energy level and their comparison with
simulated outcomes."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .errors import DegenerateCoefficient, InsufficientSnapshots, NonzeroMomentum
from .evolution import EvolutionConfig, Termination, Trajectory, evolve, scattering_diagnostic
from .invariants import RenormalizedSet, renormalized, renormalized_from_set
from .model import ProblemParams, critical_index
from .spectral import Field

TIE_BAND = 1e-6
ZERO_MOMENTUM_TOL = 1e-8
TRAP_TOL = 1e-6


class Prediction(enum.Enum):
    GLOBAL_SCATTER = "GlobalScatter"
    BLOWUP_OR_DIVERGE = "BlowupOrDiverge"
    OUTSIDE = "OutsideHypotheses"


class Observation(enum.Enum):
    SCATTER_LIKELY = "ScatterLikely"
    BLOWUP_DETECTED = "BlowupDetected"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Trapping:
    """Side-of-threshold record along a trajectory.

    ``quantity`` is G[u(t)] for zero momentum and G[u(t)]^2 - P[u0]^2 otherwise.
    ``margin`` is the signed distance to 1 on the predicted side.
    """

    quantity_min: float
    quantity_max: float
    margin_min: float
    first_violation: float | None

    @property
    def held(self) -> bool:
        return self.first_violation is None


@dataclass(frozen=True)
class Verdict:
    predicted: Prediction
    route: str
    ME: float
    G: float
    Pren: float
    main1: float
    observed: Observation | None = None
    agreement: bool | None = None
    trapping: Trapping | None = None
    meta: dict = field(default_factory=dict)

    @property
    def agreement_label(self) -> str:
        if self.observed is None:
            return ""
        return "NotApplicable" if self.agreement is None else str(self.agreement)

    def to_dict(self) -> dict:
        out = {
            "predicted": self.predicted.value,
            "route": self.route,
            "ME": self.ME,
            "G": self.G,
            "Pren": self.Pren,
            "main1": self.main1,
            "observed": self.observed.value if self.observed else None,
            "agreement": self.agreement_label,
        }
        if self.trapping is not None:
            out["trapping"] = {
                "quantity_min": self.trapping.quantity_min,
                "quantity_max": self.trapping.quantity_max,
                "margin_min": self.trapping.margin_min,
                "first_violation": self.trapping.first_violation,
            }
        out.update(self.meta)
        return out


def momentum_coefficient(params: ProblemParams) -> float:
    """(N(p-1) - gamma) / (N(p-1) - gamma - 2)."""
    num = params.N * (params.p - 1.0) - params.gamma
    den = num - 2.0
    if den <= 1e-12:
        raise DegenerateCoefficient(f"N(p-1) - gamma - 2 = {den:.3e} is not positive")
    return num / den


def _side(value: float, tie: float) -> int:
    if abs(value - 1.0) < tie:
        return 0
    return -1 if value < 1.0 else 1


def predict_zero_momentum(params: ProblemParams, u0: Field, gsc, tie: float = TIE_BAND,
                          pren_tol: float = ZERO_MOMENTUM_TOL) -> Verdict:
    rn = renormalized(params, u0, gsc, support_tol=None)
    return _zero_momentum_from(rn, tie, pren_tol)


def _zero_momentum_from(rn: RenormalizedSet, tie: float, pren_tol: float) -> Verdict:
    if rn.Pren_norm >= pren_tol:
        raise NonzeroMomentum(f"|Pren| = {rn.Pren_norm:.3e}; use predict_general")
    me, g = _side(rn.ME, tie), _side(rn.G, tie)
    if me == -1 and g == -1:
        pred = Prediction.GLOBAL_SCATTER
    elif me == -1 and g == 1:
        pred = Prediction.BLOWUP_OR_DIVERGE
    else:
        pred = Prediction.OUTSIDE
    return Verdict(pred, "zero_momentum", rn.ME, rn.G, rn.Pren_norm, rn.ME)


def predict_general(params: ProblemParams, u0: Field, gsc, tie: float = TIE_BAND) -> Verdict:
    c = momentum_coefficient(params)
    rn = renormalized(params, u0, gsc, support_tol=None)
    return _general_from(rn, c, tie)


def _general_from(rn: RenormalizedSet, c: float, tie: float) -> Verdict:
    P2 = rn.Pren_norm**2
    m1 = rn.ME - c * P2
    q = rn.G**2 - P2
    s1, s2 = _side(m1, tie), _side(q, tie)
    if s1 == -1 and s2 == -1:
        pred = Prediction.GLOBAL_SCATTER
    elif s1 == -1 and s2 == 1:
        pred = Prediction.BLOWUP_OR_DIVERGE
    else:
        pred = Prediction.OUTSIDE
    return Verdict(pred, "general", rn.ME, rn.G, rn.Pren_norm, m1)


def predict(params: ProblemParams, u0: Field, gsc, tie: float = TIE_BAND) -> Verdict:
    """Zero-momentum route when |Pren| is below tolerance, general route otherwise."""
    rn = renormalized(params, u0, gsc, support_tol=None)
    if rn.Pren_norm < ZERO_MOMENTUM_TOL:
        return _zero_momentum_from(rn, tie, ZERO_MOMENTUM_TOL)
    return _general_from(rn, momentum_coefficient(params), tie)


def trapping_record(params: ProblemParams, traj: Trajectory, gsc, verdict: Verdict,
                    tol: float = TRAP_TOL) -> Trapping | None:
    if verdict.predicted is Prediction.OUTSIDE:
        return None
    P0 = verdict.Pren
    sign = -1.0 if verdict.predicted is Prediction.GLOBAL_SCATTER else 1.0
    qs, first, margin_min = [], None, math.inf
    for cs in traj.samples:
        rn = renormalized_from_set(params, cs, gsc)
        q = rn.G if verdict.route == "zero_momentum" else rn.G**2 - P0**2
        margin = sign * (q - 1.0)
        qs.append(q)
        margin_min = min(margin_min, margin)
        if first is None and margin < -tol:
            first = cs.t
    return Trapping(min(qs), max(qs), margin_min, first)


def observe(traj: Trajectory, **scatter_kw) -> tuple[Observation, dict]:
    if traj.termination is Termination.BLOWUP:
        return Observation.BLOWUP_DETECTED, {"note": traj.note}
    if traj.termination is Termination.HORIZON:
        try:
            rep = scattering_diagnostic(traj, **scatter_kw)
        except InsufficientSnapshots as exc:
            return Observation.INCONCLUSIVE, {"note": str(exc)}
        info = {"z_decay": rep.z_decay, "last_increment": rep.increments[-1],
                "increments_decreasing": rep.decreasing}
        if rep.verdict == "ScatterLikely":
            return Observation.SCATTER_LIKELY, info
        return Observation.INCONCLUSIVE, info
    return Observation.INCONCLUSIVE, {"note": f"terminated by {traj.termination.value}"}


def run_and_compare(params: ProblemParams, u0: Field, gsc, config: EvolutionConfig,
                    **scatter_kw) -> tuple[Verdict, Trajectory]:
    verdict = predict(params, u0, gsc)
    traj = evolve(params, u0, config)
    obs, info = observe(traj, **scatter_kw)
    if verdict.predicted is Prediction.OUTSIDE:
        agree = None
    elif verdict.predicted is Prediction.GLOBAL_SCATTER:
        agree = obs is Observation.SCATTER_LIKELY
    else:
        agree = obs is Observation.BLOWUP_DETECTED
    trap = trapping_record(params, traj, gsc, verdict)
    g2 = [cs.G2 for cs in traj.samples]
    meta = {
        **info,
        "termination": traj.termination.value,
        "t_stop": traj.t_stop,
        "gradient_growth": math.sqrt(max(g2) / g2[0]),
        "s_c": critical_index(params),
    }
    if traj.angular_fraction is not None:
        meta["angular_fraction"] = traj.angular_fraction
        meta["radial"] = traj.angular_fraction < 1e-6
    if trap is not None and not trap.held:
        meta["falsification_event"] = trap.first_violation
    return replace(verdict, observed=obs, agreement=agree, trapping=trap, meta=meta), traj


SWEEP_HEADER = ["lambda", "ME", "G", "Pren", "predicted", "observed", "agreement"]


def sweep_row(lam: float, v: Verdict) -> list[str]:
    return [repr(float(lam)), repr(v.ME), repr(v.G), repr(v.Pren), v.predicted.value,
            v.observed.value if v.observed else "", v.agreement_label]


def write_sweep_csv(path, rows: Sequence[list[str]]) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        w.writerows(rows)
    tmp.replace(path)
    return path


__all__ = [
    "Prediction", "Observation", "Trapping", "Verdict", "predict", "predict_zero_momentum",
    "predict_general", "momentum_coefficient", "trapping_record", "observe", "run_and_compare",
    "sweep_row", "write_sweep_csv", "SWEEP_HEADER", "TIE_BAND",
]
