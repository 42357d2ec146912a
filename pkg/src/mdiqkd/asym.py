"""Scenario-level asymmetric-channel analyses: rigorous vs estimated rate,
maximal tolerable asymmetry and fixed-ratio distance scans."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import closedform
from .keyrate import Mode
from .optimize import (
    _MU_BOUNDS,
    DEFAULT_OMEGA,
    maximize,
    optimize_asymptotic,
    optimize_two_decoy,
)
from .params import (
    ChannelGeometry,
    SystemParams,
    ValidationError,
    geometry_for_ratio,
)


@dataclass(frozen=True)
class RigEstRow:
    l_ac_km: float
    l_bc_km: float
    r_rig: float
    rig_mu: tuple[float, float]
    r_est: float
    est_mu: tuple[float, float]


def _optimize_r_est(
    geometry: ChannelGeometry, params: SystemParams
) -> tuple[float, tuple[float, float]]:
    def objective(point: Mapping[str, float]) -> float:
        return closedform.r_est(geometry, point["mu_a"], point["mu_b"], params)

    res = maximize(objective, bounds={"mu_a": _MU_BOUNDS, "mu_b": _MU_BOUNDS})
    return max(res.value, 0.0), (res.point["mu_a"], res.point["mu_b"])


def rig_vs_est_scan(
    l_bc_values: Sequence[float],
    l_ac_values: Sequence[float],
    params: SystemParams,
) -> list[RigEstRow]:
    """Rigorous rate (full closed forms, background counts included) next to
    the background-free estimate, each at its own optimal intensities."""
    rows = []
    for l_bc in l_bc_values:
        for l_ac in l_ac_values:
            geometry = ChannelGeometry(l_ac, l_bc, params.alpha_db_per_km)
            rig = optimize_asymptotic(geometry, params)
            est, est_mu = _optimize_r_est(geometry, params)
            rows.append(
                RigEstRow(
                    l_ac_km=l_ac,
                    l_bc_km=l_bc,
                    r_rig=rig.best_rate,
                    rig_mu=(rig.best_settings.mu_a, rig.best_settings.mu_b),
                    r_est=est,
                    est_mu=est_mu,
                )
            )
    return rows


def max_tolerable_x(
    params: SystemParams,
    l_bc_km: float = 0.001,
    x_low: float = 5e-4,
    x_high: float = 0.5,
    iterations: int = 24,
) -> float:
    """Smallest channel-asymmetry ratio with a positive optimized rigorous
    rate at fixed Bob-side link length, by bisection on log x."""

    def positive(x: float) -> bool:
        geometry = geometry_for_ratio(x, l_bc_km, params.alpha_db_per_km)
        return optimize_asymptotic(geometry, params).best_rate > 0.0

    if not positive(x_high):
        raise ValidationError(f"rate not positive even at x={x_high!r}")
    if positive(x_low):
        return x_low
    lo, hi = math.log10(x_low), math.log10(x_high)
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        if positive(10.0**mid):
            hi = mid
        else:
            lo = mid
    return 10.0**hi


def estimated_rate_scan(
    x: float,
    l_bc_values: Sequence[float],
    params: SystemParams,
) -> list[tuple[float, float]]:
    """(l_bc, optimized background-free estimated rate) along Bob's link at
    fixed ratio; the log10 of these rates falls on a straight line of slope
    -2 * alpha / 10 per km."""
    out = []
    for l_bc in l_bc_values:
        geometry = geometry_for_ratio(x, l_bc, params.alpha_db_per_km)
        rate, _ = _optimize_r_est(geometry, params)
        out.append((l_bc, rate))
    return out


@dataclass(frozen=True)
class FixedXRow:
    x: float
    l_bc_km: float
    mode: Mode
    rate: float
    mu_a: float
    mu_b: float
    nu_a: float
    nu_b: float

    @property
    def mu_ratio(self) -> float:
        return self.mu_a / self.mu_b

    @property
    def nu_ratio(self) -> float:
        return self.nu_a / self.nu_b


def fixed_x_scan(
    x: float,
    l_bc_values: Sequence[float],
    mode: Mode,
    params: SystemParams,
    omega: float = DEFAULT_OMEGA,
) -> list[FixedXRow]:
    """Optimal rates and intensities along Bob's link length at a fixed
    transmittance ratio."""
    if x <= 0:
        raise ValidationError(f"x must be > 0, got {x!r}")
    rows = []
    for l_bc in l_bc_values:
        geometry = geometry_for_ratio(x, l_bc, params.alpha_db_per_km)
        if mode == "AsymptoticTruth":
            res = optimize_asymptotic(geometry, params)
        else:
            res = optimize_two_decoy(geometry, params, omega=omega)
        s = res.best_settings
        rows.append(
            FixedXRow(
                x=x,
                l_bc_km=l_bc,
                mode=mode,
                rate=res.best_rate,
                mu_a=s.mu_a,
                mu_b=s.mu_b,
                nu_a=s.nu_a,
                nu_b=s.nu_b,
            )
        )
    return rows


def log_rate_slope(rows: Sequence[FixedXRow]) -> float:
    """Least-squares slope of log10(rate) against Bob's link length."""
    pts = [(r.l_bc_km, r.rate) for r in rows if r.rate > 0]
    if len(pts) < 2:
        raise ValidationError("need at least two positive-rate points for a slope")
    ls = np.array([p[0] for p in pts])
    logs = np.log10([p[1] for p in pts])
    return float(np.polyfit(ls, logs, 1)[0])
