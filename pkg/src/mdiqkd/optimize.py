"""Derivative-free intensity optimization and asymmetric-channel analyses.

The workhorse is a deterministic multi-start compass search in log-intensity
space: coordinate moves with a multiplicative step that shrinks by half
whenever a full sweep fails to improve, started from a small log-spaced seed
grid. The objectives here are cheap, smooth and at most four-dimensional, so
robustness and reproducibility beat sophistication.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

from . import closedform
from .keyrate import Mode, asymptotic_rate, two_decoy_rate
from .params import (
    ChannelGeometry,
    IntensitySettings,
    SystemParams,
    ValidationError,
    geometry_for_ratio,
)

DEFAULT_OMEGA = 5e-4
_MU_BOUNDS = (1e-3, 1.5)
_NU_BOUNDS = (1e-4, 0.8)

INITIAL_STEP = 0.25        # decades
SHRINK = 0.5
STEP_TOL = 1e-4            # relative step 10**s - 1 below this terminates
MAX_EVALS = 20000
_SEED_FRACTIONS = (0.2, 0.5, 0.8)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one bound-constrained maximization."""

    point: dict[str, float]
    value: float
    evaluations: int
    converged: bool
    active_bounds: frozenset[str]


@dataclass(frozen=True)
class OptimizationResult:
    """Optimum expressed as intensity settings; for asymptotic-mode runs the
    decoy levels are inert placeholders (the objective reads only mu)."""

    best_settings: IntensitySettings
    best_rate: float
    evaluations: int
    converged: bool
    constraint_active: frozenset[str]


@dataclass(frozen=True)
class AsymmetricComparison:
    """Symmetric-choice versus freely optimized intensities at one geometry."""

    x: float
    symmetric_choice: OptimizationResult
    optimal_choice: OptimizationResult
    advantage: float
    arrival_ratio: float  # mu_a t_a / (mu_b t_b) at the free optimum


def maximize(
    objective: Callable[[Mapping[str, float]], float],
    bounds: Mapping[str, tuple[float, float]],
    orderings: Sequence[tuple[str, str]] = (),
    ties: Mapping[str, tuple[str, float]] | None = None,
    seeds: Mapping[str, Sequence[float]] | None = None,
    max_evals: int = MAX_EVALS,
) -> SearchResult:
    """Maximize ``objective`` over positive variables within ``bounds``.

    orderings: pairs (hi, lo) that must satisfy point[hi] > point[lo]; names
    may refer to tied variables. ties: derived variables var = factor * src,
    excluded from the search but checked against their own bounds. seeds:
    per-variable start values (defaults to 3 log-spaced points spanning the
    bounds, combined factorially). Deterministic: exact value ties are broken
    toward the smaller total intensity, then toward the earlier start.
    """
    ties = dict(ties or {})
    free = [v for v in bounds if v not in ties]
    if not free:
        raise ValidationError("no free variables to optimize")
    for var, (lo, hi) in bounds.items():
        if not 0 < lo < hi:
            raise ValidationError(f"bounds for {var} must satisfy 0 < lo < hi")

    def full_point(logs: Mapping[str, float]) -> dict[str, float] | None:
        point = {v: 10.0 ** logs[v] for v in free}
        for var, (src, factor) in ties.items():
            point[var] = factor * point[src]
        for var, (lo, hi) in bounds.items():
            if not lo <= point[var] <= hi * (1 + 1e-12):
                return None
        for hi_var, lo_var in orderings:
            if not point[hi_var] > point[lo_var]:
                return None
        return point

    evals = 0

    def evaluate(logs: Mapping[str, float]) -> tuple[float, dict[str, float] | None]:
        nonlocal evals
        point = full_point(logs)
        if point is None:
            return -math.inf, None
        evals += 1
        return objective(point), point

    if seeds is None:
        seeds = {}
    seed_axes = []
    for v in free:
        if v in seeds:
            seed_axes.append([math.log10(s) for s in seeds[v]])
        else:
            llo, lhi = math.log10(bounds[v][0]), math.log10(bounds[v][1])
            seed_axes.append([llo + f * (lhi - llo) for f in _SEED_FRACTIONS])
    starts: list[dict[str, float]] = [{}]
    for v, axis in zip(free, seed_axes):
        starts = [dict(s, **{v: a}) for s in starts for a in axis]
    starts = [s for s in starts if full_point(s) is not None]
    if not starts:
        raise ValidationError("empty feasible set: no seed satisfies the constraints")

    best_value = -math.inf
    best_point: dict[str, float] | None = None
    best_converged = False

    def better(value: float, point: dict[str, float]) -> bool:
        if value > best_value:
            return True
        if value == best_value and best_point is not None:
            return sum(point.values()) < sum(best_point.values())
        return False

    for start in starts:
        logs = dict(start)
        value, point = evaluate(logs)
        if point is None:
            continue
        step = INITIAL_STEP
        converged = False
        while evals < max_evals:
            improved = False
            for v in free:
                candidates = []
                for delta in (step, -step):
                    trial = dict(logs, **{v: logs[v] + delta})
                    tv, tp = evaluate(trial)
                    candidates.append((tv, trial, tp))
                    if evals >= max_evals:
                        break
                cv, clogs, cp = max(candidates, key=lambda c: c[0])
                if cp is not None and cv > value:
                    value, logs = cv, clogs
                    improved = True
                if evals >= max_evals:
                    break
            if not improved:
                step *= SHRINK
                if 10.0**step - 1.0 < STEP_TOL:
                    converged = True
                    break
        point = full_point(logs)
        if point is not None and better(value, point):
            best_value, best_point, best_converged = value, point, converged

    assert best_point is not None
    active = frozenset(
        f"{var}:{side}"
        for var, (lo, hi) in bounds.items()
        for side, bound in (("lower", lo), ("upper", hi))
        if abs(best_point[var] - bound) <= 1e-3 * bound
    )
    return SearchResult(
        point=best_point,
        value=best_value,
        evaluations=evals,
        converged=best_converged,
        active_bounds=active,
    )


def _placeholder_settings(mu_a: float, mu_b: float, omega: float) -> IntensitySettings:
    nu_a = max(mu_a / 2.0, omega * 1.5)
    nu_b = max(mu_b / 2.0, omega * 1.5)
    return IntensitySettings(mu_a, nu_a, omega, mu_b, nu_b, omega)


def optimize_asymptotic(
    geometry: ChannelGeometry,
    params: SystemParams,
    tie_parties: bool = False,
    symmetric_choice: bool = False,
    mu_bounds: tuple[float, float] = _MU_BOUNDS,
    max_evals: int = MAX_EVALS,
) -> OptimizationResult:
    """Maximize the asymptotic rate over the signal intensities.

    symmetric_choice constrains the arriving intensities to match
    (mu_b = x * mu_a); tie_parties sets mu_b = mu_a (symmetric channels).
    """
    ties: dict[str, tuple[str, float]] = {}
    if symmetric_choice and tie_parties:
        raise ValidationError("choose at most one of tie_parties/symmetric_choice")
    if symmetric_choice:
        ties["mu_b"] = ("mu_a", geometry.x)
    elif tie_parties:
        ties["mu_b"] = ("mu_a", 1.0)

    def objective(point: Mapping[str, float]) -> float:
        return asymptotic_rate(point["mu_a"], point["mu_b"], geometry, params).rate

    result = maximize(
        objective,
        bounds={"mu_a": mu_bounds, "mu_b": mu_bounds},
        ties=ties,
        max_evals=max_evals,
    )
    return OptimizationResult(
        best_settings=_placeholder_settings(
            result.point["mu_a"], result.point["mu_b"], DEFAULT_OMEGA
        ),
        best_rate=result.value,
        evaluations=result.evaluations,
        converged=result.converged,
        constraint_active=result.active_bounds,
    )


def optimize_two_decoy(
    geometry: ChannelGeometry,
    params: SystemParams,
    omega: float = DEFAULT_OMEGA,
    tie_parties: bool = False,
    symmetric_choice: bool = False,
    mu_bounds: tuple[float, float] = _MU_BOUNDS,
    nu_bounds: tuple[float, float] = _NU_BOUNDS,
    max_evals: int = MAX_EVALS,
) -> OptimizationResult:
    """Maximize the two-decoy rate over (mu, nu) per party with the weakest
    decoy pinned at ``omega`` for both parties."""
    if symmetric_choice and tie_parties:
        raise ValidationError("choose at most one of tie_parties/symmetric_choice")
    ties: dict[str, tuple[str, float]] = {}
    if symmetric_choice:
        ties["mu_b"] = ("mu_a", geometry.x)
        ties["nu_b"] = ("nu_a", geometry.x)
    elif tie_parties:
        ties["mu_b"] = ("mu_a", 1.0)
        ties["nu_b"] = ("nu_a", 1.0)
    nu_lo = max(nu_bounds[0], omega * 1.2 if omega > 0 else nu_bounds[0])

    def objective(point: Mapping[str, float]) -> float:
        settings = IntensitySettings(
            point["mu_a"], point["nu_a"], omega,
            point["mu_b"], point["nu_b"], omega,
        )
        return two_decoy_rate(settings, geometry, params).rate

    result = maximize(
        objective,
        bounds={
            "mu_a": mu_bounds,
            "nu_a": (nu_lo, nu_bounds[1]),
            "mu_b": mu_bounds,
            "nu_b": (nu_lo, nu_bounds[1]),
        },
        orderings=(("mu_a", "nu_a"), ("mu_b", "nu_b")),
        ties=ties,
        max_evals=max_evals,
    )
    settings = IntensitySettings(
        result.point["mu_a"], result.point["nu_a"], omega,
        result.point["mu_b"], result.point["nu_b"], omega,
    )
    return OptimizationResult(
        best_settings=settings,
        best_rate=result.value,
        evaluations=result.evaluations,
        converged=result.converged,
        constraint_active=result.active_bounds | {"omega:floor"},
    )


@dataclass(frozen=True)
class SweepRow:
    l_total_km: float
    settings: IntensitySettings
    rate: float
    evaluations: int
    converged: bool


def optimal_intensity_sweep(
    mode: Mode,
    distances_total_km: Sequence[float],
    params: SystemParams,
    omega: float = DEFAULT_OMEGA,
) -> list[SweepRow]:
    """Optimal intensities along symmetric-channel total distances, with the
    weakest decoy pinned at its floor (two-decoy mode) and the parties tied
    by the symmetry of the problem."""
    rows = []
    for total in distances_total_km:
        geometry = ChannelGeometry(total / 2.0, total / 2.0, params.alpha_db_per_km)
        if mode == "AsymptoticTruth":
            res = optimize_asymptotic(geometry, params, tie_parties=True)
        else:
            res = optimize_two_decoy(geometry, params, omega=omega, tie_parties=True)
        rows.append(
            SweepRow(
                l_total_km=total,
                settings=res.best_settings,
                rate=res.best_rate,
                evaluations=res.evaluations,
                converged=res.converged,
            )
        )
    return rows


def asymmetric_compare(
    x: float,
    l_bc_km: float,
    mode: Mode,
    params: SystemParams,
    omega: float = DEFAULT_OMEGA,
) -> AsymmetricComparison:
    """Constrained (matched arriving intensities) vs free optimization at a
    fixed channel-asymmetry ratio."""
    geometry = geometry_for_ratio(x, l_bc_km, params.alpha_db_per_km)
    if mode == "AsymptoticTruth":
        sym = optimize_asymptotic(geometry, params, symmetric_choice=True)
        opt = optimize_asymptotic(geometry, params)
    else:
        sym = optimize_two_decoy(geometry, params, omega=omega, symmetric_choice=True)
        opt = optimize_two_decoy(geometry, params, omega=omega)
    advantage = (
        (opt.best_rate - sym.best_rate) / sym.best_rate
        if sym.best_rate > 0
        else math.inf
    )
    arrival_ratio = (
        opt.best_settings.mu_a * geometry.t_a
        / (opt.best_settings.mu_b * geometry.t_b)
    )
    return AsymmetricComparison(
        x=x,
        symmetric_choice=sym,
        optimal_choice=opt,
        advantage=advantage,
        arrival_ratio=arrival_ratio,
    )


@dataclass(frozen=True)
class Theorem1Report:
    """Scale-invariance evidence for the background-free estimated rate."""

    x: float
    base_mu: tuple[float, float]
    base_rate: float
    scaled: list[tuple[float, tuple[float, float], float]]  # (scale, mu, rate)

    def max_argmax_shift(self) -> float:
        return max(
            (
                max(abs(mu[0] - self.base_mu[0]), abs(mu[1] - self.base_mu[1]))
                for _, mu, _ in self.scaled
            ),
            default=0.0,
        )

    def max_quadratic_violation(self) -> float:
        out = 0.0
        for scale, _, rate in self.scaled:
            expected = self.base_rate * scale**2
            out = max(out, abs(rate - expected) / expected)
        return out


def theorem1_check(
    x: float,
    scale_factors: Sequence[float],
    params: SystemParams,
    l_bc_km: float = 10.0,
) -> Theorem1Report:
    """Optimize the background-free estimated rate at fixed x while jointly
    scaling both transmittances; the optimizing intensities must not move and
    the rate must scale with t_b squared."""
    params = replace(params, y0=0.0)
    alpha = params.alpha_db_per_km

    def optimize_at(l_bc: float) -> tuple[tuple[float, float], float]:
        geometry = geometry_for_ratio(x, l_bc, alpha)

        def objective(point: Mapping[str, float]) -> float:
            return closedform.r_est(geometry, point["mu_a"], point["mu_b"], params)

        res = maximize(objective, bounds={"mu_a": _MU_BOUNDS, "mu_b": _MU_BOUNDS})
        return (res.point["mu_a"], res.point["mu_b"]), res.value

    base_mu, base_rate = optimize_at(l_bc_km)
    scaled = []
    for scale in scale_factors:
        if scale <= 0:
            raise ValidationError(f"scale factors must be > 0, got {scale!r}")
        # t_b -> scale * t_b at fixed x
        l_bc = l_bc_km - 10.0 * math.log10(scale) / alpha
        if l_bc < 0:
            raise ValidationError(f"scale {scale!r} needs a negative link length")
        mu, rate = optimize_at(l_bc)
        scaled.append((scale, mu, rate))
    return Theorem1Report(x=x, base_mu=base_mu, base_rate=base_rate, scaled=scaled)
