"""Secret-key-rate evaluation in the infinite-decoy (asymptotic) and
two-decoy-bound modes.

Both modes evaluate

    R = P11 * Y11 * [1 - H2(e11)] - Q_Z * f_e * H2(E_Z),   floored at 0,

with P11 = mu_a mu_b exp(-(mu_a+mu_b)). They differ in where Y11/e11 come
from: the exact single-photon quantities in asymptotic mode, the two-decoy
bounds in bounds mode. Q_Z/E_Z always come from the signal-signal pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

from . import closedform
from .closedform import binary_entropy
from .decoy import (
    UnboundedErrorSignal,
    build_gain_table,
    decoy_bounds,
)
from .interference import gain_and_qber
from .params import (
    ChannelGeometry,
    FixedAngles,
    IntensitySettings,
    SystemParams,
    ValidationError,
)

Mode = Literal["AsymptoticTruth", "TwoDecoyBounds"]

# Intensities used when extracting the single-photon error rate from the
# engine through the decoy combinations; small enough that multi-photon
# residuals are O(1e-3) relative, large enough to stay clear of cancellation.
_EST_MU, _EST_NU, _EST_OMEGA = 5e-3, 1e-3, 1e-7


@dataclass(frozen=True)
class KeyRateReport:
    """Key rate plus the decomposition the rate formula is built from."""

    rate: float
    single_photon_term: float
    ec_term: float
    p11_z: float
    mode: Mode
    mu_a: float
    mu_b: float
    geometry: ChannelGeometry
    y11: float
    e11: float
    q_z: float
    e_z: float


def _privacy_factor(e11: float) -> float:
    """1 - H2(e11) with the error capped at 1/2: an error bound at or above
    1/2 certifies nothing, so the single-photon term contributes zero."""
    return 1.0 - binary_entropy(min(e11, 0.5))


def p11(mu_a: float, mu_b: float) -> float:
    """Probability that both parties emit exactly one photon."""
    return mu_a * mu_b * math.exp(-(mu_a + mu_b))


def _analytic_qz_path(params: SystemParams) -> float | None:
    """Per-channel misalignment e_d1 if the closed forms apply exactly
    (fixed equal channel angles, aligned output ports, no mode mismatch)."""
    mode = params.misalignment_mode
    if (
        isinstance(mode, FixedAngles)
        and mode.theta3 == 0.0
        and math.isclose(mode.theta1, mode.theta2)
        and params.e_m == 0.0
    ):
        return math.sin(mode.theta1) ** 2
    return None


def signal_gain_qber(
    mu_a: float, mu_b: float, geometry: ChannelGeometry, params: SystemParams
) -> tuple[float, float]:
    """(Q_Z, E_Z) at the signal pair, via the closed forms when they apply
    exactly and the numeric engine otherwise."""
    e_d1 = _analytic_qz_path(params)
    if e_d1 is not None and mu_a > 0 and mu_b > 0:
        return closedform.qz_ez_closed_form(mu_a, mu_b, geometry, params, e_d1=e_d1)
    return gain_and_qber("Z", mu_a, mu_b, geometry, params)


@lru_cache(maxsize=256)
def single_photon_error_x_estimate(
    geometry: ChannelGeometry,
    params: SystemParams,
    nu: float = _EST_NU,
    omega: float = _EST_OMEGA,
) -> float:
    """Single-photon X-basis error rate extracted from the engine.

    Runs the two-decoy machinery at vanishing omega and small nu, where the
    bounds converge (to O(nu)) onto the true single-photon values. This is
    the one error quantity the closed forms cannot supply once mode mismatch
    is present.
    """
    settings = IntensitySettings(_EST_MU, nu, omega, _EST_MU, nu, omega)
    table = build_gain_table(settings, geometry, params)
    bounds = decoy_bounds(table, settings)
    return bounds.e11_x_upper


@lru_cache(maxsize=1024)
def single_photon_quantities(
    geometry: ChannelGeometry, params: SystemParams
) -> tuple[float, float]:
    """(Y11, e11) for the asymptotic mode.

    Y11 and, for e_m = 0, e11 come from the exact reduced-model expressions;
    with mode mismatch present e11 is instead estimated from the engine via
    the decoy extraction, which folds e_d, e_m and background counts
    together consistently.
    """
    y11, e11 = closedform.y11_e11_true(geometry, params)
    if params.e_m > 0.0:
        e11 = single_photon_error_x_estimate(geometry, params)
    return y11, e11


def asymptotic_rate(
    mu_a: float,
    mu_b: float,
    geometry: ChannelGeometry,
    params: SystemParams,
) -> KeyRateReport:
    """Key rate with perfectly known single-photon quantities."""
    if mu_a < 0 or mu_b < 0:
        raise ValidationError("intensities must be >= 0")
    y11, e11 = single_photon_quantities(geometry, params)
    q_z, e_z = signal_gain_qber(mu_a, mu_b, geometry, params)
    p = p11(mu_a, mu_b)
    sp_term = p * y11 * _privacy_factor(e11)
    ec_term = q_z * params.f_e * binary_entropy(e_z)
    return KeyRateReport(
        rate=max(0.0, sp_term - ec_term),
        single_photon_term=sp_term,
        ec_term=ec_term,
        p11_z=p,
        mode="AsymptoticTruth",
        mu_a=mu_a,
        mu_b=mu_b,
        geometry=geometry,
        y11=y11,
        e11=e11,
        q_z=q_z,
        e_z=e_z,
    )


def two_decoy_rate(
    settings: IntensitySettings,
    geometry: ChannelGeometry,
    params: SystemParams,
) -> KeyRateReport:
    """Key rate with Y11/e11 replaced by their two-decoy bounds.

    Conservative by construction: never exceeds the asymptotic rate at the
    same signal intensities. If the yield bound degenerates to zero the
    error is unbounded and no key is claimed.
    """
    table = build_gain_table(settings, geometry, params)
    bounds_failed = False
    try:
        bounds = decoy_bounds(table, settings)
        y11, e11 = bounds.y11_z_lower, bounds.e11_x_upper
    except UnboundedErrorSignal:
        bounds_failed = True
        y11, e11 = 0.0, 0.5
    q_z = table.q("Z", "mu", "mu")
    eq_z = table.eq("Z", "mu", "mu")
    e_z = eq_z / q_z if q_z > 0 else 0.0
    p = p11(settings.mu_a, settings.mu_b)
    sp_term = 0.0 if bounds_failed else p * y11 * _privacy_factor(e11)
    ec_term = q_z * params.f_e * binary_entropy(e_z)
    return KeyRateReport(
        rate=max(0.0, sp_term - ec_term),
        single_photon_term=sp_term,
        ec_term=ec_term,
        p11_z=p,
        mode="TwoDecoyBounds",
        mu_a=settings.mu_a,
        mu_b=settings.mu_b,
        geometry=geometry,
        y11=y11,
        e11=e11,
        q_z=q_z,
        e_z=e_z,
    )
