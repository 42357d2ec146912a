"""Closed-form gains, yields and estimated key rate.

These are the phase-averaged analytic counterparts of the numeric engine for
the reduced misalignment model (theta1 = theta2, theta3 = 0, no mode
mismatch). They serve both as a fast evaluation path and as the oracle the
engine is tested against.

Notation: gamma_a/gamma_b are detected amplitudes, gs = gamma_a^2 + gamma_b^2,
beta = gamma_a*gamma_b, e_d1 = sin^2(theta) is the per-channel misalignment
(so the total misalignment of the reduced model is e_d = 2*e_d1).
"""
from __future__ import annotations

import math
from typing import Literal

from .params import ChannelGeometry, SystemParams, ValidationError

AngleSign = Literal["same", "opposite"]


class NoCoincidencesError(ValueError):
    """Raised when a gain ratio is requested but the total gain is zero."""


def bessel_i0(x: float) -> float:
    """Modified Bessel function I0 by its even power series.

    Terms are summed until the next one falls below 1e-16 of the running sum;
    for the sub-unity arguments that occur here this converges in a handful
    of terms and is exact to double precision.
    """
    q = x * x / 4.0
    total = 1.0
    term = 1.0
    for k in range(1, 250):
        term *= q / (k * k)
        total += term
        if term <= 1e-16 * total:
            return total
    raise ValidationError(f"I0 series did not converge for x={x!r}")


def _hh_brackets(
    gamma_a: float, gamma_b: float, e_d1: float, y0: float
) -> tuple[float, float]:
    gs = gamma_a**2 + gamma_b**2
    beta = gamma_a * gamma_b
    one = 1.0 - y0
    common = (
        one**2 * math.exp(-gs / 2.0)
        - one * math.exp(-gs * (1.0 - e_d1) / 2.0) * bessel_i0(e_d1 * beta)
        - one * math.exp(-gs * e_d1 / 2.0) * bessel_i0((1.0 - e_d1) * beta)
    )
    pref = 2.0 * math.exp(-gs / 2.0) * one**2
    interfering = pref * (bessel_i0(beta) + common)
    plain = pref * (bessel_i0((1.0 - 2.0 * e_d1) * beta) + common)
    return interfering, plain


def qz_hh_closed_form(
    gamma_a: float,
    gamma_b: float,
    e_d1: float,
    y0: float,
    angle_sign: AngleSign = "same",
) -> tuple[float, float]:
    """(q_triplet, q_singlet) when both parties send the same Z-basis state.

    With co-rotating channels the full-interference term I0(beta) sits on the
    triplet (same-port) outcome; counter-rotating channels swap the roles.
    """
    _check_closed_form_args(gamma_a, gamma_b, e_d1, y0)
    interfering, plain = _hh_brackets(gamma_a, gamma_b, e_d1, y0)
    if angle_sign == "opposite":
        return plain, interfering
    return interfering, plain


def _hv_brackets(
    gamma_a: float, gamma_b: float, e_d1: float, y0: float
) -> tuple[float, float]:
    gs = gamma_a**2 + gamma_b**2
    lam = gamma_a * gamma_b * math.sqrt(e_d1 * (1.0 - e_d1))
    w_pol = gamma_a**2 + e_d1 * (gamma_b**2 - gamma_a**2)
    one = 1.0 - y0
    common = (
        one**2 * math.exp(-gs / 2.0)
        - one * math.exp(-w_pol / 2.0) * bessel_i0(lam)
        - one * math.exp(-(gs - w_pol) / 2.0) * bessel_i0(lam)
    )
    pref = 2.0 * math.exp(-gs / 2.0) * one**2
    interfering = pref * (bessel_i0(2.0 * lam) + common)
    plain = pref * (1.0 + common)
    return interfering, plain


def qz_hv_closed_form(
    gamma_a: float,
    gamma_b: float,
    e_d1: float,
    y0: float,
    angle_sign: AngleSign = "same",
) -> tuple[float, float]:
    """(q_triplet, q_singlet) when the parties send opposite Z-basis states.

    For co-rotating channels the cross-port (singlet) outcome carries the
    interference enhancement I0(2*lambda): the singlet projection of two
    orthogonally polarized pulses is invariant under a common rotation, so
    its rate cannot be suppressed by theta, while the same-port (triplet)
    outcome is. Counter-rotating channels swap the roles.
    """
    _check_closed_form_args(gamma_a, gamma_b, e_d1, y0)
    interfering, plain = _hv_brackets(gamma_a, gamma_b, e_d1, y0)
    if angle_sign == "opposite":
        return interfering, plain
    return plain, interfering


def _check_closed_form_args(
    gamma_a: float, gamma_b: float, e_d1: float, y0: float
) -> None:
    if gamma_a < 0 or gamma_b < 0:
        raise ValidationError("amplitudes must be >= 0")
    if not 0.0 <= e_d1 <= 1.0:
        raise ValidationError(f"e_d1 must be in [0, 1], got {e_d1!r}")
    if not 0.0 <= y0 <= 1.0:
        raise ValidationError(f"y0 must be in [0, 1], got {y0!r}")


def amplitudes(
    mu_a: float, mu_b: float, geometry: ChannelGeometry, params: SystemParams
) -> tuple[float, float]:
    """Detected amplitudes sqrt(mu * t * eta_d) for the two parties."""
    return (
        math.sqrt(mu_a * geometry.t_a * params.eta_d),
        math.sqrt(mu_b * geometry.t_b * params.eta_d),
    )


def qz_ez_closed_form(
    mu_a: float,
    mu_b: float,
    geometry: ChannelGeometry,
    params: SystemParams,
    e_d1: float | None = None,
) -> tuple[float, float]:
    """Z-basis gain and QBER from the full Bessel-averaged expressions.

    Q_Z = (Q_HH + Q_HV)/2 and E_Z = Q_HH/(Q_HH + Q_HV); e_d1 defaults to
    params.e_d / 2 (total misalignment split equally over the two channels).
    """
    if e_d1 is None:
        e_d1 = params.e_d / 2.0
    ga, gb = amplitudes(mu_a, mu_b, geometry, params)
    hh = sum(qz_hh_closed_form(ga, gb, e_d1, params.y0))
    hv = sum(qz_hv_closed_form(ga, gb, e_d1, params.y0))
    if hh + hv <= 0.0:
        raise NoCoincidencesError(
            "no coincidences: both gains are zero for these inputs"
        )
    return (hh + hv) / 2.0, hh / (hh + hv)


def second_order_qz_ez(
    mu_a: float,
    mu_b: float,
    geometry: ChannelGeometry,
    params: SystemParams,
) -> tuple[float, float]:
    """Background-free second-order approximation of (Q_Z, E_Z).

    Valid for weak detected intensities; e_d here is the total misalignment.
    """
    ga, gb = amplitudes(mu_a, mu_b, geometry, params)
    gs = ga * ga + gb * gb
    beta2 = (ga * gb) ** 2
    e_d = params.e_d
    q_z = (beta2 + e_d * (1.0 - e_d / 2.0) * (gs * gs - 2.0 * beta2)) / 2.0
    if q_z <= 0.0:
        return 0.0, 0.0
    e_z = gs * gs * e_d * (1.0 - e_d / 2.0) / (4.0 * q_z)
    return q_z, e_z


def y11_e11_true(
    geometry: ChannelGeometry, params: SystemParams
) -> tuple[float, float]:
    """Exact single-photon-pair yield and error rate for the reduced model
    (infinite-decoy limit; e_d is the total misalignment, mode mismatch is
    not included here).

    The X- and Z-basis yields coincide; the returned error rate is the
    X-basis one used in the privacy-amplification term.
    """
    t_a, t_b, eta, y0 = geometry.t_a, geometry.t_b, params.eta_d, params.y0
    ta_e, tb_e = t_a * eta, t_b * eta
    y11 = (1.0 - y0) ** 2 * (
        4.0 * y0 * y0 * (1.0 - ta_e) * (1.0 - tb_e)
        + 2.0 * y0 * (ta_e + tb_e - 1.5 * ta_e * tb_e)
        + ta_e * tb_e / 2.0
    )
    e11 = 0.5 - (
        ta_e * tb_e * (1.0 - params.e_d) ** 2 * (1.0 - y0) ** 2 / (4.0 * y11)
    )
    return y11, e11


def binary_entropy(x: float) -> float:
    """Binary entropy H2 in bits, with H2(0) = H2(1) = 0 by continuity."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"binary_entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def estimated_qz_ez(
    x: float, mu_a: float, mu_b: float, params: SystemParams
) -> tuple[float, float]:
    """Second-order (Q_Z, E_Z) written in the asymmetry ratio x = t_a/t_b,
    with the common factor t_b^2 eta_d^2 divided out of Q_Z."""
    two_ed = 2.0 * params.e_d - params.e_d**2
    denom = 2.0 * x * mu_a * mu_b + (mu_b**2 + x**2 * mu_a**2) * two_ed
    q_scaled = denom / 4.0
    if denom <= 0.0:
        return 0.0, 0.0
    e_z = (mu_b + x * mu_a) ** 2 * two_ed / (2.0 * denom)
    return q_scaled, e_z


def g_function(x: float, mu_a: float, mu_b: float, params: SystemParams) -> float:
    """Intensity-dependence factor of the background-free estimated key rate.

    Depends on the channels only through the ratio x, which is what makes the
    optimal intensities transmittance-invariant at fixed x.
    """
    if x <= 0:
        raise ValidationError(f"x must be > 0, got {x!r}")
    e11 = params.e_d - params.e_d**2 / 2.0
    q_scaled, e_z = estimated_qz_ez(x, mu_a, mu_b, params)
    privacy = x * mu_a * mu_b * math.exp(-(mu_a + mu_b)) * (
        1.0 - binary_entropy(e11)
    )
    ec = 2.0 * q_scaled * params.f_e * binary_entropy(e_z)
    return privacy - ec


def r_est(
    geometry: ChannelGeometry, mu_a: float, mu_b: float, params: SystemParams
) -> float:
    """Background-free estimated key rate (t_b^2 eta_d^2 / 2) * G(x, mu_a, mu_b).

    Quadratic in t_b at fixed x; can be negative away from the optimum.
    """
    g = g_function(geometry.x, mu_a, mu_b, params)
    return geometry.t_b**2 * params.eta_d**2 / 2.0 * g
