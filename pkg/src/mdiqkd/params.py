"""Physical parameters, channel geometry and intensity settings.

All types are frozen dataclasses: immutable after construction and safe to
share across threads. Validation happens at construction time so downstream
numerics can assume well-formed inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class ValidationError(ValueError):
    """Raised when a parameter is outside its physical domain."""


def _check_fraction(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must be in [0, 1], got {value!r}")


def transmittance_from_distance(l_km: float, alpha_db_per_km: float) -> float:
    """Fiber transmittance 10^(-alpha*L/10) for a link of ``l_km`` kilometers."""
    if l_km < 0:
        raise ValidationError(f"distance must be >= 0, got {l_km!r}")
    if alpha_db_per_km <= 0:
        raise ValidationError(f"attenuation must be > 0, got {alpha_db_per_km!r}")
    return 10.0 ** (-alpha_db_per_km * l_km / 10.0)


def channel_ratio(t_a: float, t_b: float) -> float:
    """Channel asymmetry ratio x = t_a / t_b."""
    for name, t in (("t_a", t_a), ("t_b", t_b)):
        if not 0.0 < t <= 1.0:
            raise ValidationError(f"{name} must be in (0, 1], got {t!r}")
    return t_a / t_b


@dataclass(frozen=True)
class FixedAngles:
    """Deterministic polarization-rotation angles (radians).

    theta1/theta2 act on Alice's/Bob's channel, theta3 on both relay output
    ports before their polarizing beam splitters.
    """

    theta1: float
    theta2: float
    theta3: float = 0.0


@dataclass(frozen=True)
class GaussianMC:
    """Monte-Carlo mode: each rotation angle is drawn per sample from a
    zero-mean Gaussian with standard deviation arcsin(sqrt(e_k))."""


def reduction_angles(e_d: float) -> FixedAngles:
    """Fixed angles equivalent to a total misalignment ``e_d`` split equally
    over the two channels (theta1 = theta2 = arcsin(sqrt(e_d/2)), theta3 = 0).

    This is the configuration the closed-form gain expressions describe.
    """
    _check_fraction("e_d", e_d)
    theta = math.asin(math.sqrt(e_d / 2.0))
    return FixedAngles(theta, theta, 0.0)


@dataclass(frozen=True)
class SystemParams:
    """Detector, channel-error and numerical-control parameters.

    The misalignment budget e_d is split over the three rotation operators as
    (e1, e2, e3); by default e1 = e2 = 0.475*e_d and e3 = 0.05*e_d (the relay's
    local PBS is assumed well aligned relative to the two transmission
    channels). The split is overridable; results depend only weakly on it.
    """

    eta_d: float = 0.145
    y0: float = 6.02e-6
    f_e: float = 1.16
    alpha_db_per_km: float = 0.2
    e_d: float = 0.015
    e_m: float = 0.02
    e_split: tuple[float, float, float] | None = None
    misalignment_mode: FixedAngles | GaussianMC = field(default_factory=GaussianMC)
    quadrature_points: int = 128
    mc_samples: int = 2000
    rng_seed: int = 1

    def __post_init__(self) -> None:
        _check_fraction("eta_d", self.eta_d)
        _check_fraction("y0", self.y0)
        _check_fraction("e_d", self.e_d)
        _check_fraction("e_m", self.e_m)
        if self.f_e < 1.0:
            raise ValidationError(f"f_e must be >= 1, got {self.f_e!r}")
        if self.alpha_db_per_km <= 0:
            raise ValidationError(
                f"alpha_db_per_km must be > 0, got {self.alpha_db_per_km!r}"
            )
        if self.e_split is None:
            split = (0.475 * self.e_d, 0.475 * self.e_d, 0.05 * self.e_d)
            object.__setattr__(self, "e_split", split)
        e1, e2, e3 = self.e_split
        for name, e in (("e1", e1), ("e2", e2), ("e3", e3)):
            _check_fraction(name, e)
        if abs(e1 + e2 + e3 - self.e_d) > 1e-12:
            raise ValidationError(
                f"e_split must sum to e_d={self.e_d!r}, got {self.e_split!r}"
            )
        if self.quadrature_points < 16 or self.quadrature_points % 2 != 0:
            raise ValidationError(
                f"quadrature_points must be even and >= 16, got {self.quadrature_points!r}"
            )
        if self.mc_samples < 1:
            raise ValidationError(f"mc_samples must be >= 1, got {self.mc_samples!r}")

    @property
    def angle_stddevs(self) -> tuple[float, float, float]:
        """Gaussian widths arcsin(sqrt(e_k)) of the three rotation angles."""
        e1, e2, e3 = self.e_split  # type: ignore[misc]
        return (
            math.asin(math.sqrt(e1)),
            math.asin(math.sqrt(e2)),
            math.asin(math.sqrt(e3)),
        )


@dataclass(frozen=True)
class ChannelGeometry:
    """Two fiber links joining the parties to the relay."""

    l_ac_km: float
    l_bc_km: float
    alpha_db_per_km: float = 0.2

    def __post_init__(self) -> None:
        if self.l_ac_km < 0 or self.l_bc_km < 0:
            raise ValidationError(
                f"link lengths must be >= 0, got {(self.l_ac_km, self.l_bc_km)!r}"
            )
        if self.alpha_db_per_km <= 0:
            raise ValidationError(
                f"alpha_db_per_km must be > 0, got {self.alpha_db_per_km!r}"
            )

    @property
    def t_a(self) -> float:
        return transmittance_from_distance(self.l_ac_km, self.alpha_db_per_km)

    @property
    def t_b(self) -> float:
        return transmittance_from_distance(self.l_bc_km, self.alpha_db_per_km)

    @property
    def x(self) -> float:
        """Transmittance ratio t_a / t_b."""
        return channel_ratio(self.t_a, self.t_b)


def geometry_for_ratio(
    x: float, l_bc_km: float, alpha_db_per_km: float = 0.2
) -> ChannelGeometry:
    """Geometry with Bob's link fixed and Alice's link chosen so t_a/t_b = x."""
    if x <= 0:
        raise ValidationError(f"x must be > 0, got {x!r}")
    if x > 10 ** (alpha_db_per_km * l_bc_km / 10.0) + 1e-12:
        raise ValidationError(f"x={x!r} needs a negative-length link for Alice")
    l_ac = l_bc_km - 10.0 * math.log10(x) / alpha_db_per_km
    return ChannelGeometry(max(l_ac, 0.0), l_bc_km, alpha_db_per_km)


@dataclass(frozen=True)
class IntensitySettings:
    """Per-party signal/decoy mean photon numbers, mu > nu > omega >= 0."""

    mu_a: float
    nu_a: float
    omega_a: float
    mu_b: float
    nu_b: float
    omega_b: float

    def __post_init__(self) -> None:
        validate_intensities(self)

    def party(self, which: str) -> tuple[float, float, float]:
        if which == "a":
            return (self.mu_a, self.nu_a, self.omega_a)
        if which == "b":
            return (self.mu_b, self.nu_b, self.omega_b)
        raise ValidationError(f"party must be 'a' or 'b', got {which!r}")


def validate_intensities(s: IntensitySettings) -> None:
    """Enforce the strict ordering mu > nu > omega >= 0 for each party."""
    for party in ("a", "b"):
        mu, nu, omega = (
            (s.mu_a, s.nu_a, s.omega_a) if party == "a" else (s.mu_b, s.nu_b, s.omega_b)
        )
        if omega < 0:
            raise ValidationError(f"omega_{party} must be >= 0, got {omega!r}")
        if not mu > nu:
            raise ValidationError(
                f"party {party}: need mu > nu, got mu={mu!r}, nu={nu!r}"
            )
        if not nu > omega:
            raise ValidationError(
                f"party {party}: need nu > omega, got nu={nu!r}, omega={omega!r}"
            )


def symmetric_intensities(
    mu: float, nu: float, omega: float
) -> IntensitySettings:
    """Same signal/decoy levels for both parties."""
    return IntensitySettings(mu, nu, omega, mu, nu, omega)
