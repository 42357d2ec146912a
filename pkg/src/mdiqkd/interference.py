"""Numeric Bell-state-measurement model for weak coherent pulses.

Coherent amplitudes are propagated through the polarization-rotation
operators, the 50:50 beam splitter and the two polarizing beam splitters;
threshold-detector click statistics then give coincidence gains and error
rates for any basis and encoding pair. The relative phase between the two
pulses is averaged over one period, which realizes the Poisson photon-number
mixture of phase-randomized sources exactly.

Conventions (see CoincidenceResult):
  * beam-splitter outputs c = (a - b)/sqrt(2), d = (a + b)/sqrt(2), with
    Bob's amplitude carrying the relative phase exp(i*phi);
  * triplet = coincidence of the two detectors behind one output port
    ({ch & cv} or {dh & dv}), singlet = cross-port pairs ({ch & dv} or
    {cv & dh});
  * mode mismatch e_m splits Bob's pulse into a matched fraction
    sqrt(1 - e_m) that interferes with Alice's pulse and an orthogonal
    fraction sqrt(e_m) that reaches the same detectors incoherently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .params import ChannelGeometry, FixedAngles, SystemParams, ValidationError

Basis = Literal["Z", "X"]

_SQRT2 = math.sqrt(2.0)

# Jones vectors of the four BB84 states (real-valued in the H/V frame).
_JONES = {
    ("Z", 0): np.array([1.0, 0.0]),            # H
    ("Z", 1): np.array([0.0, 1.0]),            # V
    ("X", 0): np.array([1.0, 1.0]) / _SQRT2,   # +45 deg
    ("X", 1): np.array([1.0, -1.0]) / _SQRT2,  # -45 deg
}

# Samples are processed in blocks to bound memory in Monte-Carlo mode.
_SAMPLE_BLOCK = 256


@dataclass(frozen=True)
class EncodingPair:
    """One joint encoding choice: basis plus Alice's and Bob's bit."""

    basis: Basis
    alice_bit: int
    bob_bit: int

    def __post_init__(self) -> None:
        if self.basis not in ("Z", "X"):
            raise ValidationError(f"basis must be 'Z' or 'X', got {self.basis!r}")
        if self.alice_bit not in (0, 1) or self.bob_bit not in (0, 1):
            raise ValidationError("bits must be 0 or 1")


@dataclass(frozen=True)
class DetectorIntensities:
    """Mean photon number arriving at each relay detector (efficiency folded
    into the amplitudes). Entries are scalars or arrays over phi."""

    i_ch: np.ndarray
    i_cv: np.ndarray
    i_dh: np.ndarray
    i_dv: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.i_ch + self.i_cv + self.i_dh + self.i_dv


@dataclass(frozen=True)
class CoincidenceResult:
    """Phase-averaged Bell-outcome probabilities for one encoding pair."""

    q_triplet: float
    q_singlet: float
    is_error_triplet: bool
    is_error_singlet: bool

    @property
    def q_total(self) -> float:
        return self.q_triplet + self.q_singlet

    @property
    def error_gain(self) -> float:
        return self.q_triplet * self.is_error_triplet + (
            self.q_singlet * self.is_error_singlet
        )


def sifting_errors(pair: EncodingPair) -> tuple[bool, bool]:
    """(triplet_is_error, singlet_is_error) under the protocol convention.

    Z basis: both Bell outcomes announce anti-correlated bits, so any
    coincidence with equal bits is an error. X basis: the triplet announces
    correlated bits and the singlet anti-correlated ones.
    """
    same = pair.alice_bit == pair.bob_bit
    if pair.basis == "Z":
        return (same, same)
    return (not same, same)


def _rotate(jones: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Apply the rotation [[c,-s],[s,c]] to a Jones vector, batched over
    theta of shape [S]; returns [S, 2]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack(
        [c * jones[0] - s * jones[1], s * jones[0] + c * jones[1]], axis=-1
    )


def _rotated_frames(
    pair: EncodingPair, thetas: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Polarization vectors of Alice's and Bob's pulses at the PBS inputs,
    i.e. after the channel rotations and the common output rotation."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    a = _rotate(_JONES[(pair.basis, pair.alice_bit)], thetas[:, 0])
    b = _rotate(_JONES[(pair.basis, pair.bob_bit)], thetas[:, 1])
    t3 = thetas[:, 2]
    c3, s3 = np.cos(t3), np.sin(t3)

    def rot3(v: np.ndarray) -> np.ndarray:
        return np.stack(
            [c3 * v[:, 0] - s3 * v[:, 1], s3 * v[:, 0] + c3 * v[:, 1]], axis=-1
        )

    return rot3(a), rot3(b)


def detector_intensities(
    pair: EncodingPair,
    angles: tuple[float, float, float],
    phi: float | np.ndarray,
    gamma_a: float,
    gamma_b: float,
    e_m: float = 0.0,
) -> DetectorIntensities:
    """Optical intensity at each detector for a single phase value (or an
    array of phases).

    gamma_a/gamma_b are the detected amplitudes sqrt(mu * t * eta_d). The
    unmatched fraction of Bob's pulse contributes no phase cross-term.
    """
    if gamma_a < 0 or gamma_b < 0:
        raise ValidationError("amplitudes must be >= 0")
    if not 0.0 <= e_m <= 1.0:
        raise ValidationError(f"e_m must be in [0, 1], got {e_m!r}")
    a, b = _rotated_frames(pair, np.array([angles], dtype=float))
    a, b = a[0], b[0]
    base = (gamma_a**2 * a**2 + gamma_b**2 * b**2) / 2.0
    cross = math.sqrt(1.0 - e_m) * gamma_a * gamma_b * a * b
    cphi = np.cos(np.asarray(phi, dtype=float))[..., None]
    i_c = base - cross * cphi
    i_d = base + cross * cphi
    return DetectorIntensities(
        i_ch=i_c[..., 0], i_cv=i_c[..., 1], i_dh=i_d[..., 0], i_dv=i_d[..., 1]
    )


def click_probability(intensity: float | np.ndarray, y0: float) -> float | np.ndarray:
    """Threshold-detector click probability 1 - (1 - y0) exp(-intensity)."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValidationError("intensity must be >= 0")
    if not 0.0 <= y0 <= 1.0:
        raise ValidationError(f"y0 must be in [0, 1], got {y0!r}")
    # y0 - (1 - y0) * expm1(-i) keeps precision for very small intensities
    out = y0 - (1.0 - y0) * np.expm1(-intensity)
    return float(out) if out.ndim == 0 else out


def _pattern_gains(
    pair: EncodingPair,
    thetas: np.ndarray,
    gamma_a: np.ndarray,
    gamma_b: np.ndarray,
    e_m: float,
    y0: float,
    n_phi: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Phase- and sample-averaged (q_triplet, q_singlet), batched over K
    amplitude pairs; thetas has shape [S, 3]."""
    gamma_a = np.atleast_1d(np.asarray(gamma_a, dtype=float))
    gamma_b = np.atleast_1d(np.asarray(gamma_b, dtype=float))
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    cphi = np.cos(phi)  # uniform nodes over one period == trapezoid rule
    n_samples = thetas.shape[0]
    k = gamma_a.shape[0]
    trip = np.zeros(k)
    sing = np.zeros(k)
    one_m = 1.0 - y0
    m_cross = math.sqrt(1.0 - e_m)
    for lo in range(0, n_samples, _SAMPLE_BLOCK):
        hi = min(lo + _SAMPLE_BLOCK, n_samples)
        a, b = _rotated_frames(pair, thetas[lo:hi])  # [s, 2] each
        ga2 = gamma_a[:, None, None] ** 2
        gb2 = gamma_b[:, None, None] ** 2
        base = (ga2 * a[None, :, :] ** 2 + gb2 * b[None, :, :] ** 2) / 2.0
        cross = (
            m_cross * gamma_a[:, None, None] * gamma_b[:, None, None] * a * b
        )
        # intensities [k, s, 2, n]
        i_c = base[..., None] - cross[..., None] * cphi
        i_d = base[..., None] + cross[..., None] * cphi
        p_c = y0 - one_m * np.expm1(-i_c)
        p_d = y0 - one_m * np.expm1(-i_d)
        pch, pcv = p_c[:, :, 0, :], p_c[:, :, 1, :]
        pdh, pdv = p_d[:, :, 0, :], p_d[:, :, 1, :]
        t = pch * pcv * (1 - pdh) * (1 - pdv) + pdh * pdv * (1 - pch) * (1 - pcv)
        s = pch * pdv * (1 - pcv) * (1 - pdh) + pcv * pdh * (1 - pch) * (1 - pdv)
        trip += t.mean(axis=2).sum(axis=1)
        sing += s.mean(axis=2).sum(axis=1)
    return trip / n_samples, sing / n_samples


def coincidence_gains(
    pair: EncodingPair,
    angles: tuple[float, float, float],
    gamma_a: float,
    gamma_b: float,
    e_m: float,
    y0: float,
    quadrature_points: int = 128,
) -> CoincidenceResult:
    """Bell-outcome probabilities for one encoding pair at fixed angles.

    Each of the four coincidence patterns is evaluated as
    P_i P_j (1-P_k)(1-P_l) on a uniform phase grid and averaged; the two
    patterns of each Bell outcome are summed explicitly.
    """
    if quadrature_points < 16:
        raise ValidationError(
            f"quadrature_points must be >= 16, got {quadrature_points!r}"
        )
    if gamma_a < 0 or gamma_b < 0:
        raise ValidationError("amplitudes must be >= 0")
    if not 0.0 <= e_m <= 1.0:
        raise ValidationError(f"e_m must be in [0, 1], got {e_m!r}")
    if not 0.0 <= y0 <= 1.0:
        raise ValidationError(f"y0 must be in [0, 1], got {y0!r}")
    thetas = np.array([angles], dtype=float)
    trip, sing = _pattern_gains(
        pair, thetas, np.array([gamma_a]), np.array([gamma_b]), e_m, y0,
        quadrature_points,
    )
    err_t, err_s = sifting_errors(pair)
    return CoincidenceResult(
        q_triplet=float(trip[0]),
        q_singlet=float(sing[0]),
        is_error_triplet=err_t,
        is_error_singlet=err_s,
    )


@lru_cache(maxsize=32)
def _angle_samples(params: SystemParams) -> np.ndarray:
    """Rotation-angle draws for the configured misalignment mode, shape [S, 3].

    Monte-Carlo draws use a counter-based generator keyed by
    (rng_seed, sample index), so every sample is reproducible independently
    of evaluation order and the same draws are reused for every intensity
    pair (required for the decoy-state linear combinations to stay exact).
    """
    mode = params.misalignment_mode
    if isinstance(mode, FixedAngles):
        out = np.array([[mode.theta1, mode.theta2, mode.theta3]], dtype=float)
    else:
        stds = np.array(params.angle_stddevs)
        if np.all(stds == 0.0):
            out = np.zeros((1, 3))
        else:
            out = np.empty((params.mc_samples, 3))
            seed = np.uint64(params.rng_seed & 0xFFFFFFFFFFFFFFFF)
            for i in range(params.mc_samples):
                key = np.array([seed, np.uint64(i)], dtype=np.uint64)
                gen = np.random.Generator(np.random.Philox(key=key))
                out[i] = gen.standard_normal(3) * stds
    out.setflags(write=False)
    return out


_BITS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _basis_gains_batch(
    basis: Basis,
    gamma_a: np.ndarray,
    gamma_b: np.ndarray,
    params: SystemParams,
) -> tuple[np.ndarray, np.ndarray]:
    """(Q, EQ) for a batch of amplitude pairs: gain and error-weighted gain
    averaged over the four equally likely encoding pairs of the basis."""
    thetas = _angle_samples(params)
    q = np.zeros_like(np.atleast_1d(np.asarray(gamma_a, dtype=float)))
    eq = np.zeros_like(q)
    for bits in _BITS:
        pair = EncodingPair(basis, *bits)
        trip, sing = _pattern_gains(
            pair, thetas, gamma_a, gamma_b, params.e_m, params.y0,
            params.quadrature_points,
        )
        err_t, err_s = sifting_errors(pair)
        q += (trip + sing) / 4.0
        eq += (trip * err_t + sing * err_s) / 4.0
    return q, eq


def gains_for_intensity_pairs(
    basis: Basis,
    intensity_pairs: list[tuple[float, float]],
    geometry: ChannelGeometry,
    params: SystemParams,
) -> list[tuple[float, float]]:
    """(Q, EQ) for several (q_a, q_b) mean-photon-number pairs in one engine
    pass; used to fill measurement tables efficiently."""
    t_a, t_b, eta = geometry.t_a, geometry.t_b, params.eta_d
    gamma_a = np.array([math.sqrt(qa * t_a * eta) for qa, _ in intensity_pairs])
    gamma_b = np.array([math.sqrt(qb * t_b * eta) for _, qb in intensity_pairs])
    q, eq = _basis_gains_batch(basis, gamma_a, gamma_b, params)
    return [(float(qi), float(eqi)) for qi, eqi in zip(q, eq)]


def gain_and_qber(
    basis: Basis,
    mu_a: float,
    mu_b: float,
    geometry: ChannelGeometry,
    params: SystemParams,
) -> tuple[float, float]:
    """Overall gain Q and QBER E for one basis and one intensity pair.

    Averages the four encoding pairs with weight 1/4 each and, in Monte-Carlo
    mode, over the configured number of Gaussian angle draws. E is the
    error-weighted fraction of coincidences; E = 0 when Q = 0.
    """
    if mu_a < 0 or mu_b < 0:
        raise ValidationError("intensities must be >= 0")
    [(q, eq)] = gains_for_intensity_pairs(basis, [(mu_a, mu_b)], geometry, params)
    return q, (eq / q if q > 0 else 0.0)
