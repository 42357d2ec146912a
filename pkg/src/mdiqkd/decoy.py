"""Two-decoy-state estimation: measured-equivalent gain tables and the
analytic single-photon bounds they support.

The estimator never looks at photon numbers; it consumes only the 18
(basis, intensity pair) observables an experiment would record, so an
externally measured table can be loaded from CSV and fed through the same
bounds.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Literal

from .interference import Basis, gains_for_intensity_pairs
from .params import (
    ChannelGeometry,
    IntensitySettings,
    SystemParams,
    ValidationError,
    validate_intensities,
)

Label = Literal["mu", "nu", "omega"]
_LABELS: tuple[Label, Label, Label] = ("mu", "nu", "omega")

_CSV_HEADER = ["basis", "q_a", "q_b", "Q", "EQ"]


class DegenerateIntensityError(ValidationError):
    """Raised when a decoy denominator (nu - omega or mu - nu) vanishes."""


class UnboundedErrorSignal(ValueError):
    """Raised when the single-photon error cannot be bounded (Y11 bound 0)."""


@dataclass(frozen=True)
class GainTable:
    """Gains Q and error-weighted gains EQ indexed by
    (basis, Alice intensity label, Bob intensity label)."""

    settings: IntensitySettings
    entries: dict[tuple[str, str, str], tuple[float, float]]

    def q(self, basis: str, a: str, b: str) -> float:
        return self.entries[(basis, a, b)][0]

    def eq(self, basis: str, a: str, b: str) -> float:
        return self.entries[(basis, a, b)][1]

    def validate(self) -> None:
        for key, (q, eq) in self.entries.items():
            if not 0.0 <= eq <= q <= 1.0:
                raise ValidationError(f"entry {key} violates 0 <= EQ <= Q <= 1")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_CSV_HEADER)
        for basis in ("Z", "X"):
            for a in _LABELS:
                for b in _LABELS:
                    q, eq = self.entries[(basis, a, b)]
                    writer.writerow([basis, a, b, f"{q:.17g}", f"{eq:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, settings: IntensitySettings) -> "GainTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != _CSV_HEADER:
            raise ValidationError(f"unexpected gain-table header {header!r}")
        entries: dict[tuple[str, str, str], tuple[float, float]] = {}
        for row in reader:
            if not row:
                continue
            basis, a, b, q, eq = row
            if basis not in ("Z", "X") or a not in _LABELS or b not in _LABELS:
                raise ValidationError(f"bad gain-table row {row!r}")
            entries[(basis, a, b)] = (float(q), float(eq))
        if len(entries) != 18:
            raise ValidationError(f"expected 18 gain-table rows, got {len(entries)}")
        table = cls(settings=settings, entries=entries)
        table.validate()
        return table


@dataclass(frozen=True)
class DecoyBounds:
    """Single-photon bounds extracted from a GainTable. Raw values keep the
    possibly negative result of the four-term cancellations; the main fields
    are clamped to [0, 1]."""

    y11_z_lower: float
    y11_x_lower: float
    e11_x_upper: float
    case_z: str
    case_x: str
    y11_z_raw: float
    y11_x_raw: float
    e11_x_raw: float


def build_gain_table(
    settings: IntensitySettings,
    geometry: ChannelGeometry,
    params: SystemParams,
) -> GainTable:
    """Compute all 18 observables with the interference engine."""
    validate_intensities(settings)
    pairs = [
        (qa, qb)
        for qa in settings.party("a")
        for qb in settings.party("b")
    ]
    entries: dict[tuple[str, str, str], tuple[float, float]] = {}
    for basis in ("Z", "X"):
        results = gains_for_intensity_pairs(basis, pairs, geometry, params)
        idx = 0
        for a in _LABELS:
            for b in _LABELS:
                entries[(basis, a, b)] = results[idx]
                idx += 1
    return GainTable(settings=settings, entries=entries)


def _rescaled(table: GainTable, basis: str, a: Label, b: Label, use_eq: bool) -> float:
    """Observable times exp(q_a + q_b), the form entering the linear algebra."""
    ia = {"mu": 0, "nu": 1, "omega": 2}
    qa = table.settings.party("a")[ia[a]]
    qb = table.settings.party("b")[ia[b]]
    value = table.eq(basis, a, b) if use_eq else table.q(basis, a, b)
    return value * math.exp(qa + qb)


def _m_quantities(table: GainTable, basis: str) -> tuple[float, float]:
    """The two vacuum-cancelled combinations Q^M1 (nu/omega block) and
    Q^M2 (mu/omega block)."""
    m1 = (
        _rescaled(table, basis, "nu", "nu", False)
        + _rescaled(table, basis, "omega", "omega", False)
        - _rescaled(table, basis, "nu", "omega", False)
        - _rescaled(table, basis, "omega", "nu", False)
    )
    m2 = (
        _rescaled(table, basis, "mu", "mu", False)
        + _rescaled(table, basis, "omega", "omega", False)
        - _rescaled(table, basis, "mu", "omega", False)
        - _rescaled(table, basis, "omega", "mu", False)
    )
    return m1, m2


def _check_denominators(settings: IntensitySettings) -> None:
    for party in ("a", "b"):
        mu, nu, omega = settings.party(party)
        if math.isclose(nu, omega) or math.isclose(mu, nu):
            raise DegenerateIntensityError(
                f"party {party}: decoy denominators need mu > nu > omega "
                f"strictly, got {(mu, nu, omega)!r}"
            )


def y11_lower_bound(
    table: GainTable, settings: IntensitySettings, basis: Basis
) -> tuple[float, str, float]:
    """Lower bound on the single-photon-pair yield from the 9 gains of one
    basis. Returns (clamped value, case used, raw value).

    The case selection decides whether the residual two-photon term that the
    combination cannot cancel carries a negative coefficient, which is what
    makes the result a valid lower bound.
    """
    _check_denominators(settings)
    mu_a, nu_a, om_a = settings.party("a")
    mu_b, nu_b, om_b = settings.party("b")
    m1, m2 = _m_quantities(table, basis)
    base = (mu_a - om_a) * (mu_b - om_b) * (nu_a - om_a) * (nu_b - om_b)
    if (mu_a + om_a) / (nu_a + om_a) <= (mu_b + om_b) / (nu_b + om_b):
        case = "Case1"
        num = (mu_a**2 - om_a**2) * (mu_b - om_b) * m1 - (
            (nu_a**2 - om_a**2) * (nu_b - om_b) * m2
        )
        den = base * (mu_a - nu_a)
    else:
        case = "Case2"
        num = (mu_b**2 - om_b**2) * (mu_a - om_a) * m1 - (
            (nu_b**2 - om_b**2) * (nu_a - om_a) * m2
        )
        den = base * (mu_b - nu_b)
    raw = num / den
    return min(max(raw, 0.0), 1.0), case, raw


def e11_upper_bound(
    table: GainTable, settings: IntensitySettings, y11_x_lower: float
) -> tuple[float, float]:
    """Upper bound on the single-photon X-basis error rate.

    Uses the nu/omega error-gain block divided by the Y11 lower bound;
    returns (clamped value, raw value).
    """
    _check_denominators(settings)
    if y11_x_lower <= 0.0:
        raise UnboundedErrorSignal(
            "single-photon yield bound is zero: error rate unbounded, no key"
        )
    _, nu_a, om_a = settings.party("a")
    _, nu_b, om_b = settings.party("b")
    num = (
        _rescaled(table, "X", "nu", "nu", True)
        + _rescaled(table, "X", "omega", "omega", True)
        - _rescaled(table, "X", "nu", "omega", True)
        - _rescaled(table, "X", "omega", "nu", True)
    )
    raw = num / ((nu_a - om_a) * (nu_b - om_b) * y11_x_lower)
    return min(max(raw, 0.0), 1.0), raw


def decoy_bounds(table: GainTable, settings: IntensitySettings) -> DecoyBounds:
    """All Table-style bounds from one gain table."""
    y11_z, case_z, y11_z_raw = y11_lower_bound(table, settings, "Z")
    y11_x, case_x, y11_x_raw = y11_lower_bound(table, settings, "X")
    e11, e11_raw = e11_upper_bound(table, settings, y11_x)
    return DecoyBounds(
        y11_z_lower=y11_z,
        y11_x_lower=y11_x,
        e11_x_upper=e11,
        case_z=case_z,
        case_x=case_x,
        y11_z_raw=y11_z_raw,
        y11_x_raw=y11_x_raw,
        e11_x_raw=e11_raw,
    )
