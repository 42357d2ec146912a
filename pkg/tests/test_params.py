import dataclasses
import math

import pytest

from mdiqkd import (
    ChannelGeometry,
    FixedAngles,
    GaussianMC,
    IntensitySettings,
    SystemParams,
    ValidationError,
    channel_ratio,
    geometry_for_ratio,
    reduction_angles,
    symmetric_intensities,
    transmittance_from_distance,
    validate_intensities,
)


class TestTransmittance:
    def test_zero_length_identity(self):
        assert transmittance_from_distance(0.0, 0.2) == 1.0

    @pytest.mark.parametrize("l_km,expected", [(50.0, 0.1), (100.0, 0.01)])
    def test_standard_fiber_values(self, l_km, expected):
        assert transmittance_from_distance(l_km, 0.2) == pytest.approx(expected, rel=1e-12)

    def test_rejects_negative_inputs(self):
        with pytest.raises(ValidationError):
            transmittance_from_distance(-1.0, 0.2)
        with pytest.raises(ValidationError):
            transmittance_from_distance(10.0, 0.0)

    def test_exponential_law(self):
        for a in (0.0, 3.0, 17.5, 60.0):
            for b in (0.1, 12.0, 80.0):
                lhs = transmittance_from_distance(a + b, 0.2)
                rhs = transmittance_from_distance(a, 0.2) * transmittance_from_distance(b, 0.2)
                assert abs(lhs - rhs) <= 1e-12

    def test_strictly_decreasing(self):
        values = [transmittance_from_distance(l, 0.2) for l in (0, 10, 20, 50, 150)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestChannelRatio:
    def test_symmetry_gives_one(self):
        assert channel_ratio(0.37, 0.37) == 1.0

    def test_field_test_ratios(self):
        assert channel_ratio(0.752 * 0.9, 0.9) == pytest.approx(0.752, rel=1e-12)
        assert channel_ratio(0.017 * 0.5, 0.5) == pytest.approx(0.017, rel=1e-12)

    def test_antisymmetric(self):
        for t_a, t_b in ((0.1, 0.9), (0.33, 0.41), (1.0, 0.05)):
            assert channel_ratio(t_a, t_b) * channel_ratio(t_b, t_a) == pytest.approx(
                1.0, abs=1e-12
            )

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            channel_ratio(0.5, 0.0)
        with pytest.raises(ValidationError):
            channel_ratio(1.5, 0.5)


class TestIntensityValidation:
    def test_standard_settings_ok(self):
        validate_intensities(symmetric_intensities(0.3, 0.1, 5e-4))

    def test_zero_omega_permitted(self):
        validate_intensities(symmetric_intensities(0.3, 0.1, 0.0))

    def test_equal_mu_nu_rejected_naming_party(self):
        with pytest.raises(ValidationError, match="party a.*mu > nu"):
            IntensitySettings(0.1, 0.1, 0.0, 0.3, 0.1, 0.0)

    def test_equal_nu_omega_rejected(self):
        with pytest.raises(ValidationError, match="party b.*nu > omega"):
            IntensitySettings(0.3, 0.1, 0.0, 0.3, 0.1, 0.1)

    def test_negative_omega_rejected(self):
        with pytest.raises(ValidationError):
            IntensitySettings(0.3, 0.1, -0.1, 0.3, 0.1, 0.0)


class TestSystemParams:
    def test_default_split_sums_to_e_d(self):
        p = SystemParams(e_d=0.04)
        e1, e2, e3 = p.e_split
        assert e1 == e2 == pytest.approx(0.475 * 0.04)
        assert e3 == pytest.approx(0.05 * 0.04)
        assert abs(e1 + e2 + e3 - p.e_d) <= 1e-12

    def test_custom_split_accepted(self):
        p = SystemParams(e_d=0.03, e_split=(0.01, 0.01, 0.01))
        assert p.e_split == (0.01, 0.01, 0.01)

    def test_inconsistent_split_rejected(self):
        with pytest.raises(ValidationError):
            SystemParams(e_d=0.03, e_split=(0.01, 0.01, 0.02))

    @pytest.mark.parametrize("n", [8, 15, 17, 33])
    def test_quadrature_constraints(self, n):
        with pytest.raises(ValidationError):
            SystemParams(quadrature_points=n)

    def test_f_e_below_one_rejected(self):
        with pytest.raises(ValidationError):
            SystemParams(f_e=0.9)

    def test_immutable(self):
        p = SystemParams()
        with pytest.raises(dataclasses.FrozenInstanceError):
            p.eta_d = 0.2  # type: ignore[misc]

    def test_angle_stddevs(self):
        p = SystemParams(e_d=0.02)
        s1, s2, s3 = p.angle_stddevs
        assert s1 == pytest.approx(math.asin(math.sqrt(0.475 * 0.02)))
        assert s3 == pytest.approx(math.asin(math.sqrt(0.05 * 0.02)))

    def test_mode_default_is_gaussian(self):
        assert isinstance(SystemParams().misalignment_mode, GaussianMC)

    def test_reduction_angles(self):
        mode = reduction_angles(0.03)
        assert isinstance(mode, FixedAngles)
        assert math.sin(mode.theta1) ** 2 == pytest.approx(0.015, rel=1e-12)
        assert mode.theta1 == mode.theta2
        assert mode.theta3 == 0.0


class TestChannelGeometry:
    def test_transmittances_and_ratio(self):
        g = ChannelGeometry(50.0, 25.0, 0.2)
        assert g.t_a == pytest.approx(0.1, rel=1e-12)
        assert g.t_b == pytest.approx(10 ** (-0.5), rel=1e-12)
        assert g.x == pytest.approx(g.t_a / g.t_b, rel=1e-12)

    def test_geometry_for_ratio_round_trip(self):
        g = geometry_for_ratio(0.1, 5.0, 0.2)
        assert g.l_bc_km == 5.0
        assert g.x == pytest.approx(0.1, rel=1e-9)
        assert g.l_ac_km == pytest.approx(55.0, rel=1e-9)

    def test_negative_length_rejected(self):
        with pytest.raises(ValidationError):
            ChannelGeometry(-1.0, 10.0)
        with pytest.raises(ValidationError):
            geometry_for_ratio(2.0, 0.0)
