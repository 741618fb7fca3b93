import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spskit.qkd import (
    ChannelModel,
    DetectorModel,
    GYS_DETECTOR,
    NoCrossingError,
    NoPositiveRateError,
    QkdError,
    SourceModel,
    beam_diameter_m,
    binary_entropy,
    calibrate_divergence_half_angle,
    channel_transmittance,
    effective_rate,
    find_crossing,
    ideal_sps,
    key_rate,
    optimize_mu,
    sweep,
)

REAL_SPS = SourceModel(kind="real_sps", mean_photons=0.513, g2_zero=0.018)
WCS = SourceModel(kind="wcs", mean_photons=0.5, mu_mode="optimal")
DECOY = SourceModel(kind="decoy", mean_photons=0.5, mu_mode="optimal")
FIBER = ChannelModel(kind="fiber", attenuation_db_per_km=0.21)


class TestBinaryEntropy:
    def test_endpoints_and_midpoint(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_symmetry_and_bounds(self, x):
        h = binary_entropy(x)
        assert 0.0 <= h <= 1.0
        assert h == pytest.approx(binary_entropy(1.0 - x), abs=1e-12)


class TestChannels:
    def test_fiber_loss_at_42_km(self):
        t = channel_transmittance(FIBER.at_distance(42.0))
        assert t == pytest.approx(10 ** (-0.882), rel=1e-12)
        assert -10 * math.log10(t) == pytest.approx(8.82, abs=1e-9)

    def test_zero_distance_is_transparent(self):
        for channel in (FIBER, ChannelModel(kind="freespace")):
            assert channel_transmittance(channel.at_distance(0.0)) == 1.0

    def test_gaussian_farfield_puts_882_db_near_115_km(self):
        channel = ChannelModel(kind="freespace", divergence_model="gaussian_farfield")
        lo, hi = 1.0, 5000.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            loss = -10 * math.log10(channel_transmittance(channel.at_distance(mid)))
            if loss < 8.82:
                lo = mid
            else:
                hi = mid
        assert 0.5 * (lo + hi) == pytest.approx(115.0, abs=5.0)

    def test_calibrated_model_pins_loss_to_distance(self):
        theta = calibrate_divergence_half_angle(0.05, 0.60, 8.82, 630.0)
        channel = ChannelModel(kind="freespace", divergence_model="calibrated",
                               divergence_half_angle_rad=theta)
        loss = -10 * math.log10(channel_transmittance(channel.at_distance(630.0)))
        assert loss == pytest.approx(8.82, abs=1e-9)

    def test_friis_model_decreases_with_distance(self):
        channel = ChannelModel(kind="freespace", divergence_model="friis")
        ts = [channel_transmittance(channel.at_distance(d)) for d in (50, 200, 800)]
        assert ts[0] > ts[1] > ts[2]

    def test_beam_spreads_with_distance(self):
        channel = ChannelModel(kind="freespace")
        assert beam_diameter_m(channel.at_distance(500.0)) > \
            beam_diameter_m(channel.at_distance(50.0))

    def test_validation(self):
        with pytest.raises(QkdError):
            ChannelModel(kind="microwave")
        with pytest.raises(QkdError):
            ChannelModel(kind="freespace", divergence_model="calibrated")
        with pytest.raises(QkdError):
            ChannelModel(kind="fiber", attenuation_db_per_km=0.0)


class TestKeyRate:
    def test_lossless_noiseless_ideal_source(self):
        detector = DetectorModel(receiver_efficiency=1.0, dark_count_per_pulse=0.0,
                                 misalignment_error=0.0,
                                 error_correction_inefficiency=1.0, sifting_factor=0.5)
        result = key_rate(ideal_sps(), FIBER.at_distance(0.0), detector)
        assert result.rate == pytest.approx(0.5, rel=1e-12)

    def test_dark_count_dominated_cutoff(self):
        # deep loss: errors pinned at 1/2 by dark counts, no key
        result = key_rate(REAL_SPS, FIBER.at_distance(400.0), GYS_DETECTOR)
        assert result.rate == 0.0
        assert result.below_horizon

    def test_unit_efficiency_zero_g2_equals_ideal(self):
        tuned = SourceModel(kind="real_sps", mean_photons=1.0, g2_zero=0.0)
        for d in (0.0, 10.0, 30.0, 60.0, 120.0):
            channel = FIBER.at_distance(d)
            assert key_rate(tuned, channel, GYS_DETECTOR).rate == pytest.approx(
                key_rate(ideal_sps(), channel, GYS_DETECTOR).rate, rel=1e-12)

    def test_rates_monotone_non_increasing(self):
        distances = np.linspace(0.0, 150.0, 151)
        for source in (REAL_SPS, ideal_sps(), WCS, DECOY):
            rates = [effective_rate(source, FIBER.at_distance(d), GYS_DETECTOR)
                     for d in distances]
            assert all(b <= a + 1e-9 for a, b in zip(rates, rates[1:])), source.kind

    def test_ideal_dominates_real(self):
        for d in np.linspace(0.0, 150.0, 76):
            channel = FIBER.at_distance(d)
            assert key_rate(ideal_sps(), channel, GYS_DETECTOR).rate >= \
                key_rate(REAL_SPS, channel, GYS_DETECTOR).rate - 1e-15


class TestMuOptimization:
    @pytest.mark.parametrize("source,distance", [
        (WCS, 10.0), (WCS, 30.0), (DECOY, 10.0), (DECOY, 42.0)])
    def test_matches_brute_force_grid(self, source, distance):
        channel = FIBER.at_distance(distance)
        mu_star, rate_star = optimize_mu(source, channel, GYS_DETECTOR)
        grid = np.linspace(1e-6, 1.5, 10000)
        rates = [key_rate(source, channel, GYS_DETECTOR, mu=m).rate for m in grid]
        assert rate_star >= max(rates) - 1e-12

    def test_decoy_optimum_insensitive_to_distance(self):
        mus = [optimize_mu(DECOY, FIBER.at_distance(d), GYS_DETECTOR)[0]
               for d in (5.0, 25.0, 60.0)]
        assert max(mus) - min(mus) < 0.1 * max(mus)
        assert all(0.3 < m < 0.7 for m in mus)

    def test_wcs_optimum_tracks_link_transmittance(self):
        # heavier loss pushes the optimal pulse intensity down
        mus = [optimize_mu(WCS, FIBER.at_distance(d), GYS_DETECTOR)[0]
               for d in (5.0, 20.0, 35.0)]
        assert mus[0] > mus[1] > mus[2]

    def test_noiseless_decoy_peaks_at_unit_intensity(self):
        detector = DetectorModel(receiver_efficiency=1.0, dark_count_per_pulse=0.0,
                                 misalignment_error=0.0,
                                 error_correction_inefficiency=1.0, sifting_factor=0.5)
        mu_star, _ = optimize_mu(DECOY, FIBER.at_distance(0.0), detector)
        # rate reduces to mu e^(-mu) Y1: the optimum sits at mu = 1
        assert mu_star == pytest.approx(1.0, abs=1e-3)

    def test_no_positive_rate_raises(self):
        with pytest.raises(NoPositiveRateError, match="no positive rate"):
            optimize_mu(WCS, FIBER.at_distance(300.0), GYS_DETECTOR)

    def test_sps_sources_rejected(self):
        with pytest.raises(QkdError):
            optimize_mu(REAL_SPS, FIBER.at_distance(10.0), GYS_DETECTOR)


class TestCrossing:
    def test_real_vs_decoy_crossing_exists_and_loss_is_linear(self):
        report = find_crossing(REAL_SPS, DECOY, FIBER, GYS_DETECTOR, (1.0, 120.0))
        assert report.loss_db == pytest.approx(
            report.distance_km * 0.21, abs=1e-9)
        # the tagged-states bound puts the crossing in the mid-20s km
        assert 15.0 < report.distance_km < 35.0
        assert report.rate > 0.0

    def test_ideal_never_crossed_by_real(self):
        with pytest.raises(NoCrossingError, match="no crossing"):
            find_crossing(ideal_sps(), REAL_SPS, FIBER, GYS_DETECTOR, (1.0, 150.0))

    def test_crossing_loss_matches_fiber_and_freespace(self):
        # the rate formulas see only the transmittance, so the crossing
        # loss in dB is channel-shape independent
        fiber_report = find_crossing(REAL_SPS, DECOY, FIBER, GYS_DETECTOR, (1.0, 120.0))
        theta = calibrate_divergence_half_angle(0.05, 0.60, 8.82, 630.0)
        space = ChannelModel(kind="freespace", divergence_model="calibrated",
                             divergence_half_angle_rad=theta)
        space_report = find_crossing(REAL_SPS, DECOY, space, GYS_DETECTOR, (10.0, 1500.0))
        assert space_report.loss_db == pytest.approx(fiber_report.loss_db, abs=0.02)

    def test_bad_interval_rejected(self):
        with pytest.raises(QkdError):
            find_crossing(REAL_SPS, DECOY, FIBER, GYS_DETECTOR, (50.0, 10.0))


class TestSweep:
    def test_row_columns_and_count(self):
        rows = sweep({"sps": REAL_SPS, "decoy": DECOY}, FIBER, GYS_DETECTOR,
                     np.arange(0.0, 50.5, 10.0))
        assert len(rows) == 6
        assert set(rows[0]) == {"distance_km", "loss_db", "rate_sps", "rate_decoy",
                                "mu_decoy"}
        assert rows[1]["loss_db"] == pytest.approx(2.1)

    def test_dead_zone_reports_nan_mu(self):
        rows = sweep({"wcs": WCS}, FIBER, GYS_DETECTOR, [250.0])
        assert rows[0]["rate_wcs"] == 0.0
        assert math.isnan(rows[0]["mu_wcs"])


class TestValidation:
    def test_source_model(self):
        with pytest.raises(QkdError):
            SourceModel(kind="laser")
        with pytest.raises(QkdError):
            SourceModel(kind="real_sps", mean_photons=1.2)
        with pytest.raises(QkdError):
            SourceModel(kind="real_sps", g2_zero=1.5)
        with pytest.raises(QkdError):
            SourceModel(kind="wcs", mean_photons=0.0)

    def test_detector_model(self):
        with pytest.raises(QkdError):
            DetectorModel(error_correction_inefficiency=0.9)
        with pytest.raises(QkdError):
            DetectorModel(receiver_efficiency=1.2)
