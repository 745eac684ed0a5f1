import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from donor_readout.observables import (
    DegenerateDataError,
    calibrate_auger,
    depletion_to_modulation,
    fit_saturation,
    modulation,
    saturation_model,
    saturation_to_depletion,
    temperature_scale,
    thermal_rise,
)

signal = st.floats(0.0, 1e6)
positive = st.floats(1e-6, 1e6)


class TestModulation:
    def test_examples(self):
        assert modulation(5, 5) == 0
        assert modulation(1, 0) == 200
        assert modulation(1, 0.7391) == pytest.approx(30.0, abs=0.01)

    def test_both_zero(self):
        with pytest.raises(ValueError):
            modulation(0, 0)

    def test_negative(self):
        with pytest.raises(ValueError):
            modulation(-1, 1)

    @given(signal, positive)
    def test_antisymmetric(self, a, b):
        assert modulation(a, b) == -modulation(b, a)

    @given(positive, positive, st.floats(1e-3, 1e3))
    def test_scale_invariant(self, a, b, k):
        assert modulation(k * a, k * b) == pytest.approx(modulation(a, b), abs=1e-9)

    @given(signal, positive)
    def test_range(self, a, b):
        assert -200 <= modulation(a, b) <= 200

    @given(st.floats(0.0, 1.9), st.floats(0.1, 100.0), st.floats(0.0, 500.0))
    def test_depletion_mapping_exact(self, a_pct, i0, i):
        """Modulation of a saturating depletion curve is itself a saturation curve."""
        d_max, i_d = saturation_to_depletion(a_pct * 100, i0)
        d = d_max * (i / i_d) / (1 + i / i_d)
        assert depletion_to_modulation(d) == pytest.approx(
            saturation_model(i, a_pct * 100, i0), rel=1e-9, abs=1e-12)


class TestSaturationModel:
    def test_examples(self):
        assert saturation_model(0.0, 31, 13.7) == 0.0
        assert saturation_model(13.7, 31, 13.7) == pytest.approx(15.5)
        assert saturation_model(5.0, 31, 5.0) == pytest.approx(15.5)

    def test_array(self):
        out = saturation_model(np.array([0.0, 13.7]), 31, 13.7)
        assert out == pytest.approx([0.0, 15.5])

    def test_rejects(self):
        with pytest.raises(ValueError):
            saturation_model(1.0, 31, 0.0)
        with pytest.raises(ValueError):
            saturation_model(-1.0, 31, 1.0)

    @given(st.floats(0.0, 1e8), st.floats(0.1, 200), st.floats(0.1, 100))
    def test_below_asymptote(self, i, a, i0):
        assert saturation_model(i, a, i0) < a

    def test_monotone_concave(self):
        y = saturation_model(np.linspace(0, 200, 2001), 31, 13.7)
        assert np.all(np.diff(y) > 0)
        assert np.all(np.diff(y, 2) < 0)


class TestFit:
    def test_exact_recovery(self):
        pts = [(i, saturation_model(i, 31, 13.7)) for i in (1, 2, 5, 10, 20, 50)]
        fit = fit_saturation(pts)
        assert fit.converged
        assert fit.A == pytest.approx(31, abs=1e-6)
        assert fit.I0 == pytest.approx(13.7, abs=1e-6)
        assert fit.rss < 1e-15 * len(pts)

    def test_all_zero_modulation(self):
        fit = fit_saturation([(1, 0), (2, 0), (3, 0)])
        assert fit.degenerate and fit.A == 0 and fit.rss == 0

    def test_all_zero_intensity(self):
        with pytest.raises(DegenerateDataError):
            fit_saturation([(0, 1), (0, 2), (0, 3)])

    def test_bad_input(self):
        with pytest.raises(ValueError):
            fit_saturation([(1, 1), (2, 2)])
        with pytest.raises(ValueError):
            fit_saturation([(1, 1), (1, 2), (2, 3)])

    def test_non_convergence_flagged(self):
        pts = [(i, saturation_model(i, 31, 13.7)) for i in (1, 2, 5, 10, 20, 50)]
        fit = fit_saturation(pts, max_iter=1)
        assert not fit.converged
        assert fit.iterations == 1

    def test_serialization_fields(self):
        d = fit_saturation([(1, 1), (2, 1.5), (4, 2)]).to_dict()
        assert {"A", "I0", "rss", "iterations", "converged"} <= set(d)

    @settings(max_examples=50)
    @given(st.floats(1.0, 150.0), st.floats(0.5, 50.0))
    def test_self_consistency(self, a, i0):
        xs = np.array([0.0, 1, 2, 5, 10, 20, 50, 100])
        pts = list(zip(xs, saturation_model(xs, a, i0)))
        fit = fit_saturation(pts)
        assert fit.rss < 1e-15 * len(pts)
        assert fit.A == pytest.approx(a, rel=1e-6)
        assert fit.I0 == pytest.approx(i0, rel=1e-6)

    def test_noise_robustness(self):
        """Noisy fits agree with an independent solver and are unbiased on average.

        With sigma = 0.5 at these intensities the spread of a single I0
        estimate is about 9%, so the 10% band is applied to the ensemble mean.
        """
        from scipy.optimize import curve_fit

        xs = np.array([1, 2, 5, 10, 20, 50], dtype=float)
        clean = saturation_model(xs, 31, 13.7)
        fits = []
        for seed in range(100):
            y = clean + np.random.default_rng(seed).normal(0, 0.5, xs.size)
            fit = fit_saturation(list(zip(xs, y)))
            ref, _ = curve_fit(lambda x, a, i0: a * x / (i0 + x), xs, y, p0=(31, 13.7))
            assert fit.converged
            assert [fit.A, fit.I0] == pytest.approx(ref, rel=1e-5)
            assert fit.A == pytest.approx(31, rel=0.1)
            fits.append((fit.A, fit.I0))
        a_mean, i0_mean = np.mean(fits, axis=0)
        assert a_mean == pytest.approx(31, rel=0.1)
        assert i0_mean == pytest.approx(13.7, rel=0.1)


class TestTemperature:
    def test_anchors(self):
        assert temperature_scale(5) == 1.0
        assert abs(temperature_scale(15) - 1 / 7) < 1e-12
        assert abs(temperature_scale(20) - 0.1) < 1e-12

    def test_clamp_and_floor(self):
        assert temperature_scale(1.0) == 1.0
        assert temperature_scale(100.0) == 0.0
        slope = (0.1 - 1 / 7) / 5
        assert temperature_scale(25.0) == pytest.approx(0.1 + 5 * slope)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            temperature_scale(0.0)

    @given(st.floats(0.01, 100), st.floats(0.01, 100))
    def test_nonincreasing(self, t1, t2):
        lo, hi = sorted((t1, t2))
        assert temperature_scale(lo) >= temperature_scale(hi)


class TestThermal:
    def test_zero_power(self):
        assert thermal_rise(0.0, 1e-4, 1e-5, 0.05) == 0.0

    def test_fixture(self):
        assert thermal_rise(1e-3, 1e-4, 1e-5, 0.05) == pytest.approx(0.2)

    @given(st.floats(1e-9, 1.0), st.floats(1e-9, 1.0))
    def test_linear(self, p, tau):
        assert thermal_rise(2 * p, tau, 1e-5, 0.05) == pytest.approx(2 * thermal_rise(p, tau, 1e-5, 0.05))
        assert thermal_rise(p, 2 * tau, 1e-5, 0.05) == pytest.approx(2 * thermal_rise(p, tau, 1e-5, 0.05))

    @pytest.mark.parametrize("args", [(1, 1, 0, 1), (1, 1, 1, 0), (-1, 1, 1, 1), (1, 0, 1, 1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            thermal_rise(*args)


class TestAuger:
    def test_examples(self):
        assert calibrate_auger(133) == pytest.approx(7.46e-3, abs=5e-6)
        assert calibrate_auger(1) == 0.5
        assert calibrate_auger(1250) == pytest.approx(7.99e-4, abs=5e-7)

    @pytest.mark.parametrize("r", [0.0, -1.0, math.inf])
    def test_rejects(self, r):
        with pytest.raises(ValueError):
            calibrate_auger(r)
