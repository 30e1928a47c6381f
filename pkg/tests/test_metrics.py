"""Metric formulas against worked examples and distribution-distance axioms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnpdict.core import DriveField, ParticleGrid, TimeSignal, WeightVector
from mnpdict.metrics import (
    Pmf,
    joint_pmf,
    marginals,
    nrmse,
    nwd,
    tau_hat,
    vrms_hat,
    zero_crossing_time,
)


def _tone(fs, fd, harmonic, amplitude=1.0, phase=0.0):
    n = TimeSignal.samples_per_period(fs, fd)
    t = np.arange(n) / n
    return TimeSignal(amplitude * np.cos(2 * np.pi * harmonic * t + phase), fs, fd)


class TestNrmse:
    def test_identical_signals_give_zero(self):
        v = np.sin(np.linspace(0, 7, 100))
        assert nrmse(v, v) == 0.0

    def test_constant_offset(self):
        # ||c * ones||_2 = |c| * sqrt(n); range of reference is 2
        v = np.array([-1.0, 0.0, 1.0, -1.0, 1.0])
        assert nrmse(v, v + 0.04) == pytest.approx(100.0 * 0.04 / 2.0)

    def test_scaling_reference_range(self):
        v = np.array([0.0, 4.0])
        v_hat = np.array([1.0, 4.0])
        # error norm 1, sqrt(n) = sqrt(2), range 4
        assert nrmse(v, v_hat) == pytest.approx(100.0 / (np.sqrt(2.0) * 4.0))

    def test_constant_reference_rejected(self):
        with pytest.raises(ValueError):
            nrmse(np.ones(5), np.zeros(5))


class TestTauHat:
    def test_worked_example(self):
        # 250 us at 1 kHz is a quarter period
        assert tau_hat(250e-6, 1000.0) == pytest.approx(25.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            tau_hat(-1e-6, 1000.0)


class TestZeroCrossingTime:
    def test_pure_third_harmonic_is_one_sixth(self):
        sig = _tone(2e6, 250.0, 3)
        assert zero_crossing_time(sig) == pytest.approx(100.0 / 6.0, abs=0.05)

    def test_fundamental_is_half_period(self):
        sig = _tone(2e6, 1000.0, 1)
        assert zero_crossing_time(sig) == pytest.approx(50.0, abs=0.05)

    def test_shifted_peak_wraps_around(self):
        sig = _tone(2e6, 1000.0, 3, phase=2.0)
        assert zero_crossing_time(sig) == pytest.approx(100.0 / 6.0, abs=0.05)

    def test_never_crossing_signal_rejected(self):
        n = TimeSignal.samples_per_period(2e4, 1000.0)
        with pytest.raises(ValueError):
            zero_crossing_time(TimeSignal(np.ones(n) + 0.1 * np.sin(np.linspace(0, 2 * np.pi, n, endpoint=False)), 2e4, 1000.0))


class TestVrmsHat:
    def test_unit_tone_example(self):
        # rms of a unit cosine is 1/sqrt(2); fd*Bp*m = 1000 * 0.01 * 1 = 10
        sig = _tone(2e6, 1000.0, 3)
        got = vrms_hat(sig, DriveField(1000.0, 10.0), m_fe=1.0)
        assert got == pytest.approx((1.0 / np.sqrt(2.0)) / 10.0, rel=1e-9)

    def test_mass_must_be_positive(self):
        with pytest.raises(ValueError):
            vrms_hat(_tone(2e6, 1000.0, 3), DriveField(1000.0, 10.0), m_fe=0.0)


class TestNwd:
    def test_identical_pmfs_give_zero(self):
        p = np.array([0.2, 0.3, 0.5])
        assert nwd(p, p) == 0.0

    def test_opposite_endpoint_deltas_give_one(self):
        L = 7
        a = np.zeros(L)
        b = np.zeros(L)
        a[0] = 1.0
        b[-1] = 1.0
        assert nwd(a, b) == pytest.approx(1.0)

    def test_adjacent_deltas(self):
        L = 11
        a = np.zeros(L)
        b = np.zeros(L)
        a[4] = 1.0
        b[5] = 1.0
        assert nwd(a, b) == pytest.approx(1.0 / (L - 1))

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            nwd(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            nwd(np.array([0.5, 0.6]), np.array([0.5, 0.5]))

    def test_pmf_support_mismatch_rejected(self):
        a = Pmf((1.0, 2.0), np.array([0.5, 0.5]))
        b = Pmf((1.0, 3.0), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            nwd(a, b)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(min_value=2, max_value=12).flatmap(
            lambda L: st.tuples(
                st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=L, max_size=L),
                st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=L, max_size=L),
                st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=L, max_size=L),
            )
        )
    )
    def test_metric_axioms(self, abc):
        raw = []
        for lst in abc:
            arr = np.asarray(lst) + 1e-6
            raw.append(arr / arr.sum())
        a, b, c = raw
        dab = nwd(a, b)
        dba = nwd(b, a)
        assert 0.0 <= dab <= 1.0
        assert dab == pytest.approx(dba, abs=1e-12)
        # triangle inequality
        assert nwd(a, c) <= dab + nwd(b, c) + 1e-12
        # identity
        assert nwd(a, a) == 0.0


class TestMarginals:
    def _grid(self):
        return ParticleGrid((10.0, 20.0), (5.0, 15.0), (1.0, 2.0))

    def test_axis_marginals_sum_rows(self):
        grid = self._grid()
        # canonical order: (10,5,1) (10,5,2) (10,15,1) (10,15,2) (20,5,1) ...
        w = WeightVector(grid, np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]))
        m = marginals(w)
        np.testing.assert_allclose(m["dc"].p, [10.0 / 36.0, 26.0 / 36.0])
        np.testing.assert_allclose(m["k"].p, [16.0 / 36.0, 20.0 / 36.0])
        assert m["dc"].support == (10.0, 20.0)

    def test_dh_collision_accumulates(self):
        # dh values: 10+5=15, 10+15=25, 20+5=25, 20+15=35; the two 25s merge
        grid = self._grid()
        w = WeightVector(grid, np.array([1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]))
        m = marginals(w)
        assert m["dh"].support == (15.0, 25.0, 35.0)
        np.testing.assert_allclose(m["dh"].p, [2.0 / 20.0, 10.0 / 20.0, 8.0 / 20.0])

    def test_zero_weights_rejected(self):
        w = WeightVector(self._grid(), np.zeros(8))
        with pytest.raises(ValueError):
            marginals(w)

    def test_joint_pmf_preserves_canonical_order(self):
        grid = self._grid()
        x = np.arange(1.0, 9.0)
        jp = joint_pmf(WeightVector(grid, x))
        np.testing.assert_allclose(jp.p, x / x.sum())
        assert jp.support[0] == (10.0, 5.0, 1.0)
        assert jp.support[-1] == (20.0, 15.0, 2.0)
