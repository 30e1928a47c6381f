"""Core types, grid enumeration and the harmonic transform conventions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnpdict.core import (
    Condition,
    DriveField,
    HarmonicSet,
    ParticleGrid,
    ParticleParams,
    SimConstants,
    Spectrum,
    TimeSignal,
    count_simulations,
    enumerate_grid,
    extract_harmonics,
    synthesize_time,
)


class TestParticleParams:
    def test_hydrodynamic_diameter_is_core_plus_shell(self):
        p = ParticleParams(dc=20.0, ds=40.0, k=6.0)
        assert p.dh == 60.0

    def test_core_volume_of_20nm_sphere(self):
        # (pi/6) * (20e-9)^3, worked by hand
        p = ParticleParams(dc=20.0, ds=0.0, k=0.0)
        assert p.core_volume() == pytest.approx(4.18879e-24, rel=1e-5)

    def test_rejects_nonpositive_core(self):
        with pytest.raises(ValueError):
            ParticleParams(dc=0.0, ds=10.0, k=1.0)

    def test_rejects_negative_anisotropy(self):
        with pytest.raises(ValueError):
            ParticleParams(dc=10.0, ds=10.0, k=-1.0)


class TestGridEnumeration:
    def test_canonical_order_dc_outer_k_inner(self):
        grid = ParticleGrid((18.0, 20.0, 22.0), (20.0, 25.0), (4.0, 6.0))
        expected = [
            (18.0, 20.0, 4.0), (18.0, 20.0, 6.0), (18.0, 25.0, 4.0), (18.0, 25.0, 6.0),
            (20.0, 20.0, 4.0), (20.0, 20.0, 6.0), (20.0, 25.0, 4.0), (20.0, 25.0, 6.0),
            (22.0, 20.0, 4.0), (22.0, 20.0, 6.0), (22.0, 25.0, 4.0), (22.0, 25.0, 6.0),
        ]
        atoms = enumerate_grid(grid)
        assert [(a.dc, a.ds, a.k) for a in atoms] == expected

    def test_atom_and_index_round_trip(self):
        grid = ParticleGrid((5.0, 10.0), (15.0, 20.0, 25.0), (1.0, 2.0))
        for i, atom in enumerate(enumerate_grid(grid)):
            assert grid.atom(i) == atom
            assert grid.index_of(atom) == i

    def test_off_grid_atom_rejected(self):
        grid = ParticleGrid((5.0, 10.0), (15.0,), (1.0,))
        with pytest.raises(ValueError):
            grid.index_of(ParticleParams(7.5, 15.0, 1.0))

    def test_unsorted_axis_rejected(self):
        with pytest.raises(ValueError):
            ParticleGrid((20.0, 18.0), (20.0,), (4.0,))

    def test_duplicate_axis_value_rejected(self):
        with pytest.raises(ValueError):
            ParticleGrid((20.0, 20.0), (20.0,), (4.0,))

    def test_empty_axis_rejected(self):
        with pytest.raises(ValueError):
            ParticleGrid((), (20.0,), (4.0,))


class TestSimulationCount:
    def test_survey_sized_grid_counts(self):
        # 26 core diameters x 18 shells x 10 anisotropies, 6 drive settings,
        # 6 viscosities
        grid = ParticleGrid(
            tuple(float(d) for d in range(5, 31)),
            tuple(float(d) for d in range(15, 101, 5)),
            tuple(float(k) for k in range(1, 11)),
        )
        assert grid.n_atoms == 4680
        dfs = [DriveField(fd, bp) for fd in (250.0, 1000.0, 2000.0) for bp in (10.0, 15.0)]
        etas = (0.89, 1.45, 2.08, 3.32, 8.31, 15.33)
        assert count_simulations(grid, dfs, etas) == 168480

    def test_counts_multiply(self):
        grid = ParticleGrid((5.0, 10.0, 15.0), (15.0,), (1.0, 2.0))
        assert count_simulations(grid, [DriveField(1e3, 10.0)], [1.0, 2.0]) == 12


class TestHarmonicSet:
    def test_odd_up_to(self):
        assert tuple(HarmonicSet.odd_up_to(9)) == (3, 5, 7, 9)

    def test_rejects_fundamental(self):
        with pytest.raises(ValueError):
            HarmonicSet([1, 3])

    def test_rejects_even(self):
        with pytest.raises(ValueError):
            HarmonicSet([3, 4])

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            HarmonicSet([5, 3])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            HarmonicSet([])


def _tone(fs, fd, harmonic, amplitude=1.0, phase=0.0):
    n = TimeSignal.samples_per_period(fs, fd)
    t = np.arange(n) / n
    return TimeSignal(amplitude * np.cos(2 * np.pi * harmonic * t + phase), fs, fd)


class TestHarmonicTransform:
    def test_unit_cosine_gives_one(self):
        hs = HarmonicSet([3, 5, 7])
        spec = extract_harmonics(_tone(2e6, 1000.0, 5), hs)
        np.testing.assert_allclose(spec.values, [0.0, 1.0, 0.0], atol=1e-12)

    def test_unit_sine_gives_minus_j(self):
        hs = HarmonicSet([3])
        sig = _tone(2e6, 1000.0, 3, phase=-np.pi / 2)  # sin = cos shifted by -pi/2
        spec = extract_harmonics(sig, hs)
        np.testing.assert_allclose(spec.values, [-1j], atol=1e-12)

    def test_linearity(self):
        hs = HarmonicSet([3, 5])
        a = _tone(2e6, 1000.0, 3, amplitude=2.0)
        b = _tone(2e6, 1000.0, 5, amplitude=0.5, phase=1.0)
        both = TimeSignal(a.samples + b.samples, 2e6, 1000.0)
        got = extract_harmonics(both, hs).values
        want = extract_harmonics(a, hs).values + extract_harmonics(b, hs).values
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_out_of_band_harmonic_rejected(self):
        sig = _tone(2e4, 1000.0, 3)  # 20 samples, Nyquist index 10
        with pytest.raises(ValueError):
            extract_harmonics(sig, HarmonicSet([11]))

    def test_round_trip_from_spectrum(self):
        hs = HarmonicSet([3, 7, 9])
        spec = Spectrum(hs, np.array([1.0 - 0.5j, 0.25j, -2.0 + 0.0j]))
        sig = synthesize_time(spec, 2e6, 1000.0)
        back = extract_harmonics(sig, hs)
        np.testing.assert_allclose(back.values, spec.values, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
            min_size=1,
            max_size=8,
        ),
        st.integers(min_value=0, max_value=20),
    )
    def test_round_trip_random_spectra(self, coeffs, start):
        hs = HarmonicSet(range(3 + 2 * start, 3 + 2 * start + 2 * len(coeffs), 2))
        spec = Spectrum(hs, np.array(coeffs))
        back = extract_harmonics(synthesize_time(spec, 2e5, 1000.0), hs)
        np.testing.assert_allclose(back.values, spec.values, atol=1e-9 * (1 + np.abs(spec.values).max()))


class TestTimeSignal:
    def test_non_integer_period_rejected(self):
        with pytest.raises(ValueError):
            TimeSignal(np.zeros(3), fs=1000.0, fd=300.0)

    def test_sample_count_must_match(self):
        with pytest.raises(ValueError):
            TimeSignal(np.zeros(10), fs=2e6, fd=1000.0)


class TestSimpleTypes:
    def test_constants_positive(self):
        with pytest.raises(ValueError):
            SimConstants(ms=-1.0)

    def test_drive_field_validation(self):
        with pytest.raises(ValueError):
            DriveField(fd=0.0, bp=10.0)
        assert DriveField(250.0, 10.0).amplitude_tesla() == pytest.approx(0.01)

    def test_condition_validation(self):
        with pytest.raises(ValueError):
            Condition(DriveField(250.0, 10.0), eta=0.0)

    def test_spectrum_length_checked(self):
        with pytest.raises(ValueError):
            Spectrum(HarmonicSet([3, 5]), np.array([1.0 + 0j]))
