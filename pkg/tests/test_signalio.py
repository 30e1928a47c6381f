"""Raw-measurement ingestion, harmonic selection and synthetic data."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnpdict.core import (
    Condition,
    DriveField,
    HarmonicSet,
    ParticleGrid,
    Spectrum,
    TimeSignal,
    WeightVector,
    extract_harmonics,
    synthesize_time,
)
from mnpdict.dictionary import build_set
from mnpdict.estimator import TransferFunction, objective
from mnpdict.magmodel import ModelKind
from mnpdict.signalio import (
    MeasurementFormatError,
    RawMeasurement,
    SyntheticSpec,
    candidate_harmonics,
    preprocess,
    read_measurement_csv,
    read_raw_measurement,
    sbr_select,
    synth_generate,
    write_measurement_csv,
    write_raw_measurement,
)

GRID = ParticleGrid((18.0, 22.0), (40.0,), (4.0, 6.0))
DFS = (DriveField(250.0, 10.0), DriveField(1000.0, 10.0))
ETAS = (0.89, 2.08)
HS = HarmonicSet.odd_up_to(9)

FS = 100_000.0
FD = 1000.0
N = 100


@pytest.fixture(scope="module")
def dicts():
    return build_set(GRID, DFS, ETAS, HS, ModelKind.LANGEVIN)


def tone(harmonic, coeff, n=N, fs=FS, fd=FD):
    t = np.arange(n)
    return np.real(coeff * np.exp(2j * np.pi * harmonic * t / n))


def spectrum_of(values):
    values = np.asarray(values, dtype=np.complex128)
    return Spectrum(HarmonicSet.odd_up_to(2 * values.shape[0] + 1), values)


class TestCandidateHarmonics:
    def test_cap_applies_when_nyquist_is_generous(self):
        assert candidate_harmonics(8000) == HarmonicSet.odd_up_to(101)

    def test_nyquist_limits_short_records(self):
        assert candidate_harmonics(16) == HarmonicSet((3, 5, 7))
        assert candidate_harmonics(8) == HarmonicSet((3,))

    def test_too_short_record_rejected(self):
        with pytest.raises(ValueError, match="Nyquist"):
            candidate_harmonics(6)


class TestSbrSelect:
    def test_threshold_splits_example_ratios(self):
        sig = spectrum_of([20.0, 14.0, 16.0])
        base = spectrum_of([1.0, 1.0, 1.0])
        assert sbr_select(sig, base, threshold=15.0) == (3, 7)

    def test_zero_baseline_bin_is_kept_with_warning(self):
        sig = spectrum_of([1e-30, 14.0, 16.0])
        base = spectrum_of([0.0, 1.0, 1.0])
        with pytest.warns(RuntimeWarning, match="vanishes at harmonics \\[3\\]"):
            kept = sbr_select(sig, base, threshold=15.0)
        assert kept == (3, 7)

    def test_mismatched_harmonics_rejected(self):
        sig = spectrum_of([1.0, 1.0])
        base = Spectrum(HarmonicSet((3, 7)), np.ones(2, dtype=complex))
        with pytest.raises(ValueError, match="share one harmonic set"):
            sbr_select(sig, base)

    def test_nonpositive_threshold_rejected(self):
        sig = spectrum_of([1.0])
        with pytest.raises(ValueError, match="threshold"):
            sbr_select(sig, sig, threshold=0.0)

    @given(
        st.lists(st.floats(0.0, 1e3), min_size=1, max_size=8),
        st.floats(1e-3, 1e3),
        st.floats(1.0, 10.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_raising_threshold_never_adds_harmonics(self, mags, thr, factor):
        sig = spectrum_of(mags)
        base = spectrum_of(np.ones(len(mags)))
        low = set(sbr_select(sig, base, threshold=thr))
        high = set(sbr_select(sig, base, threshold=thr * factor))
        assert high <= low


class TestPreprocess:
    def make_raw(self, samples, pre, post, reps=1):
        samples = np.atleast_2d(samples)
        if samples.shape[0] == 1 and reps > 1:
            samples = np.repeat(samples, reps, axis=0)
        return RawMeasurement(
            samples,
            np.atleast_2d(pre),
            np.atleast_2d(post),
            fs=FS,
            fd=FD,
            bp=10.0,
            eta=0.89,
        )

    def test_injected_tones_recovered_after_baseline_subtraction(self):
        rng = np.random.default_rng(7)
        base = 1e-6 * rng.standard_normal(N)
        c3, c7 = 0.8 - 0.3j, 0.1 + 0.45j
        meas = base + tone(3, c3) + tone(7, c7)
        raw = self.make_raw(meas, base, base, reps=3)
        res = preprocess(raw)
        assert res.selected == (3, 7)
        idx3 = res.candidates.index(3)
        idx7 = res.candidates.index(7)
        assert abs(res.full_spectrum.values[idx3] - c3) < 1e-12
        assert abs(res.full_spectrum.values[idx7] - c7) < 1e-12
        assert np.allclose(res.spectrum.values, [c3, c7], atol=1e-12)
        others = np.delete(res.full_spectrum.values, [idx3, idx7])
        assert np.abs(others).max() < 1e-12

    def test_sample_equal_to_baseline_yields_empty_selection(self):
        rng = np.random.default_rng(8)
        base = rng.standard_normal(N)
        res = preprocess(self.make_raw(base, base, base))
        assert res.selected == ()
        assert res.spectrum is None
        assert np.abs(res.full_spectrum.values).max() < 1e-14
        assert np.abs(res.corrected.samples).max() < 1e-14

    def test_repetitions_are_averaged(self):
        d = np.sin(2 * np.pi * 11 * np.arange(N) / N)
        base = np.zeros(N)
        sig = tone(3, 1.0 + 0.5j)
        raw = RawMeasurement(
            np.stack([sig + d, sig - d]),
            base[None],
            base[None],
            fs=FS,
            fd=FD,
            bp=10.0,
            eta=0.89,
        )
        with pytest.warns(RuntimeWarning, match="baseline power vanishes"):
            res = preprocess(raw)
        assert np.max(np.abs(res.corrected.samples - sig)) < 1e-14

    def test_pre_and_post_baselines_are_averaged(self):
        drift = tone(5, 0.2 - 0.1j)
        sig = tone(3, 1.0)
        raw = self.make_raw(sig + drift, 2.0 * drift, np.zeros(N))
        res = preprocess(raw)
        idx5 = res.candidates.index(5)
        assert abs(res.full_spectrum.values[idx5]) < 1e-14
        assert abs(res.full_spectrum.values[res.candidates.index(3)] - 1.0) < 1e-12

    def test_pipeline_is_linear_in_the_corrected_signal(self):
        rng = np.random.default_rng(9)
        base = rng.standard_normal(N)
        sig = rng.standard_normal(N)
        one = preprocess(self.make_raw(base + sig, base, base))
        scaled = preprocess(self.make_raw(base + 2.5 * sig, base, base))
        assert np.allclose(
            scaled.full_spectrum.values, 2.5 * one.full_spectrum.values, atol=1e-13
        )

    def test_wrong_baseline_length_rejected(self):
        with pytest.raises(ValueError, match="baseline_pre"):
            self.make_raw(np.zeros(N), np.zeros(N - 2), np.zeros(N))

    def test_ragged_repetitions_rejected(self):
        with pytest.raises(ValueError):
            RawMeasurement(
                [list(range(N)), list(range(N - 1))],
                np.zeros((1, N)),
                np.zeros((1, N)),
                fs=FS,
                fd=FD,
                bp=10.0,
                eta=0.89,
            )


class TestRawMeasurementFiles:
    def write_one(self, tmp_path, reps=2):
        rng = np.random.default_rng(11)
        raw = RawMeasurement(
            rng.standard_normal((reps, N)),
            rng.standard_normal((1, N)),
            rng.standard_normal((3, N)),
            fs=FS,
            fd=FD,
            bp=15.0,
            eta=2.08,
            m_fe=0.125,
        )
        path = tmp_path / "sample_k0_j1.csv"
        write_raw_measurement(path, raw)
        return path, raw

    def test_round_trip_is_exact(self, tmp_path):
        path, raw = self.write_one(tmp_path)
        back = read_raw_measurement(path)
        np.testing.assert_array_equal(back.samples, raw.samples)
        np.testing.assert_array_equal(back.baseline_pre, raw.baseline_pre)
        np.testing.assert_array_equal(back.baseline_post, raw.baseline_post)
        assert (back.fs, back.fd, back.bp, back.eta, back.m_fe) == (
            raw.fs,
            raw.fd,
            raw.bp,
            raw.eta,
            raw.m_fe,
        )

    def test_missing_baseline_file_is_reported(self, tmp_path):
        path, _ = self.write_one(tmp_path)
        (tmp_path / "sample_k0_j1_baseline_pre.csv").unlink()
        with pytest.raises(MeasurementFormatError, match="baseline_pre"):
            read_raw_measurement(path)

    def test_wrong_magic_line_rejected(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("something else\nfs = 1.0\n")
        with pytest.raises(MeasurementFormatError, match="not a raw measurement"):
            read_raw_measurement(path)

    def test_baseline_metadata_disagreement_rejected(self, tmp_path):
        path, _ = self.write_one(tmp_path)
        pre = tmp_path / "sample_k0_j1_baseline_pre.csv"
        pre.write_text(pre.read_text().replace("fd = 1000.0", "fd = 500.0"))
        with pytest.raises(MeasurementFormatError, match="disagrees on fd"):
            read_raw_measurement(path)

    def test_repetition_count_mismatch_rejected(self, tmp_path):
        path, _ = self.write_one(tmp_path, reps=2)
        text = path.read_text().replace("reps = 2", "reps = 3")
        path.write_text(text)
        with pytest.raises(MeasurementFormatError, match="header says 3"):
            read_raw_measurement(path)

    def test_missing_data_section_rejected(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("mnp-raw-measurement v1\nfs = 1.0\n")
        with pytest.raises(MeasurementFormatError, match="missing data section"):
            read_raw_measurement(path)

    def test_no_leftover_temp_files(self, tmp_path):
        self.write_one(tmp_path)
        assert not list(tmp_path.glob("*.tmp"))


def ramp_transfer(dicts):
    out = []
    for k in range(len(dicts.drive_fields)):
        hs = dicts.harmonics(k)
        idx = np.arange(hs.m)
        out.append(
            TransferFunction(hs, (0.8 + 0.1 * idx) * np.exp(1j * (0.2 + 0.15 * idx)))
        )
    return tuple(out)


def truth_weights():
    return WeightVector(GRID, np.array([0.6, 0.0, 0.0, 0.25]))


class TestSynthGenerate:
    def test_noiseless_spectra_match_dictionary_prediction(self, dicts):
        tf = ramp_transfer(dicts)
        meas, truth = synth_generate(
            SyntheticSpec(truth_weights(), transfer=tf), dicts
        )
        assert truth.noise_sd == 0.0
        x = truth_weights().values
        for k in range(2):
            assert meas.harmonics[k] == dicts.harmonics(k)
            for j in range(2):
                want = tf[k].values * (dicts.get(k, j).columns @ x)
                assert np.max(np.abs(meas.spectra[k][j].values - want)) < 1e-12

    def test_ground_truth_objective_vanishes_without_noise(self, dicts):
        meas, truth = synth_generate(SyntheticSpec(truth_weights()), dicts)
        val = objective(
            truth.weights.values,
            [tf.values for tf in truth.transfer],
            dicts.matrices(),
            meas,
        )
        assert val <= 1e-20

    def test_default_transfer_is_unit_gain(self, dicts):
        _, truth = synth_generate(SyntheticSpec(truth_weights()), dicts)
        for k, tf in enumerate(truth.transfer):
            assert tf.harmonics == dicts.harmonics(k)
            np.testing.assert_array_equal(tf.values, np.ones(tf.harmonics.m))

    def test_fixed_seed_reproduces_byte_identical_output(self, dicts):
        spec = SyntheticSpec(truth_weights(), snr=10.0, seed=42)
        a, _ = synth_generate(spec, dicts)
        b, _ = synth_generate(spec, dicts)
        assert a.harmonics == b.harmonics
        for k in range(2):
            for j in range(2):
                np.testing.assert_array_equal(
                    a.spectra[k][j].values, b.spectra[k][j].values
                )

    def test_different_seeds_give_different_noise(self, dicts):
        a, _ = synth_generate(SyntheticSpec(truth_weights(), snr=10.0, seed=1), dicts)
        b, _ = synth_generate(SyntheticSpec(truth_weights(), snr=10.0, seed=2), dicts)
        assert not np.array_equal(a.spectra[0][0].values, b.spectra[0][0].values)

    def test_noise_sd_is_reference_peak_over_snr(self, dicts):
        snr = 10.0
        _, truth = synth_generate(SyntheticSpec(truth_weights(), snr=snr), dicts)
        x = truth_weights().values
        ref = synthesize_time(
            Spectrum(dicts.harmonics(0), dicts.get(0, 0).columns @ x), 2e6, 250.0
        )
        assert truth.noise_sd == pytest.approx(
            np.abs(ref.samples).max() / snr, rel=1e-12
        )

    def test_missing_reference_condition_rejected(self):
        small = build_set(
            GRID, (DriveField(1000.0, 10.0),), (0.89,), HS, ModelKind.LANGEVIN
        )
        with pytest.raises(ValueError, match="reference condition"):
            synth_generate(SyntheticSpec(truth_weights(), snr=10.0), small)
        synth_generate(SyntheticSpec(truth_weights()), small)

    def test_selection_keeps_strong_harmonics_at_moderate_noise(self, dicts):
        meas, _ = synth_generate(SyntheticSpec(truth_weights(), snr=10.0, seed=5), dicts)
        for k in range(2):
            assert 3 in meas.harmonics[k]
            assert set(meas.harmonics[k]) <= set(dicts.harmonics(k))

    def test_buried_signal_fails_selection(self, dicts):
        spec = SyntheticSpec(truth_weights(), snr=1e-9, threshold=1e9)
        with pytest.raises(ValueError, match="no harmonic passed selection"):
            synth_generate(spec, dicts)

    def test_ground_truth_objective_matches_noise_power(self, dicts):
        meas, truth = synth_generate(
            SyntheticSpec(truth_weights(), snr=10.0, seed=3), dicts
        )
        restricted = dicts.restricted(meas.harmonics)
        tf = [
            truth.transfer[k].values[
                [dicts.harmonics(k).index(m) for m in meas.harmonics[k]]
            ]
            for k in range(2)
        ]
        val = objective(truth.weights.values, tf, restricted.matrices(), meas)
        expected = sum(
            meas.harmonics[k].m
            * len(ETAS)
            * 4.0
            * truth.noise_sd**2
            / (2e6 / DFS[k].fd)
            for k in range(2)
        )
        assert 0.2 * expected < val < 5.0 * expected

    def test_averaging_cuts_noise_power_by_the_average_count(self, dicts):
        spec = SyntheticSpec(truth_weights(), snr=10.0, seed=3, averages=100)
        meas, truth = synth_generate(spec, dicts)
        restricted = dicts.restricted(meas.harmonics)
        tf = [
            truth.transfer[k].values[
                [dicts.harmonics(k).index(m) for m in meas.harmonics[k]]
            ]
            for k in range(2)
        ]
        val = objective(truth.weights.values, tf, restricted.matrices(), meas)
        expected = sum(
            meas.harmonics[k].m
            * len(ETAS)
            * 4.0
            * (truth.noise_sd**2 / 100.0)
            / (2e6 / DFS[k].fd)
            for k in range(2)
        )
        assert 0.2 * expected < val < 5.0 * expected

    def test_averages_must_be_a_positive_integer(self):
        with pytest.raises(ValueError, match="averages"):
            SyntheticSpec(truth_weights(), averages=0)
        with pytest.raises(ValueError, match="averages"):
            SyntheticSpec(truth_weights(), averages=2.5)

    def test_grid_mismatch_rejected(self, dicts):
        other = ParticleGrid((18.0,), (40.0,), (4.0,))
        bad = WeightVector(other, np.array([1.0]))
        with pytest.raises(ValueError, match="different grid"):
            synth_generate(SyntheticSpec(bad), dicts)

    def test_transfer_function_shape_checked(self, dicts):
        tf = ramp_transfer(dicts)[:1]
        with pytest.raises(ValueError, match="one transfer function per drive field"):
            synth_generate(SyntheticSpec(truth_weights(), transfer=tf), dicts)
        wrong_hs = (
            TransferFunction(HarmonicSet((3, 5)), np.ones(2, dtype=complex)),
        ) * 2
        with pytest.raises(ValueError, match="disagrees with dictionary harmonics"):
            synth_generate(SyntheticSpec(truth_weights(), transfer=wrong_hs), dicts)

    def test_bad_snr_rejected(self):
        with pytest.raises(ValueError, match="snr"):
            SyntheticSpec(truth_weights(), snr=0.0)


class TestMeasurementCsv:
    def test_round_trip_is_exact(self, dicts, tmp_path):
        meas, _ = synth_generate(
            SyntheticSpec(truth_weights(), snr=10.0, seed=6), dicts
        )
        path = tmp_path / "meas.csv"
        write_measurement_csv(meas, path)
        back = read_measurement_csv(path)
        assert back.drive_fields == meas.drive_fields
        assert back.viscosities == meas.viscosities
        assert back.harmonics == meas.harmonics
        for k in range(2):
            for j in range(2):
                np.testing.assert_array_equal(
                    back.spectra[k][j].values, meas.spectra[k][j].values
                )
        assert not list(tmp_path.glob("*.tmp"))

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("k,j,m,re,im\n0,0,3,1.0,0.0\n")
        with pytest.raises(MeasurementFormatError, match="missing drive-field"):
            read_measurement_csv(path)

    def test_inconsistent_harmonics_rejected(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(
            "# drive_field,0,250.0,10.0\n"
            "# viscosity,0,0.89\n"
            "# viscosity,1,1.45\n"
            "k,j,m,re,im\n"
            "0,0,3,1.0,0.0\n"
            "0,1,5,1.0,0.0\n"
        )
        with pytest.raises(MeasurementFormatError, match="differ across viscosities"):
            read_measurement_csv(path)

    def test_missing_cell_rejected(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(
            "# drive_field,0,250.0,10.0\n"
            "# viscosity,0,0.89\n"
            "# viscosity,1,1.45\n"
            "k,j,m,re,im\n"
            "0,0,3,1.0,0.0\n"
        )
        with pytest.raises(MeasurementFormatError, match="no rows"):
            read_measurement_csv(path)
