"""Measurement ingestion, harmonic selection and synthetic data generation.

The ingestion path mirrors a spectrometer workflow: average repetitions,
subtract the mean of the empty-chamber baselines recorded before and after
the sample, then keep only harmonics whose amplitude clears the baseline
by a signal-to-background threshold.  The synthesis path runs the same
pipeline in reverse over dictionary columns, with controlled transfer
functions and calibrated time-domain noise, so estimator results can be
checked against known ground truth.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    Condition,
    DriveField,
    HarmonicSet,
    Spectrum,
    TimeSignal,
    WeightVector,
    extract_harmonics,
    synthesize_time,
)
from .dictionary import DictionarySet, atom_seed
from .estimator import MeasurementSet, TransferFunction

SBR_THRESHOLD = 15.0
MAX_HARMONIC = 101
RAW_FS_DEFAULT = 2_000_000.0

_MAGIC_LINE = "mnp-raw-measurement v1"
_SYNTH_SALT = 0x53594E54


class MeasurementFormatError(ValueError):
    """A raw-measurement file failed validation on load."""


@dataclass(frozen=True)
class RawMeasurement:
    """Repeated one-period recordings plus their empty-chamber baselines.

    samples and the two baseline blocks are (repetitions, n) arrays over
    one drive period; baseline repetition counts may differ from the
    measurement's.  m_fe carries the sample's iron mass (mg) as metadata.
    """

    samples: np.ndarray
    baseline_pre: np.ndarray
    baseline_post: np.ndarray
    fs: float
    fd: float
    bp: float
    eta: float
    m_fe: float = 0.0

    def __post_init__(self) -> None:
        n = TimeSignal.samples_per_period(self.fs, self.fd)
        arrays = {}
        for name in ("samples", "baseline_pre", "baseline_post"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise ValueError(f"{name} must be a (repetitions, samples) array")
            if arr.shape[1] != n:
                raise ValueError(
                    f"{name} rows have {arr.shape[1]} samples, expected {n} "
                    f"for fs={self.fs}, fd={self.fd}"
                )
            arrays[name] = arr
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def reps(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class PreprocessResult:
    """Baseline-corrected spectrum plus the harmonics that survived selection.

    selected may be empty (a sample indistinguishable from the empty
    chamber); spectrum is then None.  full_spectrum always holds the
    corrected signal over every candidate harmonic.
    """

    corrected: TimeSignal
    candidates: HarmonicSet
    full_spectrum: Spectrum
    baseline_spectrum: Spectrum
    selected: tuple[int, ...]
    spectrum: Spectrum | None


def candidate_harmonics(n: int, max_harmonic: int = MAX_HARMONIC) -> HarmonicSet:
    """Odd harmonics from 3 up to the cap, staying below the Nyquist index."""
    top = min(max_harmonic, n // 2 - 1)
    if top % 2 == 0:
        top -= 1
    if top < 3:
        raise ValueError(f"no odd harmonic fits below the Nyquist index {n // 2}")
    return HarmonicSet.odd_up_to(top)


def sbr_select(
    signal_spec: Spectrum,
    baseline_spec: Spectrum,
    threshold: float = SBR_THRESHOLD,
) -> tuple[int, ...]:
    """Harmonics whose signal-to-background ratio clears the threshold.

    A vanishing baseline bin makes the ratio infinite; the harmonic is
    kept and a warning notes the anomaly.  The result may be empty.
    """
    if signal_spec.harmonics != baseline_spec.harmonics:
        raise ValueError("signal and baseline spectra must share one harmonic set")
    if not threshold > 0.0:
        raise ValueError("threshold must be strictly positive")
    sig = np.abs(signal_spec.values)
    base = np.abs(baseline_spec.values)
    zero = base == 0.0
    if zero.any():
        dead = [int(m) for m, z in zip(signal_spec.harmonics, zero) if z]
        warnings.warn(
            f"baseline power vanishes at harmonics {dead}; "
            f"treating their ratios as infinite",
            RuntimeWarning,
            stacklevel=2,
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(zero, np.inf, sig / np.where(zero, 1.0, base))
    return tuple(
        int(m) for m, r in zip(signal_spec.harmonics, ratio) if r >= threshold
    )


def preprocess(
    raw: RawMeasurement,
    threshold: float = SBR_THRESHOLD,
    max_harmonic: int = MAX_HARMONIC,
) -> PreprocessResult:
    """Average repetitions, subtract baselines, select harmonics.

    Pre and post baselines are averaged together before subtraction; the
    whole chain is linear in (measurement - baseline).
    """
    mean_meas = raw.samples.mean(axis=0)
    base = 0.5 * (raw.baseline_pre.mean(axis=0) + raw.baseline_post.mean(axis=0))
    corrected = TimeSignal(mean_meas - base, raw.fs, raw.fd)

    candidates = candidate_harmonics(corrected.n, max_harmonic)
    full = extract_harmonics(corrected, candidates)
    base_spec = extract_harmonics(TimeSignal(base, raw.fs, raw.fd), candidates)
    selected = sbr_select(full, base_spec, threshold)

    spectrum = None
    if selected:
        hs = HarmonicSet(selected)
        pos = {m: i for i, m in enumerate(candidates)}
        spectrum = Spectrum(hs, full.values[[pos[m] for m in selected]])
    return PreprocessResult(corrected, candidates, full, base_spec, selected, spectrum)


# -- raw measurement files ------------------------------------------------


def _format_rows(arr: np.ndarray) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in arr.T)


def _write_block(path: Path, header: dict[str, object], data: np.ndarray) -> None:
    lines = [_MAGIC_LINE]
    lines += [f"{key} = {value}" for key, value in header.items()]
    lines.append("data =")
    lines.append(_format_rows(data))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def write_raw_measurement(path: str | Path, raw: RawMeasurement) -> None:
    """Write the measurement file plus its two baseline files.

    Baselines land next to the measurement as <stem>_baseline_pre.csv and
    <stem>_baseline_post.csv and are referenced by those relative names.
    """
    path = Path(path)
    pre_name = f"{path.stem}_baseline_pre.csv"
    post_name = f"{path.stem}_baseline_post.csv"
    meta: dict[str, object] = {
        "fs": repr(raw.fs),
        "fd": repr(raw.fd),
        "bp": repr(raw.bp),
        "eta": repr(raw.eta),
        "mfe": repr(raw.m_fe),
    }
    for name, block in (
        (pre_name, raw.baseline_pre),
        (post_name, raw.baseline_post),
    ):
        _write_block(
            path.with_name(name),
            {**meta, "reps": block.shape[0]},
            block,
        )
    _write_block(
        path,
        {
            **meta,
            "reps": raw.reps,
            "baseline_pre": pre_name,
            "baseline_post": post_name,
        },
        raw.samples,
    )


def _read_block(path: Path) -> tuple[dict[str, str], np.ndarray]:
    if not path.exists():
        raise MeasurementFormatError(f"missing measurement file {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != _MAGIC_LINE:
        raise MeasurementFormatError(f"{path}: not a raw measurement file")
    header: dict[str, str] = {}
    row_start = None
    for i, line in enumerate(lines[1:], start=1):
        if line.strip() == "data =":
            row_start = i + 1
            break
        if "=" not in line:
            raise MeasurementFormatError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        header[key.strip()] = value.strip()
    if row_start is None:
        raise MeasurementFormatError(f"{path}: missing data section")
    try:
        rows = [
            [float(v) for v in line.split(",")]
            for line in lines[row_start:]
            if line.strip()
        ]
        data = np.asarray(rows, dtype=np.float64)
    except ValueError as exc:
        raise MeasurementFormatError(f"{path}: unreadable sample rows: {exc}") from exc
    if data.ndim != 2:
        raise MeasurementFormatError(f"{path}: sample rows are not rectangular")
    try:
        reps = int(header["reps"])
    except (KeyError, ValueError) as exc:
        raise MeasurementFormatError(f"{path}: bad or missing reps field") from exc
    if data.shape[1] != reps:
        raise MeasurementFormatError(
            f"{path}: {data.shape[1]} repetition columns, header says {reps}"
        )
    return header, data.T


def read_raw_measurement(path: str | Path) -> RawMeasurement:
    """Read a measurement file and the baseline files it references."""
    path = Path(path)
    header, samples = _read_block(path)
    try:
        pre_name = header["baseline_pre"]
        post_name = header["baseline_post"]
    except KeyError as exc:
        raise MeasurementFormatError(f"{path}: missing baseline reference") from exc
    pre_header, pre = _read_block(path.with_name(pre_name))
    post_header, post = _read_block(path.with_name(post_name))
    for other_path, other in ((pre_name, pre_header), (post_name, post_header)):
        for key in ("fs", "fd"):
            if other.get(key) != header.get(key):
                raise MeasurementFormatError(
                    f"{path}: baseline {other_path} disagrees on {key}"
                )
    try:
        return RawMeasurement(
            samples,
            pre,
            post,
            fs=float(header["fs"]),
            fd=float(header["fd"]),
            bp=float(header["bp"]),
            eta=float(header["eta"]),
            m_fe=float(header.get("mfe", "0.0")),
        )
    except (KeyError, ValueError) as exc:
        raise MeasurementFormatError(f"{path}: invalid metadata: {exc}") from exc


# -- synthetic measurement sets -------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic measurement set.

    weights    ground-truth atom weights on the dictionary grid
    snr        peak signal over noise SD at the reference condition;
               None renders noiseless measurements
    transfer   per-drive-field transfer functions; None means unit gain
    reference  the condition whose noiseless peak calibrates the noise SD
    averages   noise-independent periods averaged into each record, the
               way pulsed acquisition averages repetitions; snr still
               refers to the per-period noise SD
    """

    weights: WeightVector
    snr: float | None = None
    transfer: tuple[TransferFunction, ...] | None = None
    seed: int = 0
    render_fs: float = RAW_FS_DEFAULT
    reference: Condition = Condition(DriveField(250.0, 10.0), 0.89)
    threshold: float = SBR_THRESHOLD
    max_harmonic: int = MAX_HARMONIC
    averages: int = 1

    def __post_init__(self) -> None:
        if self.snr is not None and not self.snr > 0.0:
            raise ValueError("snr must be strictly positive")
        if not self.render_fs > 0.0:
            raise ValueError("render_fs must be strictly positive")
        if not isinstance(self.averages, int) or self.averages < 1:
            raise ValueError("averages must be a positive integer")


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth behind a synthetic measurement set."""

    weights: WeightVector
    transfer: tuple[TransferFunction, ...]
    noise_sd: float


def _truth_transfer(
    spec: SyntheticSpec, dicts: DictionarySet
) -> tuple[TransferFunction, ...]:
    if spec.transfer is None:
        return tuple(
            TransferFunction(dicts.harmonics(k), np.ones(dicts.harmonics(k).m))
            for k in range(len(dicts.drive_fields))
        )
    if len(spec.transfer) != len(dicts.drive_fields):
        raise ValueError("need one transfer function per drive field")
    for k, tf in enumerate(spec.transfer):
        if tf.harmonics != dicts.harmonics(k):
            raise ValueError(f"transfer function {k} disagrees with dictionary harmonics")
    return tuple(spec.transfer)


def synth_generate(
    spec: SyntheticSpec, dicts: DictionarySet
) -> tuple[MeasurementSet, SynthTruth]:
    """Render noisy measurements from dictionary columns and ground truth.

    Noiseless spectra H_k (A_(k,j) x) are rendered to one period of time
    samples; white Gaussian noise with one shared standard deviation is
    added, calibrated so that (reference-condition peak)/SD equals snr,
    and averaged over `averages` independent periods.  Harmonics are then
    re-extracted and selected against a pure-noise baseline, exactly as
    the measured-data path would.
    """
    if spec.weights.grid != dicts.grid:
        raise ValueError("weights are defined on a different grid than the dictionaries")
    truth_tf = _truth_transfer(spec, dicts)
    n_k = len(dicts.drive_fields)
    n_j = len(dicts.viscosities)

    capped: list[HarmonicSet] = []
    for k in range(n_k):
        kept = tuple(m for m in dicts.harmonics(k) if m <= spec.max_harmonic)
        if not kept:
            raise ValueError(f"no dictionary harmonic usable at drive field {k}")
        capped.append(HarmonicSet(kept))

    x = spec.weights.values
    noiseless: list[list[TimeSignal]] = []
    for k, df in enumerate(dicts.drive_fields):
        row = []
        for j in range(n_j):
            d = dicts.get(k, j)
            full = Spectrum(d.hs, truth_tf[k].values * (d.columns @ x))
            pos = {m: i for i, m in enumerate(d.hs)}
            vals = full.values[[pos[m] for m in capped[k]]]
            row.append(synthesize_time(Spectrum(capped[k], vals), spec.render_fs, df.fd))
        noiseless.append(row)

    if spec.snr is None:
        spectra = tuple(
            tuple(extract_harmonics(noiseless[k][j], capped[k]) for j in range(n_j))
            for k in range(n_k)
        )
        meas = MeasurementSet(
            dicts.drive_fields, dicts.viscosities, tuple(capped), spectra
        )
        return meas, SynthTruth(spec.weights, truth_tf, 0.0)

    try:
        k_ref = dicts.drive_fields.index(spec.reference.df)
        j_ref = dicts.viscosities.index(spec.reference.eta)
    except ValueError:
        raise ValueError(
            f"reference condition {spec.reference} is not in the dictionary set"
        ) from None
    peak = float(np.abs(noiseless[k_ref][j_ref].samples).max())
    if peak == 0.0:
        raise ValueError("reference-condition signal is identically zero")
    sd = peak / spec.snr

    selected: list[set[int]] = [set() for _ in range(n_k)]
    noisy_spectra: list[list[Spectrum]] = []
    for k, df in enumerate(dicts.drive_fields):
        row = []
        for j in range(n_j):
            rng = np.random.default_rng(atom_seed(spec.seed, _SYNTH_SALT, k, j))
            sig = noiseless[k][j]
            shape = (spec.averages, sig.n)
            noise = rng.normal(0.0, sd, shape).mean(axis=0)
            base = rng.normal(0.0, sd, shape).mean(axis=0)
            noisy = TimeSignal(sig.samples + noise, sig.fs, sig.fd)
            baseline = TimeSignal(base, sig.fs, sig.fd)
            sig_spec = extract_harmonics(noisy, capped[k])
            base_spec = extract_harmonics(baseline, capped[k])
            selected[k].update(sbr_select(sig_spec, base_spec, spec.threshold))
            row.append(sig_spec)
        noisy_spectra.append(row)

    harmonics: list[HarmonicSet] = []
    spectra_rows = []
    for k in range(n_k):
        if not selected[k]:
            raise ValueError(
                f"no harmonic passed selection at drive field {k}; "
                f"the signal is below the noise floor"
            )
        hs = HarmonicSet(sorted(selected[k]))
        harmonics.append(hs)
        pos = {m: i for i, m in enumerate(capped[k])}
        rows = [pos[m] for m in hs]
        spectra_rows.append(
            tuple(Spectrum(hs, s.values[rows]) for s in noisy_spectra[k])
        )
    meas = MeasurementSet(
        dicts.drive_fields, dicts.viscosities, tuple(harmonics), tuple(spectra_rows)
    )
    return meas, SynthTruth(spec.weights, truth_tf, sd)


# -- harmonic-domain interchange ------------------------------------------


def write_measurement_csv(
    meas: MeasurementSet,
    path: str | Path,
    header_lines: Sequence[str] = (),
) -> None:
    """Write a measurement set as one CSV table of (k, j, m, Re, Im) rows.

    header_lines are emitted first; each must already be a '#' comment.
    """
    path = Path(path)
    lines = list(header_lines)
    for k, df in enumerate(meas.drive_fields):
        lines.append(f"# drive_field,{k},{float(df.fd)!r},{float(df.bp)!r}")
    for j, eta in enumerate(meas.viscosities):
        lines.append(f"# viscosity,{j},{float(eta)!r}")
    lines.append("k,j,m,re,im")
    for k in range(meas.n_drive):
        for j in range(meas.n_visc):
            spec = meas.spectra[k][j]
            for m, v in zip(spec.harmonics, spec.values):
                lines.append(f"{k},{j},{m},{float(v.real)!r},{float(v.imag)!r}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_measurement_csv(path: str | Path) -> MeasurementSet:
    """Rebuild a measurement set written by write_measurement_csv."""
    path = Path(path)
    dfs: dict[int, DriveField] = {}
    etas: dict[int, float] = {}
    cells: dict[tuple[int, int], list[tuple[int, complex]]] = {}
    lines = path.read_text(encoding="utf-8").splitlines()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line.lstrip("# ").split(",")
            if fields[0] == "drive_field":
                dfs[int(fields[1])] = DriveField(float(fields[2]), float(fields[3]))
            elif fields[0] == "viscosity":
                etas[int(fields[1])] = float(fields[2])
            continue
        if line.startswith("k,"):
            continue
        k_s, j_s, m_s, re_s, im_s = line.split(",")
        cells.setdefault((int(k_s), int(j_s)), []).append(
            (int(m_s), complex(float(re_s), float(im_s)))
        )
    if not dfs or not etas:
        raise MeasurementFormatError(f"{path}: missing drive-field or viscosity header")
    drive_fields = tuple(dfs[k] for k in sorted(dfs))
    viscosities = tuple(etas[j] for j in sorted(etas))
    harmonics = []
    spectra = []
    for k in range(len(drive_fields)):
        row = []
        hs_k = None
        for j in range(len(viscosities)):
            entries = sorted(cells.get((k, j), []))
            if not entries:
                raise MeasurementFormatError(f"{path}: no rows for pair ({k}, {j})")
            hs = HarmonicSet(m for m, _ in entries)
            if hs_k is None:
                hs_k = hs
            elif hs != hs_k:
                raise MeasurementFormatError(
                    f"{path}: harmonic sets differ across viscosities at k={k}"
                )
            row.append(Spectrum(hs, np.array([v for _, v in entries])))
        harmonics.append(hs_k)
        spectra.append(tuple(row))
    return MeasurementSet(drive_fields, viscosities, tuple(harmonics), tuple(spectra))
