"""Spectrum prediction at carrier viscosities outside the fitted set.

A joint estimate fixes particle weights x and per-drive-field transfer
functions H_k from measurements at a handful of viscosities.  Because the
viscosity enters only through the simulated dictionary columns, a
dictionary built at any further viscosity immediately yields a predicted
spectrum H_k * (A_(k,new) @ x) without touching the fit.  Leave-one-out
evaluation drops each measured viscosity in turn, refits on the rest, and
scores the prediction against the held-back measurement in the time
domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mnpdict.core import ParticleGrid, Spectrum, synthesize_time
from mnpdict.estimator import (
    EstimationResult,
    MeasurementSet,
    _check_shapes,
    joint_estimate,
)
from mnpdict.metrics import nrmse

__all__ = [
    "PredictionReport",
    "spanned",
    "fitted",
    "predict",
    "waveform_nrmse",
    "leave_one_out",
]


def spanned(dicts, meas: MeasurementSet, x: np.ndarray):
    """Dictionary span A_(k,j) @ x per condition, before any receive response."""
    _check_shapes(dicts, meas)
    x = np.asarray(x, dtype=np.float64)
    return tuple(
        tuple(
            Spectrum(meas.harmonics[k], dicts[k][j] @ x) for j in range(meas.n_visc)
        )
        for k in range(meas.n_drive)
    )


def fitted(result: EstimationResult, dicts, meas: MeasurementSet):
    """Modeled spectra H_k * (A_(k,j) @ x) at the fitted conditions."""
    _check_shapes(dicts, meas)
    x = result.weights.values
    out = []
    for k in range(meas.n_drive):
        h = result.transfer[k].values
        out.append(
            tuple(
                Spectrum(meas.harmonics[k], h * (dicts[k][j] @ x))
                for j in range(meas.n_visc)
            )
        )
    return tuple(out)


def predict(result: EstimationResult, k: int, atoms: np.ndarray) -> Spectrum:
    """Spectrum of drive field k for a dictionary at a new condition.

    atoms holds one simulated spectrum per particle type, on the harmonic
    set the transfer function of drive field k was estimated on.
    """
    if not 0 <= k < len(result.transfer):
        raise ValueError("drive-field index out of range")
    tf = result.transfer[k]
    a = np.asarray(atoms, dtype=np.complex128)
    if a.shape != (len(tf.harmonics), result.weights.values.size):
        raise ValueError(
            f"expected a {len(tf.harmonics)} x {result.weights.values.size} dictionary, got {a.shape}"
        )
    return Spectrum(tf.harmonics, tf.values * (a @ result.weights.values))


def waveform_nrmse(
    measured: Spectrum,
    predicted: Spectrum,
    fd: float,
    samples_per_period: int = 200,
) -> float:
    """Time-domain normalized RMS error of a predicted spectrum, percent.

    Both spectra are rendered over one drive period and compared sample by
    sample, normalized by the range of the measured waveform.
    """
    if measured.harmonics != predicted.harmonics:
        raise ValueError("spectra live on different harmonic sets")
    fs = samples_per_period * fd
    v = synthesize_time(measured, fs, fd).samples
    v_hat = synthesize_time(predicted, fs, fd).samples
    return nrmse(v, v_hat)


@dataclass(frozen=True)
class PredictionReport:
    """One leave-one-out fold: fit without a carrier, predict it back.

    nrmse_time[k] is the waveform error of the prediction for drive field
    k at the held-out viscosity, in percent of the measured range.
    """

    viscosity: float
    viscosity_index: int
    predicted: tuple[Spectrum, ...]
    measured: tuple[Spectrum, ...]
    nrmse_time: tuple[float, ...]
    estimation: EstimationResult


def leave_one_out(
    dicts,
    meas: MeasurementSet,
    grid: ParticleGrid,
    samples_per_period: int = 200,
    max_iter: int = 2000,
    fixed_iterations: bool = False,
) -> tuple[PredictionReport, ...]:
    """Hold out each viscosity in turn, refit, and score the prediction.

    Returns one report per viscosity, in measurement-set order.  The
    estimation inside each fold sees neither the held-out spectra nor the
    held-out dictionaries; the prediction then uses the dictionaries at
    the held-out viscosity with the fold's weights and transfer functions.
    """
    _check_shapes(dicts, meas)
    if meas.n_visc < 2:
        raise ValueError("leave-one-out needs at least two viscosities")

    reports = []
    for j_out in range(meas.n_visc):
        keep = [j for j in range(meas.n_visc) if j != j_out]
        sub = MeasurementSet(
            meas.drive_fields,
            tuple(meas.viscosities[j] for j in keep),
            meas.harmonics,
            tuple(tuple(row[j] for j in keep) for row in meas.spectra),
        )
        sub_dicts = [[dicts[k][j] for j in keep] for k in range(meas.n_drive)]
        est = joint_estimate(
            sub_dicts, sub, grid, max_iter=max_iter, fixed_iterations=fixed_iterations
        )

        predicted = []
        scores = []
        for k in range(meas.n_drive):
            pred = predict(est, k, dicts[k][j_out])
            predicted.append(pred)
            scores.append(
                waveform_nrmse(
                    meas.spectra[k][j_out],
                    pred,
                    meas.drive_fields[k].fd,
                    samples_per_period,
                )
            )
        reports.append(
            PredictionReport(
                viscosity=meas.viscosities[j_out],
                viscosity_index=j_out,
                predicted=tuple(predicted),
                measured=tuple(meas.spectra[k][j_out] for k in range(meas.n_drive)),
                nrmse_time=tuple(scores),
                estimation=est,
            )
        )
    return tuple(reports)
