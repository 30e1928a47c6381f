"""Harmonic-spectrum dictionaries and joint calibration for magnetic nanoparticle signals.

The package simulates the drive-field response of single-domain magnetic
nanoparticles in carriers of varying viscosity, collects the resulting odd
harmonic spectra into dictionaries, jointly estimates receive-chain transfer
functions and particle weights from measured spectra, and predicts signals
at viscosities that were never measured.
"""

from mnpdict.core import (
    Condition,
    DriveField,
    HarmonicSet,
    ParticleGrid,
    ParticleParams,
    SimConstants,
    Spectrum,
    TimeSignal,
    WeightVector,
    count_simulations,
    enumerate_grid,
    extract_harmonics,
    synthesize_time,
)
from mnpdict.dictionary import (
    Dictionary,
    DictionarySet,
    atom_seed,
    build_dictionary,
    build_set,
    load_dictionary,
    load_set,
    restrict_harmonics,
    save_dictionary,
)
from mnpdict.estimator import (
    EstimationResult,
    MeasurementSet,
    TransferFunction,
    joint_estimate,
    nnls,
    normalize_solution,
    objective,
    tf_update,
    weight_update,
)
from mnpdict.magmodel import (
    ModelKind,
    SimOptions,
    langevin,
    mnp_signal,
    simulate,
    tau_brown,
    tau_neel,
)
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
from mnpdict.predictor import (
    PredictionReport,
    fitted,
    leave_one_out,
    predict,
    waveform_nrmse,
)
from mnpdict.signalio import (
    RawMeasurement,
    SyntheticSpec,
    preprocess,
    read_measurement_csv,
    read_raw_measurement,
    sbr_select,
    synth_generate,
    write_measurement_csv,
    write_raw_measurement,
)

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "Dictionary",
    "DictionarySet",
    "DriveField",
    "EstimationResult",
    "HarmonicSet",
    "MeasurementSet",
    "ModelKind",
    "ParticleGrid",
    "ParticleParams",
    "Pmf",
    "PredictionReport",
    "RawMeasurement",
    "SimConstants",
    "SimOptions",
    "Spectrum",
    "SyntheticSpec",
    "TimeSignal",
    "TransferFunction",
    "WeightVector",
    "atom_seed",
    "build_dictionary",
    "build_set",
    "count_simulations",
    "enumerate_grid",
    "extract_harmonics",
    "fitted",
    "joint_estimate",
    "joint_pmf",
    "langevin",
    "leave_one_out",
    "load_dictionary",
    "load_set",
    "marginals",
    "mnp_signal",
    "nnls",
    "normalize_solution",
    "nrmse",
    "nwd",
    "objective",
    "predict",
    "preprocess",
    "read_measurement_csv",
    "read_raw_measurement",
    "restrict_harmonics",
    "sbr_select",
    "save_dictionary",
    "simulate",
    "synth_generate",
    "synthesize_time",
    "tau_brown",
    "tau_hat",
    "tau_neel",
    "tf_update",
    "vrms_hat",
    "waveform_nrmse",
    "weight_update",
    "write_measurement_csv",
    "write_raw_measurement",
    "zero_crossing_time",
    "__version__",
]
