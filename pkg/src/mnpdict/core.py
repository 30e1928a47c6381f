"""Shared types and spectral primitives for harmonic-dictionary work.

Conventions used throughout the package
---------------------------------------
Drive field:      B(t) = Bp * sin(2*pi*fd*t) along the z axis.
Harmonics:        a harmonic index m refers to the frequency m*fd.  Only odd
                  indices >= 3 ever appear in dictionaries and measurements;
                  the fundamental is excluded because it is dominated by
                  direct feedthrough in practice.
DFT coefficient:  for a signal sampled on one period (n = fs/fd samples),
                  the coefficient at harmonic m is

                      c_m = (2/n) * sum_t sig[t] * exp(-2j*pi*m*t/n)

                  so a unit-amplitude cosine at harmonic m gives c_m = 1+0j
                  and a unit sine gives c_m = -1j.
Units:            particle sizes in nm, anisotropy in kJ/m^3, drive amplitude
                  in mT, viscosity in mPa*s.  Values are stored as given and
                  converted to SI exactly once, at simulation entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "SimConstants",
    "ParticleParams",
    "ParticleGrid",
    "DriveField",
    "Condition",
    "HarmonicSet",
    "Spectrum",
    "TimeSignal",
    "WeightVector",
    "enumerate_grid",
    "count_simulations",
    "extract_harmonics",
    "synthesize_time",
]


@dataclass(frozen=True)
class SimConstants:
    """Physical constants shared by every simulation.

    ms          saturation magnetization of the core material (A/m)
    temperature sample temperature (K)
    alpha       dimensionless damping of the internal magnetization dynamics
    gamma       gyromagnetic ratio (rad/(s*T))
    kb          Boltzmann constant (J/K)
    mu0         vacuum permeability (T*m/A)
    """

    ms: float = 360e3
    temperature: float = 298.5
    alpha: float = 0.1
    gamma: float = 1.75e11
    kb: float = 1.380649e-23
    mu0: float = 4e-7 * math.pi

    def __post_init__(self) -> None:
        for name in ("ms", "temperature", "alpha", "gamma", "kb", "mu0"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"SimConstants.{name} must be strictly positive")


@dataclass(frozen=True, order=True)
class ParticleParams:
    """One particle type: core diameter, shell thickness, anisotropy.

    dc  core diameter (nm)
    ds  shell thickness (nm); hydrodynamic diameter is dc + ds
    k   uniaxial anisotropy constant (kJ/m^3), may be zero
    """

    dc: float
    ds: float
    k: float

    def __post_init__(self) -> None:
        if not self.dc > 0.0:
            raise ValueError("core diameter must be strictly positive")
        if self.ds < 0.0:
            raise ValueError("shell thickness must be nonnegative")
        if self.k < 0.0:
            raise ValueError("anisotropy constant must be nonnegative")

    @property
    def dh(self) -> float:
        """Hydrodynamic diameter (nm)."""
        return self.dc + self.ds

    def core_volume(self) -> float:
        """Magnetic core volume (m^3)."""
        return math.pi * (self.dc * 1e-9) ** 3 / 6.0

    def hydro_volume(self) -> float:
        """Hydrodynamic volume (m^3)."""
        return math.pi * (self.dh * 1e-9) ** 3 / 6.0


def _validated_axis(name: str, values: Iterable[float], positive: bool) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError(f"grid axis {name} must be non-empty")
    if positive and any(v <= 0.0 for v in vals):
        raise ValueError(f"grid axis {name} must be strictly positive")
    if not positive and any(v < 0.0 for v in vals):
        raise ValueError(f"grid axis {name} must be nonnegative")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"grid axis {name} must be strictly increasing")
    return vals


@dataclass(frozen=True)
class ParticleGrid:
    """Cartesian particle grid with canonical atom order.

    Atoms are enumerated with dc outermost, ds in the middle and k
    innermost, so the flat atom index is

        index = (i_dc * len(ds_values) + i_ds) * len(k_values) + i_k

    Every dictionary column, weight vector and marginal in this package
    relies on that order.
    """

    dc_values: tuple[float, ...]
    ds_values: tuple[float, ...]
    k_values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dc_values", _validated_axis("dc", self.dc_values, True))
        object.__setattr__(self, "ds_values", _validated_axis("ds", self.ds_values, True))
        object.__setattr__(self, "k_values", _validated_axis("k", self.k_values, False))

    @property
    def n_atoms(self) -> int:
        return len(self.dc_values) * len(self.ds_values) * len(self.k_values)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.dc_values), len(self.ds_values), len(self.k_values))

    def atom(self, index: int) -> ParticleParams:
        """Particle parameters for a flat atom index."""
        n_ds, n_k = len(self.ds_values), len(self.k_values)
        if not 0 <= index < self.n_atoms:
            raise IndexError(f"atom index {index} out of range for {self.n_atoms} atoms")
        i_dc, rest = divmod(index, n_ds * n_k)
        i_ds, i_k = divmod(rest, n_k)
        return ParticleParams(self.dc_values[i_dc], self.ds_values[i_ds], self.k_values[i_k])

    def index_of(self, p: ParticleParams) -> int:
        """Flat atom index of a particle that lies on the grid."""
        try:
            i_dc = self.dc_values.index(p.dc)
            i_ds = self.ds_values.index(p.ds)
            i_k = self.k_values.index(p.k)
        except ValueError as exc:
            raise ValueError(f"particle {p} is not a grid atom") from exc
        return (i_dc * len(self.ds_values) + i_ds) * len(self.k_values) + i_k


def enumerate_grid(grid: ParticleGrid) -> tuple[ParticleParams, ...]:
    """All grid atoms in canonical order (dc outermost, k innermost)."""
    return tuple(
        ParticleParams(dc, ds, k)
        for dc in grid.dc_values
        for ds in grid.ds_values
        for k in grid.k_values
    )


@dataclass(frozen=True, order=True)
class DriveField:
    """One drive-field setting: frequency fd (Hz) and amplitude bp (mT)."""

    fd: float
    bp: float

    def __post_init__(self) -> None:
        if not self.fd > 0.0:
            raise ValueError("drive frequency must be strictly positive")
        if not self.bp > 0.0:
            raise ValueError("drive amplitude must be strictly positive")

    @property
    def period(self) -> float:
        return 1.0 / self.fd

    def amplitude_tesla(self) -> float:
        return self.bp * 1e-3


@dataclass(frozen=True, order=True)
class Condition:
    """A measurement condition: drive field plus carrier viscosity (mPa*s)."""

    df: DriveField
    eta: float

    def __post_init__(self) -> None:
        if not self.eta > 0.0:
            raise ValueError("viscosity must be strictly positive")


class HarmonicSet(tuple):
    """Strictly increasing odd harmonic indices, all >= 3."""

    def __new__(cls, harmonics: Iterable[int]) -> "HarmonicSet":
        vals = tuple(int(m) for m in harmonics)
        if not vals:
            raise ValueError("harmonic set must be non-empty")
        for m in vals:
            if m < 3 or m % 2 == 0:
                raise ValueError(f"harmonic {m} is not an odd index >= 3")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("harmonic indices must be strictly increasing")
        return super().__new__(cls, vals)

    @classmethod
    def odd_up_to(cls, max_harmonic: int) -> "HarmonicSet":
        """Every odd harmonic from 3 up to and including max_harmonic."""
        if max_harmonic < 3:
            raise ValueError("max_harmonic must be at least 3")
        return cls(range(3, max_harmonic + 1, 2))

    @property
    def m(self) -> int:
        """Number of harmonics."""
        return len(self)


@dataclass(frozen=True)
class Spectrum:
    """Complex coefficients on a harmonic set, in the package DFT convention."""

    harmonics: HarmonicSet
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim != 1 or vals.shape[0] != len(self.harmonics):
            raise ValueError(
                f"spectrum has {vals.shape} values for {len(self.harmonics)} harmonics"
            )
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class TimeSignal:
    """Real samples covering exactly one drive period.

    fs  sample rate (S/s); fs/fd must be an even integer
    fd  drive frequency (Hz)
    """

    samples: np.ndarray
    fs: float
    fd: float

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("time signal must be one-dimensional")
        n = self.samples_per_period(self.fs, self.fd)
        if samples.shape[0] != n:
            raise ValueError(
                f"expected {n} samples for fs={self.fs}, fd={self.fd}, got {samples.shape[0]}"
            )
        object.__setattr__(self, "samples", samples)

    @staticmethod
    def samples_per_period(fs: float, fd: float) -> int:
        n = fs / fd
        n_int = int(round(n))
        if abs(n - n_int) > 1e-9 * n or n_int < 2 or n_int % 2:
            raise ValueError(f"fs/fd must be an even integer, got {n}")
        return n_int

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def times(self) -> np.ndarray:
        return np.arange(self.n) / self.fs


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative atom weights over a particle grid, canonical order."""

    grid: ParticleGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.shape[0] != self.grid.n_atoms:
            raise ValueError(
                f"weight vector has {vals.shape} entries for {self.grid.n_atoms} atoms"
            )
        if np.any(vals < 0.0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "values", vals)

    def total(self) -> float:
        return float(self.values.sum())


def count_simulations(
    grid: ParticleGrid,
    drive_fields: Iterable[DriveField],
    viscosities: Iterable[float],
) -> int:
    """Number of (atom, drive field, viscosity) simulations for a full build.

    Purely combinatorial; no simulation is run.
    """
    n_df = len(tuple(drive_fields))
    n_eta = len(tuple(viscosities))
    if n_df == 0 or n_eta == 0:
        raise ValueError("need at least one drive field and one viscosity")
    return grid.n_atoms * n_df * n_eta


def extract_harmonics(sig: TimeSignal, harmonics: HarmonicSet) -> Spectrum:
    """Complex harmonic coefficients of a one-period signal.

    Parameters
    ----------
    sig : TimeSignal
        Samples of exactly one drive period.
    harmonics : HarmonicSet
        Harmonic indices to extract.  Every index must lie strictly below
        the Nyquist index n/2.

    Returns
    -------
    Spectrum
        Coefficients c_m = (2/n) * sum_t sig[t] exp(-2j*pi*m*t/n).
    """
    n = sig.n
    top = harmonics[-1]
    if top >= n // 2:
        raise ValueError(
            f"harmonic {top} is not below the Nyquist index {n // 2} at fs={sig.fs}"
        )
    bins = np.fft.rfft(sig.samples)
    idx = np.asarray(harmonics, dtype=np.intp)
    return Spectrum(harmonics, (2.0 / n) * bins[idx])


def synthesize_time(spec: Spectrum, fs: float, fd: float) -> TimeSignal:
    """Render a harmonic spectrum back to one period of time samples.

    Inverse of :func:`extract_harmonics` on its harmonic support:

        sig[t] = sum_m Re( c_m * exp(+2j*pi*m*t/n) )
    """
    n = TimeSignal.samples_per_period(fs, fd)
    if spec.harmonics[-1] >= n // 2:
        raise ValueError(
            f"harmonic {spec.harmonics[-1]} is not below the Nyquist index {n // 2}"
        )
    bins = np.zeros(n // 2 + 1, dtype=np.complex128)
    idx = np.asarray(spec.harmonics, dtype=np.intp)
    bins[idx] = spec.values * (n / 2.0)
    return TimeSignal(np.fft.irfft(bins, n=n), fs, fd)
