"""Error metrics, distribution distances and signal shape descriptors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mnpdict.core import DriveField, TimeSignal, WeightVector, enumerate_grid

__all__ = [
    "Pmf",
    "nrmse",
    "tau_hat",
    "zero_crossing_time",
    "vrms_hat",
    "nwd",
    "marginals",
    "joint_pmf",
]


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on an ordered support.

    support entries are floats for axis marginals and (dc, ds, k) tuples
    for the joint distribution over grid atoms.
    """

    support: tuple
    p: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] != len(self.support):
            raise ValueError("pmf support and probabilities disagree in length")
        if p.shape[0] < 2:
            raise ValueError("pmf needs a support of at least two points")
        if np.any(p < 0.0):
            raise ValueError("pmf probabilities must be nonnegative")
        total = p.sum()
        if not np.isclose(total, 1.0, rtol=0.0, atol=1e-8):
            raise ValueError(f"pmf probabilities sum to {total}, expected 1")
        object.__setattr__(self, "p", p)


def nrmse(v: np.ndarray, v_hat: np.ndarray) -> float:
    """Normalized root-mean-square error in percent.

        nrmse = 100 * ||v - v_hat||_2 / (sqrt(n) * (max(v) - min(v)))

    The normalization uses the range of the reference v, so a constant
    reference is rejected.
    """
    v = np.asarray(v, dtype=np.float64)
    v_hat = np.asarray(v_hat, dtype=np.float64)
    if v.shape != v_hat.shape or v.ndim != 1 or v.size == 0:
        raise ValueError("nrmse needs two equal-length one-dimensional arrays")
    span = float(v.max() - v.min())
    if span <= 0.0:
        raise ValueError("reference signal has zero range")
    return 100.0 * float(np.linalg.norm(v - v_hat)) / (np.sqrt(v.size) * span)


def tau_hat(tau: float, fd: float) -> float:
    """Relaxation time as a percentage of the drive period: 100 * tau * fd."""
    if tau < 0.0 or fd <= 0.0:
        raise ValueError("tau must be nonnegative and fd strictly positive")
    return 100.0 * tau * fd


def _crossing_left(v: np.ndarray, start: int) -> float:
    """Interpolated crossing position scanning left from sample `start`."""
    n = v.shape[0]
    for off in range(1, n // 2 + 1):
        p = (start - off) % n
        q = (p + 1) % n
        if v[p] == 0.0:
            return float(start - off)
        if v[p] * v[q] < 0.0:
            frac = v[p] / (v[p] - v[q])
            return float(start - off) + frac
    raise ValueError("no zero crossing within half a period left of the peak")


def _crossing_right(v: np.ndarray, start: int) -> float:
    n = v.shape[0]
    for off in range(0, n // 2):
        p = (start + off) % n
        q = (p + 1) % n
        if v[q] == 0.0:
            return float(start + off + 1)
        if v[p] * v[q] < 0.0:
            frac = v[p] / (v[p] - v[q])
            return float(start + off) + frac
    raise ValueError("no zero crossing within half a period right of the peak")


def zero_crossing_time(sig: TimeSignal) -> float:
    """Width of the dominant signal lobe as a percentage of the drive period.

    Finds the sample with the largest magnitude, locates the nearest zero
    crossing on each side by linear interpolation between samples (the
    signal is treated as periodic), and returns 100 * dt / T_d where dt is
    the distance between the two crossings.
    """
    v = sig.samples
    peak = int(np.argmax(np.abs(v)))
    if v[peak] == 0.0:
        raise ValueError("signal is identically zero")
    left = _crossing_left(v, peak)
    right = _crossing_right(v, peak)
    width = right - left
    if width <= 0.0:
        width += v.shape[0]
    return 100.0 * width / v.shape[0]


def vrms_hat(sig: TimeSignal, df: DriveField, m_fe: float) -> float:
    """RMS signal amplitude normalized by drive frequency, amplitude and mass.

        vrms_hat = (||v||_2 / sqrt(n)) / (fd * Bp * m_fe)

    with fd in Hz, Bp in tesla and m_fe the iron mass in grams.
    """
    if m_fe <= 0.0:
        raise ValueError("iron mass must be strictly positive")
    rms = float(np.linalg.norm(sig.samples)) / np.sqrt(sig.n)
    return rms / (df.fd * df.amplitude_tesla() * m_fe)


def nwd(p1, p2) -> float:
    """Normalized Wasserstein distance between two pmfs on a shared support.

    With cumulative sums F1 and F2 over L support points:

        nwd = ||F1 - F2||_1 / (L - 1)

    which lies in [0, 1], is 0 exactly for identical pmfs and 1 for point
    masses on the opposite ends of the support.
    """
    if isinstance(p1, Pmf) != isinstance(p2, Pmf):
        raise TypeError("compare two Pmf objects or two raw arrays, not a mix")
    if isinstance(p1, Pmf):
        if p1.support != p2.support:
            raise ValueError("pmf supports differ")
        a, b = p1.p, p2.p
    else:
        a = np.asarray(p1, dtype=np.float64)
        b = np.asarray(p2, dtype=np.float64)
        for arr in (a, b):
            if arr.ndim != 1 or arr.shape[0] < 2:
                raise ValueError("pmf arrays must be one-dimensional, length >= 2")
            if np.any(arr < 0.0) or not np.isclose(arr.sum(), 1.0, rtol=0.0, atol=1e-8):
                raise ValueError("inputs must be nonnegative and sum to 1")
        if a.shape != b.shape:
            raise ValueError("pmf lengths differ")
    f1 = np.cumsum(a)
    f2 = np.cumsum(b)
    return float(np.abs(f1 - f2).sum()) / (a.shape[0] - 1)


def _normalized(values: np.ndarray) -> np.ndarray:
    total = values.sum()
    if total <= 0.0:
        raise ValueError("weights sum to zero, no distribution to form")
    return values / total


def marginals(w: WeightVector) -> dict[str, Pmf]:
    """Axis marginals of a weight vector: core size, hydrodynamic size, anisotropy.

    The dh support is the sorted set of distinct dc + ds sums; weights of
    atoms whose dh coincide are accumulated onto the shared support point.
    """
    grid = w.grid
    x = _normalized(w.values)
    n_dc, n_ds, n_k = grid.shape
    cube = x.reshape(n_dc, n_ds, n_k)

    dc_p = cube.sum(axis=(1, 2))
    k_p = cube.sum(axis=(0, 1))

    dh_mass: dict[float, float] = {}
    by_dc_ds = cube.sum(axis=2)
    for i, dc in enumerate(grid.dc_values):
        for j, ds in enumerate(grid.ds_values):
            dh = dc + ds
            dh_mass[dh] = dh_mass.get(dh, 0.0) + float(by_dc_ds[i, j])
    dh_support = tuple(sorted(dh_mass))
    dh_p = np.array([dh_mass[d] for d in dh_support])

    return {
        "dc": Pmf(grid.dc_values, dc_p),
        "dh": Pmf(dh_support, dh_p),
        "k": Pmf(grid.k_values, k_p),
    }


def joint_pmf(w: WeightVector) -> Pmf:
    """Unit-sum weights over all grid atoms, in canonical atom order."""
    support = tuple((a.dc, a.ds, a.k) for a in enumerate_grid(w.grid))
    return Pmf(support, _normalized(w.values))
