"""Joint estimation of receive transfer functions and particle weights.

Measured odd-harmonic spectra s_(k,j), one per drive-field setting k and
carrier viscosity j, are modeled as

    s_(k,j) = H_k * (A_(k,j) @ x)

with A_(k,j) a dictionary of simulated spectra (one column per particle
type), x >= 0 shared by every condition, and H_k a diagonal transfer
function shared by all viscosities of setting k.  Minimizing

    sum_kj || H_k * (A_(k,j) @ x) - s_(k,j) ||^2

alternates two exact block updates: a closed-form least-squares solution
for each transfer-function entry and a nonnegative least-squares solve for
the weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mnpdict.core import DriveField, HarmonicSet, ParticleGrid, Spectrum, WeightVector

__all__ = [
    "MeasurementSet",
    "TransferFunction",
    "EstimationResult",
    "NnlsNonConvergence",
    "nnls",
    "kkt_violation",
    "objective",
    "tf_update",
    "weight_update",
    "joint_estimate",
    "normalize_solution",
]


@dataclass(frozen=True)
class MeasurementSet:
    """Spectra for every (drive field, viscosity) pair of a measurement run.

    spectra[k][j] holds the spectrum for drive field k and viscosity j;
    all spectra of setting k share the harmonic set harmonics[k].
    """

    drive_fields: tuple[DriveField, ...]
    viscosities: tuple[float, ...]
    harmonics: tuple[HarmonicSet, ...]
    spectra: tuple[tuple[Spectrum, ...], ...]

    def __post_init__(self) -> None:
        if not self.drive_fields:
            raise ValueError("measurement set needs at least one drive field")
        if not self.viscosities:
            raise ValueError("measurement set needs at least one viscosity")
        if any(e <= 0.0 for e in self.viscosities):
            raise ValueError("viscosities must be strictly positive")
        if len(set(self.drive_fields)) != len(self.drive_fields):
            raise ValueError("duplicate drive fields")
        if len(set(self.viscosities)) != len(self.viscosities):
            raise ValueError("duplicate viscosities")
        if len(self.harmonics) != len(self.drive_fields):
            raise ValueError("one harmonic set per drive field required")
        if len(self.spectra) != len(self.drive_fields):
            raise ValueError("one spectrum row per drive field required")
        for k, row in enumerate(self.spectra):
            if len(row) != len(self.viscosities):
                raise ValueError(f"drive field {k} has {len(row)} spectra, expected {len(self.viscosities)}")
            for spec in row:
                if spec.harmonics != self.harmonics[k]:
                    raise ValueError(f"spectrum harmonics disagree with set for drive field {k}")

    @property
    def n_drive(self) -> int:
        return len(self.drive_fields)

    @property
    def n_visc(self) -> int:
        return len(self.viscosities)


@dataclass(frozen=True)
class TransferFunction:
    """Diagonal receive-chain response on the harmonic set of one drive field."""

    harmonics: HarmonicSet
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim != 1 or vals.shape[0] != len(self.harmonics):
            raise ValueError("transfer function length disagrees with harmonic set")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class EstimationResult:
    """Outcome of the alternating estimation.

    objective_trace[i] is the objective after full iteration i; degenerate
    collects (k, harmonic) pairs whose transfer-function denominator
    vanished at least once.
    """

    weights: WeightVector
    transfer: tuple[TransferFunction, ...]
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    degenerate: tuple[tuple[int, int], ...] = ()


class NnlsNonConvergence(RuntimeError):
    """Active-set iteration cap reached; carries the best iterate found."""

    def __init__(self, message: str, x: np.ndarray):
        super().__init__(message)
        self.x = x


def _default_tol(a: np.ndarray, b: np.ndarray) -> float:
    # matrix 1-norm times vector 1-norm keeps the threshold commensurate
    # with the gradient scale a.T @ b
    return 1e-9 * float(np.abs(a).sum(axis=0).max()) * float(np.abs(b).sum())


def nnls(
    a: np.ndarray,
    b: np.ndarray,
    tol: float | None = None,
    max_iter: int | None = None,
    warm_start: np.ndarray | None = None,
):
    """Nonnegative least squares by the active-set method.

    Solves min ||a @ x - b||_2 subject to x >= 0.

    Parameters
    ----------
    a : (m, n) ndarray
    b : (m,) ndarray
    tol : float, optional
        Stationarity threshold on the negative gradient.  Defaults to
        1e-9 * ||a||_1 * ||b||_1 which tracks the natural gradient scale
        of the problem.
    max_iter : int, optional
        Cap on inner least-squares solves, default 10 * n.
    warm_start : (n,) bool ndarray, optional
        Passive-set guess, normally the support of the previous solution.

    Returns
    -------
    x : (n,) ndarray
    passive : (n,) bool ndarray
        Support of x, reusable as the next warm start.

    Raises
    ------
    NnlsNonConvergence
        If the iteration cap is reached.  The best iterate is attached.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError("need a (m, n) matrix and a length-m vector")
    m, n = a.shape
    if tol is None:
        tol = _default_tol(a, b)
    if max_iter is None:
        max_iter = 10 * n

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    inner = 0

    def solve_passive() -> np.ndarray:
        z = np.zeros(n)
        cols = np.flatnonzero(passive)
        if cols.size:
            z[cols] = np.linalg.lstsq(a[:, cols], b, rcond=None)[0]
        return z

    if warm_start is not None:
        passive = np.array(warm_start, dtype=bool).copy()
        if passive.shape != (n,):
            raise ValueError("warm start mask has the wrong length")
        # shrink the guessed support until its unconstrained solution is feasible
        while passive.any():
            inner += 1
            z = solve_passive()
            bad = passive & (z <= 0.0)
            if not bad.any():
                x = z
                break
            passive[np.flatnonzero(bad)[np.argmin(z[bad])]] = False
            if inner >= max_iter:
                raise NnlsNonConvergence("warm start reduction exceeded the iteration cap", x)

    while True:
        grad = a.T @ (b - a @ x)
        candidates = ~passive
        if not candidates.any() or grad[candidates].max() <= tol:
            return x, passive
        j = np.flatnonzero(candidates)[np.argmax(grad[candidates])]
        passive[j] = True
        while True:
            inner += 1
            if inner > max_iter:
                raise NnlsNonConvergence(f"active-set iteration cap {max_iter} reached", x)
            z = solve_passive()
            neg = passive & (z <= 0.0)
            if not neg.any():
                x = z
                break
            # step as far toward z as feasibility allows, then retire the
            # blocking variables pinned at zero
            idx = np.flatnonzero(neg)
            ratios = x[idx] / (x[idx] - z[idx])
            alpha = float(ratios.min())
            x = x + alpha * (z - x)
            x[idx[ratios <= alpha]] = 0.0
            pinned = passive & (x <= 0.0)
            x[pinned] = 0.0
            passive[pinned] = False


def kkt_violation(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    """Largest first-order optimality violation of a nonnegative solution.

    For min ||a @ x - b||^2 with x >= 0 and gradient g = a.T @ (a @ x - b),
    optimality requires g_i = 0 where x_i > 0 and g_i >= 0 where x_i = 0.
    Returns max(|g_i| over supported i, max(-g_i, 0) over zero i); a valid
    solution stays below the solver tolerance.
    """
    g = a.T @ (a @ x - b)
    sup = x > 0.0
    worst = 0.0
    if sup.any():
        worst = float(np.abs(g[sup]).max())
    if (~sup).any():
        worst = max(worst, float(np.maximum(-g[~sup], 0.0).max()))
    return worst


def _check_shapes(dicts, meas: MeasurementSet) -> int:
    if len(dicts) != meas.n_drive:
        raise ValueError("dictionary stack and measurement set disagree on drive fields")
    n = None
    for k, row in enumerate(dicts):
        if len(row) != meas.n_visc:
            raise ValueError("dictionary stack and measurement set disagree on viscosities")
        for j, a in enumerate(row):
            if a.ndim != 2 or a.shape[0] != len(meas.harmonics[k]):
                raise ValueError(f"dictionary ({k},{j}) row count disagrees with harmonic set")
            if n is None:
                n = a.shape[1]
            elif a.shape[1] != n:
                raise ValueError("dictionaries disagree on the number of atoms")
    return n


def objective(
    x: np.ndarray,
    transfer: Sequence[np.ndarray],
    dicts: Sequence[Sequence[np.ndarray]],
    meas: MeasurementSet,
) -> float:
    """Summed squared residual over every (drive field, viscosity) pair."""
    _check_shapes(dicts, meas)
    total = 0.0
    for k in range(meas.n_drive):
        h = np.asarray(transfer[k])
        for j in range(meas.n_visc):
            resid = h * (dicts[k][j] @ x) - meas.spectra[k][j].values
            total += float(np.vdot(resid, resid).real)
    return total


def tf_update(
    spanned: Sequence[Sequence[np.ndarray]],
    meas: MeasurementSet,
):
    """Exact least-squares transfer functions given spanned spectra.

    For each drive field k and harmonic m the minimizer of
    sum_j |H * spanned_(k,j)[m] - s_(k,j)[m]|^2 is

        H_k[m] = sum_j conj(spanned) * s  /  sum_j |spanned|^2

    A vanishing denominator (the spanned spectra carry nothing at that
    harmonic) yields H_k[m] = 0 and the (k, harmonic) pair is reported.

    Returns
    -------
    transfer : list of complex ndarray, one per drive field
    degenerate : tuple of (k, harmonic) pairs with vanishing denominator
    """
    transfer = []
    degenerate = []
    for k in range(meas.n_drive):
        num = np.zeros(len(meas.harmonics[k]), dtype=np.complex128)
        den = np.zeros(len(meas.harmonics[k]))
        for j in range(meas.n_visc):
            sp = spanned[k][j]
            num += np.conj(sp) * meas.spectra[k][j].values
            den += np.abs(sp) ** 2
        h = np.zeros_like(num)
        ok = den > 0.0
        h[ok] = num[ok] / den[ok]
        for m_idx in np.flatnonzero(~ok):
            degenerate.append((k, meas.harmonics[k][m_idx]))
        transfer.append(h)
    return transfer, tuple(degenerate)


def _stack_real(
    transfer: Sequence[np.ndarray],
    dicts: Sequence[Sequence[np.ndarray]],
    meas: MeasurementSet,
    n_atoms: int,
):
    rows = 2 * sum(len(meas.harmonics[k]) * meas.n_visc for k in range(meas.n_drive))
    a = np.empty((rows, n_atoms))
    b = np.empty(rows)
    at = 0
    for k in range(meas.n_drive):
        h = transfer[k][:, None]
        for j in range(meas.n_visc):
            block = h * dicts[k][j]
            mk = block.shape[0]
            a[at : at + mk] = block.real
            b[at : at + mk] = meas.spectra[k][j].values.real
            at += mk
            a[at : at + mk] = block.imag
            b[at : at + mk] = meas.spectra[k][j].values.imag
            at += mk
    return a, b


def weight_update(
    transfer: Sequence[np.ndarray],
    dicts: Sequence[Sequence[np.ndarray]],
    meas: MeasurementSet,
    warm_start: np.ndarray | None = None,
):
    """Nonnegative weight solve for fixed transfer functions.

    Stacks real and imaginary parts of H_k * A_(k,j) over every condition
    into one real system and runs the active-set solver.  The stationarity
    tolerance is recomputed from the stacked system on every call.

    Returns (x, passive) with passive the support mask for warm starting.
    """
    n_atoms = _check_shapes(dicts, meas)
    a, b = _stack_real(transfer, dicts, meas, n_atoms)
    return nnls(a, b, warm_start=warm_start)


def joint_estimate(
    dicts: Sequence[Sequence[np.ndarray]],
    meas: MeasurementSet,
    grid: ParticleGrid,
    max_iter: int = 2000,
    fixed_iterations: bool = False,
    early_stop_rel: float = 1e-12,
    early_stop_window: int = 5,
) -> EstimationResult:
    """Alternating transfer-function and weight estimation.

    Starts from uniform unit-sum weights, updates the transfer functions
    first in every iteration, then the weights, and records the objective
    after each full iteration.  Stops early once the relative objective
    decrease stays below early_stop_rel for early_stop_window consecutive
    iterations; fixed_iterations disables early stopping and always runs
    max_iter iterations.

    The weight solve is warm started from the previous support.  A
    candidate iterate is kept only if it does not increase the objective;
    otherwise the incumbent carries over unchanged, so the recorded trace
    is non-increasing by construction even at the numerical floor.
    """
    n_atoms = _check_shapes(dicts, meas)
    if grid.n_atoms != n_atoms:
        raise ValueError("grid size disagrees with dictionary columns")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    x = np.full(n_atoms, 1.0 / n_atoms)
    passive = None
    transfer = [np.ones(len(meas.harmonics[k]), dtype=np.complex128) for k in range(meas.n_drive)]
    f_cur = np.inf
    degenerate: set[tuple[int, int]] = set()
    trace: list[float] = []
    flat_run = 0
    converged = False
    iterations = 0

    for it in range(max_iter):
        spanned = [[dicts[k][j] @ x for j in range(meas.n_visc)] for k in range(meas.n_drive)]
        transfer_cand, degen = tf_update(spanned, meas)
        degenerate.update(degen)

        x_cand, passive_cand = weight_update(transfer_cand, dicts, meas, warm_start=passive)
        f_half = objective(x, transfer_cand, dicts, meas)
        f_full = objective(x_cand, transfer_cand, dicts, meas)
        # both block updates decrease the objective in exact arithmetic;
        # near the floor rounding can flip that, so keep the incumbent
        # whenever the candidate is no better
        if f_full <= min(f_cur, f_half):
            x, passive, transfer, f_cur = x_cand, passive_cand, transfer_cand, f_full
        elif f_half <= f_cur:
            transfer, f_cur = transfer_cand, f_half

        trace.append(f_cur)
        iterations = it + 1

        if len(trace) >= 2 and trace[-2] - trace[-1] < early_stop_rel * max(trace[-2], 1e-300):
            flat_run += 1
        else:
            flat_run = 0
        if not fixed_iterations and flat_run >= early_stop_window:
            converged = True
            break

    if degenerate:
        warnings.warn(
            f"{len(degenerate)} harmonic(s) had vanishing spanned power; "
            "their transfer-function entries were set to zero",
            RuntimeWarning,
            stacklevel=2,
        )

    tfs = tuple(
        TransferFunction(meas.harmonics[k], transfer[k]) for k in range(meas.n_drive)
    )
    return EstimationResult(
        weights=WeightVector(grid, x),
        transfer=tfs,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
        degenerate=tuple(sorted(degenerate)),
    )


def normalize_solution(result: EstimationResult, ref_k: int = 0) -> EstimationResult:
    """Rescale a solution so the reference third harmonic has unit gain.

    Divides every transfer function by alpha = |H_ref(3 f_ref)| and
    multiplies the weights by alpha; the modeled spectra H * (A @ x) are
    unchanged.
    """
    if not 0 <= ref_k < len(result.transfer):
        raise ValueError("reference drive-field index out of range")
    ref = result.transfer[ref_k]
    try:
        idx = ref.harmonics.index(3)
    except ValueError as exc:
        raise ValueError("reference transfer function does not cover harmonic 3") from exc
    alpha = float(np.abs(ref.values[idx]))
    if alpha == 0.0:
        raise ValueError("reference third-harmonic gain is zero, cannot normalize")
    tfs = tuple(
        TransferFunction(tf.harmonics, tf.values / alpha) for tf in result.transfer
    )
    return EstimationResult(
        weights=WeightVector(result.weights.grid, result.weights.values * alpha),
        transfer=tfs,
        objective_trace=result.objective_trace,
        iterations=result.iterations,
        converged=result.converged,
        degenerate=result.degenerate,
    )
