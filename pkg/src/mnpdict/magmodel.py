"""Stochastic magnetization models for single-core particles in a drive field.

Each particle carries a unit moment direction m and a unit easy axis n.
The energy per particle is

    E = -Ms*Vc * (m . B)  -  K*Vc * (m . n)^2

The easy axis rotates against viscous friction zeta = 6*eta*Vh with
rotational diffusion D_r = kB*T / zeta, integrated by a stochastic Heun
scheme on the unit sphere.  The moment relaxes orders of magnitude faster
than both the axis motion and the drive period for every particle type
handled here, so it is drawn from its conditional Boltzmann distribution

    rho(m | n, B)  ~  exp( xi * m.bhat + sigma * (m.n)^2 )

with xi = Ms*Vc*|B|/(kB*T) and sigma = K*Vc/(kB*T), using an exact
Metropolis-Hastings step.  Above sigma = 3 the two anisotropy wells are
tracked explicitly: a per-particle well label follows Arrhenius switching
rates with time constant tau0 * exp(barrier), and the draw is confined to
the labeled well, which preserves the slow (Neel) switching dynamics that
the conditional distribution alone would erase.

Available models
----------------
langevin  equilibrium response Ms * L(xi), no dynamics at all
brown     moment rigidly attached to the axis, Zeeman torque only
blocked   easy axis frozen in place, moment thermally distributed
coupled   axis rotation and thermal moment, anisotropy torque on the axis
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from mnpdict.core import Condition, ParticleParams, SimConstants, TimeSignal

__all__ = [
    "ModelKind",
    "SimOptions",
    "Ensemble",
    "langevin",
    "tau_brown",
    "tau_neel",
    "anisotropy_ratio",
    "field_ratio",
    "simulate",
    "mnp_signal",
]

DEFAULT_CONSTANTS = SimConstants()

# moments are sampled per well once the barrier exceeds this many kB*T;
# below it the wells exchange fast enough to draw from the full conditional
SIGMA_SPLIT = 3.0

# Arrhenius attempt time (s) for well switching
TAU0 = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)  # mapped onto [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

_I0_SMALL = (1.0, 3.5156229, 3.0899424, 1.2067492, 0.2659732, 0.0360768, 0.0045813)
_I0_LARGE = (
    0.39894228, 0.01328592, 0.00225319, -0.00157565, 0.00916281,
    -0.02057706, 0.02635537, -0.01647633, 0.00392377,
)


def _log_i0(x: np.ndarray) -> np.ndarray:
    """log of the modified Bessel function I0 for x >= 0.

    Abramowitz-Stegun polynomial fits, good to ~2e-7; much faster than
    np.i0 followed by log and safe for arguments where I0 overflows.
    """
    x = np.asarray(x)
    t = (x / 3.75) ** 2
    small = np.polynomial.polynomial.polyval(t, _I0_SMALL)
    xl = np.maximum(x, 3.75)
    u = 3.75 / xl
    large = xl - 0.5 * np.log(xl) + np.log(np.polynomial.polynomial.polyval(u, _I0_LARGE))
    return np.where(x < 3.75, np.log(small), large)


class ModelKind(Enum):
    """Which pieces of the particle dynamics are active."""

    LANGEVIN = "langevin"
    BROWN = "brown"
    BLOCKED = "blocked"
    COUPLED = "coupled"


@dataclass(frozen=True)
class SimOptions:
    """Knobs for one simulation run.

    ensemble_size     particles simulated in parallel
    dt                axis integrator step (s); None picks the largest step
                      allowed by the stability bound
    seed              RNG seed; equal seeds give bitwise equal output
    periods_total     drive periods simulated
    periods_discarded leading periods dropped as transient
    fs                output sample rate (S/s); fs/fd must be an even
                      integer; None picks 512 samples per drive period
    aligned_init      start easy axes along +z instead of isotropically
    zero_temperature  disable all thermal noise (deterministic limit)
    """

    ensemble_size: int = 1000
    dt: float | None = None
    seed: int = 0
    periods_total: int = 3
    periods_discarded: int = 2
    fs: float | None = None
    aligned_init: bool = False
    zero_temperature: bool = False

    def __post_init__(self) -> None:
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be at least 1")
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError("dt must be strictly positive")
        if self.periods_total < 1:
            raise ValueError("periods_total must be at least 1")
        if not 0 <= self.periods_discarded < self.periods_total:
            raise ValueError("periods_discarded must leave at least one period")
        if self.fs is not None and not self.fs > 0.0:
            raise ValueError("fs must be strictly positive")


def langevin(xi):
    """Langevin function L(xi) = coth(xi) - 1/xi, elementwise.

    Odd in xi, saturates at +-1; the small-argument series is used below
    |xi| = 1e-4 where the closed form loses digits.
    """
    xi = np.asarray(xi, dtype=np.float64)
    small = np.abs(xi) < 1e-4
    safe = np.where(small, 1.0, xi)
    out = np.where(small, xi / 3.0 - xi**3 / 45.0, 1.0 / np.tanh(safe) - 1.0 / safe)
    if out.ndim == 0:
        return float(out)
    return out


def tau_brown(p: ParticleParams, eta: float, constants: SimConstants = DEFAULT_CONSTANTS) -> float:
    """Brownian rotation time 3*eta*Vh/(kB*T) in seconds; eta in mPa*s."""
    if not eta > 0.0:
        raise ValueError("viscosity must be strictly positive")
    return 3.0 * eta * 1e-3 * p.hydro_volume() / (constants.kb * constants.temperature)


def anisotropy_ratio(p: ParticleParams, constants: SimConstants = DEFAULT_CONSTANTS) -> float:
    """Anisotropy barrier over thermal energy, sigma = K*Vc/(kB*T)."""
    return p.k * 1e3 * p.core_volume() / (constants.kb * constants.temperature)


def field_ratio(p: ParticleParams, b_mt: float, constants: SimConstants = DEFAULT_CONSTANTS) -> float:
    """Zeeman over thermal energy, xi = Ms*Vc*B/(kB*T); field in mT."""
    return (
        constants.ms * p.core_volume() * b_mt * 1e-3 / (constants.kb * constants.temperature)
    )


def tau_neel(
    p: ParticleParams,
    constants: SimConstants = DEFAULT_CONSTANTS,
    tau0: float = TAU0,
) -> float:
    """Zero-field Neel switching time tau0 * exp(sigma) in seconds."""
    return tau0 * math.exp(anisotropy_ratio(p, constants))


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.sqrt((v * v).sum(axis=1))[:, None]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _isotropic(rng: np.random.Generator, count: int) -> np.ndarray:
    v = rng.normal(size=(count, 3))
    return _normalize(v)


class Ensemble:
    """Mutable particle ensemble advanced step by step.

    Holds unit moment directions m and easy axes n as (E, 3) arrays plus a
    per-particle well label for the split-well regime.  simulate() drives
    this over a sine field; tests drive it directly with static fields.
    """

    def __init__(
        self,
        p: ParticleParams,
        eta: float,
        model: ModelKind,
        opts: SimOptions,
        constants: SimConstants = DEFAULT_CONSTANTS,
    ):
        if model is ModelKind.LANGEVIN:
            raise ValueError("the equilibrium model has no ensemble dynamics")
        if not eta > 0.0:
            raise ValueError("viscosity must be strictly positive")
        self.p = p
        self.model = model
        self.constants = constants
        self.zero_temperature = opts.zero_temperature
        self.rng = np.random.default_rng(opts.seed)

        kbt = constants.kb * constants.temperature
        vc = p.core_volume()
        zeta = 6.0 * eta * 1e-3 * p.hydro_volume()
        self.sigma = p.k * 1e3 * vc / kbt
        self.xi_per_tesla = constants.ms * vc / kbt
        self.d_r = kbt / zeta
        self.brown_coef = constants.ms * vc / zeta
        self.axis_coef = 2.0 * p.k * 1e3 * vc / zeta
        self.split_wells = (
            self.sigma > SIGMA_SPLIT and model in (ModelKind.BLOCKED, ModelKind.COUPLED)
        )

        e = opts.ensemble_size
        if opts.aligned_init:
            self.n = np.tile(np.array([0.0, 0.0, 1.0]), (e, 1))
        else:
            self.n = _isotropic(self.rng, e)
        if model is ModelKind.BROWN:
            self.m = self.n.copy()
            self.s = np.ones(e)
        else:
            self.m = _isotropic(self.rng, e)
            self.s = np.where(self.rng.random(e) < 0.5, 1.0, -1.0)
            if self.split_wells:
                # park each moment in its labeled well so the first steps
                # do not all teleport at once
                wrong_side = (self.m * self.n).sum(axis=1) * self.s < 0.0
                self.m = np.where(wrong_side[:, None], -self.m, self.m)

    def mean_mz(self) -> float:
        return float(self.m[:, 2].mean())

    def step(self, b0: float, b1: float, dt: float, n_sub: int = 1) -> None:
        """Advance one output interval; field goes linearly from b0 to b1 (T)."""
        if self.model is not ModelKind.BLOCKED:
            self._advance_axes(b0, b1, dt, n_sub)
        if self.model is ModelKind.BROWN:
            self.m = self.n
        else:
            self._update_moments(b1, dt)

    # -- axis channel ----------------------------------------------------

    def _axis_drift(self, n: np.ndarray, b: float) -> np.ndarray:
        if self.model is ModelKind.BROWN:
            # Zeeman torque on the rigid moment, B along z
            drift = -self.brown_coef * b * n[:, 2:3] * n
            drift[:, 2] += self.brown_coef * b
            return drift
        # anisotropy torque pulls the axis toward the moment direction
        c = (self.m * n).sum(axis=1)[:, None]
        return self.axis_coef * c * (self.m - c * n)

    def _advance_axes(self, b0: float, b1: float, dt: float, n_sub: int) -> None:
        dt_s = dt / n_sub
        scale = math.sqrt(2.0 * self.d_r * dt_s)
        for i in range(n_sub):
            f0 = b0 + (b1 - b0) * i / n_sub
            f1 = b0 + (b1 - b0) * (i + 1) / n_sub
            n = self.n
            k1 = self._axis_drift(n, f0)
            if self.zero_temperature:
                n_mid = _normalize(n + dt_s * k1)
                k2 = self._axis_drift(n_mid, f1)
                self.n = _normalize(n + 0.5 * dt_s * (k1 + k2))
            else:
                dw = scale * self.rng.normal(size=n.shape)
                kick = _cross(dw, n)
                n_mid = _normalize(n + dt_s * k1 + kick)
                k2 = self._axis_drift(n_mid, f1)
                self.n = _normalize(
                    n + 0.5 * dt_s * (k1 + k2) + 0.5 * (kick + _cross(dw, n_mid))
                )

    # -- moment channel --------------------------------------------------

    def _update_moments(self, b: float, dt: float) -> None:
        xi = self.xi_per_tesla * abs(b)
        sgn = 1.0 if b >= 0.0 else -1.0
        if self.zero_temperature:
            self._moments_zero_temperature(xi, sgn)
        elif self.split_wells:
            fast = self._advance_labels(xi, sgn, dt)
            self._sample_wells(xi, sgn, fast)
        else:
            self._sample_free(xi, sgn)

    def _moments_zero_temperature(self, xi: float, sgn: float) -> None:
        # stationary point of the energy: m along xi*bhat + 2*sigma*(m.n)*n
        bz = xi * sgn
        if self.sigma == 0.0:
            if bz != 0.0:
                self.m = np.tile(np.array([0.0, 0.0, sgn]), (self.m.shape[0], 1))
            return
        m = self.m
        for _ in range(60):
            c = (m * self.n).sum(axis=1)[:, None]
            v = 2.0 * self.sigma * c * self.n
            v[:, 2] += bz
            m = _normalize(v)
        self.m = m

    def _sample_free(self, xi: float, sgn: float) -> None:
        """Independence MH draw from exp(xi*m.bhat + sigma*(m.n)^2), sigma <= split."""
        e = self.m.shape[0]
        u = self.rng.random(e)
        if xi < 1e-6:
            z = 2.0 * u - 1.0
        else:
            z = 1.0 + np.log(u + (1.0 - u) * math.exp(-2.0 * xi)) / xi
        phi = self.rng.uniform(0.0, 2.0 * np.pi, size=e)
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        cand = np.empty_like(self.m)
        cand[:, 0] = r * np.cos(phi)
        cand[:, 1] = r * np.sin(phi)
        cand[:, 2] = sgn * z
        if self.sigma == 0.0:
            self.m = cand
            return
        c_new = (cand * self.n).sum(axis=1)
        c_old = (self.m * self.n).sum(axis=1)
        log_ratio = self.sigma * (c_new * c_new - c_old * c_old)
        accept = np.log(self.rng.random(e)) < log_ratio
        self.m[accept] = cand[accept]

    def _well_log_mass(self, xi: float, c: np.ndarray, s_c: np.ndarray):
        """Log Boltzmann mass of each well by Gauss-Legendre quadrature.

        Integrand over x = 1 - s*(m.n) in [0, 1]:
            exp(sigma*t^2 + xi*c*t) * I0(xi*s_c*sqrt(1-t^2)),  t = s*(1-x)
        Returns (log_plus, log_minus), each up to one common constant.
        Quadrature error only perturbs a proposal weight, which the
        acceptance step corrects, so a low order suffices.
        """
        t = 1.0 - _GL_NODES  # well +; well - mirrors to -t
        sin_t = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        quad = self.sigma * t * t
        zeeman = xi * np.outer(c, t)
        bessel = _log_i0(xi * np.outer(s_c, sin_t))
        log_w = np.log(_GL_WEIGHTS)
        lp = quad + zeeman + bessel + log_w
        lm = quad - zeeman + bessel + log_w
        ref = np.maximum(lp.max(axis=1), lm.max(axis=1))[:, None]
        log_plus = np.log(np.exp(lp - ref).sum(axis=1)) + ref[:, 0]
        log_minus = np.log(np.exp(lm - ref).sum(axis=1)) + ref[:, 0]
        return log_plus, log_minus

    def _advance_labels(self, xi: float, sgn: float, dt: float):
        """One step of the two-state well chain; returns the fast-exchange mask.

        Particles whose wells communicate within the step (flip
        probability above a few percent) are flagged for the exact
        mixture sampler; the rest follow Arrhenius switching, which keeps
        slow Neel dynamics at frozen barriers.
        """
        c = sgn * self.n[:, 2]
        h = xi * c / (2.0 * self.sigma)
        u = self.rng.random(c.shape[0])

        # escape barriers sigma*(1 +- h)^2; the field-favored well is deeper
        rate = np.exp(-np.clip(self.sigma * (1.0 + self.s * h) ** 2, 0.0, 700.0)) / TAU0
        rate_other = np.exp(-np.clip(self.sigma * (1.0 - self.s * h) ** 2, 0.0, 700.0)) / TAU0
        fast = dt * (rate + rate_other) > 0.05

        flip = u < -np.expm1(-dt * rate)
        new_s = np.where(flip, -self.s, self.s)
        # a vanished barrier empties the unfavored well
        new_s = np.where(np.abs(h) >= 1.0, np.sign(c), new_s)
        self.s = np.where(fast, self.s, new_s)
        return fast

    @staticmethod
    def _log_trunc_exp_pdf(x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Log density of the [0, 1]-truncated exponential, any-sign rate."""
        tiny = np.abs(lam) < 1e-9
        lam_s = np.where(tiny, 1.0, lam)
        with np.errstate(invalid="ignore"):
            log_amp = np.where(
                lam_s > 0.0,
                np.log(np.abs(lam_s)) - np.log(-np.expm1(-np.abs(lam_s))),
                np.log(np.abs(lam_s)) + lam_s - np.log(-np.expm1(lam_s)),
            )
        log_amp = np.where(tiny, 0.0, log_amp)
        out = log_amp - lam * x
        return np.where((x < 0.0) | (x > 1.0), -np.inf, out)

    def _sample_wells(self, xi: float, sgn: float, fast: np.ndarray) -> None:
        """Moment draw in the split-well regime, one MH step per particle.

        Slow particles propose within their labeled well and accept
        against the well-restricted conditional.  Fast particles propose
        from a two-well mixture (wells weighted by quadrature masses) and
        accept against the full conditional, which makes the equilibrium
        exact wherever the wells exchange within a step.
        """
        e = self.m.shape[0]
        c = sgn * self.n[:, 2]
        s_c = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        lam_p = self.sigma + xi * c
        lam_m = self.sigma - xi * c

        # well masses feed only the fast branch; skip them while every
        # particle is frozen, which is most of the period at high barriers
        any_fast = bool(fast.any())
        if any_fast:
            log_mp, log_mm = self._well_log_mass(xi, c, s_c)
            norm = np.logaddexp(log_mp, log_mm)
            log_pp = log_mp - norm
            log_pm = log_mm - norm
            u_s = self.rng.random(e)
            s_mix = np.where(np.log(u_s) < log_pp, 1.0, -1.0)
            s = np.where(fast, s_mix, self.s)
        else:
            s = self.s
        self.s = s

        # truncated-exponential proposal in x = 1 - s*(m.n), heavier-tailed
        # than the target so the importance weights stay bounded
        lam = np.where(s > 0.0, lam_p, lam_m)
        u1 = self.rng.random(e)
        tiny = np.abs(lam) < 1e-9
        lam_safe = np.where(tiny, 1.0, lam)
        x_new = np.where(
            tiny, u1, -np.log1p(-u1 * (1.0 - np.exp(-lam_safe))) / lam_safe
        )
        x_new = np.clip(x_new, 0.0, 1.0)

        t_new = s * (1.0 - x_new)
        sin_new = np.sqrt(np.clip(x_new * (2.0 - x_new), 0.0, None))
        kappa_new = np.clip(xi * s_c * sin_new, 0.0, 700.0)
        phi = self.rng.vonmises(0.0, kappa_new)

        t_old = (self.m * self.n).sum(axis=1)
        u2 = self.rng.random(e)
        log_u2 = np.log(u2)

        if fast.all():
            accept_slow = np.zeros(e, dtype=bool)
        else:
            # slow branch: weights of the well-restricted chain
            log_w_new = self.sigma * x_new * (x_new - 1.0) + _log_i0(kappa_new)
            x_old = 1.0 - s * t_old
            in_well = x_old <= 1.0
            x_old_c = np.clip(x_old, 0.0, 1.0)
            kappa_old = xi * s_c * np.sqrt(np.clip(x_old_c * (2.0 - x_old_c), 0.0, None))
            log_w_old = self.sigma * x_old_c * (x_old_c - 1.0) + _log_i0(kappa_old)
            accept_slow = ~in_well | (log_u2 + log_w_old < log_w_new)

        if any_fast:
            # fast branch: full conditional over mixture-proposal density
            def log_target_over_q(t):
                sin_t = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
                log_target = self.sigma * t * t + xi * c * t + _log_i0(xi * s_c * sin_t)
                log_q = np.logaddexp(
                    log_pp + self._log_trunc_exp_pdf(1.0 - t, lam_p),
                    log_pm + self._log_trunc_exp_pdf(1.0 + t, lam_m),
                )
                return log_target - log_q

            ratio = log_target_over_q(t_new) - log_target_over_q(t_old)
            accept_fast = log_u2 < ratio
            accept = np.where(fast, accept_fast, accept_slow)
        else:
            accept = accept_slow

        # frame perpendicular to n containing the field direction
        e1 = np.zeros_like(self.n)
        e1[:, 2] = sgn
        e1 -= c[:, None] * self.n
        degenerate = s_c < 1e-9
        if degenerate.any():
            # axis parallel to the field: any transverse direction works
            fallback = np.zeros_like(self.n)
            fallback[:, 0] = 1.0
            alt = _cross(self.n, fallback)
            e1 = np.where(degenerate[:, None], alt, e1)
        e1 = _normalize(e1)
        e2 = _cross(self.n, e1)

        cand = (
            t_new[:, None] * self.n
            + (sin_new * np.cos(phi))[:, None] * e1
            + (sin_new * np.sin(phi))[:, None] * e2
        )
        cand = _normalize(cand)
        self.m = np.where(accept[:, None], cand, self.m)
        # rejected fast particles keep their moment; relabel by its side
        self.s = np.where(accept, s, np.where(fast, np.sign(t_old + 1e-300), self.s))


def _step_bound(p: ParticleParams, cond: Condition, constants: SimConstants) -> float:
    return min(1.0 / (100.0 * cond.df.fd), tau_brown(p, cond.eta, constants) / 10.0)


def simulate(
    p: ParticleParams,
    cond: Condition,
    model: ModelKind,
    opts: SimOptions = SimOptions(),
    constants: SimConstants = DEFAULT_CONSTANTS,
) -> TimeSignal:
    """Ensemble-mean reduced magnetization over one drive period.

    Runs opts.periods_total periods of B(t) = Bp*sin(2*pi*fd*t), discards
    the leading opts.periods_discarded as transient, and averages the rest
    into a single period of <m_z>(t) sampled at opts.fs (512 samples per
    period when fs is left unset).

    The axis integrator step must stay at or below
    min(1/(100*fd), tau_B/10); a larger explicit opts.dt raises
    ValueError.  The moment update runs once per output sample, which its
    conditional sampler allows at any step size.
    """
    df = cond.df
    fs = opts.fs if opts.fs is not None else 512.0 * df.fd
    n_per = TimeSignal.samples_per_period(fs, df.fd)
    total = opts.periods_total * n_per
    keep = opts.periods_total - opts.periods_discarded

    if model is ModelKind.LANGEVIN:
        t = np.arange(n_per) / fs
        xi = field_ratio(p, df.bp, constants) * np.sin(2.0 * np.pi * df.fd * t)
        return TimeSignal(langevin(xi), fs, df.fd)

    dt_out = 1.0 / fs
    bound = _step_bound(p, cond, constants)
    if opts.dt is None:
        n_sub = max(1, math.ceil(dt_out / bound - 1e-12))
    else:
        if opts.dt > bound * (1.0 + 1e-9):
            raise ValueError(
                f"dt={opts.dt:.3e} s exceeds the stability bound "
                f"min(1/(100*fd), tau_B/10) = {bound:.3e} s"
            )
        n_sub = max(1, math.ceil(dt_out / opts.dt - 1e-12))

    bp = df.amplitude_tesla()
    b = bp * np.sin(2.0 * np.pi * df.fd * np.arange(total + 1) / fs)

    ens = Ensemble(p, cond.eta, model, opts, constants)
    out = np.empty(total + 1)
    out[0] = ens.mean_mz()
    for i in range(total):
        ens.step(b[i], b[i + 1], dt_out, n_sub)
        out[i + 1] = ens.mean_mz()

    tail = out[opts.periods_discarded * n_per : total]
    mz = tail.reshape(keep, n_per).mean(axis=0)
    return TimeSignal(mz, fs, df.fd)


def mnp_signal(
    mz: TimeSignal,
    p: ParticleParams,
    constants: SimConstants = DEFAULT_CONSTANTS,
) -> TimeSignal:
    """Per-particle induced signal Ms*Vc * d<m_z>/dt (A*m^2/s).

    Differentiation happens in the frequency domain, which is exact for
    the band-limited periodic signals produced by simulate().
    """
    bins = np.fft.rfft(mz.samples)
    m = np.arange(bins.shape[0])
    bins *= 2j * np.pi * m * mz.fd * constants.ms * p.core_volume()
    return TimeSignal(np.fft.irfft(bins, n=mz.n), mz.fs, mz.fd)
