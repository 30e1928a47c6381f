"""Tour of the particle models: static limit, harmonics, and viscosity.

Runs three sanity experiments on a single particle type and prints what
they show:

  1. with the drive frozen at a constant field, the mean coupled-model
     moment settles onto the Langevin curve;
  2. under a sinusoidal drive the spectrum of the induced signal is odd
     harmonics only, and the Brownian-only model lags the coupled model;
  3. raising the carrier viscosity narrows the central lobe of the
     (fundamental-free) signal, which is the effect the dictionary
     estimator ultimately keys on.

Ensembles are kept small so the whole script runs in well under a minute;
expect a few percent of Monte Carlo jitter on every number.
"""

import numpy as np

from mnpdict.core import Condition, DriveField, HarmonicSet, ParticleParams, TimeSignal, extract_harmonics, synthesize_time
from mnpdict.magmodel import Ensemble, ModelKind, SimOptions, langevin, mnp_signal, simulate, tau_brown
from mnpdict.metrics import zero_crossing_time

RULE = "-" * 64

particle = ParticleParams(dc=20.0, ds=40.0, k=6.0)
water = 0.89
print(f"particle: core {particle.dc} nm, shell {particle.ds} nm, "
      f"hydrodynamic {particle.dh} nm, K {particle.k} kJ/m^3")
print(f"Brownian time in water: {tau_brown(particle, water) * 1e6:.1f} us")

print(RULE)
print("1. static field: ensemble mean vs the Langevin function")
ens = Ensemble(particle, water, ModelKind.COUPLED, SimOptions(ensemble_size=4000, seed=7))
dt = tau_brown(particle, water) / 100.0
for xi in (0.5, 2.0, 5.0):
    b = xi / ens.xi_per_tesla
    for _ in range(600):
        ens.step(b, b, dt)
    mean = float(ens.mean_mz())
    print(f"  xi = {xi:3.1f}: simulated {mean:+.4f}   Langevin {langevin(xi):+.4f}")
    ens = Ensemble(particle, water, ModelKind.COUPLED, SimOptions(ensemble_size=4000, seed=7))

print(RULE)
print("2. 1 kHz drive: odd harmonics, and Brown lags the coupled model")
df = DriveField(fd=1000.0, bp=10.0)
cond = Condition(df, water)
rows = {}
for kind in (ModelKind.COUPLED, ModelKind.BROWN):
    mz = simulate(particle, cond, kind, SimOptions(ensemble_size=500, seed=5))
    periods = round(mz.n / (mz.fs / mz.fd))  # the fundamental's bin index
    c = np.fft.rfft(mz.samples) / mz.n
    drive = np.fft.rfft(np.sin(2.0 * np.pi * df.fd * np.arange(mz.n) / mz.fs))[periods]
    # how far the magnetization trails the drive, positive = later
    rows[kind] = (np.abs(c[periods]), -float(np.angle(c[periods] * np.conj(drive))))
    s = np.fft.rfft(mnp_signal(mz, particle).samples)
    odd = sum(np.abs(s[m * periods]) ** 2 for m in (1, 3, 5, 7, 9))
    even = sum(np.abs(s[m * periods]) ** 2 for m in (2, 4, 6, 8))
    print(f"  {kind.name:8s} even/odd harmonic power: {even / odd:.2e}")
for kind, (amp, lag) in rows.items():
    print(f"  {kind.name:8s} magnetization fundamental {amp:.4f}   trails drive by {lag:+.3f} rad")

print(RULE)
print("3. 250 Hz drive: thicker carrier, narrower central lobe")
df = DriveField(fd=250.0, bp=10.0)
band = HarmonicSet.odd_up_to(9)
for eta in (0.89, 15.33):
    acc = None
    for seed in range(20, 26):  # small average to steady the crossing points
        mz = simulate(particle, Condition(df, eta), ModelKind.COUPLED,
                      SimOptions(ensemble_size=500, seed=seed))
        acc = mz.samples if acc is None else acc + mz.samples
    avg = TimeSignal(acc / 6, mz.fs, mz.fd)
    spec = extract_harmonics(mnp_signal(avg, particle), band)
    lobe = synthesize_time(spec, 200 * df.fd, df.fd)
    print(f"  eta = {eta:5.2f} mPa s: lobe width {zero_crossing_time(lobe):6.2f} "
          f"(percent of one period)")
