"""Predicting spectra at viscosities the estimator never saw.

The point of estimating weights and transfer functions jointly is that
the weights describe the particle suspension and the transfer functions
describe the receive chain, so the pair can be recombined with
dictionaries at a new viscosity to predict what the instrument would
measure there.  Leave-one-out makes that testable with nothing held
back: each viscosity is dropped from the fit in turn and then predicted
from the remaining ones.

This script runs the full sweep on synthetic data and prints the
per-fold waveform errors plus a drift check on the weights.
"""

import time

import numpy as np

from mnpdict.core import DriveField, HarmonicSet, ParticleGrid, ParticleParams, WeightVector
from mnpdict.dictionary import build_set
from mnpdict.estimator import joint_estimate, normalize_solution
from mnpdict.magmodel import ModelKind, SimOptions
from mnpdict.metrics import marginals, nwd
from mnpdict.predictor import leave_one_out
from mnpdict.signalio import SyntheticSpec, synth_generate

RULE = "-" * 64

grid = ParticleGrid((18.0, 20.0, 22.0), (30.0, 40.0, 50.0), (4.0, 6.0, 8.0))
dfs = (DriveField(250.0, 10.0), DriveField(1000.0, 10.0))
etas = (0.89, 2.08, 3.32, 8.31)
hs = HarmonicSet.odd_up_to(25)
generator = ParticleParams(20.0, 40.0, 6.0)

print(f"building dictionaries at viscosities {etas} ...")
t0 = time.perf_counter()
bank = build_set(grid, dfs, etas, hs, ModelKind.COUPLED,
                 SimOptions(ensemble_size=200, seed=17))
print(f"done in {time.perf_counter() - t0:.1f} s")

x = np.zeros(grid.n_atoms)
x[grid.index_of(generator)] = 1.0
truth = WeightVector(grid, x)
meas, _ = synth_generate(
    SyntheticSpec(truth, snr=10.0, seed=99, averages=64), bank
)

restricted = bank.restricted(meas.harmonics)
mats = restricted.matrices()
full = normalize_solution(joint_estimate(mats, meas, grid))

print(RULE)
t0 = time.perf_counter()
reports = leave_one_out(mats, meas, grid)
print(f"leave-one-out over {len(reports)} folds took {time.perf_counter() - t0:.1f} s")
print()
print("held-out eta   error @250 Hz   error @1 kHz   weight drift (NWD)")
for rep in reports:
    fold = normalize_solution(rep.estimation)
    drift = max(
        nwd(marginals(full.weights)[ax], marginals(fold.weights)[ax])
        for ax in ("dc", "dh", "k")
    )
    e250, e1k = rep.nrmse_time
    print(f"  {rep.viscosity:8.2f}     {e250:7.3f}%       {e1k:7.3f}%        {drift:.4f}")

print(RULE)
worst = max(max(rep.nrmse_time) for rep in reports)
print(f"worst prediction error across folds: {worst:.3f}% of signal range")
print("drift compares each fold's weights to the all-viscosity fit; small")
print("numbers mean the suspension estimate does not hinge on any single")
print("carrier fluid.")
