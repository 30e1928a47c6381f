"""Build a small dictionary set and poke at what comes out.

A dictionary column is the harmonic spectrum one candidate particle type
produces at one drive field and one carrier viscosity.  This script
builds an 8-atom set over two drive fields and two viscosities, prints
the matrix shapes and a few column magnitudes, then round-trips the set
through the on-disk cache and shows that a rebuild with the same inputs
reuses the cached files instead of simulating again.
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from mnpdict.core import DriveField, HarmonicSet, ParticleGrid, count_simulations
from mnpdict.dictionary import build_set, cache_name, load_set, manifest_text
from mnpdict.magmodel import ModelKind, SimOptions

RULE = "-" * 64

grid = ParticleGrid((18.0, 22.0), (30.0, 50.0), (4.0, 8.0))
dfs = (DriveField(250.0, 10.0), DriveField(1000.0, 10.0))
etas = (0.89, 8.31)
hs = HarmonicSet.odd_up_to(17)
opts = SimOptions(ensemble_size=100, seed=3)

print(f"grid: {grid.n_atoms} atoms, "
      f"{count_simulations(grid, dfs, etas)} simulations to run")

t0 = time.perf_counter()
bank = build_set(grid, dfs, etas, hs, ModelKind.COUPLED, opts)
print(f"built in {time.perf_counter() - t0:.1f} s")

print(RULE)
mats = bank.matrices()
for k, df in enumerate(dfs):
    for j, eta in enumerate(etas):
        a = mats[k][j]
        print(f"  {df.fd:6.0f} Hz, eta {eta:5.2f}: matrix {a.shape[0]}x{a.shape[1]} "
              f"complex, largest column norm {np.linalg.norm(a, axis=0).max():.3e}")

print(RULE)
print("third-harmonic magnitude per atom (250 Hz, water):")
a = mats[0][0]
row = hs.index(3)
for i in range(grid.n_atoms):
    p = grid.atom(i)
    print(f"  core {p.dc:4.1f}  hydro {p.dh:4.1f}  K {p.k:3.1f}  "
          f"|A[3]| = {np.abs(a[row, i]):.3e}")

print(RULE)
with tempfile.TemporaryDirectory() as tmp:
    cache = Path(tmp) / "bank"
    build_set(grid, dfs, etas, hs, ModelKind.COUPLED, opts, cache_dir=cache)
    files = sorted(f.name for f in cache.iterdir())
    print(f"cache dir holds {len(files)} files: {', '.join(files[:3])}, ...")

    t0 = time.perf_counter()
    again = build_set(grid, dfs, etas, hs, ModelKind.COUPLED, opts, cache_dir=cache)
    dt = time.perf_counter() - t0
    same = all(
        np.array_equal(bank.get(k, j).columns, again.get(k, j).columns)
        for k in range(len(dfs)) for j in range(len(etas))
    )
    print(f"rebuild from cache: {dt:.2f} s, columns identical: {same}")

    loaded = load_set(cache)
    print(f"load_set recovers {len(loaded.drive_fields)} drive fields x "
          f"{len(loaded.viscosities)} viscosities")

    head = manifest_text(loaded.get(0, 0)).splitlines()[:6]
    print(f"manifest of {cache_name(0, 0)} starts:")
    for line in head:
        print(f"    {line}")
