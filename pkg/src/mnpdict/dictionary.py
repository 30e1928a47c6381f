"""Build, persist and load dictionaries of simulated harmonic spectra.

A dictionary collects, for one measurement condition, the selected-harmonic
spectra of every particle on a grid: column i holds the spectrum of atom i
in canonical grid order.  Sets of dictionaries over drive fields x
viscosities feed the estimator; building them is embarrassingly parallel
and resumable, so each (drive field, viscosity) entry persists to its own
self-describing binary file.

Seeds are derived per (atom, drive field, viscosity), never from worker
layout or build order, which makes outputs bit-identical across worker
counts and across interrupted-and-resumed builds.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    Condition,
    DriveField,
    HarmonicSet,
    ParticleGrid,
    SimConstants,
    Spectrum,
    TimeSignal,
    extract_harmonics,
)
from .magmodel import (
    DEFAULT_CONSTANTS,
    ModelKind,
    SimOptions,
    mnp_signal,
    simulate,
)

_MAGIC = b"MNPDICTBANK\x00"
_VERSION = 1
_MASK = (1 << 64) - 1


class DictionaryFormatError(ValueError):
    """A dictionary file failed validation on load."""


class AtomSimulationError(RuntimeError):
    """A single atom's simulation failed during a dictionary build."""

    def __init__(self, atom_index: int, message: str):
        super().__init__(f"atom {atom_index}: {message}")
        self.atom_index = atom_index


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def atom_seed(base_seed: int, atom_index: int, k_index: int, j_index: int) -> int:
    """Per-simulation seed, stable under worker layout and build order."""
    h = base_seed & _MASK
    for v in (atom_index, k_index, j_index):
        h = _splitmix64(h ^ _splitmix64(v & _MASK))
    return h


@dataclass(frozen=True)
class Dictionary:
    """Selected-harmonic spectra of every grid atom at one condition.

    columns has shape (hs.m, grid.n_atoms), complex, finite; column i is
    the spectrum of grid.atom(i).  The provenance fields say exactly how
    the columns were produced, enough to rebuild them from scratch.
    """

    cond: Condition
    hs: HarmonicSet
    grid: ParticleGrid
    columns: np.ndarray
    model: ModelKind
    options: SimOptions
    constants: SimConstants
    stream: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        cols = np.asarray(self.columns, dtype=np.complex128)
        want = (self.hs.m, self.grid.n_atoms)
        if cols.shape != want:
            raise ValueError(f"columns have shape {cols.shape}, expected {want}")
        if not np.isfinite(cols).all():
            raise ValueError("dictionary columns must be finite")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "stream", (int(self.stream[0]), int(self.stream[1])))

    @property
    def n_atoms(self) -> int:
        return self.grid.n_atoms

    def column(self, atom_index: int) -> Spectrum:
        return Spectrum(self.hs, self.columns[:, atom_index])


def restrict_harmonics(d: Dictionary, hs: HarmonicSet) -> Dictionary:
    """The same dictionary on a subset of its harmonics."""
    pos = {m: i for i, m in enumerate(d.hs)}
    try:
        rows = [pos[m] for m in hs]
    except KeyError as exc:
        raise ValueError(f"harmonic {exc.args[0]} is not in the dictionary") from None
    return replace(d, hs=hs, columns=d.columns[rows, :])


@dataclass(frozen=True)
class DictionarySet:
    """Dictionaries for every (drive field, viscosity) pair on one grid.

    dictionaries[k][j] belongs to (drive_fields[k], viscosities[j]).  All
    entries share the grid; the harmonic set may vary with the drive field
    but not with viscosity.
    """

    drive_fields: tuple[DriveField, ...]
    viscosities: tuple[float, ...]
    dictionaries: tuple[tuple[Dictionary, ...], ...]

    def __post_init__(self) -> None:
        dfs = tuple(self.drive_fields)
        etas = tuple(float(v) for v in self.viscosities)
        rows = tuple(tuple(row) for row in self.dictionaries)
        if not dfs or not etas:
            raise ValueError("need at least one drive field and one viscosity")
        if len(rows) != len(dfs) or any(len(r) != len(etas) for r in rows):
            raise ValueError("dictionary layout must cover every (k, j) pair")
        grid = rows[0][0].grid
        for k, row in enumerate(rows):
            hs = row[0].hs
            for j, d in enumerate(row):
                want = Condition(dfs[k], etas[j])
                if d.cond != want:
                    raise ValueError(f"entry ({k}, {j}) was built for {d.cond}, not {want}")
                if d.grid != grid:
                    raise ValueError("all dictionaries must share one grid")
                if d.hs != hs:
                    raise ValueError(f"harmonic sets differ across viscosities at k={k}")
        object.__setattr__(self, "drive_fields", dfs)
        object.__setattr__(self, "viscosities", etas)
        object.__setattr__(self, "dictionaries", rows)

    @property
    def grid(self) -> ParticleGrid:
        return self.dictionaries[0][0].grid

    def get(self, k: int, j: int) -> Dictionary:
        return self.dictionaries[k][j]

    def harmonics(self, k: int) -> HarmonicSet:
        return self.dictionaries[k][0].hs

    def matrices(self) -> list[list[np.ndarray]]:
        """Column matrices in [k][j] layout, as the estimator consumes them."""
        return [[d.columns for d in row] for row in self.dictionaries]

    def restricted(self, per_k: Sequence[HarmonicSet]) -> "DictionarySet":
        """Row-subset every dictionary to the given per-drive-field harmonics."""
        if len(per_k) != len(self.drive_fields):
            raise ValueError("need one harmonic set per drive field")
        rows = tuple(
            tuple(restrict_harmonics(d, hs) for d in row)
            for row, hs in zip(self.dictionaries, per_k)
        )
        return DictionarySet(self.drive_fields, self.viscosities, rows)


# -- building ------------------------------------------------------------


def _effective_fs(opts: SimOptions, fd: float) -> float:
    return opts.fs if opts.fs is not None else 512.0 * fd


def _check_nyquist(hs: HarmonicSet, opts: SimOptions, fd: float) -> None:
    n = TimeSignal.samples_per_period(_effective_fs(opts, fd), fd)
    if hs[-1] >= n // 2:
        raise ValueError(
            f"harmonic {hs[-1]} is not below the Nyquist index {n // 2} "
            f"at the simulation sample rate"
        )


def _column_job(args) -> np.ndarray:
    p, cond, hs, model, opts, constants = args
    sim = simulate(p, cond, model, opts, constants)
    return extract_harmonics(mnp_signal(sim, p, constants), hs).values


def build_dictionary(
    grid: ParticleGrid,
    cond: Condition,
    hs: HarmonicSet,
    model: ModelKind,
    opts: SimOptions = SimOptions(),
    constants: SimConstants = DEFAULT_CONSTANTS,
    *,
    stream: tuple[int, int] = (0, 0),
    worker_count: int = 1,
) -> Dictionary:
    """Simulate every grid atom at one condition and collect its spectrum.

    stream tags the (drive field, viscosity) indices inside a larger build
    so that per-atom seeds stay unique across conditions; standalone
    builds can leave it at (0, 0).
    """
    _check_nyquist(hs, opts, cond.df.fd)
    k_idx, j_idx = stream
    jobs = [
        (
            grid.atom(i),
            cond,
            hs,
            model,
            replace(opts, seed=atom_seed(opts.seed, i, k_idx, j_idx)),
            constants,
        )
        for i in range(grid.n_atoms)
    ]

    columns = np.empty((hs.m, grid.n_atoms), dtype=np.complex128)
    if worker_count > 1:
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            chunk = max(1, grid.n_atoms // (4 * worker_count))
            results = pool.map(_column_job, jobs, chunksize=chunk)
            for i, col in enumerate(results):
                columns[:, i] = col
    else:
        for i, job in enumerate(jobs):
            try:
                columns[:, i] = _column_job(job)
            except Exception as exc:
                raise AtomSimulationError(i, str(exc)) from exc

    return Dictionary(cond, hs, grid, columns, model, opts, constants, stream)


def build_set(
    grid: ParticleGrid,
    drive_fields: list[DriveField] | tuple[DriveField, ...],
    viscosities: list[float] | tuple[float, ...],
    per_k_harmonics: HarmonicSet | list[HarmonicSet],
    model: ModelKind,
    opts: SimOptions = SimOptions(),
    constants: SimConstants = DEFAULT_CONSTANTS,
    *,
    worker_count: int = 1,
    cache_dir: str | Path | None = None,
) -> DictionarySet:
    """Build (or resume) the full dictionary set over drive fields x viscosities.

    With cache_dir set, each (k, j) entry persists to its own file as soon
    as it is built; entries already on disk are loaded instead of
    re-simulated, after checking that they describe the requested build.
    """
    dfs = tuple(drive_fields)
    etas = tuple(float(v) for v in viscosities)
    if isinstance(per_k_harmonics, HarmonicSet):
        hs_per_k: list[HarmonicSet] = [per_k_harmonics] * len(dfs)
    else:
        hs_per_k = list(per_k_harmonics)
    if len(hs_per_k) != len(dfs):
        raise ValueError("need one harmonic set per drive field")
    for df, hs in zip(dfs, hs_per_k):
        _check_nyquist(hs, opts, df.fd)

    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)

    rows = []
    for k, df in enumerate(dfs):
        row = []
        for j, eta in enumerate(etas):
            cond = Condition(df, eta)
            path = cache / cache_name(k, j) if cache is not None else None
            if path is not None and path.exists():
                d = load_dictionary(path)
                _check_cache_entry(d, grid, cond, hs_per_k[k], model, opts, constants, (k, j))
            else:
                d = build_dictionary(
                    grid, cond, hs_per_k[k], model, opts, constants,
                    stream=(k, j), worker_count=worker_count,
                )
                if path is not None:
                    save_dictionary(d, path)
            row.append(d)
        rows.append(tuple(row))
    return DictionarySet(dfs, etas, tuple(rows))


def cache_name(k: int, j: int) -> str:
    return f"dict_k{k:02d}_j{j:02d}.bin"


def _check_cache_entry(d, grid, cond, hs, model, opts, constants, stream) -> None:
    fresh = (grid, cond, hs, model, opts, constants, stream)
    stored = (d.grid, d.cond, d.hs, d.model, d.options, d.constants, d.stream)
    if stored != fresh:
        raise DictionaryFormatError(
            f"cached entry {cache_name(*stream)} was built with a different "
            f"configuration; clear the cache directory to rebuild"
        )


# -- persistence ---------------------------------------------------------


def _manifest_dict(d: Dictionary, payload_sha256: str) -> dict:
    return {
        "kind": "harmonic-dictionary",
        "grid": {
            "dc": list(d.grid.dc_values),
            "ds": list(d.grid.ds_values),
            "k": list(d.grid.k_values),
        },
        "condition": {"fd": d.cond.df.fd, "bp": d.cond.df.bp, "eta": d.cond.eta},
        "harmonics": list(d.hs),
        "model": d.model.value,
        "options": {
            "ensemble_size": d.options.ensemble_size,
            "dt": d.options.dt,
            "seed": d.options.seed,
            "periods_total": d.options.periods_total,
            "periods_discarded": d.options.periods_discarded,
            "fs": d.options.fs,
            "aligned_init": d.options.aligned_init,
            "zero_temperature": d.options.zero_temperature,
        },
        "constants": {
            "ms": d.constants.ms,
            "temperature": d.constants.temperature,
            "alpha": d.constants.alpha,
            "gamma": d.constants.gamma,
            "kb": d.constants.kb,
            "mu0": d.constants.mu0,
        },
        "stream": list(d.stream),
        "shape": [d.hs.m, d.grid.n_atoms],
        "payload_sha256": payload_sha256,
    }


def manifest_text(d: Dictionary) -> str:
    """The manifest exactly as save_dictionary embeds it."""
    payload = np.asfortranarray(d.columns).tobytes(order="F")
    digest = hashlib.sha256(payload).hexdigest()
    return json.dumps(_manifest_dict(d, digest), sort_keys=True, indent=2)


def save_dictionary(d: Dictionary, path: str | Path) -> None:
    """Write the self-describing binary container atomically."""
    path = Path(path)
    payload = np.asfortranarray(d.columns.astype("<c16", copy=False)).tobytes(order="F")
    digest = hashlib.sha256(payload).hexdigest()
    manifest = json.dumps(_manifest_dict(d, digest), sort_keys=True).encode("utf-8")

    blob = bytearray()
    blob += _MAGIC
    blob += _VERSION.to_bytes(4, "little")
    blob += len(manifest).to_bytes(8, "little")
    blob += manifest
    blob += payload

    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, path)


def load_dictionary(path: str | Path) -> Dictionary:
    """Read and validate a container written by save_dictionary."""
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + 12 or raw[: len(_MAGIC)] != _MAGIC:
        raise DictionaryFormatError(f"{path}: not a dictionary file (bad magic)")
    off = len(_MAGIC)
    version = int.from_bytes(raw[off : off + 4], "little")
    if version != _VERSION:
        raise DictionaryFormatError(
            f"{path}: format version {version} is not supported (expected {_VERSION})"
        )
    off += 4
    manifest_len = int.from_bytes(raw[off : off + 8], "little")
    off += 8
    if len(raw) < off + manifest_len:
        raise DictionaryFormatError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[off : off + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DictionaryFormatError(f"{path}: unreadable manifest: {exc}") from exc
    off += manifest_len

    m, n = (int(v) for v in manifest["shape"])
    payload = raw[off:]
    want_bytes = m * n * 16
    if len(payload) != want_bytes:
        raise DictionaryFormatError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {want_bytes})"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != manifest["payload_sha256"]:
        raise DictionaryFormatError(f"{path}: payload checksum mismatch")

    columns = np.frombuffer(payload, dtype="<c16").reshape((m, n), order="F").copy()
    try:
        g = manifest["grid"]
        grid = ParticleGrid(tuple(g["dc"]), tuple(g["ds"]), tuple(g["k"]))
        c = manifest["condition"]
        cond = Condition(DriveField(c["fd"], c["bp"]), c["eta"])
        o = manifest["options"]
        opts = SimOptions(
            ensemble_size=o["ensemble_size"],
            dt=o["dt"],
            seed=o["seed"],
            periods_total=o["periods_total"],
            periods_discarded=o["periods_discarded"],
            fs=o["fs"],
            aligned_init=o["aligned_init"],
            zero_temperature=o["zero_temperature"],
        )
        cs = manifest["constants"]
        constants = SimConstants(
            ms=cs["ms"],
            temperature=cs["temperature"],
            alpha=cs["alpha"],
            gamma=cs["gamma"],
            kb=cs["kb"],
            mu0=cs["mu0"],
        )
        return Dictionary(
            cond,
            HarmonicSet(manifest["harmonics"]),
            grid,
            columns,
            ModelKind(manifest["model"]),
            opts,
            constants,
            tuple(manifest["stream"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DictionaryFormatError(f"{path}: invalid manifest: {exc}") from exc


def load_set(cache_dir: str | Path) -> DictionarySet:
    """Assemble a DictionarySet from every cache file in a directory.

    Expects the complete rectangular layout written by build_set; a
    missing (k, j) entry or an inconsistent grid raises
    DictionaryFormatError.
    """
    cache_dir = Path(cache_dir)
    found: dict[tuple[int, int], Dictionary] = {}
    pattern = re.compile(r"dict_k(\d+)_j(\d+)\.bin$")
    for path in sorted(cache_dir.glob("dict_k*_j*.bin")):
        match = pattern.match(path.name)
        if match is None:
            continue
        found[int(match.group(1)), int(match.group(2))] = load_dictionary(path)
    if not found:
        raise DictionaryFormatError(f"no dictionary files in {cache_dir}")
    n_k = max(k for k, _ in found) + 1
    n_j = max(j for _, j in found) + 1
    missing = [
        cache_name(k, j)
        for k in range(n_k)
        for j in range(n_j)
        if (k, j) not in found
    ]
    if missing:
        raise DictionaryFormatError(
            f"{cache_dir} is missing entries: {', '.join(missing)}"
        )
    rows = tuple(tuple(found[k, j] for j in range(n_j)) for k in range(n_k))
    drive_fields = tuple(rows[k][0].cond.df for k in range(n_k))
    viscosities = tuple(rows[0][j].cond.eta for j in range(n_j))
    return DictionarySet(drive_fields, viscosities, rows)
