"""Command-line front end for dictionary builds, estimation and prediction.

One structured text config file drives every command; a handful of global
flags override individual config values (flags win).  All outputs are
written atomically and embed a checksum manifest of the inputs they were
computed from, so any emitted table can be traced back to exact files.

Commands
--------
build-dict      simulate (or resume) the dictionary set into a cache dir
estimate        joint transfer-function and weight estimation
fit             estimation plus fitted spectra and waveform errors
predict         render spectra at a chosen viscosity from an estimate
loo             leave-one-out sweep over every measured viscosity
synth-validate  synthetic ground-truth pipeline with error tables
metrics         recompute signal metrics from stored measurement files
info            show config, cache and package details
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    DriveField,
    HarmonicSet,
    ParticleGrid,
    ParticleParams,
    WeightVector,
    count_simulations,
    synthesize_time,
)
from .dictionary import (
    AtomSimulationError,
    DictionaryFormatError,
    DictionarySet,
    build_set,
    cache_name,
    load_set,
)
from .estimator import (
    EstimationResult,
    MeasurementSet,
    NnlsNonConvergence,
    joint_estimate,
    normalize_solution,
)
from .magmodel import ModelKind, SimOptions
from .metrics import marginals, nwd, zero_crossing_time
from .predictor import fitted, leave_one_out, predict, waveform_nrmse
from .signalio import (
    MeasurementFormatError,
    SyntheticSpec,
    read_measurement_csv,
    synth_generate,
    write_measurement_csv,
)

CACHE_ENV_VAR = "MNPDICT_CACHE_DIR"


class CliError(Exception):
    """User-facing command failure; the message is printed to stderr."""


# -- config file ----------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    """Comma-separated floats; lo:hi:count expands to a linear range."""
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            lo, hi, count = part.split(":")
            out.extend(float(v) for v in np.linspace(float(lo), float(hi), int(count)))
        else:
            out.append(float(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() == "none" else float(text)


def _model(text: str) -> ModelKind:
    try:
        return ModelKind(text.strip().lower())
    except ValueError:
        names = ", ".join(m.value for m in ModelKind)
        raise ValueError(f"unknown model {text!r}; expected one of {names}") from None


def _generator(text: str) -> tuple[tuple[float, float, float, float], ...]:
    """Semicolon-separated atoms, each 'dc,ds,k,weight'."""
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [float(p) for p in chunk.split(",")]
        if len(parts) != 4:
            raise ValueError(f"generator atom needs dc,ds,k,weight: {chunk!r}")
        out.append(tuple(parts))
    if not out:
        raise ValueError("empty generator list")
    return tuple(out)


@dataclass(frozen=True)
class RunConfig:
    """Typed view of one run's config file plus flag overrides.

    List-valued keys accept comma lists and lo:hi:count ranges; the
    drive-field table is the cross product of fd and bp.
    """

    dc: tuple[float, ...] = ()
    ds: tuple[float, ...] = ()
    k: tuple[float, ...] = ()
    fd: tuple[float, ...] = ()
    bp: tuple[float, ...] = ()
    eta: tuple[float, ...] = ()
    harmonics: int = 101
    model: ModelKind = ModelKind.COUPLED
    ensemble: int = 1000
    dt: float | None = None
    fs: float | None = None
    periods: int = 3
    discard: int = 2
    seed: int = 0
    workers: int = 0
    max_iter: int = 2000
    fixed_iterations: bool = False
    snr: float | None = None
    threshold: float = 15.0
    averages: int = 1
    generator: tuple[tuple[float, float, float, float], ...] = ()
    excluded: float | None = None
    cache: str | None = None
    measurements: str | None = None
    reference: str | None = None
    out: str = "."

    def grid(self) -> ParticleGrid:
        if not (self.dc and self.ds and self.k):
            raise CliError("config must set the dc, ds and k grid axes")
        return ParticleGrid(self.dc, self.ds, self.k)

    def drive_fields(self) -> tuple[DriveField, ...]:
        if not (self.fd and self.bp):
            raise CliError("config must set fd and bp drive-field lists")
        return tuple(DriveField(f, b) for f in self.fd for b in self.bp)

    def viscosities(self) -> tuple[float, ...]:
        if not self.eta:
            raise CliError("config must set the eta viscosity list")
        return self.eta

    def harmonic_set(self) -> HarmonicSet:
        return HarmonicSet.odd_up_to(self.harmonics)

    def sim_options(self) -> SimOptions:
        return SimOptions(
            ensemble_size=self.ensemble,
            dt=self.dt,
            seed=self.seed,
            periods_total=self.periods,
            periods_discarded=self.discard,
            fs=self.fs,
        )

    def worker_count(self) -> int:
        return self.workers if self.workers > 0 else os.cpu_count() or 1

    def cache_dir(self) -> Path:
        if self.cache is None:
            raise CliError(
                f"no dictionary cache configured; set 'cache' in the config "
                f"or the {CACHE_ENV_VAR} environment variable"
            )
        return Path(self.cache)

    def out_dir(self) -> Path:
        return Path(self.out)


_PARSERS = {
    "dc": _floats,
    "ds": _floats,
    "k": _floats,
    "fd": _floats,
    "bp": _floats,
    "eta": _floats,
    "harmonics": int,
    "model": _model,
    "ensemble": int,
    "dt": _optional_float,
    "fs": _optional_float,
    "periods": int,
    "discard": int,
    "seed": int,
    "workers": int,
    "max_iter": int,
    "fixed_iterations": _bool,
    "snr": _optional_float,
    "threshold": float,
    "averages": int,
    "generator": _generator,
    "excluded": float,
    "cache": str,
    "measurements": str,
    "reference": str,
    "out": str,
}

assert set(_PARSERS) == {f.name for f in fields(RunConfig)}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse 'key = value' lines into a RunConfig; unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise CliError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key not in _PARSERS:
            raise CliError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise CliError(f"{source}:{lineno}: duplicate config key {key!r}")
        try:
            values[key] = _PARSERS[key](value.strip())
        except ValueError as exc:
            raise CliError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise CliError(f"{source}: {exc}") from exc


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file, then flag overrides, then the cache environment variable."""
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        cfg = parse_config(path.read_text(encoding="utf-8"), str(path))
    else:
        cfg = RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out"] = args.out
    if args.fixed_iterations:
        overrides["fixed_iterations"] = True
    env_cache = os.environ.get(CACHE_ENV_VAR)
    if env_cache:
        overrides["cache"] = env_cache
    return replace(cfg, **overrides) if overrides else cfg


# -- output plumbing ------------------------------------------------------


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _input_manifest(paths: list[Path]) -> list[str]:
    return [f"# input,{p.name},{_sha256(p)}" for p in paths]


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _write_table(path: Path, inputs: list[Path], lines: list[str]) -> None:
    _write_atomic(path, "\n".join(_input_manifest(inputs) + lines) + "\n")


def _config_inputs(args: argparse.Namespace) -> list[Path]:
    return [Path(args.config)] if args.config is not None else []


# -- shared command plumbing ----------------------------------------------


def _load_inputs(
    cfg: RunConfig, args: argparse.Namespace
) -> tuple[DictionarySet, MeasurementSet, list[Path]]:
    cache = cfg.cache_dir()
    if cfg.measurements is None:
        raise CliError("config must set 'measurements' (harmonic-domain CSV)")
    meas_path = Path(cfg.measurements)
    if not meas_path.exists():
        raise CliError(f"measurement file not found: {meas_path}")
    dicts = load_set(cache)
    meas = read_measurement_csv(meas_path)
    inputs = _config_inputs(args) + [meas_path]
    inputs += [
        cache / cache_name(k, j)
        for k in range(len(dicts.drive_fields))
        for j in range(len(dicts.viscosities))
    ]
    return dicts, meas, inputs


def _aligned_matrices(dicts: DictionarySet, meas: MeasurementSet) -> list[list[np.ndarray]]:
    """Dictionary columns row-matched to the measurement harmonics.

    The measurement set may cover a subset of the cached viscosities; its
    drive fields and harmonics must all exist in the cache.
    """
    if tuple(meas.drive_fields) != tuple(dicts.drive_fields):
        raise CliError("measurement drive fields do not match the dictionary cache")
    try:
        j_map = [dicts.viscosities.index(eta) for eta in meas.viscosities]
    except ValueError as exc:
        raise CliError(f"measured viscosity missing from the dictionary cache: {exc}")
    mats = []
    for k in range(meas.n_drive):
        hs = dicts.harmonics(k)
        try:
            rows = [hs.index(m) for m in meas.harmonics[k]]
        except ValueError:
            raise CliError(
                f"measurement harmonics at drive field {k} are not all in the "
                f"dictionary (available up to {hs[-1]})"
            ) from None
        mats.append([dicts.get(k, j).columns[rows] for j in j_map])
    return mats


def _estimate(cfg: RunConfig, dicts: DictionarySet, meas: MeasurementSet) -> EstimationResult:
    mats = _aligned_matrices(dicts, meas)
    result = joint_estimate(
        mats,
        meas,
        dicts.grid,
        max_iter=cfg.max_iter,
        fixed_iterations=cfg.fixed_iterations,
    )
    return normalize_solution(result)


def _weights_lines(result: EstimationResult) -> list[str]:
    grid = result.weights.grid
    lines = ["index,dc,ds,k,weight"]
    for i, w in enumerate(result.weights.values):
        p = grid.atom(i)
        lines.append(f"{i},{p.dc!r},{p.ds!r},{p.k!r},{float(w)!r}")
    return lines


def _transfer_lines(result: EstimationResult) -> list[str]:
    lines = ["k,m,re,im,magnitude,phase"]
    for k, tf in enumerate(result.transfer):
        for m, v in zip(tf.harmonics, tf.values):
            lines.append(
                f"{k},{m},{float(v.real)!r},{float(v.imag)!r},"
                f"{float(np.abs(v))!r},{float(np.angle(v))!r}"
            )
    return lines


def _estimate_summary(result: EstimationResult, top: int = 5) -> list[str]:
    trace = result.objective_trace
    lines = [
        f"iterations: {result.iterations}",
        f"converged: {result.converged}",
        f"objective: {trace[-1]:.6e}",
    ]
    if result.degenerate:
        pairs = ", ".join(f"(k={k}, m={m})" for k, m in result.degenerate)
        lines.append(f"degenerate transfer entries: {pairs}")
    order = np.argsort(result.weights.values)[::-1]
    lines.append(f"top atoms by weight (of {result.weights.values.size}):")
    for i in order[:top]:
        p = result.weights.grid.atom(int(i))
        lines.append(
            f"  dc={p.dc:g} nm  ds={p.ds:g} nm  k={p.k:g} kJ/m^3  "
            f"weight={result.weights.values[i]:.6g}"
        )
    return lines


# -- commands -------------------------------------------------------------


def cmd_info(cfg: RunConfig, args: argparse.Namespace) -> int:
    print(f"mnpdict {__version__}")
    if args.config is not None:
        grid = cfg.grid()
        dfs = cfg.drive_fields()
        etas = cfg.viscosities()
        print(f"grid: {grid.shape[0]} x {grid.shape[1]} x {grid.shape[2]} "
              f"= {grid.n_atoms} atoms")
        print(f"drive fields: {len(dfs)}")
        print(f"viscosities: {len(etas)}")
        print(f"simulations per build: {count_simulations(grid, dfs, etas)}")
        print(f"model: {cfg.model.value}")
    if cfg.cache is not None:
        cache = cfg.cache_dir()
        entries = sorted(cache.glob("dict_k*_j*.bin")) if cache.is_dir() else []
        print(f"cache: {cache} ({len(entries)} dictionaries)")
        for path in entries:
            print(f"  {path.name}  {path.stat().st_size} bytes")
    return 0


def cmd_build_dict(cfg: RunConfig, args: argparse.Namespace) -> int:
    grid = cfg.grid()
    dfs = cfg.drive_fields()
    etas = cfg.viscosities()
    jobs = count_simulations(grid, dfs, etas)
    print(f"atoms: {grid.n_atoms}")
    print(f"drive fields: {len(dfs)}")
    print(f"viscosities: {len(etas)}")
    print(f"simulations: {jobs}")
    if args.dry_run:
        return 0
    cache = cfg.cache_dir()
    build_set(
        grid,
        dfs,
        etas,
        cfg.harmonic_set(),
        cfg.model,
        cfg.sim_options(),
        worker_count=cfg.worker_count(),
        cache_dir=cache,
    )
    lines = ["file,sha256"]
    for k in range(len(dfs)):
        for j in range(len(etas)):
            name = cache_name(k, j)
            lines.append(f"{name},{_sha256(cache / name)}")
    _write_table(cfg.out_dir() / "build_summary.csv", _config_inputs(args), lines)
    print(f"dictionaries in {cache}")
    return 0


def cmd_estimate(cfg: RunConfig, args: argparse.Namespace) -> int:
    dicts, meas, inputs = _load_inputs(cfg, args)
    result = _estimate(cfg, dicts, meas)
    out = cfg.out_dir()
    _write_table(out / "weights.csv", inputs, _weights_lines(result))
    _write_table(out / "transfer.csv", inputs, _transfer_lines(result))
    _write_table(out / "estimate_summary.txt", inputs, _estimate_summary(result))
    for line in _estimate_summary(result):
        print(line)
    return 0


def cmd_fit(cfg: RunConfig, args: argparse.Namespace) -> int:
    dicts, meas, inputs = _load_inputs(cfg, args)
    result = _estimate(cfg, dicts, meas)
    mats = _aligned_matrices(dicts, meas)
    model = fitted(result, mats, meas)
    fitted_set = MeasurementSet(
        meas.drive_fields, meas.viscosities, meas.harmonics, model
    )
    summary = ["fitted waveform NRMSE (percent of measured range):"]
    for k in range(meas.n_drive):
        fd = meas.drive_fields[k].fd
        for j in range(meas.n_visc):
            err = waveform_nrmse(meas.spectra[k][j], model[k][j], fd)
            summary.append(
                f"  k={k} eta={meas.viscosities[j]:g} mPa.s: {err:.4f}%"
            )
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_measurement_csv(fitted_set, out / "fitted.csv", _input_manifest(inputs))
    _write_table(out / "fit_summary.txt", inputs, _estimate_summary(result) + summary)
    for line in summary:
        print(line)
    return 0


def cmd_predict(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.excluded is None:
        raise CliError("config must set 'excluded', the viscosity to predict at")
    dicts, meas, inputs = _load_inputs(cfg, args)
    try:
        j_target = dicts.viscosities.index(cfg.excluded)
    except ValueError:
        raise CliError(
            f"viscosity {cfg.excluded:g} has no dictionaries in the cache "
            f"(available: {', '.join(f'{e:g}' for e in dicts.viscosities)})"
        ) from None
    result = _estimate(cfg, dicts, meas)
    lines = ["k,m,re,im"]
    summary = [f"predicted spectra at eta={cfg.excluded:g} mPa.s"]
    measured_j = (
        meas.viscosities.index(cfg.excluded) if cfg.excluded in meas.viscosities else None
    )
    for k in range(meas.n_drive):
        hs_dict = dicts.harmonics(k)
        rows = [hs_dict.index(m) for m in meas.harmonics[k]]
        atoms = dicts.get(k, j_target).columns[rows]
        spec = predict(result, k, atoms)
        for m, v in zip(spec.harmonics, spec.values):
            lines.append(f"{k},{m},{float(v.real)!r},{float(v.imag)!r}")
        if measured_j is not None:
            err = waveform_nrmse(
                meas.spectra[k][measured_j], spec, meas.drive_fields[k].fd
            )
            summary.append(f"  k={k}: NRMSE vs measured {err:.4f}%")
    out = cfg.out_dir()
    _write_table(out / "predicted.csv", inputs, lines)
    _write_table(out / "predict_summary.txt", inputs, summary)
    for line in summary:
        print(line)
    return 0


def cmd_loo(cfg: RunConfig, args: argparse.Namespace) -> int:
    dicts, meas, inputs = _load_inputs(cfg, args)
    if meas.n_visc < 2:
        raise CliError("leave-one-out needs at least two measured viscosities")
    mats = _aligned_matrices(dicts, meas)
    reports = leave_one_out(
        mats,
        meas,
        dicts.grid,
        max_iter=cfg.max_iter,
        fixed_iterations=cfg.fixed_iterations,
    )
    full = _estimate(cfg, dicts, meas)
    full_marg = marginals(full.weights)
    out = cfg.out_dir()
    summary = ["fold,eta," + ",".join(f"nrmse_k{k}" for k in range(meas.n_drive))
               + ",nwd_dc,nwd_dh,nwd_k"]
    for rep in reports:
        lines = ["k,m,re_pred,im_pred,re_meas,im_meas"]
        for k in range(meas.n_drive):
            pred = rep.predicted[k]
            measured = rep.measured[k]
            for i, m in enumerate(pred.harmonics):
                lines.append(
                    f"{k},{m},{float(pred.values[i].real)!r},"
                    f"{float(pred.values[i].imag)!r},"
                    f"{float(measured.values[i].real)!r},"
                    f"{float(measured.values[i].imag)!r}"
                )
        _write_table(out / f"loo_fold{rep.viscosity_index}.csv", inputs, lines)
        fold_marg = marginals(rep.estimation.weights)
        dists = [nwd(full_marg[ax], fold_marg[ax]) for ax in ("dc", "dh", "k")]
        summary.append(
            f"{rep.viscosity_index},{rep.viscosity:g},"
            + ",".join(f"{e:.4f}" for e in rep.nrmse_time)
            + ","
            + ",".join(f"{d:.4f}" for d in dists)
        )
    _write_table(out / "loo_summary.csv", inputs, summary)
    for line in summary:
        print(line)
    return 0


def cmd_synth_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not cfg.generator:
        raise CliError("config must set 'generator' atoms (dc,ds,k,weight; ...)")
    cache = cfg.cache_dir()
    dicts = load_set(cache)
    grid = dicts.grid
    x_true = np.zeros(grid.n_atoms)
    for dc, ds, k_an, w in cfg.generator:
        if w < 0.0:
            raise CliError("generator weights must be nonnegative")
        try:
            x_true[grid.index_of(ParticleParams(dc, ds, k_an))] += w
        except ValueError as exc:
            raise CliError(str(exc)) from None
    truth_w = WeightVector(grid, x_true)
    spec = SyntheticSpec(
        truth_w,
        snr=cfg.snr,
        seed=cfg.seed,
        threshold=cfg.threshold,
        averages=cfg.averages,
    )
    meas, truth = synth_generate(spec, dicts)
    result = _estimate(cfg, dicts, meas)
    mats = _aligned_matrices(dicts, meas)
    model = fitted(result, mats, meas)

    inputs = _config_inputs(args) + [
        cache / cache_name(k, j)
        for k in range(len(dicts.drive_fields))
        for j in range(len(dicts.viscosities))
    ]
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_measurement_csv(meas, out / "synth_measurements.csv", _input_manifest(inputs))

    truth_marg = marginals(truth.weights)
    est_marg = marginals(result.weights)
    lines = ["metric,where,value"]
    summary = [f"snr: {'inf' if cfg.snr is None else f'{cfg.snr:g}'}"]
    for axis in ("dc", "dh", "k"):
        d = nwd(truth_marg[axis], est_marg[axis])
        lines.append(f"nwd,{axis},{float(d)!r}")
        summary.append(f"NWD {axis}: {d:.5f}")
    for k in range(meas.n_drive):
        fd = meas.drive_fields[k].fd
        for j in range(meas.n_visc):
            err = waveform_nrmse(meas.spectra[k][j], model[k][j], fd)
            lines.append(f"nrmse,k{k}_eta{meas.viscosities[j]:g},{float(err)!r}")
            summary.append(
                f"fitted NRMSE k={k} eta={meas.viscosities[j]:g}: {err:.4f}%"
            )
    _write_table(out / "synth_metrics.csv", inputs, lines)
    _write_table(
        out / "synth_summary.txt", inputs, summary + _estimate_summary(result)
    )
    for line in summary:
        print(line)
    return 0


def cmd_metrics(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.measurements is None:
        raise CliError("config must set 'measurements' (harmonic-domain CSV)")
    meas_path = Path(cfg.measurements)
    if not meas_path.exists():
        raise CliError(f"measurement file not found: {meas_path}")
    meas = read_measurement_csv(meas_path)
    inputs = _config_inputs(args) + [meas_path]
    ref = None
    if cfg.reference is not None:
        ref_path = Path(cfg.reference)
        if not ref_path.exists():
            raise CliError(f"reference file not found: {ref_path}")
        ref = read_measurement_csv(ref_path)
        inputs.append(ref_path)
    header = "k,j,eta,fd,harmonics,power,t_zc"
    if ref is not None:
        header += ",nrmse"
    lines = [header]
    for k in range(meas.n_drive):
        fd = meas.drive_fields[k].fd
        for j in range(meas.n_visc):
            spec = meas.spectra[k][j]
            sig = synthesize_time(spec, 200.0 * fd, fd)
            power = float(np.sum(np.abs(spec.values) ** 2))
            t_zc = zero_crossing_time(sig)
            row = (
                f"{k},{j},{meas.viscosities[j]:g},{fd:g},"
                f"{spec.harmonics.m},{power!r},{float(t_zc)!r}"
            )
            if ref is not None:
                try:
                    other = ref.spectra[k][j]
                except IndexError:
                    raise CliError(
                        "reference layout does not match the measurements"
                    ) from None
                row += f",{float(waveform_nrmse(spec, other, fd))!r}"
            lines.append(row)
    _write_table(cfg.out_dir() / "metrics.csv", inputs, lines)
    for line in lines:
        print(line)
    return 0


# -- entry point ----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="structured text config file")
    common.add_argument("--seed", type=int, metavar="U64", help="override the RNG seed")
    common.add_argument(
        "--workers", type=int, metavar="N", help="simulation worker processes"
    )
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument(
        "--fixed-iterations",
        action="store_true",
        help="run the full iteration budget without early stopping",
    )
    common.add_argument(
        "--dry-run",
        action="store_true",
        help="report job counts without simulating",
    )
    parser = argparse.ArgumentParser(
        prog="mnpdict",
        description="Dictionary-based nanoparticle spectra: build, estimate, predict.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "build-dict": (cmd_build_dict, "simulate or resume the dictionary cache"),
        "estimate": (cmd_estimate, "estimate weights and transfer functions"),
        "fit": (cmd_fit, "estimate, then write fitted spectra and errors"),
        "predict": (cmd_predict, "render spectra at a chosen viscosity"),
        "loo": (cmd_loo, "leave-one-out sweep over measured viscosities"),
        "synth-validate": (cmd_synth_validate, "ground-truth synthetic pipeline"),
        "metrics": (cmd_metrics, "recompute metric tables from stored spectra"),
        "info": (cmd_info, "show config, cache and package details"),
    }
    for name, (func, help_text) in handlers.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args)
        return args.func(cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        AtomSimulationError,
        DictionaryFormatError,
        MeasurementFormatError,
        NnlsNonConvergence,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
