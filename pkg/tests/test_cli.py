"""Command-line interface: config parsing, commands, output files."""

import numpy as np
import pytest

from mnpdict.cli import CACHE_ENV_VAR, CliError, main, parse_config
from mnpdict.magmodel import ModelKind
from mnpdict.signalio import read_measurement_csv

CONFIG_TEMPLATE = """\
# synthetic smoke-test run
dc = 18,22
ds = 40
k = 4,6
fd = 250,1000
bp = 10
eta = 0.89,2.08
harmonics = 9
model = langevin
ensemble = 50
seed = 3
max_iter = 200
generator = 22,40,6,0.7
cache = {cache}
out = {out}
"""


@pytest.fixture()
def workspace(tmp_path):
    cache = tmp_path / "dicts"
    out = tmp_path / "out"
    config = tmp_path / "run.cfg"
    config.write_text(CONFIG_TEMPLATE.format(cache=cache, out=out))
    return config, cache, out


def run(config, *extra):
    return main([*extra, "--config", str(config)])


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.harmonics == 101
        assert cfg.max_iter == 2000
        assert cfg.model is ModelKind.COUPLED
        assert cfg.threshold == 15.0
        assert cfg.snr is None
        assert cfg.averages == 1
        assert parse_config("averages = 480\n").averages == 480

    def test_range_syntax_expands_linearly(self):
        cfg = parse_config("dc = 5:30:26\nds = 15:100:18\nk = 1:10:10\n")
        assert cfg.dc == tuple(float(v) for v in range(5, 31))
        assert cfg.ds == tuple(float(v) for v in range(15, 101, 5))
        assert cfg.k == tuple(float(v) for v in range(1, 11))

    def test_unknown_key_rejected(self):
        with pytest.raises(CliError, match="unknown config key 'frobnicate'"):
            parse_config("frobnicate = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(CliError, match="duplicate config key"):
            parse_config("seed = 1\nseed = 2\n")

    def test_bad_value_reports_line(self):
        with pytest.raises(CliError, match=":2: bad value for 'ensemble'"):
            parse_config("seed = 1\nensemble = many\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(CliError, match="expected 'key = value'"):
            parse_config("just some words\n")

    def test_model_names(self):
        assert parse_config("model = blocked\n").model is ModelKind.BLOCKED
        with pytest.raises(CliError, match="unknown model"):
            parse_config("model = quantum\n")

    def test_generator_atoms(self):
        cfg = parse_config("generator = 20,40,6,1.0; 18,30,4,0.5\n")
        assert cfg.generator == ((20.0, 40.0, 6.0, 1.0), (18.0, 30.0, 4.0, 0.5))
        with pytest.raises(CliError, match="dc,ds,k,weight"):
            parse_config("generator = 20,40,6\n")


class TestArgparseContract:
    def test_help_exits_zero(self, capsys):
        for argv in (["--help"], ["build-dict", "--help"], ["estimate", "--help"]):
            with pytest.raises(SystemExit) as info:
                main(argv)
            assert info.value.code == 0
        out = capsys.readouterr().out
        assert "--fixed-iterations" in out
        assert "--dry-run" in out

    def test_unknown_flag_exits_nonzero(self):
        with pytest.raises(SystemExit) as info:
            main(["estimate", "--frobnicate"])
        assert info.value.code != 0

    def test_missing_config_file_fails(self, capsys):
        assert main(["info", "--config", "/nonexistent/run.cfg"]) == 1
        assert "config file not found" in capsys.readouterr().err


class TestDryRunAndInfo:
    def test_dry_run_prints_job_counts(self, workspace, capsys):
        config, cache, _ = workspace
        assert run(config, "build-dict", "--dry-run") == 0
        out = capsys.readouterr().out
        assert "atoms: 4" in out
        assert "simulations: 16" in out
        assert not cache.exists()

    def test_full_survey_counts_without_simulating(self, tmp_path, capsys):
        config = tmp_path / "survey.cfg"
        config.write_text(
            "dc = 5:30:26\nds = 15:100:18\nk = 1:10:10\n"
            "fd = 250,1000,2000\nbp = 10,15\n"
            "eta = 0.89,1.45,2.08,3.32,8.31,15.33\n"
        )
        assert run(config, "build-dict", "--dry-run") == 0
        out = capsys.readouterr().out
        assert "atoms: 4680" in out
        assert "simulations: 168480" in out

    def test_info_reports_grid_and_cache(self, workspace, capsys):
        config, _, _ = workspace
        assert run(config, "info") == 0
        out = capsys.readouterr().out
        assert "mnpdict" in out
        assert "= 4 atoms" in out
        assert "0 dictionaries" in out


class TestPipeline:
    @pytest.fixture()
    def built(self, workspace, capsys):
        config, cache, out = workspace
        assert run(config, "build-dict") == 0
        capsys.readouterr()
        return config, cache, out

    def test_build_writes_cache_and_summary(self, built):
        config, cache, out = built
        assert len(list(cache.glob("dict_k*_j*.bin"))) == 4
        summary = (out / "build_summary.csv").read_text()
        assert summary.count("\n") >= 5
        assert "# input,run.cfg," in summary

    def test_rebuild_resumes_with_identical_checksums(self, built, capsys):
        config, _, out = built
        first = (out / "build_summary.csv").read_text()
        assert run(config, "build-dict") == 0
        assert (out / "build_summary.csv").read_text() == first

    @pytest.fixture()
    def synth(self, built, capsys):
        config, cache, out = built
        assert run(config, "synth-validate") == 0
        capsys.readouterr()
        meas_path = out / "synth_measurements.csv"
        config2 = config.with_name("run2.cfg")
        config2.write_text(
            config.read_text() + f"measurements = {meas_path}\n"
        )
        return config2, cache, out

    def test_synth_validate_emits_metric_tables(self, synth):
        # weight marginals are not identifiable from the closed-form model
        # (columns do not depend on viscosity), so only the NWD table shape
        # and the fit quality are checked here
        _, _, out = synth
        metrics = (out / "synth_metrics.csv").read_text().splitlines()
        values = {}
        for line in metrics:
            if line.startswith(("nwd,", "nrmse,")):
                kind, where, value = line.split(",")
                values[kind, where] = float(value)
        for axis in ("dc", "dh", "k"):
            assert 0.0 <= values["nwd", axis] <= 1.0
        nrmse_values = [v for (kind, _), v in values.items() if kind == "nrmse"]
        assert len(nrmse_values) == 4
        for v in nrmse_values:
            assert v < 0.1

    def test_estimate_writes_weights_and_transfer(self, synth, capsys):
        config2, _, out = synth
        assert run(config2, "estimate") == 0
        capsys.readouterr()
        weights = (out / "weights.csv").read_text().splitlines()
        rows = [l for l in weights if not l.startswith("#")]
        assert rows[0] == "index,dc,ds,k,weight"
        assert len(rows) == 1 + 4
        total = sum(float(r.split(",")[4]) for r in rows[1:])
        assert total > 0.0
        transfer = (out / "transfer.csv").read_text().splitlines()
        t_rows = [l for l in transfer if not l.startswith("#") and l[0].isdigit()]
        assert len(t_rows) == 2 * 4
        assert any("# input," in l for l in weights)
        assert (out / "estimate_summary.txt").exists()

    def test_fit_emits_small_errors_on_synthetic_data(self, synth, capsys):
        config2, _, out = synth
        assert run(config2, "fit") == 0
        capsys.readouterr()
        fitted_set = read_measurement_csv(out / "fitted.csv")
        meas = read_measurement_csv(out / "synth_measurements.csv")
        assert fitted_set.harmonics == meas.harmonics
        for k in range(2):
            for j in range(2):
                diff = np.abs(
                    fitted_set.spectra[k][j].values - meas.spectra[k][j].values
                )
                assert diff.max() < 1e-8
        summary = (out / "fit_summary.txt").read_text()
        assert "NRMSE" in summary

    def test_predict_at_trained_viscosity_matches_fit(self, synth, capsys):
        config2, _, out = synth
        assert run(config2, "fit") == 0
        config3 = config2.with_name("run3.cfg")
        config3.write_text(config2.read_text() + "excluded = 2.08\n")
        assert run(config3, "predict") == 0
        capsys.readouterr()
        fitted_set = read_measurement_csv(out / "fitted.csv")
        j = fitted_set.viscosities.index(2.08)
        predicted = {}
        for line in (out / "predicted.csv").read_text().splitlines():
            if line.startswith("#") or line.startswith("k,"):
                continue
            k_s, m_s, re_s, im_s = line.split(",")
            predicted[int(k_s), int(m_s)] = complex(float(re_s), float(im_s))
        for k in range(2):
            spec = fitted_set.spectra[k][j]
            for m, v in zip(spec.harmonics, spec.values):
                assert abs(predicted[k, m] - v) < 1e-12 * max(1.0, abs(v))

    def test_predict_requires_known_viscosity(self, synth, capsys):
        config2, _, _ = synth
        config3 = config2.with_name("run4.cfg")
        config3.write_text(config2.read_text() + "excluded = 7.7\n")
        assert run(config3, "predict") == 1
        assert "no dictionaries in the cache" in capsys.readouterr().err

    def test_loo_emits_one_report_per_viscosity(self, synth, capsys):
        config2, _, out = synth
        assert run(config2, "loo") == 0
        capsys.readouterr()
        assert (out / "loo_fold0.csv").exists()
        assert (out / "loo_fold1.csv").exists()
        summary = [
            l
            for l in (out / "loo_summary.csv").read_text().splitlines()
            if not l.startswith("#")
        ]
        assert summary[0].startswith("fold,eta,nrmse_k0,nrmse_k1")
        assert len(summary) == 1 + 2

    def test_metrics_tables(self, synth, capsys):
        config2, _, out = synth
        assert run(config2, "fit") == 0
        config3 = config2.with_name("run5.cfg")
        config3.write_text(config2.read_text() + f"reference = {out / 'fitted.csv'}\n")
        assert run(config3, "metrics") == 0
        capsys.readouterr()
        lines = [
            l
            for l in (out / "metrics.csv").read_text().splitlines()
            if not l.startswith("#")
        ]
        assert lines[0] == "k,j,eta,fd,harmonics,power,t_zc,nrmse"
        assert len(lines) == 1 + 4
        for line in lines[1:]:
            parts = line.split(",")
            assert float(parts[5]) > 0.0
            assert float(parts[7]) < 0.1


class TestOverrides:
    def test_environment_variable_overrides_cache(self, workspace, capsys, monkeypatch):
        config, cache, out = workspace
        assert run(config, "build-dict") == 0
        capsys.readouterr()
        moved = cache.with_name("moved_dicts")
        cache.rename(moved)
        monkeypatch.setenv(CACHE_ENV_VAR, str(moved))
        assert run(config, "synth-validate") == 0

    def test_seed_flag_overrides_config(self, workspace, capsys):
        config, _, out = workspace
        assert run(config, "build-dict") == 0
        noisy = config.with_name("noisy.cfg")
        noisy.write_text(config.read_text() + "snr = 50\n")
        assert run(noisy, "synth-validate") == 0
        first = (out / "synth_measurements.csv").read_text()
        assert run(noisy, "synth-validate") == 0
        assert (out / "synth_measurements.csv").read_text() == first
        assert run(noisy, "synth-validate", "--seed", "99") == 0
        assert (out / "synth_measurements.csv").read_text() != first

    def test_missing_cache_reports_config_fix(self, tmp_path, capsys):
        config = tmp_path / "bare.cfg"
        config.write_text("measurements = nowhere.csv\n")
        assert run(config, "estimate") == 1
        err = capsys.readouterr().err
        assert "no dictionary cache configured" in err
        assert CACHE_ENV_VAR in err
