import csv
import json
import math

import numpy as np
import pytest

from gkpsim import cli
from gkpsim.errors import ConfigError


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def sim_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = cli.main(
        ["simulate", "--delta", "0.3,0.4", "--rounds", "3", "--trajectories", "100", "--seed", "42",
         "--workers", "1", "--out", str(out)]
    )
    return code, out


def test_simulate_rows(sim_run):
    code, out = sim_run
    assert code == 0
    rows = read_rows(out / "results.csv")
    assert list(rows[0]) == cli.RESULT_COLUMNS
    assert len(rows) == 2 * 3 * 5
    assert {r["decoder"] for r in rows} == set(cli.dec.DECODERS)
    for r in rows:
        p, n = float(r["p_logical"]), int(r["n_traj"])
        assert 0 <= p <= 1
        assert float(r["stderr"]) == pytest.approx(math.sqrt(p * (1 - p) / n), rel=1e-8, abs=1e-12)
    mem = [r for r in rows if r["decoder"] == "memoryless"]
    assert all(r["feedback"] == "memoryless" for r in mem)


def test_simulate_artifacts(sim_run):
    _, out = sim_run
    rounds = read_rows(out / "rounds.csv")
    assert list(rounds[0]) == cli.ROUND_COLUMNS
    assert len(rounds) == 2 * 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["seed"] == 42
    assert set(man["versions"]) == {"gkpsim", "python", "numpy", "scipy"}
    for name in ("plot_sim.gp", "plot_photons.gp", "plot_eff_sq.gp"):
        text = (out / name).read_text()
        assert "results.csv" in text or "rounds.csv" in text


def test_simulate_deterministic_across_workers(sim_run, tmp_path):
    _, out = sim_run
    code = cli.main(
        ["simulate", "--delta", "0.3,0.4", "--rounds", "3", "--trajectories", "100", "--seed", "42",
         "--workers", "2", "--out", str(tmp_path)]
    )
    assert code == 0
    assert (tmp_path / "results.csv").read_bytes() == (out / "results.csv").read_bytes()


def test_run_coherent_seed_dependence():
    a = cli.run_coherent(0.3, "none", ["mld"], 2, 3, 1)[0]
    b = cli.run_coherent(0.3, "none", ["mld"], 2, 3, 1)[0]
    c = cli.run_coherent(0.3, "none", ["mld"], 2, 3, 2)[0]
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# campaign\ndelta = 0.3\nrounds = 2\ntrajectories = 100\nseed = 7\ndecoders = mld, passive\n")
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out / "results.csv")
    assert len(rows) == 2 * 2
    assert {r["seed"] for r in rows} == {"7"}


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("delta = 0.3\nrounds = 5\n")
    p = cli.build_parser()
    args = p.parse_args(["simulate", "--config", str(cfg), "--rounds", "2"])
    c = cli.campaign_from_args(args)
    assert c.rounds == 2 and c.deltas == [0.3]


@pytest.mark.parametrize(
    "text",
    ["delta = 0.3\nbogus = 1\n", "just a line\n", "rounds = many\n", "trajectories = 10\n", "delta = 1.5\n"],
)
def test_bad_config_exit_2(tmp_path, text, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "none.cfg")]) == 2


def test_bad_decoder_exit_2(tmp_path):
    assert cli.main(["simulate", "--decoders", "mld,oracle", "--trajectories", "100", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    assert cli.main(["fock", "--delta", "0.3", "--kinds", "gkp0", "--n-max", "10", "--out", str(tmp_path)]) == 3
    assert "numerical" in capsys.readouterr().err


def test_workers_env(monkeypatch):
    monkeypatch.setenv("GKPSIM_WORKERS", "3")
    assert cli.default_workers() == 3
    monkeypatch.setenv("GKPSIM_WORKERS", "x")
    with pytest.raises(ConfigError):
        cli.default_workers()


def test_stochastic_command(tmp_path):
    assert cli.main(["stochastic", "--delta", "0.3", "--rounds", "2", "--trajectories", "100", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "stoch_compare.csv")
    assert list(rows[0]) == cli.RESULT_COLUMNS + ["sigma0"]
    assert len(rows) == 3 * 2
    sig = sorted({r["sigma0"] for r in rows if r["decoder"] == "mld_stochastic"}, key=float)
    assert [float(s) for s in sig] == pytest.approx([0.3 / math.sqrt(2), 0.3])
    assert (tmp_path / "plot_stoch_compare.gp").exists()


def test_fock_command(tmp_path):
    assert cli.main(["fock", "--delta", "0.3", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "fock.csv")
    assert {r["kind"] for r in rows} == {"gkp0", "gkp1", "sensor"}
    text = (tmp_path / "plot_fock.gp").read_text()
    assert "multiplot layout 3,1" in text


def test_loss_command(tmp_path, capsys):
    assert cli.main(["loss", "--kappa-t", "0,0.1", "--out", str(tmp_path)]) == 0
    assert len(read_rows(tmp_path / "loss.csv")) == 2
    assert "P(correct)" in capsys.readouterr().out


def test_codes_command(tmp_path, capsys):
    assert cli.main(["codes", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "codes.csv")
    names = [r["check"] for r in rows]
    assert "bloch_messiah_xi" in names and "kerr_cat_overlap" in names
    out = capsys.readouterr().out
    assert out.count("PASS") + out.count("FAIL") == len(rows)


def test_code_checks_content():
    rows = {r[0]: r for r in cli.code_checks()}
    assert rows["kitten_ideal_g0.01"][3]
    assert rows["two_mode_g0.01"][3]
    assert rows["bloch_messiah_error"][3]
    # the first sweet spot sits at 2.365, outside 2.34 +- 0.01
    assert not rows["cat_sweet_spot"][3]


def test_plot_schema_mismatch(tmp_path, capsys):
    path = tmp_path / "loss.csv"
    path.write_text("kappa_t,p_correct,expectation_re,expectation_im\n0,1,1,0\n")
    with pytest.raises(ConfigError):
        cli.emit_plot_script(path, "sim")
    assert cli.main(["plot", str(path), "--figure", "photons"]) == 2
    assert cli.main(["plot", str(path), "--figure", "loss"]) == 0
    assert (tmp_path / "plot_loss.gp").exists()


def test_plot_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        cli.emit_plot_script(tmp_path / "nope.csv", "loss")


def test_trial_stats_rows():
    est = np.zeros((4, 1, 3))
    est[:, 0, 1] = [0.1, 0.2, 0.3, 0.4]
    rows = cli.stats_rows(0.3, "none", ["mld"], est, 1)
    assert len(rows) == 2
    assert rows[0].p_logical == pytest.approx(0.25)
    assert rows[0].M == 1
