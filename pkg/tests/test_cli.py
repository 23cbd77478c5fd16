import csv
import io
import math

import numpy as np
import pytest

from optoqubit import __version__
from optoqubit.cli import ScenarioConfig, load_config, main, run_figure, run_scenario
from optoqubit.errors import ConfigError
from optoqubit.scenarios import fig3ab_curves


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in lines if not l.startswith("#")))))
    return header, rows


def test_steady_single_row(tmp_path):
    assert main(["steady", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "steady.csv")
    assert len(rows) == 1
    assert float(rows[0]["F_A"]) == pytest.approx(0.98, abs=0.01)
    assert header[0] == f"# optoqubit {__version__}"
    assert "# zeta = 0.2" in header
    assert (tmp_path / "manifest.txt").exists()


def test_numbers_use_twelve_significant_digits(tmp_path):
    main(["steady", "--out", str(tmp_path)])
    _, rows = read_csv(tmp_path / "steady.csv")
    assert rows[0]["F_A"] == format(float(rows[0]["F_A"]), ".12g")
    assert b"\r" not in (tmp_path / "steady.csv").read_bytes()


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep", "--set", "grid=0.1,0.3", "--fock-dim", "5"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    for name in ("sweep.csv", "manifest.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_file_and_env_override(tmp_path, monkeypatch):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[sweep]\naxis = c_m\ngrid = 10, 1000\ntargets = A\nzeta = 0.3\nfock_dim = 5\n")
    monkeypatch.setenv("OPTOQUBIT_OUT", str(tmp_path / "env"))
    assert main(["sweep", "--config", str(cfg)]) == 0
    _, rows = read_csv(tmp_path / "env" / "sweep.csv")
    assert [r["param_value"] for r in rows] == ["10", "1000"]
    assert float(rows[1]["fidelity_A"]) > float(rows[0]["fidelity_A"])


def test_field_level_validation(capsys):
    with pytest.raises(ConfigError) as exc:
        load_config("steady", overrides={"fock_dim": "3"}).validate()
    assert exc.value.field == "fock_dim"
    with pytest.raises(ConfigError) as exc:
        load_config("sweep", overrides={"grid": "0.1, x"})
    assert exc.value.field == "grid"
    with pytest.raises(ConfigError) as exc:
        load_config("steady", overrides={"bogus": "1"})
    assert exc.value.field == "bogus"
    with pytest.raises(ConfigError):
        ScenarioConfig("nonsense").validate()
    assert main(["steady", "--set", "jump=sp-b"]) == 2
    assert "jump" in capsys.readouterr().err


def test_missing_section(tmp_path):
    cfg = tmp_path / "x.ini"
    cfg.write_text("[steady]\nzeta = 0.1\n")
    with pytest.raises(ConfigError):
        load_config("sweep", str(cfg))


def test_flagged_majority_gives_nonzero_exit(tmp_path):
    rc = main(["sweep", "--out", str(tmp_path), "--fock-dim", "6", "--set", "grid=0.95,0.97",
               "--set", "check_fock_dim=11", "--set", "targets=A"])
    assert rc != 0
    assert "flagged_fraction 1" in (tmp_path / "manifest.txt").read_text()


def test_strobe_manifest_records_failed_condition(tmp_path):
    rc = main(["strobe", "--out", str(tmp_path), "--set", "tau_scale=1.03", "--set", "t_end=5"])
    assert rc == 0
    text = (tmp_path / "manifest.txt").read_text()
    assert "condition (i) integer period: fail" in text
    assert "condition (ii) elimination: pass" in text
    header, rows = read_csv(tmp_path / "strobe.csv")
    assert {"t", "qubit_excitation", "occupation_1", "full_vs_elim_error"} <= set(rows[0])
    assert any(h.startswith("# tau = ") for h in header)


def test_plan_file_has_23_steps(tmp_path):
    assert main(["plan", "--out", str(tmp_path), "--set", "simulate=false"]) == 0
    text = (tmp_path / "plan.txt").read_text()
    steps = [l.split() for l in text.splitlines() if not l.startswith("#")]
    assert sum(1 for s in steps if s[1] == "coupling") == 23
    assert "steps_per_oscillator 2,11,10" in (tmp_path / "manifest.txt").read_text()


def test_unknown_figure(tmp_path):
    with pytest.raises(ConfigError):
        run_figure("fig9", tmp_path)
    with pytest.raises(SystemExit):
        main(["figure", "fig9"])


def test_workers_flag(tmp_path):
    assert main(["sweep", "--out", str(tmp_path), "--workers", "2", "--set", "grid=0.1,0.2", "--fock-dim", "5"]) == 0
    cfg = load_config("steady")
    cfg.workers = 0
    with pytest.raises(ConfigError):
        run_scenario(cfg)


def test_fig1_plateau(tmp_path):
    run_figure("fig1", tmp_path)
    _, rows = read_csv(tmp_path / "fig1_cq_inf.csv")
    assert float(rows[-1]["fidelity_A"]) == pytest.approx(4 / 9, abs=0.01)


def column(tab, name):
    return np.array(tab.column(name), dtype=float)


def test_fig3a_point():
    tab = fig3ab_curves(10, grid=[0.2], check_fock_dim=None, inset_fock_dim=0)["fig3ab_c_100"]
    assert column(tab, "fidelity_A")[0] == pytest.approx(0.98, abs=0.01)


def test_fig3b_maximum():
    grid = np.round(np.arange(0.05, 0.601, 0.05), 10)
    tab = fig3ab_curves(10, grid=grid, check_fock_dim=None, inset_fock_dim=0)["fig3ab_c_100"]
    alpha = column(tab, "fidelity_m")
    k = int(np.argmax(alpha))
    assert alpha[k] == pytest.approx(0.83, abs=0.02)
    assert math.isclose(grid[k], 0.25, abs_tol=0.05)
