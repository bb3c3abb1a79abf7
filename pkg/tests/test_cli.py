import json
import shutil
from importlib import resources

import pytest

from cryosqueeze import cli
from cryosqueeze import core_model as cm
from cryosqueeze.config import config_to_dict, parse_config

DATA = resources.files("cryosqueeze.data")


def data_path(tmp_path, name):
    dest = tmp_path / name
    dest.write_bytes(DATA.joinpath(name).read_bytes())
    return dest


def base_config(**overrides):
    doc = json.loads(DATA.joinpath("config_293k.json").read_text())
    for dotted, value in overrides.items():
        section, key = dotted.split("__")
        doc.setdefault(section, {})[key] = value
    return doc


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, "--json", *argv)
    return code, (json.loads(out) if out else None), err


def error_doc(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_simulate_writes_files(tmp_path, capsys):
    cfg = data_path(tmp_path, "config_293k.json")
    code, doc, _ = run_json(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "out"))
    assert code == 0
    assert (tmp_path / "out" / "model.csv").exists()
    assert (tmp_path / "out" / "synthetic.csv").exists()
    assert doc["q_factor"] == pytest.approx(1e5)


def test_simulate_without_seed_writes_model_only(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(synth__seed=None))
    code, doc, _ = run_json(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
    assert code == 0
    assert list(doc["files"]) == ["model"]


def test_simulate_temperature_ratio(tmp_path, capsys):
    peaks = {}
    for name in ("config_293k.json", "config_20k.json"):
        cfg = data_path(tmp_path, name)
        code, doc, _ = run_json(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
        assert code == 0
        peaks[name] = doc["peak_height"]
    assert peaks["config_20k.json"] / peaks["config_293k.json"] == pytest.approx(20 / 293, rel=1e-12)


def test_simulate_squeezed_floor(tmp_path, capsys):
    floors = []
    for db in (0.0, 4.8):
        cfg = write_config(tmp_path, base_config(squeezing__db=db))
        code, doc, _ = run_json(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
        assert code == 0
        floors.append(doc["floor"])
    assert floors[1] / floors[0] == pytest.approx(0.3311311214825911, rel=1e-12)


def test_simulate_without_power_notes_no_transfer(tmp_path, capsys):
    doc = base_config(interferometer__p_in_w=0.0, synth__unit="shot-normalized")
    cfg = write_config(tmp_path, doc)
    code, out, _ = run_json(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
    assert code == 0
    assert out["note"] == "no signal transfer"
    assert out["floor"] == 1.0


def test_simulate_displacement_without_power_is_validation_error(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(interferometer__p_in_w=0.0))
    code, _, err = run(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
    assert code == 2
    assert "shot-normalized" in error_doc(err)["message"]


def test_simulate_bad_config_value(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config(interferometer__eta=1.2))
    code, out, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 2 and out == ""
    doc = error_doc(err)
    assert doc["error"] == "validation" and doc["exit_code"] == 2
    assert "interferometer.eta must be in [0,1]" in doc["message"]


def test_simulate_reproducible_is_byte_identical(tmp_path, capsys):
    cfg = data_path(tmp_path, "config_293k.json")
    outputs = []
    for run_dir in ("a", "b"):
        code, out, _ = run(capsys, "--reproducible", "--json", "simulate", "--config", str(cfg),
                           "--out-dir", str(tmp_path / run_dir))
        assert code == 0
        outputs.append(out.replace(str(tmp_path / run_dir), ""))
    assert outputs[0] == outputs[1]
    for name in ("model.csv", "synthetic.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bundled_fixtures_regenerate_identically(tmp_path, capsys):
    cfg = data_path(tmp_path, "config_293k.json")
    code, _, _ = run(capsys, "--reproducible", "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
    assert code == 0
    assert (tmp_path / "synthetic.csv").read_bytes() == DATA.joinpath("fixture_293k_seed42.csv").read_bytes()
    assert (tmp_path / "model.csv").read_bytes() == DATA.joinpath("fixture_293k_model.csv").read_bytes()


def test_timestamps_present_without_reproducible(tmp_path, capsys):
    cfg = data_path(tmp_path, "config_293k.json")
    run(capsys, "simulate", "--config", str(cfg), "--out-dir", str(tmp_path))
    assert "# created = " in (tmp_path / "model.csv").read_text()


def test_dump_config(tmp_path, capsys):
    cfg = data_path(tmp_path, "config_293k.json")
    code, out, _ = run(capsys, "simulate", "--dump-config", "--config", str(cfg))
    assert code == 0
    dumped = json.loads(out)
    assert dumped["fit"]["space"] == "log"
    assert parse_config(dumped) == parse_config(json.loads(cfg.read_text()))
    assert config_to_dict(parse_config(dumped)) == dumped


def test_fit_bundled_fixture(tmp_path, capsys):
    spectrum = data_path(tmp_path, "fixture_293k_seed42.csv")
    cfg = data_path(tmp_path, "config_293k.json")
    report = tmp_path / "report.json"
    code, doc, _ = run_json(capsys, "--reproducible", "fit", str(spectrum), "--report", str(report),
                            "--config", str(cfg))
    assert code == 0
    saved = json.loads(report.read_text())
    assert saved == doc
    assert list(saved)[:4] == ["schema", "spectrum", "unit", "params"]
    assert "created" not in saved
    assert saved["converged"] is True
    assert saved["params"]["f_m"] == pytest.approx(400e3, rel=1e-4)
    assert saved["q_factor"] == pytest.approx(1e5, rel=0.1)
    t = saved["temperature"]
    assert abs(t["value_k"] - 293.0) < 4 * t["uncertainty_k"]
    assert saved["inferred_squeezing_db"] == pytest.approx(0.0, abs=0.2)
    assert "passive optical loss" in saved["limitations"]


def test_fit_noiseless_fixture_without_config(tmp_path, capsys):
    spectrum = data_path(tmp_path, "fixture_293k_model.csv")
    code, doc, _ = run_json(capsys, "fit", str(spectrum), "--report", str(tmp_path / "r.json"))
    assert code == 0
    assert doc["chi2_per_dof"] < 1e-10
    assert doc["temperature"]["value_k"] is None
    assert doc["temperature"]["scaled_100ng_k"] == pytest.approx(293.0, rel=1e-6)
    assert "created" in doc


def test_fit_report_is_reproducible(tmp_path, capsys):
    spectrum = data_path(tmp_path, "fixture_293k_seed42.csv")
    texts = []
    for name in ("a.json", "b.json"):
        run(capsys, "--reproducible", "fit", str(spectrum), "--report", str(tmp_path / name))
        texts.append((tmp_path / name).read_bytes())
    assert texts[0] == texts[1]


def test_fit_empty_file(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, out, err = run(capsys, "fit", str(empty), "--report", str(tmp_path / "r.json"))
    assert code == 2
    assert error_doc(err)["error"] == "validation"
    assert not (tmp_path / "r.json").exists()


def test_fit_flat_spectrum_is_numerical_failure(tmp_path, capsys):
    flat = tmp_path / "flat.csv"
    rows = "\n".join(f"{f}.0,1.0" for f in range(100))
    flat.write_text(f"# unit = shot-normalized\n# averages = 1\nfrequency_hz,psd\n{rows}\n")
    code, _, err = run(capsys, "fit", str(flat), "--report", str(tmp_path / "r.json"))
    assert code == 3
    assert error_doc(err)["exit_code"] == 3


def test_fit_non_convergence_exit_code(tmp_path, capsys):
    spectrum = data_path(tmp_path, "fixture_293k_seed42.csv")
    cfg = write_config(tmp_path, base_config(fit__max_iterations=1))
    report = tmp_path / "r.json"
    code, _, err = run(capsys, "fit", str(spectrum), "--report", str(report), "--config", str(cfg))
    assert code == 3
    assert json.loads(report.read_text())["converged"] is False
    assert error_doc(err)["error"] == "numerical"


def test_fit_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "fit", str(tmp_path / "nope.csv"), "--report", str(tmp_path / "r.json"))
    assert code == 2
    error_doc(err)


def test_budget_measurement(capsys):
    code, doc, _ = run_json(capsys, "budget", "--sqz", "4.8", "--antisqz", "12.9")
    assert code == 0
    assert doc["efficiency"] == pytest.approx(0.694, abs=5e-4)
    assert 0.30 <= doc["total_loss"] <= 0.315


def test_budget_text_output(capsys):
    code, out, _ = run(capsys, "budget", "--sqz", "4.8", "--antisqz", "12.9")
    assert code == 0
    assert "total loss: 30.60 %" in out


def test_budget_chain_with_gap(capsys):
    code, doc, _ = run_json(capsys, "budget", "--chain", "faraday=0.88", "--source-db", "8.7",
                            "--observed-db", "4.8")
    assert code == 0
    assert doc["expected_db"] == pytest.approx(6.2213, abs=1e-4)
    assert doc["non_loss_degradation"] is True


def test_budget_chain_unlabelled(capsys):
    code, doc, _ = run_json(capsys, "budget", "--chain", "0.9", "0.9")
    assert code == 0
    assert doc["efficiency"] == pytest.approx(0.81)
    assert [s["label"] for s in doc["stages"]] == ["stage1", "stage2"]


@pytest.mark.parametrize("argv,code", [
    (["budget", "--sqz", "4.8"], 1),
    (["budget"], 1),
    (["budget", "--sqz", "5", "--antisqz", "4"], 2),
    (["budget", "--sqz", "0", "--antisqz", "0"], 2),
    (["budget", "--chain", "x=1.5"], 2),
    (["budget", "--chain", "0.9", "--observed-db", "4.8"], 1),
    (["frobnicate"], 1),
    ([], 1),
    (["check", "--only", "nonsense"], 1),
    (["budget", "--dump-config", "--chain", "0.9"], 1),
])
def test_error_exit_codes(capsys, argv, code):
    got, out, err = run(capsys, *argv)
    assert got == code
    doc = error_doc(err)
    assert doc["exit_code"] == code


def test_check_all_pass(capsys):
    code, doc, _ = run_json(capsys, "check")
    assert code == 0
    assert doc["all_passed"] is True
    assert {c["name"] for c in doc["checks"]} >= {"equipartition", "db_round_trip"}


def test_check_list(capsys):
    code, out, _ = run(capsys, "check", "--list")
    assert code == 0
    assert "equipartition" in out.split()


def test_check_detects_wrong_constant(capsys, monkeypatch):
    monkeypatch.setattr(cm, "K_B", cm.K_B * 1.01)
    code, out, err = run(capsys, "check", "--only", "equipartition")
    assert code == 3
    assert out.startswith("FAIL equipartition")
    assert error_doc(err)["error"] == "check-failed"


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "cryosqueeze", "budget", "--sqz", "4.8", "--antisqz", "12.9"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "efficiency" in proc.stdout


@pytest.mark.skipif(shutil.which("cryosqueeze") is None, reason="console script not installed")
def test_console_script():
    import subprocess
    proc = subprocess.run(["cryosqueeze", "check", "--list"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
