import json

import pytest

from app.cli import EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, main
from app.services.reporting import KV_FILE, REPORT_FILE, TRACE_FILE, read_kv

from .conftest import CONFIG_DIR, DATA_DIR


def write_config(tmp_path, base, name="run.json", **changes):
    """Copy a bundled config next to tmp_path with an absolute data path and overrides"""
    config = json.loads((CONFIG_DIR / base).read_text(encoding="utf-8"))
    if "data" in config:
        config["data"] = str((CONFIG_DIR / config["data"]).resolve())
    config.update(changes)
    path = tmp_path / name
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def test_fit_house_flies(tmp_path):
    out = tmp_path / "fit"
    assert run("fit", "--config", CONFIG_DIR / "house_flies.json", "--out", out) == EXIT_OK
    for name in (REPORT_FILE, KV_FILE, TRACE_FILE):
        assert (out / name).exists()
    kv = read_kv(out / KV_FILE)
    assert float(kv["fit.bic"]) == pytest.approx(112.91, abs=0.05)
    assert float(kv["reduced.bic"]) == pytest.approx(108.17, abs=0.05)
    assert kv["lrt.df"] == "1"
    assert kv["reduced.dropped"] == "1:dose"
    assert "Likelihood-ratio test" in (out / REPORT_FILE).read_text(encoding="utf-8")


def test_malformed_csv_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x_dose,y_1,y_2,y_3\n80,62,five,433\n", encoding="utf-8")
    config = write_config(tmp_path, "house_flies.json", data=str(bad))
    out = tmp_path / "out"
    assert run("fit", "--config", config, "--out", out) == EXIT_INPUT
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_unconverged_fit_exits_with_two(tmp_path, capsys):
    config = write_config(tmp_path, "house_flies.json", fit={"max_iter": 1}, drop=[])
    out = tmp_path / "out"
    assert run("fit", "--config", config, "--out", out) == EXIT_NOT_CONVERGED
    assert read_kv(out / KV_FILE)["fit.converged"] == "false"
    assert "did not converge" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    config = write_config(tmp_path, "house_flies.json", bogus=1)
    assert run("fit", "--config", config, "--out", tmp_path / "out") == EXIT_INPUT


def test_missing_config_file(tmp_path):
    assert run("fit", "--config", tmp_path / "absent.json", "--out", tmp_path / "out") == EXIT_INPUT


def test_bad_arguments_exit_with_one():
    with pytest.raises(SystemExit) as info:
        main(["predict", "--config", "x.json"])
    assert info.value.code == EXIT_INPUT


def test_data_override(tmp_path):
    copy = tmp_path / "flies.csv"
    copy.write_text((DATA_DIR / "house_flies.csv").read_text(encoding="utf-8"), encoding="utf-8")
    out = tmp_path / "out"
    assert run("fit", "--config", CONFIG_DIR / "house_flies.json", "--data", copy, "--out", out) == EXIT_OK
    assert float(read_kv(out / KV_FILE)["fit.bic"]) == pytest.approx(112.91, abs=0.05)


def test_select_single_link(tmp_path):
    config = write_config(tmp_path, "house_flies.json", select={"mode": "links", "candidate_links": ["logit"]})
    out = tmp_path / "out"
    assert run("select", "--config", config, "--out", out) == EXIT_OK
    kv = read_kv(out / KV_FILE)
    assert kv["search.candidates"] == "1"
    assert kv["rank.1.model"] == "logit,logit"
    assert kv["search.criterion"] == "bic"


def test_select_mixture(tmp_path):
    out = tmp_path / "out"
    code = run("select", "--config", CONFIG_DIR / "house_flies.json", "--mode", "mixture", "--out", out)
    assert code == EXIT_OK
    kv = read_kv(out / KV_FILE)
    assert kv["select.mode"] == "mixture"
    assert float(kv["fit.aic"]) <= float(kv["select.initial_aic"])
    assert (out / TRACE_FILE).read_text(encoding="utf-8").startswith("iteration,term,a,b,aic")


def test_two_group_search_needs_four_categories(tmp_path, capsys):
    code = run("select", "--config", CONFIG_DIR / "house_flies.json", "--mode", "two-group", "--out", tmp_path / "out")
    assert code == EXIT_INPUT
    assert "J >= 4" in capsys.readouterr().err


def test_simulate_is_byte_identical(tmp_path):
    config = CONFIG_DIR / "trauma_like_simulate.json"
    for name in ("a", "b"):
        assert run("simulate", "--config", config, "--seed", 5, "--out", tmp_path / name) == EXIT_OK
    for name in ("simulated.csv", KV_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    kv = read_kv(tmp_path / "a" / KV_FILE)
    assert kv["simulate.total"] == "800"
    assert not (tmp_path / "a" / TRACE_FILE).exists()


def test_simulate_needs_seed(tmp_path, capsys):
    assert run("simulate", "--config", CONFIG_DIR / "trauma_like_simulate.json", "--out", tmp_path) == EXIT_INPUT
    assert "seed" in capsys.readouterr().err


def test_simulate_infeasible_theta(tmp_path, capsys):
    config = json.loads((CONFIG_DIR / "trauma_like_simulate.json").read_text(encoding="utf-8"))
    config["simulate"]["theta"] = [1.0, 0.5, 0.0, -1.0, 0.0, 0.0]
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    out = tmp_path / "out"
    assert run("simulate", "--config", path, "--seed", 5, "--out", out) == EXIT_INPUT
    assert "setting" in capsys.readouterr().err
    assert not out.exists()


def test_simulate_from_fit_result(tmp_path):
    fit_out = tmp_path / "fit"
    assert run("fit", "--config", CONFIG_DIR / "house_flies.json", "--out", fit_out) == EXIT_OK
    config = write_config(
        tmp_path, "house_flies.json", drop=[],
        simulate={"result_file": str(fit_out / KV_FILE), "n": 50},
    )
    out = tmp_path / "sim"
    assert run("simulate", "--config", config, "--seed", 3, "--out", out) == EXIT_OK
    assert read_kv(out / KV_FILE)["simulate.total"] == str(7 * 50)


def test_bootstrap(tmp_path):
    out = tmp_path / "out"
    assert run("bootstrap", "--config", CONFIG_DIR / "trauma_like.json", "--out", out, "--jobs", 2) == EXIT_OK
    kv = read_kv(out / KV_FILE)
    assert kv["bootstrap.replicates"] == "10"
    assert kv["bootstrap.failed"] == "0"
    assert kv["bootstrap.seed"] == "20240229"


def test_cross_validation(tmp_path):
    out = tmp_path / "out"
    assert run("cv", "--config", CONFIG_DIR / "trauma_like.json", "--out", out) == EXIT_OK
    kv = read_kv(out / KV_FILE)
    assert kv["cv.k"] == "5"
    assert "cv.repeat.3.loss" in kv
    assert (out / TRACE_FILE).read_text(encoding="utf-8").splitlines()[0] == "repeat,loss"
