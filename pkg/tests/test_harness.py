import json
import subprocess
import sys
import time

import pytest

from aruba.cli import main
from aruba.harness import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUN_FAILURE,
    ConfigError,
    derive_seed,
    parse_config,
    read_csv,
    run_experiment,
    summarize_rows,
)

STATIC = {"experiment": "static", "seeds": [0], "env": {"d": 3, "m": 10, "T": 15}}
FEDERATED = {
    "experiment": "federated", "seeds": [0],
    "federated": {"n_clients": 20, "d": 4, "rounds": 4, "clients_per_round": 5,
                  "batch_size": 10, "epsilon": 0.05, "zeta": 0.05, "p": 1.0,
                  "refine_steps": 10, "mode": "diag"},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_minimal_config_defaults():
    cfg = parse_config({"experiment": "static"})
    assert cfg.seeds == [0] and cfg.repetitions == 1 and cfg.id == "static"
    assert cfg.env_spec(0).T == 100
    assert cfg.meta_config(0).sim == "eps_ewoo"


def test_parse_accepts_text_and_bytes():
    text = json.dumps(STATIC)
    assert parse_config(text).env == parse_config(text.encode()).env


def test_negative_epsilon_names_its_field():
    with pytest.raises(ConfigError) as info:
        parse_config({"experiment": "static", "meta": {"epsilon": -1}})
    assert any(e.startswith("meta.epsilon") for e in info.value.errors)


def test_federated_block_is_valid():
    cfg = parse_config(FEDERATED)
    assert cfg.fed_config(3).seed == 3


def test_unknown_keys_and_all_errors_reported():
    bad = {"experiment": "static", "colour": 1, "env": {"d": 0, "nois": 1.0},
           "meta": {"sim": "magic"}, "repetitions": None}
    with pytest.raises(ConfigError) as info:
        parse_config(bad)
    errs = info.value.errors
    for prefix in ("colour", "env.nois", "env.d", "meta.sim", "repetitions"):
        assert any(e.startswith(prefix) for e in errs), prefix


def test_bad_json_and_missing_experiment():
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config({})


def test_derive_seed():
    assert derive_seed(5, 0) == 5
    assert derive_seed(5, 1) == derive_seed(5, 1) != derive_seed(5, 2)


def test_csv_is_byte_identical_across_runs(tmp_path):
    cfg = parse_config(STATIC)
    a = run_experiment(cfg, str(tmp_path / "a"))
    b = run_experiment(cfg, str(tmp_path / "b"))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert a.csv_text.startswith("experiment,seed,t,metric,value\n")


def test_seed_order_follows_config():
    cfg = parse_config(dict(STATIC, seeds=[2, 1]))
    seeds = [key[1] for key in read_csv(run_experiment(cfg).csv_text)]
    assert seeds == [2, 1]


def test_summary_matches_csv_reductions(tmp_path):
    cfg = parse_config(dict(FEDERATED, seeds=[0, 1]))
    outcome = run_experiment(cfg, str(tmp_path / "fed"))
    parsed = read_csv(outcome.csv_text)
    summary = json.loads((tmp_path / "fed.json").read_text())
    assert summary["status"] == "ok"
    for run in summary["runs"]:
        rows = parsed[(run["experiment"], run["seed"])]
        assert run == {"experiment": run["experiment"], "seed": run["seed"],
                       **summarize_rows(rows)}
        payload = sum(v for _, m, v in rows if m == "payload_scalars")
        assert run["totals"]["payload_scalars"] == payload


def test_repetitions_get_distinct_ids():
    cfg = parse_config(dict(STATIC, repetitions=2))
    keys = list(read_csv(run_experiment(cfg).csv_text))
    assert keys == [("static#r0", 0), ("static#r1", 0)]


def test_parallel_run_matches_serial():
    cfg = parse_config(dict(STATIC, seeds=[0, 1, 2]))
    assert run_experiment(cfg, jobs=2).csv_text == run_experiment(cfg, jobs=1).csv_text


@pytest.mark.parametrize("exp,extra", [
    ("dynamic", {"env": {"d": 2, "T": 10, "m": 5, "radius": 2.0, "V": 0.05, "drift": "phases",
                         "phases": [[1.0, 0.0], [-1.0, 0.0]]}}),
    ("geometry", {"env": {"d": 3, "T": 10, "m": 5, "domain": "box", "radius": 2.0,
                          "deviations": [0.2, 0.05, 0.05]}, "meta": {"sim": "diag"}}),
    ("batch", {"env": {"d": 2, "m": 5, "dispersion": 0.1, "noise": 0.2},
               "batch": {"horizons": [5, 10], "n_test_tasks": 5}}),
])
def test_other_experiment_kinds_run(exp, extra):
    outcome = run_experiment(parse_config({"experiment": exp, **extra}))
    assert outcome.status == EXIT_OK
    metrics = {m for rows in read_csv(outcome.csv_text).values() for _, m, _ in rows}
    assert metrics


def test_partial_results_on_failure(tmp_path):
    cfg = parse_config({"experiment": "dynamic", "env": {"drift": "phases"}})
    outcome = run_experiment(cfg, str(tmp_path / "x"))
    assert outcome.status == EXIT_RUN_FAILURE
    assert outcome.summary["status"] == "partial"
    assert outcome.summary["errors"]


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, STATIC)
    assert main(["validate", "--config", good]) == EXIT_OK
    assert main(["run", "--config", good, "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_OK
    assert (tmp_path / "o.csv").exists()
    bad = write(tmp_path, {"experiment": "static", "meta": {"epsilon": -1}}, "bad.json")
    assert main(["validate", "--config", bad]) == EXIT_CONFIG_ERROR
    assert "meta.epsilon" in capsys.readouterr().out
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG_ERROR
    fail = write(tmp_path, {"experiment": "dynamic", "env": {"drift": "phases"}}, "fail.json")
    assert main(["run", "--config", fail, "--out", str(tmp_path / "f"), "--quiet"]) == \
        EXIT_RUN_FAILURE
    assert main(["run"]) == EXIT_CONFIG_ERROR


def test_cli_json_report(tmp_path, capsys):
    good = write(tmp_path, STATIC)
    main(["validate", "--config", good, "--json"])
    assert json.loads(capsys.readouterr().out)["valid"] is True


def test_module_entry_point(tmp_path):
    good = write(tmp_path, STATIC)
    proc = subprocess.run([sys.executable, "-m", "aruba", "validate", "--config", good],
                          capture_output=True, text=True)
    assert proc.returncode == 0


def test_static_long_run_is_fast():
    cfg = parse_config({"experiment": "static", "env": {"T": 2000}})
    start = time.perf_counter()
    assert run_experiment(cfg).status == EXIT_OK
    assert time.perf_counter() - start < 60
