import json
import os

import pytest

from crosspop.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, run_cli


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Simulated datasets plus a base run config, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    sim = root / "sim.json"
    sim.write_text(json.dumps({
        "n_per_source": [160, 140],
        "n_external": 120,
        "n_covariates": 2,
        "em_levels": 2,
        "effect_em": [0.0, 1.0],
        "seed": 5,
        "exact_sizes": False,
    }))
    rc = run_cli(["simulate", "--config", str(sim), "--out-dir", str(root / "data"), "--stem", "d"])
    assert rc == EXIT_OK
    config = {
        "input": {
            "multisource": str(root / "data" / "d_multisource.csv"),
            "external": str(root / "data" / "d_external.csv"),
        },
        "roles": {
            "outcome": "Y", "source": "S", "treatment": "A",
            "effect_modifier": "EM", "covariates": ["X1", "X2"],
        },
        "models": {
            "outcome": {"candidates": [{"kind": "glm"}]},
            "treatment": {"candidates": [{"kind": "glm"}]},
            "external": {"candidates": [{"kind": "glm"}]},
            "treatment_model_type": "joint",
            "source": {"kind": "multinomial", "penalty": 0.0},
        },
        "cross_fitting": False,
        "seed": 42,
        "scb_draws": 4000,
        "output": {"dir": str(root / "out"), "stem": "r"},
    }
    (root / "run.json").write_text(json.dumps(config))
    return root, config


def test_happy_path_ate_external(workdir, capsys):
    root, _ = workdir
    rc = run_cli(["ate-external", "--config", str(root / "run.json")])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "AVERAGE TREATMENT EFFECT ESTIMATES IN AN EXTERNAL POPULATION" in out
    assert (root / "out" / "r.json").exists()
    assert (root / "out" / "r_df_dif.csv").exists()


def test_all_four_subcommands(workdir):
    root, _ = workdir
    for cmd in ("ate-internal", "ste-internal", "ate-external", "ste-external"):
        rc = run_cli([cmd, "--config", str(root / "run.json"), "--quiet",
                      "--set", f"output.stem={cmd}"])
        assert rc == EXIT_OK, cmd
        doc = json.loads((root / "out" / f"{cmd}.json").read_text())
        assert doc["analysis"] == cmd


def test_missing_em_exits_2(workdir, capsys):
    root, config = workdir
    bad = dict(config)
    bad["roles"] = {k: v for k, v in config["roles"].items() if k != "effect_modifier"}
    (root / "noem.json").write_text(json.dumps(bad))
    rc = run_cli(["ste-internal", "--config", str(root / "noem.json"), "--quiet"])
    assert rc == EXIT_VALIDATION
    assert "effect_modifier" in capsys.readouterr().err


def test_malformed_csv_exits_2_with_row(workdir, capsys, tmp_path):
    root, config = workdir
    bad_csv = tmp_path / "bad.csv"
    bad_csv.write_text("Y,S,A,X1,X2\n1.0,a,0,0.1,0.2\n2.0,a\n")
    bad = json.loads(json.dumps(config))
    bad["input"]["multisource"] = str(bad_csv)
    (root / "badcsv.json").write_text(json.dumps(bad))
    rc = run_cli(["ate-internal", "--config", str(root / "badcsv.json"), "--quiet"])
    assert rc == EXIT_VALIDATION
    assert "row 3" in capsys.readouterr().err


def test_unknown_flag_exits_64(workdir, capsys):
    root, _ = workdir
    rc = run_cli(["ate-internal", "--config", str(root / "run.json"), "--frobnicate"])
    assert rc == EXIT_USAGE
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_exits_64():
    assert run_cli(["transmogrify"]) == EXIT_USAGE


def test_env_seed_override(workdir):
    root, _ = workdir
    try:
        os.environ["CMR_SEED"] = "777"
        rc = run_cli(["ate-internal", "--config", str(root / "run.json"), "--quiet",
                      "--set", "output.stem=envseed"])
    finally:
        del os.environ["CMR_SEED"]
    assert rc == EXIT_OK
    doc = json.loads((root / "out" / "envseed.json").read_text())
    assert doc["metadata"]["seed"] == 777


def test_set_override_invalid_exits_2(workdir, capsys):
    root, _ = workdir
    rc = run_cli(["ate-internal", "--config", str(root / "run.json"), "--set", "oops"])
    assert rc == EXIT_VALIDATION
    assert "KEY=VALUE" in capsys.readouterr().err


def test_numerical_failure_exit_3(workdir):
    root, config = workdir
    bad = json.loads(json.dumps(config))
    # constant covariate + penalized-free glm treatment model per source makes
    # per-source separation likely; instead force failure via empty-arm folds:
    bad["cross_fitting"] = True
    bad["replications"] = 1
    bad["models"]["treatment_model_type"] = "separate"
    (root / "cf.json").write_text(json.dumps(bad))
    # tiny strata: shrink the dataset by pointing at a truncated csv
    import csv

    src = root / "data" / "d_multisource.csv"
    dst = root / "data" / "tiny.csv"
    with open(src) as fh:
        rows = list(csv.reader(fh))
    with open(dst, "w", newline="") as fh:
        csv.writer(fh).writerows(rows[:26])
    bad["input"]["multisource"] = str(dst)
    (root / "cf.json").write_text(json.dumps(bad))
    rc = run_cli(["ste-external", "--config", str(root / "cf.json"), "--quiet"])
    assert rc in (EXIT_VALIDATION, EXIT_NUMERICAL)  # stratum too small or empty arm


def test_forest_svg_written_for_internal(workdir):
    root, _ = workdir
    rc = run_cli(["ste-internal", "--config", str(root / "run.json"), "--quiet",
                  "--set", "output.forest_svg=true", "--set", "output.use_scb=true",
                  "--set", "output.stem=withplot"])
    assert rc == EXIT_OK
    svg = (root / "out" / "withplot_forest.svg").read_bytes()
    assert svg.startswith(b"<svg ")


def test_workers_byte_identical(workdir):
    root, _ = workdir
    for n, stem in ((1, "w1"), (2, "w2")):
        rc = run_cli(["ste-external", "--config", str(root / "run.json"), "--quiet",
                      "--workers", str(n),
                      "--set", "cross_fitting=true", "--set", "replications=2",
                      "--set", f"output.stem={stem}"])
        assert rc == EXIT_OK
    b1 = (root / "out" / "w1.json").read_bytes()
    b2 = (root / "out" / "w2.json").read_bytes()
    assert b1 == b2
