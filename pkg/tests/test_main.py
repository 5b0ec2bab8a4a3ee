"""End-to-end tests of the command-line interface on the miniature fixtures."""

import json
import shutil

import pandas as pd
import pytest

from shooting_resample.ingest import ALL_DATASETS
from shooting_resample.main import main
from tests.conftest import MINI_DIR

EXPERIMENTS = (
    "population:fixed:census2010:40,population:random:proj2016:40,"
    "arrest:fixed:census2010:40,arrest:random:census2010:40"
)


def copy_fixtures(target, skip=()):
    target.mkdir(parents=True, exist_ok=True)
    for dataset in ALL_DATASETS:
        if dataset.name not in skip:
            shutil.copy(MINI_DIR / dataset.file_name, target / dataset.file_name)
    return target


def write_config(path, **overrides):
    values = {
        "FIXTURE_DIR": str(MINI_DIR),
        "MASTER_SEED": "42",
        "EXPERIMENTS": EXPERIMENTS,
        "BODYCAM": "true",
        "BODYCAM_REPLICATIONS": "50",
        "TIES": "lower",
    }
    values.update(overrides)
    path.write_text("".join(f"{key}={value}\n" for key, value in values.items()))
    return path


def tree(root):
    return {
        path.relative_to(root).as_posix(): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


class TestIngestCommand:
    def test_counts(self, capsys):
        assert main(["ingest", "--fixtures", str(MINI_DIR)]) == 0
        out = capsys.readouterr().out
        assert "wp: 14 rows" in out
        assert "cities: 9 rows" in out

    def test_missing_file(self, tmp_path, capsys):
        fixtures = copy_fixtures(tmp_path / "fx", skip={"codes"})
        assert main(["ingest", "--fixtures", str(fixtures)]) == 2
        assert "codes.csv" in capsys.readouterr().err

    def test_schema_violation(self, tmp_path, capsys):
        fixtures = copy_fixtures(tmp_path / "fx")
        (fixtures / "wp.csv").write_text(
            "id,date,city,state,race,body_camera\n1,2015-03-01,Austin,TX,W,False\n2,2015-03-02,Austin,TX,Z,False\n"
        )
        assert main(["ingest", "--fixtures", str(fixtures)]) == 3
        assert "line 3" in capsys.readouterr().err


class TestExclusionsCommand:
    def test_mini_counts(self, tmp_path, capsys):
        out_dir = tmp_path / "report"
        assert main(["exclusions", "--fixtures", str(MINI_DIR), "--out", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "incidents: 14" in out
        assert "race known: 13" in out
        assert "population: kept 11 of 14" in out
        assert "arrest: kept 9 of 14" in out
        assert "arrest_state: 1" in out
        frame = pd.read_csv(out_dir / "exclusions_arrest.csv")
        assert len(frame) == 5
        assert "linkage issues: 3" in out
        issues = pd.read_csv(out_dir / "linkage_issues.csv")
        assert "ucr_code absent from codes" in issues["reason"].tolist()

    def test_empty_incident_file(self, tmp_path, capsys):
        fixtures = copy_fixtures(tmp_path / "fx")
        (fixtures / "wp.csv").write_text("id,date,city,state,race,body_camera\n")
        assert main(["exclusions", "--fixtures", str(fixtures)]) == 0
        out = capsys.readouterr().out
        assert "population: kept 0 of 0" in out

    def test_missing_fixtures(self, tmp_path, capsys):
        assert main(["exclusions", "--fixtures", str(tmp_path / "nothing")]) == 2
        assert "error:" in capsys.readouterr().err


class TestRunCommand:
    def test_writes_output_tree(self, tmp_path, capsys):
        config = write_config(tmp_path / "run.conf")
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(config), "--out", str(out_dir)]) == 0
        stdout = capsys.readouterr().out
        assert f"wrote {out_dir}" in stdout
        assert "chi-square" in stdout

        files = set(tree(out_dir))
        for label in ("population-fixed-census2010", "population-random-proj2016",
                      "arrest-fixed-census2010", "arrest-random-census2010", "bodycam"):
            assert f"simulations/{label}.csv" in files
            assert f"simulations/{label}.json" in files
            assert f"densities/{label}.csv" in files
        for name in ("tests.csv", "pvalues_population.csv", "pvalues_arrest.csv", "sd_distance.csv",
                     "randomization_bodycam.csv", "chi_square.csv", "distributions.csv", "census_other.csv",
                     "exclusions_population.csv", "exclusion_summary.csv", "linkage_issues.csv",
                     "correlations.json"):
            assert f"tables/{name}" in files
        assert "run.json" in files

        simulation = pd.read_csv(out_dir / "simulations" / "population-fixed-census2010.csv")
        assert len(simulation) == 40
        assert (simulation[["W", "B", "NA", "A", "H", "O"]].sum(axis=1) == 11).all()
        run = json.loads((out_dir / "run.json").read_text())
        assert run["config"]["master_seed"] == 42
        assert "out_dir" not in run["config"]
        assert set(run["checksums"]) == {d.file_name for d in ALL_DATASETS}

        issues = pd.read_csv(out_dir / "tables" / "linkage_issues.csv")
        assert list(issues.columns) == ["dataset", "record", "reason"]
        assert ("arrest", "ucr 9999 (theft)", "ucr_code absent from codes") in set(issues.itertuples(index=False, name=None))
        shares = pd.read_csv(out_dir / "figures" / "observed_proportions.csv")
        assert shares["population_share"].sum() == pytest.approx(1.0)

    def test_same_seed_same_bytes(self, tmp_path):
        config = write_config(tmp_path / "run.conf")
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "a")]) == 0
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "b"), "--workers", "4"]) == 0
        assert tree(tmp_path / "a") == tree(tmp_path / "b")

    def test_seed_override_changes_counts(self, tmp_path):
        config = write_config(tmp_path / "run.conf")
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "a")]) == 0
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "b"), "--seed", "43"]) == 0
        name = "simulations/population-fixed-census2010.csv"
        assert tree(tmp_path / "a")[name] != tree(tmp_path / "b")[name]

    def test_rerun_from_run_json(self, tmp_path):
        config = write_config(tmp_path / "run.conf")
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "a")]) == 0
        again = ["run", "--config", str(tmp_path / "a" / "run.json"), "--out", str(tmp_path / "b")]
        assert main(again) == 0
        assert tree(tmp_path / "a") == tree(tmp_path / "b")

    def test_single_replication(self, tmp_path):
        config = write_config(
            tmp_path / "run.conf", EXPERIMENTS="population:fixed:census2010:1", BODYCAM_REPLICATIONS="1",
        )
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "out")]) == 0
        assert len(pd.read_csv(tmp_path / "out" / "simulations" / "bodycam.csv")) == 1

    def test_failure_leaves_no_partial_output(self, tmp_path, capsys):
        fixtures = copy_fixtures(tmp_path / "fx", skip={"codes"})
        config = write_config(tmp_path / "run.conf", FIXTURE_DIR=str(fixtures))
        out_dir = tmp_path / "out"
        out_dir.mkdir()
        (out_dir / "previous.txt").write_text("kept")
        assert main(["run", "--config", str(config), "--out", str(out_dir)]) == 2
        assert "ingest" in capsys.readouterr().err
        assert tree(out_dir) == {"previous.txt": b"kept"}
        assert sorted(p.name for p in tmp_path.iterdir()) == ["fx", "out", "run.conf"]

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.conf")]) == 2

    def test_unwritable_output_location(self, tmp_path, capsys):
        config = write_config(tmp_path / "run.conf")
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        assert main(["run", "--config", str(config), "--out", str(blocker / "out")]) == 4
        err = capsys.readouterr().err
        assert "[report]" in err
        assert "blocker" in err

    def test_invalid_config(self, tmp_path):
        config = write_config(tmp_path / "run.conf", ALPHA="2")
        assert main(["run", "--config", str(config), "--out", str(tmp_path / "out")]) == 3

    @pytest.mark.parametrize("argv", [
        ["run", "--config", "x.conf", "--seed", "-1"],
        ["run", "--config", "x.conf", "--workers", "0"],
        ["frobnicate"],
    ])
    def test_bad_arguments(self, argv):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
