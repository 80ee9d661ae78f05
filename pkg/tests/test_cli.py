import importlib.resources
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from blm import benford_probs, write_npy


def run_cli(args, stdin=None):
    return subprocess.run(
        [sys.executable, "-m", "blm.cli", *args],
        input=stdin, capture_output=True, text=True,
    )


def load_schema(name):
    ref = importlib.resources.files("blm") / "schemas" / name
    return json.loads(ref.read_text())


@pytest.fixture
def benford_file(tmp_path):
    # 10^5 values whose digit proportions are exactly Benford's
    counts = np.round(benford_probs(10) * 10**5).astype(int)
    values = np.concatenate(
        [np.linspace(d, d + 0.5, c, endpoint=False) for d, c in enumerate(counts, 1)]
    )
    path = tmp_path / "benford.npy"
    write_npy(path, values)
    return path


@pytest.fixture
def toy_manifest(tmp_path):
    rng = np.random.default_rng(0)
    write_npy(tmp_path / "w.npy", rng.standard_normal(4000) * 0.05)
    write_npy(tmp_path / "b.npy", np.zeros(16))
    doc = {
        "model_name": "toy",
        "tensors": [
            {"name": "fc.weight", "path": "w.npy", "format": "npy"},
            {"name": "fc.bias", "path": "b.npy", "format": "npy"},
        ],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


class TestAnalyze:
    def test_benford_file_scores_one(self, benford_file):
        res = run_cli(["analyze", "--file", str(benford_file)])
        assert res.returncode == 0
        report = json.loads(res.stdout)
        assert report["overall"]["mlh"] == pytest.approx(1.0, abs=1e-6)
        assert sum(report["overall"]["bincount"]) == pytest.approx(1.0, abs=1e-7)

    def test_json_validates_against_schema(self, toy_manifest):
        res = run_cli(["analyze", "--manifest", str(toy_manifest),
                       "--train-acc", "0.5", "--per-layer"])
        assert res.returncode == 0
        jsonschema.validate(json.loads(res.stdout),
                            load_schema("analysis_report.schema.json"))

    def test_deterministic_output(self, toy_manifest):
        args = ["analyze", "--manifest", str(toy_manifest), "--format", "csv"]
        assert run_cli(args).stdout == run_cli(args).stdout

    def test_all_excluded_exits_3(self, tmp_path):
        write_npy(tmp_path / "b.npy", np.ones(4))
        doc = {"model_name": "m", "tensors": [
            {"name": "x.bias", "path": "b.npy", "format": "npy"}]}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        res = run_cli(["analyze", "--manifest", str(path)])
        assert res.returncode == 3
        assert res.stderr

    def test_eic_scaled_constant(self, tmp_path):
        # values engineered so MLH lands exactly on the scaling minimum are
        # impractical; check the formula wiring instead: eic == -A - mlh
        rng = np.random.default_rng(1)
        write_npy(tmp_path / "w.npy", np.abs(rng.standard_normal(5000)))
        res = run_cli(["analyze", "--file", str(tmp_path / "w.npy"),
                       "--train-acc", "0.5"])
        report = json.loads(res.stdout)["overall"]
        assert report["eic"] == pytest.approx(-0.5 - report["mlh"], abs=1e-8)
        assert report["eic_scaled"] == pytest.approx(
            -0.5 - (report["mlh"] - 0.9462) / 0.0537, abs=1e-6
        )

    def test_bad_manifest_exits_2(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{broken")
        assert run_cli(["analyze", "--manifest", str(path)]).returncode == 2

    def test_unknown_extension_exits_2(self, tmp_path):
        (tmp_path / "w.bin").write_bytes(b"\x00" * 8)
        assert run_cli(["analyze", "--file", str(tmp_path / "w.bin")]).returncode == 2

    def test_per_layer_csv(self, toy_manifest):
        res = run_cli(["analyze", "--manifest", str(toy_manifest),
                       "--per-layer", "--format", "csv"])
        lines = res.stdout.strip().splitlines()
        assert lines[0].startswith("scope,name,")
        assert lines[1].startswith("overall,toy,")
        assert lines[2].startswith("layer,fc.weight,")


class TestThermo:
    def test_deterministic_files(self, tmp_path):
        args = ["thermo", "--steps", "3", "--samples", "2000", "--seed", "5",
                "--out"]
        run_cli(args + [str(tmp_path / "a.csv")])
        run_cli(args + [str(tmp_path / "b.csv")])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_two_steps_hits_endpoints(self):
        res = run_cli(["thermo", "--steps", "2", "--samples", "1000",
                       "--beta-min", "0.5", "--beta-max", "4"])
        lines = res.stdout.strip().splitlines()
        assert lines[0] == "beta,mlh"
        assert len(lines) == 3
        assert lines[1].startswith("0.5,")
        assert lines[2].startswith("4,")

    def test_invalid_config_exits_2(self):
        assert run_cli(["thermo", "--steps", "1"]).returncode == 2


class TestMonitor:
    def test_spec_stream(self):
        res = run_cli(["monitor", "--patience", "2"],
                      stdin="0.5\n0.6\n0.55\n0.58\n")
        assert res.returncode == 0
        assert res.stdout.split() == ["IMPROVED", "IMPROVED", "CONTINUE", "STOP"]

    def test_malformed_line_exits_2(self):
        res = run_cli(["monitor"], stdin="0.5\nnot-a-number\n")
        assert res.returncode == 2

    def test_empty_stdin(self):
        res = run_cli(["monitor"], stdin="")
        assert res.returncode == 0
        assert res.stdout == ""

    def test_min_mode(self):
        res = run_cli(["monitor", "--patience", "1", "--mode", "min"],
                      stdin="1.0\n0.5\n0.7\n")
        assert res.stdout.split() == ["IMPROVED", "IMPROVED", "STOP"]


class TestCorrelate:
    def write_runs(self, tmp_path, rows):
        path = tmp_path / "runs.csv"
        path.write_text("step,train_acc,mlh,val_acc\n" +
                        "\n".join(",".join(map(str, r)) for r in rows) + "\n")
        return path

    def make_rows(self, n=20, seed=0):
        rng = np.random.default_rng(seed)
        rows = []
        for i in range(n):
            A = round(float(rng.uniform(0.3, 1.0)), 6)
            m = round(float(rng.uniform(0.947, 0.9995)), 6)
            rows.append((i, A, m, round(0.3 + 0.5 * m, 6)))
        return rows

    def test_duplicated_metric_scores_one(self, tmp_path):
        rows = [(i, a, m, a) for i, a, m, _ in self.make_rows()]
        path = self.write_runs(tmp_path, rows)
        res = run_cli(["correlate", "--input", str(path), "--y", "val_acc"])
        assert res.returncode == 0
        table = {r["metric"]: r["spearman"] for r in json.loads(res.stdout)["rows"]}
        assert table["A"] == pytest.approx(1.0)

    def test_json_validates_against_schema(self, tmp_path):
        path = self.write_runs(tmp_path, self.make_rows())
        res = run_cli(["correlate", "--input", str(path)])
        jsonschema.validate(json.loads(res.stdout),
                            load_schema("correlation_table.schema.json"))

    def test_missing_column_exits_2(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text("step,train_acc,mlh\n0,0.5,0.95\n")
        assert run_cli(["correlate", "--input", str(path)]).returncode == 2

    def test_gpr_rows(self, tmp_path):
        path = self.write_runs(tmp_path, self.make_rows())
        res = run_cli(["correlate", "--input", str(path), "--gpr",
                       "--format", "csv"])
        assert res.returncode == 0
        import csv
        metrics = [row[0] for row in csv.reader(res.stdout.strip().splitlines()[1:])]
        assert metrics == ["A", "MLH", "-EIC", "-EIC_scaled", "-EIC_SR",
                           "GPR(A)", "GPR(MLH)", "GPR(MLH, A)"]

    def test_rows_without_target_are_skipped(self, tmp_path):
        rows = self.make_rows()
        text = "step,train_acc,mlh,val_acc\n"
        text += "\n".join(",".join(map(str, r)) for r in rows)
        text += "\n99,0.9,0.99,\n"  # no target: skipped, not an error
        path = tmp_path / "runs.csv"
        path.write_text(text)
        res = run_cli(["correlate", "--input", str(path)])
        assert res.returncode == 0
        assert json.loads(res.stdout)["n_records"] == len(rows)

    def test_too_few_records_exits_3(self, tmp_path):
        path = self.write_runs(tmp_path, self.make_rows(n=2))
        assert run_cli(["correlate", "--input", str(path)]).returncode == 3
