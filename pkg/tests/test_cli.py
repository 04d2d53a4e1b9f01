from __future__ import annotations

import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from randcp import schema
from randcp.cli import main
from randcp.core import detect
from randcp.expfam import ExpFamilyModel
from randcp.nonparam import DEFAULT_C, block_length


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv: str) -> dict:
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def write_series(path, x: np.ndarray) -> str:
    np.savetxt(path, x, delimiter=",")
    return str(path)


@pytest.fixture
def jump_file(tmp_path) -> str:
    rng = np.random.default_rng(7)
    x = np.concatenate([rng.normal(0.0, 1.0, 300), rng.normal(3.0, 1.0, 300)])
    return write_series(tmp_path / "jump.csv", x)


class TestDetect:
    def test_schema_and_library_agreement(self, capsys, jump_file):
        doc = run_json(capsys, "detect", jump_file, "--model", "normal-meanvar")
        jsonschema.validate(doc, schema.DETECT_REPORT)
        report = detect(np.loadtxt(jump_file, delimiter=","), ExpFamilyModel.normal_meanvar())
        assert doc == report.to_dict()
        assert doc["reject"] and abs(doc["k_hat"] - 300) <= 10

    def test_with_interval(self, capsys, jump_file):
        doc = run_json(capsys, "detect", jump_file, "--ci", "--argmax-samples", "1000")
        jsonschema.validate(doc, schema.DETECT_REPORT)
        assert doc["ci_low"] <= doc["k_hat"] <= doc["ci_high"]

    def test_bridge_method(self, capsys, jump_file):
        doc = run_json(capsys, "detect", jump_file, "--method", "bridge", "--replications", "1000")
        jsonschema.validate(doc, schema.DETECT_REPORT)
        assert doc["method"] == "bridge"

    def test_constant_column(self, capsys, tmp_path):
        path = write_series(tmp_path / "flat.csv", np.full(200, 2.5))
        doc = run_json(capsys, "detect", path, "--model", "normal-mean")
        assert doc["reject"] is False
        assert doc["stat"] == 0.0

    def test_multivariate(self, capsys, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((400, 2))
        x[200:] += 1.0
        path = write_series(tmp_path / "mv.csv", x)
        doc = run_json(capsys, "detect", path, "--model", "mvnormal-mean", "--cov", "1,0;0,1")
        jsonschema.validate(doc, schema.DETECT_REPORT)
        assert doc["reject"]

    def test_header_line(self, capsys, tmp_path, jump_file):
        path = tmp_path / "h.csv"
        path.write_text("value\n" + open(jump_file, encoding="utf-8").read(), encoding="utf-8")
        with_header = run_json(capsys, "detect", str(path), "--header")
        plain = run_json(capsys, "detect", jump_file)
        assert with_header == plain

    def test_missing_file(self, capsys, tmp_path):
        missing = tmp_path / "absent.csv"
        code, out, err = run(capsys, "detect", missing)
        assert code == 1
        assert str(missing) in err
        assert out == ""

    def test_human_format(self, capsys, jump_file):
        code, out, _ = run(capsys, "--format", "human", "detect", jump_file)
        assert code == 0
        assert "k_hat:" in out and "reject:" in out

    def test_simulated_volatility_dataset(self, capsys, tmp_path):
        out = tmp_path / "vol.csv"
        run_json(capsys, "simulate", "--n", "10000", "--sigma2", "1.5", "--seed", "4", "--out", out)
        doc = run_json(capsys, "detect", out)
        side = json.loads((tmp_path / "vol.csv.json").read_text(encoding="utf-8"))
        assert doc["reject"]
        assert abs(doc["k_hat"] - side["k_star"]) <= 200

    def test_nonparam(self, capsys, tmp_path):
        out = tmp_path / "ito.csv"
        run_json(capsys, "simulate", "--kind", "ito", "--n", "10000", "--jump-size", "1.0", "--seed", "1", "--out", out)
        doc = run_json(capsys, "detect", out, "--method", "nonparam")
        jsonschema.validate(doc, schema.NONPARAM_REPORT)
        assert doc["k_n"] == block_length(10_000, DEFAULT_C)


class TestInterval:
    def test_strong_jump_is_narrow(self, capsys, jump_file):
        doc = run_json(capsys, "ci", jump_file, "--argmax-samples", "2000")
        jsonschema.validate(doc, schema.CI_REPORT)
        assert doc["ci_low"] <= doc["k_hat"] <= doc["ci_high"]
        assert doc["ci_high"] - doc["ci_low"] <= 20

    def test_level_ordering(self, capsys, tmp_path):
        rng = np.random.default_rng(11)
        x = np.concatenate([rng.normal(0.0, 1.0, 500), rng.normal(0.6, 1.0, 500)])
        path = write_series(tmp_path / "mild.csv", x)
        wide = run_json(capsys, "ci", path, "--alpha", "0.05", "--argmax-samples", "2000")
        narrow = run_json(capsys, "ci", path, "--alpha", "0.5", "--argmax-samples", "2000")
        assert narrow["ci_high"] - narrow["ci_low"] < wide["ci_high"] - wide["ci_low"]

    def test_no_change_to_localize(self, capsys, tmp_path):
        path = write_series(tmp_path / "flat.csv", np.full(100, 1.0))
        code, _, err = run(capsys, "ci", path, "--model", "normal-mean", "--argmax-samples", "1000")
        assert code == 1
        assert "zero" in err


class TestSimulate:
    def test_sidecar(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        run_json(capsys, "simulate", "--n", "500", "--mu2", "-20", "--seed", "3", "--out", out)
        side = json.loads((tmp_path / "s.csv.json").read_text(encoding="utf-8"))
        jsonschema.validate(side, schema.SIM_SIDECAR)
        assert np.loadtxt(out, delimiter=",").size == 500
        assert side["lambda_star"] == pytest.approx(side["k_star"] / 500)

    def test_same_seed_same_bytes(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_json(capsys, "simulate", "--n", "300", "--seed", "8", "--out", a)
        run_json(capsys, "simulate", "--n", "300", "--seed", "8", "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestTables:
    def test_critvals(self, capsys):
        doc = run_json(capsys, "critvals", "--alpha", "0.05", "0.01", "--d", "2", "--n", "10000")
        jsonschema.validate(doc, schema.CRITVALS_TABLE)
        values = {row["alpha"]: row["critical_value"] for row in doc["rows"]}
        assert values[0.05] == pytest.approx(4.22423, abs=1e-4)
        assert values[0.01] == pytest.approx(4.99771, abs=1e-4)

    def test_argmax_dist(self, capsys, tmp_path):
        samples = tmp_path / "xi.csv"
        doc = run_json(capsys, "argmax-dist", "--replications", "1000", "--seed", "2", "--samples-out", samples)
        jsonschema.validate(doc, schema.ARGMAX_DIST)
        xs = np.loadtxt(samples, delimiter=",", skiprows=1)
        assert xs.size == 1000
        assert np.all(np.diff(xs) >= 0)


class TestReplicate:
    def test_manifest(self, capsys, tmp_path):
        out = tmp_path / "fig"
        doc = run_json(capsys, "replicate", "--figure", "vol-jump", "--replications", "5", "--n", "1000", "--out", out)
        jsonschema.validate(doc, schema.REPLICATE_SUMMARY)
        on_disk = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        jsonschema.validate(on_disk, schema.REPLICATE_SUMMARY)
        for name in on_disk["files"]:
            assert (out / name).is_file(), name

    def test_single_replicate(self, capsys, tmp_path):
        out = tmp_path / "one"
        doc = run_json(capsys, "replicate", "--figure", "mean-jump", "--replications", "1", "--n", "1000", "--out", out)
        for exp in doc["experiments"].values():
            assert exp["replications"] == 1

    def test_deterministic_across_workers(self, capsys, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ("replicate", "--figure", "deviation", "--replications", "6", "--n", "1000", "--argmax-samples", "1000")
        run_json(capsys, *args, "--out", a, "--workers", "1")
        run_json(capsys, *args, "--out", b, "--workers", "2")
        for path in sorted(a.iterdir()):
            if path.suffix == ".csv" or path.name == "summary.json":
                assert path.read_bytes() == (b / path.name).read_bytes(), path.name

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "exp.ini"
        cfg.write_text(
            "[generator]\nn = 600\nsigma2 = 1.4\n[experiment]\npipeline = parametric-detect\nmetrics = stat_root\n"
            "[monte_carlo]\nreplications = 4\nseed = 5\n",
            encoding="utf-8",
        )
        out = tmp_path / "cfg"
        doc = run_json(capsys, "replicate", "--config", cfg, "--out", out)
        jsonschema.validate(doc, schema.REPLICATE_SUMMARY)
        assert doc["replications"] == 4

    def test_unknown_figure(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["replicate", "--figure", "fig99", "--out", str(tmp_path)])
        assert exc.value.code == 1
        err = capsys.readouterr().err
        assert "vol-jump" in err

    def test_needs_source(self, capsys, tmp_path):
        code, _, _ = run(capsys, "replicate", "--out", tmp_path)
        assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "randcp", "--version"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "0.1.0" in proc.stdout
