import json
import math

import numpy as np
import pytest

from fockbell.cli import main


def write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCorrelate:
    def test_single_row_cosine(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 1, "n_minus": 1, "angles": [0, 0.5]})
        code, out, _ = run(capsys, ["correlate", cfg])
        assert code == 0
        fields = out.strip().split(",")
        assert float(fields[-1]) == pytest.approx(math.cos(0.5), abs=1e-12)
        # 15 significant digits, point decimal separator
        assert fields[-1].startswith("0.877582561890373")

    def test_multiple_angle_sets(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {
            "n_plus": 2, "n_minus": 2,
            "angle_sets": [[0.1, 0.1, 0.1, 0.1], [0.3, 0.0, 0.0, 0.0]],
        })
        code, out, _ = run(capsys, ["correlate", cfg])
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 2
        assert float(lines[0].split(",")[-1]) == pytest.approx(1.0)
        assert float(lines[1].split(",")[-1]) == pytest.approx(math.cos(0.3), abs=1e-12)

    def test_odd_partial_product_vanishes(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 2, "n_minus": 2, "angles": [0.1, 0.2, 0.3]})
        code, out, _ = run(capsys, ["correlate", cfg])
        assert code == 0
        assert float(out.strip().split(",")[-1]) == pytest.approx(0.0, abs=1e-13)

    def test_too_many_measurements_is_config_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 1, "n_minus": 1, "angles": [0, 1, 2]})
        code, _, err = run(capsys, ["correlate", cfg])
        assert code == 2
        assert "exceed" in err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 1, "n_minus": 1, "angles": [0], "extra": 1})
        code, _, err = run(capsys, ["correlate", cfg])
        assert code == 2
        assert "unknown keys" in err

    def test_both_angle_forms_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {
            "n_plus": 1, "n_minus": 1, "angles": [0], "angle_sets": [[0]]})
        code, _, _ = run(capsys, ["correlate", cfg])
        assert code == 2


class TestQmax:
    def test_fan_two_spins(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "bchsh", "n": 2, "p": 1})
        code, out, _ = run(capsys, ["qmax", spec, "--mode", "fan"])
        assert code == 0
        payload = json.loads(out)
        assert payload["q_max"] == pytest.approx(2 * math.sqrt(2), abs=1e-9)
        assert payload["chi"] == pytest.approx(math.pi / 4, abs=1e-6)

    def test_fan_pair_split(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "bchsh", "n": 4, "p": 2})
        code, out, _ = run(capsys, ["qmax", spec, "--mode", "fan"])
        assert code == 0
        assert json.loads(out)["q_max"] == pytest.approx(2.28, abs=0.01)

    def test_free_double_form(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "double_bchsh", "n": 4})
        code, out, _ = run(capsys, ["qmax", spec, "--mode", "free",
                                    "--restarts", "16", "--seed", "1"])
        assert code == 0
        payload = json.loads(out)
        assert payload["q_max"] == pytest.approx(8 / 3, abs=1e-4)
        assert payload["chi"] is None

    def test_seed_determinism(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "double_bchsh", "n": 4})
        argv = ["qmax", spec, "--mode", "free", "--restarts", "6", "--seed", "9"]
        _, out1, _ = run(capsys, argv)
        _, out2, _ = run(capsys, argv)
        assert out1 == out2

    def test_odd_n_rejected(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "bchsh", "n": 5, "p": 1})
        code, _, _ = run(capsys, ["qmax", spec])
        assert code == 2


class TestScan:
    def test_fan_scan_csv(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "bchsh", "p": 2})
        code, out, _ = run(capsys, ["scan", spec, "--n-min", "4", "--n-max", "8"])
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "n,q_max,chi"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert first[0] == "4"
        assert float(first[1]) == pytest.approx(2.28, abs=0.01)
        assert float(first[2]) > 0

    def test_bad_range_rejected(self, tmp_path, capsys):
        spec = write(tmp_path, "s.json", {"form": "bchsh", "p": 1})
        code, _, _ = run(capsys, ["scan", spec, "--n-min", "3", "--n-max", "8"])
        assert code == 2


class TestSample:
    def test_byte_identical_reruns(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 2, "n_minus": 2,
                                         "angles": [0.2, 0.2, 1.0, 1.0]})
        argv = ["sample", cfg, "--count", "20", "--seed", "11"]
        _, out1, _ = run(capsys, argv)
        _, out2, _ = run(capsys, argv)
        assert out1 == out2
        rows = [line.split(",") for line in out1.strip().splitlines()]
        assert len(rows) == 20
        assert set(v for row in rows for v in row) <= {"1", "-1"}

    def test_triplet_rows_correlated(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 1, "n_minus": 1, "angles": [0.5, 0.5]})
        _, out, _ = run(capsys, ["sample", cfg, "--count", "30", "--seed", "2"])
        for line in out.strip().splitlines():
            a, b = line.split(",")
            assert a == b


class TestPhaseCommand:
    def test_empty_history_uniform(self, tmp_path, capsys):
        hist = write(tmp_path, "h.json", {"angles": [], "outcomes": []})
        code, out, _ = run(capsys, ["phase", hist])
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 1024
        values = {line.split(",")[1] for line in lines}
        assert len(values) == 1
        assert float(values.pop()) == pytest.approx(1 / (2 * math.pi), rel=1e-12)

    def test_resolution_override(self, tmp_path, capsys):
        hist = write(tmp_path, "h.json", {"angles": [0.0], "outcomes": [1],
                                          "resolution": 256})
        code, out, _ = run(capsys, ["phase", hist])
        assert code == 0
        assert len(out.strip().splitlines()) == 256

    def test_mismatched_history_rejected(self, tmp_path, capsys):
        hist = write(tmp_path, "h.json", {"angles": [0.0], "outcomes": []})
        code, _, _ = run(capsys, ["phase", hist])
        assert code == 2

    def test_bad_outcome_rejected(self, tmp_path, capsys):
        hist = write(tmp_path, "h.json", {"angles": [0.0], "outcomes": [2]})
        code, _, _ = run(capsys, ["phase", hist])
        assert code == 2


class TestOracleCheck:
    def test_small_sweep_passes(self, capsys):
        code, out, _ = run(capsys, ["oracle-check", "--n-max", "4", "--angle-sets", "8"])
        assert code == 0
        assert "PASS" in out
        assert "max |oracle - exact|" in out

    def test_limit_enforced(self, capsys):
        code, _, _ = run(capsys, ["oracle-check", "--n-max", "11"])
        assert code == 2


class TestOutputFile:
    def test_out_flag_writes_file(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.json", {"n_plus": 1, "n_minus": 1, "angles": [0, 0.5]})
        target = tmp_path / "result.csv"
        code, out, _ = run(capsys, ["correlate", cfg, "--out", str(target)])
        assert code == 0
        assert out == ""
        assert target.read_text().strip().endswith("0.877582561890373")


class TestThreads:
    def test_env_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("FOCKBELL_THREADS", "2")
        spec = write(tmp_path, "s.json", {"form": "double_bchsh", "n": 4})
        code, out, _ = run(capsys, ["qmax", spec, "--mode", "free", "--restarts", "4"])
        assert code == 0
        monkeypatch.setenv("FOCKBELL_THREADS", "1")
        _, out_single, _ = run(capsys, ["qmax", spec, "--mode", "free", "--restarts", "4"])
        assert out == out_single
