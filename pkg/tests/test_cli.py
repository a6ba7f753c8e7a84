from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from neckglue import models
from neckglue.cli import (
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_VALIDATION,
    SWEEP_COLUMNS,
    ConfigError,
    config_from_ends,
    encode_matrix,
    load_config,
    main,
    parse_config,
    parse_matrix,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(path: Path, data: dict) -> str:
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_matrix_accepts_pairs_and_plain_numbers():
    m = parse_matrix([[[1, 2], 0], [3, [0, -1]]], "m")
    assert m == pytest.approx(np.array([[1 + 2j, 0], [3, -1j]]))
    assert parse_matrix(encode_matrix(m), "m") == pytest.approx(m)
    with pytest.raises(ConfigError, match="m"):
        parse_matrix([[1, 2], [3]], "m")
    with pytest.raises(ConfigError):
        parse_matrix([[1, 2]], "m", (2, 2))


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_config_round_trip(name):
    cfg = load_config(str(CONFIGS / name))
    echo = cfg.echo()
    again = parse_config(json.loads(json.dumps(echo)))
    assert again.echo() == echo


def test_echo_materializes_defaults_and_expands_range():
    data = config_from_ends(*models.rotation())
    for key in ("numerics", "eigen", "threshold"):
        del data[key]
    data["sweep"] = {"r_min": 2, "r_max": 5, "step": 1}
    echo = parse_config(data).echo()
    assert echo["sweep"]["r_list"] == [2.0, 3.0, 4.0, 5.0]
    assert echo["numerics"]["rank_tol"] == 1e-9
    assert echo["threshold"] == {"c0": "auto", "delta": "auto"}


def test_unknown_field_is_reported_with_its_location():
    data = config_from_ends(*models.rotation())
    data["numerics"]["stepsize"] = 0.1
    with pytest.raises(ConfigError, match=r"numerics: unknown field\(s\) stepsize"):
        parse_config(data)
    data = config_from_ends(*models.rotation())
    data["end2"]["cap_length"] = -1
    with pytest.raises(ConfigError, match="end2.cap_length"):
        parse_config(data)


def test_validate_names_skew_violation(tmp_path, capsys):
    data = config_from_ends(*models.rotation())
    data["boundary"]["J"] = [[0, 1], [1, 0]]
    code = main(["validate", "--config", write_config(tmp_path / "bad.json", data)])
    out = capsys.readouterr().out
    assert code == EXIT_VALIDATION
    assert "J† = −J" in out and "defect 2.000e+00" in out


def test_validate_accepts_sample_config(capsys):
    assert main(["validate", "--config", str(CONFIGS / "graded_exponential.json")]) == EXIT_OK
    assert "graded = True" in capsys.readouterr().out


def test_malformed_json_reports_line_number(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  "boundary": {,\n}\n')
    assert main(["validate", "--config", str(path)]) == EXIT_VALIDATION
    assert "line 3" in capsys.readouterr().err


def test_missing_config_is_a_validation_failure(capsys):
    assert main(["sweep"]) == EXIT_VALIDATION
    assert "--config" in capsys.readouterr().err


def test_eigen_on_rotation_config(tmp_path):
    assert main(["eigen", "--config", str(CONFIGS / "rotation.json"), "--out", str(tmp_path)]) == EXIT_OK
    lam = sorted(float(row["lambda"]) for row in read_csv(tmp_path / "spectrum.csv"))
    for target in (-np.pi / 11, 0.0, np.pi / 11):
        assert min(abs(x - target) for x in lam) < 1e-8


def test_eigen_writes_eigenvectors_when_requested(tmp_path):
    data = config_from_ends(*models.rotation(), eigen={"r": 2.0, "eigenvectors": True, "window": 0.2})
    code = main(["eigen", "--config", write_config(tmp_path / "c.json", data), "--out", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "eigvecs.csv")
    assert list(rows[0])[:3] == ["t", "v0_0_re", "v0_0_im"]
    assert float(rows[-1]["t"]) == pytest.approx(7.0)


def test_eigen_with_fd_oracle_reports_difference(tmp_path, capsys):
    code = main(["eigen", "--config", str(CONFIGS / "rotation.json"), "--out", str(tmp_path), "--fd-oracle"])
    assert code == EXIT_OK
    assert "box-scheme oracle" in capsys.readouterr().out


def test_csv_output_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for out in (a, b):
        assert main(["eigen", "--config", str(CONFIGS / "exponential.json"), "--out", str(out)]) == EXIT_OK
    assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()


def test_sweep_on_exponential_config(tmp_path):
    assert main(["sweep", "--config", str(CONFIGS / "exponential.json"), "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "sweep.csv")
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [float(row["r"]) for row in rows] == [2.0, 4.0, 6.0, 8.0, 10.0]
    assert all(row["dim_ktilde"] == "2" for row in rows)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["verdicts"]["dimension_ledger"] == "pass"
    assert report["config"]["name"] == "exponential"
    assert "glue_residual_max" in report["fits"]


def test_sweep_records_numeric_failures_per_row(tmp_path, capsys, monkeypatch):
    from neckglue import analysis

    real = analysis._fill_row

    def failing(row, end1, end2, r, schedule, tol):
        if r == 4.0:
            raise FloatingPointError("overflow in propagation")
        return real(row, end1, end2, r, schedule, tol)

    monkeypatch.setattr(analysis, "_fill_row", failing)
    data = config_from_ends(*models.rotation(), sweep={"r_list": [2.0, 4.0, 6.0]})
    code = main(["sweep", "--config", write_config(tmp_path / "c.json", data), "--out", str(tmp_path)])
    assert code == EXIT_NUMERIC
    rows = read_csv(tmp_path / "sweep.csv")
    assert [row["dim_ktilde"] for row in rows] == ["1", "-1", "1"]
    assert "r = 4: FloatingPointError" in capsys.readouterr().out


def test_ends_writes_kernel_summary(tmp_path):
    assert main(["ends", "--config", str(CONFIGS / "rotation_orthogonal.json"), "--out", str(tmp_path)]) == EXIT_OK
    out = json.loads((tmp_path / "ends.json").read_text())
    assert out["end1"]["kappa"] == 1 and out["end2"]["kappa"] == 1
    assert out["dim_Lsum"] == 2 and out["dim_K_inf"] == 0
    assert out["end1"]["lagrangian_defect"] < 1e-10


def test_jobs_must_be_positive(capsys):
    assert main(["sweep", "--config", str(CONFIGS / "rotation.json"), "--jobs", "0"]) == EXIT_VALIDATION
