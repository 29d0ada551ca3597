import csv
import io
import json

import pytest

from sharpquotient.minimiser import MinimiseOptions
from sharpquotient.problem import ProblemParams
from sharpquotient.report import (CSV_FIELDS, STATUS_FAILED, STATUS_OK, STATUS_WARNING, ConfigError,
                                  Record, SweepConfig, csv_text, exit_code, identity_gap_max,
                                  json_report, run_case, run_sweep, write_report)
from sharpquotient.quadrature import QuadratureSpec

SMALL = dict(K=6, opts=MinimiseOptions(restarts=2))


def test_csv_header_is_exact():
    assert ",".join(CSV_FIELDS) == ("mu,eps,s,sharp_const,extremal_quotient,identity_gap_max,"
                                    "minimiser_value,min_minus_sharp,status")


def test_csv_row_formatting():
    r = Record(2.0, 0.1, s=1 / 3, sharp_const=None, status=STATUS_OK)
    row = r.csv_row()
    assert row[0] == "2" and row[2] == "0.33333333333333331"
    assert row[3] == "" and row[-1] == "ok"
    assert float(row[2]) == 1 / 3


def test_run_case_regular():
    rec = run_case(ProblemParams(2.0, 0.5), **SMALL)
    assert rec.status == STATUS_OK
    assert rec.extremal_quotient == pytest.approx(rec.sharp_const, rel=1e-8)
    assert rec.identity_gap_max < 1e-10
    assert rec.min_minus_sharp >= 0


def test_run_case_mu_zero_has_reasons_for_nulls():
    rec = run_case(ProblemParams(0.0, -0.5), **SMALL)
    assert rec.status == STATUS_OK
    for name in ("extremal_quotient", "minimiser_value", "min_minus_sharp"):
        assert getattr(rec, name) is None
        assert name in rec.null_reasons
    assert rec.identity_gap_max is not None


def test_run_case_hardy_boundary_warns():
    rec = run_case(ProblemParams(2.0, 1.0), **SMALL)
    assert rec.status == STATUS_WARNING
    assert rec.extremal_quotient is None and "extremal_quotient" in rec.null_reasons


def test_run_case_inadmissible_is_failed_not_raised():
    rec = run_case(ProblemParams(2.0, 2.0), **SMALL)
    assert rec.status == STATUS_FAILED
    assert all(k in rec.null_reasons for k in CSV_FIELDS[2:-1])


def test_min_gap_tolerance_marks_failure():
    rec = run_case(ProblemParams(3.0, 2.0), K=4, opts=MinimiseOptions(restarts=2), min_gap_tol=1e-3)
    assert rec.status == STATUS_FAILED
    assert rec.min_minus_sharp > 1e-3


def test_identity_gap_is_tiny_for_builtins():
    for mu in (-1.0, 0.0, 0.5, 4.0):
        assert identity_gap_max(ProblemParams(mu, -0.3), QuadratureSpec()) < 1e-10


def test_json_structure_and_null_handling():
    rec = Record(1.0, 0.0, s=float("nan"))
    doc = json_report([rec], config_hash="abc")
    assert set(doc) == {"metadata", "records"}
    assert set(doc["metadata"]) == {"tool_version", "config_hash", "timestamps"}
    (r,) = doc["records"]
    assert r["s"] is None and r["null_reasons"]["s"] == "non-finite value"
    for name in CSV_FIELDS:
        assert name in r
    json.dumps(doc)


@pytest.mark.parametrize("kwargs", [
    {"mu_grid": ()},
    {"eps_values": ()},
    {"eps_values": (1.5,)},
    {"eps_mode": "ratio"},
    {"parallelism": 0},
    {"restarts": 0},
    {"fmt": "xml"},
    {"eps_mode": "absolute", "eps_values": (5.0,)},
])
def test_config_validation(kwargs):
    base = dict(mu_grid=(2.0,), eps_values=(0.0,))
    base.update(kwargs)
    with pytest.raises((ConfigError, ValueError)):
        SweepConfig(**base).validate()


def test_config_hash_ignores_output_and_parallelism():
    a = SweepConfig((1.0, 2.0), (0.0,), output="a.csv", parallelism=1)
    b = SweepConfig((1.0, 2.0), (0.0,), output="b.json", parallelism=8, fmt="json")
    c = SweepConfig((1.0, 2.0), (0.0,), seed=43)
    assert a.hash() == b.hash() != c.hash()


def test_cases_in_grid_order():
    cfg = SweepConfig((1.0, -2.0), (0.0, 0.5))
    assert [(p.mu, p.eps) for p in cfg.cases()] == [(1.0, 0.0), (1.0, 0.125), (-2.0, 0.0), (-2.0, 0.5)]


def test_parallel_sweep_is_byte_identical(tmp_path):
    cfg = dict(mu_grid=(1.0, 3.0, -1.0), eps_values=(0.0, 0.5), K=6, restarts=3)
    serial = csv_text(run_sweep(SweepConfig(**cfg)))
    parallel = csv_text(run_sweep(SweepConfig(**cfg, parallelism=4)))
    assert serial == parallel
    rows = list(csv.reader(io.StringIO(serial)))
    assert len(rows) == 7 and tuple(rows[0]) == CSV_FIELDS
    path = tmp_path / "out.csv"
    write_report(run_sweep(SweepConfig(**cfg)), str(path), "csv")
    raw = path.read_bytes()
    assert raw.decode() == serial and b"\r" not in raw


def test_exit_code():
    assert exit_code([Record(1, 0), Record(1, 0, status=STATUS_WARNING)]) == 0
    assert exit_code([Record(1, 0), Record(1, 0, status=STATUS_FAILED)]) == 1
