import json
import math

import pytest

from slicereg.report import ANCHORS, CheckRecord, SemigroupReport, anchor_for


def test_anchor_lookup():
    assert anchor_for("semigroup.law") == ANCHORS["law"]
    assert anchor_for("semigroup.laplace[q3,k2]") == ANCHORS["laplace"]
    assert anchor_for("unknown.family") == ""


def test_record_pass_logic():
    rep = SemigroupReport()
    rep.record("a.law", 1e-12, 1e-8)
    rep.record("a.law[2]", 1e-6, 1e-8)
    rep.record("a.pointwise_defect", 0.3, None, passed=True, diagnostic=True)
    assert not rep.passed
    assert [r.check_id for r in rep.failures()] == ["a.law[2]"]
    assert rep["a.law"].passed
    with pytest.raises(KeyError):
        rep["missing"]


def test_negative_residual_rejected():
    with pytest.raises(ValueError):
        CheckRecord("x.law", -1.0, 1.0, True)


def test_json_is_sorted_and_excludes_timing_by_default():
    rep = SemigroupReport()
    rep.record("b.law", 0.0, 1e-8, wall_time=0.5)
    rep.record("a.law", math.inf, 1e-8)
    data = rep.to_json()
    assert [r["check_id"] for r in data["records"]] == ["a.law", "b.law"]
    assert "wall_time" not in data["records"][0]
    assert data["records"][0]["residual"] == "inf"
    assert data["failures"] == 1 and data["checks"] == 2
    json.dumps(data)
    assert rep.to_json(timing=True)["records"][1]["wall_time"] == 0.5


def test_csv_uses_round_trip_floats():
    rep = SemigroupReport()
    rep.record("x.law", 0.1 + 0.2, 1e-8)
    rows = rep.to_csv().splitlines()
    assert rows[0] == "check_id,residual,tol,pass"
    assert float(rows[1].split(",")[1]) == 0.1 + 0.2


def test_extend_and_timed():
    a, b = SemigroupReport(), SemigroupReport()
    b.record("x.law", 0.0, 1.0)
    a.extend(b)
    assert len(a) == 1
    with a.timed() as clock:
        pass
    assert clock["elapsed"] >= 0.0
