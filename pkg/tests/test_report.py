import json
import math

import pytest

from embryonet.errors import ReportError
from embryonet.report import FILES, emit_report, figure_svg, load_report, report_json, roc_csv


def test_emit_writes_all_files(small_report, tmp_path):
    paths = emit_report(small_report, tmp_path)
    assert [p.name for p in paths] == list(FILES)


def test_roc_csv_matches_report(small_report, tmp_path):
    emit_report(small_report, tmp_path)
    roc = small_report.pooled["model"]["roc"]
    lines = (tmp_path / "roc_model.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr"
    assert len(lines) == len(roc["fpr"]) + 1
    assert lines[1].startswith("inf,0.0,0.0")
    last = lines[-1].split(",")
    assert (float(last[1]), float(last[2])) == (1.0, 1.0)


def test_roc_csv_floats_round_trip():
    roc = {"thresholds": [None, 0.1 + 0.2], "fpr": [0.0, 1 / 3], "tpr": [0.0, 2 / 3]}
    row = roc_csv(roc).splitlines()[2].split(",")
    assert float(row[0]) == 0.1 + 0.2 and float(row[1]) == 1 / 3


def test_figure_has_six_bars_and_two_curves(small_report):
    svg = figure_svg(small_report)
    assert svg.count('class="bar"') == 6
    assert svg.count('class="roc"') == 2
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_reemission_byte_identical(small_report, tmp_path):
    emit_report(small_report, tmp_path / "a")
    emit_report(load_report(tmp_path / "a" / "report.json"), tmp_path / "b")
    for name in FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_reference_values_annotated(small_report):
    ref = json.loads(report_json(small_report))["reference_values"]
    assert ref["status"] == "reference, not reproduced"
    assert ref["model_auc"] == {"mean": 0.82, "std": 0.07}
    assert ref["panel_auc"] == {"mean": 0.58, "std": 0.04}
    assert (ref["model_ppv"], ref["model_npv"]) == (0.93, 0.58)
    assert ref["panel_ppv"] == {"mean": 0.81, "std": 0.01}
    assert ref["panel_npv"] == {"mean": 0.23, "std": 0.08}


def test_report_json_has_no_nan(small_report):
    text = report_json(small_report)
    assert "NaN" not in text and "Infinity" not in text
    assert math.isfinite(small_report.pooled["model"]["auc"])


def test_unwritable_directory(small_report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportError):
        emit_report(small_report, blocker / "sub")
