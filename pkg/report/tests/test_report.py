import csv
import json
import os
import re
import subprocess
import sys

import pytest

from alpertlab_report.plots import build_decay_figure, build_sweep_figure, render_decay_plot, render_eta_sweep
from alpertlab_report.summary import NoInputsError, render_summary
from alpertlab_report.tables import SchemaError, SweepTable
from alpertlab_report.cli import main


@pytest.fixture(scope="session")
def outputs(tmp_path_factory):
    """Real experiment outputs produced through the primary CLI."""
    out = tmp_path_factory.mktemp("runs")
    base = [sys.executable, "-m", "alpertlab.cli"]
    runs = [
        ["inner-decay", "--kappa", "1", "--out", str(out)],
        ["frame", "--L", "3", "--eta", "2^-3,2^-5", "--p", "2.0,3.0",
         "--test_set", "random_expansion", "--out", str(out)],
        ["marcin", "--kappa", "1", "--eta", "2^-2,2^-4", "--p", "2.0,3.0",
         "--out", str(out)],
        ["verify-wavelets", "--L", "1", "--out", str(out)],
    ]
    for cmd in runs:
        proc = subprocess.run(base + cmd, capture_output=True, text=True)
        assert proc.returncode in (0, 2), proc.stderr
    return out


def test_table_load_and_schema(outputs):
    table = SweepTable.load(str(outputs / "inner_decay.csv"), "inner_decay")
    assert table.rows
    with pytest.raises(SchemaError):
        SweepTable.load(str(outputs / "inner_decay.csv"), "frame")


def test_empty_csv_rejected(tmp_path):
    p = tmp_path / "inner_decay.csv"
    p.write_text("")
    with pytest.raises(SchemaError):
        SweepTable.load(str(p), "inner_decay")
    p.write_text("case,kappa,beta,eta,ratio,value,slope,expected,pass\n")
    with pytest.raises(SchemaError):
        SweepTable.load(str(p), "inner_decay")


def test_decay_plot_one_fitted_line_per_case(outputs):
    table = SweepTable.load(str(outputs / "inner_decay.csv"), "inner_decay")
    fig, info = build_decay_figure(table)
    cases = {r["case"] for r in table.rows}
    assert set(info["cases"]) == cases
    assert info["fitted_lines"] == len(cases) - 1  # the exact-zero case has no fit
    path = render_decay_plot(str(outputs / "inner_decay.csv"))
    assert os.path.exists(path) and path.endswith(".svg")


def test_decay_annotation_is_verbatim(outputs):
    table = SweepTable.load(str(outputs / "inner_decay.csv"), "inner_decay")
    fig, _ = build_decay_figure(table)
    labels = []
    for ax in fig.axes:
        legend = ax.get_legend()
        if legend:
            labels.extend(t.get_text() for t in legend.get_texts())
    slopes = {r["slope"] for r in table.rows if float(r["value"]) > 0}
    annotated = {t.split("slope ")[1] for t in labels if t.startswith("fit: slope")}
    assert annotated <= slopes  # pass-through, never recomputed


def test_eta_sweep_plot(outputs):
    path = render_eta_sweep(str(outputs / "frame.csv"))
    assert os.path.exists(path)
    table = SweepTable.load(str(outputs / "frame.csv"), "frame")
    summary = json.loads((outputs / "frame_summary.json").read_text())
    fig, info = build_sweep_figure(table, summary)
    assert info["eta0"] == summary["eta0_measured"]
    assert set(info["ps"]) == {r["p"] for r in table.rows if r["metric"] == "residual"}


def test_eta_sweep_without_eta0_warns(outputs, tmp_path):
    table = SweepTable.load(str(outputs / "frame.csv"), "frame")
    with pytest.warns(UserWarning):
        fig, info = build_sweep_figure(table, {"eta0_measured": None})
    assert info["eta0"] is None


def test_summary_report_fidelity(outputs):
    report = render_summary(str(outputs))
    text = open(report).read()
    assert text.count("<h2>") == 4
    # every number shown in the report appears verbatim in its source CSV
    shown = re.findall(r"<td>([^<]*)</td>", text)
    raw = ""
    for name in ("verify_wavelets", "inner_decay", "frame", "marcin"):
        raw += (outputs / f"{name}.csv").read_text()
    for cell in shown:
        if cell:
            assert cell in raw, f"cell {cell!r} not verbatim from any CSV"


def test_summary_pass_counts_match(outputs):
    report = render_summary(str(outputs))
    text = open(report).read()
    for name in ("inner_decay", "marcin"):
        rows = list(csv.DictReader(open(outputs / f"{name}.csv")))
        good = sum(1 for r in rows if r["pass"] == "1")
        bad = sum(1 for r in rows if r["pass"] == "0")
        assert f"<b>{good}</b> checks passed, <b>{bad}</b> failed" in text


def test_summary_partial_directory(outputs, tmp_path):
    (tmp_path / "marcin.csv").write_text((outputs / "marcin.csv").read_text())
    report = render_summary(str(tmp_path))
    text = open(report).read()
    assert text.count("<h2>") == 1
    with pytest.raises(NoInputsError):
        render_summary(str(tmp_path / "nothing"))


def test_cli_entry(outputs, tmp_path):
    assert main(["decay", str(outputs / "inner_decay.csv"), "--out", str(tmp_path)]) == 0
    assert main(["summary", str(outputs)]) == 0
    bad = tmp_path / "inner_decay.csv"
    bad.write_text("not,a,schema\n1,2,3\n")
    assert main(["decay", str(bad)]) == 1
    assert main(["summary", str(tmp_path / "void")]) == 1


def test_figure_names_derive_from_content(outputs, tmp_path):
    p1 = render_decay_plot(str(outputs / "inner_decay.csv"), out_dir=str(tmp_path))
    p2 = render_decay_plot(str(outputs / "inner_decay.csv"), out_dir=str(tmp_path))
    assert p1 == p2  # regenerated, deterministic name from the content hash
