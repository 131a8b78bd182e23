"""One HTML report over a directory of experiment outputs.

Numbers in the report are copied verbatim from the CSV fields; figures are
regenerated next to the report.  Sections appear only for the files present.
"""

from __future__ import annotations

import html
import os

from .plots import render_decay_plot, render_eta_sweep
from .tables import SCHEMAS, SweepTable

_TITLES = {
    "verify_wavelets": "Wavelet property checks",
    "inner_decay": "Inner-product decay",
    "frame": "Frame operator sweep",
    "marcin": "Halo square-function bounds",
}


class NoInputsError(FileNotFoundError):
    pass


def _table_html(rows: list[dict[str, str]], columns: list[str], limit: int | None = None) -> str:
    shown = rows if limit is None else rows[:limit]
    body = []
    for r in shown:
        cells = "".join(f"<td>{html.escape(r[c])}</td>" for c in columns)
        body.append(f"<tr>{cells}</tr>")
    head = "".join(f"<th>{html.escape(c)}</th>" for c in columns)
    note = "" if limit is None or len(rows) <= limit else (
        f"<p class='note'>showing {limit} of {len(rows)} rows</p>"
    )
    return f"<table><tr>{head}</tr>{''.join(body)}</table>{note}"


def render_summary(directory: str, out_path: str | None = None) -> str:
    sections = []
    found = 0
    for kind in ("verify_wavelets", "inner_decay", "frame", "marcin"):
        csv_path = os.path.join(directory, f"{kind}.csv")
        if not os.path.exists(csv_path):
            continue
        found += 1
        table = SweepTable.load(csv_path, kind)
        good, bad, other = table.pass_counts()
        parts = [f"<h2>{_TITLES[kind]}</h2>"]
        parts.append(
            f"<p>source <code>{html.escape(os.path.basename(csv_path))}</code>: "
            f"<b>{good}</b> checks passed, <b>{bad}</b> failed"
            + (f", {other} recorded without assertion" if other else "")
            + ".</p>"
        )
        if kind == "inner_decay":
            fig = render_decay_plot(csv_path, out_dir=directory)
            parts.append(f"<img src='{html.escape(os.path.basename(fig))}' width='920'/>")
            summary_rows = []
            seen = set()
            for r in table.rows:
                if r["case"] not in seen:
                    seen.add(r["case"])
                    summary_rows.append(r)
            parts.append(_table_html(summary_rows,
                                     ["case", "kappa", "eta", "slope", "expected", "pass"]))
        elif kind == "frame":
            fig = render_eta_sweep(csv_path, out_dir=directory)
            parts.append(f"<img src='{html.escape(os.path.basename(fig))}' width='920'/>")
            dev_rows = [r for r in table.rows if r["metric"] == "deviation"]
            parts.append(_table_html(dev_rows, ["beta", "eta", "value", "eta0_ok"]))
        elif kind == "marcin":
            p2 = [r for r in table.rows if r["p"] == "2"]
            parts.append(_table_html(p2, ["beta", "eta", "f", "ratio", "bound", "pass"]))
        else:
            failing = [r for r in table.rows if r["pass"] == "0"]
            if failing:
                parts.append("<p>failing rows:</p>")
                parts.append(_table_html(failing, SCHEMAS[kind], limit=40))
        sections.append("\n".join(parts))
    if not found:
        raise NoInputsError(f"no experiment CSVs found under {directory!r}")
    doc = (
        "<!doctype html><html><head><meta charset='utf-8'>"
        "<title>alpertlab report</title>"
        "<style>body{font-family:sans-serif;margin:2em;}"
        "table{border-collapse:collapse;}td,th{border:1px solid #999;"
        "padding:2px 8px;font-size:12px;}h2{margin-top:1.6em;}"
        ".note{color:#666;font-size:11px;}</style></head><body>"
        "<h1>alpertlab experiment report</h1>"
        + "\n".join(sections)
        + "</body></html>\n"
    )
    out_path = out_path or os.path.join(directory, "report.html")
    with open(out_path, "w") as fh:
        fh.write(doc)
    return out_path
