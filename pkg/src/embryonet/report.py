"""Write an evaluation report as JSON, ROC tables and an SVG figure."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ReportError
from .experiment import EvaluationReport

FILES = ("report.json", "roc_model.csv", "roc_panel.csv", "figure.svg")


def report_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def roc_csv(roc: dict) -> str:
    lines = ["threshold,fpr,tpr"]
    for t, f, p in zip(roc["thresholds"], roc["fpr"], roc["tpr"]):
        lines.append(f"{'inf' if t is None else repr(float(t))},{float(f)!r},{float(p)!r}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _polyline(roc: dict, x0: float, y0: float, size: float) -> str:
    return " ".join(f"{_fmt(x0 + f * size)},{_fmt(y0 + size - p * size)}"
                    for f, p in zip(roc["fpr"], roc["tpr"]))


def _bars(report: EvaluationReport) -> list[tuple[str, str, float | None]]:
    model = report.pooled["model"]["predictive_values"]["fixed"]
    panel = report.panel["pooled_mean_score"]["predictive_values"]["recommend_transfer"]
    rand = report.baseline["random"]
    return [
        ("model", "PPV", model["ppv"]), ("panel", "PPV", panel["ppv"]), ("random", "PPV", rand["ppv"]),
        ("model", "NPV", model["npv"]), ("panel", "NPV", panel["npv"]), ("random", "NPV", rand["npv"]),
    ]


COLORS = {"model": "#1f77b4", "panel": "#ff7f0e", "random": "#7f7f7f"}


def figure_svg(report: EvaluationReport) -> str:
    """Two panels: ROC curves (left) and PPV/NPV bars against the random baseline (right)."""
    model_roc = report.pooled["model"]["roc"]
    panel_roc = report.panel["pooled_mean_score"]["roc"]
    m_auc = report.pooled["model"]["auc"]
    p_auc = report.panel["pooled_mean_score"]["auc"]
    x0, y0, size = 50.0, 40.0, 260.0
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="720" height="360" viewBox="0 0 720 360">',
        '<rect width="720" height="360" fill="white"/>',
        f'<text x="{_fmt(x0)}" y="25" font-size="14">A. ROC</text>',
        f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(size)}" height="{_fmt(size)}" '
        'fill="none" stroke="black"/>',
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0 + size)}" x2="{_fmt(x0 + size)}" y2="{_fmt(y0)}" '
        'stroke="#bbbbbb" stroke-dasharray="4 4"/>',
        f'<polyline class="roc" fill="none" stroke="{COLORS["model"]}" stroke-width="2" '
        f'points="{_polyline(model_roc, x0, y0, size)}"/>',
        f'<polyline class="roc" fill="none" stroke="{COLORS["panel"]}" stroke-width="2" '
        f'points="{_polyline(panel_roc, x0, y0, size)}"/>',
        f'<text x="{_fmt(x0 + size / 2)}" y="{_fmt(y0 + size + 30)}" font-size="12" '
        'text-anchor="middle">false positive rate</text>',
        f'<text x="15" y="{_fmt(y0 + size / 2)}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 15 {_fmt(y0 + size / 2)})">true positive rate</text>',
        f'<text x="{_fmt(x0 + size - 5)}" y="{_fmt(y0 + size - 25)}" font-size="11" text-anchor="end" '
        f'fill="{COLORS["model"]}">model AUC {m_auc:.3f}</text>',
        f'<text x="{_fmt(x0 + size - 5)}" y="{_fmt(y0 + size - 10)}" font-size="11" text-anchor="end" '
        f'fill="{COLORS["panel"]}">panel AUC {p_auc:.3f}</text>',
    ]

    bx0, by0, bh = 400.0, 40.0, 260.0
    out.append(f'<text x="{_fmt(bx0)}" y="25" font-size="14">B. Predictive values</text>')
    out.append(f'<line x1="{_fmt(bx0)}" y1="{_fmt(by0 + bh)}" x2="{_fmt(bx0 + 290)}" '
               f'y2="{_fmt(by0 + bh)}" stroke="black"/>')
    width, gap = 36.0, 8.0
    for i, (who, metric, value) in enumerate(_bars(report)):
        x = bx0 + 10 + i * (width + gap) + (20 if i >= 3 else 0)
        h = (value or 0.0) * bh
        label = "n/a" if value is None else f"{value:.2f}"
        out.append(f'<rect class="bar" data-series="{who}" data-metric="{metric}" x="{_fmt(x)}" '
                   f'y="{_fmt(by0 + bh - h)}" width="{_fmt(width)}" height="{_fmt(h)}" '
                   f'fill="{COLORS[who]}"/>')
        out.append(f'<text x="{_fmt(x + width / 2)}" y="{_fmt(by0 + bh - h - 4)}" font-size="10" '
                   f'text-anchor="middle">{label}</text>')
    for j, metric in enumerate(("PPV", "NPV")):
        cx = bx0 + 10 + (3 * j) * (width + gap) + (20 if j else 0) + 1.5 * width + gap
        out.append(f'<text x="{_fmt(cx)}" y="{_fmt(by0 + bh + 18)}" font-size="12" '
                   f'text-anchor="middle">{metric}</text>')
    for k, who in enumerate(("model", "panel", "random")):
        out.append(f'<rect x="{_fmt(bx0 + k * 95)}" y="{_fmt(by0 + bh + 28)}" width="10" height="10" '
                   f'fill="{COLORS[who]}"/>')
        out.append(f'<text x="{_fmt(bx0 + k * 95 + 14)}" y="{_fmt(by0 + bh + 37)}" '
                   f'font-size="11">{who}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: EvaluationReport, directory) -> list[Path]:
    directory = Path(directory)
    contents = {
        "report.json": report_json(report),
        "roc_model.csv": roc_csv(report.pooled["model"]["roc"]),
        "roc_panel.csv": roc_csv(report.panel["pooled_mean_score"]["roc"]),
        "figure.svg": figure_svg(report),
    }
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for name in FILES:
            path = directory / name
            path.write_text(contents[name], encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise ReportError(f"cannot write report to {directory}: {exc}") from None
    return written


def load_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
