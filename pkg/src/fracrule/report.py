"""JSON, CSV and SVG output for reports.

JSON files carry a ``content_digest`` (SHA-256 of the canonical content) and
a ``metadata`` block with the timestamp; the digest never covers metadata, so
identical runs give identical digests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import HolderEstimate
from .core import SampledFunction
from .rules import ConvergenceReport, RuleReport

__all__ = [
    "Document",
    "as_document",
    "content_digest",
    "emit_report",
    "render_csv",
    "render_json",
    "render_svg",
]


def content_digest(content: dict) -> str:
    canonical = json.dumps(content, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Document:
    """What gets written: JSON content plus a two-column table for CSV/SVG."""

    content: dict
    header: tuple[str, str]
    rows: list
    loglog: bool = False
    title: str = ""


def as_document(report) -> Document:
    if isinstance(report, Document):
        return report
    if isinstance(report, ConvergenceReport):
        rows = list(zip(report.h_values.tolist(), report.norms.tolist()))
        return Document(report.to_dict(), ("h", "sup_norm"), rows, True, report.rule_name)
    if isinstance(report, HolderEstimate):
        rows = list(zip(report.scales_used.tolist(), report.oscillations.tolist()))
        return Document(report.to_dict(), ("h", "oscillation"), rows, True, "holder")
    if isinstance(report, RuleReport):
        f = report.residual
        rows = list(zip(f.points.tolist(), f.values.tolist()))
        return Document(report.to_dict(), ("x", "residual"), rows, False, report.rule_name)
    if isinstance(report, SampledFunction):
        g = report.grid
        content = {
            "label": report.label,
            "grid": {"a": g.a, "h": g.h, "n": g.n},
            "values": report.values.tolist(),
        }
        rows = list(zip(report.points.tolist(), report.values.tolist()))
        return Document(content, ("x", "value"), rows, False, report.label)
    raise TypeError(f"cannot report a {type(report).__name__}")


def render_json(report) -> str:
    content = as_document(report).content
    doc = dict(content)
    doc["content_digest"] = content_digest(content)
    doc["metadata"] = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "fracrule_version": __version__,
    }
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def render_csv(report) -> str:
    doc = as_document(report)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(doc.header)
    for row in doc.rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


_W, _H, _PAD = 640, 420, 60


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def render_svg(report, title: str | None = None) -> str:
    """Single polyline chart; convergence and Hölder data are drawn log-log."""
    doc = as_document(report)
    header = doc.header
    xs = np.array([r[0] for r in doc.rows], dtype=float)
    ys = np.array([r[1] for r in doc.rows], dtype=float)
    if doc.loglog:
        keep = (xs > 0) & (ys > 0)
        xs, ys = np.log10(xs[keep]), np.log10(ys[keep])
        xlabel, ylabel = f"log10 {header[0]}", f"log10 {header[1]}"
    else:
        xlabel, ylabel = header[0], header[1]
    if title is None:
        title = doc.title

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{_escape(title)}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 15}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{_escape(xlabel)}</text>',
        f'<text x="18" y="{_H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {_H / 2})">{_escape(ylabel)}</text>',
    ]
    if xs.size:
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        px = _PAD + (xs - x0) / (x1 - x0) * (_W - 2 * _PAD)
        py = _H - _PAD - (ys - y0) / (y1 - y0) * (_H - 2 * _PAD)
        points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(f'<polyline points="{points}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>')
        for x, anchor, label in ((_PAD, "start", x0), (_W - _PAD, "end", x1)):
            parts.append(
                f'<text x="{x}" y="{_H - _PAD + 16}" text-anchor="{anchor}" '
                f'font-family="sans-serif" font-size="11">{_fmt(label)}</text>'
            )
        for y, label in ((_H - _PAD, y0), (_PAD, y1)):
            parts.append(
                f'<text x="{_PAD - 4}" y="{y + 4}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{_fmt(label)}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(report, fmt: str, path: str | os.PathLike) -> str:
    """Write ``report`` as ``json``, ``csv`` or ``svg``; returns the digest line."""
    if fmt == "json":
        text = render_json(report)
        digest = json.loads(text)["content_digest"]
    elif fmt == "csv":
        text = render_csv(report)
        digest = "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()
    elif fmt == "svg":
        text = render_svg(report)
        digest = "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()
    else:
        raise ValueError(f"unsupported format {fmt!r}")
    atomic_write(path, text)
    return f"{digest}  {path}"

