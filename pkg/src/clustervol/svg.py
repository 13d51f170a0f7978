"""Minimal SVG writer for planar clusterings and power diagrams."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .powerdiagram import PowerDiagram, cell_polygon

__all__ = ["PALETTE", "render_figure"]

PALETTE = ("#222222", "#1f5fbf", "#c8312b", "#2e8b3a", "#b8860b", "#7a3fa0", "#00838f", "#d2691e")
SIZE = 480
PAD = 0.15


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, box):
        self.x0, self.y0, self.x1, self.y1 = box
        self.s = SIZE / max(self.x1 - self.x0, self.y1 - self.y0)
        self.parts: list[str] = []

    def xy(self, p):
        return _fmt((p[0] - self.x0) * self.s), _fmt((self.y1 - p[1]) * self.s)

    def add(self, tag: str, **attrs):
        body = " ".join(f'{k.rstrip("_").replace("_", "-")}="{v}"' for k, v in attrs.items())
        self.parts.append(f"<{tag} {body}/>")


def _box(points: np.ndarray, sites: np.ndarray | None):
    pts = points if sites is None else np.vstack([points, sites])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = PAD * max(float((hi - lo).max()), 1e-9)
    return (lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)


def render_figure(fig: dict) -> str:
    """Render the ``figure`` block of a report.

    Keys: ``points`` and ``labels`` (required); optional ``sites``,
    ``weights`` (cells are drawn when both are present), ``ball`` with
    ``norm`` ("2" or "inf") and ``radius``, and ``title``.
    """
    points = np.asarray(fig["points"], dtype=float)
    labels = np.asarray(fig["labels"], dtype=int)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("figures are only drawn for planar data")
    sites = np.asarray(fig["sites"], dtype=float) if fig.get("sites") is not None else None
    cv = _Canvas(_box(points, sites))
    w = _fmt((cv.x1 - cv.x0) * cv.s)
    h = _fmt((cv.y1 - cv.y0) * cv.s)
    if sites is not None and fig.get("weights") is not None:
        pd = PowerDiagram(sites, fig["weights"])
        for i in range(pd.k):
            poly = cell_polygon(pd, i, (cv.x0, cv.y0, cv.x1, cv.y1))
            if len(poly) >= 3:
                pts = " ".join(",".join(cv.xy(p)) for p in poly)
                cv.add("polygon", points=pts, fill=PALETTE[i % len(PALETTE)], fill_opacity="0.08", stroke="#555555", stroke_width="1")
    ball = fig.get("ball")
    if sites is not None and ball:
        r = float(ball["radius"]) * cv.s
        for i, site in enumerate(sites):
            cx, cy = cv.xy(site)
            color = PALETTE[i % len(PALETTE)]
            if str(ball["norm"]) == "inf":
                cv.add("rect", x=_fmt(float(cx) - r), y=_fmt(float(cy) - r), width=_fmt(2 * r), height=_fmt(2 * r),
                       fill="none", stroke=color, stroke_dasharray="4 3")
            else:
                cv.add("circle", cx=cx, cy=cy, r=_fmt(r), fill="none", stroke=color, stroke_dasharray="4 3")
    for p, lab in zip(points, labels):
        cx, cy = cv.xy(p)
        cv.add("circle", cx=cx, cy=cy, r="4", fill=PALETTE[lab % len(PALETTE)])
    if sites is not None:
        for i, site in enumerate(sites):
            cx, cy = (float(v) for v in cv.xy(site))
            color = PALETTE[i % len(PALETTE)]
            cv.add("line", x1=_fmt(cx - 5), y1=_fmt(cy - 5), x2=_fmt(cx + 5), y2=_fmt(cy + 5), stroke=color, stroke_width="2")
            cv.add("line", x1=_fmt(cx - 5), y1=_fmt(cy + 5), x2=_fmt(cx + 5), y2=_fmt(cy - 5), stroke=color, stroke_width="2")
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'
    title = f"<title>{escape(str(fig['title']))}</title>" if fig.get("title") else ""
    return "\n".join([head, title, f'<rect width="{w}" height="{h}" fill="white"/>', *cv.parts, "</svg>"]) + "\n"
