"""CSV and SVG output for solution curves and profiles.

CSV numbers use 17 significant digits so doubles survive a round trip.
Branches are separated by a ``# branch`` comment line and the file ends with a
``# status: ...`` footer.  The SVG draws one polyline per branch; polyline
points are stored in data coordinates under a single affine transform, so
parsing the file back recovers the plotted values exactly.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import IO, Iterable, Sequence

import numpy as np
from matplotlib.ticker import MaxNLocator

from .model import Family, SolutionCurve

COLUMNS = {
    Family.RADIAL_DIRICHLET: ("alpha", "lambda", "terminal"),
    Family.RADIAL_NEUMANN: ("alpha", "lambda", "terminal"),
    Family.PLAPLACE_DIRICHLET: ("alpha", "lambda", "terminal"),
    Family.NONAUTONOMOUS_RADIAL: ("alpha", "lambda", "terminal"),
    Family.CLAMPED_BEAM: ("alpha", "lambda", "beta"),
    Family.HARMONIC_FORCED: ("xi", "mu", "uprime0"),
}
BRANCH_MARK = "# branch"
SVG_NS = "http://www.w3.org/2000/svg"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _row(family: Family, p) -> list[str]:
    if family == Family.CLAMPED_BEAM:
        return [fmt(p.alpha), fmt(p.lam), fmt(p.beta)]
    if family == Family.HARMONIC_FORCED:
        return [fmt(p.alpha), fmt(p.lam), fmt(p.uprime0)]
    return [fmt(p.alpha), fmt(p.lam), p.terminal.value]


def write_curve_csv(curve: SolutionCurve, family: Family, out: IO[str], status: str = "ok", notes: Iterable[str] = ()) -> None:
    out.write(",".join(COLUMNS[family]) + "\n")
    for b, (lo, hi) in enumerate(curve.branches):
        if b:
            out.write(BRANCH_MARK + "\n")
        for p in curve.points[lo:hi]:
            out.write(",".join(_row(family, p)) + "\n")
    for note in notes:
        out.write(f"# note: {note}\n")
    out.write(f"# status: {status}\n")


def write_profile_csv(x: Sequence[float], u: Sequence[float], out: IO[str], names=("r", "u"), header: dict | None = None) -> None:
    for key, value in (header or {}).items():
        out.write(f"# {key} = {fmt(value) if isinstance(value, float) else value}\n")
    out.write(",".join(names) + "\n")
    for a, b in zip(x, u):
        out.write(f"{fmt(a)},{fmt(b)}\n")


def read_csv(text: str) -> tuple[list[str], list[list[list[str]]], list[str]]:
    """Parse CSV written here: ``(columns, branches of rows, comment lines)``."""
    lines = text.splitlines()
    columns = None
    branches: list[list[list[str]]] = [[]]
    comments = []
    for line in lines:
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.strip() == BRANCH_MARK:
                branches.append([])
            else:
                comments.append(line[1:].strip())
            continue
        if columns is None:
            columns = line.split(",")
            continue
        branches[-1].append(line.split(","))
    return columns or [], [b for b in branches if b], comments


# -- svg --------------------------------------------------------------------

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=80, right=20, top=30, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _range(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        pad = 0.5 * abs(lo) if lo else 1.0
        return lo - pad, hi + pad
    pad = 0.03 * (hi - lo)
    return lo - pad, hi + pad


def _label(v: float) -> str:
    return f"{v:.6g}"


def write_svg(branches: Sequence[tuple[np.ndarray, np.ndarray]], out: IO[str], xlabel: str = "", ylabel: str = "", title: str = "") -> None:
    """One polyline per branch with axes, ticks and labels; no external assets."""
    data = [(np.asarray(x, float), np.asarray(y, float)) for x, y in branches if len(x)]
    if data:
        xs = np.concatenate([x for x, _ in data])
        ys = np.concatenate([y for _, y in data])
        x0, x1 = _range(xs[np.isfinite(xs)] if np.isfinite(xs).any() else np.array([0.0]))
        y0, y1 = _range(ys[np.isfinite(ys)] if np.isfinite(ys).any() else np.array([0.0]))
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)
    tx = MARGIN["left"] - sx * x0
    ty = MARGIN["top"] + ph + sy * y0

    def px(x):
        return tx + sx * x

    def py(y):
        return ty - sy * y

    root = ET.Element("svg", xmlns=SVG_NS, width=str(WIDTH), height=str(HEIGHT), viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(root, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    axes = ET.SubElement(root, "g", {"class": "axes", "stroke": "black", "font-family": "sans-serif", "font-size": "12"})
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    ET.SubElement(axes, "rect", x=str(left), y=str(MARGIN["top"]), width=str(pw), height=str(ph), fill="none")
    for v in MaxNLocator(nbins=6).tick_values(x0, x1):
        if x0 <= v <= x1:
            X = f"{px(v):.3f}"
            ET.SubElement(axes, "line", x1=X, y1=str(bottom), x2=X, y2=str(bottom + 5))
            t = ET.SubElement(axes, "text", {"x": X, "y": str(bottom + 20), "text-anchor": "middle", "stroke": "none"})
            t.text = _label(v)
    for v in MaxNLocator(nbins=6).tick_values(y0, y1):
        if y0 <= v <= y1:
            Y = f"{py(v):.3f}"
            ET.SubElement(axes, "line", x1=str(left - 5), y1=Y, x2=str(left), y2=Y)
            t = ET.SubElement(axes, "text", {"x": str(left - 8), "y": Y, "text-anchor": "end", "dominant-baseline": "middle", "stroke": "none"})
            t.text = _label(v)
    if xlabel:
        t = ET.SubElement(axes, "text", {"x": f"{left + pw / 2:.1f}", "y": str(HEIGHT - 15), "text-anchor": "middle", "stroke": "none"})
        t.text = xlabel
    if ylabel:
        cy = MARGIN["top"] + ph / 2
        t = ET.SubElement(axes, "text", {"x": "20", "y": f"{cy:.1f}", "text-anchor": "middle", "stroke": "none", "transform": f"rotate(-90 20 {cy:.1f})"})
        t.text = ylabel
    if title:
        t = ET.SubElement(axes, "text", {"x": f"{WIDTH / 2:.1f}", "y": "20", "text-anchor": "middle", "stroke": "none"})
        t.text = title
    plot = ET.SubElement(root, "g", {"class": "data", "transform": f"matrix({fmt(sx)} 0 0 {fmt(-sy)} {fmt(tx)} {fmt(ty)})"})
    for i, (x, y) in enumerate(data):
        pts = " ".join(f"{fmt(a)},{fmt(b)}" for a, b in zip(x, y) if math.isfinite(a) and math.isfinite(b))
        ET.SubElement(
            plot,
            "polyline",
            {
                "class": "branch",
                "points": pts,
                "fill": "none",
                "stroke": COLORS[i % len(COLORS)],
                "stroke-width": "1.5",
                "vector-effect": "non-scaling-stroke",
            },
        )
    ET.indent(root)
    out.write(ET.tostring(root, encoding="unicode"))
    out.write("\n")


def read_svg_polylines(text: str) -> list[np.ndarray]:
    """Data-coordinate points of every branch polyline, as ``(m, 2)`` arrays."""
    root = ET.fromstring(text)
    out = []
    for el in root.iter(f"{{{SVG_NS}}}polyline"):
        if el.get("class") != "branch":
            continue
        pts = el.get("points", "").split()
        out.append(np.array([[float(v) for v in p.split(",")] for p in pts]).reshape(-1, 2))
    return out


def curve_branches(curve: SolutionCurve, lam_on_x: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    """Branches as ``(lambda, alpha)`` pairs (bifurcation-diagram orientation) or ``(xi, mu)`` pairs."""
    out = []
    for i in range(len(curve.branches)):
        a, l = curve.branch_arrays(i)
        out.append((l, a) if lam_on_x else (a, l))
    return out
