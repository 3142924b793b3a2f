"""Self-contained SVG line charts for the concentration report (no plotting library)."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

__all__ = ["line_chart_svg", "report_plots"]

W, H = 480, 320
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart_svg(x, y, *, title="", xlabel="", ylabel="", logx=False, logy=False) -> str:
    """One polyline with markers; nonpositive values are dropped on log axes."""
    pts = [(a, b) for a, b in zip(x, y)
           if math.isfinite(a) and math.isfinite(b) and (a > 0 or not logx) and (b > 0 or not logy)]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>']
    x0, x1, y0, y1 = LEFT, W - RIGHT, H - BOTTOM, TOP
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>')
    if pts:
        xs = [tx(a) for a, _ in pts]
        ys = [ty(b) for _, b in pts]
        xlo, xhi = min(xs), max(xs)
        ylo, yhi = min(ys), max(ys)
        if xhi == xlo:
            xlo, xhi = xlo - 1, xhi + 1
        if yhi == ylo:
            ylo, yhi = ylo - 1, yhi + 1
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad

        def px(v):
            return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

        def py(v):
            return y0 - (v - ylo) / (yhi - ylo) * (y0 - y1)

        for t in _ticks(xlo, xhi):
            label = f"1e{t:.1f}" if logx else f"{t:.3g}"
            out.append(f'<text x="{px(t):.1f}" y="{y0 + 16}" text-anchor="middle" font-size="10">{label}</text>')
        for t in _ticks(ylo, yhi):
            label = f"1e{t:.1f}" if logy else f"{t:.3g}"
            out.append(f'<text x="{x0 - 6}" y="{py(t) + 3:.1f}" text-anchor="end" font-size="10">{label}</text>')
        path = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline points="{path}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
        out += [f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="steelblue"/>' for a, b in zip(xs, ys)]
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="12">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def report_plots(rows, out_dir) -> list:
    """gap, d2 and rho against gamma, and log gap against log eps; returns the written paths."""
    out_dir = Path(out_dir)
    g = [r.gamma for r in rows]
    charts = {
        "gap_vs_gamma.svg": dict(x=g, y=[r.gap for r in rows], title="energy gap", xlabel="gamma",
                                 ylabel="e - e~", logy=True),
        "d2_vs_gamma.svg": dict(x=g, y=[r.d2 for r in rows], title="profile distance", xlabel="gamma",
                                ylabel="d2"),
        "rho_vs_gamma.svg": dict(x=g, y=[r.rho for r in rows], title="concentration rate", xlabel="gamma",
                                 ylabel="|z - y0| / eps"),
        "gap_rate_loglog.svg": dict(x=[r.epsilon for r in rows], y=[r.gap for r in rows],
                                    title="gap against eps", xlabel="eps", ylabel="e - e~", logx=True, logy=True),
    }
    paths = []
    for name, kw in charts.items():
        p = out_dir / name
        p.write_text(line_chart_svg(**kw))
        paths.append(p)
    return paths
