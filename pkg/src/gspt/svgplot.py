"""Minimal standalone SVG 1.1 output: polylines, markers, cells, axes.

No plotting dependency: documents are assembled as strings. Figure
convention follows the analysis plots: the characteristic (critical curve)
is drawn in green and equilibria in red.
"""

import math

GREEN = "#1a9850"       # characteristic / critical curve
RED = "#d73027"         # equilibria
BLACK = "#1c1c1c"
BLUE = "#4575b4"
ORANGE = "#fc8d59"
GRAY = "#bbbbbb"


def _nice_ticks(lo, hi, target=6):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / max(target, 2)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    t0 = math.ceil(lo / step) * step
    ticks = []
    t = t0
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _log_ticks(lo, hi):
    ticks = []
    d = math.floor(math.log10(lo))
    while 10.0 ** d <= hi * (1 + 1e-12):
        if 10.0 ** d >= lo * (1 - 1e-12):
            ticks.append(10.0 ** d)
        d += 1
    return ticks or [lo, hi]


def _fmt_tick(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return "%.0e" % v
    return ("%.4g" % v)


class SvgPlot:
    """Data-space drawing surface rendered to an SVG document with axes."""

    def __init__(self, width=640, height=480, title="", xlabel="", ylabel="",
                 xlog=False, ylog=False):
        self.width, self.height = width, height
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xlog, self.ylog = xlog, ylog
        self.margin = (64, 20, 24, 52)      # left, right, top, bottom
        self._shapes = []                   # (kind, payload)
        self._xs, self._ys = [], []

    def _track(self, xs, ys):
        for x in xs:
            if math.isfinite(x) and (not self.xlog or x > 0):
                self._xs.append(x)
        for y in ys:
            if math.isfinite(y) and (not self.ylog or y > 0):
                self._ys.append(y)

    def polyline(self, points, color=BLACK, width=1.5, dashed=False,
                 opacity=1.0):
        pts = [(float(x), float(y)) for x, y in points]
        self._track([p[0] for p in pts], [p[1] for p in pts])
        self._shapes.append(("poly", (pts, color, width, dashed, opacity)))

    def scatter(self, points, color=BLACK, r=3.5):
        pts = [(float(x), float(y)) for x, y in points]
        self._track([p[0] for p in pts], [p[1] for p in pts])
        self._shapes.append(("dots", (pts, color, r)))

    def cell(self, x0, x1, y0, y1, color, label=None):
        self._track([x0, x1], [y0, y1])
        self._shapes.append(("cell", (x0, x1, y0, y1, color, label)))

    def hline(self, y, color=GRAY, dashed=True):
        self._shapes.append(("hline", (y, color, dashed)))

    def vline(self, x, color=GRAY, dashed=True):
        self._shapes.append(("vline", (x, color, dashed)))

    # ------------------------------------------------------------ rendering

    def _limits(self):
        xs = self._xs or [0.0, 1.0]
        ys = self._ys or [0.0, 1.0]
        xlo, xhi = min(xs), max(xs)
        ylo, yhi = min(ys), max(ys)
        if self.xlog:
            pad = (xhi / xlo) ** 0.05 if xhi > xlo else 2.0
            xlo, xhi = xlo / pad, xhi * pad
        else:
            pad = 0.05 * (xhi - xlo) or max(1.0, abs(xlo))
            xlo, xhi = xlo - pad, xhi + pad
        if self.ylog:
            pad = (yhi / ylo) ** 0.05 if yhi > ylo else 2.0
            ylo, yhi = ylo / pad, yhi * pad
        else:
            pad = 0.05 * (yhi - ylo) or max(1.0, abs(ylo))
            ylo, yhi = ylo - pad, yhi + pad
        return xlo, xhi, ylo, yhi

    def to_svg(self):
        ml, mr, mt, mb = self.margin
        iw = self.width - ml - mr
        ih = self.height - mt - mb
        xlo, xhi, ylo, yhi = self._limits()

        def tx(x):
            if self.xlog:
                f = (math.log(x) - math.log(xlo)) / (math.log(xhi) - math.log(xlo))
            else:
                f = (x - xlo) / (xhi - xlo)
            return ml + f * iw

        def ty(y):
            if self.ylog:
                f = (math.log(y) - math.log(ylo)) / (math.log(yhi) - math.log(ylo))
            else:
                f = (y - ylo) / (yhi - ylo)
            return mt + (1.0 - f) * ih

        out = ['<?xml version="1.0" encoding="UTF-8"?>',
               f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
               f'width="{self.width}" height="{self.height}" '
               f'viewBox="0 0 {self.width} {self.height}">',
               f'<rect x="0" y="0" width="{self.width}" '
               f'height="{self.height}" fill="white"/>']

        for kind, payload in self._shapes:
            if kind == "cell":
                x0, x1, y0, y1, color, label = payload
                xa, xb = sorted((tx(x0), tx(x1)))
                ya, yb = sorted((ty(y0), ty(y1)))
                out.append(f'<rect x="{xa:.2f}" y="{ya:.2f}" '
                           f'width="{xb - xa:.2f}" height="{yb - ya:.2f}" '
                           f'fill="{color}" stroke="white" stroke-width="1"/>')
                if label is not None:
                    out.append(f'<text x="{0.5 * (xa + xb):.2f}" '
                               f'y="{0.5 * (ya + yb) + 4:.2f}" '
                               f'font-family="sans-serif" font-size="13" '
                               f'text-anchor="middle">{label}</text>')
        for kind, payload in self._shapes:
            if kind == "poly":
                pts, color, width, dashed, opacity = payload
                coords = " ".join(f"{tx(x):.2f},{ty(y):.2f}" for x, y in pts
                                  if math.isfinite(tx(x)) and math.isfinite(ty(y)))
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                op = f' stroke-opacity="{opacity}"' if opacity < 1 else ""
                out.append(f'<polyline points="{coords}" fill="none" '
                           f'stroke="{color}" stroke-width="{width}"{dash}{op}/>')
            elif kind == "hline":
                y, color, dashed = payload
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                out.append(f'<line x1="{ml}" y1="{ty(y):.2f}" '
                           f'x2="{ml + iw}" y2="{ty(y):.2f}" '
                           f'stroke="{color}" stroke-width="1"{dash}/>')
            elif kind == "vline":
                x, color, dashed = payload
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                out.append(f'<line x1="{tx(x):.2f}" y1="{mt}" '
                           f'x2="{tx(x):.2f}" y2="{mt + ih}" '
                           f'stroke="{color}" stroke-width="1"{dash}/>')
        for kind, payload in self._shapes:
            if kind == "dots":
                pts, color, r = payload
                for x, y in pts:
                    out.append(f'<circle cx="{tx(x):.2f}" cy="{ty(y):.2f}" '
                               f'r="{r}" fill="{color}"/>')

        # frame and ticks
        out.append(f'<rect x="{ml}" y="{mt}" width="{iw}" height="{ih}" '
                   f'fill="none" stroke="{BLACK}" stroke-width="1"/>')
        xticks = _log_ticks(xlo, xhi) if self.xlog else _nice_ticks(xlo, xhi)
        yticks = _log_ticks(ylo, yhi) if self.ylog else _nice_ticks(ylo, yhi)
        for t in xticks:
            if not xlo <= t <= xhi:
                continue
            px = tx(t)
            out.append(f'<line x1="{px:.2f}" y1="{mt + ih}" x2="{px:.2f}" '
                       f'y2="{mt + ih + 5}" stroke="{BLACK}" stroke-width="1"/>')
            out.append(f'<text x="{px:.2f}" y="{mt + ih + 18}" '
                       f'font-family="sans-serif" font-size="11" '
                       f'text-anchor="middle">{_fmt_tick(t)}</text>')
        for t in yticks:
            if not ylo <= t <= yhi:
                continue
            py = ty(t)
            out.append(f'<line x1="{ml - 5}" y1="{py:.2f}" x2="{ml}" '
                       f'y2="{py:.2f}" stroke="{BLACK}" stroke-width="1"/>')
            out.append(f'<text x="{ml - 8}" y="{py + 4:.2f}" '
                       f'font-family="sans-serif" font-size="11" '
                       f'text-anchor="end">{_fmt_tick(t)}</text>')
        if self.title:
            out.append(f'<text x="{ml + iw / 2:.2f}" y="{mt - 6}" '
                       f'font-family="sans-serif" font-size="14" '
                       f'text-anchor="middle">{self.title}</text>')
        if self.xlabel:
            out.append(f'<text x="{ml + iw / 2:.2f}" y="{self.height - 10}" '
                       f'font-family="sans-serif" font-size="12" '
                       f'text-anchor="middle">{self.xlabel}</text>')
        if self.ylabel:
            px, py = 16, mt + ih / 2
            out.append(f'<text x="{px}" y="{py:.2f}" font-family="sans-serif" '
                       f'font-size="12" text-anchor="middle" '
                       f'transform="rotate(-90 {px} {py:.2f})">{self.ylabel}</text>')
        out.append("</svg>")
        return "\n".join(out)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_svg())
