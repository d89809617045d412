"""Line-chart output: a dependency-free SVG writer and matplotlib report figures."""
from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

from .errors import ShapeError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

WIDTH, HEIGHT = 800, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 20, 40


def _xy(series):
    if isinstance(series, tuple) and len(series) == 2:
        x, y = (np.asarray(a, dtype=float).ravel() for a in series)
    else:
        y = np.asarray(series, dtype=float).ravel()
        x = np.arange(len(y), dtype=float)
    if len(y) == 0 or len(x) != len(y):
        raise ShapeError("every series must be non-empty with matching x and y")
    return x, y


def _decimate(x, y, max_points):
    if len(y) <= max_points:
        return x, y
    stride = math.ceil(len(y) / max_points)
    return x[::stride], y[::stride]


def _ticks(lo, hi, count=5):
    if hi == lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int(math.floor((hi - first) / step + 1e-9)) + 1)]


def emit_plot_svg(series_list, labels, path, *, title=None, xlabel="", ylabel="", max_points=2000):
    """Write a standalone SVG line chart: one polyline per series, ticks and a legend.

    Each entry of ``series_list`` is a 1-D array (plotted against its index) or an
    ``(x, y)`` pair. Long series are stride-decimated to ``max_points``.
    """
    if len(series_list) != len(labels):
        raise ShapeError(f"{len(series_list)} series but {len(labels)} labels")
    data = [_decimate(*_xy(s), max_points) for s in series_list]
    xs = np.concatenate([d[0] for d in data])
    ys = np.concatenate([d[1] for d in data])
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return MARGIN_T + (yhi - v) / (yhi - ylo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    for v in _ticks(xlo, xhi):
        x = sx(v)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T + ph}" x2="{x:.2f}" y2="{MARGIN_T + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + ph + 17}" text-anchor="middle">{v:.6g}</text>')
    for v in _ticks(ylo, yhi):
        y = sy(v)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" stroke="#333"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.6g}</text>')
    if xlabel:
        out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 5}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {MARGIN_T + ph / 2:.2f})">{escape(ylabel)}</text>')
    for k, ((x, y), label) in enumerate(zip(data, labels)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = MARGIN_T + 12 + 18 * k
        lx = MARGIN_L + pw + 12
        out.append(f'<g class="legend-entry"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>'
                   f'<text x="{lx + 26}" y="{ly + 4}">{escape(str(label))}</text></g>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({
        "figure.figsize": (8, 3.6),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
        "legend.fontsize": 8,
        "svg.hashsalt": "thermoforecast",
    })
    return plt


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None} if path.suffix == ".png" else None)
    fig.clf()


def figure_trace(trace, path, window=None):
    """Indoor temperature and heater power over the run (optionally the windowed average)."""
    plt = _pyplot()
    fig, (ax_t, ax_p) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    hours = trace.times / 3600.0
    ax_t.plot(hours, trace.indoor_temp, lw=0.6)
    ax_t.set_ylabel("indoor temperature [°C]")
    ax_p.plot(hours, trace.heater_power, lw=0.3, label="switching")
    if window is not None:
        from .thermal import average_power

        t, avg = average_power(trace, window)
        ax_p.step(t / 3600.0, avg, where="post", lw=0.8, label=f"{window:g} s average")
        ax_p.legend(loc="upper right")
    ax_p.set_ylabel("heater power [W]")
    ax_p.set_xlabel("time [h]")
    _save(fig, path)
    plt.close(fig)


def figure_forecast(times, predictions, observations, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots()
    hours = np.asarray(times, dtype=float) / 3600.0
    obs = np.asarray(observations, dtype=float)
    mask = np.isfinite(obs)
    ax.plot(hours[mask], obs[mask], lw=0.8, label="observed")
    ax.plot(hours, predictions, lw=0.8, label="forecast")
    ax.set_xlabel("time [h]")
    ax.set_title(title)
    ax.legend(loc="upper right")
    _save(fig, path)
    plt.close(fig)


def figure_loss(history, path):
    plt = _pyplot()
    fig, ax = plt.subplots()
    ax.semilogy(np.arange(1, len(history) + 1), history)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training MSE (standardized)")
    _save(fig, path)
    plt.close(fig)
