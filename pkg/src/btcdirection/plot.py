"""Dependency-free SVG line chart of cumulative P&L against scaled price."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping
from xml.sax.saxutils import escape

import numpy as np

from .trading import PricePath, TradeLedger, buy_and_hold

W, H = 900, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _polyline(xs, ys, color, dash=False) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    extra = ' stroke-dasharray="6,4"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.8"{extra} points="{pts}"/>'


def render_svg(series: Mapping[str, np.ndarray], prices: PricePath, title: str = "Profit and loss vs BTC price") -> str:
    """P&L curves in USD plus the close min-max scaled onto the P&L axis.

    Every curve has one value per price day (day 0 is 0 for P&L).
    """
    n = len(prices)
    curves = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    for k, v in curves.items():
        if len(v) != n:
            raise ValueError(f"series {k!r} has {len(v)} points for {n} price days")
    stacked = np.concatenate([*curves.values(), [0.0]])
    lo, hi = float(stacked.min()), float(stacked.max())
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    c = prices.close
    span = c.max() - c.min()
    scaled = np.full(n, 0.5) if span == 0 else (c - c.min()) / span
    price_curve = lo + scaled * (hi - lo)

    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    xs = LEFT + (np.arange(n) / max(n - 1, 1)) * pw

    def ymap(v):
        return TOP + ph - (np.asarray(v) - lo) / (hi - lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        y = ymap(v)
        out.append(f'<line x1="{LEFT - 4}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{v:,.0f}</text>')
    for idx in sorted({0, n // 2, n - 1}):
        x = xs[idx]
        out.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{prices.dates[idx]}</text>')
    out.append(f'<text x="{LEFT + pw // 2}" y="{H - 15}" text-anchor="middle" font-family="sans-serif" font-size="12">Date</text>')
    out.append(
        f'<text x="18" y="{TOP + ph // 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {TOP + ph // 2})">Cumulative P&amp;L (USD)</text>'
    )
    legend = [("BTC price (scaled)", "#7f7f7f", True)]
    out.append(_polyline(xs, ymap(price_curve), "#7f7f7f", dash=True))
    for i, (name, v) in enumerate(curves.items()):
        color = COLORS[i % len(COLORS)]
        out.append(_polyline(xs, ymap(v), color))
        legend.append((name, color, False))
    lx = LEFT + pw + 15
    for i, (name, color, dash) in enumerate(legend):
        y = TOP + 10 + 20 * i
        d = ' stroke-dasharray="6,4"' if dash else ""
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 22}" y2="{y}" stroke="{color}" stroke-width="2"{d}/>')
        out.append(f'<text x="{lx + 28}" y="{y + 4}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def ledger_curve(ledger: TradeLedger) -> np.ndarray:
    """Cumulative P&L per price day, starting at 0 on the first day."""
    return np.concatenate(([0.0], ledger.cumulative_pnl))


def emit_plot(ledger: TradeLedger, prices: PricePath, path: str | Path, label: str = "strategy", with_buy_and_hold: bool = False) -> Path:
    if not ledger.entries:
        raise ValueError("cannot plot an empty ledger")
    if len(ledger.entries) != len(prices) - 1:
        raise ValueError("ledger does not align with the price path")
    series = {label: ledger_curve(ledger)}
    if with_buy_and_hold:
        series["buy and hold"] = buy_and_hold(prices)
    path = Path(path)
    path.write_text(render_svg(series, prices))
    return path


def emit_overlay(ledgers: Mapping[str, TradeLedger], prices: PricePath, path: str | Path, title: str) -> Path:
    series = {name: ledger_curve(l) for name, l in ledgers.items()}
    series["buy and hold"] = buy_and_hold(prices)
    path = Path(path)
    path.write_text(render_svg(series, prices, title))
    return path
