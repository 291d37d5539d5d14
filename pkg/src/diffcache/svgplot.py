"""Self-contained SVG chart emitter (no external assets, deterministic output)."""

from __future__ import annotations

from pathlib import Path

WIDTH = 720
HEIGHT = 440
MARGIN_LEFT = 70
MARGIN_RIGHT = 170
MARGIN_TOP = 50
MARGIN_BOTTOM = 60

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="28" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{_esc(title)}</text>',
    ]


def _axes(x_label: str, y_label: str) -> list[str]:
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 18}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{_esc(x_label)}</text>',
        f'<text x="20" y="{(y0 + y1) // 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 20 {(y0 + y1) // 2})">{_esc(y_label)}</text>',
    ]


def line_chart(series, title: str, x_label: str, y_label: str) -> str:
    """series: list of (label, [(x, y), ...]); None y values are skipped."""
    parts = _header(title) + _axes(x_label, y_label)
    cleaned = [
        (label, [(x, y) for x, y in pts if y is not None]) for label, pts in series
    ]
    cleaned = [(label, pts) for label, pts in cleaned if pts]
    if not cleaned:
        parts.append(
            f'<text x="{WIDTH // 2}" y="{HEIGHT // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14" fill="#888">no data</text>'
        )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    xs = [x for _, pts in cleaned for x, _ in pts]
    ys = [y for _, pts in cleaned for _, y in pts]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    if x_max == x_min:
        x_max = x_min + 1
    if y_max == y_min:
        y_max = y_min + 1
    px0, px1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    py0, py1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP

    def sx(x):
        return px0 + (x - x_min) / (x_max - x_min) * (px1 - px0)

    def sy(y):
        return py0 - (y - y_min) / (y_max - y_min) * (py0 - py1)

    for tick, value in (("min", y_min), ("max", y_max)):
        y = sy(value)
        parts.append(
            f'<text x="{px0 - 6}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{value:.4g}</text>'
        )
        del tick
    for value in (x_min, x_max):
        parts.append(
            f'<text x="{_fmt(sx(value))}" y="{py0 + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{value:.4g}</text>'
        )

    for i, (label, pts) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>'
        )
        ly = MARGIN_TOP + 16 * i
        parts.append(
            f'<line x1="{px1 + 10}" y1="{ly}" x2="{px1 + 30}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{px1 + 36}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{_esc(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(labels, values, title: str, y_label: str) -> str:
    parts = _header(title) + _axes("", y_label)
    pairs = [(l, v) for l, v in zip(labels, values) if v is not None]
    if not pairs:
        parts.append(
            f'<text x="{WIDTH // 2}" y="{HEIGHT // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14" fill="#888">no data</text>'
        )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"
    v_max = max(max(v for _, v in pairs), 1e-12)
    px0, px1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    py0, py1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    slot = (px1 - px0) / len(pairs)
    for i, (label, value) in enumerate(pairs):
        color = PALETTE[i % len(PALETTE)]
        h = (value / v_max) * (py0 - py1)
        x = px0 + i * slot + slot * 0.15
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(py0 - h)}" width="{_fmt(slot * 0.7)}" '
            f'height="{_fmt(h)}" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_fmt(x + slot * 0.35)}" y="{py0 + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{_esc(label)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(x + slot * 0.35)}" y="{_fmt(py0 - h - 4)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{value:.4g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_report_plots(reports: list[dict]) -> dict[str, str]:
    """Standard chart set for one or more run reports."""
    svgs = {}
    svgs["feature_mse.svg"] = line_chart(
        [
            (r["strategy"], list(enumerate(r["feature_mse"])))
            for r in reports
        ],
        "Per-step feature MSE vs full inference",
        "sampling step",
        "feature MSE",
    )
    trend = reports[0].get("bias_trend", []) if reports else []
    svgs["bias_trend.svg"] = line_chart(
        [
            ("low-frequency energy", [(row["t"], row["low_energy"]) for row in trend]),
            ("high-frequency energy", [(row["t"], row["high_energy"]) for row in trend]),
        ],
        "CFG bias spectrum energy by timestep",
        "diffusion timestep",
        "energy",
    )
    svgs["efficiency.svg"] = bar_chart(
        [r["strategy"] for r in reports],
        [r["timing"]["latency_s"] for r in reports],
        "Wall-clock latency by strategy",
        "seconds",
    )
    svgs["macs.svg"] = bar_chart(
        [r["strategy"] for r in reports],
        [r["macs"]["total"] for r in reports],
        "Analytic MACs by strategy",
        "MACs",
    )
    return svgs


def write_plots(reports: list[dict], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, svg in render_report_plots(reports).items():
        p = out / name
        p.write_text(svg)
        paths.append(p)
    return paths
