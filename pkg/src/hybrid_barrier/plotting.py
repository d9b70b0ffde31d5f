"""Optional PNG rendering of the CSV tables (requires matplotlib)."""

from __future__ import annotations

import csv
from pathlib import Path


def plot_csv(path) -> Path | None:
    """Plot every numeric column except standard errors against the first; None if not numeric."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib: pip install 'artifact[plot]'") from exc
    path = Path(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    try:
        cols = [[float(v) if v else float("nan") for v in col] for col in zip(*body)]
    except ValueError:
        return None
    if len(cols) < 2:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, col in zip(header[1:], cols[1:]):
        if not name.endswith("_se"):
            ax.plot(cols[0], col, label=name)
    ax.set_xlabel(header[0])
    ax.legend()
    ax.set_title(path.stem)
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out


def plot_csv_dir(out_dir) -> list[Path]:
    return [p for p in (plot_csv(f) for f in sorted(Path(out_dir).glob("*.csv"))) if p is not None]
