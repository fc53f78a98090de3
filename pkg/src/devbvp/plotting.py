"""Static figures for CLI output, rendered with the Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "alpha": dict(color="0.55", ls="--", lw=1.0),
    "beta": dict(color="0.55", ls=":", lw=1.0),
    "x_least": dict(color="tab:blue", lw=1.6),
    "x_greatest": dict(color="tab:red", lw=1.2, ls="-."),
    "w": dict(color="tab:green", lw=1.4),
    "x": dict(color="tab:blue", lw=1.6),
}


def plot_columns(path, t: np.ndarray, columns: Mapping[str, np.ndarray], title: str = "",
                 deltas: Optional[Mapping[str, Sequence[float]]] = None):
    """Line plot of every column against t.

    With ``deltas`` a second panel shows the iteration increments on a log
    scale.  The figure is written to ``path``; the format follows its suffix.
    """
    path = Path(path)
    panels = 2 if deltas else 1
    fig, axes = plt.subplots(1, panels, figsize=(5.2 * panels, 3.8), squeeze=False)
    ax = axes[0, 0]
    for name, vals in columns.items():
        ax.plot(t, vals, label=name, **_STYLE.get(name, {}))
    ax.set_xlabel("t")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    if deltas:
        ax2 = axes[0, 1]
        for name, seq in deltas.items():
            d = np.asarray(seq, dtype=float)
            d = np.where(d > 0, d, np.nan)
            ax2.semilogy(np.arange(1, d.size + 1), d, marker=".", label=name)
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("increment")
        ax2.grid(alpha=0.3, which="both")
        ax2.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical for png
    meta = {"Software": None} if path.suffix.lower() == ".png" else {}
    fig.savefig(path, dpi=120, metadata=meta or None)
    plt.close(fig)
    return path
