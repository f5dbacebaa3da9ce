"""Static SVG figures (matplotlib, Agg backend, reproducible bytes)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

_RC = {"svg.hashsalt": "steklov-trace", "svg.fonttype": "none"}


def loglog_svg(h, errors, title: str, path, reference_order: float = 2.0) -> Path:
    """Log-log plot of ``errors`` against ``h`` with an ``h^order`` guide."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.loglog(h, errors, "o-", label="relative error")
        guide = errors[-1] * (h / h[-1]) ** reference_order
        ax.loglog(h, guide, "--", color="gray", label=f"h^{reference_order:g}")
        ax.set_xlabel("h")
        ax.set_ylabel("error")
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
