"""Figure rendering for sweep reports (static files next to the data)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .sweep import ConvergenceReport

__all__ = ["save_report_figures"]


def save_report_figures(report: ConvergenceReport, out_path) -> list[Path]:
    """Render convergence and hole-geometry figures beside the report file.

    Returns the list of written figure paths; rows marked failed are
    skipped.  Yields <stem>_convergence.png and <stem>_holes.png.
    """
    out_path = Path(out_path)
    base = out_path.with_suffix("")
    rows = [r for r in report.rows if r.status == "ok"]
    written: list[Path] = []
    if not rows:
        return written
    hs = [r.h for r in rows]

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    have_curve = False
    rel = [r.rel_l2_err for r in rows]
    if all(math.isfinite(v) for v in rel):
        ax.semilogy(hs, rel, "o-", label="relative L2 error")
        have_curve = True
    corr = [r.corrector_l2 for r in rows]
    if all(math.isfinite(v) for v in corr) and any(v > 0 for v in corr):
        ax.semilogy(hs, corr, "s--", label="corrector L2 deficit")
        have_curve = True
    if have_curve:
        ax.set_xlabel("grid level h")
        ax.set_ylabel("error")
        ax.set_xticks(hs)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        ax.set_title(report.scenario, fontsize=8)
        fig.tight_layout()
        path = Path(f"{base}_convergence.png")
        fig.savefig(path, dpi=150)
        written.append(path)
    plt.close(fig)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 3.2))
    ax1.bar([str(h) for h in hs], [r.holes for r in rows], color="tab:gray")
    ax1.set_xlabel("grid level h")
    ax1.set_ylabel("holes")
    ax2.semilogy(hs, [max(r.min_radius, 1e-300) for r in rows], "v-", label="min radius")
    ax2.semilogy(hs, [max(r.max_radius, 1e-300) for r in rows], "^-", label="max radius")
    ax2.semilogy(hs, [r.spacing for r in rows], ":", label="mesh spacing")
    ax2.set_xlabel("grid level h")
    ax2.set_ylabel("length")
    ax2.set_xticks(hs)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    path = Path(f"{base}_holes.png")
    fig.savefig(path, dpi=150)
    written.append(path)
    plt.close(fig)
    return written
