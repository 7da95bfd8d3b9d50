"""File-target matplotlib renderings for the CLI report paths."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .dispatch import DispatchRow  # noqa: E402
from .efficiency import EfficiencyCurve  # noqa: E402
from .interdependency import LagProfile  # noqa: E402


def save_efficiency_curve(curve: EfficiencyCurve, path: str | Path,
                          threshold: float | None = None) -> None:
    """Raw points, extrapolated points, and the preferred operating band."""
    threshold = curve.threshold if threshold is None else threshold
    fig, ax = plt.subplots(figsize=(7, 4.5))
    raw = [p for p in curve.points if not p.estimated]
    est = [p for p in curve.points if p.estimated]
    if raw:
        ax.plot([p.flow for p in raw], [p.efficiency for p in raw], "o",
                ms=4, color="tab:blue", label="observed")
    if est:
        ax.plot([p.flow for p in est], [p.efficiency for p in est], "^",
                ms=4, color="tab:orange", label="extrapolated")
    ax.axhline(threshold, color="tab:red", lw=1, ls="--",
               label=f"threshold {threshold:.2f}")
    if curve.band:
        ax.axvspan(curve.band[0], curve.band[1], color="tab:green", alpha=0.15,
                   label="efficient band")
    ax.set_xlabel("flow (cfs)")
    ax.set_ylabel("efficiency")
    ax.set_title(f"Efficiency curve: {curve.unit_id}")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_lag_profile(profile: LagProfile, path: str | Path) -> None:
    """Correlation against lag, best lag highlighted."""
    lags, corrs = zip(*profile.table())
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(lags, corrs, "o-", color="tab:blue")
    ax.axvline(profile.best_lag, color="tab:red", lw=1, ls="--",
               label=f"best lag {profile.best_lag} h")
    ax.set_xlabel("lag (hours)")
    ax.set_ylabel("correlation")
    season = profile.season.value if profile.season else "all seasons"
    ax.set_title(f"Streamflow correlation {profile.upstream} -> "
                 f"{profile.downstream} ({season})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_dispatch_summary(rows: Sequence[DispatchRow], path: str | Path) -> None:
    """Per-unit dispatched MW against available capacity."""
    rows = sorted(rows, key=lambda r: (r.project, r.unit_id))
    labels = [f"{r.project}\n{r.unit_id}" for r in rows]
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(max(7, 0.8 * len(rows)), 4.5))
    ax.bar(x, [r.pmax_available for r in rows], color="lightgray",
           label="available")
    ax.bar(x, [r.pgen_calculated for r in rows], color="tab:blue", width=0.55,
           label="dispatched")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("MW")
    ax.set_title("Unit dispatch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
