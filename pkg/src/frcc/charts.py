"""Chart exports: CSV and JSON always, SVG on request (needs matplotlib)."""

from __future__ import annotations

import json
from pathlib import Path

from ._util import atomic_write_text
from .monitor import ChartResult, MonitorModel


def chart_rows(results: list[ChartResult], model: MonitorModel) -> list[dict]:
    return [
        {
            "day": r.day.isoformat() if hasattr(r.day, "isoformat") else str(r.day),
            "t2": r.t2,
            "t2_limit": model.t2_limit,
            "t2_alarm": r.t2_alarm,
            "spe": r.spe,
            "spe_limit": model.spe_limit,
            "spe_alarm": r.spe_alarm,
            "phase": r.phase,
        }
        for r in results
    ]


def write_chart_csv(results: list[ChartResult], model: MonitorModel,
                    path: str | Path) -> None:
    header = "day,t2,t2_limit,t2_alarm,spe,spe_limit,spe_alarm,phase"
    lines = [header]
    for row in chart_rows(results, model):
        lines.append(",".join([
            row["day"], repr(row["t2"]), repr(row["t2_limit"]),
            "true" if row["t2_alarm"] else "false",
            repr(row["spe"]), repr(row["spe_limit"]),
            "true" if row["spe_alarm"] else "false",
            row["phase"],
        ]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_chart_json(results: list[ChartResult], model: MonitorModel,
                     path: str | Path) -> None:
    doc = {
        "t2_limit": model.t2_limit,
        "spe_limit": model.spe_limit,
        "alpha_total": model.alpha_total,
        "results": chart_rows(results, model),
    }
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def write_surface_csv(surface, path: str | Path) -> None:
    """Coefficient surface as long-form (s, t, value) rows."""
    from .fofreg import surface_to_rows

    lines = ["s,t,value"]
    for s, t, v in surface_to_rows(surface):
        lines.append(f"{s!r},{t!r},{v!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def render_charts_svg(results: list[ChartResult], model: MonitorModel,
                      path: str | Path) -> None:
    """Two stacked panels (T2, SPE): points, dashed limits, phase divider."""
    try:
        import matplotlib
    except ImportError:
        raise RuntimeError(
            "SVG rendering needs matplotlib; install the 'svg' extra") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    idx = range(1, len(results) + 1)
    divider = None
    for i, r in enumerate(results):
        if r.phase != "I":
            divider = i + 0.5
            break
    fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    panels = [("T2", [r.t2 for r in results], model.t2_limit,
               [r.t2_alarm for r in results]),
              ("SPE", [r.spe for r in results], model.spe_limit,
               [r.spe_alarm for r in results])]
    for ax, (label, vals, limit, alarms) in zip(axes, panels):
        colors = ["tab:red" if a else "tab:blue" for a in alarms]
        ax.scatter(idx, vals, s=12, c=colors)
        ax.plot(idx, vals, lw=0.5, color="gray", alpha=0.6)
        ax.axhline(limit, ls="--", color="black", lw=1)
        if divider is not None:
            ax.axvline(divider, ls=":", color="green", lw=1)
        ax.set_ylabel(label)
    axes[1].set_xlabel("observation")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
