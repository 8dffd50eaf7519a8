"""Plain-text table rendering for CLI output and run reports."""

from __future__ import annotations

from .cost import CostSnapshot, ReductionReport
from .prune import PruneReport, RateSelection

__all__ = [
    "render_table",
    "render_gate_tables",
    "render_prune_steps",
    "render_summary",
]


def render_table(headers: list[str], rows: list[list], title: str | None = None) -> str:
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    sep = "-+-".join("-" * w for w in widths)
    lines = []
    if title:
        lines.append(title)
    lines.append(" | ".join(h.ljust(w) for h, w in zip(cells[0], widths)))
    lines.append(sep)
    for row in cells[1:]:
        lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}" if abs(v) < 100 else f"{v:.1f}"
    return str(v)


def render_gate_tables(weights: dict) -> str:
    """Sensor and per-sensor rate weight-score tables, sorted descending."""
    parts = []
    sensor_rows = sorted(weights["sensors"].items(), key=lambda kv: (-kv[1], kv[0]))
    parts.append(render_table(["sensor", "weight score"], sensor_rows, title="Sensor weight scores"))
    for sid, per_rate in weights["rates"].items():
        rows = sorted(per_rate.items(), key=lambda kv: (-kv[1], -kv[0]))
        parts.append(
            render_table(["rate (Hz)", "weight score"], rows, title=f"Rate weight scores: {sid}")
        )
    return "\n\n".join(parts)


def render_prune_steps(report: PruneReport) -> str:
    rows = []
    for i, s in enumerate(report.steps, start=1):
        rows.append(
            [
                i,
                s.removed_sensor,
                "yes" if s.removed_sensor in report.pruned else "no",
                _opt(s.metric_after),
                _opt(s.metric_after_finetune),
                s.cost_after.params,
                f"{s.cost_after.data_rate:.0f}",
            ]
        )
    title = (
        f"Progressive pruning ({report.metric_name} on {report.split} split, "
        f"baseline {_opt(report.baseline_metric)})"
    )
    return render_table(
        ["step", "removed", "applied", report.metric_name, "after finetune", "params", "data rate"],
        rows,
        title=title,
    )


def _opt(v) -> str:
    return "-" if v is None else f"{v:.4f}"


def render_summary(
    pruned_sensors: list[str],
    reduction: ReductionReport,
    selection: RateSelection | None,
    selection_reduction: ReductionReport | None,
    metric_name: str,
) -> str:
    """One result-summary table: pruning row group, then rate-selection group."""
    rows = [
        ["Pruned sensors", ", ".join(pruned_sensors) if pruned_sensors else "(none)"],
        [f"Performance reduction ({metric_name}, points)", f"{reduction.performance_reduction_points:.2f}"],
        ["Model size reduction (MB)", reduction.size_summary()],
        ["Model size reduction (%)", f"{reduction.size_reduction_pct:.0f}%"],
        ["MACs/window reduction (%)", f"{reduction.macs_reduction_pct:.0f}%"],
        ["Data rate reduction (%)", f"{reduction.data_rate_reduction_pct:.0f}%"],
    ]
    if selection is not None:
        sel = ", ".join(f"{r:g}({sid})" for sid, r in sorted(selection.rates.items()))
        rows.append(["Selected sampling rate (Hz)", sel])
        if selection_reduction is not None:
            rows.append(
                [
                    f"Performance reduction after selection ({metric_name}, points)",
                    f"{selection_reduction.performance_reduction_points:.2f}",
                ]
            )
            rows.append(["Model size after selection (MB)", f"{selection_reduction.size_after_mb:.2f}"])
            rows.append(
                ["Data rate reduction after selection (%)", f"{selection_reduction.data_rate_reduction_pct:.0f}%"]
            )
    return render_table(["item", "value"], rows, title="Result summary")
