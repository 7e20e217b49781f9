"""Evaluation report assembly and serialization (JSON / CSV / SVG).

Reports deliberately carry no wall-clock timestamps: identical inputs and
seeds must serialize to identical bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__ as _version
from .errors import PartialReport
from .reid import ReidSummary
from .stats import BlandAltman, NcrResult, TradeoffPoint
from .svgplot import bland_altman_svg, tradeoff_svg


@dataclass
class ToolBlock:
    """Per-tool evaluation results; missing parts flagged with a reason."""

    tool: str
    wilcoxon_adjusted: dict[str, float] = field(default_factory=dict)
    wilcoxon_rejected: dict[str, bool] = field(default_factory=dict)
    wilcoxon_degenerate: list[str] = field(default_factory=list)
    cr: dict[str, float] = field(default_factory=dict)
    ncr: NcrResult | None = None
    mean_dice: dict[str, float] = field(default_factory=dict)
    reid: ReidSummary | None = None
    tradeoff: TradeoffPoint | None = None
    bland_altman: dict[str, BlandAltman] = field(default_factory=dict)
    partial_reason: str | None = None


@dataclass
class EvaluationReport:
    tools: dict[str, ToolBlock] = field(default_factory=dict)
    seed: int | None = None
    config: dict = field(default_factory=dict)
    version: str = _version

    def block(self, tool: str) -> ToolBlock:
        if tool not in self.tools:
            self.tools[tool] = ToolBlock(tool=tool)
        return self.tools[tool]


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def report_json(report: EvaluationReport) -> str:
    return json.dumps(_to_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_report(report: EvaluationReport, path) -> None:
    Path(path).write_text(report_json(report))


def write_tradeoff_csv(points: list[TradeoffPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tool", "ncr", "ncr_spread", "mean_inverse_distance", "inv_dist_spread"])
        for p in sorted(points, key=lambda q: q.tool):
            writer.writerow(
                [p.tool, repr(p.ncr), repr(p.ncr_spread), repr(p.mean_inverse_distance), repr(p.inv_dist_spread)]
            )


def emit_svg_plots(report: EvaluationReport, out_dir) -> list[Path]:
    """Write every plot the report supports; error out on missing blocks.

    Bland-Altman plots per tool and region, plus one trade-off plot when
    every tool carries a trade-off point.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not report.tools:
        raise PartialReport("report has no tool blocks")
    written = []
    for tool in sorted(report.tools):
        block = report.tools[tool]
        for region in sorted(block.bland_altman):
            svg = bland_altman_svg(block.bland_altman[region], title=f"{tool}: {region}")
            path = out_dir / f"bland_altman_{tool}_{region}.svg"
            path.write_text(svg)
            written.append(path)
    missing = [t for t, b in sorted(report.tools.items()) if b.tradeoff is None]
    if not missing:
        points = [report.tools[t].tradeoff for t in sorted(report.tools)]
        path = out_dir / "tradeoff.svg"
        path.write_text(tradeoff_svg(points))
        written.append(path)
    elif len(missing) < len(report.tools):
        raise PartialReport(f"trade-off points missing for: {', '.join(missing)}")
    return written
