"""Markdown reports (census tables, compile runs, cost estimates) and their PDF rendering."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Sequence

from markdown_pdf import MarkdownPdf, Section

from rpipe.census import CENSUS_COLUMNS, Census, ProgramEstimate
from rpipe.compiler.search import CompileResult
from rpipe.hwgen import CostReport

logger = logging.getLogger(__name__)


def _table(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines.extend("| " + " | ".join(str(c) for c in row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


def census_markdown(rows: Sequence[tuple[str, Census]]) -> str:
    return _table(("Artifact", *CENSUS_COLUMNS), ((name, *c.row()) for name, c in rows))


def estimate_markdown(name: str, estimate: ProgramEstimate) -> str:
    text = f"## Estimate: {name}\n"
    text += f"- ALU operations: {estimate.alu_count}\n"
    text += f"- Critical compute path: {estimate.alu_depth}\n"
    text += f"- Minimum stages: {estimate.stage_depth}\n"
    text += f"- Peak live words: {estimate.peak_live_words}\n\n"
    if estimate.live_words:
        text += _table(
            ("Boundary", "Live words", "Live flags"),
            ((i, w, f) for i, (w, f) in enumerate(zip(estimate.live_words, estimate.live_flags))),
        )
    return text


def compile_markdown(program: str, arch: str, result: CompileResult) -> str:
    text = "# Compile Report\n"
    text += f"- Program: {program}\n- Architecture: {arch}\n"
    text += f"- Outcome: {result.outcome} ({result.stats.reason})\n"
    text += f"- Tries: {len(result.stats.tries)}\n- Wall time: {result.stats.seconds:.2f}s\n"
    text += "## Tries\n"
    text += _table(
        ("Try", "Degree limit", "Seed", "Verdict", "Vars", "Clauses", "Seconds"),
        (
            (t.index, t.degree_limit or "none", f"{t.seed:#018x}", t.status, t.var_count, t.clause_count, f"{t.seconds:.2f}")
            for t in result.stats.tries
        ),
    )
    if result.config is not None:
        c = result.config
        text += "## Configuration\n"
        text += f"- Router selections: {len(c.router_select)}\n- ALU operations: {len(c.alu_op)}\n"
        text += f"- Runtime constants: {len(c.const_value)}\n"
        for state, memory in sorted(c.mem_bind.items()):
            text += f"- {state} bound to {memory}\n"
    return text


def cost_markdown(name: str, cost: CostReport) -> str:
    text = f"# Cost Estimate: {name}\n"
    text += f"- Area (relative units): {cost.area}\n- Depth: {cost.depth} cycles\n"
    text += f"- Configuration bits: {cost.config_bits}\n\n"
    kinds = sorted(set(cost.counts) | set(cost.area_by_kind))
    text += _table(("Kind", "Count", "Area"), ((k, cost.counts.get(k, 0), cost.area_by_kind.get(k, 0.0)) for k in kinds))
    return text


def save_pdf(markdown: str, path: str | Path, title: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pdf = MarkdownPdf(toc_level=2, optimize=True)
    pdf.add_section(Section(markdown))
    pdf.meta["title"] = title
    pdf.save(str(path))
    logger.info("wrote report %s", path)
    return path
