"""Render assessment reports as human-readable text, CSV, and JSON.

Scores are stored as fractions internally and shown as percentages here,
rounded half-up to two decimals. Rendering is pure and deterministic:
verdicts are ordered by object label, then constraint name.
"""

from __future__ import annotations

import csv
import io
from decimal import ROUND_HALF_UP, Decimal

from .refine import Trajectory
from .scene import dump_json
from .verifiers import AssessmentReport, PASS, SKIPPED

CSV_COLUMNS = ("id", "Sem", "Ori", "ProxOvlp", "TrueOvlp", "Avg")


def percent(fraction: float) -> str:
    """Fraction -> percent string, two decimals, half-up."""
    return str((Decimal(repr(fraction)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _mark(kind: str) -> str:
    return "✓" if kind == PASS else "✗"


def _verdict_lines(report: AssessmentReport) -> dict[str, list[str]]:
    semantic: list[tuple[str, str, str]] = []  # (sort key, constraint, line)

    for res in report.scale:
        for axis in res.axes:
            if axis.kind == SKIPPED:
                continue
            constraint = f"scale({axis.axis})"
            semantic.append((res.label, constraint, f"{_mark(axis.kind)} {res.label}: {constraint}: {axis.detail}"))

    for pair in report.cooccurrence:
        if pair.kind == SKIPPED:
            continue
        label = f"{pair.a} ↔ {pair.b}"
        semantic.append((label, "cooccurrence", f"{_mark(pair.kind)} {label}: cooccurrence: {pair.detail}"))

    if report.completeness is not None:
        for diff in report.completeness.labels:
            if diff.missing:
                semantic.append((diff.label, "completeness",
                                 f"✗ {diff.label}: completeness: missing {diff.missing} of {diff.expected}"))
            if diff.extra:
                semantic.append((diff.label, "completeness",
                                 f"✗ {diff.label}: completeness: {diff.extra} extra"))
            if not diff.missing and not diff.extra and diff.expected:
                semantic.append((diff.label, "completeness",
                                 f"✓ {diff.label}: completeness: {diff.matched} of {diff.expected} placed"))

    orientation: list[tuple[str, str, str]] = []
    for res in report.orientation:
        for check in res.checks:
            constraint = check.check if check.target is None else f"{check.check}({check.target})"
            orientation.append((res.label, constraint,
                                f"{_mark(check.kind)} {res.label}: {constraint}: {check.detail}"))

    overlap: list[tuple[str, str, str]] = []
    for name, verdicts in (("proximity_overlap", report.overlap_aabb), ("true_overlap", report.overlap_obb)):
        for pair in verdicts:
            label = f"{pair.label_a}#{pair.index_a} ↔ {pair.label_b}#{pair.index_b}"
            overlap.append((label, name, f"{_mark(pair.kind)} {label}: {name}: {pair.detail}"))

    return {
        "semantic": [line for _, _, line in sorted(semantic, key=lambda t: (t[0], t[1], t[2]))],
        "orientation": [line for _, _, line in sorted(orientation, key=lambda t: (t[0], t[1], t[2]))],
        "overlap": [line for _, _, line in sorted(overlap, key=lambda t: (t[0], t[1], t[2]))],
    }


def render_text(report: AssessmentReport) -> str:
    """Fixed-order textual rendering: scores block, then grouped verdicts."""
    s = report.scores
    lines = [
        "scores (%)",
        f"  semantic:          {percent(s.semantic)}",
        f"    scale:           {percent(s.scale)}",
        f"    co-occurrence:   {percent(s.cooccur)}",
    ]
    if s.complete is not None:
        lines.append(f"    completeness:    {percent(s.complete)}")
    lines += [
        f"  orientation:       {percent(s.orientation)}",
        f"  proximity overlap: {percent(s.prox_overlap)}",
        f"  true overlap:      {percent(s.true_overlap)}",
        f"  average:           {percent(s.average)}",
    ]
    sections = _verdict_lines(report)
    for section in ("semantic", "orientation", "overlap"):
        if sections[section]:
            lines.append("")
            lines.append(section)
            lines.extend("  " + line for line in sections[section])
    if report.support_info:
        lines.append("")
        lines.append("support priors (informational)")
        for label in sorted(report.support_info):
            surfaces = ", ".join(
                f"{surface} {percent(fraction)}%" for surface, fraction in report.support_info[label].items()
            )
            lines.append(f"  {label}: rests on {surfaces}")
    return "\n".join(lines) + "\n"


def _score_row(row_id: str, report: AssessmentReport) -> list[str]:
    s = report.scores
    return [row_id, percent(s.semantic), percent(s.orientation),
            percent(s.prox_overlap), percent(s.true_overlap), percent(s.average)]


def render_csv(reports: list[tuple[str, AssessmentReport]]) -> str:
    """One row per scene; columns: id, Sem, Ori, ProxOvlp, TrueOvlp, Avg."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row_id, report in reports:
        writer.writerow(_score_row(row_id, report))
    return buffer.getvalue()


def render_trajectory_csv(trajectory: Trajectory) -> str:
    """One row per trajectory step that produced a report."""
    rows = [
        (str(step.index), step.report)
        for step in trajectory.steps
        if step.report is not None
    ]
    return render_csv(rows)


def render_json(report: AssessmentReport) -> str:
    return dump_json(report.to_dict())
