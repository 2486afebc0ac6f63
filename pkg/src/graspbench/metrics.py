"""Scoring: SR / PE / SPL, first-step RSR / SSR, Rouge-L, and report assembly.

Record inputs are plain dicts (the results-JSONL schema) so reports can be
rebuilt from files without re-running episodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import EmptyInput, MissingFields
from .masks import mask_iou  # re-exported: the harness-wide IoU lives in masks

__all__ = [
    "mask_iou",
    "success_rate",
    "path_efficiency",
    "spl",
    "rsr",
    "ssr",
    "rouge_l",
    "mean_pairwise_rouge_l",
    "aggregate_report",
    "MetricReport",
    "REFERENCE_TRIPLES",
    "verify_reference_triples",
]

# Published real-robot (SR, PE, SPL) triples from prior bin-picking
# evaluations; used to re-verify the SPL = SR * PE identity under
# two-decimal rounding whenever a report is built.
REFERENCE_TRIPLES: tuple[tuple[float, float, float], ...] = (
    # stop on S/P/M
    (0.60, 1.0, 0.60), (0.40, 0.71, 0.28),
    (0.50, 1.0, 0.50), (0.80, 0.85, 0.68), (0.20, 1.0, 0.20),
    (0.20, 1.0, 0.20), (0.10, 1.0, 0.10),
    # stop on P/M
    (0.70, 1.0, 0.70), (0.10, 1.0, 0.10),
    (0.70, 1.0, 0.70), (0.20, 1.0, 0.20), (0.10, 1.0, 0.10),
    # stop on P
    (1.0, 0.95, 0.95), (0.70, 0.74, 0.52), (0.40, 0.92, 0.37),
    (0.10, 0.67, 0.07), (0.10, 1.0, 0.10),
    (0.90, 0.94, 0.85), (0.60, 0.92, 0.55), (0.40, 0.90, 0.36),
    (0.20, 1.0, 0.20),
)


def verify_reference_triples(tolerance: float = 0.01) -> list[tuple]:
    """Return the reference triples violating |SR*PE - SPL| <= tolerance (expected none)."""
    return [t for t in REFERENCE_TRIPLES if abs(t[0] * t[1] - t[2]) > tolerance]


def success_rate(records: list[dict]) -> float:
    if not records:
        raise EmptyInput("success_rate needs at least one record")
    return sum(1 for r in records if r["success"]) / len(records)


def path_efficiency(records: list[dict]) -> tuple[float, bool]:
    """Mean l/p over successful episodes; (0.0, flagged=True) with no successes."""
    succ = [r for r in records if r["success"]]
    if not succ:
        return 0.0, True
    return sum(r["l"] / r["p"] for r in succ) / len(succ), False


def spl(records: list[dict]) -> float:
    if not records:
        raise EmptyInput("spl needs at least one record")
    return sum(r["l"] / r["p"] for r in records if r["success"]) / len(records)


def _first_step(record: dict) -> Optional[dict]:
    steps = record.get("steps")
    return steps[0] if steps else None


def rsr(records: list[dict]) -> float:
    """Fraction of episodes whose first decision resolved to a valid pick."""
    if not records:
        raise EmptyInput("rsr needs at least one record")
    hits = 0
    for r in records:
        step = _first_step(r)
        if step is None:
            continue  # episode errored before any step: counts as a miss
        if "gt_valid_set" not in step:
            raise MissingFields("record step lacks gt_valid_set")
        if not step["gt_valid_set"]:
            raise MissingFields("empty gt_valid_set: corrupted record")
        if step.get("resolved_id") in step["gt_valid_set"]:
            hits += 1
    return hits / len(records)


def ssr(records: list[dict]) -> float:
    """Fraction of episodes whose first mask hits a valid pick at IoU >= 0.5."""
    if not records:
        raise EmptyInput("ssr needs at least one record")
    hits = 0
    for r in records:
        step = _first_step(r)
        if step is None:
            continue
        if "mask_ok" not in step:
            raise MissingFields("record step lacks mask_ok")
        if step["mask_ok"]:
            hits += 1
    return hits / len(records)


def rouge_l(a: str, b: str) -> float:
    """LCS F-measure over lowercased whitespace tokens; 0 when either is empty."""
    ta = a.lower().split()
    tb = b.lower().split()
    if not ta or not tb:
        return 0.0
    # classic LCS DP, rows over ta
    prev = [0] * (len(tb) + 1)
    for x in ta:
        cur = [0]
        for j, y in enumerate(tb, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    lcs = prev[-1]
    if lcs == 0:
        return 0.0
    precision = lcs / len(tb)
    recall = lcs / len(ta)
    return 2 * precision * recall / (precision + recall)


def mean_pairwise_rouge_l(instructions) -> float:
    pairs = [
        (instructions[i], instructions[j])
        for i in range(len(instructions))
        for j in range(i + 1, len(instructions))
    ]
    if not pairs:
        return 0.0
    return sum(rouge_l(a, b) for a, b in pairs) / len(pairs)


def _population_std(values: list[float]) -> float:
    n = len(values)
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / n)


@dataclass
class CellReport:
    per_index: dict[int, dict[str, float]]  # instruction index -> metric -> value
    mean: dict[str, float]
    std: dict[str, float]
    flags: list[str] = field(default_factory=list)


@dataclass
class MetricReport:
    cells: dict[str, CellReport]
    localization: Optional[dict[str, float]] = None
    instruction_stats: Optional[dict[str, float]] = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cells": {
                cell: {
                    "per_index": cr.per_index,
                    "mean": cr.mean,
                    "std": cr.std,
                    "flags": cr.flags,
                }
                for cell, cr in self.cells.items()
            },
            "localization": self.localization,
            "instruction_stats": self.instruction_stats,
            "flags": self.flags,
        }


_CELL_METRICS = ("SR", "PE", "SPL", "RSR", "SSR")


def _cell_metrics(records: list[dict]) -> tuple[dict[str, float], list[str]]:
    flags = []
    pe, pe_flag = path_efficiency(records)
    if pe_flag:
        flags.append("PE over zero successes reported as 0")
    return (
        {
            "SR": success_rate(records),
            "PE": pe,
            "SPL": spl(records),
            "RSR": rsr(records),
            "SSR": ssr(records),
        },
        flags,
    )


def aggregate_report(
    records: list[dict],
    cell_by_scenario: dict[str, str],
    instructions_by_scenario: Optional[dict[str, list[str]]] = None,
    embedding_provider: Optional[Callable[[str], list[float]]] = None,
    gpt_scores: Optional[dict[str, float]] = None,
    localization: Optional[dict[str, float]] = None,
) -> MetricReport:
    """Per-difficulty-cell metrics (mean +- population std across instruction
    variants) plus optional instruction-similarity statistics.

    cell_by_scenario maps scenario_id -> difficulty cell. Cells with no
    records are absent from the report, never zero-filled.
    """
    if not records:
        raise EmptyInput("aggregate_report needs at least one record")
    violations = verify_reference_triples()
    report_flags = [f"reference triple violates SPL identity: {v}" for v in violations]

    grouped: dict[str, dict[int, list[dict]]] = {}
    for r in records:
        cell = cell_by_scenario.get(r["scenario_id"])
        if cell is None:
            raise MissingFields(f"no difficulty cell for scenario {r['scenario_id']}")
        grouped.setdefault(cell, {}).setdefault(r["instruction_index"], []).append(r)

    cells: dict[str, CellReport] = {}
    for cell, by_index in sorted(grouped.items()):
        per_index: dict[int, dict[str, float]] = {}
        cell_flags: list[str] = []
        for idx in sorted(by_index):
            metrics, flags = _cell_metrics(by_index[idx])
            per_index[idx] = metrics
            cell_flags.extend(f"index {idx}: {f}" for f in flags)
        mean = {
            m: sum(per_index[i][m] for i in per_index) / len(per_index)
            for m in _CELL_METRICS
        }
        std = {
            m: _population_std([per_index[i][m] for i in per_index])
            for m in _CELL_METRICS
        }
        cells[cell] = CellReport(per_index=per_index, mean=mean, std=std, flags=cell_flags)

    instruction_stats = None
    if instructions_by_scenario:
        rouges = [
            mean_pairwise_rouge_l(instrs)
            for instrs in instructions_by_scenario.values()
            if len(instrs) >= 2
        ]
        instruction_stats = {}
        if rouges:
            instruction_stats["rouge_l_mean"] = sum(rouges) / len(rouges)
        if embedding_provider is not None:
            sims = []
            for instrs in instructions_by_scenario.values():
                if len(instrs) < 2:
                    continue
                vecs = [embedding_provider(t) for t in instrs]
                pair_sims = [
                    _cosine(vecs[i], vecs[j])
                    for i in range(len(vecs))
                    for j in range(i + 1, len(vecs))
                ]
                sims.append(sum(pair_sims) / len(pair_sims))
            if sims:
                instruction_stats["embedding_mean"] = sum(sims) / len(sims)
        else:
            report_flags.append("embedding score skipped: no provider configured")
        if gpt_scores:
            instruction_stats["gpt_score_mean"] = sum(gpt_scores.values()) / len(gpt_scores)

    return MetricReport(
        cells=cells,
        localization=localization,
        instruction_stats=instruction_stats,
        flags=report_flags,
    )


def _cosine(a, b) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def render_table(report: MetricReport) -> str:
    """Aligned-text table: one row per difficulty cell, mean +- std per metric."""
    header = f"{'cell':<16}" + "".join(f"{m:>16}" for m in _CELL_METRICS)
    lines = [header, "-" * len(header)]
    for cell, cr in report.cells.items():
        row = f"{cell:<16}"
        for m in _CELL_METRICS:
            row += f"{cr.mean[m]:>9.3f}±{cr.std[m]:<6.3f}"
        lines.append(row)
    if report.localization:
        loc = report.localization
        lines.append(
            f"localization: AP={loc['AP']:.3f} AR={loc['AR']:.3f} F1={loc['F1']:.3f}"
        )
    if report.instruction_stats:
        stats = " ".join(f"{k}={v:.3f}" for k, v in report.instruction_stats.items())
        lines.append(f"instructions: {stats}")
    for flag in report.flags:
        lines.append(f"note: {flag}")
    return "\n".join(lines)
