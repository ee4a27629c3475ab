"""Per-program and corpus reports (schema 1)."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .estimator import NaivePlacement, PageSelectionOptimizer
from .frg import Frg
from .ir import Program
from .partition import PageAssignment, residual_cost, saved_weight
from .psi import OptimizedProgram

SCHEMA = 1
MEAN_DEFINITION = "unweighted arithmetic mean of per-program ratios s_opt / s_naive"


def _rational(x: Fraction) -> str:
    return str(Fraction(x))


def _pages(o: OptimizedProgram) -> list:
    size = o.program.config.page_size
    return [{"page": q, "used": used, "capacity": size} for q, used in enumerate(o.occupancy())]


def make_report(name: str, p: Program, naive: OptimizedProgram, opt: OptimizedProgram,
                frg: Frg, assignment: PageAssignment,
                timings: Optional[dict] = None) -> dict:
    residual = residual_cost(frg, assignment)
    saved = saved_weight(frg, assignment)
    report = {
        "schema": SCHEMA,
        "program": name,
        "nof": len(p.functions),
        "pnti": p.pnti_count,
        "s_base": p.base_size,
        "s_naive": naive.total_size,
        "s_opt": opt.total_size,
        "psi_naive": naive.psi_count,
        "psi_opt": opt.psi_count,
        "ratio": opt.total_size / naive.total_size,
        "frg_total": _rational(frg.total_weight),
        "residual": _rational(residual),
        "saved": _rational(saved),
        "func_page": {f: assignment.func_page[f] for f in p.function_ids},
        "pages": _pages(opt),
        "pages_naive": _pages(naive),
    }
    if timings is not None:
        report["timings_ms"] = {k: round(v, 3) for k, v in timings.items()}
    return report


def without_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timings_ms"}


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


@dataclass
class PipelineResult:
    naive: OptimizedProgram
    optimized: OptimizedProgram
    estimator: PageSelectionOptimizer
    report: dict


def optimize(program: Program, name: str = "program", **params) -> PipelineResult:
    """Naive baseline and optimized program side by side, with the report.

    ``params`` go to :class:`PageSelectionOptimizer`.
    """
    naive = NaivePlacement().fit_transform(program)
    est = PageSelectionOptimizer(**params)
    opt = est.fit_transform(program)
    report = make_report(name, est.program_, naive, opt, est.frg_, est.assignment_,
                         est.timings_)
    return PipelineResult(naive, opt, est, report)


def merge_reports(reports: list) -> dict:
    """Corpus summary; per-program rows keep input order."""
    rows = [{"program": r["program"], "nof": r["nof"], "s_naive": r["s_naive"],
             "s_opt": r["s_opt"], "psi_naive": r["psi_naive"], "psi_opt": r["psi_opt"],
             "ratio": r["ratio"]} for r in reports]
    n = len(rows)
    s_naive = sum(r["s_naive"] for r in rows)
    s_opt = sum(r["s_opt"] for r in rows)
    return {
        "schema": SCHEMA,
        "programs": n,
        "mean_ratio": sum(r["ratio"] for r in rows) / n if n else None,
        "mean_definition": MEAN_DEFINITION,
        "size_weighted_ratio": s_opt / s_naive if s_naive else None,
        "s_naive_total": s_naive,
        "s_opt_total": s_opt,
        "psi_naive_total": sum(r["psi_naive"] for r in rows),
        "psi_opt_total": sum(r["psi_opt"] for r in rows),
        "rows": rows,
    }
