"""Page selection instruction optimization for paged-program-memory MCUs."""

__version__ = "0.1.0"

from .analysis import DataflowResult, gen_kill, oracle_vop_paths, ret_vop, solve
from .errors import CapacityError, InstanceTooLarge, NoFeasibleAssignment, NotEnoughMemory
from .estimator import NaivePlacement, PageSelectionOptimizer
from .frg import Frg, build_frg
from .generate import GenSpec, generate
from .ir import Config, IRError, Program, build_cfg, format_program, parse_program, strip_psi
from .partition import (PageAssignment, exhaustive_partition, greedy_partition,
                        residual_cost, saved_weight)
from .psi import OptimizedProgram, code_size, insert_psi, naive_placement, required_page
from .report import make_report, merge_reports, optimize
from .vm import PageFault, Trace, equivalent, layout, run

__all__ = [
    "CapacityError", "Config", "DataflowResult", "Frg", "GenSpec", "IRError",
    "InstanceTooLarge", "NaivePlacement", "NoFeasibleAssignment", "NotEnoughMemory",
    "OptimizedProgram", "PageAssignment", "PageFault", "PageSelectionOptimizer", "Program",
    "Trace", "build_cfg", "build_frg", "code_size", "equivalent", "exhaustive_partition",
    "format_program", "gen_kill", "generate", "greedy_partition", "insert_psi", "layout",
    "make_report", "merge_reports", "naive_placement", "optimize", "oracle_vop_paths",
    "parse_program", "required_page", "residual_cost", "ret_vop", "run", "saved_weight",
    "solve", "strip_psi",
]
