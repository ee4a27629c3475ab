"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import os
from fractions import Fraction
from pathlib import Path

from .ir import Program, parse_program, strip_psi
from .partition import PageAssignment

PRESETS = {
    # 11 address bits per page -> 2K-word pages
    "pic16f7x": {"page_count": 4, "page_size": 2048},
    "hr6p90h-8k": {"page_count": 4, "page_size": 2048},
    "hr6p90h-16k": {"page_count": 8, "page_size": 2048},
}


def check_program(X, allow_psi=False, page_count=None, page_size=None, psi_cost=None,
                  prevalue=None) -> Program:
    """Accept a Program, IR text, or a path to an IR file; apply config overrides."""
    if isinstance(X, Program):
        program = X
        if program.psi_count and not allow_psi:
            raise ValueError("program contains PSIs; strip them or pass allow_psi=True")
    elif isinstance(X, (os.PathLike, Path)):
        program = parse_program(Path(X).read_text(), allow_psi=allow_psi)
    elif isinstance(X, str):
        if "\n" not in X and os.path.exists(X):
            X = Path(X).read_text()
        program = parse_program(X, allow_psi=allow_psi)
    else:
        raise TypeError(f"expected a Program, IR text or path, got {type(X).__name__}")

    changes = {}
    if page_count is not None:
        changes["page_count"] = int(page_count)
    if page_size is not None:
        changes["page_size"] = int(page_size)
    if psi_cost is not None:
        changes["psi_cost"] = int(psi_cost)
        if prevalue is None and program.config.prevalue == program.config.psi_cost:
            # keep the default coupling prevalue == psi_cost
            changes["prevalue"] = None
    if prevalue is not None:
        changes["prevalue"] = Fraction(prevalue)
    return program.with_config(**changes) if changes else program


def check_same_functions(program: Program, reference: Program):
    if program.function_ids != reference.function_ids:
        raise ValueError("program's functions differ from the ones the estimator was fitted on")


def check_assignment(a: PageAssignment, program: Program) -> PageAssignment:
    missing = [f for f in program.function_ids if f not in a.func_page]
    if missing:
        raise ValueError(f"assignment misses functions {missing}")
    extra = [f for f in a.func_page if f not in program]
    if extra:
        raise ValueError(f"assignment names unknown functions {extra}")
    for f, q in a.func_page.items():
        if not 0 <= q < program.config.page_count:
            raise ValueError(f"function {f!r} assigned to page {q} outside [0, {program.config.page_count})")
    return a


def read_assignment(text: str, program: Program) -> PageAssignment:
    """Parse ``<function> <page>`` lines (the ``partition`` output format).

    Lines naming something other than a function of ``program`` are ignored,
    as are ``#`` comments.
    """
    func_page = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if len(parts) != 2 or parts[0] not in program or parts[0] in func_page:
            continue
        try:
            func_page[parts[0]] = int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: bad page number {parts[1]!r}") from None
    a = PageAssignment({f: func_page[f] for f in program.function_ids if f in func_page}, {})
    return check_assignment(a, program)


def unoptimized(program: Program) -> Program:
    return strip_psi(program) if program.psi_count else program
