"""scikit-learn style front end: ``fit`` chooses pages, ``transform`` inserts PSIs."""
from __future__ import annotations

import time

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .analysis import solve
from .errors import CapacityError
from .frg import build_frg
from .partition import exhaustive_partition, greedy_partition
from .psi import first_fit, insert_psi, naive_placement
from .validation import check_program, check_same_functions


class _ProgramEstimator(BaseEstimator, TransformerMixin):
    def _check(self, X, allow_psi=False):
        return check_program(X, allow_psi=allow_psi, page_count=self.page_count,
                             page_size=self.page_size, psi_cost=self.psi_cost,
                             prevalue=self.prevalue)

    def __sklearn_is_fitted__(self):
        return hasattr(self, "assignment_")


class PageSelectionOptimizer(_ProgramEstimator):
    """Assign functions to pages so that few page selection instructions are needed.

    Parameters
    ----------
    page_count, page_size, psi_cost, prevalue : optional
        Override the program header.
    partitioner : {"greedy", "exhaustive"}
    objective : {"residual", "psi"}
        Only used by the exhaustive partitioner.
    conservative_size : bool or "auto"
        Do not credit a page with the PSI words a placed function may save.
        ``"auto"`` credits them first and falls back to conservative sizing
        if the exactly sized result overflows a page.

    Attributes
    ----------
    program_, dataflow_, frg_, assignment_, timings_,
    size_mode_ : "optimistic" or "conservative", the greedy sizing actually used
    """

    def __init__(self, page_count=None, page_size=None, psi_cost=None, prevalue=None,
                 partitioner="greedy", objective="residual", conservative_size=False):
        self.page_count = page_count
        self.page_size = page_size
        self.psi_cost = psi_cost
        self.prevalue = prevalue
        self.partitioner = partitioner
        self.objective = objective
        self.conservative_size = conservative_size

    def fit(self, X, y=None):
        if self.conservative_size not in (True, False, "auto"):
            raise ValueError(f"conservative_size must be a bool or 'auto', got {self.conservative_size!r}")
        if self.partitioner not in ("greedy", "exhaustive"):
            raise ValueError(f"unknown partitioner {self.partitioner!r}")
        program = self._check(X)
        timings = {}
        t0 = time.perf_counter()
        self.dataflow_ = solve(program)
        self.dataflow_.vop_masks()
        t1 = time.perf_counter()
        self.frg_ = build_frg(program, self.dataflow_)
        t2 = time.perf_counter()
        self.size_mode_ = "conservative" if self.conservative_size is True else "optimistic"
        if self.partitioner == "greedy":
            self.assignment_ = greedy_partition(self.frg_, program, self.conservative_size is True)
            if self.conservative_size == "auto":
                try:
                    insert_psi(program, self.assignment_, self.dataflow_)
                except CapacityError:
                    self.assignment_ = greedy_partition(self.frg_, program, True)
                    self.size_mode_ = "conservative"
        else:
            self.assignment_ = exhaustive_partition(self.frg_, program, self.objective,
                                                    d=self.dataflow_)
        t3 = time.perf_counter()
        timings["analysis"] = (t1 - t0) * 1e3
        timings["frg"] = (t2 - t1) * 1e3
        timings["partition"] = (t3 - t2) * 1e3
        self.program_ = program
        self.timings_ = timings
        return self

    def transform(self, X):
        check_is_fitted(self)
        program = self._check(X)
        t0 = time.perf_counter()
        if program == self.program_:
            d = self.dataflow_
        else:
            check_same_functions(program, self.program_)
            d = solve(program)
        out = insert_psi(program, self.assignment_, d)
        self.timings_["psi"] = (time.perf_counter() - t0) * 1e3
        return out

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).transform(self.program_)


class NaivePlacement(_ProgramEstimator):
    """Baseline: first-fit pages in declaration order, a PSI before every PNTI."""

    def __init__(self, page_count=None, page_size=None, psi_cost=None, prevalue=None):
        self.page_count = page_count
        self.page_size = page_size
        self.psi_cost = psi_cost
        self.prevalue = prevalue

    def fit(self, X, y=None):
        program = self._check(X)
        self.assignment_ = first_fit(program)
        self.program_ = program
        return self

    def transform(self, X):
        check_is_fitted(self)
        program = self._check(X)
        check_same_functions(program, self.program_)
        return naive_placement(program)
