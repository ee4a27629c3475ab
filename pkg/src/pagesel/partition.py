"""Function-to-page assignment: greedy heuristic, brute-force oracle, cost."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Callable, Optional

import numpy as np

from .analysis import DataflowResult, solve
from .errors import InstanceTooLarge, NoFeasibleAssignment, NotEnoughMemory
from .frg import Frg, _sites
from .ir import Program

MAX_EXHAUSTIVE_FUNCTIONS = 10
MAX_EXHAUSTIVE_PAGES = 3


@dataclass
class PageAssignment:
    func_page: dict
    page_free: dict

    def page_of(self, f: str) -> int:
        return self.func_page[f]

    def members(self, page: int) -> list:
        return [f for f, q in self.func_page.items() if q == page]

    def vector(self, functions) -> tuple:
        return tuple(self.func_page[f] for f in functions)


def estimated_size(f, psi_cost: int) -> int:
    """Pessimistic size: one PSI before every PNTI."""
    return f.base_size + psi_cost * f.pnti_count


def greedy_partition(frg: Frg, p: Program, conservative_size: bool = False,
                     on_place: Optional[Callable] = None) -> PageAssignment:
    """Greedy page filling driven by accumulated page affinity.

    The largest function seeds page 0. Each step takes the unplaced function
    with the greatest affinity to the current page; if it does not fit there
    it goes to the fitting page it has the most affinity to, which becomes
    current. A fit requires strictly more free words than the function's
    pessimistic size. After each placement (other than the seed) the page
    is credited the PSI words the function may save, unless
    ``conservative_size`` is set.

    ``on_place(f, page, weight_table, func_page)`` is called after every
    placement with the live affinity table (page -> {unplaced f: weight}).
    """
    cfg = p.config
    ids = p.function_ids
    order = {f: k for k, f in enumerate(ids)}
    est = {f.id: estimated_size(f, cfg.psi_cost) for f in p.functions}
    credit = {f.id: cfg.psi_cost * f.pnti_count for f in p.functions}
    free = [cfg.page_size] * cfg.page_count
    table = [{f: Fraction(0) for f in ids} for _ in range(cfg.page_count)]
    unplaced = list(ids)
    func_page = {}

    def place(f, page, complement):
        free[page] -= est[f]
        if complement and not conservative_size:
            free[page] += credit[f]
        func_page[f] = page
        unplaced.remove(f)
        for row in table:
            row.pop(f, None)
        row = table[page]
        adj = frg.adj[f]
        for g in unplaced:
            w = adj.get(g)
            if w:
                row[g] += w
        if on_place is not None:
            on_place(f, page, table, dict(func_page))

    by_size = sorted(ids, key=lambda f: (-est[f], order[f]))
    first = by_size[0]
    page = 0
    if not free[page] > est[first]:
        raise NotEnoughMemory(first)
    place(first, page, complement=False)

    while unplaced:
        row = table[page]
        f = unplaced[0]
        for g in unplaced[1:]:
            if row[g] > row[f]:
                f = g
        if free[page] > est[f]:
            place(f, page, complement=True)
            continue
        fits = [q for q in range(cfg.page_count) if free[q] > est[f]]
        if not fits:
            raise NotEnoughMemory(f)
        page = max(fits, key=lambda q: (table[q][f], -q))
        place(f, page, complement=True)

    return PageAssignment({f: func_page[f] for f in ids},
                          {q: free[q] for q in range(cfg.page_count)})


def residual_cost(frg: Frg, a: PageAssignment) -> Fraction:
    """Total weight of edges whose endpoints sit on different pages."""
    fp = a.func_page
    return sum((w for g, h, w in frg.edges() if fp[g] != fp[h]), Fraction(0))


def saved_weight(frg: Frg, a: PageAssignment) -> Fraction:
    fp = a.func_page
    return sum((w for g, h, w in frg.edges() if fp[g] == fp[h]), Fraction(0))


def _site_groups(p: Program, d: DataflowResult) -> list:
    """Per function: [(vop mask, target index, count)] over its PNTIs."""
    index = {f: k for k, f in enumerate(p.function_ids)}
    groups = [dict() for _ in p.functions]
    for (fid, _, _), v, t in _sites(p, d):
        key = (v, t.bit_length() - 1)
        g = groups[index[fid]]
        g[key] = g.get(key, 0) + 1
    return [sorted(g.items()) for g in groups]


def enumerate_assignments(frg: Frg, p: Program, d: Optional[DataflowResult] = None):
    """All page_count**NOF assignments in lexicographic order, with costs.

    Returns (assignments, residual*scale, psi counts, exact sizes,
    pessimistic sizes, scale) as numpy arrays; row k is the k-th vector.
    """
    cfg = p.config
    n = len(p.functions)
    if n > MAX_EXHAUSTIVE_FUNCTIONS or cfg.page_count > MAX_EXHAUSTIVE_PAGES:
        raise InstanceTooLarge(
            f"instance too large for exhaustive search ({n} functions, {cfg.page_count} pages;"
            f" limit {MAX_EXHAUSTIVE_FUNCTIONS} functions, {MAX_EXHAUSTIVE_PAGES} pages)")
    d = d if d is not None else solve(p)
    A = np.array(list(product(range(cfg.page_count), repeat=n)), dtype=np.int8).reshape(-1, n)

    psi = np.zeros(A.shape, dtype=np.int64)
    for k, sites in enumerate(_site_groups(p, d)):
        for (v, t), count in sites:
            need = np.zeros(len(A), dtype=bool) if v else np.ones(len(A), dtype=bool)
            for g in range(n):
                if v >> g & 1:
                    need |= A[:, g] != A[:, t]
            psi[:, k] += count * need
    base = np.array([f.base_size for f in p.functions], dtype=np.int64)
    pess = base + cfg.psi_cost * np.array([f.pnti_count for f in p.functions], dtype=np.int64)
    exact = base + cfg.psi_cost * psi

    edges = frg.edges()
    scale = lcm(*(w.denominator for _, _, w in edges)) if edges else 1
    index = {f: k for k, f in enumerate(p.function_ids)}
    ints = [(index[g], index[h], int(w * scale)) for g, h, w in edges]
    dtype = np.int64 if sum(x for _, _, x in ints) < 2 ** 62 else object
    residual = np.zeros(len(A), dtype=dtype)
    for g, h, x in ints:
        residual += (A[:, g] != A[:, h]).astype(dtype) * x
    return A, residual, psi.sum(axis=1), exact, pess, scale


def exhaustive_partition(frg: Frg, p: Program, objective: str = "residual",
                         sizes: str = "exact",
                         d: Optional[DataflowResult] = None) -> PageAssignment:
    """Globally optimal assignment by enumeration (small instances only).

    ``objective`` is ``"residual"`` (cross-page FRG weight) or ``"psi"``
    (PSIs actually inserted). Capacity is checked with post-insertion sizes
    by default; ``sizes="pessimistic"`` checks one PSI per PNTI instead.
    Ties go to the lexicographically smallest page vector.
    """
    if objective not in ("residual", "psi"):
        raise ValueError(f"unknown objective {objective!r}")
    if sizes not in ("exact", "pessimistic"):
        raise ValueError(f"unknown size mode {sizes!r}")
    cfg = p.config
    A, residual, psi_total, exact, pess, _ = enumerate_assignments(frg, p, d)
    size = exact if sizes == "exact" else np.broadcast_to(pess, A.shape)
    feasible = np.ones(len(A), dtype=bool)
    occupancy = np.zeros((len(A), cfg.page_count), dtype=np.int64)
    for q in range(cfg.page_count):
        occupancy[:, q] = np.where(A == q, size, 0).sum(axis=1)
        feasible &= occupancy[:, q] <= cfg.page_size
    if not feasible.any():
        raise NoFeasibleAssignment("no feasible assignment")
    cost = residual if objective == "residual" else psi_total
    candidates = np.flatnonzero(feasible)
    if cost.dtype != object:
        # argmin returns the first (lexicographically smallest) minimizer
        best = candidates[np.argmin(cost[candidates])]
    else:
        best = candidates[0]
        for k in candidates[1:]:
            if cost[k] < cost[best]:
                best = k
    vec = A[best]
    ids = p.function_ids
    return PageAssignment({f: int(vec[k]) for k, f in enumerate(ids)},
                          {q: int(cfg.page_size - occupancy[best, q])
                           for q in range(cfg.page_count)})
