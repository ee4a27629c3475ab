"""PSI placement for a given page assignment, plus the naive baseline."""
from __future__ import annotations

from dataclasses import dataclass

from .analysis import DataflowResult
from .errors import CapacityError
from .ir import Function, Instruction, Op, Program, psi
from .partition import PageAssignment, estimated_size


@dataclass
class OptimizedProgram:
    program: Program
    assignment: PageAssignment
    psi_sites: frozenset
    exact_sizes: dict

    @property
    def psi_count(self) -> int:
        return len(self.psi_sites)

    @property
    def total_size(self) -> int:
        return sum(self.exact_sizes.values())

    def occupancy(self) -> list:
        used = [0] * self.program.config.page_count
        for f, size in self.exact_sizes.items():
            used[self.assignment.func_page[f]] += size
        return used


def required_page(i: Instruction, current: str, a: PageAssignment) -> int:
    if i.op in (Op.GOTO, Op.CGOTO):
        return a.func_page[current]
    if i.op is Op.CALL:
        return a.func_page[i.arg]
    raise ValueError(f"{i} does not consume the PSR")


def _rebuild(p: Program, a: PageAssignment, needs_psi) -> OptimizedProgram:
    cfg = p.config
    missing = set(p.function_ids) - set(a.func_page)
    if missing:
        raise ValueError(f"assignment does not cover {sorted(missing)}")
    for f, q in a.func_page.items():
        if not 0 <= q < cfg.page_count:
            raise ValueError(f"function {f!r} assigned to nonexistent page {q}")
    sites = set()
    funcs = []
    for f in p.functions:
        blocks = []
        for b in f.blocks:
            instrs = []
            for k, ins in enumerate(b.instrs):
                if ins.op is Op.PSI:
                    raise ValueError("program already contains PSIs; strip them first")
                if ins.is_pnti:
                    r = required_page(ins, f.id, a)
                    if needs_psi((f.id, b.id, k), r):
                        instrs.append(psi(r))
                        sites.add((f.id, b.id, k))
                instrs.append(ins)
            blocks.append(b.__class__(b.id, instrs, b.successors, b.is_pseudo))
        funcs.append(Function(f.id, blocks))
    out = Program(cfg, funcs)
    sizes = {f.id: f.size(cfg.psi_cost) for f in out.functions}
    o = OptimizedProgram(out, a, frozenset(sites), sizes)
    check_capacity(o)
    return o


def check_capacity(o: OptimizedProgram):
    cfg = o.program.config
    for q, used in enumerate(o.occupancy()):
        if used > cfg.page_size:
            raise CapacityError(
                f"page {q} overflows: {used} words > page size {cfg.page_size}"
                " (try --conservative-size)")


def insert_psi(p: Program, a: PageAssignment, d: DataflowResult) -> OptimizedProgram:
    """Insert a PSI before each PNTI unless every function the PSR may belong
    to there lives on the required page. Unreachable PNTIs always get one."""
    vop = d.vop_masks()
    ids = d.masks.ids
    page_sets = {}

    def pages_of(mask):
        s = page_sets.get(mask)
        if s is None:
            s = frozenset(a.func_page[ids[k]] for k in range(len(ids)) if mask >> k & 1)
            page_sets[mask] = s
        return s

    def needs(pos, r):
        v = vop[pos][0]
        return not v or pages_of(v) != {r}

    return _rebuild(p, a, needs)


def first_fit(p: Program) -> PageAssignment:
    """Declaration-order first fit using naive (one PSI per PNTI) sizes."""
    cfg = p.config
    free = [cfg.page_size] * cfg.page_count
    func_page = {}
    for f in p.functions:
        size = estimated_size(f, cfg.psi_cost)
        for q in range(cfg.page_count):
            if free[q] >= size:
                free[q] -= size
                func_page[f.id] = q
                break
        else:
            raise CapacityError(f"naive placement: no page can hold function {f.id!r}")
    return PageAssignment(func_page, dict(enumerate(free)))


def naive_placement(p: Program) -> OptimizedProgram:
    return _rebuild(p, first_fit(p), lambda pos, r: True)


def code_size(o: OptimizedProgram) -> dict:
    cfg = o.program.config
    return {
        "size": o.total_size,
        "psi_count": o.psi_count,
        "nof": len(o.program.functions),
        "pages": [{"page": q, "used": used, "capacity": cfg.page_size}
                  for q, used in enumerate(o.occupancy())],
    }
