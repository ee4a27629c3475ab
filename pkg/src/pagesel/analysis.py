"""Interprocedural PSR-value analysis.

For every program point we compute VOP: the set of functions whose page the
page selection register may encode there. Sets are held as int bitmasks
(bit i = i-th function in declaration order) while solving and exposed as
frozensets of function ids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .ir import PSEUDO_BLOCK, BasicBlock, Instruction, Op, Program

FuncSet = frozenset


def ret_vop(i: Instruction, current: str, out_psb: Mapping[str, FuncSet]) -> FuncSet:
    """Relation established by a PNTI: goto-like -> current function, call e -> Out(e.psb)."""
    if i.op in (Op.GOTO, Op.CGOTO):
        return frozenset({current})
    if i.op is Op.CALL:
        return frozenset(out_psb.get(i.arg, ()))
    raise ValueError(f"ret_vop called on page-transparent instruction {i}")


def gen_kill(b: BasicBlock, current: str, out_psb: Mapping[str, FuncSet],
             all_functions) -> tuple:
    if b.is_pseudo:
        raise ValueError("gen_kill is undefined on the pseudo block")
    last = b.last_pnti()
    if last is None:
        return frozenset(), frozenset()
    gen = ret_vop(last, current, out_psb)
    return gen, frozenset(all_functions) - gen


class _Masks:
    def __init__(self, ids):
        self.ids = tuple(ids)
        self.bit = {f: 1 << k for k, f in enumerate(self.ids)}
        self.all = (1 << len(self.ids)) - 1
        self._cache = {}

    def to_set(self, mask: int) -> FuncSet:
        s = self._cache.get(mask)
        if s is None:
            s = frozenset(f for k, f in enumerate(self.ids) if mask >> k & 1)
            self._cache[mask] = s
        return s

    def to_mask(self, funcs) -> int:
        m = 0
        for f in funcs:
            m |= self.bit[f]
        return m


def reachable_blocks(f) -> set:
    seen = {f.entry}
    stack = [f.entry]
    while stack:
        b = stack.pop()
        for s in f.block(b).successors:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


@dataclass
class DataflowResult:
    program: Program
    masks: _Masks
    gen_m: dict
    kill_m: dict
    in_m: dict
    out_m: dict
    reachable: frozenset
    iterations: int
    history: Optional[list] = None
    _vop: Optional[dict] = field(default=None, repr=False)

    def _view(self, table) -> dict:
        return {k: self.masks.to_set(v) for k, v in table.items()}

    @property
    def gen(self) -> dict:
        return self._view(self.gen_m)

    @property
    def kill(self) -> dict:
        return self._view(self.kill_m)

    @property
    def in_(self) -> dict:
        return self._view(self.in_m)

    @property
    def out(self) -> dict:
        return self._view(self.out_m)

    def out_psb(self, fid: str) -> FuncSet:
        return self.masks.to_set(self.out_m[(fid, PSEUDO_BLOCK)])

    def out_psb_table(self) -> dict:
        return {f: self.out_psb(f) for f in self.masks.ids}

    def vop_masks(self) -> dict:
        """position -> (before mask, after mask), computed once."""
        if self._vop is None:
            self._vop = _walk_vop(self.program, self.masks, self.in_m, self.out_m, self.reachable)
        return self._vop

    def vop_before(self, pos) -> FuncSet:
        return self.masks.to_set(self.vop_masks()[tuple(pos)][0])

    def vop_after(self, pos) -> FuncSet:
        return self.masks.to_set(self.vop_masks()[tuple(pos)][1])

    def vop_table(self) -> dict:
        to = self.masks.to_set
        return {pos: (to(b), to(a)) for pos, (b, a) in self.vop_masks().items()}


def _walk_vop(program, masks, in_m, out_m, reachable) -> dict:
    table = {}
    for f in program.functions:
        bit_f = masks.bit[f.id]
        for b in f.real_blocks:
            key = (f.id, b.id)
            live = key in reachable
            cur = in_m[key] if live else 0
            for k, ins in enumerate(b.instrs):
                before = cur
                if live and ins.op in (Op.GOTO, Op.CGOTO):
                    cur = bit_f
                elif live and ins.op is Op.CALL:
                    cur = out_m[(ins.arg, PSEUDO_BLOCK)]
                table[(f.id, b.id, k)] = (before, cur)
    return table


def solve(p: Program, record_history: bool = False) -> DataflowResult:
    """Least fixpoint of the In/Out equations over all blocks of all functions.

    Round-robin passes in canonical order until nothing changes; Out(psb) of
    callees feeds Gen of calling blocks, so recursion is handled naturally.
    """
    masks = _Masks(p.function_ids)
    nodes = []       # (key, seed, preds, kind, arg)
    reachable = set()
    for f in p.functions:
        live = reachable_blocks(f)
        reachable.update((f.id, b) for b in live)
        preds = f.predecessors()
        for b in f.blocks:
            key = (f.id, b.id)
            seed = masks.bit[f.id] if b.id == f.entry else 0
            if b.id not in live:
                seed = 0
                pl = ()
            else:
                pl = tuple((f.id, q) for q in preds[b.id] if q in live)
            last = None if b.is_pseudo else b.last_pnti()
            if last is None:
                kind, arg = "ptb", None
            elif last.op is Op.CALL:
                kind, arg = "call", (last.arg, PSEUDO_BLOCK)
            else:
                kind, arg = "self", masks.bit[f.id]
            nodes.append((key, seed, pl, kind, arg))

    in_m = {n[0]: 0 for n in nodes}
    out_m = dict(in_m)
    gen_m = dict(in_m)
    history = [] if record_history else None
    full = masks.all
    iterations = 0
    changed = True
    while changed:
        changed = False
        iterations += 1
        for key, seed, pl, kind, arg in nodes:
            i = seed
            for q in pl:
                i |= out_m[q]
            in_m[key] = i
            if kind == "ptb":
                o = i
            else:
                g = arg if kind == "self" else out_m[arg]
                gen_m[key] = g
                # Out = Gen | (In - Kill), Kill = All - Gen, i.e. Out = Gen
                o = g | (i & ~(full & ~g))
            if o != out_m[key]:
                out_m[key] = o
                changed = True
        if history is not None:
            history.append((dict(in_m), dict(out_m)))

    kill_m = {}
    for key, _, _, kind, _ in nodes:
        kill_m[key] = 0 if kind == "ptb" else full & ~gen_m[key]
    return DataflowResult(p, masks, gen_m, kill_m, in_m, out_m, frozenset(reachable),
                          iterations, history)


# -- independent oracle ----------------------------------------------------

def _check_acyclic(p: Program):
    for f in p.functions:
        state = {}

        def visit(b, f=f, state=state):
            state[b] = 1
            for s in f.block(b).successors:
                if state.get(s) == 1:
                    raise ValueError(f"CFG of {f.id!r} is cyclic")
                if s not in state:
                    visit(s)
            state[b] = 2

        for b in f.blocks:
            if b.id not in state:
                visit(b.id)

    callees = {f.id: {i.arg for _, i in f.positions() if i.op is Op.CALL} for f in p.functions}
    state = {}

    def visit_fn(g):
        state[g] = 1
        for h in sorted(callees[g]):
            if state.get(h) == 1:
                raise ValueError(f"call graph is cyclic through {g!r}")
            if h not in state:
                visit_fn(h)
        state[g] = 2

    for g in callees:
        if g not in state:
            visit_fn(g)


def oracle_vop_paths(p: Program, max_functions: int = 10, max_blocks: int = 8) -> dict:
    """Path-based VOP: position -> (before, after) as frozensets.

    Walks every acyclic path from every function entry carrying the single
    function the PSR currently belongs to; a call forks the path over each
    way the callee can return. Identical (block, relation) suffixes are
    explored once, which leaves the union over paths unchanged.
    """
    if len(p.functions) > max_functions or any(
            len(f.real_blocks) > max_blocks for f in p.functions):
        raise ValueError("instance too large for path enumeration")
    _check_acyclic(p)

    before = {pos: set() for pos, _ in p.positions()}
    after = {pos: set() for pos, _ in p.positions()}
    exits = {}

    def explore(fid):
        if fid in exits:
            return exits[fid]
        f = p.function(fid)
        ends = set()
        seen = set()
        stack = [(f.entry, fid)]
        while stack:
            state = stack.pop()
            if state in seen:
                continue
            seen.add(state)
            bid, rel = state
            blk = f.block(bid)
            rels = {rel}
            for k, ins in enumerate(blk.instrs):
                pos = (fid, bid, k)
                before[pos] |= rels
                if ins.op in (Op.GOTO, Op.CGOTO):
                    rels = {fid}
                elif ins.op is Op.CALL:
                    rels = set(explore(ins.arg)) if rels else set()
                after[pos] |= rels
            for s in blk.successors:
                if s == PSEUDO_BLOCK:
                    ends |= rels
                else:
                    stack.extend((s, r) for r in rels)
        exits[fid] = frozenset(ends)
        return exits[fid]

    for f in p.functions:
        explore(f.id)
    return {pos: (frozenset(before[pos]), frozenset(after[pos])) for pos in before}
