"""Paged-memory machine used to check PSI placement.

Functions are laid out at concrete addresses; every taken goto, conditional
goto and call checks that the PSR selects the page of its target, as the
hardware would only supply the low address bits.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .errors import CapacityError
from .ir import Op, Program

_PTI, _CALL, _GOTO, _CGOTO, _RET, _PSI = range(6)
_CODES = {Op.PTI: _PTI, Op.CALL: _CALL, Op.GOTO: _GOTO, Op.CGOTO: _CGOTO,
          Op.RET: _RET, Op.PSI: _PSI}


@dataclass
class Image:
    program: Program
    func_page: dict
    func_base: dict
    block_addr: dict
    slots: dict      # address of an instruction's first word -> (fid, bid, index)
    code: dict       # same addresses -> (opcode, operand, words, position)

    @property
    def page_size(self) -> int:
        return self.program.config.page_size

    def page_of(self, address: int) -> int:
        return address // self.page_size


@dataclass
class Trace:
    """Observable behaviour: ("call", f), ("goto", f, block), ("ret",) events.

    PSIs are not events and do not count as steps.
    """
    events: list
    steps: int
    reason: str  # "halt", "steps" or "depth"


@dataclass
class PageFault:
    position: tuple
    psr: int
    expected: int
    steps: int
    events: list


def layout(o, assignment=None) -> Image:
    """Place functions contiguously per page, in declaration order.

    ``o`` is an OptimizedProgram or a Program; ``assignment`` overrides the
    page assignment carried by ``o``.
    """
    program = o if isinstance(o, Program) else o.program
    a = assignment if assignment is not None else o.assignment
    cfg = program.config
    cursor = [0] * cfg.page_count
    func_base, block_addr, slots, code = {}, {}, {}, {}
    for f in program.functions:
        q = a.func_page[f.id]
        if not 0 <= q < cfg.page_count:
            raise CapacityError(f"function {f.id!r} assigned to nonexistent page {q}")
        size = f.size(cfg.psi_cost)
        if cursor[q] + size > cfg.page_size:
            raise CapacityError(f"function {f.id!r} does not fit in page {q}")
        base = q * cfg.page_size + cursor[q]
        func_base[f.id] = base
        addr = base
        for b in f.real_blocks:
            block_addr[(f.id, b.id)] = addr
            for k, ins in enumerate(b.instrs):
                slots[addr] = (f.id, b.id, k)
                addr += ins.words(cfg.psi_cost)
        cursor[q] += size

    for addr, (fid, bid, k) in slots.items():
        ins = program.function(fid).block(bid).instrs[k]
        op = _CODES[ins.op]
        if op == _CALL:
            arg = func_base[ins.arg]
        elif op in (_GOTO, _CGOTO):
            arg = block_addr[(fid, ins.arg)]
        else:
            arg = ins.arg
        code[addr] = (op, arg, ins.words(cfg.psi_cost), (fid, bid, k))
    return Image(program, dict(a.func_page), func_base, block_addr, slots, code)


def decision_stream(seed: int):
    """Endless, replayable stream of branch decisions."""
    rng = random.Random(seed)
    while True:
        bits = rng.getrandbits(64)
        for _ in range(64):
            yield bool(bits & 1)
            bits >>= 1


def run(img: Image, decisions: Iterable[bool] = (), max_steps: int = 100_000,
        max_depth: int = 256) -> Union[Trace, PageFault]:
    """Execute from the entry function until it returns or a bound is hit.

    Conditional gotos consume one decision each (True = taken); once the
    stream is exhausted they fall through. Returns pop full addresses and
    never consult the PSR. ``max_depth`` bounds the call stack; runaway
    recursion ends the run with reason "depth".
    """
    page_size = img.page_size
    code = img.code
    fid_at = img.slots
    entry = img.program.entry_function
    pc = img.func_base[entry]
    psr = img.func_page[entry]
    stack = []
    events = []
    steps = 0
    dec = iter(decisions)
    reason = "steps"
    while steps < max_steps:
        op, arg, words, pos = code[pc]
        if op == _PTI:
            steps += words
            if steps > max_steps:
                steps = max_steps
                break
            pc += words
            continue
        if op == _PSI:
            psr = arg
            pc += words
            continue
        steps += 1
        if op == _RET:
            events.append(("ret",))
            if not stack:
                reason = "halt"
                break
            pc = stack.pop()
            continue
        if op == _CGOTO and not next(dec, False):
            pc += 1
            continue
        target_page = arg // page_size
        if psr != target_page:
            return PageFault(pos, psr, target_page, steps, events)
        if op == _CALL:
            if len(stack) >= max_depth:
                reason = "depth"
                break
            stack.append(pc + 1)
            events.append(("call", fid_at[arg][0]))
        else:
            events.append(("goto", pos[0], fid_at[arg][1]))
        pc = arg
    return Trace(events, steps, reason)


def equivalent(t1, t2) -> bool:
    """Same observable events; a fault is never equivalent to anything."""
    if not isinstance(t1, Trace) or not isinstance(t2, Trace):
        return False
    return t1.events == t2.events


def differential(naive_img: Image, opt_img: Image, seeds: Iterable[int],
                 max_steps: int = 100_000) -> dict:
    """Run both images over the same decision streams; tally faults/divergence."""
    faults, diverged, runs = [], [], 0
    for seed in seeds:
        runs += 1
        t1 = run(naive_img, decision_stream(seed), max_steps)
        t2 = run(opt_img, decision_stream(seed), max_steps)
        for name, t in (("naive", t1), ("optimized", t2)):
            if isinstance(t, PageFault):
                faults.append((name, seed, t))
        if not equivalent(t1, t2):
            diverged.append(seed)
    return {"runs": runs, "faults": faults, "diverged": diverged}
