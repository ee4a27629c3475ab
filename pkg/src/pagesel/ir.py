"""Textual IR for paged-program-memory MCUs.

A program is a list of functions; each function is a list of basic blocks
holding aggregated page-transparent words (``pti k``), calls, gotos,
conditional gotos and returns. Parsing builds the per-function CFG with a
synthetic pseudo exit block that every returning block flows into.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional, Union

PSEUDO_BLOCK = "<psb>"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Position = tuple  # (function id, block id, instruction index)


class IRError(ValueError):
    """Malformed or inconsistent IR; carries an optional source location."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 where: Optional[tuple] = None):
        self.message = message
        self.line = line
        self.column = column
        self.where = where  # (function, block, index), any suffix may be None
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)


class Op(str, Enum):
    PTI = "pti"
    CALL = "call"
    GOTO = "goto"
    CGOTO = "cgoto"
    RET = "ret"
    PSI = "psi"


TERMINATORS = frozenset({Op.GOTO, Op.CGOTO, Op.RET})
PNTI_OPS = frozenset({Op.CALL, Op.GOTO, Op.CGOTO})


@dataclass(frozen=True)
class Config:
    page_count: int
    page_size: int
    psi_cost: int = 1
    prevalue: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("page_count", "page_size", "psi_cost"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise IRError(f"{name} must be a positive integer, got {v!r}")
        pv = self.prevalue
        pv = Fraction(self.psi_cost) if pv is None else Fraction(pv)
        if pv <= 0:
            raise IRError(f"prevalue must be positive, got {pv}")
        object.__setattr__(self, "prevalue", pv)

    @property
    def capacity(self) -> int:
        return self.page_count * self.page_size


@dataclass(frozen=True)
class Instruction:
    op: Op
    arg: Union[int, str, None] = None

    def __post_init__(self):
        op = Op(self.op)
        object.__setattr__(self, "op", op)
        if op is Op.PTI:
            if isinstance(self.arg, bool) or not isinstance(self.arg, int) or self.arg < 1:
                raise IRError(f"pti needs a positive word count, got {self.arg!r}")
        elif op is Op.PSI:
            if isinstance(self.arg, bool) or not isinstance(self.arg, int) or self.arg < 0:
                raise IRError(f"psi needs a page index, got {self.arg!r}")
        elif op is Op.RET:
            if self.arg is not None:
                raise IRError("ret takes no operand")
        elif not isinstance(self.arg, str) or not _IDENT.match(self.arg):
            raise IRError(f"{op.value} needs an identifier operand, got {self.arg!r}")

    @property
    def is_pnti(self) -> bool:
        return self.op in PNTI_OPS

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    def words(self, psi_cost: int = 1) -> int:
        if self.op is Op.PTI:
            return self.arg
        if self.op is Op.PSI:
            return psi_cost
        return 1

    def __str__(self) -> str:
        if self.arg is None:
            return self.op.value
        return f"{self.op.value} {self.arg}"


def pti(k: int) -> Instruction:
    return Instruction(Op.PTI, k)


def call(f: str) -> Instruction:
    return Instruction(Op.CALL, f)


def goto(b: str) -> Instruction:
    return Instruction(Op.GOTO, b)


def cgoto(b: str) -> Instruction:
    return Instruction(Op.CGOTO, b)


def ret() -> Instruction:
    return Instruction(Op.RET)


def psi(page: int) -> Instruction:
    return Instruction(Op.PSI, page)


@dataclass(frozen=True)
class BasicBlock:
    id: str
    instrs: tuple = ()
    successors: tuple = ()
    is_pseudo: bool = False

    def __post_init__(self):
        object.__setattr__(self, "instrs", tuple(self.instrs))
        object.__setattr__(self, "successors", tuple(self.successors))

    @property
    def has_pnti(self) -> bool:
        return any(i.is_pnti for i in self.instrs)

    def last_pnti(self) -> Optional[Instruction]:
        for ins in reversed(self.instrs):
            if ins.is_pnti:
                return ins
        return None

    def words(self, psi_cost: int = 1) -> int:
        return sum(i.words(psi_cost) for i in self.instrs)


@dataclass(frozen=True)
class Function:
    """A function with its CFG. ``blocks`` ends with the pseudo exit block
    once :func:`build_cfg` has run."""

    id: str
    blocks: tuple
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "_index", {b.id: b for b in self.blocks})

    @property
    def entry(self) -> str:
        return self.blocks[0].id

    @property
    def pseudo_exit(self) -> str:
        return PSEUDO_BLOCK

    @property
    def real_blocks(self) -> tuple:
        return tuple(b for b in self.blocks if not b.is_pseudo)

    def block(self, block_id: str) -> BasicBlock:
        return self._index[block_id]

    @property
    def base_size(self) -> int:
        """Words of all real instructions, PSIs excluded."""
        return sum(i.words() for b in self.real_blocks for i in b.instrs if i.op is not Op.PSI)

    def size(self, psi_cost: int = 1) -> int:
        return sum(b.words(psi_cost) for b in self.real_blocks)

    @property
    def pnti_count(self) -> int:
        return sum(1 for b in self.real_blocks for i in b.instrs if i.is_pnti)

    @property
    def psi_count(self) -> int:
        return sum(1 for b in self.real_blocks for i in b.instrs if i.op is Op.PSI)

    def predecessors(self) -> dict:
        preds = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for s in b.successors:
                preds[s].append(b.id)
        return preds

    def positions(self) -> Iterator[tuple]:
        for b in self.real_blocks:
            for k, ins in enumerate(b.instrs):
                yield (self.id, b.id, k), ins


@dataclass(frozen=True)
class Program:
    config: Config
    functions: tuple
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "_index", {f.id: f for f in self.functions})

    @property
    def entry_function(self) -> str:
        return self.functions[0].id

    @property
    def function_ids(self) -> tuple:
        return tuple(f.id for f in self.functions)

    def function(self, fid: str) -> Function:
        return self._index[fid]

    def __contains__(self, fid) -> bool:
        return fid in self._index

    def positions(self) -> Iterator[tuple]:
        for f in self.functions:
            yield from f.positions()

    def instruction(self, pos) -> Instruction:
        fid, bid, k = pos
        return self._index[fid].block(bid).instrs[k]

    @property
    def base_size(self) -> int:
        return sum(f.base_size for f in self.functions)

    @property
    def pnti_count(self) -> int:
        return sum(f.pnti_count for f in self.functions)

    @property
    def psi_count(self) -> int:
        return sum(f.psi_count for f in self.functions)

    def with_config(self, **changes) -> "Program":
        return replace(self, config=replace(self.config, **changes))


def build_cfg(f: Function) -> Function:
    """Return ``f`` with successor sets and the pseudo exit block populated.

    A non-terminated block falls through to the next block; ``ret`` blocks
    flow into the pseudo block, which has no successors.
    """
    blocks = [b for b in f.blocks if not b.is_pseudo]
    if not blocks:
        raise IRError(f"function {f.id!r} has no blocks", where=(f.id, None, None))
    ids = [b.id for b in blocks]
    seen = set()
    for bid in ids:
        if bid in seen:
            raise IRError(f"duplicate block {bid!r} in function {f.id!r}", where=(f.id, bid, None))
        seen.add(bid)

    out = []
    for n, b in enumerate(blocks):
        if not b.instrs:
            raise IRError(f"block {b.id!r} in function {f.id!r} is empty", where=(f.id, b.id, None))
        for k, ins in enumerate(b.instrs[:-1]):
            if ins.is_terminator:
                raise IRError(f"terminator {ins} is not last in block {b.id!r} of function {f.id!r}",
                              where=(f.id, b.id, k + 1))
        last = b.instrs[-1]
        nxt = ids[n + 1] if n + 1 < len(ids) else None
        for k, ins in enumerate(b.instrs):
            if ins.op in (Op.GOTO, Op.CGOTO) and ins.arg not in seen:
                raise IRError(f"unresolved label {ins.arg!r} in function {f.id!r}",
                              where=(f.id, b.id, k))
        if last.op is Op.RET:
            succ = (PSEUDO_BLOCK,)
        elif last.op is Op.GOTO:
            succ = (last.arg,)
        else:
            if nxt is None:
                raise IRError(f"control falls off the end of function {f.id!r}",
                              where=(f.id, b.id, len(b.instrs) - 1))
            if last.op is Op.CGOTO:
                succ = (last.arg,) if last.arg == nxt else (last.arg, nxt)
            else:
                succ = (nxt,)
        out.append(BasicBlock(b.id, b.instrs, succ))
    out.append(BasicBlock(PSEUDO_BLOCK, (), (), is_pseudo=True))
    return Function(f.id, out)


def make_program(config: Config, functions, allow_psi: bool = False) -> Program:
    """Build CFGs and validate a program assembled in code."""
    built = []
    seen = set()
    for f in functions:
        if f.id in seen:
            raise IRError(f"duplicate function {f.id!r}", where=(f.id, None, None))
        seen.add(f.id)
        built.append(build_cfg(f))
    if not built:
        raise IRError("program has no functions")
    for f in built:
        for pos, ins in f.positions():
            if ins.op is Op.CALL and ins.arg not in seen:
                raise IRError(f"unresolved callee {ins.arg!r} in function {f.id!r}", where=pos)
            if ins.op is Op.PSI:
                if not allow_psi:
                    raise IRError("Psi in input", where=pos)
                if ins.arg >= config.page_count:
                    raise IRError(f"psi page {ins.arg} out of range", where=pos)
    return Program(config, built)


# -- text format ---------------------------------------------------------

_HEADER_KEYS = ("pages", "page_size", "psi_cost", "prevalue")


def _tokens(line: str):
    """Yield (column, token) pairs, 1-based columns."""
    for m in re.finditer(r"\S+", line):
        yield m.start() + 1, m.group()


def _parse_int(tok: str, lineno: int, col: int, minimum: int) -> int:
    if not re.fullmatch(r"[0-9]+", tok):
        raise IRError(f"expected an integer, got {tok!r}", lineno, col)
    v = int(tok)
    if v < minimum:
        raise IRError(f"integer must be >= {minimum}, got {v}", lineno, col)
    return v


def _parse_instruction(toks, lineno: int) -> Instruction:
    (col, name), rest = toks[0], toks[1:]
    try:
        op = Op(name)
    except ValueError:
        raise IRError(f"unknown instruction {name!r}", lineno, col) from None
    if op is Op.RET:
        if rest:
            raise IRError("ret takes no operand", lineno, rest[0][0])
        return Instruction(op)
    if len(rest) != 1:
        c = rest[1][0] if rest else col + len(name)
        raise IRError(f"{name} takes exactly one operand", lineno, c)
    acol, arg = rest[0]
    if op is Op.PTI:
        return Instruction(op, _parse_int(arg, lineno, acol, 1))
    if op is Op.PSI:
        return Instruction(op, _parse_int(arg, lineno, acol, 0))
    if not _IDENT.match(arg):
        raise IRError(f"bad identifier {arg!r}", lineno, acol)
    return Instruction(op, arg)


def parse_program(text: str, allow_psi: bool = False) -> Program:
    """Parse IR text into a validated :class:`Program`."""
    header = {}
    funcs = []  # [name, line, [[label, line, [instr...]]]]
    cur_block = None
    psi_lines = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = list(_tokens(line))
        if not toks:
            continue
        col, first = toks[0]

        if first in _HEADER_KEYS and not funcs:
            idx = _HEADER_KEYS.index(first)
            last = max((_HEADER_KEYS.index(k) for k in header), default=-1)
            if idx <= last or any(k not in header for k in _HEADER_KEYS[:min(idx, 2)]):
                raise IRError(f"header {first!r} out of order or repeated", lineno, col)
            if len(toks) != 2:
                raise IRError(f"{first} takes exactly one value", lineno, col)
            vcol, val = toks[1]
            if first == "prevalue":
                try:
                    pv = Fraction(val)
                except (ValueError, ZeroDivisionError):
                    raise IRError(f"bad prevalue {val!r}", lineno, vcol) from None
                if pv <= 0:
                    raise IRError("prevalue must be positive", lineno, vcol)
                header[first] = pv
            else:
                header[first] = _parse_int(val, lineno, vcol, 1)
            continue

        if first == "func":
            if "pages" not in header or "page_size" not in header:
                raise IRError("missing 'pages'/'page_size' header", lineno, col)
            if len(toks) == 3 and toks[2][1] == ":":
                name, ncol = toks[1][1], toks[1][0]
            elif len(toks) == 2 and toks[1][1].endswith(":"):
                name, ncol = toks[1][1][:-1], toks[1][0]
            else:
                raise IRError("expected 'func <name>:'", lineno, col)
            if not _IDENT.match(name):
                raise IRError(f"bad function name {name!r}", lineno, ncol)
            funcs.append([name, lineno, []])
            cur_block = None
            continue

        m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*:", line)
        if m:
            if not funcs:
                raise IRError("block outside of a function", lineno, col)
            cur_block = [m.group(1), lineno, [], []]
            funcs[-1][2].append(cur_block)
            rest = line[m.end():]
            toks = [(c + m.end(), t) for c, t in _tokens(rest)]
            if not toks:
                continue

        if cur_block is None:
            raise IRError(f"unexpected {toks[0][1]!r} outside of a block", lineno, toks[0][0])
        ins = _parse_instruction(toks, lineno)
        if ins.op is Op.PSI:
            if not allow_psi:
                raise IRError("Psi in input", lineno, toks[0][0])
            psi_lines.append((ins, lineno, toks[1][0]))
        cur_block[2].append(ins)
        cur_block[3].append(lineno)

    if "pages" not in header or "page_size" not in header:
        raise IRError("missing 'pages'/'page_size' header")
    config = Config(header["pages"], header["page_size"], header.get("psi_cost", 1),
                    header.get("prevalue"))
    for ins, lineno, col in psi_lines:
        if ins.arg >= config.page_count:
            raise IRError(f"psi page {ins.arg} out of range", lineno, col)

    if not funcs:
        raise IRError("program has no functions")
    lines = {}
    for name, lineno, blocks in funcs:
        if (name, None, None) in lines:
            raise IRError(f"duplicate function {name!r}", lineno)
        lines[(name, None, None)] = lineno
        for label, bline, instrs, ilines in blocks:
            if (name, label, None) in lines:
                raise IRError(f"duplicate block {label!r} in function {name!r}", bline)
            lines[(name, label, None)] = bline
            lines.update(((name, label, k), ln) for k, ln in enumerate(ilines))

    functions = [
        Function(name, [BasicBlock(label, instrs) for label, _, instrs, _ in blocks])
        for name, _, blocks in funcs
    ]
    try:
        return make_program(config, functions, allow_psi=allow_psi)
    except IRError as e:
        w = e.where or (None, None, None)
        line = lines.get(w) or lines.get((w[0], w[1], None)) or lines.get((w[0], None, None))
        raise IRError(e.message, line, where=e.where) from None


def _format_fraction(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        # terminating decimal, printed exactly
        digits = 0
        while (x * 10 ** digits).denominator != 1:
            digits += 1
        s = f"{abs(x.numerator) * 10 ** digits // x.denominator:0{digits + 1}d}"
        sign = "-" if x < 0 else ""
        return f"{sign}{s[:-digits]}.{s[-digits:]}"
    return f"{x.numerator}/{x.denominator}"


def format_program(p: Program, comments: Optional[list] = None) -> str:
    """Serialize to canonical text; ``parse_program`` inverts it."""
    c = p.config
    lines = []
    for text in comments or ():
        lines.append(f"# {text}")
    lines += [f"pages {c.page_count}", f"page_size {c.page_size}",
              f"psi_cost {c.psi_cost}", f"prevalue {_format_fraction(c.prevalue)}"]
    for f in p.functions:
        lines.append(f"func {f.id}:")
        for b in f.real_blocks:
            lines.append(f"{b.id}:")
            lines.extend(f"  {ins}" for ins in b.instrs)
    return "\n".join(lines) + "\n"


def strip_psi(p: Program) -> Program:
    """Remove every Psi instruction, returning the unoptimized program."""
    funcs = []
    for f in p.functions:
        blocks = [replace(b, instrs=tuple(i for i in b.instrs if i.op is not Op.PSI))
                  for b in f.blocks]
        funcs.append(Function(f.id, blocks))
    return Program(p.config, funcs)
