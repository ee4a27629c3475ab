"""Seeded random program generator for property and differential testing.

Functions are grouped into clusters (one per page); calls stay inside the
caller's cluster with probability ``cluster_factor``, which gives the
partitioner co-location opportunities. Callees are biased toward a few
shared functions per cluster so that call sites merge into multi-function
VOP sets. Backward edges only come from conditional gotos, so every loop
has an exit and runs driven by random decisions terminate.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .ir import Config, Function, BasicBlock, Instruction, Op, make_program, format_program


@dataclass(frozen=True)
class GenSpec:
    seed: int = 42
    funcs: tuple = (4, 16)
    blocks: tuple = (1, 6)
    pages: tuple = (2, 4)
    instrs: tuple = (1, 3)          # body instructions per block, before the terminator
    pti_words: tuple = (1, 12)
    call_density: float = 0.3       # chance a body slot is a call
    goto_density: float = 0.4       # chance a non-final block ends in a branch
    loop_density: float = 0.15      # chance a conditional branch goes backward
    cluster_factor: float = 0.7
    recursion: float = 0.0          # chance a call site may target itself or an earlier function
    acyclic: bool = False           # forbid CFG back edges and call cycles
    psi_cost: int = 1
    page_size: Optional[int] = None
    slack: float = 1.5              # page capacity / naive program size when page_size is None
    target_words: Optional[int] = None

    def __post_init__(self):
        for name in ("funcs", "blocks", "pages", "instrs", "pti_words"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < (0 if name == "instrs" else 1):
                raise ValueError(f"bad {name} range {lo}-{hi}")
        if not 0 <= self.cluster_factor <= 1:
            raise ValueError("cluster_factor must be in [0, 1]")
        if self.slack < 1:
            raise ValueError("slack must be >= 1")


@dataclass
class Generated:
    text: str
    clusters: dict = field(default_factory=dict)


def _rng(spec: GenSpec, index: int) -> random.Random:
    return random.Random(f"pagesel-gen/{spec.seed}/{index}")


def _pick_callee(rng, spec, caller, n, cluster, hubs):
    later = list(range(caller + 1, n))
    if spec.recursion and not spec.acyclic and rng.random() < spec.recursion:
        pool = list(range(n))
    else:
        pool = later
    if not pool:
        return None
    same = [g for g in pool if cluster[g] == cluster[caller]]
    if rng.random() < spec.cluster_factor:
        if not same:
            return None
        pool = same
    elif spec.cluster_factor >= 1.0:
        return None
    shared = [g for g in pool if g in hubs]
    if shared and rng.random() < 0.5:
        return rng.choice(shared)
    return rng.choice(pool)


def generate_program(spec: GenSpec, index: int = 0) -> Generated:
    rng = _rng(spec, index)
    n = rng.randint(*spec.funcs)
    page_count = rng.randint(*spec.pages)
    names = ["main"] + [f"f{k}" for k in range(1, n)]
    cluster = [0] + [rng.randrange(page_count) for _ in range(1, n)]
    hubs = set()
    for c in range(page_count):
        members = [g for g in range(1, n) if cluster[g] == c]
        hubs.update(members[:2])

    raw = []  # per function: [[label, [Instruction or ("pti", w)], ...]]
    for fi in range(n):
        nb = rng.randint(*spec.blocks)
        labels = [f"b{j}" for j in range(nb)]
        blocks = []
        for j in range(nb):
            body = []
            density = min(1.0, 2 * spec.call_density) if fi == 0 else spec.call_density
            for _ in range(rng.randint(*spec.instrs)):
                callee = None
                if rng.random() < density:
                    callee = _pick_callee(rng, spec, fi, n, cluster, hubs)
                if callee is not None:
                    body.append(Instruction(Op.CALL, names[callee]))
                elif body and isinstance(body[-1], tuple):
                    body[-1] = ("pti", body[-1][1] + rng.randint(*spec.pti_words))
                else:
                    body.append(("pti", rng.randint(*spec.pti_words)))
            if j == nb - 1:
                body.append(Instruction(Op.RET))
            elif rng.random() < spec.goto_density:
                r = rng.random()
                if r < 0.1:
                    body.append(Instruction(Op.RET))
                elif r < 0.35 and j + 1 < nb:
                    body.append(Instruction(Op.GOTO, labels[rng.randint(j + 1, nb - 1)]))
                elif not spec.acyclic and rng.random() < spec.loop_density:
                    body.append(Instruction(Op.CGOTO, labels[rng.randint(0, j)]))
                else:
                    body.append(Instruction(Op.CGOTO, labels[rng.randint(j + 1, nb - 1)]))
            if not body:
                body.append(("pti", rng.randint(*spec.pti_words)))
            blocks.append([labels[j], body])
        raw.append(blocks)

    scale = 1.0
    if spec.target_words:
        fixed = sum(1 for fb in raw for _, body in fb for i in body if isinstance(i, Instruction))
        flex = sum(i[1] for fb in raw for _, body in fb for i in body if isinstance(i, tuple))
        scale = max(spec.target_words - fixed, 1) / max(flex, 1)

    functions = []
    for fi, fb in enumerate(raw):
        blocks = []
        for label, body in fb:
            instrs = [i if isinstance(i, Instruction)
                      else Instruction(Op.PTI, max(1, round(i[1] * scale))) for i in body]
            blocks.append(BasicBlock(label, instrs))
        functions.append(Function(names[fi], blocks))

    naive = [f.base_size + spec.psi_cost * sum(
        1 for b in f.blocks for i in b.instrs if i.is_pnti) for f in functions]
    if spec.page_size is not None:
        page_size = spec.page_size
        if max(naive) >= page_size or sum(naive) > page_size * page_count:
            raise ValueError("infeasible spec: program does not fit the requested pages")
    else:
        page_size = max(max(naive) + 1, math.ceil(sum(naive) * spec.slack / page_count))
    config = Config(page_count, page_size, spec.psi_cost)
    program = make_program(config, functions)
    text = format_program(program, comments=[f"generated seed={spec.seed} index={index}"])
    return Generated(text, {names[g]: cluster[g] for g in range(n)})


def generate(spec: GenSpec, index: int = 0) -> str:
    """Program text for (spec, index); identical bytes on every call."""
    return generate_program(spec, index).text


def corpus(spec: GenSpec, count: int) -> Iterator[tuple]:
    """(name, text) for ``count`` programs derived from one seed."""
    width = max(3, len(str(count - 1)))
    for k in range(count):
        yield f"prog_{k:0{width}d}", generate(spec, k)


CANONICAL = GenSpec(seed=42, funcs=(4, 16), pages=(2, 4), cluster_factor=0.7, recursion=0.05)
CANONICAL_COUNT = 200
