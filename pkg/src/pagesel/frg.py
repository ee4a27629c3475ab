"""Weighted function relation graph.

Edge weight between two functions estimates the PSI words saved by placing
them in one page. Weights are exact fractions so builds are reproducible.
"""
from __future__ import annotations

from collections import Counter
from fractions import Fraction
from itertools import combinations
from typing import Iterator

from .analysis import DataflowResult
from .ir import Op, Program


class Frg:
    def __init__(self, functions, weights=None):
        self.functions = tuple(functions)
        self._order = {f: k for k, f in enumerate(self.functions)}
        self.adj = {f: {} for f in self.functions}
        for (g, h), w in (weights or {}).items():
            self.add(g, h, Fraction(w))

    def add(self, g: str, h: str, w: Fraction):
        if g == h:
            return
        if w < 0:
            raise ValueError("FRG weights are nonnegative")
        self.adj[g][h] = self.adj[g].get(h, Fraction(0)) + w
        self.adj[h][g] = self.adj[g][h]

    def weight(self, g: str, h: str) -> Fraction:
        return self.adj[g].get(h, Fraction(0))

    def edges(self) -> list:
        """Nonzero edges as (g, h, w) with g < h, sorted lexicographically."""
        out = []
        for g, row in self.adj.items():
            for h, w in row.items():
                if g < h and w:
                    out.append((g, h, w))
        return sorted(out)

    @property
    def total_weight(self) -> Fraction:
        return sum((w for _, _, w in self.edges()), Fraction(0))

    def __eq__(self, other):
        return isinstance(other, Frg) and self.functions == other.functions \
            and self.edges() == other.edges()

    def __repr__(self):
        return f"Frg({len(self.functions)} functions, total={self.total_weight})"


def _sites(p: Program, d: DataflowResult) -> Iterator[tuple]:
    bit = d.masks.bit
    vop = d.vop_masks()
    for f in p.functions:
        for pos, ins in f.positions():
            if ins.op in (Op.GOTO, Op.CGOTO):
                yield pos, vop[pos][0], bit[f.id]
            elif ins.op is Op.CALL:
                yield pos, vop[pos][0], bit[ins.arg]


def pnti_sites(p: Program, d: DataflowResult) -> Iterator[tuple]:
    """Yield (position, VOP before the PNTI, required relation) for every PNTI."""
    to = d.masks.to_set
    for pos, v, t in _sites(p, d):
        yield pos, to(v), to(t)


def build_frg(p: Program, d: DataflowResult) -> Frg:
    """Every PNTI whose incoming relation differs from the one it needs adds
    prevalue/|VOP| to each pair of distinct functions in VOP plus the target.

    Sites with an empty VOP (unreachable code) carry no relation and are
    skipped.
    """
    groups = Counter()
    for _, v, t in _sites(p, d):
        if v != t and v:
            groups[(v | t, bin(v).count("1"))] += 1

    # integer site counts per (pair, |VOP|); divided out once at the end
    ids = p.function_ids
    per_pair = {}
    for (members, n), count in groups.items():
        idx = [k for k in range(len(ids)) if members >> k & 1]
        for pair in combinations(idx, 2):
            row = per_pair.setdefault(pair, {})
            row[n] = row.get(n, 0) + count

    frg = Frg(ids)
    prevalue = p.config.prevalue
    for (a, b), row in sorted(per_pair.items()):
        w = sum((Fraction(c, n) for n, c in sorted(row.items())), Fraction(0))
        frg.add(ids[a], ids[b], prevalue * w)
    return frg
