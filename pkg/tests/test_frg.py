from fractions import Fraction
from itertools import combinations
from math import comb

from pagesel.analysis import solve
from pagesel.frg import Frg, build_frg, pnti_sites
from pagesel.generate import CANONICAL, generate
from pagesel.ir import Op, parse_program

from conftest import prog
from test_analysis import CHAIN, DIAMOND


def reference_weights(p, d):
    """Straight transcription of the per-PNTI weight update, one site at a time."""
    w = {}
    for f in p.functions:
        for pos, ins in f.positions():
            if not ins.is_pnti:
                continue
            v = d.vop_before(pos)
            t = {f.id} if ins.op in (Op.GOTO, Op.CGOTO) else {ins.arg}
            if not v or v == t:
                continue
            for g, h in combinations(sorted(v | t), 2):
                w[(g, h)] = w.get((g, h), Fraction(0)) + p.config.prevalue / len(v)
    return {k: x for k, x in w.items() if x}


def test_chain_weights():
    p = prog(CHAIN)
    frg = build_frg(p, solve(p))
    assert frg.weight("main", "g") == 1
    assert frg.weight("g", "h") == 1
    assert frg.weight("main", "h") == 0


def test_diamond_weights():
    p = prog(DIAMOND)
    frg = build_frg(p, solve(p))
    # call g: {f} -> +1 on (f,g); call h: V={f,g}, +1/2 on each pair of {f,g,h}
    assert frg.weight("f", "g") == Fraction(3, 2)
    assert frg.weight("f", "h") == Fraction(1, 2)
    assert frg.weight("g", "h") == Fraction(1, 2)
    assert frg.total_weight == Fraction(5, 2)


def test_matching_relations_give_zero_weight():
    p = prog("""
        pages 1
        page_size 99
        func f:
        b0: pti 1
          goto b1
        b1: cgoto b0
        b2: ret
        """)
    frg = build_frg(p, solve(p))
    assert frg.edges() == []
    assert frg.total_weight == 0


def test_prevalue_scales_weights():
    p = prog(DIAMOND)
    q = p.with_config(prevalue=Fraction(3))
    a, b = build_frg(p, solve(p)), build_frg(q, solve(q))
    for g, h, w in a.edges():
        assert b.weight(g, h) == 3 * w


def test_symmetry_zero_diagonal_and_reference():
    for k in range(40):
        p = parse_program(generate(CANONICAL, k))
        d = solve(p)
        frg = build_frg(p, d)
        for g in p.function_ids:
            assert frg.weight(g, g) == 0
            for h in p.function_ids:
                assert frg.weight(g, h) == frg.weight(h, g) >= 0
        ref = reference_weights(p, d)
        assert {(g, h): w for g, h, w in frg.edges()} == ref


def test_conservation_per_site():
    for k in range(40):
        p = parse_program(generate(CANONICAL, k))
        d = solve(p)
        total = Fraction(0)
        for _, v, t in pnti_sites(p, d):
            if v and v != t:
                total += p.config.prevalue / len(v) * comb(len(v | t), 2)
        assert build_frg(p, d).total_weight == total


def test_determinism():
    text = generate(CANONICAL, 3)
    a = build_frg(parse_program(text), solve(parse_program(text)))
    b = build_frg(parse_program(text), solve(parse_program(text)))
    assert a == b and a.edges() == b.edges()


def test_frg_from_weights():
    frg = Frg("abc", {("a", "b"): 2, ("c", "b"): Fraction(1, 2)})
    assert frg.edges() == [("a", "b", 2), ("b", "c", Fraction(1, 2))]
    assert frg.weight("b", "a") == 2
