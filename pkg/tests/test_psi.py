import pytest
from hypothesis import given, settings, strategies as st

from pagesel.analysis import solve
from pagesel.errors import CapacityError
from pagesel.frg import build_frg
from pagesel.generate import CANONICAL, GenSpec, generate
from pagesel.ir import Op, call, cgoto, goto, parse_program, strip_psi
from pagesel.partition import PageAssignment, greedy_partition
from pagesel.psi import (code_size, first_fit, insert_psi, naive_placement,
                         required_page)

from conftest import FIXTURES, prog
from test_analysis import CHAIN


def assign(**pages):
    return PageAssignment(dict(pages), {})


def psi_before(o, fid, bid):
    """(psi page, next instruction) pairs for one block of an optimized program."""
    instrs = o.program.function(fid).block(bid).instrs
    return [(i.arg, str(instrs[k + 1])) for k, i in enumerate(instrs) if i.op is Op.PSI]


def test_required_page():
    a = assign(f=0, g=1)
    assert required_page(goto("b1"), "f", a) == 0
    assert required_page(cgoto("b1"), "g", a) == 1
    assert required_page(call("g"), "f", a) == 1
    with pytest.raises(ValueError):
        required_page(parse_program("pages 1\npage_size 9\nfunc f:\nb: ret\n")
                      .function("f").blocks[0].instrs[0], "f", a)


def test_pair_colocated_needs_no_psi():
    p = parse_program((FIXTURES / "pair.ir").read_text())
    o = insert_psi(p, assign(f=0, g=0), solve(p))
    assert o.psi_count == 0
    assert o.total_size == p.base_size == 17
    assert naive_placement(p).total_size == 18


def test_pair_split_needs_one():
    p = parse_program((FIXTURES / "pair.ir").read_text())
    o = insert_psi(p, assign(f=0, g=1), solve(p))
    assert psi_before(o, "f", "entry") == [(1, "call g")]


def test_chain_all_on_one_page():
    p = prog(CHAIN)
    o = insert_psi(p, assign(main=0, g=0, h=0), solve(p))
    assert o.psi_count == 0
    assert o.total_size == p.base_size == 12


def test_chain_h_elsewhere():
    p = prog(CHAIN)
    o = insert_psi(p, assign(main=0, g=0, h=1), solve(p))
    assert psi_before(o, "main", "b0") == [(1, "call h")]
    assert o.psi_sites == {("main", "b0", 1)}


def test_chain_g_elsewhere():
    # after returning from g the PSR holds g's page, not main's
    p = prog(CHAIN)
    o = insert_psi(p, assign(main=0, g=1, h=0), solve(p))
    assert psi_before(o, "main", "b0") == [(1, "call g"), (0, "call h")]


def test_naive_inserts_before_every_pnti():
    p = prog(CHAIN)
    n = naive_placement(p)
    assert n.psi_count == p.pnti_count == 2
    assert n.total_size == 14
    assert n.assignment.func_page == {"main": 0, "g": 0, "h": 0}


def test_first_fit_declaration_order():
    p = parse_program((FIXTURES / "motivation.ir").read_text())
    a = first_fit(p)
    # naive sizes: main 15, g 21, h 16; all fit the 64-word page 0
    assert a.func_page == {"main": 0, "g": 0, "h": 0}
    assert a.page_free == {0: 12, 1: 64}


def test_first_fit_spills():
    p = prog("""
        pages 2
        page_size 10
        func f:
        b0: pti 6
          ret
        func g:
        b0: pti 6
          ret
        """)
    assert first_fit(p).func_page == {"f": 0, "g": 1}


def test_first_fit_no_room():
    p = prog("pages 1\npage_size 4\nfunc f:\nb0: pti 6\n  ret\n")
    with pytest.raises(CapacityError):
        first_fit(p)


def test_code_size():
    p = prog(CHAIN)
    naive = code_size(naive_placement(p))
    opt = code_size(insert_psi(p, assign(main=0, g=0, h=0), solve(p)))
    assert (naive["size"], naive["psi_count"]) == (14, 2)
    assert (opt["size"], opt["psi_count"]) == (12, 0)
    assert opt["nof"] == 3


def test_unreachable_pnti_gets_psi():
    p = prog("""
        pages 1
        page_size 99
        func f:
        b0: ret
        dead: call g
          ret
        func g:
        b0: ret
        """)
    o = insert_psi(p, assign(f=0, g=0), solve(p))
    assert o.psi_sites == {("f", "dead", 0)}


def test_capacity_violation():
    p = prog("""
        pages 2
        page_size 8
        func f:
        b0: call g
          ret
        func g:
        b0: pti 5
          ret
        """)
    # f 2 + g 6 = 8 words; a 7-word page cannot hold both
    q = p.with_config(page_size=7)
    with pytest.raises(CapacityError, match="overflows"):
        insert_psi(q, assign(f=0, g=0), solve(q))
    assert insert_psi(p, assign(f=0, g=0), solve(p)).occupancy() == [8, 0]


def test_rejects_existing_psi():
    p = prog("pages 2\npage_size 9\nfunc f:\nb0: psi 1\n  ret\n", allow_psi=True)
    with pytest.raises(ValueError, match="already contains"):
        insert_psi(p, assign(f=0), solve(p))


def test_incomplete_assignment():
    p = prog(CHAIN)
    with pytest.raises(ValueError, match="does not cover"):
        insert_psi(p, assign(main=0), solve(p))


def _canonical(k):
    return parse_program(generate(CANONICAL, k))


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 199))
def test_sites_subset_of_pntis_and_idempotent(k):
    p = _canonical(k)
    d = solve(p)
    try:
        a = greedy_partition(build_frg(p, d), p, conservative_size=True)
        o = insert_psi(p, a, d)
    except CapacityError:
        return
    pnti = {pos for pos, ins in p.positions() if ins.is_pnti}
    assert o.psi_sites <= pnti
    # every inserted PSI selects the page its PNTI needs
    for f in o.program.functions:
        for b in f.blocks:
            for i, ins in enumerate(b.instrs):
                if ins.op is Op.PSI:
                    assert ins.arg == required_page(b.instrs[i + 1], f.id, a)
    # removing and reinserting gives the same program
    again = insert_psi(strip_psi(o.program), a, d)
    assert again.program == o.program
    assert o.total_size == p.base_size + p.config.psi_cost * o.psi_count


def test_psi_cost_scales_size():
    p = prog(CHAIN.replace("page_size 999", "page_size 999\n    psi_cost 3"))
    n = naive_placement(p)
    assert n.total_size == p.base_size + 3 * 2
