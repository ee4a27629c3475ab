import pytest
from hypothesis import given, settings, strategies as st

from pagesel.generate import CANONICAL, GenSpec, generate
from pagesel.ir import (PSEUDO_BLOCK, BasicBlock, Config, Function, IRError, build_cfg,
                        call, cgoto, format_program, goto, parse_program, pti, ret, strip_psi)

from conftest import prog

SIMPLE = "pages 2\npage_size 2048\nfunc main:\n b0: pti 10\n call g\n ret\nfunc g:\n b0: pti 5\n ret\n"


def test_parse_simple_program():
    p = parse_program(SIMPLE)
    assert p.function_ids == ("main", "g")
    assert p.entry_function == "main"
    assert p.function("main").base_size == 12
    assert p.function("g").base_size == 6
    assert p.config == Config(2, 2048, 1, 1)


def test_large_page_geometry_accepted():
    # 11 address bits -> 2048-word pages
    p = parse_program(SIMPLE)
    assert p.config.page_size == 2 ** 11


def test_psi_in_input_rejected():
    with pytest.raises(IRError, match="Psi in input"):
        parse_program("pages 2\npage_size 16\nfunc f:\nb0: psi 1\n  call f\n  ret\n")


def test_psi_allowed_on_request():
    p = parse_program("pages 2\npage_size 16\nfunc f:\nb0: psi 1\n  call f\n  ret\n",
                      allow_psi=True)
    assert p.psi_count == 1
    assert p.function("f").base_size == 2
    assert strip_psi(p).psi_count == 0


@pytest.mark.parametrize("text, message, line", [
    ("pages 2\npage_size 16\nfunc f:\nb0: call nowhere\n  ret\n", "unresolved callee", 4),
    ("pages 2\npage_size 16\nfunc f:\nb0: goto nowhere\n", "unresolved label", 4),
    ("pages 2\npage_size 16\nfunc f:\nb0: ret\nfunc f:\nb0: ret\n", "duplicate function", 5),
    ("pages 2\npage_size 16\nfunc f:\nb0: pti 1\nb0: ret\n", "duplicate block", 5),
    ("pages 2\npage_size 16\nfunc f:\nb0: pti 1\n", "falls off the end", 4),
    ("pages 2\npage_size 16\nfunc f:\nb0: cgoto b0\n", "falls off the end", 4),
    ("pages 2\npage_size 16\nfunc f:\nb0: ret\n  pti 1\n", "not last", 5),
    ("pages 2\npage_size 16\nfunc f:\nb0: jump b0\n", "unknown instruction", 4),
    ("pages 2\npage_size 16\nfunc f:\nb0: pti 0\n  ret\n", "integer must be >= 1", 4),
    ("pages 2\npage_size 16\nfunc f:\nb0: psi 2\n  call f\n  ret\n", "Psi in input", 4),
    ("page_size 16\npages 2\nfunc f:\nb0: ret\n", "out of order", 1),
    ("pages 2\nfunc f:\nb0: ret\n", "missing", 2),
    ("pages 2\npage_size 16\n  pti 3\n", "outside of a block", 3),
])
def test_parse_errors(text, message, line):
    with pytest.raises(IRError, match=message) as exc:
        parse_program(text)
    assert exc.value.line == line


def test_syntax_error_reports_column():
    with pytest.raises(IRError) as exc:
        parse_program("pages 2\npage_size 16\nfunc f:\nb0: pti x\n  ret\n")
    assert (exc.value.line, exc.value.column) == (4, 9)
    assert "line 4, column 9" in str(exc.value)


def test_comments_and_blank_lines():
    p = prog("""
        # header
        pages 1   # one page
        page_size 100
        psi_cost 2
        prevalue 0.5

        func main:   # entry
        start:
          pti 3
          ret
        """)
    assert p.config.psi_cost == 2
    assert p.config.prevalue == pytest.approx(0.5)
    assert p.function("main").base_size == 4


def test_prevalue_defaults_to_psi_cost():
    p = parse_program("pages 1\npage_size 9\npsi_cost 3\nfunc f:\nb: ret\n")
    assert p.config.prevalue == 3


def test_cfg_single_block():
    p = parse_program("pages 1\npage_size 9\nfunc main:\nb0: pti 1\n  ret\n")
    f = p.function("main")
    assert f.block("b0").successors == (PSEUDO_BLOCK,)
    assert f.block(PSEUDO_BLOCK).successors == ()
    assert f.block(PSEUDO_BLOCK).instrs == ()
    assert f.pseudo_exit == PSEUDO_BLOCK


def test_cfg_cgoto_and_fallthrough():
    p = prog("""
        pages 1
        page_size 99
        func f:
        b0: cgoto b2
        b1: call g
        b2: ret
        func g:
        b0: ret
        """)
    f = p.function("f")
    assert set(f.block("b0").successors) == {"b1", "b2"}
    assert f.block("b1").successors == ("b2",)
    assert f.block("b2").successors == (PSEUDO_BLOCK,)


def test_cfg_loop_without_ret():
    p = prog("""
        pages 1
        page_size 99
        func f:
        b0: goto b1
        b1: goto b0
        """)
    f = p.function("f")
    assert f.predecessors()[PSEUDO_BLOCK] == []
    assert f.block("b0").successors == ("b1",)
    assert f.block("b1").successors == ("b0",)


def test_build_cfg_from_code():
    f = Function("f", [BasicBlock("a", [pti(2), cgoto("c")]), BasicBlock("b", [call("f")]),
                       BasicBlock("c", [goto("d")]), BasicBlock("d", [ret()])])
    built = build_cfg(f)
    assert [b.successors for b in built.blocks] == [
        ("c", "b"), ("c",), ("d",), (PSEUDO_BLOCK,), ()]
    assert build_cfg(built) == built


def test_every_real_block_has_a_successor():
    for k in range(20):
        p = parse_program(generate(CANONICAL, k))
        for f in p.functions:
            for b in f.blocks:
                assert bool(b.successors) != b.is_pseudo


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32), index=st.integers(0, 50))
def test_round_trip(seed, index):
    text = generate(GenSpec(seed=seed, recursion=0.1), index)
    p = parse_program(text)
    assert parse_program(format_program(p)) == p


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32))
def test_size_accounting(seed):
    p = parse_program(generate(GenSpec(seed=seed), 0))
    for f in p.functions:
        expected = 0
        for b in f.real_blocks:
            for i in b.instrs:
                expected += i.arg if i.op.value == "pti" else 1
        assert f.base_size == expected


def test_round_trip_keeps_fractional_prevalue():
    p = parse_program("pages 1\npage_size 9\nprevalue 1/3\nfunc f:\nb: ret\n")
    assert parse_program(format_program(p)) == p
    p = parse_program("pages 1\npage_size 9\nprevalue 0.125\nfunc f:\nb: ret\n")
    assert "prevalue 0.125" in format_program(p)
