from decimal import Decimal

import pytest
from hypothesis import given, settings

from astgen import exprs, matrix_types, scalar_types
from hypothesis import strategies as st
from miniduet.lang import (DREAL, REAL, Gauss, Laplace, Let, MatrixTy,
                           ParseError, PLam, RealOf, RLit, Rows, RPlusTy, Var,
                           parse, parse_type, render, render_type)


def test_parse_privacy_function():
    got = parse("plam . x : R => gauss[R+[1.0], R+[1.0], R+[0.001]] <x> { x }")
    want = PLam("x", REAL,
                Gauss(RLit(Decimal("1.0")), RLit(Decimal("1.0")),
                      RLit(Decimal("0.001")), ("x",), Var("x")))
    assert got == want


def test_parse_let_and_laplace():
    got = parse("let b = R+[2.5] in laplace[b, R+[0.5]] <x> { x }")
    want = Let("b", RLit(Decimal("2.5")),
               Laplace(Var("b"), RLit(Decimal("0.5")), ("x",), Var("x")))
    assert got == want


def test_parse_rows_real_nesting():
    got = parse("real (rows df)")
    assert got == RealOf(Rows(Var("df")))


def test_incomplete_expression_is_parse_error():
    with pytest.raises(ParseError) as err:
        parse("rows")
    assert err.value.line == 1
    assert err.value.expected  # carries the expected-token set


def test_empty_variable_list_is_parse_error():
    with pytest.raises(ParseError):
        parse("gauss[R+[1.0], R+[1.0], R+[0.1]] <> { x }")


def test_duplicate_variable_list_is_parse_error():
    with pytest.raises(ParseError):
        parse("gauss[R+[1.0], R+[1.0], R+[0.1]] <x, x> { x }")


def test_trailing_input_is_parse_error():
    with pytest.raises(ParseError):
        parse("x y")


def test_negative_literal_is_parse_error():
    with pytest.raises(ParseError):
        parse("R+[-1.0]")


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as err:
        parse("let x = R+[1.0]\nin gauss[R+[1.0], R+[1.0]] <x> { x }")
    # the gaussian needs three parameters; failure is on line 2
    assert err.value.line == 2


def test_parse_type_matrix():
    got = parse_type("M [L1, U | star, dR :: dR :: []]")
    assert got == MatrixTy(None, (DREAL, DREAL))


def test_parse_type_scalars():
    assert parse_type("R") == REAL
    assert parse_type("dR") == DREAL
    assert parse_type("R+[1.5]") == RPlusTy(Decimal("1.5"))


def test_parse_type_fixed_rows():
    assert parse_type("M [L1, U | 5, R :: []]") == MatrixTy(5, (REAL,))


def test_empty_schema_rejected():
    with pytest.raises(ParseError):
        parse_type("M [L1, U | star, []]")


def test_linf_is_unsupported_syntax():
    with pytest.raises(ParseError):
        parse_type("M [Linf, U | star, dR :: []]")


def test_render_literal_keeps_digits():
    assert render(RLit(Decimal("1.5"))) == "R+[1.5]"
    assert render(RLit(Decimal("0.001"))) == "R+[0.001]"
    assert render(RLit(Decimal("1.50"))) == "R+[1.50]"


def test_render_counting_query_roundtrip():
    src = ("plam . df : M [L1, U | star, dR :: dR :: []] => "
           "let eps = R+[1.0] in let delta = R+[0.001] in "
           "gauss[R+[1.0], eps, delta] <df> { real (rows df) }")
    e = parse(src)
    assert parse(render(e)) == e


def test_invariant_empty_vars_rejected_at_construction():
    with pytest.raises(ValueError):
        Gauss(RLit(Decimal(1)), RLit(Decimal(1)), RLit(Decimal("0.1")),
              (), Var("x"))


def test_invariant_negative_literal_rejected_at_construction():
    with pytest.raises(ValueError):
        RLit(Decimal("-3"))


def test_invariant_empty_matrix_schema_rejected():
    with pytest.raises(ValueError):
        MatrixTy(None, ())


@given(exprs)
@settings(max_examples=300)
def test_render_total_and_roundtrip(e):
    text = render(e)
    assert parse(text) == e


@given(st.one_of(scalar_types, matrix_types()))
def test_type_roundtrip(t):
    assert parse_type(render_type(t)) == t


@given(exprs)
def test_parser_deterministic(e):
    text = render(e)
    assert parse(text) == parse(text)


def test_whitespace_insensitive():
    a = parse("let x=R+[1.0] in gauss[R+[1.0],x,R+[0.001]]<y>{y}")
    b = parse("let x = R+[ 1.0 ]  in\n  gauss [ R+[1.0], x, R+[0.001] ] < y > { y }")
    assert a == b
