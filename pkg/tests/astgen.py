"""Hypothesis strategies for well-formed ASTs and random query programs."""

from decimal import Decimal

from hypothesis import strategies as st

from miniduet.lang import (DREAL, REAL, Gauss, Laplace, Let, MatrixTy, PLam,
                           RealOf, RLit, Rows, RPlusTy, Var)

_LOWER_KEYWORDS = {"plam", "let", "in", "gauss", "laplace", "rows", "real", "star"}

idents = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True).filter(
    lambda s: s not in _LOWER_KEYWORDS)

decimal_texts = st.from_regex(r"(0|[1-9][0-9]{0,3})(\.[0-9]{1,4})?",
                              fullmatch=True)
decimals = decimal_texts.map(Decimal)

scalar_types = st.sampled_from([REAL, DREAL])


@st.composite
def matrix_types(draw):
    rows = draw(st.one_of(st.none(), st.integers(0, 9)))
    schema = tuple(draw(st.lists(scalar_types, min_size=1, max_size=3)))
    return MatrixTy(rows, schema)


types = st.one_of(scalar_types, decimals.map(RPlusTy), matrix_types())

rexps = st.one_of(decimals.map(RLit), idents.map(Var))
var_lists = st.lists(idents, min_size=1, max_size=3, unique=True).map(tuple)


def _extend(children):
    lets = st.builds(Let, idents, children, children)
    plams = st.builds(PLam, idents, types, children)
    rows = children.map(Rows)
    reals = children.map(RealOf)
    gausses = st.builds(Gauss, rexps, rexps, rexps, var_lists, children)
    laplaces = st.builds(Laplace, rexps, rexps, var_lists, children)
    return st.one_of(lets, plams, rows, reals, gausses, laplaces)


exprs = st.recursive(st.one_of(idents.map(Var), decimals.map(RLit)),
                     _extend, max_leaves=25)
