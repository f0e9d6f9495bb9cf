"""Concrete syntax for the query language: AST, parser, and printer.

The surface syntax is plain ASCII. Grammar (whitespace-insensitive):

    program := expr
    expr    := 'plam' '.' IDENT ':' ty '=>' expr
             | 'let' IDENT '=' expr 'in' expr
             | 'gauss'   '[' rexp ',' rexp ',' rexp ']' '<' idents '>' '{' expr '}'
             | 'laplace' '[' rexp ',' rexp ']'          '<' idents '>' '{' expr '}'
             | 'rows' atom | 'real' atom | atom
    atom    := IDENT | rexp | '(' expr ')'
    rexp    := 'R+' '[' DECIMAL ']' | IDENT
    idents  := IDENT (',' IDENT)*
    ty      := 'R' | 'dR' | 'R+' '[' DECIMAL ']'
             | 'M' '[' 'L1' ',' 'U' '|' ('star'|NAT) ',' schema ']'
    schema  := scalar '::' schema | scalar '::' '[]'
    scalar  := 'R' | 'dR'

Numeric literals are exact decimals (`decimal.Decimal`), never binary
floats, so privacy parameters survive the round trip bit-for-bit.
Only the `L1` row metric and the `U` (unbounded values) clip marker
exist; `Linf` and friends are unsupported syntax.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .cost import PrivCost, as_decimal, decimal_str

# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class RealTy:
    """The real numbers under the usual metric ('R')."""


@dataclass(frozen=True)
class DRealTy:
    """Discrete reals ('dR'): equal values are 0 apart, unequal are 1 apart."""


@dataclass(frozen=True)
class RPlusTy:
    """A statically-known nonnegative real constant; public by construction."""

    value: Decimal

    def __post_init__(self):
        object.__setattr__(self, "value", as_decimal(self.value))
        if self.value < 0:
            raise ValueError("R+ value must be nonnegative")


@dataclass(frozen=True)
class MatrixTy:
    """Database matrix type: L1 row metric, unbounded values.

    rows is None for 'star' (row count not statically known) or a
    nonnegative int. The schema lists the column scalar types and must
    be non-empty.
    """

    rows: int | None
    schema: tuple[RealTy | DRealTy, ...]

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        if not self.schema:
            raise ValueError("matrix schema must have at least one column")
        for col in self.schema:
            if not isinstance(col, (RealTy, DRealTy)):
                raise ValueError("matrix schema columns must be scalar (R or dR)")
        if self.rows is not None and (not isinstance(self.rows, int) or self.rows < 0):
            raise ValueError("matrix row count must be 'star' (None) or a natural")


@dataclass(frozen=True)
class PrivFnTy:
    """A privacy function type: arg@<eps, delta> => ret.

    Produced by the typechecker only; there is no concrete syntax for it.
    """

    arg_ty: "Ty"
    cost: PrivCost
    ret_ty: "Ty"


Ty = RealTy | DRealTy | RPlusTy | MatrixTy | PrivFnTy

REAL = RealTy()
DREAL = DRealTy()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class RLit:
    """R+[c]: a statically-known nonnegative decimal literal."""

    value: Decimal

    def __post_init__(self):
        object.__setattr__(self, "value", as_decimal(self.value))
        if self.value < 0:
            raise ValueError("R+ literal must be nonnegative")


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class PLam:
    """Privacy lambda: 'plam . x : ty => body'."""

    param: str
    param_ty: Ty
    body: "Expr"


def _check_vars(vars: tuple[str, ...]):
    if not vars:
        raise ValueError("mechanism variable list must be non-empty")
    if len(set(vars)) != len(vars):
        raise ValueError("mechanism variable list must be duplicate-free")


@dataclass(frozen=True)
class Gauss:
    """gauss[sens, eps, delta] <vars> { body }.

    sens/eps/delta are restricted to RLit or Var (the typechecker requires
    them to resolve to statically-known values).
    """

    sens: "Expr"
    eps: "Expr"
    delta: "Expr"
    vars: tuple[str, ...]
    body: "Expr"

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        _check_vars(self.vars)


@dataclass(frozen=True)
class Laplace:
    """laplace[sens, eps] <vars> { body }; delta is identically 0."""

    sens: "Expr"
    eps: "Expr"
    vars: tuple[str, ...]
    body: "Expr"

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        _check_vars(self.vars)


@dataclass(frozen=True)
class Rows:
    arg: "Expr"


@dataclass(frozen=True)
class RealOf:
    arg: "Expr"


Expr = Var | RLit | Let | PLam | Gauss | Laplace | Rows | RealOf


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = frozenset(
    {"plam", "let", "in", "gauss", "laplace", "rows", "real",
     "M", "L1", "U", "star", "R", "dR"}
)

_PUNCT = ("=>", "::", "[", "]", "<", ">", "{", "}", "(", ")", ",", ":", ".", "|", "=")


class ParseError(Exception):
    """Syntax error with position and the set of tokens that would have parsed."""

    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        loc = f"line {line}, col {col}: {message}"
        if expected:
            loc += " (expected: " + ", ".join(expected) + ")"
        super().__init__(loc)


@dataclass
class _Token:
    kind: str  # IDENT | NUMBER | RPLUS | KW | PUNCT | EOF
    text: str
    line: int
    col: int
    value: Decimal | None = None
    is_nat: bool = False


def _tokenize(source: str) -> list[_Token]:
    toks: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_line, start_col = line, col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_nat = True
            if j < n and source[j] == ".":
                if j + 1 < n and source[j + 1].isdigit():
                    is_nat = False
                    j += 1
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            toks.append(_Token("NUMBER", text, start_line, start_col,
                               value=Decimal(text), is_nat=is_nat))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            if text == "R" and j < n and source[j] == "+":
                toks.append(_Token("RPLUS", "R+", start_line, start_col))
                j += 1
            elif text in KEYWORDS:
                toks.append(_Token("KW", text, start_line, start_col))
            else:
                toks.append(_Token("IDENT", text, start_line, start_col))
            col += j - i
            i = j
            continue
        matched = None
        for p in _PUNCT:
            if source.startswith(p, i):
                matched = p
                break
        if matched is None:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        toks.append(_Token("PUNCT", matched, start_line, start_col))
        i += len(matched)
        col += len(matched)
    toks.append(_Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser (recursive descent; the grammar is LL(1))


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def advance(self) -> _Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: tuple[str, ...]):
        tok = self.peek()
        got = tok.text if tok.kind != "EOF" else "end of input"
        raise ParseError(f"unexpected {got!r}", tok.line, tok.col, expected)

    def expect_punct(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind == "PUNCT" and tok.text == text:
            return self.advance()
        self.fail((f"'{text}'",))

    def expect_kw(self, word: str) -> _Token:
        tok = self.peek()
        if tok.kind == "KW" and tok.text == word:
            return self.advance()
        self.fail((f"'{word}'",))

    def expect_ident(self) -> _Token:
        tok = self.peek()
        if tok.kind == "IDENT":
            return self.advance()
        self.fail(("identifier",))

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "PUNCT" and tok.text == text

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.text == word

    # -- expressions --

    def expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "KW":
            if tok.text == "plam":
                return self.plam()
            if tok.text == "let":
                return self.let()
            if tok.text == "gauss":
                return self.mech(gaussian=True)
            if tok.text == "laplace":
                return self.mech(gaussian=False)
            if tok.text == "rows":
                self.advance()
                return Rows(self.atom())
            if tok.text == "real":
                self.advance()
                return RealOf(self.atom())
            self.fail(("expression",))
        return self.atom()

    def plam(self) -> Expr:
        self.expect_kw("plam")
        self.expect_punct(".")
        param = self.expect_ident().text
        self.expect_punct(":")
        ty = self.ty()
        self.expect_punct("=>")
        return PLam(param, ty, self.expr())

    def let(self) -> Expr:
        self.expect_kw("let")
        name = self.expect_ident().text
        self.expect_punct("=")
        bound = self.expr()
        self.expect_kw("in")
        return Let(name, bound, self.expr())

    def mech(self, gaussian: bool) -> Expr:
        self.advance()  # gauss | laplace
        self.expect_punct("[")
        sens = self.rexp()
        self.expect_punct(",")
        eps = self.rexp()
        if gaussian:
            self.expect_punct(",")
            delta = self.rexp()
        self.expect_punct("]")
        self.expect_punct("<")
        vars = self.idents()
        self.expect_punct(">")
        self.expect_punct("{")
        body = self.expr()
        self.expect_punct("}")
        if gaussian:
            return Gauss(sens, eps, delta, vars, body)
        return Laplace(sens, eps, vars, body)

    def idents(self) -> tuple[str, ...]:
        first = self.peek()
        names = [self.expect_ident().text]
        while self.at_punct(","):
            self.advance()
            names.append(self.expect_ident().text)
        if len(set(names)) != len(names):
            raise ParseError("duplicate variable in mechanism list",
                             first.line, first.col)
        return tuple(names)

    def rexp(self) -> Expr:
        tok = self.peek()
        if tok.kind == "RPLUS":
            return self.rlit()
        if tok.kind == "IDENT":
            return Var(self.advance().text)
        self.fail(("'R+'", "identifier"))

    def rlit(self) -> RLit:
        self.advance()  # R+
        self.expect_punct("[")
        tok = self.peek()
        if tok.kind != "NUMBER":
            self.fail(("decimal literal",))
        self.advance()
        self.expect_punct("]")
        return RLit(tok.value)

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "IDENT":
            return Var(self.advance().text)
        if tok.kind == "RPLUS":
            return self.rlit()
        if self.at_punct("("):
            self.advance()
            inner = self.expr()
            self.expect_punct(")")
            return inner
        self.fail(("identifier", "'R+'", "'('"))

    # -- types --

    def ty(self) -> Ty:
        tok = self.peek()
        if tok.kind == "KW" and tok.text == "R":
            self.advance()
            return REAL
        if tok.kind == "KW" and tok.text == "dR":
            self.advance()
            return DREAL
        if tok.kind == "RPLUS":
            lit = self.rlit()
            return RPlusTy(lit.value)
        if tok.kind == "KW" and tok.text == "M":
            return self.matrix_ty()
        self.fail(("'R'", "'dR'", "'R+'", "'M'"))

    def matrix_ty(self) -> Ty:
        self.expect_kw("M")
        self.expect_punct("[")
        self.expect_kw("L1")
        self.expect_punct(",")
        self.expect_kw("U")
        self.expect_punct("|")
        tok = self.peek()
        if tok.kind == "KW" and tok.text == "star":
            self.advance()
            rows = None
        elif tok.kind == "NUMBER" and tok.is_nat:
            self.advance()
            rows = int(tok.value)
        else:
            self.fail(("'star'", "natural number"))
        self.expect_punct(",")
        schema = self.schema()
        self.expect_punct("]")
        return MatrixTy(rows, schema)

    def schema(self) -> tuple[Ty, ...]:
        cols = [self.scalar()]
        self.expect_punct("::")
        while not self.at_punct("["):
            cols.append(self.scalar())
            self.expect_punct("::")
        self.expect_punct("[")
        self.expect_punct("]")
        return tuple(cols)

    def scalar(self) -> Ty:
        if self.at_kw("R"):
            self.advance()
            return REAL
        if self.at_kw("dR"):
            self.advance()
            return DREAL
        self.fail(("'R'", "'dR'"))

    def done(self):
        tok = self.peek()
        if tok.kind != "EOF":
            raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col,
                             ("end of input",))


def parse(source: str) -> Expr:
    """Parse a program, or raise ParseError with line/column and expectations."""
    p = _Parser(source)
    e = p.expr()
    p.done()
    return e


def parse_type(source: str) -> Ty:
    """Parse a type (used to read the database schema from configuration)."""
    p = _Parser(source)
    t = p.ty()
    p.done()
    return t


# ---------------------------------------------------------------------------
# Printer. render/render_type produce canonical text that re-parses to an
# equal AST.


def _atom_text(e: Expr) -> str:
    if isinstance(e, (Var, RLit)):
        return render(e)
    return f"({render(e)})"


def render(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, RLit):
        return f"R+[{decimal_str(e.value)}]"
    if isinstance(e, Let):
        return f"let {e.name} = {render(e.bound)} in {render(e.body)}"
    if isinstance(e, PLam):
        return f"plam . {e.param} : {render_type(e.param_ty)} => {render(e.body)}"
    if isinstance(e, Gauss):
        args = f"{render(e.sens)}, {render(e.eps)}, {render(e.delta)}"
        return f"gauss[{args}] <{', '.join(e.vars)}> {{ {render(e.body)} }}"
    if isinstance(e, Laplace):
        args = f"{render(e.sens)}, {render(e.eps)}"
        return f"laplace[{args}] <{', '.join(e.vars)}> {{ {render(e.body)} }}"
    if isinstance(e, Rows):
        return f"rows {_atom_text(e.arg)}"
    if isinstance(e, RealOf):
        return f"real {_atom_text(e.arg)}"
    raise TypeError(f"not an expression: {e!r}")


def render_type(t: Ty) -> str:
    if isinstance(t, RealTy):
        return "R"
    if isinstance(t, DRealTy):
        return "dR"
    if isinstance(t, RPlusTy):
        return f"R+[{decimal_str(t.value)}]"
    if isinstance(t, MatrixTy):
        rows = "star" if t.rows is None else str(t.rows)
        schema = "::".join(render_type(c) for c in t.schema) + "::[]"
        return f"M [L1,U | {rows}, {schema}]"
    if isinstance(t, PrivFnTy):
        return f"{render_type(t.arg_ty)}@{t.cost.render()} => {render_type(t.ret_ty)}"
    raise TypeError(f"not a type: {t!r}")
