"""Call-by-value evaluator for certified queries.

Evaluation assumes the program already typechecked; EvalError therefore
signals an interpreter bug or a violated precondition, not bad user
input. Noise is drawn exactly once per mechanism node, from the noise
source handed in by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from math import isfinite

from . import mech
from .lang import (Expr, Gauss, Laplace, Let, MatrixTy, PLam, RealOf, RLit,
                   Rows, Ty, Var)


class EvalError(Exception):
    pass


@dataclass
class Database:
    """Decrypted rows conforming to a matrix schema."""

    schema: MatrixTy
    rows: list[tuple[Decimal, ...]] = field(default_factory=list)

    def add_row(self, row: tuple[Decimal, ...]):
        if len(row) != len(self.schema.schema):
            raise ValueError(
                f"row has {len(row)} fields, schema has {len(self.schema.schema)}")
        for v in row:
            if not isinstance(v, Decimal) or not v.is_finite():
                raise ValueError("row values must be finite decimals")
        self.rows.append(tuple(row))

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class NumV:
    value: float


@dataclass(frozen=True)
class MatV:
    db: Database


@dataclass(frozen=True)
class ClosureV:
    param: str
    param_ty: Ty
    body: Expr
    env: dict


Value = NumV | MatV | ClosureV


def _num(v: Value) -> float:
    if not isinstance(v, NumV):
        raise EvalError(f"expected a number, got {type(v).__name__}")
    return v.value


def _static_num(e: Expr, env: dict) -> float:
    if isinstance(e, RLit):
        return float(e.value)
    if isinstance(e, Var):
        v = env.get(e.name)
        if v is None:
            raise EvalError(f"unbound variable {e.name!r}")
        return _num(v)
    raise EvalError("mechanism parameter is not a static value")


def evaluate(e: Expr, env: dict, rng) -> Value:
    if isinstance(e, Var):
        v = env.get(e.name)
        if v is None:
            raise EvalError(f"unbound variable {e.name!r}")
        return v
    if isinstance(e, RLit):
        return NumV(float(e.value))
    if isinstance(e, Let):
        bound = evaluate(e.bound, env, rng)
        inner = dict(env)
        inner[e.name] = bound
        return evaluate(e.body, inner, rng)
    if isinstance(e, PLam):
        return ClosureV(e.param, e.param_ty, e.body, dict(env))
    if isinstance(e, Gauss):
        sigma = mech.gauss_sigma(_static_num(e.sens, env),
                                 _static_num(e.eps, env),
                                 _static_num(e.delta, env))
        center = _num(evaluate(e.body, env, rng))
        return _finite_num(center + rng.gauss(sigma))
    if isinstance(e, Laplace):
        b = mech.laplace_scale(_static_num(e.sens, env),
                               _static_num(e.eps, env))
        center = _num(evaluate(e.body, env, rng))
        return _finite_num(center + rng.laplace(b))
    if isinstance(e, Rows):
        v = evaluate(e.arg, env, rng)
        if not isinstance(v, MatV):
            raise EvalError("rows applied to a non-matrix")
        return NumV(float(len(v.db)))
    if isinstance(e, RealOf):
        return NumV(_num(evaluate(e.arg, env, rng)))
    raise EvalError(f"not an expression: {e!r}")


def _finite_num(x: float) -> NumV:
    if not isfinite(x):
        raise EvalError("non-finite numeric result")
    return NumV(x)


def apply_query(fn: Value, db: Database, rng) -> float:
    """Run a certified query closure against the database.

    The closure must come from a validated program and the database must
    match its declared argument type; both are re-checked defensively.
    """
    if not isinstance(fn, ClosureV):
        raise EvalError("query did not evaluate to a function")
    if db.schema != fn.param_ty:
        raise EvalError("database schema does not match the query argument type")
    inner = dict(fn.env)
    inner[fn.param] = MatV(db)
    return _num(evaluate(fn.body, inner, rng))


def render_value(x: float) -> str:
    """Canonical 12-significant-digit rendering of a query result."""
    return format(x, ".12g")
