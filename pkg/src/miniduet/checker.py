"""Static sensitivity analysis and privacy typechecking.

Two judgments:

  * the sensitivity judgment applies to mechanism-free expressions and
    bounds, per variable, how much the value can move when that variable
    moves by one unit of its metric;
  * the privacy judgment prices every expression with a per-variable
    (epsilon, delta) cost. Mechanisms charge their declared parameters to
    the listed variables; any other variable the body actually depends on
    is charged infinity, because releasing an un-noised value reveals it
    outright. Sequencing adds costs componentwise.

Statically-known R+ constants are public and carry neither sensitivity
nor cost. A value produced by a mechanism is safe to reuse downstream
free of further charge (postprocessing); the fragment has no operation
that could amplify such a value, so reuse is always 1-sensitive.

All cost arithmetic is exact decimal; checking the same program twice
yields identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Mapping

from .cost import INFINITE_COST, ONE, ZERO, ZERO_COST, ExtReal, PrivCost
from .lang import (DREAL, REAL, DRealTy, Expr, Gauss, Laplace, Let, MatrixTy,
                   PLam, PrivFnTy, RealOf, RealTy, RLit, Rows, RPlusTy, Ty,
                   Var)

Env = Mapping[str, Ty]
SensMap = dict[str, ExtReal]
PrivMap = dict[str, PrivCost]


class TypeErrorKind(Enum):
    UNBOUND_VARIABLE = "UnboundVariable"
    NOT_STATIC = "NotStatic"
    BAD_OPERAND = "BadOperand"
    SENSITIVITY_EXCEEDED = "SensitivityExceeded"
    BAD_MECH_PARAMS = "BadMechParams"
    NOT_CLOSED = "NotClosed"
    INFINITE_COST = "InfiniteCost"
    NONLINEAR_USE = "NonlinearUse"


class TypeCheckError(Exception):
    def __init__(self, kind: TypeErrorKind, message: str):
        self.kind = kind
        self.message = message
        super().__init__(f"{kind.value}: {message}")


class RejectReason(Enum):
    NOT_PRIV_FN = "NotPrivFn"
    SCHEMA_MISMATCH = "SchemaMismatch"
    INFINITE_COST = "InfiniteCost"
    NON_CONSTANT_COST = "NonConstantCost"  # reserved; cannot arise in this fragment
    TYPE_ERROR = "TypeError"


class QueryRejected(Exception):
    def __init__(self, reason: RejectReason, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)


@dataclass(frozen=True)
class QueryCert:
    """Admission certificate: the exact cost the budget manager will charge."""

    arg_ty: Ty
    ret_ty: Ty
    cost: PrivCost


_PRIVACY_NODES = (Gauss, Laplace, PLam)


def _contains_privacy(e: Expr) -> bool:
    if isinstance(e, _PRIVACY_NODES):
        return True
    if isinstance(e, Let):
        return _contains_privacy(e.bound) or _contains_privacy(e.body)
    if isinstance(e, (Rows, RealOf)):
        return _contains_privacy(e.arg)
    return False


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, RLit):
        return set()
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.name})
    if isinstance(e, PLam):
        return free_vars(e.body) - {e.param}
    if isinstance(e, Gauss):
        fv = free_vars(e.sens) | free_vars(e.eps) | free_vars(e.delta)
        return fv | free_vars(e.body)
    if isinstance(e, Laplace):
        return free_vars(e.sens) | free_vars(e.eps) | free_vars(e.body)
    if isinstance(e, (Rows, RealOf)):
        return free_vars(e.arg)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Sensitivity judgment


def _sens(e: Expr, env: Env) -> tuple[Ty, SensMap]:
    if isinstance(e, Var):
        ty = env.get(e.name)
        if ty is None:
            raise TypeCheckError(TypeErrorKind.UNBOUND_VARIABLE,
                                 f"unbound variable {e.name!r}")
        if isinstance(ty, RPlusTy):
            return ty, {}  # a known constant cannot vary
        return ty, {e.name: ONE}
    if isinstance(e, RLit):
        return RPlusTy(e.value), {}
    if isinstance(e, Rows):
        ty, smap = _sens(e.arg, env)
        if not isinstance(ty, MatrixTy):
            raise TypeCheckError(TypeErrorKind.BAD_OPERAND,
                                 "rows expects a matrix")
        # row count moves by at most the L1 distance between matrices
        return DREAL, smap
    if isinstance(e, RealOf):
        ty, smap = _sens(e.arg, env)
        if not isinstance(ty, DRealTy):
            raise TypeCheckError(TypeErrorKind.BAD_OPERAND,
                                 "real expects a discrete real")
        return REAL, smap
    if isinstance(e, Let):
        t1, s1 = _sens(e.bound, env)
        inner = dict(env)
        inner[e.name] = t1
        t2, s2 = _sens(e.body, inner)
        k = s2.pop(e.name, ZERO)
        for v, sv in s1.items():
            contrib = k * sv
            s2[v] = s2.get(v, ZERO) + contrib
        return t2, s2
    if isinstance(e, _PRIVACY_NODES):
        raise TypeCheckError(TypeErrorKind.BAD_OPERAND,
                             "privacy construct in a sensitivity-only position")
    raise TypeError(f"not an expression: {e!r}")


def sensitivity_of(e: Expr, env: Env) -> SensMap:
    """Per-variable sensitivity bound of a mechanism-free expression.

    Absent variables have sensitivity 0.
    """
    _, smap = _sens(e, env)
    return {v: s for v, s in smap.items() if s != ZERO}


# ---------------------------------------------------------------------------
# Privacy judgment


def _static_value(e: Expr, env: Env, what: str) -> Decimal:
    if isinstance(e, RLit):
        return e.value
    if isinstance(e, Var):
        ty = env.get(e.name)
        if ty is None:
            raise TypeCheckError(TypeErrorKind.UNBOUND_VARIABLE,
                                 f"unbound variable {e.name!r}")
        if isinstance(ty, RPlusTy):
            return ty.value
        raise TypeCheckError(
            TypeErrorKind.NOT_STATIC,
            f"{what} must be statically known; {e.name!r} is not an R+ constant")
    raise TypeCheckError(TypeErrorKind.NOT_STATIC,
                         f"{what} must be an R+ literal or constant")


def _is_scalar_numeric(ty: Ty) -> bool:
    return isinstance(ty, (RealTy, DRealTy, RPlusTy))


def _mech_privmap(e: Gauss | Laplace, env: Env, cost: PrivCost) -> PrivMap:
    bty, smap = _sens(e.body, env)
    if not _is_scalar_numeric(bty):
        raise TypeCheckError(TypeErrorKind.BAD_OPERAND,
                             "mechanism body must be a numeric scalar")
    sens_bound = ExtReal.finite(_static_value(e.sens, env, "sensitivity bound"))
    for x in e.vars:
        if x not in env:
            raise TypeCheckError(TypeErrorKind.UNBOUND_VARIABLE,
                                 f"unbound variable {x!r}")
        if not smap.get(x, ZERO) <= sens_bound:
            raise TypeCheckError(
                TypeErrorKind.SENSITIVITY_EXCEEDED,
                f"body is {smap[x]}-sensitive in {x!r}, bound is {sens_bound}")
    pmap: PrivMap = {x: cost for x in e.vars}
    for v, sv in smap.items():
        if v not in pmap and sv != ZERO:
            pmap[v] = INFINITE_COST  # auxiliary dependence: unprotected
    return pmap


def _add_privmaps(a: PrivMap, b: PrivMap) -> PrivMap:
    out = dict(a)
    for v, c in b.items():
        out[v] = out.get(v, ZERO_COST) + c
    return out


def typecheck(e: Expr, env: Env) -> tuple[Ty, PrivMap]:
    """Privacy-level typing: the result type and per-variable (eps, delta) cost.

    Absent variables cost (0, 0). Raises TypeCheckError.
    """
    if isinstance(e, Gauss):
        eps = _static_value(e.eps, env, "epsilon")
        delta = _static_value(e.delta, env, "delta")
        if eps <= 0:
            raise TypeCheckError(TypeErrorKind.BAD_MECH_PARAMS,
                                 "gauss requires epsilon > 0")
        if not (0 < delta < 1):
            raise TypeCheckError(TypeErrorKind.BAD_MECH_PARAMS,
                                 "gauss requires 0 < delta < 1")
        pmap = _mech_privmap(e, env, PrivCost.finite(eps, delta))
        return REAL, pmap
    if isinstance(e, Laplace):
        eps = _static_value(e.eps, env, "epsilon")
        if eps <= 0:
            raise TypeCheckError(TypeErrorKind.BAD_MECH_PARAMS,
                                 "laplace requires epsilon > 0")
        pmap = _mech_privmap(e, env, PrivCost.finite(eps, 0))
        return REAL, pmap
    if isinstance(e, PLam):
        inner = dict(env)
        inner[e.param] = e.param_ty
        ret_ty, pmap = typecheck(e.body, inner)
        cost = pmap.pop(e.param, ZERO_COST)
        for v, c in pmap.items():
            if c != ZERO_COST:
                raise TypeCheckError(
                    TypeErrorKind.NOT_CLOSED,
                    f"query charges free variable {v!r}; queries must be closed")
        if not cost.is_finite:
            raise TypeCheckError(
                TypeErrorKind.INFINITE_COST,
                f"parameter {e.param!r} is released without a mechanism")
        return PrivFnTy(e.param_ty, cost, ret_ty), {}
    if isinstance(e, Let):
        if _contains_privacy(e.bound):
            t1, p1 = typecheck(e.bound, env)
            inner = dict(env)
            inner[e.name] = t1
            t2, p2 = typecheck(e.body, inner)
            p2.pop(e.name, None)  # postprocessing a released value is free
            return t2, _add_privmaps(p1, p2)
        t1, s1 = _sens(e.bound, env)
        inner = dict(env)
        inner[e.name] = t1
        t2, p2 = typecheck(e.body, inner)
        px = p2.pop(e.name, ZERO_COST)
        if px != ZERO_COST:
            # the bound value feeds a mechanism (or escapes raw): its
            # sources inherit that charge at unit sensitivity
            for v, sv in s1.items():
                if sv == ZERO:
                    continue
                if ONE < sv:
                    raise TypeCheckError(
                        TypeErrorKind.NONLINEAR_USE,
                        f"{e.name!r} amplifies {v!r} (sensitivity {sv})")
                p2[v] = p2.get(v, ZERO_COST) + px
        return t2, p2
    # mechanism-free leaf forms: releasing the value costs infinity in
    # every variable it depends on
    if _contains_privacy(e):
        raise TypeCheckError(TypeErrorKind.BAD_OPERAND,
                             "mechanism result used where a plain value is required")
    ty, smap = _sens(e, env)
    pmap = {v: INFINITE_COST for v, sv in smap.items() if sv != ZERO}
    return ty, pmap


# ---------------------------------------------------------------------------
# Query admission


def _runtime_statics(e: Expr, statics: dict[str, Decimal]):
    """Enforce executability limits the abstract judgment does not impose.

    The calibrated gaussian noise formula is valid only for epsilon <= 1,
    so queries headed for execution must respect it even though the cost
    judgment itself prices larger epsilons exactly.
    """
    if isinstance(e, (Var, RLit)):
        return
    if isinstance(e, Let):
        _runtime_statics(e.bound, statics)
        inner = dict(statics)
        if isinstance(e.bound, RLit):
            inner[e.name] = e.bound.value
        elif isinstance(e.bound, Var) and e.bound.name in statics:
            inner[e.name] = statics[e.bound.name]
        else:
            inner.pop(e.name, None)
        _runtime_statics(e.body, inner)
        return
    if isinstance(e, PLam):
        inner = dict(statics)
        if isinstance(e.param_ty, RPlusTy):
            inner[e.param] = e.param_ty.value
        else:
            inner.pop(e.param, None)
        _runtime_statics(e.body, inner)
        return
    if isinstance(e, Gauss):
        eps = e.eps.value if isinstance(e.eps, RLit) else statics.get(e.eps.name)
        if eps is not None and eps > 1:
            raise QueryRejected(
                RejectReason.TYPE_ERROR,
                "gauss is only executable with epsilon <= 1")
        _runtime_statics(e.body, statics)
        return
    if isinstance(e, Laplace):
        _runtime_statics(e.body, statics)
        return
    if isinstance(e, (Rows, RealOf)):
        _runtime_statics(e.arg, statics)
        return


def validate_query(e: Expr, schema: Ty) -> QueryCert:
    """Admit a program as a runnable query against the configured schema.

    Accepts exactly the closed privacy functions over the schema with a
    finite cost and a real result; returns the certificate carrying the
    exact cost. Raises QueryRejected otherwise.
    """
    try:
        ty, _ = typecheck(e, {})
    except TypeCheckError as err:
        if err.kind is TypeErrorKind.INFINITE_COST:
            raise QueryRejected(RejectReason.INFINITE_COST, err.message) from err
        raise QueryRejected(RejectReason.TYPE_ERROR, err.message) from err
    if not isinstance(ty, PrivFnTy):
        raise QueryRejected(RejectReason.NOT_PRIV_FN,
                            "a query must be a privacy function over the database")
    if not isinstance(ty.ret_ty, RealTy):
        raise QueryRejected(RejectReason.NOT_PRIV_FN,
                            "a query must produce a real result")
    if ty.arg_ty != schema:
        raise QueryRejected(RejectReason.SCHEMA_MISMATCH,
                            "argument type does not match the database schema")
    if not ty.cost.is_finite:
        raise QueryRejected(RejectReason.INFINITE_COST,
                            "query cost is unbounded")
    _runtime_statics(e, {})
    return QueryCert(ty.arg_ty, ty.ret_ty, ty.cost)
