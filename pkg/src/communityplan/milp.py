"""Solver-neutral mixed-integer linear model representation.

A :class:`Model` collects named variables, linear constraints and one
minimization objective.  Every decision variable is either a non-negative
continuous or a binary; nothing here knows about buildings or devices.
Models are built single-threaded, solved through the pluggable backends in
:mod:`communityplan.solvers`, and exportable to LP/MPS text via
:mod:`communityplan.lpformat`.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "Domain",
    "Sense",
    "Status",
    "VarRef",
    "LinExpr",
    "Constraint",
    "Model",
    "SolveResult",
    "evaluate",
    "constraint_violation",
]

_model_counter = itertools.count()


class Domain(str, enum.Enum):
    CONTINUOUS_NONNEG = "continuous_nonneg"
    BINARY = "binary"


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


@dataclass(frozen=True)
class VarRef:
    """Handle to one registered variable; only valid within its model."""

    id: int
    name: str
    domain: Domain
    lo: float
    hi: float
    model_id: int

    def __mul__(self, coef: float) -> "LinExpr":
        return LinExpr({self.id: float(coef)}, 0.0, self.model_id)

    __rmul__ = __mul__

    def __add__(self, other) -> "LinExpr":
        return LinExpr({self.id: 1.0}, 0.0, self.model_id) + other

    def __radd__(self, other) -> "LinExpr":
        return self.__add__(other)

    def __sub__(self, other) -> "LinExpr":
        return LinExpr({self.id: 1.0}, 0.0, self.model_id) - other

    def __neg__(self) -> "LinExpr":
        return LinExpr({self.id: -1.0}, 0.0, self.model_id)


@dataclass
class LinExpr:
    """Linear expression: coefficient map over variable ids plus a constant.

    Zero coefficients are dropped on normalization so equal expressions
    compare equal regardless of construction order.
    """

    terms: dict[int, float] = field(default_factory=dict)
    constant: float = 0.0
    model_id: int | None = None

    @staticmethod
    def of(pairs: Iterable[tuple[VarRef, float]], constant: float = 0.0) -> "LinExpr":
        expr = LinExpr(constant=constant)
        for var, coef in pairs:
            expr.add(var, coef)
        return expr

    def add(self, var: VarRef, coef: float) -> "LinExpr":
        if self.model_id is None:
            self.model_id = var.model_id
        elif self.model_id != var.model_id:
            raise ValueError(f"variable {var.name} belongs to a different model")
        if coef:
            new = self.terms.get(var.id, 0.0) + coef
            if new == 0.0:
                self.terms.pop(var.id, None)
            else:
                self.terms[var.id] = new
        return self

    def _merge(self, other, sign: float) -> "LinExpr":
        out = LinExpr(dict(self.terms), self.constant, self.model_id)
        if isinstance(other, VarRef):
            other = LinExpr({other.id: 1.0}, 0.0, other.model_id)
        if isinstance(other, LinExpr):
            if out.model_id is None:
                out.model_id = other.model_id
            elif other.model_id is not None and out.model_id != other.model_id:
                raise ValueError("cannot combine expressions from different models")
            for vid, coef in other.terms.items():
                new = out.terms.get(vid, 0.0) + sign * coef
                if new == 0.0:
                    out.terms.pop(vid, None)
                else:
                    out.terms[vid] = new
            out.constant += sign * other.constant
            return out
        if isinstance(other, (int, float)):
            out.constant += sign * other
            return out
        return NotImplemented

    def __add__(self, other) -> "LinExpr":
        return self._merge(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other) -> "LinExpr":
        return self._merge(other, -1.0)

    def __mul__(self, coef: float) -> "LinExpr":
        return LinExpr(
            {vid: c * coef for vid, c in self.terms.items() if c * coef != 0.0},
            self.constant * coef,
            self.model_id,
        )

    __rmul__ = __mul__

    def normalized(self) -> "LinExpr":
        return LinExpr(
            {vid: c for vid, c in self.terms.items() if c != 0.0},
            self.constant,
            self.model_id,
        )

    def validate_finite(self) -> None:
        if not math.isfinite(self.constant):
            raise ValueError("expression constant must be finite")
        for vid, coef in self.terms.items():
            if not math.isfinite(coef):
                raise ValueError(f"non-finite coefficient on variable id {vid}")


@dataclass(frozen=True)
class Constraint:
    index: int
    name: str
    expr: LinExpr
    sense: Sense
    rhs: float


class Model:
    """Mutable model builder; single-threaded per instance."""

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self.variables: list[VarRef] = []
        self.constraints: list[Constraint] = []
        self.objective: LinExpr = LinExpr()
        self._model_id = next(_model_counter)
        self._var_names: set[str] = set()
        self._con_by_name: dict[str, Constraint] = {}

    # -- variables --------------------------------------------------------

    def add_var(
        self,
        name: str,
        domain: Domain = Domain.CONTINUOUS_NONNEG,
        lo: float = 0.0,
        hi: float = math.inf,
    ) -> VarRef:
        domain = Domain(domain)
        if name in self._var_names:
            raise ValueError(f"duplicate variable name '{name}'")
        if domain == Domain.BINARY:
            lo, hi = 0.0, 1.0
        if lo < 0:
            raise ValueError(f"variable '{name}': lower bound must be >= 0")
        if lo > hi:
            raise ValueError(f"variable '{name}': lo {lo} > hi {hi}")
        var = VarRef(len(self.variables), name, domain, float(lo), float(hi), self._model_id)
        self.variables.append(var)
        self._var_names.add(name)
        return var

    def add_binary(self, name: str) -> VarRef:
        return self.add_var(name, Domain.BINARY)

    def var_by_name(self, name: str) -> VarRef:
        for var in self.variables:
            if var.name == name:
                return var
        raise KeyError(name)

    # -- constraints and objective ----------------------------------------

    def _check_owned(self, expr: LinExpr) -> None:
        if expr.model_id is not None and expr.model_id != self._model_id:
            raise ValueError("expression references variables of a foreign model")
        for vid in expr.terms:
            if vid >= len(self.variables):
                raise ValueError(f"expression references unregistered variable id {vid}")

    def add_constraint(self, expr: LinExpr, sense: Sense, rhs: float, name: str) -> int:
        if isinstance(expr, VarRef):
            expr = LinExpr({expr.id: 1.0}, 0.0, expr.model_id)
        if name in self._con_by_name:
            raise ValueError(f"duplicate constraint name '{name}'")
        if not math.isfinite(rhs):
            raise ValueError(f"constraint '{name}': rhs must be finite")
        expr.validate_finite()
        self._check_owned(expr)
        con = Constraint(len(self.constraints), name, expr.normalized(), Sense(sense), float(rhs))
        self.constraints.append(con)
        self._con_by_name[name] = con
        return con.index

    def constraint_by_name(self, name: str) -> Constraint:
        return self._con_by_name[name]

    def minimize(self, expr: LinExpr) -> None:
        expr.validate_finite()
        self._check_owned(expr)
        self.objective = expr.normalized()

    def stats(self) -> dict[str, int]:
        n_bin = sum(1 for v in self.variables if v.domain == Domain.BINARY)
        return {
            "variables": len(self.variables),
            "binaries": n_bin,
            "constraints": len(self.constraints),
        }


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one solve; values keyed by variable name."""

    status: Status
    objective: float
    values: Mapping[str, float]
    solver_meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", dict(self.values))
        object.__setattr__(self, "solver_meta", dict(self.solver_meta))

    def __getitem__(self, var: VarRef) -> float:
        return self.values[var.name]

    def value(self, var: VarRef, default: float = 0.0) -> float:
        return self.values.get(var.name, default)


def evaluate(expr: LinExpr, model: Model, values: Mapping[str, float]) -> float:
    """Dot-product evaluation of an expression at a value assignment."""
    total = expr.constant
    for vid, coef in expr.terms.items():
        total += coef * values[model.variables[vid].name]
    return total


def constraint_violation(model: Model, values: Mapping[str, float]) -> float:
    """Largest absolute constraint violation at a value assignment."""
    worst = 0.0
    for con in model.constraints:
        lhs = evaluate(con.expr, model, values)
        if con.sense == Sense.LE:
            gap = lhs - con.rhs
        elif con.sense == Sense.GE:
            gap = con.rhs - lhs
        else:
            gap = abs(lhs - con.rhs)
        worst = max(worst, gap)
    return worst
