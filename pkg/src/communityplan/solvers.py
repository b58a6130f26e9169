"""Pluggable MILP solve backends.

Two contracts are provided:

* :class:`ScipyBackend` runs HiGHS in process through
  ``scipy.optimize.milp`` and is the default.
* :class:`CommandBackend` is the portability guarantee: it writes the
  model to an LP (or MPS) file, invokes an arbitrary solver through a
  command template such as ``"mysolver {model} --out {sol}"`` and reads
  the solution back from a ``name value`` whitespace table.

Both return a :class:`~communityplan.milp.SolveResult` whose objective is
the solver-reported optimum plus the model's objective constant;
feasibility of optimal results is re-checked to 1e-6 and recorded in
``solver_meta['max_violation']``.
"""

from __future__ import annotations

import math
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .lpformat import export_lp, export_mps, format_solution_table, parse_solution_table
from .milp import (
    Domain,
    Model,
    Sense,
    SolveResult,
    Status,
    constraint_violation,
    evaluate,
)

__all__ = [
    "SolveOptions",
    "SolverError",
    "ScipyBackend",
    "CommandBackend",
    "solve",
    "FEASIBILITY_TOL",
]

# absolute feasibility tolerance; design variables are compared across
# sensitivity runs and must be stable, hence the tight default gap
FEASIBILITY_TOL = 1e-6
DEFAULT_MIP_GAP = 1e-6


@dataclass(frozen=True)
class SolveOptions:
    time_limit_s: float | None = None
    mip_gap: float = DEFAULT_MIP_GAP
    seed: int | None = None


class SolverError(RuntimeError):
    """Backend could not be launched or produced unusable output."""


def _finalize(model: Model, status: Status, objective: float, values: dict,
              meta: dict) -> SolveResult:
    if status in (Status.OPTIMAL, Status.LIMIT) and values:
        meta["max_violation"] = constraint_violation(model, values)
        meta["objective_recomputed"] = evaluate(model.objective, model, values)
    return SolveResult(status=status, objective=objective, values=values, solver_meta=meta)


class ScipyBackend:
    """In-process HiGHS via scipy.optimize.milp."""

    name = "scipy-highs"

    def solve(self, model: Model, options: SolveOptions | None = None) -> SolveResult:
        options = options or SolveOptions()
        t0 = time.perf_counter()
        n = len(model.variables)
        meta: dict[str, object] = {"backend": self.name, "seed": options.seed}

        # vacuous rows never reach the solver; an unsatisfiable one decides
        # the model outright
        for con in model.constraints:
            if not con.expr.terms:
                lhs = con.expr.constant
                ok = (
                    lhs <= con.rhs + FEASIBILITY_TOL
                    if con.sense == Sense.LE
                    else lhs >= con.rhs - FEASIBILITY_TOL
                    if con.sense == Sense.GE
                    else abs(lhs - con.rhs) <= FEASIBILITY_TOL
                )
                if not ok:
                    return SolveResult(Status.INFEASIBLE, math.nan, {}, meta)

        if n == 0:
            meta["wall_time_s"] = time.perf_counter() - t0
            return _finalize(model, Status.OPTIMAL, model.objective.constant, {}, meta)

        c = np.zeros(n)
        for vid, coef in model.objective.terms.items():
            c[vid] = coef
        integrality = np.array(
            [1 if v.domain == Domain.BINARY else 0 for v in model.variables]
        )
        lo = np.array([v.lo for v in model.variables])
        hi = np.array([v.hi for v in model.variables])

        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        con_lo: list[float] = []
        con_hi: list[float] = []
        r = 0
        for con in model.constraints:
            if not con.expr.terms:
                continue
            for vid, coef in con.expr.terms.items():
                rows.append(r)
                cols.append(vid)
                vals.append(coef)
            rhs = con.rhs - con.expr.constant
            if con.sense == Sense.LE:
                con_lo.append(-np.inf)
                con_hi.append(rhs)
            elif con.sense == Sense.GE:
                con_lo.append(rhs)
                con_hi.append(np.inf)
            else:
                con_lo.append(rhs)
                con_hi.append(rhs)
            r += 1

        constraints = ()
        if r:
            mat = sparse.csc_matrix(
                (np.asarray(vals), (np.asarray(rows), np.asarray(cols))), shape=(r, n)
            )
            constraints = LinearConstraint(mat, np.asarray(con_lo), np.asarray(con_hi))

        milp_options: dict[str, object] = {"mip_rel_gap": options.mip_gap}
        if options.time_limit_s is not None:
            milp_options["time_limit"] = options.time_limit_s
        res = milp(
            c=c,
            constraints=constraints,
            integrality=integrality,
            bounds=Bounds(lo, hi),
            options=milp_options,
        )
        status = {0: Status.OPTIMAL, 1: Status.LIMIT, 2: Status.INFEASIBLE,
                  3: Status.UNBOUNDED}.get(res.status, Status.LIMIT)
        meta["message"] = res.message
        meta["wall_time_s"] = time.perf_counter() - t0
        if res.x is None:
            return SolveResult(status, math.nan, {}, meta)
        values = {v.name: float(res.x[v.id]) for v in model.variables}
        objective = float(res.fun) + model.objective.constant
        if getattr(res, "mip_gap", None) is not None:
            meta["mip_gap"] = float(res.mip_gap)
        return _finalize(model, status, objective, values, meta)


class CommandBackend:
    """File-based backend around an external solver process.

    ``cmd_template`` is formatted with ``{model}`` (path of the exported
    LP or MPS file) and ``{sol}`` (path the solver must write its
    ``name value`` solution table to); optional placeholders
    ``{time_limit}`` and ``{mip_gap}`` receive the solve options.
    """

    name = "command"

    def __init__(self, cmd_template: str, file_format: str = "lp") -> None:
        if file_format not in ("lp", "mps"):
            raise ValueError("file_format must be 'lp' or 'mps'")
        self.cmd_template = cmd_template
        self.file_format = file_format

    def solve(self, model: Model, options: SolveOptions | None = None) -> SolveResult:
        options = options or SolveOptions()
        t0 = time.perf_counter()
        meta: dict[str, object] = {
            "backend": self.name,
            "command": self.cmd_template,
            "seed": options.seed,
        }
        with tempfile.TemporaryDirectory(prefix="communityplan_") as tmp:
            model_path = Path(tmp) / f"model.{self.file_format}"
            sol_path = Path(tmp) / "model.sol"
            text = export_lp(model) if self.file_format == "lp" else export_mps(model)
            model_path.write_text(text)
            cmd = self.cmd_template.format(
                model=model_path,
                sol=sol_path,
                time_limit=options.time_limit_s or 0,
                mip_gap=options.mip_gap,
            )
            try:
                proc = subprocess.run(
                    cmd,
                    shell=True,
                    capture_output=True,
                    text=True,
                    timeout=options.time_limit_s,
                )
            except subprocess.TimeoutExpired:
                meta["wall_time_s"] = time.perf_counter() - t0
                return SolveResult(Status.LIMIT, math.nan, {}, meta)
            meta["returncode"] = proc.returncode
            if not sol_path.exists():
                raise SolverError(
                    f"solver command produced no solution file: {cmd!r} "
                    f"(rc={proc.returncode}, stderr={proc.stderr[-500:]!r})"
                )
            status, objective, values = parse_solution_table(sol_path.read_text())
        meta["wall_time_s"] = time.perf_counter() - t0
        if status in (Status.INFEASIBLE, Status.UNBOUNDED):
            return SolveResult(status, math.nan, {}, meta)
        if objective is None:
            objective = evaluate(model.objective, model, values)
        return _finalize(model, status, float(objective), values, meta)


def solve(
    model: Model,
    backend: object = "scipy",
    options: SolveOptions | None = None,
) -> SolveResult:
    """Solve with the given backend.

    ``backend`` may be the string ``"scipy"``, a command template string
    containing ``{model}``/``{sol}`` placeholders, or any object with a
    ``solve(model, options)`` method.
    """
    if isinstance(backend, str):
        if backend == "scipy":
            backend = ScipyBackend()
        elif "{" in backend:
            backend = CommandBackend(backend)
        else:
            raise SolverError(f"unknown backend '{backend}'")
    return backend.solve(model, options)


# shared helper for writing mock/external solutions, re-exported for CLI use
solution_table = format_solution_table
