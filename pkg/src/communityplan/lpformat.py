"""LP and MPS text export plus the matching parsers.

The LP dialect is the CPLEX-LP subset: ``Minimize``, ``Subject To``,
``Bounds``, ``Binaries``, ``End``.  MPS output is the classic fixed layout
(ROWS / COLUMNS / RHS / BOUNDS) with whitespace-delimited fields so names
longer than eight characters stay intact.  Export is deterministic:
identical models give byte-identical text, and parsing an export then
re-exporting reproduces it.

Solution ingestion accepts a plain ``name value`` whitespace table; lines
starting with ``=`` carry directives (``=status= optimal``,
``=obj= 12.5``), lines starting with ``#`` are comments.
"""

from __future__ import annotations

import re
from typing import Mapping

from .milp import Domain, LinExpr, Model, Sense, Status

__all__ = [
    "export_lp",
    "export_mps",
    "parse_lp",
    "parse_mps",
    "format_solution_table",
    "parse_solution_table",
]


def _num(x: float) -> str:
    """Shortest round-trip decimal; integers without trailing zeros."""
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def _expr_tokens(expr: LinExpr, model: Model, with_constant: bool) -> list[str]:
    tokens: list[str] = []
    for vid in sorted(expr.terms):
        coef = expr.terms[vid]
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        name = model.variables[vid].name
        if mag == 1.0:
            tokens.extend([sign, name])
        else:
            tokens.extend([sign, _num(mag), name])
    if with_constant and expr.constant != 0.0:
        sign = "-" if expr.constant < 0 else "+"
        tokens.extend([sign, _num(abs(expr.constant))])
    if not tokens:
        tokens = ["0"]
    elif tokens[0] == "+":
        tokens = tokens[1:]
    return tokens


def export_lp(model: Model) -> str:
    """Serialize to LP text.  Vacuous (empty-expression) constraints are
    checked for satisfiability and then omitted, since LP rows need at
    least one variable."""
    lines = [f"\\ {model.name}", "Minimize"]
    lines.append(" obj: " + " ".join(_expr_tokens(model.objective, model, True)))
    lines.append("Subject To")
    for con in model.constraints:
        if not con.expr.terms:
            _check_vacuous(con.name, con.expr.constant, con.sense, con.rhs)
            continue
        body = " ".join(_expr_tokens(con.expr, model, False))
        rhs = con.rhs - con.expr.constant
        lines.append(f" {con.name}: {body} {con.sense.value} {_num(rhs)}")
    lines.append("Bounds")
    for var in model.variables:
        if var.domain == Domain.BINARY:
            continue
        if var.lo == 0.0 and var.hi == float("inf"):
            continue
        if var.hi == float("inf"):
            lines.append(f" {var.name} >= {_num(var.lo)}")
        else:
            lines.append(f" {_num(var.lo)} <= {var.name} <= {_num(var.hi)}")
    binaries = [v.name for v in model.variables if v.domain == Domain.BINARY]
    if binaries:
        lines.append("Binaries")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _check_vacuous(name: str, lhs: float, sense: Sense, rhs: float) -> None:
    ok = (
        lhs <= rhs
        if sense == Sense.LE
        else lhs >= rhs if sense == Sense.GE else lhs == rhs
    )
    if not ok:
        raise ValueError(f"constraint '{name}' is vacuous and unsatisfiable")


def export_mps(model: Model) -> str:
    rows = [f"NAME          {model.name}", "ROWS", " N  OBJ"]
    sense_tag = {Sense.LE: "L", Sense.GE: "G", Sense.EQ: "E"}
    real_cons = []
    for con in model.constraints:
        if not con.expr.terms:
            _check_vacuous(con.name, con.expr.constant, con.sense, con.rhs)
            continue
        real_cons.append(con)
        rows.append(f" {sense_tag[con.sense]}  {con.name}")
    rows.append("COLUMNS")
    # column-major coefficient map
    by_var: dict[int, list[tuple[str, float]]] = {v.id: [] for v in model.variables}
    for vid, coef in model.objective.terms.items():
        by_var[vid].append(("OBJ", coef))
    for con in real_cons:
        for vid, coef in con.expr.terms.items():
            by_var[vid].append((con.name, coef))
    in_integer = False
    marker = 0
    for var in model.variables:
        want_integer = var.domain == Domain.BINARY
        if want_integer and not in_integer:
            rows.append(f"    MARKER{marker}    'MARKER'    'INTORG'")
            marker += 1
            in_integer = True
        elif not want_integer and in_integer:
            rows.append(f"    MARKER{marker}    'MARKER'    'INTEND'")
            marker += 1
            in_integer = False
        entries = by_var[var.id]
        if not entries:
            entries = [("OBJ", 0.0)]  # keep every declared column present
        for row_name, coef in entries:
            rows.append(f"    {var.name}  {row_name}  {_num(coef)}")
    if in_integer:
        rows.append(f"    MARKER{marker}    'MARKER'    'INTEND'")
    rows.append("RHS")
    if model.objective.constant != 0.0:
        rows.append(f"    RHS  OBJ  {_num(-model.objective.constant)}")
    for con in real_cons:
        rhs = con.rhs - con.expr.constant
        if rhs != 0.0:
            rows.append(f"    RHS  {con.name}  {_num(rhs)}")
    rows.append("BOUNDS")
    for var in model.variables:
        if var.domain == Domain.BINARY:
            rows.append(f" BV BND  {var.name}")
            continue
        if var.lo != 0.0:
            rows.append(f" LO BND  {var.name}  {_num(var.lo)}")
        if var.hi != float("inf"):
            rows.append(f" UP BND  {var.name}  {_num(var.hi)}")
    rows.append("ENDATA")
    return "\n".join(rows) + "\n"


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_NUM_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")

_SECTIONS = {
    "minimize": "objective",
    "min": "objective",
    "subject to": "constraints",
    "st": "constraints",
    "s.t.": "constraints",
    "bounds": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "bin": "binaries",
    "end": "end",
}


def parse_lp(text: str) -> Model:
    """Parse the LP dialect written by :func:`export_lp`.

    Line oriented: each objective/constraint row starts with ``label:``
    and may continue on following unlabeled lines; bounds rows are one
    per line.
    """
    model = Model("parsed")
    section = None
    rows: list[tuple[str, str, list[str]]] = []  # (section, label, tokens)
    current: list[str] | None = None
    bounds_rows: list[list[str]] = []
    binary_names: list[str] = []
    for raw in text.splitlines():
        stripped = raw.strip()
        if section is None and stripped.startswith("\\"):
            model.name = stripped[1:].strip() or model.name
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in _SECTIONS:
            section = _SECTIONS[low]
            current = None
            continue
        toks = line.replace("<=", " <= ").replace(">=", " >= ").split()
        if section in ("objective", "constraints"):
            if toks[0].endswith(":"):
                current = toks[1:]
                rows.append((section, toks[0][:-1], current))
            elif ":" in toks[0]:
                label, rest = toks[0].split(":", 1)
                current = ([rest] if rest else []) + toks[1:]
                rows.append((section, label, current))
            else:
                if current is None:
                    current = []
                    rows.append((section, "", current))
                current.extend(toks)
        elif section == "bounds":
            bounds_rows.append(toks)
        elif section == "binaries":
            binary_names.extend(toks)
        else:
            raise ValueError(f"unexpected line outside any LP section: '{line}'")

    var_domains: dict[str, Domain] = {}
    var_bounds: dict[str, tuple[float, float]] = {}
    for name in binary_names:
        var_domains[name] = Domain.BINARY
    for row in bounds_rows:
        _apply_bound_row(row, var_bounds)

    # register variables in first-appearance order across obj + constraints
    order: list[str] = []
    seen: set[str] = set()
    for _, _, toks in rows:
        for tok in toks:
            if _NAME_RE.fullmatch(tok) and tok.lower() not in ("inf", "free"):
                if tok not in seen:
                    seen.add(tok)
                    order.append(tok)
    for name in binary_names:
        if name not in seen:
            seen.add(name)
            order.append(name)
    refs = {}
    for name in order:
        domain = var_domains.get(name, Domain.CONTINUOUS_NONNEG)
        lo, hi = var_bounds.get(name, (0.0, float("inf")))
        refs[name] = model.add_var(name, domain, lo, hi)

    for sec, label, toks in rows:
        expr, sense, rhs = _parse_row(toks, refs, expect_sense=(sec == "constraints"))
        if sec == "objective":
            model.minimize(expr)
        else:
            model.add_constraint(expr, sense, rhs, label or f"c{len(model.constraints)}")
    return model


def _apply_bound_row(row: list[str], out: dict[str, tuple[float, float]]) -> None:
    toks = list(row)
    if len(toks) == 2 and toks[1].lower() == "free":
        raise ValueError("free variables are not part of the model contract")
    names = [t for t in toks if _NAME_RE.fullmatch(t) and t.lower() not in ("inf",)]
    if len(names) != 1:
        raise ValueError(f"cannot parse bounds row: {' '.join(row)}")
    name = names[0]
    lo, hi = out.get(name, (0.0, float("inf")))
    idx = toks.index(name)
    left, right = toks[:idx], toks[idx + 1 :]
    if left:
        if left[-1] == "<=":
            lo = float(left[-2])
        elif left[-1] == ">=":
            hi = float(left[-2])
        else:
            raise ValueError(f"cannot parse bounds row: {' '.join(row)}")
    if right:
        if right[0] == "<=":
            hi = float(right[1])
        elif right[0] == ">=":
            lo = float(right[1])
        elif right[0] == "=":
            lo = hi = float(right[1])
        else:
            raise ValueError(f"cannot parse bounds row: {' '.join(row)}")
    out[name] = (lo, hi)


def _parse_row(
    tokens: list[str], refs: Mapping[str, object], expect_sense: bool
) -> tuple[LinExpr, Sense, float]:
    expr = LinExpr()
    sense: Sense | None = None
    rhs = 0.0
    sign = 1.0
    coef: float | None = None
    side = 1.0  # flips to -1 once past the sense token
    for tok in tokens:
        if tok in ("<=", ">=", "="):
            sense = Sense(tok)
            side = -1.0
            sign, coef = 1.0, None
            continue
        if tok == "+":
            sign = 1.0
            continue
        if tok == "-":
            sign = -sign if coef is not None else -1.0
            continue
        if _NUM_RE.fullmatch(tok):
            value = float(tok)
            if side < 0:
                rhs += sign * value
                sign, coef = 1.0, None
            else:
                coef = sign * value if coef is None else coef * value
                sign = 1.0
            continue
        if _NAME_RE.fullmatch(tok):
            var = refs[tok]
            expr.add(var, side * (coef if coef is not None else sign))
            sign, coef = 1.0, None
            continue
        raise ValueError(f"cannot parse token '{tok}'")
    if side > 0 and coef is not None:
        expr.constant += coef
    if expect_sense:
        if sense is None:
            raise ValueError(f"constraint row lacks a sense: {' '.join(tokens)}")
        return expr, sense, rhs
    return expr, Sense.LE, 0.0


def parse_mps(text: str) -> Model:
    """Parse the MPS layout written by :func:`export_mps`."""
    model = Model("parsed")
    section = None
    row_sense: dict[str, Sense] = {}
    row_order: list[str] = []
    col_entries: dict[str, list[tuple[str, float]]] = {}
    col_order: list[str] = []
    integer_cols: set[str] = set()
    rhs_map: dict[str, float] = {}
    bounds: dict[str, tuple[float, float]] = {}
    bound_types: dict[str, str] = {}
    in_integer = False
    tag_to_sense = {"L": Sense.LE, "G": Sense.GE, "E": Sense.EQ}
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line or line.startswith("*"):
            continue
        head = line.split()
        if line[0] not in " \t":
            section = head[0].upper()
            continue
        if section == "ROWS":
            tag, name = head
            if tag == "N":
                continue
            row_sense[name] = tag_to_sense[tag]
            row_order.append(name)
        elif section == "COLUMNS":
            if len(head) >= 3 and head[1].startswith("'MARKER'"):
                in_integer = head[2].strip("'") == "INTORG"
                continue
            col, row, coef = head[0], head[1], float(head[2])
            if col not in col_entries:
                col_entries[col] = []
                col_order.append(col)
            if in_integer:
                integer_cols.add(col)
            if coef != 0.0:
                col_entries[col].append((row, coef))
        elif section == "RHS":
            rhs_map[head[1]] = float(head[2])
        elif section == "BOUNDS":
            btype, _, name = head[0], head[1], head[2]
            lo, hi = bounds.get(name, (0.0, float("inf")))
            if btype == "BV":
                bound_types[name] = "BV"
            elif btype == "UP":
                hi = float(head[3])
            elif btype == "LO":
                lo = float(head[3])
            bounds[name] = (lo, hi)
    refs = {}
    for col in col_order:
        lo, hi = bounds.get(col, (0.0, float("inf")))
        if bound_types.get(col) == "BV" or (col in integer_cols and hi <= 1.0):
            refs[col] = model.add_binary(col)
        else:
            refs[col] = model.add_var(col, Domain.CONTINUOUS_NONNEG, lo, hi)
    obj = LinExpr(constant=-rhs_map.get("OBJ", 0.0))
    row_exprs: dict[str, LinExpr] = {name: LinExpr() for name in row_order}
    for col in col_order:
        for row, coef in col_entries[col]:
            if row == "OBJ":
                obj.add(refs[col], coef)
            else:
                row_exprs[row].add(refs[col], coef)
    model.minimize(obj)
    for name in row_order:
        model.add_constraint(row_exprs[name], row_sense[name], rhs_map.get(name, 0.0), name)
    return model


def format_solution_table(
    status: Status, objective: float, values: Mapping[str, float]
) -> str:
    lines = [f"=status= {status.value}", f"=obj= {_num(objective)}"]
    for name in values:
        lines.append(f"{name} {_num(values[name])}")
    return "\n".join(lines) + "\n"


def parse_solution_table(text: str) -> tuple[Status, float | None, dict[str, float]]:
    status = Status.OPTIMAL
    objective: float | None = None
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "=status=":
            status = Status(parts[1])
        elif parts[0] == "=obj=":
            objective = float(parts[1])
        elif len(parts) >= 2:
            values[parts[0]] = float(parts[1])
    return status, objective, values
