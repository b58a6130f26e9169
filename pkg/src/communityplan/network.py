"""Grid topology: feeder flow variables, capacity limits with penalized
slacks, and the low-voltage aggregation balance.

Slacks are scalars per entity (one shared MV slack covering both flow
directions, one LV slack per building covering import and export): the
capacity constraint reads as a uniform relaxation across the horizon and
each slack is priced once in the objective.  The distributed variant of
the aggregation balance replaces the other buildings' flows by a fixed
net-consumption parameter series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .devices import BuildingEnergyRefs
from .milp import LinExpr, Model, Sense, VarRef

__all__ = [
    "GridBlockRefs",
    "create_grid_refs",
    "emit_grid_limits",
    "emit_lv_aggregation",
    "emit_lv_aggregation_distributed",
]


@dataclass(frozen=True)
class GridBlockRefs:
    """MV feeder flows and the slack variables of one scenario."""

    mv_to_lv: tuple[VarRef, ...]
    lv_to_mv: tuple[VarRef, ...]
    s_mv: VarRef
    s_lv: Mapping[int, VarRef]


def create_grid_refs(
    model: Model, building_ids: Sequence[int], horizon: int, tag: str = "COM"
) -> GridBlockRefs:
    """Declare the MV exchange vectors plus one slack per line entity."""
    mv_to_lv = tuple(model.add_var(f"Emvlv_{tag}_t{t}") for t in range(horizon))
    lv_to_mv = tuple(model.add_var(f"Elvmv_{tag}_t{t}") for t in range(horizon))
    s_mv = model.add_var(f"sMV_{tag}")
    s_lv = {bid: model.add_var(f"sLV_b{bid}_{tag}") for bid in building_ids}
    return GridBlockRefs(mv_to_lv=mv_to_lv, lv_to_mv=lv_to_mv, s_mv=s_mv, s_lv=s_lv)


def emit_grid_limits(
    model: Model,
    grid: GridBlockRefs,
    building_flows: Mapping[int, BuildingEnergyRefs],
    lv_limit: float,
    mv_limit: float,
    tag: str = "COM",
) -> list[int]:
    """Line capacity limits, relaxed by the entity slacks.

    Both MV flow directions share one slack; each building's import and
    export share that building's LV slack.
    """
    ids = []
    horizon = len(grid.mv_to_lv)
    for t in range(horizon):
        ids.append(
            model.add_constraint(
                grid.mv_to_lv[t] - grid.s_mv, Sense.LE, mv_limit, f"lim_mvlv_{tag}_t{t}"
            )
        )
        ids.append(
            model.add_constraint(
                grid.lv_to_mv[t] - grid.s_mv, Sense.LE, mv_limit, f"lim_lvmv_{tag}_t{t}"
            )
        )
    for bid, flows in building_flows.items():
        slack = grid.s_lv[bid]
        for t in range(horizon):
            ids.append(
                model.add_constraint(
                    flows.e_in[t] - slack, Sense.LE, lv_limit, f"lim_in_b{bid}_{tag}_t{t}"
                )
            )
            ids.append(
                model.add_constraint(
                    flows.e_out[t] - slack, Sense.LE, lv_limit, f"lim_out_b{bid}_{tag}_t{t}"
                )
            )
    return ids


def emit_lv_aggregation(
    model: Model,
    building_flows: Mapping[int, BuildingEnergyRefs],
    grid: GridBlockRefs,
    tag: str = "COM",
) -> list[int]:
    """LV bus balance: MV->LV supply plus building exports equal building
    imports plus LV->MV return, per timestep."""
    ids = []
    for t in range(len(grid.mv_to_lv)):
        expr = LinExpr()
        expr.add(grid.mv_to_lv[t], 1.0)
        expr.add(grid.lv_to_mv[t], -1.0)
        for flows in building_flows.values():
            expr.add(flows.e_out[t], 1.0)
            expr.add(flows.e_in[t], -1.0)
        ids.append(model.add_constraint(expr, Sense.EQ, 0.0, f"lvagg_{tag}_t{t}"))
    return ids


def emit_lv_aggregation_distributed(
    model: Model,
    own_flows: BuildingEnergyRefs,
    others_net,
    grid: GridBlockRefs,
    tag: str = "COM",
) -> list[int]:
    """LV bus balance with every other building folded into a parameter.

    ``others_net[t]`` is the fixed net consumption (imports minus
    exports) of all buildings except the one being optimized.
    """
    horizon = len(grid.mv_to_lv)
    net = np.asarray(
        others_net.values if hasattr(others_net, "values") else others_net, float
    )
    if net.size < horizon:
        raise ValueError(
            f"others_net length {net.size} cannot cover horizon {horizon}"
        )
    ids = []
    for t in range(horizon):
        expr = LinExpr()
        expr.add(grid.mv_to_lv[t], 1.0)
        expr.add(grid.lv_to_mv[t], -1.0)
        expr.add(own_flows.e_out[t], 1.0)
        expr.add(own_flows.e_in[t], -1.0)
        ids.append(
            model.add_constraint(expr, Sense.EQ, float(net[t]), f"lvagg_{tag}_t{t}")
        )
    return ids
