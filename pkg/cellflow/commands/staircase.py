"""Команда staircase: лестница m(alpha)"""
from cellflow.schemas import RunConfig
from cellflow.services import export_service
from cellflow.services.sweep_service import max_jump, monotonicity_violation, staircase_sweep

from .common import Output, require


def run(config: RunConfig) -> dict:
    require(config, "b", "alpha")
    table = staircase_sweep(
        b=config.b,
        epsilon=config.eps,
        alpha_range=(config.alpha.lo, config.alpha.hi),
        resolution=config.alpha.count,
        map_factory=config.model,
        q_cap=config.q_cap,
        workers=config.threads,
    )
    out = Output(config)
    rows = export_service.staircase_frame(table)
    plateaus = export_service.plateaus_frame(table)
    out.csv(rows, "staircase.csv")
    out.csv(plateaus, "plateaus.csv")
    result = {
        "rows": export_service.frame_records(rows),
        "plateaus": export_service.frame_records(plateaus),
        "coverage": table.coverage,
        "monotonicity_violation": monotonicity_violation(table),
        "max_jump": max_jump(table),
        "failed_rows": len(table.rows) - len(table.ok_rows()),
    }
    out.json(result, "staircase.json", {"b": table.b, "epsilon": table.epsilon, "resolution": table.resolution})
    out.xlsx({"staircase": rows, "plateaus": plateaus}, "staircase.xlsx")
    out.svg(export_service.staircase_svg, "staircase.svg", table)
    return out.summary(coverage=table.coverage, failed_rows=result["failed_rows"])
