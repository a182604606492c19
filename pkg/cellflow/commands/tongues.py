"""Команда tongues: языки Арнольда в плоскости (alpha, eps)"""
import numpy as np

from cellflow.schemas import RunConfig
from cellflow.services import export_service
from cellflow.services.sweep_service import tongue_scan

from .common import Output, require


def run(config: RunConfig) -> dict:
    require(config, "b", "alpha", "eps_range", "targets")
    grid = (config.alpha.count, config.eps_range.count)
    regions, labels = tongue_scan(
        b=config.b,
        alpha_range=(config.alpha.lo, config.alpha.hi),
        epsilon_range=(config.eps_range.lo, config.eps_range.hi),
        targets=config.target_fractions(),
        grid=grid,
        map_factory=config.model,
        workers=config.threads,
    )
    out = Output(config)
    frame = export_service.tongues_frame(regions)
    out.csv(frame, "tongues.csv")
    result = {
        "tongues": [
            {"m": str(r.target), "area": r.area, "components": r.components, "interior_points": len(r.interior)}
            for r in regions
        ],
        "boundary": export_service.frame_records(frame),
        "failed_cells": int(np.sum(labels < 0)),
    }
    out.json(result, "tongues.json")
    out.xlsx({"tongues": frame}, "tongues.xlsx")
    alphas = np.linspace(config.alpha.lo, config.alpha.hi, grid[0])
    epsilons = np.linspace(config.eps_range.lo, config.eps_range.hi, grid[1])
    out.svg(export_service.tongues_svg, "tongues.svg", regions, labels, alphas, epsilons)
    return out.summary(tongues=result["tongues"])
