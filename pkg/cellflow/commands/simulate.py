"""Команда simulate: траектория частицы и наклон дрейфа"""
import math

import numpy as np

from cellflow.errors import UnboundedDetectionFailure
from cellflow.logging_config import cli_logger
from cellflow.models import PhaseState4
from cellflow.schemas import RunConfig
from cellflow.services import export_service
from cellflow.services.hamflow_service import hamiltonian_field
from cellflow.services.inertial_service import integrate_mr4d, integrate_reduced
from cellflow.services.poincare_service import trajectory_slope

from .common import Output, forcing

DEFAULT_START = (-math.pi / 2, 0.3)


def run(config: RunConfig) -> dict:
    params = forcing(config)
    start = config.start or list(DEFAULT_START)
    n_samples = int(config.t_end) + 1
    reduced = config.reduced or params.epsilon == 0
    if reduced:
        traj = integrate_reduced(start[:2], params, config.t_end, n_samples=n_samples)
    else:
        if len(start) == 4:
            initial = PhaseState4(*start)
        else:
            # частица стартует со скоростью жидкости
            u = hamiltonian_field(start[0], start[1], params.a, params.b)
            initial = PhaseState4(start[0], start[1], float(u[0]), float(u[1]))
        traj = integrate_mr4d(initial, params, config.t_end, n_samples=n_samples)

    try:
        slope = trajectory_slope(traj)
    except UnboundedDetectionFailure as e:
        cli_logger.warning("[SIMULATE] %s", e)
        slope = None

    out = Output(config)
    out.csv(export_service.trajectory_frame(traj), "trajectory.csv")
    result = {
        "system": "reduced" if reduced else "mr4d",
        "drift_slope": slope,
        "final_state": np.asarray(traj.states[-1]).tolist(),
        "samples": len(traj.t),
    }
    out.json(result, "simulate.json")
    out.xlsx({"trajectory": export_service.trajectory_frame(traj)}, "simulate.xlsx")
    title = f"a={params.a:g} b={params.b:g} eps={params.epsilon:g}"
    out.svg(export_service.trajectory_svg, "trajectory.svg", traj, title=title)
    return out.summary(**result)
