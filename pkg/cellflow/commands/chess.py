"""Команда chess: путь по правилу шахматной доски и сверка с траекторией"""
import pandas as pd

from cellflow.schemas import RunConfig
from cellflow.services import export_service
from cellflow.services.hamflow_service import (
    DEFAULT_CHESS_START,
    chess_ode_turns,
    chess_path,
    level_of_start,
)
from cellflow.services.inertial_service import integrate_reduced

from .common import Output, forcing

OVERLAY_TIME = 400.0


def run(config: RunConfig) -> dict:
    params = forcing(config).with_epsilon(0.0)
    start = tuple(config.start[:2]) if config.start else DEFAULT_CHESS_START
    vertices, ode_turns = chess_ode_turns(params, start, config.n_turns)
    h0 = level_of_start(start, params)
    path = chess_path((vertices[0], vertices[1]), params, h0, config.n_turns)
    mismatch = next((i for i, (r, o) in enumerate(zip(path.turns, ode_turns)) if r != o), -1)
    if mismatch < 0 and len(ode_turns) < len(path.turns):
        mismatch = len(ode_turns)

    records = []
    for i, label in enumerate(path.turns):
        node = path.vertices[i + 1]
        records.append({
            "turn": i,
            "node_i": node[0],
            "node_j": node[1],
            "rule": label,
            "ode": ode_turns[i] if i < len(ode_turns) else "",
        })
    frame = pd.DataFrame(records, columns=["turn", "node_i", "node_j", "rule", "ode"])

    out = Output(config)
    out.csv(frame, "chess.csv")
    result = {
        "h0": h0,
        "lines": list(path.lines),
        "rule_turns": "".join(path.turns),
        "ode_turns": "".join(ode_turns),
        "first_mismatch": mismatch,
    }
    out.json(result, "chess.json")
    out.xlsx({"chess": frame}, "chess.xlsx")
    if config.svg:
        overlay = integrate_reduced(start, params, OVERLAY_TIME, n_samples=4001).states
        out.svg(export_service.chess_svg, "chess.svg", path, overlay=overlay)
    return out.summary(first_mismatch=mismatch, rule_turns=result["rule_turns"])
