"""
Выгрузка результатов: CSV (pandas), JSON-зеркало с метаданными, XLSX (openpyxl), SVG (Jinja2)
"""
import json
import os
import platform
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
from jinja2 import Environment, FileSystemLoader, select_autoescape

from cellflow.config import settings
from cellflow.errors import IoError
from cellflow.logging_config import app_logger
from cellflow.models import ChessPath, StaircaseTable, TongueRegion, Trajectory
from cellflow.version import __version__

STAIRCASE_COLUMNS = ["alpha", "s", "rho_kind", "p", "q", "rho_lo", "rho_hi", "m", "status"]
FLOAT_FORMAT = "%.17g"

TEMPLATES_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "templates")


def _num_filter(value, digits: int = 2):
    """Фильтр Jinja2 для координат SVG"""
    return f"{float(value):.{digits}f}"


templates = Environment(
    loader=FileSystemLoader(TEMPLATES_DIR),
    autoescape=select_autoescape(["svg", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
)
templates.filters["num"] = _num_filter
templates.globals["current_version"] = __version__


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise IoError(f"Не удалось создать каталог {path}: {e}") from e
    if not os.access(path, os.W_OK):
        raise IoError(f"Каталог {path} недоступен для записи")
    return path


# ==================== Таблицы ====================

def staircase_frame(table: StaircaseTable) -> pd.DataFrame:
    records = []
    for row in table.rows:
        rot = row.rotation
        records.append({
            "alpha": row.alpha,
            "s": row.s,
            "rho_kind": rot.kind if rot is not None else "",
            "p": rot.p if rot is not None and rot.is_rational else None,
            "q": rot.q if rot is not None and rot.is_rational else None,
            "rho_lo": rot.lo if rot is not None else float("nan"),
            "rho_hi": rot.hi if rot is not None else float("nan"),
            "m": row.m,
            "status": row.status,
        })
    frame = pd.DataFrame.from_records(records, columns=STAIRCASE_COLUMNS)
    frame["p"] = frame["p"].astype("Int64")
    frame["q"] = frame["q"].astype("Int64")
    return frame


def plateaus_frame(table: StaircaseTable) -> pd.DataFrame:
    return pd.DataFrame(
        [{"m": str(m), "alpha_lo": lo, "alpha_hi": hi, "length": hi - lo} for m, lo, hi in table.plateaus],
        columns=["m", "alpha_lo", "alpha_hi", "length"],
    )


def tongues_frame(regions: Sequence[TongueRegion]) -> pd.DataFrame:
    records = []
    for region in regions:
        for eps, lo, hi in region.boundary:
            records.append({
                "m": str(region.target),
                "epsilon": eps,
                "alpha_lo": lo,
                "alpha_hi": hi,
                "width": hi - lo,
            })
    return pd.DataFrame(records, columns=["m", "epsilon", "alpha_lo", "alpha_hi", "width"])


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    names = ["x", "y", "vx", "vy"][: traj.states.shape[1]]
    frame = pd.DataFrame(traj.states, columns=names)
    frame.insert(0, "t", traj.t)
    return frame


def write_csv(frame: pd.DataFrame, path: str) -> str:
    try:
        frame.to_csv(path, float_format=FLOAT_FORMAT, index=False, lineterminator="\n")
    except OSError as e:
        raise IoError(f"Не удалось записать {path}: {e}") from e
    app_logger.info("[EXPORT] csv %s (%d rows)", path, len(frame))
    return path


def run_metadata(wall_time: float, extra: Optional[Dict[str, object]] = None) -> Dict[str, object]:
    """Версии, допуски и время счёта для JSON-зеркала"""
    meta = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "tolerances": {
            "rtol": settings.RTOL,
            "atol": settings.ATOL,
            "event_tol": settings.EVENT_TOL,
            "cert_tol": settings.CERT_TOL,
            "plateau_tol": settings.PLATEAU_TOL,
            "separatrix_offset": settings.SEPARATRIX_OFFSET,
        },
        "wall_time": wall_time,
    }
    if extra:
        meta.update(extra)
    return meta


def _json_default(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} не сериализуется в JSON")


def frame_records(frame: pd.DataFrame) -> List[Dict[str, object]]:
    """Строки таблицы для JSON: NaN и NA -> null"""
    clean = frame.astype(object).where(frame.notna(), None)
    return clean.to_dict(orient="records")


def write_json(payload: Dict[str, object], path: str) -> str:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default)
            f.write("\n")
    except OSError as e:
        raise IoError(f"Не удалось записать {path}: {e}") from e
    app_logger.info("[EXPORT] json %s", path)
    return path


def write_xlsx(frames: Dict[str, pd.DataFrame], path: str) -> str:
    """Каждая таблица - отдельный лист"""
    try:
        from openpyxl import Workbook
    except ImportError as e:
        app_logger.exception("openpyxl not installed: %s", e)
        raise IoError("openpyxl не установлен, выгрузка XLSX недоступна") from e

    wb = Workbook()
    wb.remove(wb.active)
    for name, frame in frames.items():
        ws = wb.create_sheet(title=name[:31])
        ws.append(list(frame.columns))
        for record in frame_records(frame):
            ws.append([record[c] for c in frame.columns])
    try:
        wb.save(path)
    except OSError as e:
        raise IoError(f"Не удалось записать {path}: {e}") from e
    app_logger.info("[EXPORT] xlsx %s (%d sheets)", path, len(frames))
    return path


# ==================== SVG ====================

@dataclass
class PlotFrame:
    """Прямоугольник графика и перевод координат данных в пиксели"""
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    width: int = 640
    height: int = 480
    margin: int = 56

    def __post_init__(self):
        for lo, hi in (self.x_range, self.y_range):
            if not np.isfinite(lo) or not np.isfinite(hi):
                raise IoError("Диапазон графика должен быть конечным")
        if self.x_range[1] <= self.x_range[0]:
            self.x_range = (self.x_range[0] - 0.5, self.x_range[0] + 0.5)
        if self.y_range[1] <= self.y_range[0]:
            self.y_range = (self.y_range[0] - 0.5, self.y_range[0] + 0.5)

    def px(self, x: float) -> float:
        lo, hi = self.x_range
        return self.margin + (x - lo) / (hi - lo) * (self.width - 2 * self.margin)

    def py(self, y: float) -> float:
        lo, hi = self.y_range
        return self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2 * self.margin)

    def points(self, xs: Sequence[float], ys: Sequence[float]) -> List[Tuple[float, float]]:
        return [(self.px(x), self.py(y)) for x, y in zip(xs, ys) if np.isfinite(x) and np.isfinite(y)]

    def ticks(self, count: int = 5) -> Dict[str, list]:
        xs = np.linspace(*self.x_range, count)
        ys = np.linspace(*self.y_range, count)
        return {
            "x": [(self.px(v), f"{v:.3g}") for v in xs],
            "y": [(self.py(v), f"{v:.3g}") for v in ys],
        }


def render_svg(template_name: str, context: Dict[str, object], path: str) -> str:
    text = templates.get_template(template_name).render(**context)
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"Не удалось записать {path}: {e}") from e
    app_logger.info("[EXPORT] svg %s", path)
    return path


def _padded(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if not len(arr):
        return (0.0, 1.0)
    lo, hi = float(arr.min()), float(arr.max())
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    return (lo - pad, hi + pad)


def staircase_svg(table: StaircaseTable, path: str) -> str:
    """Ступенчатый график m(alpha), плато выделены"""
    rows = table.ok_rows()
    alphas = [r.alpha for r in table.rows]
    frame = PlotFrame(x_range=(min(alphas), max(alphas)), y_range=_padded([r.m for r in rows]))
    plateaus = [
        {"x1": frame.px(lo), "x2": frame.px(hi), "y": frame.py(float(m)), "label": str(m)}
        for m, lo, hi in table.plateaus
    ]
    failed = [(frame.px(r.alpha), frame.height - frame.margin) for r in table.rows if r.status != "ok"]
    context = {
        "frame": frame,
        "ticks": frame.ticks(),
        "points": frame.points([r.alpha for r in rows], [r.m for r in rows]),
        "plateaus": plateaus,
        "failed": failed,
        "title": f"m(alpha), b={table.b:g}, eps={table.epsilon:g}",
    }
    return render_svg("staircase.svg.j2", context, path)


TONGUE_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def tongues_svg(regions: Sequence[TongueRegion], labels: np.ndarray, alphas: Sequence[float],
                epsilons: Sequence[float], path: str) -> str:
    """Карта языков: ячейка сетки окрашена цветом цели, серым - ошибки"""
    frame = PlotFrame(x_range=(alphas[0], alphas[-1]), y_range=(epsilons[0], epsilons[-1]))
    n_eps, n_alpha = labels.shape
    dx = (frame.width - 2 * frame.margin) / max(n_alpha - 1, 1)
    dy = (frame.height - 2 * frame.margin) / max(n_eps - 1, 1)
    cells = []
    for i in range(n_eps):
        for j in range(n_alpha):
            label = int(labels[i, j])
            if label == 0:
                continue
            color = "#999999" if label < 0 else TONGUE_COLORS[(label - 1) % len(TONGUE_COLORS)]
            cells.append({
                "x": frame.px(alphas[j]) - dx / 2,
                "y": frame.py(epsilons[i]) - dy / 2,
                "w": dx,
                "h": dy,
                "color": color,
            })
    legend = [
        {"label": f"m = {r.target}", "color": TONGUE_COLORS[k % len(TONGUE_COLORS)]}
        for k, r in enumerate(regions)
    ]
    context = {"frame": frame, "ticks": frame.ticks(), "cells": cells, "legend": legend,
               "title": "Arnold tongues (alpha, eps)"}
    return render_svg("tongues.svg.j2", context, path)


def _cell_lines(lo: float, hi: float) -> List[float]:
    """Линии x = pi/2 + pi k внутри [lo, hi] (границы ячеек)"""
    k0 = int(np.ceil((lo - np.pi / 2) / np.pi))
    k1 = int(np.floor((hi - np.pi / 2) / np.pi))
    return [np.pi / 2 + np.pi * k for k in range(k0, k1 + 1)]


def trajectory_svg(traj: Trajectory, path: str, title: str = "trajectory", max_points: int = 4000) -> str:
    step = max(1, len(traj.t) // max_points)
    xs, ys = traj.x[::step], traj.y[::step]
    x_range, y_range = _padded(xs), _padded(ys)
    frame = PlotFrame(x_range=x_range, y_range=y_range)
    context = {
        "frame": frame,
        "ticks": frame.ticks(),
        "points": frame.points(xs, ys),
        "vlines": [frame.px(v) for v in _cell_lines(*x_range)],
        "hlines": [frame.py(v) for v in _cell_lines(*y_range)],
        "title": title,
    }
    return render_svg("trajectory.svg.j2", context, path)


def chess_svg(path_model: ChessPath, path: str, overlay: Optional[np.ndarray] = None) -> str:
    """Путь по правилу шахматной доски поверх узлов решётки; overlay - траектория ОДУ"""
    pts = path_model.points()
    xs, ys = list(pts[:, 0]), list(pts[:, 1])
    if overlay is not None and len(overlay):
        xs_all, ys_all = xs + list(overlay[:, 0]), ys + list(overlay[:, 1])
    else:
        xs_all, ys_all = xs, ys
    frame = PlotFrame(x_range=_padded(xs_all), y_range=_padded(ys_all))
    nodes = []
    for (i, j), (x, y) in zip(path_model.vertices, pts):
        nodes.append({"x": frame.px(x), "y": frame.py(y), "odd": (i + j) % 2 == 1})
    context = {
        "frame": frame,
        "ticks": frame.ticks(),
        "path": frame.points(xs, ys),
        "overlay": frame.points(overlay[:, 0], overlay[:, 1]) if overlay is not None else [],
        "nodes": nodes,
        "turns": "".join(path_model.turns),
        "title": f"chess path, h0={path_model.h0:.6g}",
    }
    return render_svg("chess.svg.j2", context, path)
