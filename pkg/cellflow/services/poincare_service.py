"""
Сервис отображений первого возвращения на трансверсали x = pi k - pi/2.

Координата на трансверсали z = (y - x) / (2 pi).
P: прямой ход от x = -pi/2 до x = pi/2, Q: обратный ход от x = pi/2 до x = -pi/2,
доопределённый на плоских участках I_j значениями b_j.
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cellflow.config import settings
from cellflow.errors import (
    CellflowError,
    DomainError,
    NoEvent,
    SeparatrixHit,
    TopologyError,
    UnboundedDetectionFailure,
)
from cellflow.logging_config import poincare_logger
from cellflow.models import (
    FlatSpotData,
    ForcingParams,
    PhaseState4,
    ReturnMapSample,
    Trajectory,
    TransversalCoord,
)
from cellflow.services.hamflow_service import saddle_near
from cellflow.services.inertial_service import (
    BACKWARD,
    FORWARD,
    _newton_field,
    integrate_mr4d,
    integrate_planar,
    integrate_reduced,
    perturbation_divergence,
    reduced_planar_field,
)

LEFT_SECTION = -math.pi / 2
RIGHT_SECTION = math.pi / 2

# седла полосы |x| <= pi/2: около узлов (-pi/2, pi/2) и (pi/2, pi/2)
STRIP_NODES = ((-1, 0), (0, 0))
SADDLE_NAMES = ("left", "right")

MIN_DRIFT_TIME = 2000.0


def z_of_point(x: float, y: float) -> float:
    return TransversalCoord.from_point(x, y).z


def point_on_section(z: float, k: int) -> Tuple[float, float]:
    return TransversalCoord(z=z, k=k).to_point()


def normal_velocity(x: float, y: float, params: ForcingParams) -> float:
    """Горизонтальная компонента v + eps f на вертикальном сечении"""
    return params.b - params.epsilon * params.b * math.sin(x) * math.sin(y)


def _time_limit(params: ForcingParams) -> float:
    return 100.0 / params.b


def perturbed_saddles(params: ForcingParams) -> List[Tuple[float, float]]:
    """Седла поля v + eps f в полосе, продолжения седел гамильтоновой системы"""
    field = reduced_planar_field(params)
    result = []
    for node in STRIP_NODES:
        seed = saddle_near(node, params).position
        result.append(seed if params.epsilon == 0 else _newton_field(field, seed))
    return result


def return_map_P(
    z: float,
    params: ForcingParams,
    saddles: Optional[Sequence[Tuple[float, float]]] = None,
) -> ReturnMapSample:
    """Отображение первого возвращения P с производной по формуле Лиувилля"""
    n = math.floor(z)
    base = z - n
    saddles = perturbed_saddles(params) if saddles is None else saddles
    x0, y0 = point_on_section(base, 0)
    trace = integrate_planar(
        (x0, y0),
        reduced_planar_field(params),
        [RIGHT_SECTION],
        t_end=_time_limit(params),
        direction=FORWARD,
        integrand=perturbation_divergence,
        saddles=saddles,
    )
    x1, y1 = trace.final_state
    v_start = normal_velocity(x0, y0, params)
    v_end = normal_velocity(x1, y1, params)
    derivative = (v_start / v_end) * math.exp(params.epsilon * trace.div_integral)
    return ReturnMapSample(
        z_in=z,
        z_out=z_of_point(RIGHT_SECTION, y1) + n,
        winding=trace.winding,
        derivative=derivative,
        transit_time=trace.final_time,
        div_integral=trace.div_integral,
        v_n_start=v_start,
        v_n_end=v_end,
    )


def _backward_sample(
    z: float,
    params: ForcingParams,
    saddles: Sequence[Tuple[float, float]],
) -> ReturnMapSample:
    n = math.floor(z)
    base = z - n
    x0, y0 = point_on_section(base, 1)
    trace = integrate_planar(
        (x0, y0),
        reduced_planar_field(params),
        [LEFT_SECTION],
        t_end=_time_limit(params),
        direction=BACKWARD,
        integrand=perturbation_divergence,
        saddles=saddles,
    )
    x1, y1 = trace.final_state
    v_start = normal_velocity(x0, y0, params)
    v_end = normal_velocity(x1, y1, params)
    # интеграл набран в обратном времени, поэтому знак уже обращён
    derivative = (v_start / v_end) * math.exp(params.epsilon * trace.div_integral)
    return ReturnMapSample(
        z_in=z,
        z_out=z_of_point(LEFT_SECTION, y1) + n,
        winding=trace.winding,
        derivative=derivative,
        transit_time=abs(trace.final_time),
        div_integral=trace.div_integral,
        v_n_start=v_start,
        v_n_end=v_end,
    )


def _eigen_directions(params: ForcingParams, saddle: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Единичные неустойчивый и устойчивый собственные векторы и двойственный ковектор к неустойчивому"""
    jac = reduced_planar_field(params).jacobian(*saddle)
    values, vectors = np.linalg.eig(jac)
    values = values.real
    if not values[0] * values[1] < 0:
        raise TopologyError(f"Точка {saddle} не седло: собственные числа {values}")
    iu, is_ = (0, 1) if values[0] > 0 else (1, 0)
    e_u = vectors[:, iu].real / np.linalg.norm(vectors[:, iu].real)
    e_s = vectors[:, is_].real / np.linalg.norm(vectors[:, is_].real)
    dual_u = np.linalg.inv(np.column_stack([e_u, e_s]))[0]
    return e_u, e_s, dual_u


def _shoot(params: ForcingParams, start: np.ndarray, section: float, direction: str) -> Optional[Tuple[float, float]]:
    limit = settings.SHOOT_TIME_FACTOR / params.b
    try:
        trace = integrate_planar(start, reduced_planar_field(params), [section], t_end=limit, direction=direction)
    except NoEvent:
        return None
    return trace.final_time, z_of_point(section, trace.final_state[1])


def _unstable_crossings(params, saddle, offset) -> List[Tuple[float, float]]:
    e_u, _, _ = _eigen_directions(params, saddle)
    hits = []
    for sign in (1.0, -1.0):
        hit = _shoot(params, np.asarray(saddle) + sign * offset * e_u, RIGHT_SECTION, FORWARD)
        if hit is None:
            raise TopologyError(
                f"Неустойчивая сепаратриса седла {saddle} не дошла до x = pi/2 за t = "
                f"{settings.SHOOT_TIME_FACTOR / params.b:.4g} (a={params.a}, b={params.b}, eps={params.epsilon})"
            )
        hits.append((hit[1], sign))
    return hits


def _stable_crossing(params, saddle, offset) -> float:
    _, e_s, _ = _eigen_directions(params, saddle)
    hits = []
    for sign in (1.0, -1.0):
        hit = _shoot(params, np.asarray(saddle) + sign * offset * e_s, LEFT_SECTION, BACKWARD)
        if hit is not None:
            hits.append(hit)
    if not hits:
        raise TopologyError(f"Ни одна устойчивая сепаратриса седла {saddle} не пересекла x = -pi/2")
    # вторая ветвь заперта внутри бывшей петли; берём самое раннее пересечение
    return min(hits, key=lambda h: abs(h[0]))[1]


def _eps0_flat_spots(params: ForcingParams) -> FlatSpotData:
    """
    При eps = 0 плоские участки вырождаются в точки.
    На сечениях H линейна по y, поэтому пересечения сепаратрис известны точно.
    """
    spots, heights, saddles = [], [], []
    shift = params.a * math.pi / 2
    for node in STRIP_NODES:
        saddle = saddle_near(node, params)
        y_right = (saddle.h_value + shift) / params.b
        y_left = (saddle.h_value - shift) / params.b
        u = z_of_point(RIGHT_SECTION, y_right)
        spots.append((u, u))
        heights.append(z_of_point(LEFT_SECTION, y_left))
        saddles.append(saddle.position)
    return _normalized(spots, heights, saddles)


def _normalized(spots, heights, saddles) -> FlatSpotData:
    norm_spots, norm_heights = [], []
    for (lo, hi), h in zip(spots, heights):
        n = math.floor(lo)
        norm_spots.append((lo - n, hi - n))
        norm_heights.append(h - n)
    return FlatSpotData(
        spots=tuple(norm_spots),
        heights=tuple(norm_heights),
        saddle_refs=SADDLE_NAMES,
        saddles=tuple(tuple(s) for s in saddles),
    )


def locate_flat_spots(
    params: ForcingParams,
    offset: Optional[float] = None,
    refine: bool = False,
) -> FlatSpotData:
    """
    Плоские участки отображения Q и их высоты.
    I_j ограничен пересечениями двух неустойчивых сепаратрис седла с x = pi/2,
    b_j - пересечение свободной устойчивой сепаратрисы с x = -pi/2.
    """
    params.require_positive_a()
    if params.epsilon == 0:
        return _eps0_flat_spots(params)
    offset = settings.SEPARATRIX_OFFSET if offset is None else offset
    saddles = perturbed_saddles(params)
    spots, heights = [], []
    for saddle in saddles:
        (u1, _), (u2, _) = _unstable_crossings(params, saddle, offset)
        u2 = u2 - round(u2 - u1)
        spots.append((min(u1, u2), max(u1, u2)))
        heights.append(_stable_crossing(params, saddle, offset))
    data = _normalized(spots, heights, saddles)
    if refine:
        data = refine_heights(params, data)
    poincare_logger.info(
        "[FLAT_SPOTS] a=%.6g b=%.6g eps=%.6g spots=%s heights=%s",
        params.a, params.b, params.epsilon, data.spots, data.heights,
    )
    return data


def _circle_gap(u: float, v: float) -> float:
    d = u - v
    return abs(d - round(d))


def shooting_sensitivity(params: ForcingParams, offset: Optional[float] = None, finer: float = 0.1) -> float:
    """
    Наибольший сдвиг концов участков и высот при стрельбе со смещением offset * finer
    вместо offset.
    """
    offset = settings.SEPARATRIX_OFFSET if offset is None else offset
    coarse = locate_flat_spots(params, offset=offset)
    fine = locate_flat_spots(params, offset=offset * finer)
    shifts = [_circle_gap(h1, h2) for h1, h2 in zip(coarse.heights, fine.heights)]
    for (lo1, hi1), (lo2, hi2) in zip(coarse.spots, fine.spots):
        shifts.extend((_circle_gap(lo1, lo2), _circle_gap(hi1, hi2)))
    shift = max(shifts)
    poincare_logger.info("[FLAT_SPOTS] offset %.3g -> %.3g moves endpoints by %.3g", offset, offset * finer, shift)
    return shift


def _branch_order(params: ForcingParams, saddle: Tuple[float, float]) -> float:
    """+1 если ветвь +e_u выходит к верхнему концу плоского участка"""
    (u_plus, _), (u_minus, _) = _unstable_crossings(params, saddle, settings.SEPARATRIX_OFFSET)
    u_minus -= round(u_minus - u_plus)
    return 1.0 if u_plus > u_minus else -1.0


def separatrix_side(
    z: float,
    params: ForcingParams,
    flat_spots: FlatSpotData,
    j: int,
    order: Optional[float] = None,
    ball: float = 1e-3,
) -> int:
    """
    С какой стороны устойчивой сепаратрисы седла j проходит траектория из z:
    -1 если она выходит к нижнему концу I_j, +1 если к верхнему.
    Траектория, зашедшая в окрестность седла радиуса ball, классифицируется
    по знаку неустойчивой координаты в точке входа.
    """
    saddle = flat_spots.saddles[j]
    n = math.floor(z)
    try:
        trace = integrate_planar(
            point_on_section(z - n, 0),
            reduced_planar_field(params),
            [RIGHT_SECTION],
            t_end=_time_limit(params),
            saddles=[saddle],
            ball=ball,
        )
    except SeparatrixHit as e:
        order = _branch_order(params, saddle) if order is None else order
        _, _, dual_u = _eigen_directions(params, saddle)
        coord = float(dual_u @ _local_offset(e.point, saddle))
        return 1 if coord * order > 0 else -1
    out = z_of_point(RIGHT_SECTION, trace.final_state[1]) + n
    lo, hi = flat_spots.spots[j]
    mid = 0.5 * (lo + hi)
    mid += round(out - mid)
    return -1 if out < mid else 1


def _local_offset(point: Sequence[float], saddle: Sequence[float]) -> np.ndarray:
    """Смещение точки от ближайшего сдвига седла"""
    dx = point[0] - saddle[0]
    n = round(dx / math.pi)
    dy = point[1] - saddle[1] - n * math.pi
    m = round(dy / (2 * math.pi))
    return np.array([dx - n * math.pi, dy - 2 * math.pi * m])


def _bisect_height(params, flat_spots: FlatSpotData, j: int, b_j: float, width: float, bracket: float) -> float:
    order = _branch_order(params, flat_spots.saddles[j])
    lo, hi = b_j - bracket, b_j + bracket
    side_lo = separatrix_side(lo, params, flat_spots, j, order)
    side_hi = separatrix_side(hi, params, flat_spots, j, order)
    if side_lo == side_hi:
        poincare_logger.warning("[FLAT_SPOTS] no side change around b_%d=%.12g, keeping shot value", j, b_j)
        return b_j
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if separatrix_side(mid, params, flat_spots, j, order) == side_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def refine_heights(
    params: ForcingParams,
    flat_spots: FlatSpotData,
    width: Optional[float] = None,
    bracket: float = 1e-4,
) -> FlatSpotData:
    """Уточняет b_j бисекцией по стороне сепаратрисы до ширины width"""
    width = settings.DISCONTINUITY_WIDTH if width is None else width
    heights = []
    for j, b_j in enumerate(flat_spots.heights):
        try:
            heights.append(_bisect_height(params, flat_spots, j, b_j, width, bracket))
        except CellflowError as e:
            poincare_logger.warning("[FLAT_SPOTS] refinement of b_%d=%.12g failed, keeping shot value: %s", j, b_j, e)
            heights.append(b_j)
    return FlatSpotData(
        spots=flat_spots.spots,
        heights=tuple(heights),
        saddle_refs=flat_spots.saddle_refs,
        saddles=flat_spots.saddles,
    )


def _nearest_height(z: float, flat_spots: FlatSpotData) -> float:
    best = None
    for (lo, hi), h in zip(flat_spots.spots, flat_spots.heights):
        n = round(z - 0.5 * (lo + hi))
        dist = max(lo + n - z, z - hi - n, 0.0)
        if best is None or dist < best[0]:
            best = (dist, h + n)
    return best[1]


def inverse_map_Q_sample(
    z: float,
    params: ForcingParams,
    flat_spots: FlatSpotData,
) -> ReturnMapSample:
    """Q вне плоских участков вместе с производной"""
    return _backward_sample(z, params, flat_spots.saddles or perturbed_saddles(params))


def inverse_map_Q(z: float, params: ForcingParams, flat_spots: FlatSpotData) -> float:
    """
    Обратное отображение первого возвращения, доопределённое на плоских участках.
    Непрерывно, не убывает, степени один.
    """
    hit = flat_spots.locate(z)
    if hit is not None:
        j, n = hit
        return flat_spots.heights[j] + n
    try:
        return inverse_map_Q_sample(z, params, flat_spots).z_out
    except (SeparatrixHit, NoEvent) as e:
        # точка у края участка: предел Q равен высоте
        height = _nearest_height(z, flat_spots)
        poincare_logger.warning("[FLAT_SPOTS] Q(%.12g) a=%.6g eps=%.6g: %s, using height %.12g",
                                z, params.a, params.epsilon, type(e).__name__, height)
        return height


def _least_squares_slope(x: np.ndarray, y: np.ndarray) -> float:
    half = len(x) // 2
    return float(np.polyfit(x[half:], y[half:], 1)[0])


def _check_displacement(traj: Trajectory):
    dx = traj.x[-1] - traj.x[0]
    dy = traj.y[-1] - traj.y[0]
    if math.hypot(dx, dy) < 10 * math.pi:
        raise UnboundedDetectionFailure(
            f"Смещение {math.hypot(dx, dy):.4g} меньше 10 ячеек, увеличьте t_end"
        )


def trajectory_slope(traj: Trajectory) -> float:
    """Наклон луча, вдоль которого уходит траектория (МНК по второй половине)"""
    _check_displacement(traj)
    return _least_squares_slope(traj.x, traj.y)


def empirical_drift_slope(initial: PhaseState4, params: ForcingParams, t_end: float) -> float:
    if params.epsilon <= 0:
        raise DomainError("Наклон дрейфа 4D-системы требует epsilon > 0")
    if t_end < MIN_DRIFT_TIME:
        raise DomainError(f"t_end={t_end} слишком мало для оценки наклона (нужно >= {MIN_DRIFT_TIME})")
    traj = integrate_mr4d(initial, params, t_end, n_samples=int(t_end) + 1)
    slope = trajectory_slope(traj)
    poincare_logger.info("[DRIFT] a=%.6g b=%.6g eps=%.6g slope=%.6g", params.a, params.b, params.epsilon, slope)
    return slope


def drift_slope_reduced(params: ForcingParams, t_end: float, start: Tuple[float, float] = (-math.pi / 2, 0.3)) -> float:
    traj = integrate_reduced(start, params, t_end, n_samples=int(t_end) + 1)
    return trajectory_slope(traj)


def slope_from_rotation(rho_q: float) -> float:
    """m = 1 - 2 rho(Q) = 2 rho(P) + 1"""
    return 1.0 - 2.0 * rho_q


def regime_chart(b: float, alphas: Sequence[float], epsilons: Sequence[float]) -> List[Dict[str, object]]:
    """Где построение плоских участков проходит без TopologyError"""
    rows = []
    for eps in epsilons:
        for alpha in alphas:
            params = ForcingParams.from_alpha(alpha, b, eps)
            try:
                locate_flat_spots(params)
                status = "ok"
            except CellflowError as e:
                status = type(e).__name__
                poincare_logger.warning("[REGIME] alpha=%.6g eps=%.6g: %s", alpha, eps, e)
            rows.append({"alpha": alpha, "epsilon": eps, "status": status})
    return rows
