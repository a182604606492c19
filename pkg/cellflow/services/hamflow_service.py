"""
Сервис гамильтоновой системы (epsilon = 0)
H(x, y) = cos x cos y - a x + b y, поле v = (H_y, -H_x).
Седла, значения H на седлах, правило шахматной доски и поворот на сечении.
"""
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from cellflow.config import settings
from cellflow.errors import DomainError, NonConvergence, OnLineError
from cellflow.logging_config import hamflow_logger
from cellflow.models import (
    ChessPath,
    EVEN,
    ForcingParams,
    LEFT,
    ODD,
    RIGHT,
    SaddlePoint,
    node_parity,
    node_point,
)

Window = Tuple[float, float, float, float]  # xmin, xmax, ymin, ymax


def hamiltonian(x: float, y: float, a: float, b: float) -> float:
    return math.cos(x) * math.cos(y) - a * x + b * y


def hamiltonian_field(x: float, y: float, a: float, b: float) -> np.ndarray:
    return np.array([-math.cos(x) * math.sin(y) + b, math.sin(x) * math.cos(y) + a])


def hamiltonian_gradient(x: float, y: float, a: float, b: float) -> np.ndarray:
    return np.array([-math.sin(x) * math.cos(y) - a, -math.cos(x) * math.sin(y) + b])


def hamiltonian_hessian(x: float, y: float) -> np.ndarray:
    cc = math.cos(x) * math.cos(y)
    ss = math.sin(x) * math.sin(y)
    return np.array([[-cc, ss], [ss, -cc]])


def field_jacobian(x: float, y: float) -> np.ndarray:
    """Якобиан поля v (след равен нулю)"""
    return np.array([
        [math.sin(x) * math.sin(y), -math.cos(x) * math.cos(y)],
        [math.cos(x) * math.cos(y), -math.sin(x) * math.sin(y)],
    ])


def eval_hamiltonian_system(point: Sequence[float], params: ForcingParams) -> Tuple[float, np.ndarray]:
    """Значение гамильтониана и поле скоростей в точке"""
    x, y = float(point[0]), float(point[1])
    return hamiltonian(x, y, params.a, params.b), hamiltonian_field(x, y, params.a, params.b)


def _shape(x: float) -> float:
    return math.sqrt(1.0 - x * x) + x * math.asin(x)


def k_constant(params: ForcingParams) -> float:
    """
    K = (f(b - a) - f(b + a)) / 2, f(x) = sqrt(1 - x^2) + x arcsin x.
    H на седле равно b y_G - a x_G + K для нечётного узла и b y_G - a x_G - K для чётного.
    """
    a, b = params.a, params.b
    if abs(a + b) >= 1 or abs(b - a) >= 1:
        raise DomainError(f"K не определено при |a+b| >= 1 или |b-a| >= 1 (a={a}, b={b})")
    return 0.5 * (_shape(b - a) - _shape(b + a))


def node_of_point(x: float, y: float) -> Tuple[int, int]:
    """Ближайший узел решётки (pi/2 + pi k1, pi/2 + pi k2)"""
    return (int(round((x - math.pi / 2) / math.pi)), int(round((y - math.pi / 2) / math.pi)))


def node_level(node: Tuple[int, int], params: ForcingParams) -> float:
    """b y_G - a x_G для узла"""
    xg, yg = node_point(node)
    return params.b * yg - params.a * xg


def saddle_seed(node: Tuple[int, int], a: float, b: float) -> Tuple[float, float]:
    """
    Начальное приближение седла около узла из замкнутых формул.
    В переменных X = x + y, Y = x - y: sin X = b - a, sin Y = -(a + b).
    Допускает a = b = 0 (тогда седло совпадает с узлом).
    """
    if abs(b - a) > 1 or abs(a + b) > 1:
        raise DomainError(f"Нет седел при |b-a| > 1 или |a+b| > 1 (a={a}, b={b})")
    xg, yg = node_point(node)
    big_x, big_y = xg + yg, xg - yg
    if node_parity(node) == ODD:
        x0, y0 = math.asin(b - a), math.pi + math.asin(a + b)
    else:
        x0, y0 = math.pi - math.asin(b - a), -math.asin(a + b)
    two_pi = 2 * math.pi
    big_x_seed = x0 + two_pi * round((big_x - x0) / two_pi)
    big_y_seed = y0 + two_pi * round((big_y - y0) / two_pi)
    return ((big_x_seed + big_y_seed) / 2, (big_x_seed - big_y_seed) / 2)


def _newton_critical_point(x: float, y: float, a: float, b: float) -> Tuple[float, float]:
    for _ in range(settings.SADDLE_MAX_ITER):
        grad = hamiltonian_gradient(x, y, a, b)
        if np.linalg.norm(grad) < settings.SADDLE_NEWTON_TOL:
            return x, y
        try:
            dx, dy = np.linalg.solve(hamiltonian_hessian(x, y), -grad)
        except np.linalg.LinAlgError as e:
            raise NonConvergence(f"Вырожденный гессиан в ({x}, {y}): {e}")
        x, y = x + dx, y + dy
    if np.linalg.norm(hamiltonian_gradient(x, y, a, b)) < settings.SADDLE_NEWTON_TOL:
        return x, y
    raise NonConvergence(
        f"Метод Ньютона не сошёлся за {settings.SADDLE_MAX_ITER} итераций (a={a}, b={b})"
    )


def _check_forcing(params: ForcingParams):
    params.require_positive_a()
    limit = settings.CHESS_MAX_FORCING
    if params.a > limit or params.b > limit:
        raise DomainError(f"Формулы для седел проверены только при 0 < a, b <= {limit}")


def saddle_near(node: Tuple[int, int], params: ForcingParams) -> SaddlePoint:
    """Седло в ячейке около узла решётки"""
    x0, y0 = saddle_seed(node, params.a, params.b)
    x, y = _newton_critical_point(x0, y0, params.a, params.b)
    if np.linalg.det(hamiltonian_hessian(x, y)) >= 0:
        raise NonConvergence(f"Ньютон сошёлся не к седлу около узла {node}")
    found_node = node_of_point(x, y)
    return SaddlePoint(
        position=(x, y),
        parity=node_parity(found_node),
        h_value=hamiltonian(x, y, params.a, params.b),
        grid_node=found_node,
    )


def find_saddles(params: ForcingParams, window: Window) -> List[SaddlePoint]:
    """Все седла около узлов решётки внутри окна"""
    _check_forcing(params)
    xmin, xmax, ymin, ymax = window
    k1_lo = math.ceil((xmin - math.pi / 2) / math.pi)
    k1_hi = math.floor((xmax - math.pi / 2) / math.pi)
    k2_lo = math.ceil((ymin - math.pi / 2) / math.pi)
    k2_hi = math.floor((ymax - math.pi / 2) / math.pi)
    saddles = [
        saddle_near((k1, k2), params)
        for k1 in range(k1_lo, k1_hi + 1)
        for k2 in range(k2_lo, k2_hi + 1)
    ]
    hamflow_logger.debug("[SADDLES] a=%s b=%s found=%d", params.a, params.b, len(saddles))
    return saddles


def expected_saddle_level(saddle: SaddlePoint, params: ForcingParams) -> float:
    k = k_constant(params)
    base = node_level(saddle.grid_node, params)
    return base + k if saddle.parity == ODD else base - k


def strip_saddle_levels(params: ForcingParams, l_values: Iterable[int]) -> List[float]:
    """Значения H на седлах полосы |x| <= pi/2: пары около (-pi/2, pi/2 + 2 pi l) и (pi/2, pi/2 + 2 pi l)"""
    levels = []
    for l in l_values:
        for k1 in (-1, 0):
            levels.append(saddle_near((k1, 2 * l), params).h_value)
    return levels


def levels_distinct(levels: Sequence[float], tol: float = 1e-9) -> bool:
    ordered = sorted(levels)
    return all(b - a > tol for a, b in zip(ordered, ordered[1:]))


def separatrix_crossings_eps0(params: ForcingParams, l: int = 0) -> Tuple[float, float]:
    """
    y-координаты пересечений свободных устойчивых сепаратрис левого и правого седла
    полосы с сечением x = -pi/2. На сечении H = a pi/2 + b y.
    """
    left = saddle_near((-1, 2 * l), params)
    right = saddle_near((0, 2 * l), params)
    shift = params.a * math.pi / 2
    return ((left.h_value - shift) / params.b, (right.h_value - shift) / params.b)


def chess_lines(params: ForcingParams, h0: float) -> Tuple[float, float]:
    k = k_constant(params)
    return (h0 - k, h0 + k)


def chess_turn_label(node: Tuple[int, int], params: ForcingParams, h0: float) -> str:
    """
    Метка узла: L или R.
    Траектория уровня h0 обходит седло с той стороны, где H - H_s имеет знак h0 - H_s;
    положительная разность даёт левый поворот, то есть L при b y_G - a x_G < c.
    """
    c_odd, c_even = chess_lines(params, h0)
    c = c_odd if node_parity(node) == ODD else c_even
    gap = node_level(node, params) - c
    if abs(gap) < settings.ON_LINE_TOL:
        raise OnLineError(f"Прямая c={c:.12g} проходит через узел {node}: уровень h0={h0} не общий")
    return LEFT if gap < 0 else RIGHT


def _turn(heading: Tuple[int, int], label: str) -> Tuple[int, int]:
    dx, dy = heading
    return (-dy, dx) if label == LEFT else (dy, -dx)


def chess_path(
    start_edge: Tuple[Tuple[int, int], Tuple[int, int]],
    params: ForcingParams,
    h0: float,
    n_turns: int,
) -> ChessPath:
    """Путь по рёбрам решётки по правилу шахматной доски"""
    _check_forcing(params)
    start, current = start_edge
    heading = (current[0] - start[0], current[1] - start[1])
    if abs(heading[0]) + abs(heading[1]) != 1:
        raise DomainError(f"Ребро {start_edge} не соединяет соседние узлы")
    vertices = [start, current]
    turns = []
    for _ in range(n_turns):
        label = chess_turn_label(current, params, h0)
        turns.append(label)
        heading = _turn(heading, label)
        current = (current[0] + heading[0], current[1] + heading[1])
        vertices.append(current)
    return ChessPath(vertices=vertices, turns=turns, h0=h0, lines=chess_lines(params, h0))


def turns_from_vertices(vertices: Sequence[Tuple[int, int]]) -> List[str]:
    turns = []
    for p0, p1, p2 in zip(vertices, vertices[1:], vertices[2:]):
        u = (p1[0] - p0[0], p1[1] - p0[1])
        w = (p2[0] - p1[0], p2[1] - p1[1])
        cross = u[0] * w[1] - u[1] * w[0]
        if cross == 0:
            raise DomainError(f"Нет поворота в узле {p1}")
        turns.append(LEFT if cross > 0 else RIGHT)
    return turns


def _voronoi_node(x: float, y: float) -> Tuple[int, int]:
    return (math.floor(x / math.pi), math.floor(y / math.pi))


def chess_ode_turns(
    params: ForcingParams,
    start: Tuple[float, float],
    n_turns: int,
    t_chunk: float = 200.0,
    max_chunks: int = 20,
) -> Tuple[List[Tuple[int, int]], List[str]]:
    """
    Последовательность узлов и поворотов траектории уравнения для v.
    Узел траектории меняется при пересечении прямых x = pi k или y = pi k
    (границ областей Вороного узлов).
    """
    a, b = params.a, params.b

    def rhs(t, s):
        return hamiltonian_field(s[0], s[1], a, b)

    def cross_x(t, s):
        return math.sin(s[0])

    def cross_y(t, s):
        return math.sin(s[1])

    state = np.array(start, dtype=float)
    vertices = [_voronoi_node(*state)]
    t0 = 0.0
    for _ in range(max_chunks):
        sol = solve_ivp(rhs, (t0, t0 + t_chunk), state, method="DOP853", events=(cross_x, cross_y),
                        dense_output=True, rtol=settings.RTOL, atol=settings.ATOL)
        crossings = [(t, 0) for t in sol.t_events[0]] + [(t, 1) for t in sol.t_events[1]]
        for t, axis in sorted(crossings):
            if t <= t0:
                continue
            velocity = rhs(t, sol.sol(t))
            node = list(vertices[-1])
            node[axis] += 1 if velocity[axis] > 0 else -1
            vertices.append(tuple(node))
        if len(vertices) >= n_turns + 2:
            break
        t0, state = sol.t[-1], sol.y[:, -1]
    else:
        hamflow_logger.warning("[CHESS_ODE] only %d vertices after %d chunks", len(vertices), max_chunks)
    vertices = vertices[: n_turns + 2]
    return vertices, turns_from_vertices(vertices)


def rigid_rotation_shift(params: ForcingParams) -> float:
    return (params.a - params.b) / (2 * params.b)


def rigid_rotation_p0(z: float, params: ForcingParams) -> float:
    """Лифт отображения первого возвращения при epsilon = 0: z + (a - b) / (2b)"""
    return z + rigid_rotation_shift(params)


def level_of_start(start: Tuple[float, float], params: ForcingParams) -> float:
    return hamiltonian(start[0], start[1], params.a, params.b)


# на сечении x = -pi/2 между узлами (-1, 0) и (-1, -1), поток идёт вниз
DEFAULT_CHESS_START = (-math.pi / 2, 0.3)


def chess_oracle_mismatch(params: ForcingParams, n_turns: int, start: Optional[Tuple[float, float]] = None) -> int:
    """Номер первого расхождения пути по правилу и траектории ОДУ, либо -1"""
    start = start or DEFAULT_CHESS_START
    vertices, ode_turns = chess_ode_turns(params, start, n_turns)
    h0 = level_of_start(start, params)
    path = chess_path((vertices[0], vertices[1]), params, h0, n_turns)
    for i, (expected, actual) in enumerate(zip(path.turns, ode_turns)):
        if expected != actual:
            return i
    if len(ode_turns) < n_turns:
        return len(ode_turns)
    return -1
