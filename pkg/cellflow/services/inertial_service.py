"""
Сервис инерционной динамики.
4D-система x'' = -(x' - v(x)) / eps, редуцированное поле v + eps f на медленном многообразии,
интегрирование с событиями на вертикальных сечениях и вложение внешней силы.
"""
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from cellflow.config import settings
from cellflow.errors import DomainError, NoEvent, NonConvergence, NotClosed, SeparatrixHit, StepFailure
from cellflow.logging_config import inertial_logger
from cellflow.models import (
    CUSTOM,
    EventTrace,
    ForcingParams,
    HAMILTONIAN,
    PhaseState4,
    PlanarField,
    REDUCED,
    Trajectory,
)
from cellflow.services.hamflow_service import (
    field_jacobian,
    hamiltonian,
    hamiltonian_field,
    saddle_near,
)

FORWARD = "forward"
BACKWARD = "backward"


def perturbation_f(x: float, y: float, a: float, b: float) -> np.ndarray:
    """Главный член f = -Dv . v"""
    sx, cx, sy, cy = math.sin(x), math.cos(x), math.sin(y), math.cos(y)
    return np.array([
        0.5 * math.sin(2 * x) + a * cx * cy - b * sx * sy,
        0.5 * math.sin(2 * y) + a * sx * sy - b * cx * cy,
    ])


def perturbation_divergence(x: float, y: float) -> float:
    # не зависит от a и b
    return math.cos(2 * x) + math.cos(2 * y)


def perturbation_jacobian(x: float, y: float, a: float, b: float) -> np.ndarray:
    sx, cx, sy, cy = math.sin(x), math.cos(x), math.sin(y), math.cos(y)
    return np.array([
        [math.cos(2 * x) - a * sx * cy - b * cx * sy, -a * cx * sy - b * sx * cy],
        [a * cx * sy + b * sx * cy, math.cos(2 * y) + a * sx * cy + b * cx * sy],
    ])


def reduced_field(point: Sequence[float], params: ForcingParams) -> Tuple[np.ndarray, float]:
    """Поле v + eps f и его дивергенция eps (cos 2x + cos 2y)"""
    x, y = float(point[0]), float(point[1])
    a, b, eps = params.a, params.b, params.epsilon
    vector = hamiltonian_field(x, y, a, b) + eps * perturbation_f(x, y, a, b)
    return vector, eps * perturbation_divergence(x, y)


def hamiltonian_planar_field(params: ForcingParams) -> PlanarField:
    a, b = params.a, params.b

    def evaluator(x, y):
        return hamiltonian_field(x, y, a, b), 0.0, field_jacobian(x, y)

    return PlanarField(evaluator=evaluator, params=params, kind=HAMILTONIAN)


def reduced_planar_field(params: ForcingParams) -> PlanarField:
    if params.epsilon == 0:
        return hamiltonian_planar_field(params)
    a, b, eps = params.a, params.b, params.epsilon

    def evaluator(x, y):
        vector = hamiltonian_field(x, y, a, b) + eps * perturbation_f(x, y, a, b)
        jac = field_jacobian(x, y) + eps * perturbation_jacobian(x, y, a, b)
        return vector, eps * perturbation_divergence(x, y), jac

    return PlanarField(evaluator=evaluator, params=params, kind=REDUCED)


def cellular_field() -> PlanarField:
    """Чисто ячеистое течение (a = b = 0)"""

    def evaluator(x, y):
        return hamiltonian_field(x, y, 0.0, 0.0), 0.0, field_jacobian(x, y)

    return PlanarField(evaluator=evaluator, params=None, kind=HAMILTONIAN)


def constant_field(w: Sequence[float]) -> PlanarField:
    vector = np.array(w, dtype=float)
    zero = np.zeros((2, 2))

    def evaluator(x, y):
        return vector.copy(), 0.0, zero

    return PlanarField(evaluator=evaluator, params=None, kind=CUSTOM)


def embed_external_force(
    fluid_field: PlanarField,
    mass: float,
    drag_coefficient: float,
    gravity: Sequence[float],
) -> Tuple[PlanarField, float]:
    """
    Сила тяжести добавляет к полю постоянную скорость осаждения w = m g / drag.

    Returns:
        (переносящее поле u + w, epsilon = m / drag)
    """
    if drag_coefficient <= 0:
        raise DomainError(f"Коэффициент сопротивления должен быть положительным: {drag_coefficient}")
    w = np.asarray(gravity, dtype=float) * mass / drag_coefficient
    epsilon = mass / drag_coefficient
    if not np.any(w):
        return fluid_field, epsilon

    def evaluator(x, y):
        vector, div, jac = fluid_field.evaluator(x, y)
        return vector + w, div, jac

    return PlanarField(evaluator=evaluator, params=fluid_field.params, kind=CUSTOM), epsilon


def _check_status(sol, what: str):
    if sol.status == -1:
        raise StepFailure(f"{what}: {sol.message}")


def integrate_mr4d(
    initial: PhaseState4,
    params: ForcingParams,
    t_end: float,
    field: Optional[PlanarField] = None,
    n_samples: int = 2001,
) -> Trajectory:
    """
    Интегрирует x'' = -(x' - v(x)) / eps.
    Жёсткость 1/eps обрабатывается контролем шага явного метода, поэтому eps >= MIN_EPSILON.
    """
    eps = params.epsilon
    if eps <= 0:
        raise DomainError("4D-система требует epsilon > 0")
    if eps < settings.MIN_EPSILON:
        raise DomainError(f"epsilon={eps} меньше допустимого минимума {settings.MIN_EPSILON}")
    carrier = field or hamiltonian_planar_field(params)
    inv_eps = 1.0 / eps

    def rhs(t, s):
        u = carrier.vector(s[0], s[1])
        return [s[2], s[3], (u[0] - s[2]) * inv_eps, (u[1] - s[3]) * inv_eps]

    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(rhs, (0.0, t_end), initial.as_array(), method="DOP853", t_eval=t_eval,
                    rtol=settings.RTOL, atol=settings.ATOL)
    _check_status(sol, "integrate_mr4d")
    return Trajectory(t=sol.t, states=sol.y.T)


def integrate_reduced(
    point: Sequence[float],
    params: ForcingParams,
    t_end: float,
    n_samples: int = 2001,
) -> Trajectory:
    field = reduced_planar_field(params)
    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(field.rhs, (0.0, t_end), np.asarray(point, dtype=float), method="DOP853",
                    t_eval=t_eval, rtol=settings.RTOL, atol=settings.ATOL)
    _check_status(sol, "integrate_reduced")
    return Trajectory(t=sol.t, states=sol.y.T)


def torus_distance(x: float, y: float, saddle: Sequence[float]) -> float:
    """Расстояние до ближайшего сдвига точки на (pi n, pi n + 2 pi k)"""
    dx = x - saddle[0]
    n = round(dx / math.pi)
    dx -= n * math.pi
    dy = y - saddle[1] - n * math.pi
    dy -= 2 * math.pi * round(dy / (2 * math.pi))
    return math.hypot(dx, dy)


def integrate_planar(
    initial: Sequence[float],
    field: PlanarField,
    sections: Sequence[float],
    t_end: float,
    direction: str = FORWARD,
    integrand: Optional[Callable[[float, float], float]] = None,
    saddles: Sequence[Sequence[float]] = (),
    ball: Optional[float] = None,
) -> EventTrace:
    """
    Интегрирует плоское поле до первого пересечения одного из сечений x = X.
    Сечение, на котором лежит начальная точка, пропускается.

    Args:
        integrand: функция g(x, y), интеграл которой вдоль траектории накапливается
        saddles: седла, окрестность радиуса ball которых прерывает интегрирование
    """
    if direction not in (FORWARD, BACKWARD):
        raise DomainError(f"Неизвестное направление: {direction}")
    x0 = float(initial[0])
    targets = [x for x in sections if abs(x - x0) > 1e-9]
    if not targets:
        raise DomainError("Нет сечений, отличных от начального")
    ball = settings.SADDLE_BALL if ball is None else ball
    sign = 1.0 if direction == FORWARD else -1.0

    def rhs(t, s):
        vector = field.vector(s[0], s[1])
        if integrand is None:
            return vector
        return [vector[0], vector[1], integrand(s[0], s[1])]

    events = []
    for target in targets:
        def hit_section(t, s, target=target):
            return s[0] - target
        hit_section.terminal = True
        events.append(hit_section)
    for saddle in saddles:
        def hit_saddle(t, s, saddle=saddle):
            return torus_distance(s[0], s[1], saddle) - ball
        hit_saddle.terminal = True
        hit_saddle.direction = -1
        events.append(hit_saddle)

    state0 = [x0, float(initial[1])] + ([0.0] if integrand is not None else [])
    sol = solve_ivp(rhs, (0.0, sign * t_end), state0, method="DOP853", events=events,
                    dense_output=True, rtol=settings.RTOL, atol=settings.ATOL)
    _check_status(sol, "integrate_planar")
    if sol.status == 0:
        raise NoEvent(f"Траектория из ({x0:.6g}, {initial[1]:.6g}) не пересекла сечения за t={t_end}")

    for i, saddle in enumerate(saddles):
        if len(sol.t_events[len(targets) + i]):
            raise SeparatrixHit(
                f"Траектория подошла к седлу ({saddle[0]:.6g}, {saddle[1]:.6g}) ближе {ball}",
                point=tuple(sol.y_events[len(targets) + i][0][:2]),
            )

    for i, target in enumerate(targets):
        if len(sol.t_events[i]):
            t_hit = float(sol.t_events[i][0])
            state = np.asarray(sol.y_events[i][0], dtype=float)
            if abs(state[0] - target) > settings.EVENT_TOL:
                t_hit = _polish_event(sol, target, t_hit)
                state = sol.sol(t_hit)
            return EventTrace(
                times=[t_hit],
                states=[state[:2]],
                sections=[target],
                winding=int(round((target - x0) / math.pi)),
                final_time=t_hit,
                final_state=state[:2],
                div_integral=float(state[2]) if integrand is not None else 0.0,
            )
    raise NoEvent("Интегрирование остановлено без события")


def _polish_event(sol, target: float, t_hit: float) -> float:
    """Бисекция по плотному выходу до |x - X| < EVENT_TOL"""
    step = abs(sol.t[-1] - sol.t[0]) * 1e-6 + 1e-9
    lo, hi = t_hit - step, t_hit + step

    def g(t):
        return sol.sol(t)[0] - target

    if g(lo) * g(hi) > 0:
        return t_hit
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def h_change_per_wind(params: ForcingParams, z: float) -> float:
    """Изменение H между последовательными пересечениями трансверсали"""
    x0 = -math.pi / 2
    y0 = x0 + 2 * math.pi * z
    trace = integrate_planar((x0, y0), reduced_planar_field(params), [math.pi / 2], t_end=100.0 / params.b)
    x1, y1 = trace.final_state
    return hamiltonian(x1, y1, params.a, params.b) - hamiltonian(x0, y0, params.a, params.b)


def perturbed_fixed_points(params: ForcingParams) -> List[Tuple[Tuple[float, float], str]]:
    """
    Неподвижные точки поля v + eps f в фундаментальной области тора:
    два седла (продолжения седел v) и два неустойчивых фокуса (продолжения центров).
    """
    field = reduced_planar_field(params)
    points = []
    for node in ((-1, 0), (0, 0)):
        seed = saddle_near(node, params).position
        points.append(_newton_field(field, seed))
    for seed in ((0.0, 0.0), (0.0, math.pi)):
        points.append(_newton_field(field, seed))
    result = []
    for p in points:
        eig = np.linalg.eigvals(field.jacobian(*p))
        if np.all(np.isreal(eig)) and np.prod(eig.real) < 0:
            kind = "saddle"
        elif np.any(np.iscomplex(eig)) and np.all(eig.real > 0):
            kind = "unstable_focus"
        elif np.any(np.iscomplex(eig)) and np.all(eig.real == 0):
            kind = "center"
        else:
            kind = "other"
        result.append(((float(p[0]), float(p[1])), kind))
    return result


def _newton_field(field: PlanarField, seed: Sequence[float]) -> Tuple[float, float]:
    p = np.array(seed, dtype=float)
    for _ in range(settings.SADDLE_MAX_ITER):
        vector, _, jac = field.evaluator(p[0], p[1])
        if np.linalg.norm(vector) < settings.SADDLE_NEWTON_TOL:
            return float(p[0]), float(p[1])
        p = p - np.linalg.solve(jac, vector)
    vector = field.vector(p[0], p[1])
    if np.linalg.norm(vector) < settings.SADDLE_NEWTON_TOL:
        return float(p[0]), float(p[1])
    raise NonConvergence(f"Ньютон для неподвижной точки около {tuple(seed)} не сошёлся")


def elliptic_center(params: ForcingParams, seed: Tuple[float, float] = (0.0, 0.0)) -> Tuple[float, float]:
    return _newton_field(hamiltonian_planar_field(params), seed)


def homoclinic_level(params: ForcingParams) -> float:
    """Уровень гомоклинической петли ячейки с центром около (0, 0): наибольший из уровней угловых седел"""
    return max(saddle_near(node, params).h_value for node in ((0, 0), (-1, 0), (0, -1), (-1, -1)))


def divergence_area_check(
    closed_orbit_level: float,
    params: ForcingParams,
    n_points: int = 20000,
) -> Tuple[float, float]:
    """
    Площадь внутри замкнутой орбиты уровня h (epsilon = 0) и интеграл Div f по ней.
    Интеграл считается по формуле Грина на многоугольнике:
    Div f = cos 2x + cos 2y = d(sin 2x / 2)/dx - d(-sin 2y / 2)/dy.
    """
    a, b = params.a, params.b
    cx, cy = elliptic_center(params)
    h_center = hamiltonian(cx, cy, a, b)
    if closed_orbit_level >= h_center:
        raise NotClosed(f"Уровень {closed_orbit_level} выше максимума H в ячейке ({h_center})")

    def along_ray(r):
        return hamiltonian(cx + r, cy, a, b) - closed_orbit_level

    r_max = math.pi / 2 - cx
    if along_ray(r_max) >= 0:
        raise NotClosed(f"Уровень {closed_orbit_level} не пересекает луч от центра внутри ячейки")
    r0 = brentq(along_ray, 0.0, r_max, xtol=1e-14)
    start = np.array([cx + r0, cy])

    def rhs(t, s):
        v = hamiltonian_field(s[0], s[1], a, b)
        dx, dy = s[0] - cx, s[1] - cy
        return [v[0], v[1], (dx * v[1] - dy * v[0]) / (dx * dx + dy * dy)]

    def full_turn(t, s):
        return abs(s[2]) - 2 * math.pi
    full_turn.terminal = True
    full_turn.direction = 1

    def left_cell(t, s):
        return math.pi / 2 - max(abs(s[0]), abs(s[1]))
    left_cell.terminal = True

    sol = solve_ivp(rhs, (0.0, 1e3), [start[0], start[1], 0.0], method="DOP853",
                    events=(full_turn, left_cell), dense_output=True,
                    rtol=settings.RTOL, atol=settings.ATOL)
    _check_status(sol, "divergence_area_check")
    if sol.status != 1 or not len(sol.t_events[0]):
        raise NotClosed(f"Орбита уровня {closed_orbit_level} не замкнулась внутри ячейки")

    period = float(sol.t_events[0][0])
    ts = np.linspace(0.0, period, n_points + 1)
    pts = sol.sol(ts)[:2]
    xs, ys = pts[0], pts[1]
    xs[-1], ys[-1] = xs[0], ys[0]
    dx, dy = np.diff(xs), np.diff(ys)
    mx, my = 0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:])
    area = 0.5 * float(np.sum(mx * dy - my * dx))
    integral = float(np.sum(0.5 * np.sin(2 * mx) * dy - 0.5 * np.sin(2 * my) * dx))
    if area < 0:
        area, integral = -area, -integral
    inertial_logger.debug("[REPULSION] h=%.6g period=%.4g area=%.6g integral=%.6g",
                          closed_orbit_level, period, area, integral)
    return integral, area


def nested_levels(params: ForcingParams, count: int) -> List[float]:
    """count уровней строго между гомоклинической петлёй и центром"""
    cx, cy = elliptic_center(params)
    top = hamiltonian(cx, cy, params.a, params.b)
    bottom = homoclinic_level(params)
    return [bottom + (top - bottom) * (k / (count + 1)) for k in range(1, count + 1)]


def repulsion_delta(params: ForcingParams, levels: Sequence[float]) -> float:
    """Наименьшее отношение интеграл / площадь по набору вложенных орбит"""
    ratios = []
    for level in levels:
        integral, area = divergence_area_check(level, params)
        ratios.append(integral / area)
    return min(ratios)
