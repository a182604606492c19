"""
Сервис отображений окружности с плоскими участками.
Числа вращения с рациональным сертификатом, плато, psi_N, покрытия C_N,
оценка размерности Хаусдорфа и крутизны лестницы.
"""
import math
import threading
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cellflow.config import settings
from cellflow.errors import DomainError, NotFound
from cellflow.logging_config import circlemap_logger
from cellflow.models import (
    FlatSpotCircleMap,
    ForcingParams,
    MonotoneFamily,
    RotationResult,
)
from cellflow.services.farey import farey_fractions
from cellflow.services.poincare_service import inverse_map_Q, inverse_map_Q_sample, locate_flat_spots

Interval = Tuple[float, float]

HAUSDORFF_EXPONENTS = (1.0, 0.5, 0.2, 0.1)


def make_boyd_family(flat_fraction: float, slope: float) -> MonotoneFamily:
    """
    Кусочно-линейное семейство f_s = g + s, s в [0, 1]:
    g = 0 на [0, flat_fraction], g = slope (x - flat_fraction) на остальной части периода.
    """
    if slope <= 1:
        raise DomainError(f"Наклон должен быть больше 1: {slope}")
    if not 0 < flat_fraction < 1 or abs(slope * (1 - flat_fraction) - 1) > 1e-12:
        raise DomainError(
            f"Нет замыкания степени один: slope * (1 - flat_fraction) = {slope * (1 - flat_fraction)}"
        )
    return _piecewise_family(flat_fraction, slope, f"boyd({flat_fraction:g}, {slope:g})")


def make_flat_rotation_family(flat_fraction: float) -> MonotoneFamily:
    """
    Поворот окружности с плоским участком [0, flat_fraction].
    При flat_fraction = 0 это жёсткий поворот x + s (участок вырожден в точку).
    """
    if not 0 <= flat_fraction < 1:
        raise DomainError(f"Доля плоского участка вне [0, 1): {flat_fraction}")
    return _piecewise_family(flat_fraction, 1.0 / (1.0 - flat_fraction), f"flat-rotation({flat_fraction:g})")


def _piecewise_family(flat_fraction: float, slope: float, name: str) -> MonotoneFamily:
    def g(x: float) -> float:
        n = math.floor(x)
        r = x - n
        return n + (0.0 if r <= flat_fraction else slope * (r - flat_fraction))

    def generator(s: float) -> FlatSpotCircleMap:
        return FlatSpotCircleMap(
            spots=[(0.0, flat_fraction)],
            heights=[s],
            branch=lambda x: g(x) + s,
            derivative=lambda x: slope,
            lam=slope,
        )

    return MonotoneFamily(generator=generator, s_range=(0.0, 1.0), nu=1.0, lam=slope, m=1, name=name)


def _certificate(circle_map: FlatSpotCircleMap, q_max: int, tol: float) -> Optional[RotationResult]:
    """Ищет q <= q_max и p с f^q(I_j) внутри I_j + p (участок сжат на tol)"""
    best = None
    for j, height in enumerate(circle_map.heights):
        y = height + circle_map.lift_offset
        for q in range(1, q_max + 1):
            if best is not None and q >= best.q:
                break
            hit = circle_map.locate(y, shrink=tol)
            if hit is not None and hit[0] == j:
                best = RotationResult.rational(hit[1], q, j)
                break
            y = circle_map(y)
    return best


def brute_force_rotation(circle_map: FlatSpotCircleMap, n: int, x0: Optional[float] = None) -> RotationResult:
    """
    Оценка по n итерациям: n rho лежит между floor и ceil от f^n(x0) - x0
    (иначе нашлась бы периодическая точка с другим числом вращения).
    """
    x0 = circle_map.heights[0] if x0 is None else x0
    x = x0
    for _ in range(n):
        x = circle_map(x)
    d = x - x0
    return RotationResult.interval(math.floor(d) / n, math.ceil(d) / n, n)


def rotation_number(
    circle_map: FlatSpotCircleMap,
    q_max: Optional[int] = None,
    n_max: Optional[int] = None,
    certificate: bool = True,
) -> RotationResult:
    """Рациональное p/q с сертификатом либо интервальная оценка"""
    q_max = settings.Q_MAX if q_max is None else q_max
    n_max = settings.N_MAX if n_max is None else n_max
    if certificate:
        found = _certificate(circle_map, q_max, settings.CERT_TOL)
        if found is not None:
            return found
    return brute_force_rotation(circle_map, n_max)


def verify_certificate(circle_map: FlatSpotCircleMap, result: RotationResult, tol: Optional[float] = None) -> bool:
    if not result.is_rational:
        return False
    tol = settings.CERT_TOL if tol is None else tol
    j = result.certificate_spot_index
    y = circle_map.heights[j] + circle_map.lift_offset
    for _ in range(result.q - 1):
        y = circle_map(y)
    lo, hi = circle_map.spots[j]
    return lo + result.p + tol <= y <= hi + result.p - tol


def _classify(family: MonotoneFamily, s: float, target: Fraction, n_side: int) -> Optional[int]:
    """
    0 если rho(s) = target с сертификатом, -1/+1 если rho(s) меньше/больше target,
    None если оценка не различает.
    """
    circle_map = family.at(s)
    found = _certificate(circle_map, target.denominator, settings.CERT_TOL)
    if found is not None and found.fraction == target:
        return 0
    estimate = brute_force_rotation(circle_map, n_side)
    if estimate.hi < target:
        return -1
    if estimate.lo > target:
        return 1
    return None


def is_locked(family: MonotoneFamily, s: float, target: Fraction) -> bool:
    found = _certificate(family.at(s), target.denominator, settings.CERT_TOL)
    return found is not None and found.fraction == target


def _bisect_edge(family, outside: float, inside: float, target: Fraction, tol: float) -> float:
    while abs(inside - outside) > tol:
        mid = 0.5 * (inside + outside)
        if is_locked(family, mid, target):
            inside = mid
        else:
            outside = mid
    return inside


def _find_locked_point(family, target: Fraction, lo: float, hi: float, resolution: float, n_side: int) -> float:
    for s in (lo, hi):
        if _classify(family, s, target, n_side) == 0:
            return s
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        side = _classify(family, mid, target, n_side)
        if side == 0:
            return mid
        if side is None:
            width = hi - lo
            candidates = [mid + k * width / 8 * sign for k in (1, 2, 3) for sign in (-1, 1)]
            for candidate in candidates:
                candidate_side = _classify(family, candidate, target, n_side)
                if candidate_side == 0:
                    return candidate
                if candidate_side is not None:
                    side = candidate_side
                    mid = candidate
                    break
            if side is None:
                break
        if side < 0:
            lo = mid
        else:
            hi = mid
    raise NotFound(f"Нет плато rho = {target} в [{lo:.12g}, {hi:.12g}] с разрешением {resolution:g}")


def plateau_bounds(
    family: MonotoneFamily,
    p: int,
    q: int,
    bracket: Optional[Interval] = None,
    tol: Optional[float] = None,
    resolution: Optional[float] = None,
) -> Interval:
    """Замкнутое плато rho^{-1}(p/q) внутри bracket с точностью tol"""
    target = Fraction(p, q)
    lo, hi = bracket or family.s_range
    tol = settings.PLATEAU_TOL if tol is None else tol
    resolution = settings.PLATEAU_SEARCH_RES if resolution is None else resolution
    n_side = max(64 * target.denominator, 256)
    inside = _find_locked_point(family, target, lo, hi, resolution, n_side)
    left = lo if is_locked(family, lo, target) else _bisect_edge(family, lo, inside, target, tol)
    right = hi if is_locked(family, hi, target) else _bisect_edge(family, hi, inside, target, tol)
    circlemap_logger.debug("[PLATEAU] %s: [%.15g, %.15g]", target, left, right)
    return (max(left, lo), min(right, hi))


def psi_N(family: MonotoneFamily, s: float, N: int) -> float:
    """Сумма f_s^{N-1}(b_j(s)) по всем плоским участкам"""
    if N < 1:
        raise DomainError(f"N должно быть >= 1: {N}")
    circle_map = family.at(s)
    total = 0.0
    for height in circle_map.heights:
        y = height + circle_map.lift_offset
        for _ in range(N - 1):
            y = circle_map(y)
        total += y
    return total


def family_rotation(family: MonotoneFamily, s: float) -> RotationResult:
    return rotation_number(family.at(s), n_max=family.n_max)


def plateau_catalog(
    family: MonotoneFamily,
    q_max: int,
    resolution: Optional[float] = None,
) -> Dict[Fraction, Optional[Interval]]:
    """Плато всех p/q с q <= q_max из диапазона rho семейства; пустые помечены None"""
    s_lo, s_hi = family.s_range
    rho_lo = family_rotation(family, s_lo).lo
    rho_hi = family_rotation(family, s_hi).hi
    catalog = {}
    for target in farey_fractions(q_max, rho_lo, rho_hi):
        try:
            catalog[target] = plateau_bounds(family, target.numerator, target.denominator,
                                             (s_lo, s_hi), resolution=resolution)
        except NotFound:
            circlemap_logger.info("[COVER] empty plateau for %s", target)
            catalog[target] = None
    return catalog


def complement_intervals(s_range: Interval, plateaus: Sequence[Interval], min_gap: Optional[float] = None) -> List[Interval]:
    """Дополнение плато в s_range; щели не длиннее min_gap - погрешность бисекции, их нет"""
    min_gap = 10 * settings.PLATEAU_TOL if min_gap is None else min_gap
    lo, hi = s_range
    gaps = []
    cursor = lo
    for p_lo, p_hi in sorted(plateaus):
        if p_lo - cursor > min_gap:
            gaps.append((cursor, p_lo))
        cursor = max(cursor, p_hi)
    if hi - cursor > min_gap:
        gaps.append((cursor, hi))
    return gaps


def hausdorff_sums(intervals: Sequence[Interval], exponents: Sequence[float] = HAUSDORFF_EXPONENTS) -> Dict[float, float]:
    lengths = np.array([b - a for a, b in intervals], dtype=float)
    return {d: float(np.sum(lengths ** d)) if len(lengths) else 0.0 for d in exponents}


def cover_CN(
    family: MonotoneFamily,
    N: int,
    resolution: Optional[float] = None,
    catalog: Optional[Dict[Fraction, Optional[Interval]]] = None,
) -> Tuple[List[Interval], List[Interval], Dict[float, float]]:
    """
    Плато всех p/q с q <= m N и покрытие U_N остатка C_N отрезками.

    Returns:
        (плато, отрезки U_N, суммы |I|^d)
    """
    if N < 1:
        raise DomainError(f"N должно быть >= 1: {N}")
    q_max = family.m * N
    if catalog is None:
        catalog = plateau_catalog(family, q_max, resolution)
    plateaus = sorted(iv for target, iv in catalog.items() if iv is not None and target.denominator <= q_max)
    gaps = complement_intervals(family.s_range, plateaus)
    return plateaus, gaps, hausdorff_sums(gaps)


def cover_diameter(gaps: Sequence[Interval]) -> float:
    return max((b - a for a, b in gaps), default=0.0)


def hausdorff_estimate(family: MonotoneFamily, N_max: int, resolution: Optional[float] = None) -> Dict[str, object]:
    """
    Таблица m_d(U_N) для d из HAUSDORFF_EXPONENTS и N <= N_max,
    наклоны log m_d по N.
    """
    if N_max < 3:
        raise DomainError(f"N_max должно быть >= 3: {N_max}")
    catalog = plateau_catalog(family, family.m * N_max, resolution)
    rows = []
    diameters = []
    for N in range(1, N_max + 1):
        _, gaps, sums = cover_CN(family, N, catalog=catalog)
        diameters.append(cover_diameter(gaps))
        for d in HAUSDORFF_EXPONENTS:
            rows.append({"d": d, "N": N, "m_d": sums[d], "diam": diameters[-1]})
    slopes = {}
    for d in HAUSDORFF_EXPONENTS:
        ns = np.array([r["N"] for r in rows if r["d"] == d], dtype=float)
        values = np.array([r["m_d"] for r in rows if r["d"] == d], dtype=float)
        mask = values > 0
        slopes[d] = float(np.polyfit(ns[mask], np.log(values[mask]), 1)[0]) if mask.sum() >= 2 else float("nan")
    circlemap_logger.info("[HAUSDORFF] %s N_max=%d slopes=%s", family.name, N_max, slopes)
    return {"rows": rows, "slopes": slopes, "lambda": family.lam}


def steepness_scan(
    family: MonotoneFamily,
    plateau: Interval,
    side: str,
    deltas: Sequence[float],
) -> Dict[str, object]:
    """
    Рост rho при отходе от конца плато: подгонка c в ds = exp(-c / drho)
    и проверка оценки drho > D / (q |ln ds|), D = ln(lambda) / (4 m).
    """
    if side not in ("left", "right"):
        raise DomainError(f"side должен быть left или right: {side}")
    if any(d <= 0 for d in deltas) or any(d2 >= d1 for d1, d2 in zip(deltas, deltas[1:])):
        raise DomainError("deltas должны быть положительными и убывать")
    locked = family_rotation(family, 0.5 * (plateau[0] + plateau[1]))
    if not locked.is_rational:
        raise NotFound(f"В середине плато {plateau} нет рационального сертификата")
    endpoint = plateau[1] if side == "right" else plateau[0]
    sign = 1.0 if side == "right" else -1.0
    q = locked.q
    bound_const = math.log(family.lam) / (4 * family.m)
    rows = []
    for ds in deltas:
        rho = family_rotation(family, endpoint + sign * ds).value
        drho = abs(rho - locked.value)
        product = drho * abs(math.log(ds))
        rows.append({
            "delta": ds,
            "drho": drho,
            "c": product,
            "bound_holds": drho > bound_const / (q * abs(math.log(ds))),
        })
    cs = np.array([r["c"] for r in rows])
    fitted = float(np.mean(cs))
    return {
        "c": fitted,
        "c_spread": float(cs.max() / cs.min()) if cs.min() > 0 else float("inf"),
        "D": bound_const,
        "q": q,
        "rows": rows,
    }


def estimate_lambda(circle_map: FlatSpotCircleMap, samples: int = 64, h: float = 1e-6) -> float:
    """Наименьшая производная вне плоских участков (по формуле, если есть, иначе разностями)"""
    derivs = []
    for x in np.linspace(0.0, 1.0, samples, endpoint=False):
        if circle_map.locate(x - h) or circle_map.locate(x) or circle_map.locate(x + h):
            continue
        if circle_map.derivative is not None:
            derivs.append(circle_map.derivative(x))
        else:
            derivs.append((circle_map(x + h) - circle_map(x - h)) / (2 * h))
    if not derivs:
        raise NotFound("Нет точек вне плоских участков для оценки растяжения")
    return float(min(derivs))


def estimate_nu(family: MonotoneFamily, s_values: Sequence[float], h: float = 1e-4) -> float:
    """Наименьшая скорость роста высот участков по s"""
    speeds = []
    for s in s_values:
        lower, upper = family.at(s - h), family.at(s + h)
        for b1, b2 in zip(lower.heights, upper.heights):
            speeds.append((b2 - b1) / (2 * h))
    return float(min(speeds))


class _Memo:
    """Кэш значений с блокировкой; безопасен при параллельной вставке"""

    def __init__(self):
        self._data: Dict[object, object] = {}
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            self._data.setdefault(key, value)
            return self._data[key]

    def __len__(self):
        with self._lock:
            return len(self._data)


def make_dynamics_family(
    b: float,
    epsilon: float,
    alpha_range: Interval,
    estimate_constants: bool = False,
) -> MonotoneFamily:
    """
    Семейство Q_s обратных отображений первого возвращения, s = -a = -alpha b.
    Каждое вычисление ветви - решение ОДУ, поэтому отображения и их значения кэшируются.
    """
    maps = _Memo()

    def generator(s: float) -> FlatSpotCircleMap:
        cached = maps.get(s)
        if cached is not None:
            return cached
        params = ForcingParams(a=-s, b=b, epsilon=epsilon)
        flat = locate_flat_spots(params, refine=settings.REFINE_HEIGHTS)
        values = _Memo()

        def branch(x: float) -> float:
            n = math.floor(x)
            base = x - n
            value = values.get(base)
            if value is None:
                value = values.put(base, inverse_map_Q(base, params, flat))
            return value + n

        def derivative(x: float) -> float:
            return inverse_map_Q_sample(x, params, flat).derivative

        circle_map = FlatSpotCircleMap(
            spots=list(flat.spots),
            heights=list(flat.heights),
            branch=branch,
            derivative=derivative,
            lam=1.0 + epsilon,
        )
        return maps.put(s, circle_map)

    lo, hi = alpha_range
    if lo > hi:
        raise DomainError(f"Пустой диапазон alpha: {alpha_range}")
    family = MonotoneFamily(
        generator=generator,
        s_range=(-hi * b, -lo * b),
        nu=float("nan"),
        lam=1.0 + epsilon,
        m=2,
        name=f"Q(b={b:g}, eps={epsilon:g})",
        n_max=settings.DYNAMIC_N_MAX,
    )
    if estimate_constants:
        mid = -0.5 * (lo + hi) * b
        family.lam = estimate_lambda(family.at(mid), samples=32)
        family.nu = estimate_nu(family, [mid], h=1e-4 * b)
        circlemap_logger.info("[DYNAMICS_FAMILY] %s lambda=%.6g nu=%.6g", family.name, family.lam, family.nu)
    return family
