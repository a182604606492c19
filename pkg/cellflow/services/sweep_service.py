"""
Свипы по параметрам: лестница m(alpha) и языки Арнольда в плоскости (alpha, eps).
Строки независимы, результаты собираются по индексу.
"""
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from cellflow.config import settings
from cellflow.errors import CellflowError, DomainError
from cellflow.logging_config import sweep_logger
from cellflow.models import STATUS_OK, MonotoneFamily, StaircaseRow, StaircaseTable, TongueRegion
from cellflow.services.circlemap_service import (
    is_locked,
    make_dynamics_family,
    make_flat_rotation_family,
    rotation_number,
)

DYNAMICS = "dynamics"
FLAT_ROTATION = "flat-rotation"
MAP_FACTORIES = (DYNAMICS, FLAT_ROTATION)

# доля плоского участка модели на единицу eps
FLAT_ROTATION_GAIN = 5.0

REFINE_DEPTH = 10
MIN_RESOLUTION = 100
MIN_GRID = (32, 16)


def parallel_map(fn: Callable, items: Iterable, workers: Optional[int] = None) -> list:
    """map с сохранением порядка; при workers > 1 через пул процессов"""
    workers = settings.THREADS if workers is None else workers
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def flat_rotation_fraction(epsilon: float) -> float:
    return min(FLAT_ROTATION_GAIN * epsilon, 0.9)


def alpha_to_shift(alpha: float, flat_fraction: float = 0.0) -> float:
    """
    Сдвиг модели: rho = (1 - alpha) / 2 при eps = 0,
    плато m = 1 симметрично вокруг alpha = 1.
    """
    return 0.5 * (1.0 - alpha) + 0.5 * flat_fraction


def build_family(map_factory: str, b: float, epsilon: float, alpha_range: Tuple[float, float]) -> MonotoneFamily:
    if map_factory == DYNAMICS:
        return make_dynamics_family(b, epsilon, alpha_range)
    if map_factory == FLAT_ROTATION:
        return make_flat_rotation_family(flat_rotation_fraction(epsilon))
    raise DomainError(f"Неизвестная модель отображения: {map_factory}")


def family_parameter(map_factory: str, alpha: float, b: float, epsilon: float) -> float:
    """Параметр семейства для данного alpha"""
    if map_factory == DYNAMICS:
        return -alpha * b
    return alpha_to_shift(alpha, flat_rotation_fraction(epsilon))


def default_q_max(map_factory: str) -> int:
    # наклон m = 1 - 2 p/q имеет знаменатель q или q/2
    return 2 * settings.Q_CAP if map_factory == DYNAMICS else settings.Q_MAX


def _staircase_row(task: Tuple[float, float, float, str, int]) -> StaircaseRow:
    alpha, b, epsilon, map_factory, q_max = task
    s = -alpha * b
    try:
        family = build_family(map_factory, b, epsilon, (alpha, alpha))
        rotation = rotation_number(family.at(family_parameter(map_factory, alpha, b, epsilon)), q_max=q_max,
                                   n_max=family.n_max)
    except CellflowError as e:
        sweep_logger.warning("[SWEEP] alpha=%.10g eps=%.6g failed: %s", alpha, epsilon, e)
        return StaircaseRow(alpha=alpha, s=s, rotation=None, m=float("nan"), status=type(e).__name__)
    return StaircaseRow(alpha=alpha, s=s, rotation=rotation, m=1.0 - 2.0 * rotation.value)


def staircase_sweep(
    b: float,
    epsilon: float,
    alpha_range: Tuple[float, float],
    resolution: int,
    map_factory: str = DYNAMICS,
    q_cap: Optional[int] = None,
    workers: Optional[int] = None,
    refine: bool = True,
) -> StaircaseTable:
    """
    Лестница m(alpha) = 1 - 2 rho(Q) на сетке alpha из resolution точек (концы включены).
    Строки с ошибками сохраняются со статусом, свип не прерывается.
    """
    if resolution < MIN_RESOLUTION:
        raise DomainError(f"resolution должно быть >= {MIN_RESOLUTION}: {resolution}")
    lo, hi = alpha_range
    if not lo < hi:
        raise DomainError(f"Пустой диапазон alpha: {alpha_range}")
    if map_factory not in MAP_FACTORIES:
        raise DomainError(f"Неизвестная модель отображения: {map_factory}")
    q_cap = settings.Q_CAP if q_cap is None else q_cap
    q_max = default_q_max(map_factory)
    alphas = np.linspace(lo, hi, resolution)
    started = time.monotonic()
    sweep_logger.info("[SWEEP] staircase b=%.6g eps=%.6g alpha=[%.6g, %.6g] n=%d model=%s",
                      b, epsilon, lo, hi, resolution, map_factory)
    rows = parallel_map(_staircase_row, [(float(a), b, epsilon, map_factory, q_max) for a in alphas], workers)
    table = StaircaseTable(rows=rows, b=b, epsilon=epsilon, resolution=resolution)
    failed = len(rows) - len(table.ok_rows())
    if failed:
        sweep_logger.warning("[SWEEP] %d of %d rows failed", failed, len(rows))
    if refine:
        family = build_family(map_factory, b, epsilon, alpha_range)
        table.plateaus, table.coverage = refine_plateaus(table, q_cap, family, map_factory)
    sweep_logger.info("[SWEEP] staircase done in %.1fs, coverage=%.4f", time.monotonic() - started, table.coverage)
    return table


def _locked_runs(rows: Sequence[StaircaseRow], accept: Callable[[Fraction], bool]) -> List[Tuple[int, int, Fraction]]:
    """Максимальные отрезки подряд идущих строк с одним и тем же рациональным rho"""
    runs = []
    start = None
    for i, row in enumerate(rows):
        fr = row.rotation.fraction if row.status == STATUS_OK and row.rotation is not None else None
        if fr is not None and accept(fr):
            if start is not None and rows[start].rotation.fraction == fr:
                continue
            if start is not None:
                runs.append((start, i - 1, rows[start].rotation.fraction))
            start = i
        elif start is not None:
            runs.append((start, i - 1, rows[start].rotation.fraction))
            start = None
    if start is not None:
        runs.append((start, len(rows) - 1, rows[start].rotation.fraction))
    return runs


def _bisect_alpha(family, map_factory, b, epsilon, inside: float, outside: float, target: Fraction, depth: int) -> float:
    for _ in range(depth):
        mid = 0.5 * (inside + outside)
        try:
            locked = is_locked(family, family_parameter(map_factory, mid, b, epsilon), target)
        except CellflowError:
            locked = False
        if locked:
            inside = mid
        else:
            outside = mid
    return inside


def drift_denominator(rho: Fraction) -> int:
    return (1 - 2 * rho).denominator


def refine_plateaus(
    table: StaircaseTable,
    q_cap: int,
    family: Optional[MonotoneFamily] = None,
    map_factory: str = DYNAMICS,
    depth: int = REFINE_DEPTH,
) -> Tuple[List[Tuple[Fraction, float, float]], float]:
    """
    Плато лестницы с наклоном m = p'/q', q' <= q_cap, уточнённые бисекцией по сертификату
    между крайней строкой плато и соседней. Возвращает (плато в alpha, доля покрытия диапазона).
    """
    rows = table.rows
    if not rows:
        return [], 0.0
    runs = _locked_runs(rows, lambda fr: drift_denominator(fr) <= q_cap)
    plateaus = []
    for first, last, rho in runs:
        lo, hi = rows[first].alpha, rows[last].alpha
        if family is not None:
            if first > 0:
                lo = _bisect_alpha(family, map_factory, table.b, table.epsilon,
                                   lo, rows[first - 1].alpha, rho, depth)
            if last < len(rows) - 1:
                hi = _bisect_alpha(family, map_factory, table.b, table.epsilon,
                                   hi, rows[last + 1].alpha, rho, depth)
        plateaus.append((1 - 2 * rho, lo, hi))
    span = rows[-1].alpha - rows[0].alpha
    covered = sum(hi - lo for _, lo, hi in plateaus)
    coverage = covered / span if span > 0 else 0.0
    sweep_logger.info("[SWEEP] %d plateaus with q <= %d, coverage %.4f", len(plateaus), q_cap, coverage)
    return plateaus, coverage


def monotonicity_violation(table: StaircaseTable) -> float:
    """Наибольшее убывание m между соседними успешными строками (0 для монотонной лестницы)"""
    ms = np.array([r.m for r in table.ok_rows()])
    if len(ms) < 2:
        return 0.0
    return float(max(0.0, -np.min(np.diff(ms))))


def max_jump(table: StaircaseTable) -> float:
    ms = np.array([r.m for r in table.ok_rows()])
    if len(ms) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(ms))))


def tongue_scan(
    b: float,
    alpha_range: Tuple[float, float],
    epsilon_range: Tuple[float, float],
    targets: Sequence[Fraction],
    grid: Tuple[int, int] = (32, 16),
    map_factory: str = DYNAMICS,
    workers: Optional[int] = None,
) -> Tuple[List[TongueRegion], np.ndarray]:
    """
    Языки Арнольда: для каждой цели m = p/q - ширина языка по alpha на каждом eps,
    площадь, число компонент связности на сетке и внутренние точки.

    Returns:
        (языки, матрица статусов/классов сетки: -1 ошибка, 0 не захвачено, k+1 захват целью k)
    """
    n_alpha, n_eps = grid
    if n_alpha < MIN_GRID[0] or n_eps < MIN_GRID[1]:
        raise DomainError(f"Сетка {grid} меньше минимальной {MIN_GRID}")
    alphas = np.linspace(alpha_range[0], alpha_range[1], n_alpha)
    epsilons = np.linspace(epsilon_range[0], epsilon_range[1], n_eps)
    targets = [Fraction(t) for t in targets]
    rho_targets = [(1 - t) / 2 for t in targets]
    sweep_logger.info("[TONGUES] b=%.6g grid=%dx%d targets=%s", b, n_alpha, n_eps, [str(t) for t in targets])

    q_max = default_q_max(map_factory)
    tasks = [(float(a), b, float(eps), map_factory, q_max) for eps in epsilons for a in alphas]
    rows = parallel_map(_staircase_row, tasks, workers)

    labels = np.zeros((n_eps, n_alpha), dtype=int)
    for idx, row in enumerate(rows):
        i, j = divmod(idx, n_alpha)
        if row.status != STATUS_OK:
            labels[i, j] = -1
        elif row.rotation.is_rational and row.rotation.fraction in rho_targets:
            labels[i, j] = rho_targets.index(row.rotation.fraction) + 1

    regions = []
    for k, (target, rho) in enumerate(zip(targets, rho_targets)):
        mask = labels == k + 1
        region = TongueRegion(target=target)
        _, region.components = ndimage.label(mask)
        widths = []
        for i, eps in enumerate(epsilons):
            cols = np.flatnonzero(mask[i])
            if len(cols) == 0:
                widths.append(0.0)
                continue
            family = build_family(map_factory, b, float(eps), alpha_range)
            lo, hi = float(alphas[cols[0]]), float(alphas[cols[-1]])
            if cols[0] > 0:
                lo = _bisect_alpha(family, map_factory, b, float(eps),
                                   lo, float(alphas[cols[0] - 1]), rho, REFINE_DEPTH)
            if cols[-1] < n_alpha - 1:
                hi = _bisect_alpha(family, map_factory, b, float(eps),
                                   hi, float(alphas[cols[-1] + 1]), rho, REFINE_DEPTH)
            region.boundary.append((float(eps), lo, hi))
            region.interior.extend((float(alphas[c]), float(eps)) for c in cols)
            widths.append(hi - lo)
        region.area = float(trapezoid(widths, epsilons)) if n_eps > 1 else 0.0
        sweep_logger.info("[TONGUES] m=%s area=%.6g components=%d", target, region.area, region.components)
        regions.append(region)
    return regions, labels

