"""
Доменные типы: параметры, седла, пути шахматной доски, поля, отображения окружности
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from cellflow.errors import DomainError

ODD = "odd"
EVEN = "even"

LEFT = "L"
RIGHT = "R"

RATIONAL = "rational"
INTERVAL = "interval"


@dataclass(frozen=True)
class ForcingParams:
    """Тройка (a, b, epsilon): вертикальная и горизонтальная компоненты силы и инерция"""
    a: float
    b: float
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "epsilon"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"Параметр {name} должен быть конечным")
        if self.b <= 0:
            raise DomainError(f"Требуется b > 0, получено b={self.b}")
        if self.epsilon < 0:
            raise DomainError(f"Требуется epsilon >= 0, получено epsilon={self.epsilon}")

    @property
    def alpha(self) -> float:
        return self.a / self.b

    @property
    def s(self) -> float:
        """Параметр семейства Q_s (s = -a)"""
        return -self.a

    def require_positive_a(self) -> "ForcingParams":
        if self.a <= 0:
            raise DomainError(f"Требуется a > 0, получено a={self.a}")
        return self

    def with_a(self, a: float) -> "ForcingParams":
        return ForcingParams(a=a, b=self.b, epsilon=self.epsilon)

    def with_epsilon(self, epsilon: float) -> "ForcingParams":
        return ForcingParams(a=self.a, b=self.b, epsilon=epsilon)

    @classmethod
    def from_alpha(cls, alpha: float, b: float, epsilon: float = 0.0) -> "ForcingParams":
        return cls(a=alpha * b, b=b, epsilon=epsilon)

    @classmethod
    def from_angle(cls, degrees: float, magnitude: float, epsilon: float = 0.0) -> "ForcingParams":
        """Сила |(b, a)| = magnitude под углом degrees к горизонтали"""
        phi = math.radians(degrees)
        return cls(a=magnitude * math.sin(phi), b=magnitude * math.cos(phi), epsilon=epsilon)


def node_point(node: Tuple[int, int]) -> Tuple[float, float]:
    """Координаты узла решётки (pi/2 + pi*k1, pi/2 + pi*k2)"""
    k1, k2 = node
    return (math.pi / 2 + math.pi * k1, math.pi / 2 + math.pi * k2)


def node_parity(node: Tuple[int, int]) -> str:
    return ODD if (node[0] + node[1]) % 2 else EVEN


@dataclass(frozen=True)
class SaddlePoint:
    position: Tuple[float, float]
    parity: str
    h_value: float
    grid_node: Tuple[int, int]


@dataclass
class ChessPath:
    vertices: List[Tuple[int, int]]
    turns: List[str]
    h0: float
    lines: Tuple[float, float]

    def __post_init__(self):
        for (i1, j1), (i2, j2) in zip(self.vertices, self.vertices[1:]):
            if abs(i1 - i2) + abs(j1 - j2) != 1:
                raise DomainError(f"Вершины {(i1, j1)} и {(i2, j2)} не соседние")

    def points(self) -> np.ndarray:
        return np.array([node_point(v) for v in self.vertices], dtype=float)


@dataclass(frozen=True)
class PhaseState4:
    x: float
    y: float
    vx: float
    vy: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.vx, self.vy)):
            raise DomainError("Состояние должно быть конечным")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)


# evaluator(x, y) -> (vector, divergence, jacobian)
FieldEvaluator = Callable[[float, float], Tuple[np.ndarray, float, np.ndarray]]

HAMILTONIAN = "hamiltonian"
REDUCED = "reduced"
CUSTOM = "custom"


@dataclass(frozen=True)
class PlanarField:
    evaluator: FieldEvaluator
    params: Optional[ForcingParams]
    kind: str = CUSTOM

    def vector(self, x: float, y: float) -> np.ndarray:
        return self.evaluator(x, y)[0]

    def divergence(self, x: float, y: float) -> float:
        return self.evaluator(x, y)[1]

    def jacobian(self, x: float, y: float) -> np.ndarray:
        return self.evaluator(x, y)[2]

    def rhs(self, t: float, state: np.ndarray) -> np.ndarray:
        return self.evaluator(state[0], state[1])[0]


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n, 2) или (n, 4)

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]


@dataclass
class EventTrace:
    """Пересечения вертикальных сечений вдоль траектории"""
    times: List[float] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    sections: List[float] = field(default_factory=list)
    winding: int = 0
    final_time: float = 0.0
    final_state: Optional[np.ndarray] = None
    div_integral: float = 0.0

    def __post_init__(self):
        for t1, t2 in zip(self.times, self.times[1:]):
            if abs(t2) <= abs(t1):
                raise DomainError("Времена событий должны строго возрастать")


@dataclass(frozen=True)
class TransversalCoord:
    z: float
    k: int = 0

    @property
    def section_x(self) -> float:
        return math.pi * self.k - math.pi / 2

    def to_point(self) -> Tuple[float, float]:
        x = self.section_x
        return (x, x + 2 * math.pi * self.z)

    @classmethod
    def from_point(cls, x: float, y: float) -> "TransversalCoord":
        k = int(round((x + math.pi / 2) / math.pi))
        return cls(z=(y - x) / (2 * math.pi), k=k)


@dataclass(frozen=True)
class ReturnMapSample:
    z_in: float
    z_out: float
    winding: int
    derivative: float
    transit_time: float
    div_integral: float
    v_n_start: float = 0.0
    v_n_end: float = 0.0


@dataclass(frozen=True)
class FlatSpotData:
    spots: Tuple[Tuple[float, float], ...]
    heights: Tuple[float, ...]
    saddle_refs: Tuple[str, ...]
    saddles: Tuple[Tuple[float, float], ...] = ()

    def locate(self, z: float, shrink: float = 0.0) -> Optional[Tuple[int, int]]:
        """Индекс участка j и сдвиг n, если z лежит в I_j + n"""
        return locate_in_arcs(self.spots, z, shrink)


def locate_in_arcs(arcs: Sequence[Tuple[float, float]], x: float, shrink: float = 0.0) -> Optional[Tuple[int, int]]:
    for j, (lo, hi) in enumerate(arcs):
        n = math.floor(x - lo)
        r = x - n
        if lo + shrink <= r <= hi - shrink:
            return j, n
    return None


@dataclass
class FlatSpotCircleMap:
    """
    Монотонное отображение окружности степени один с плоскими участками.

    spots: дуги I_j (lo, hi) в лифте, 0 < hi - lo < 1
    heights: значения лифта на I_j
    branch: лифт вне плоских участков, branch(x + 1) = branch(x) + 1
    """
    spots: List[Tuple[float, float]]
    heights: List[float]
    branch: Callable[[float], float]
    derivative: Optional[Callable[[float], float]] = None
    lam: float = 1.0
    lift_offset: int = 0

    def __post_init__(self):
        if len(self.spots) != len(self.heights) or not self.spots:
            raise DomainError("Нужен хотя бы один плоский участок и высота для каждого")
        for lo, hi in self.spots:
            if not hi >= lo or hi - lo >= 1:
                raise DomainError(f"Некорректная дуга [{lo}, {hi}]")

    @property
    def m(self) -> int:
        return len(self.spots)

    def locate(self, x: float, shrink: float = 0.0) -> Optional[Tuple[int, int]]:
        return locate_in_arcs(self.spots, x, shrink)

    def __call__(self, x: float) -> float:
        hit = self.locate(x)
        if hit is not None:
            j, n = hit
            return self.heights[j] + n + self.lift_offset
        return self.branch(x) + self.lift_offset


@dataclass
class MonotoneFamily:
    generator: Callable[[float], FlatSpotCircleMap]
    s_range: Tuple[float, float]
    nu: float
    lam: float
    m: int
    name: str = "family"
    n_max: Optional[int] = None  # предел итераций интервальной оценки для этого семейства

    def at(self, s: float) -> FlatSpotCircleMap:
        return self.generator(s)


@dataclass(frozen=True)
class RotationResult:
    kind: str
    p: Optional[int] = None
    q: Optional[int] = None
    certificate_spot_index: Optional[int] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    iterations: Optional[int] = None

    def __post_init__(self):
        if self.kind == RATIONAL:
            if self.q is None or self.q < 1 or self.p is None:
                raise DomainError("Рациональный результат требует p и q >= 1")
        elif self.kind == INTERVAL:
            if self.lo is None or self.hi is None or not self.iterations:
                raise DomainError("Интервальный результат требует lo, hi и iterations")
            if self.hi - self.lo > 2.0 / self.iterations + 1e-15:
                raise DomainError("Ширина интервала больше 2/iterations")
        else:
            raise DomainError(f"Неизвестный тип результата: {self.kind}")

    @classmethod
    def rational(cls, p: int, q: int, spot_index: int) -> "RotationResult":
        fr = Fraction(p, q)
        return cls(kind=RATIONAL, p=fr.numerator, q=fr.denominator, certificate_spot_index=spot_index,
                   lo=float(fr), hi=float(fr))

    @classmethod
    def interval(cls, lo: float, hi: float, iterations: int) -> "RotationResult":
        return cls(kind=INTERVAL, lo=lo, hi=hi, iterations=iterations)

    @property
    def is_rational(self) -> bool:
        return self.kind == RATIONAL

    @property
    def fraction(self) -> Optional[Fraction]:
        return Fraction(self.p, self.q) if self.is_rational else None

    @property
    def value(self) -> float:
        if self.is_rational:
            return self.p / self.q
        return 0.5 * (self.lo + self.hi)


STATUS_OK = "ok"


@dataclass(frozen=True)
class StaircaseRow:
    alpha: float
    s: float
    rotation: Optional[RotationResult]
    m: float
    status: str = STATUS_OK

    @property
    def m_fraction(self) -> Optional[Fraction]:
        if self.rotation is None or not self.rotation.is_rational:
            return None
        return 1 - 2 * self.rotation.fraction


@dataclass
class StaircaseTable:
    rows: List[StaircaseRow]
    b: float
    epsilon: float
    resolution: int
    plateaus: List[Tuple[Fraction, float, float]] = field(default_factory=list)
    coverage: float = 0.0

    def ok_rows(self) -> List[StaircaseRow]:
        return [r for r in self.rows if r.status == STATUS_OK]


@dataclass
class TongueRegion:
    target: Fraction  # наклон дрейфа m = p/q
    boundary: List[Tuple[float, float, float]] = field(default_factory=list)  # (eps, alpha_lo, alpha_hi)
    area: float = 0.0
    components: int = 0
    interior: List[Tuple[float, float]] = field(default_factory=list)

    def width_at(self, epsilon: float) -> float:
        for eps, lo, hi in self.boundary:
            if eps == epsilon:
                return hi - lo
        return 0.0
