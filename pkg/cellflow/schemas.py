"""
Pydantic схемы конфигурации запуска CLI
"""
from fractions import Fraction
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

COMMANDS = ("simulate", "staircase", "tongues", "chess", "rotnum", "hausdorff")


class RangeSpec(BaseModel):
    """Диапазон lo:hi:count, оба конца включены"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    lo: float
    hi: float
    count: int = 1

    @model_validator(mode="before")
    @classmethod
    def parse_text(cls, value):
        if isinstance(value, str):
            parts = value.split(":")
            if len(parts) not in (2, 3):
                raise ValueError(f"Диапазон должен иметь вид lo:hi[:count], получено '{value}'")
            lo, hi = float(parts[0]), float(parts[1])
            count = int(parts[2]) if len(parts) == 3 else 2
            return {"lo": lo, "hi": hi, "count": count}
        if isinstance(value, (list, tuple)):
            return dict(zip(("lo", "hi", "count"), value))
        return value

    @model_validator(mode="after")
    def check_nonempty(self):
        if self.count < 1:
            raise ValueError("count должно быть >= 1")
        if self.hi < self.lo or (self.count > 1 and self.hi == self.lo):
            raise ValueError(f"Пустой диапазон {self.lo}:{self.hi}:{self.count}")
        return self

    def text(self) -> str:
        return f"{self.lo!r}:{self.hi!r}:{self.count}"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["simulate", "staircase", "tongues", "chess", "rotnum", "hausdorff"]

    # параметры силы
    a: Optional[float] = None
    b: Optional[float] = None
    eps: float = 0.0
    alpha: Optional[RangeSpec] = None
    eps_range: Optional[RangeSpec] = None

    # свипы
    model: Literal["dynamics", "flat-rotation"] = "dynamics"
    q_cap: Optional[int] = None
    targets: List[str] = []
    threads: Optional[int] = None

    # simulate
    t_end: float = 2000.0
    reduced: bool = False
    start: Optional[List[float]] = None

    # chess
    n_turns: int = 30

    # rotnum / hausdorff
    flat_fraction: float = 0.25
    slope: Optional[float] = None
    s: Optional[float] = None
    n_max_cover: int = 8
    certificate: bool = True

    # вывод
    out: str = "out"
    xlsx: bool = False
    svg: bool = True

    # переопределения допусков
    rtol: Optional[float] = None
    atol: Optional[float] = None
    event_tol: Optional[float] = None
    cert_tol: Optional[float] = None
    plateau_tol: Optional[float] = None
    q_max: Optional[int] = None
    n_max: Optional[int] = None

    @field_validator("rtol", "atol", "event_tol", "cert_tol", "plateau_tol")
    @classmethod
    def positive_tolerance(cls, v):
        if v is not None and not v > 0:
            raise ValueError("Допуск должен быть положительным")
        return v

    @field_validator("q_cap", "q_max", "n_max", "threads", "n_turns", "n_max_cover")
    @classmethod
    def positive_count(cls, v):
        if v is not None and v < 1:
            raise ValueError("Значение должно быть >= 1")
        return v

    @field_validator("b")
    @classmethod
    def positive_b(cls, v):
        if v is not None and not v > 0:
            raise ValueError("b должно быть > 0")
        return v

    @field_validator("eps")
    @classmethod
    def nonnegative_eps(cls, v):
        if v < 0:
            raise ValueError("eps должно быть >= 0")
        return v

    @field_validator("t_end")
    @classmethod
    def positive_t_end(cls, v):
        if not v > 0:
            raise ValueError("t_end должно быть > 0")
        return v

    @field_validator("targets")
    @classmethod
    def rational_targets(cls, v):
        for item in v:
            try:
                Fraction(item)
            except ZeroDivisionError as e:
                raise ValueError(f"Нулевой знаменатель в цели {item}") from e
        return v

    @field_validator("start")
    @classmethod
    def start_shape(cls, v):
        if v is not None and len(v) not in (2, 4):
            raise ValueError("start: 2 (x, y) или 4 (x, y, vx, vy) числа")
        return v

    def target_fractions(self) -> List[Fraction]:
        return [Fraction(t) for t in self.targets]

    def canonical(self) -> dict:
        """Полностью разрешённая конфигурация для эха в stdout"""
        data = self.model_dump()
        for key in ("alpha", "eps_range"):
            if data[key] is not None:
                data[key] = getattr(self, key).text()
        return data
