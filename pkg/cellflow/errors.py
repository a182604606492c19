"""
Исключения пакета.
Каждое исключение знает свой код выхода CLI.
"""


class CellflowError(Exception):
    exit_code = 5


# Численные ошибки (код 5)

class DomainError(CellflowError, ValueError):
    """Параметры вне области определения формулы."""


class NonConvergence(CellflowError):
    """Метод Ньютона не сошёлся."""


class OnLineError(CellflowError):
    """Прямая правила шахматной доски проходит через узел решётки."""


class StepFailure(CellflowError):
    """Интегратор не смог сделать шаг."""


class NoEvent(CellflowError):
    """Траектория не пересекла запрошенное сечение до t_end."""


class NotClosed(CellflowError):
    """Линия уровня не замыкается внутри ячейки."""


class SeparatrixHit(CellflowError):
    """Траектория зашла в малую окрестность седла."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class TopologyError(CellflowError):
    """Фазовый портрет не совпадает с ожидаемым (сепаратриса не дошла до сечения)."""


class UnboundedDetectionFailure(CellflowError):
    """Смещение слишком мало, чтобы оценить наклон дрейфа."""


class NotFound(CellflowError):
    """Плато с нужным рациональным числом вращения не найдено."""


# Ошибки интерфейса

class UsageError(CellflowError):
    exit_code = 2


class ConfigValidationError(CellflowError):
    exit_code = 3


class IoError(CellflowError):
    exit_code = 4
