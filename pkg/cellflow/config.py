from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="CELLFLOW_", extra="ignore")

    # Логи
    LOG_DIR: str = "logs"
    LOG_LEVEL: str = "INFO"

    # Параллелизм свипов (переменная окружения CELLFLOW_THREADS)
    THREADS: int = 1

    # Интегратор
    RTOL: float = 1e-10
    ATOL: float = 1e-12
    EVENT_TOL: float = 1e-12
    MIN_EPSILON: float = 1e-4  # ниже этого 4D-система слишком жёсткая для явного метода

    # Седла и правило шахматной доски
    SADDLE_NEWTON_TOL: float = 1e-12
    SADDLE_MAX_ITER: int = 50
    CHESS_MAX_FORCING: float = 0.1  # |a|, |b| для которых правило проверено
    ON_LINE_TOL: float = 1e-9

    # Сепаратрисы и плоские участки
    SEPARATRIX_OFFSET: float = 1e-6
    SADDLE_BALL: float = 1e-5
    DISCONTINUITY_WIDTH: float = 1e-10
    SHOOT_TIME_FACTOR: float = 10.0  # предел времени пристрелки = фактор / b
    REFINE_HEIGHTS: bool = True  # бисекция высот b_j в семействе из динамики

    # Числа вращения
    CERT_TOL: float = 1e-12
    PLATEAU_TOL: float = 1e-12
    PLATEAU_SEARCH_RES: float = 1e-6
    Q_MAX: int = 200
    N_MAX: int = 100000
    DYNAMIC_N_MAX: int = 400  # для семейства из динамики каждая итерация = решение ОДУ
    Q_CAP: int = 12


settings = Settings()
