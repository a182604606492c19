"""
Точка входа CLI: python -m cellflow <команда> [параметры]

Коды выхода: 0 успех, 2 ошибка вызова, 3 ошибка конфигурации, 4 ввод-вывод, 5 численная ошибка.
"""
import argparse
import json
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from cellflow.config import settings
from cellflow.errors import CellflowError, ConfigValidationError, IoError, UsageError
from cellflow.logging_config import cli_logger
from cellflow.schemas import COMMANDS, RunConfig
from cellflow.version import __version__

# ключ RunConfig -> настройка Settings
SETTINGS_OVERRIDES = {
    "rtol": "RTOL",
    "atol": "ATOL",
    "event_tol": "EVENT_TOL",
    "cert_tol": "CERT_TOL",
    "plateau_tol": "PLATEAU_TOL",
    "q_max": "Q_MAX",
    "n_max": "N_MAX",
    "q_cap": "Q_CAP",
    "threads": "THREADS",
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse, который не завершает процесс сам, а поднимает UsageError"""

    def error(self, message):
        raise UsageError(message)

    def exit(self, status=0, message=None):
        if status:
            raise UsageError(message or "")
        if message:
            sys.stdout.write(message)
        raise SystemExit(0)


def _csv_list(cast):
    def parse(text: str):
        return [cast(item) for item in text.split(",") if item.strip()]
    return parse


def _add_common(parser: argparse.ArgumentParser):
    # default=SUPPRESS: в namespace попадают только явно заданные флаги
    s = argparse.SUPPRESS
    parser.add_argument("--config", default=s, help="JSON-файл конфигурации")
    parser.add_argument("--a", type=float, default=s)
    parser.add_argument("--b", type=float, default=s)
    parser.add_argument("--eps", type=float, default=s)
    parser.add_argument("--out", default=s, help="каталог результатов")
    parser.add_argument("--xlsx", action="store_true", default=s, help="продублировать таблицы в XLSX")
    parser.add_argument("--no-svg", dest="svg", action="store_false", default=s)
    parser.add_argument("--threads", type=int, default=s)
    parser.add_argument("--rtol", type=float, default=s)
    parser.add_argument("--atol", type=float, default=s)
    parser.add_argument("--event-tol", dest="event_tol", type=float, default=s)
    parser.add_argument("--cert-tol", dest="cert_tol", type=float, default=s)
    parser.add_argument("--plateau-tol", dest="plateau_tol", type=float, default=s)
    parser.add_argument("--q-max", dest="q_max", type=int, default=s)
    parser.add_argument("--n-max", dest="n_max", type=int, default=s)


def build_parser() -> ArgumentParser:
    s = argparse.SUPPRESS
    parser = ArgumentParser(prog="cellflow", description="Инерционные частицы в ячеистом потоке")
    parser.add_argument("--version", action="version", version=f"cellflow {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)

    simulate = sub.add_parser("simulate", help="траектория и наклон дрейфа")
    _add_common(simulate)
    simulate.add_argument("--t-end", dest="t_end", type=float, default=s)
    simulate.add_argument("--reduced", action="store_true", default=s, help="уравнение на медленном многообразии")
    simulate.add_argument("--start", type=_csv_list(float), default=s, help="x,y или x,y,vx,vy")

    staircase = sub.add_parser("staircase", help="лестница m(alpha)")
    _add_common(staircase)
    staircase.add_argument("--alpha", default=s, help="lo:hi:count")
    staircase.add_argument("--model", default=s, help="dynamics или flat-rotation")
    staircase.add_argument("--q-cap", dest="q_cap", type=int, default=s)

    tongues = sub.add_parser("tongues", help="языки Арнольда")
    _add_common(tongues)
    tongues.add_argument("--alpha", default=s, help="lo:hi:count")
    tongues.add_argument("--eps-range", dest="eps_range", default=s, help="lo:hi:count")
    tongues.add_argument("--targets", type=_csv_list(str), default=s, help="наклоны m через запятую, например 1,1/2")
    tongues.add_argument("--model", default=s)

    chess = sub.add_parser("chess", help="правило шахматной доски")
    _add_common(chess)
    chess.add_argument("--n-turns", dest="n_turns", type=int, default=s)
    chess.add_argument("--start", type=_csv_list(float), default=s, help="x,y")

    rotnum = sub.add_parser("rotnum", help="число вращения")
    _add_common(rotnum)
    rotnum.add_argument("--s", type=float, default=s)
    rotnum.add_argument("--flat-fraction", dest="flat_fraction", type=float, default=s)
    rotnum.add_argument("--slope", type=float, default=s)
    rotnum.add_argument("--no-certificate", dest="certificate", action="store_false", default=s)

    hausdorff = sub.add_parser("hausdorff", help="покрытия C_N")
    _add_common(hausdorff)
    hausdorff.add_argument("--flat-fraction", dest="flat_fraction", type=float, default=s)
    hausdorff.add_argument("--slope", type=float, default=s)
    hausdorff.add_argument("--n-max-cover", dest="n_max_cover", type=int, default=s)
    return parser


def load_config_file(path: str) -> Dict[str, object]:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise IoError(f"Не удалось прочитать конфигурацию {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"Конфигурация {path} не является JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigValidationError(f"Конфигурация {path} должна быть объектом JSON")
    return data


def parse_and_validate(argv: Optional[List[str]] = None) -> RunConfig:
    """Флаги поверх файла конфигурации; лишние ключи отклоняются"""
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command", None)
    if command is None:
        raise UsageError(f"Укажите команду: {', '.join(COMMANDS)}")
    merged: Dict[str, object] = {}
    config_path = args.pop("config", None)
    if config_path:
        merged.update(load_config_file(config_path))
        if merged.get("command", command) != command:
            raise ConfigValidationError(f"В конфигурации команда {merged['command']}, а вызвана {command}")
    merged.update(args)
    merged["command"] = command
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigValidationError(f"Некорректная конфигурация: {e}") from e


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.canonical(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def apply_overrides(config: RunConfig):
    for key, name in SETTINGS_OVERRIDES.items():
        value = getattr(config, key)
        if value is not None:
            setattr(settings, name, value)


def main(argv: Optional[List[str]] = None) -> int:
    from cellflow.commands import HANDLERS

    try:
        config = parse_and_validate(argv)
        print(canonical_json(config))
        apply_overrides(config)
        cli_logger.info("[CLI] %s started", config.command)
        summary = HANDLERS[config.command](config)
        for path in summary.get("files", []):
            print(f"[OK] {path}")
        cli_logger.info("[CLI] %s finished", config.command)
        return 0
    except CellflowError as e:
        cli_logger.warning("[CLI] %s: %s", type(e).__name__, e)
        print(f"Ошибка: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        cli_logger.exception("[CLI] unexpected failure: %s", e)
        print(f"Ошибка: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
