"""
Общие помощники обработчиков команд
"""
import os
import time
from typing import Dict, Optional

import pandas as pd

from cellflow.errors import UsageError
from cellflow.models import ForcingParams
from cellflow.schemas import RunConfig
from cellflow.services import export_service


def require(config: RunConfig, *names: str):
    missing = [n for n in names if getattr(config, n) in (None, [])]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"Команде {config.command} нужны параметры: {flags}")


def forcing(config: RunConfig) -> ForcingParams:
    require(config, "a", "b")
    return ForcingParams(a=config.a, b=config.b, epsilon=config.eps)


class Output:
    """Файлы одной команды в каталоге --out"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.directory = export_service.ensure_dir(config.out)
        self.started = time.monotonic()
        self.files = []

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    def csv(self, frame: pd.DataFrame, name: str):
        self.files.append(export_service.write_csv(frame, self.path(name)))

    def json(self, payload: Dict[str, object], name: str, extra_meta: Optional[Dict[str, object]] = None):
        meta = export_service.run_metadata(time.monotonic() - self.started, extra_meta)
        document = {"config": self.config.canonical(), "metadata": meta, "result": payload}
        self.files.append(export_service.write_json(document, self.path(name)))

    def xlsx(self, frames: Dict[str, pd.DataFrame], name: str):
        if self.config.xlsx:
            self.files.append(export_service.write_xlsx(frames, self.path(name)))

    def svg(self, render, name: str, *args, **kwargs):
        if self.config.svg:
            self.files.append(render(*args, path=self.path(name), **kwargs))

    def summary(self, **values) -> Dict[str, object]:
        return {"files": list(self.files), **values}
