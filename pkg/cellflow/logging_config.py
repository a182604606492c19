# -*- coding: utf-8 -*-
"""Настройки логирования"""
import logging
import os

from cellflow.config import settings

LOG_DIR = settings.LOG_DIR
os.makedirs(LOG_DIR, exist_ok=True)

# Один общий FileHandler на все логгеры пакета
file_path = os.path.join(LOG_DIR, "cellflow.log")
file_handler = logging.FileHandler(file_path, encoding="utf-8")
formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s")
file_handler.setFormatter(formatter)


def _get_logger(name: str, level=None):
    logger = logging.getLogger(name)
    logger.setLevel(level or getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO))
    # добавляем хендлер один раз
    if all(getattr(h, "baseFilename", None) != file_handler.baseFilename for h in logger.handlers):
        logger.addHandler(file_handler)
    return logger


app_logger = _get_logger("cellflow")
hamflow_logger = _get_logger("cellflow.hamflow")
inertial_logger = _get_logger("cellflow.inertial")
poincare_logger = _get_logger("cellflow.poincare")
circlemap_logger = _get_logger("cellflow.circlemap")
sweep_logger = _get_logger("cellflow.sweep")
cli_logger = _get_logger("cellflow.cli")
