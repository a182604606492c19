"""Инерционные частицы в ячеистом потоке: отображения первого возвращения и лестница наклонов дрейфа"""
from cellflow.version import __version__

__all__ = ["__version__"]
