"""Обработчики подкоманд CLI"""
from . import chess, hausdorff, rotnum, simulate, staircase, tongues

HANDLERS = {
    "simulate": simulate.run,
    "staircase": staircase.run,
    "tongues": tongues.run,
    "chess": chess.run,
    "rotnum": rotnum.run,
    "hausdorff": hausdorff.run,
}
