"""Команда hausdorff: покрытия C_N и суммы m_d"""
import pandas as pd

from cellflow.schemas import RunConfig
from cellflow.services.circlemap_service import hausdorff_estimate, make_boyd_family

from .common import Output


def run(config: RunConfig) -> dict:
    slope = config.slope if config.slope is not None else 1.0 / (1.0 - config.flat_fraction)
    family = make_boyd_family(config.flat_fraction, slope)
    estimate = hausdorff_estimate(family, config.n_max_cover)
    frame = pd.DataFrame(estimate["rows"], columns=["d", "N", "m_d", "diam"])
    out = Output(config)
    out.csv(frame, "hausdorff.csv")
    slopes = {str(d): v for d, v in estimate["slopes"].items()}
    out.json({"family": family.name, "lambda": family.lam, "slopes": slopes, "rows": estimate["rows"]},
             "hausdorff.json")
    out.xlsx({"hausdorff": frame}, "hausdorff.xlsx")
    return out.summary(slopes=slopes)
