"""Команда rotnum: число вращения отображения Бойда или Q в одной точке"""
from cellflow.config import settings
from cellflow.schemas import RunConfig
from cellflow.services.circlemap_service import make_boyd_family, make_dynamics_family, rotation_number
from cellflow.services.farey import closest_fraction
from cellflow.services.poincare_service import shooting_sensitivity, slope_from_rotation

from .common import Output, forcing, require


def _target_map(config: RunConfig):
    if config.a is not None or config.b is not None:
        params = forcing(config)
        family = make_dynamics_family(params.b, params.epsilon, (params.alpha, params.alpha))
        return family.at(params.s), family, params
    require(config, "s")
    slope = config.slope if config.slope is not None else 1.0 / (1.0 - config.flat_fraction)
    family = make_boyd_family(config.flat_fraction, slope)
    return family.at(config.s), family, None


def run(config: RunConfig) -> dict:
    circle_map, family, params = _target_map(config)
    n_max = config.n_max or family.n_max
    q_max = config.q_max or settings.Q_MAX
    rotation = rotation_number(circle_map, q_max=q_max, n_max=n_max, certificate=config.certificate)
    result = {
        "family": family.name,
        "kind": rotation.kind,
        "p": rotation.p,
        "q": rotation.q,
        "certificate_spot_index": rotation.certificate_spot_index,
        "rho_lo": rotation.lo,
        "rho_hi": rotation.hi,
        "iterations": rotation.iterations,
        "spots": [list(s) for s in circle_map.spots],
        "heights": list(circle_map.heights),
    }
    if not rotation.is_rational:
        # без сертификата: ближайшая дробь к середине интервала, только для справки
        p, q = closest_fraction(rotation.value, q_max)
        result["nearest_fraction"] = f"{p}/{q}"
    if params is not None:
        result["m"] = slope_from_rotation(rotation.value)
        if params.epsilon > 0:
            result["shooting_shift"] = shooting_sensitivity(params)
    out = Output(config)
    out.json(result, "rotnum.json")
    return out.summary(kind=rotation.kind, p=rotation.p, q=rotation.q, rho_lo=rotation.lo, rho_hi=rotation.hi)
