import math
from fractions import Fraction

import numpy as np
import pytest

from cellflow.config import settings
from cellflow.errors import DomainError, NotFound
from cellflow.models import INTERVAL, RATIONAL
from cellflow.services.circlemap_service import (
    brute_force_rotation,
    complement_intervals,
    cover_CN,
    cover_diameter,
    estimate_lambda,
    estimate_nu,
    hausdorff_estimate,
    hausdorff_sums,
    is_locked,
    make_boyd_family,
    make_flat_rotation_family,
    plateau_bounds,
    psi_N,
    rotation_number,
    steepness_scan,
    verify_certificate,
)


@pytest.fixture()
def boyd():
    return make_boyd_family(0.25, 4.0 / 3.0)


@pytest.fixture()
def short_iterations(monkeypatch):
    monkeypatch.setattr(settings, "N_MAX", 2000)


def test_family_validation():
    with pytest.raises(DomainError):
        make_boyd_family(0.25, 2.0)
    with pytest.raises(DomainError):
        make_boyd_family(0.0, 1.0)
    with pytest.raises(DomainError):
        make_flat_rotation_family(1.0)


def test_boyd_map_degree_one(boyd):
    f = boyd.at(0.4)
    for x in (0.1, 0.3, 0.77, -0.6):
        assert f(x + 1) == pytest.approx(f(x) + 1, abs=1e-12)
    assert f(0.1) == pytest.approx(0.4)
    assert f(0.25) == pytest.approx(0.4)
    assert f(1.0) == pytest.approx(1.4)


def test_boyd_plateaus(boyd):
    lo, hi = plateau_bounds(boyd, 0, 1)
    assert lo == pytest.approx(0.0, abs=1e-10)
    assert hi == pytest.approx(0.25, abs=1e-10)
    lo, hi = plateau_bounds(boyd, 1, 2)
    assert lo == pytest.approx(4 / 7, abs=1e-10)
    assert hi == pytest.approx(19 / 28, abs=1e-10)


def test_boyd_rotation_numbers(boyd, short_iterations):
    zero = rotation_number(boyd.at(0.1))
    assert zero.kind == RATIONAL
    assert zero.fraction == 0
    half = rotation_number(boyd.at(0.625))
    assert (half.p, half.q) == (1, 2)
    assert verify_certificate(boyd.at(0.625), half)
    # плато rho = 1 вырождено в точку s = 1, сертификата нет
    full = rotation_number(boyd.at(1.0))
    assert full.kind == INTERVAL
    assert full.value == pytest.approx(1.0)


def test_interval_fallback_width(boyd):
    result = rotation_number(boyd.at(0.5), certificate=False, n_max=10000)
    assert result.kind == INTERVAL
    assert result.hi - result.lo <= 2e-4
    assert not verify_certificate(boyd.at(0.5), result)


def test_certificate_agrees_with_iteration(boyd):
    rng = np.random.default_rng(7)
    for s in rng.uniform(0.0, 1.0, 100):
        f = boyd.at(float(s))
        result = rotation_number(f, n_max=2000)
        bounds = brute_force_rotation(f, 2000)
        assert bounds.lo - 1e-12 <= result.value <= bounds.hi + 1e-12
        if result.is_rational:
            assert verify_certificate(f, result)


def test_rotation_monotone_in_parameter(boyd):
    values = [rotation_number(boyd.at(float(s)), n_max=2000).value for s in np.linspace(0.0, 1.0, 81)]
    assert all(v2 >= v1 - 1e-3 for v1, v2 in zip(values, values[1:]))
    assert values[0] == 0.0
    assert values[-1] == pytest.approx(1.0)


def test_rigid_rotation_has_no_certificate():
    f = make_flat_rotation_family(0.0).at(0.3)
    result = rotation_number(f, n_max=2000)
    assert result.kind == INTERVAL
    assert result.value == pytest.approx(0.3, abs=1e-3)


def test_is_locked(boyd):
    assert is_locked(boyd, 0.6, Fraction(1, 2))
    assert not is_locked(boyd, 0.6, Fraction(0))
    assert not is_locked(boyd, 0.0, Fraction(0))


def test_missing_plateau(boyd):
    with pytest.raises(NotFound):
        plateau_bounds(boyd, 1, 2, bracket=(0.0, 0.25))


def test_psi_values_and_growth(boyd):
    assert psi_N(boyd, 0.3, 1) == pytest.approx(0.3)
    assert psi_N(boyd, 0.3, 2) == pytest.approx(boyd.at(0.3)(0.3))
    h = 1e-6
    slope = (psi_N(boyd, 0.3 + h, 2) - psi_N(boyd, 0.3 - h, 2)) / (2 * h)
    assert slope == pytest.approx(7 / 3, rel=1e-6)
    assert slope >= boyd.nu * boyd.lam
    with pytest.raises(DomainError):
        psi_N(boyd, 0.3, 0)


def test_first_cover_is_one_gap(boyd, short_iterations):
    plateaus, gaps, sums = cover_CN(boyd, 1)
    assert len(plateaus) == 1
    assert len(gaps) == 1
    assert gaps[0][0] == pytest.approx(0.25, abs=1e-9)
    assert gaps[0][1] == pytest.approx(1.0)
    assert sums[1.0] == pytest.approx(0.75, abs=1e-9)
    assert cover_diameter(gaps) == pytest.approx(0.75, abs=1e-9)


def test_complement_and_sums():
    gaps = complement_intervals((0.0, 1.0), [(0.5, 0.7), (0.1, 0.2), (0.0, 1e-13)])
    assert gaps == [(1e-13, 0.1), (0.2, 0.5), (0.7, 1.0)]
    sums = hausdorff_sums([(0.0, 0.25), (0.5, 0.75)], exponents=(1.0, 0.5))
    assert sums[1.0] == pytest.approx(0.5)
    assert sums[0.5] == pytest.approx(1.0)
    assert hausdorff_sums([])[1.0] == 0.0


def test_hausdorff_covers_shrink(short_iterations):
    family = make_boyd_family(2.0 / 3.0, 3.0)
    estimate = hausdorff_estimate(family, 6)
    m1 = [r["m_d"] for r in estimate["rows"] if r["d"] == 1.0]
    diams = [r["diam"] for r in estimate["rows"] if r["d"] == 1.0]
    assert len(m1) == 6
    assert all(b < a for a, b in zip(m1, m1[1:]))
    slope = np.polyfit(np.arange(1, 7), np.log(diams), 1)[0]
    assert slope < -0.5 * math.log(3.0)
    assert estimate["lambda"] == 3.0
    with pytest.raises(DomainError):
        hausdorff_estimate(family, 2)


def test_steepness_near_plateau_edge(boyd, short_iterations):
    plateau = plateau_bounds(boyd, 0, 1)
    scan = steepness_scan(boyd, plateau, "right", [1e-2, 1e-3, 1e-4, 1e-5])
    assert scan["q"] == 1
    assert all(r["bound_holds"] for r in scan["rows"])
    assert scan["c_spread"] < 2
    assert scan["c"] > scan["D"]
    with pytest.raises(DomainError):
        steepness_scan(boyd, plateau, "right", [1e-3, 1e-2])
    with pytest.raises(DomainError):
        steepness_scan(boyd, plateau, "up", [1e-3])


def test_family_constants(boyd):
    assert estimate_lambda(boyd.at(0.3)) == pytest.approx(4 / 3)
    assert estimate_nu(boyd, [0.3, 0.6]) == pytest.approx(1.0)
