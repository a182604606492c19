import math
from fractions import Fraction

import numpy as np
import pytest

from cellflow.config import settings
from cellflow.errors import DomainError
from cellflow.models import STATUS_OK
from cellflow.services.sweep_service import (
    DYNAMICS,
    FLAT_ROTATION,
    _staircase_row,
    alpha_to_shift,
    drift_denominator,
    max_jump,
    monotonicity_violation,
    parallel_map,
    staircase_sweep,
    tongue_scan,
)


@pytest.fixture(autouse=True)
def short_iterations(monkeypatch):
    monkeypatch.setattr(settings, "N_MAX", 2000)


def _flat_staircase(epsilon, resolution=101):
    return staircase_sweep(0.05, epsilon, (0.2, 1.8), resolution, map_factory=FLAT_ROTATION)


def test_alpha_to_shift():
    assert alpha_to_shift(1.0) == 0.0
    assert alpha_to_shift(0.6) == pytest.approx(0.2)
    assert alpha_to_shift(1.0, 0.2) == pytest.approx(0.1)


def test_drift_denominator():
    assert drift_denominator(Fraction(1, 4)) == 2
    assert drift_denominator(Fraction(1, 3)) == 3
    assert drift_denominator(Fraction(0)) == 1


def test_rigid_rotation_staircase_is_diagonal():
    table = _flat_staircase(0.0)
    assert len(table.rows) == 101
    for row in table.rows:
        assert row.status == STATUS_OK
        assert row.m == pytest.approx(row.alpha, abs=2e-3)
    assert table.plateaus == []
    assert table.coverage == 0.0


def test_flat_rotation_staircase_locks_at_one():
    table = _flat_staircase(0.04)
    middle = table.rows[50]
    assert middle.alpha == pytest.approx(1.0)
    assert middle.m_fraction == 1
    unit = [(lo, hi) for m, lo, hi in table.plateaus if m == 1]
    assert len(unit) == 1
    assert unit[0][0] == pytest.approx(0.8, abs=1e-3)
    assert unit[0][1] == pytest.approx(1.2, abs=1e-3)
    assert table.coverage >= 0.3
    assert monotonicity_violation(table) <= 2e-3
    assert max_jump(table) < 0.2


def test_staircase_is_deterministic():
    first = _flat_staircase(0.02, resolution=100)
    second = _flat_staircase(0.02, resolution=100)
    assert [r.m for r in first.rows] == [r.m for r in second.rows]
    assert first.plateaus == second.plateaus


def test_failed_row_keeps_status():
    row = _staircase_row((-0.5, 0.05, 0.04, DYNAMICS, 24))
    assert row.status == "DomainError"
    assert math.isnan(row.m)
    assert row.rotation is None


def test_staircase_argument_checks():
    with pytest.raises(DomainError):
        staircase_sweep(0.05, 0.0, (0.2, 1.8), 50, map_factory=FLAT_ROTATION)
    with pytest.raises(DomainError):
        staircase_sweep(0.05, 0.0, (1.0, 1.0), 100, map_factory=FLAT_ROTATION)
    with pytest.raises(DomainError):
        staircase_sweep(0.05, 0.0, (0.2, 1.8), 100, map_factory="spline")


def test_parallel_map_keeps_order():
    assert parallel_map(abs, [-1, 2, -3, 4], workers=2) == [1, 2, 3, 4]
    assert parallel_map(abs, [-5], workers=4) == [5]
    assert parallel_map(abs, [], workers=1) == []


def test_tongues_grow_from_zero_width():
    regions, labels = tongue_scan(
        0.05, (0.2, 1.8), (0.0, 0.04), [Fraction(1), Fraction(1, 2)], grid=(32, 16), map_factory=FLAT_ROTATION,
    )
    assert labels.shape == (16, 32)
    assert not np.any(labels < 0)
    unit = regions[0]
    assert unit.target == 1
    assert unit.width_at(0.0) == 0.0
    widths = [hi - lo for _, lo, hi in unit.boundary]
    assert all(w2 >= w1 - 1e-9 for w1, w2 in zip(widths, widths[1:]))
    eps_top, lo, hi = unit.boundary[-1]
    assert eps_top == pytest.approx(0.04)
    assert hi - lo == pytest.approx(0.4, abs=1e-3)
    assert unit.area > 0
    assert unit.components >= 1


def test_tongue_grid_minimum():
    with pytest.raises(DomainError):
        tongue_scan(0.05, (0.2, 1.8), (0.0, 0.04), [Fraction(1)], grid=(8, 4), map_factory=FLAT_ROTATION)


@pytest.mark.slow
def test_dynamics_staircase_is_monotone():
    table = staircase_sweep(0.05, 0.04, (0.6, 1.0), 100, map_factory=DYNAMICS, q_cap=8)
    ok = table.ok_rows()
    assert len(ok) == len(table.rows)
    assert any(r.rotation.is_rational for r in ok)
    assert monotonicity_violation(table) < 1e-9
    assert table.rows[-1].alpha == pytest.approx(1.0)
    assert table.rows[-1].m == pytest.approx(1.0)
    assert table.coverage >= 0.9
