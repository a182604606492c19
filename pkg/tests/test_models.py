import math

import pytest

from cellflow.errors import DomainError
from cellflow.models import (
    ChessPath,
    EventTrace,
    FlatSpotCircleMap,
    ForcingParams,
    RotationResult,
    StaircaseRow,
    TransversalCoord,
    locate_in_arcs,
    node_parity,
)


def test_forcing_params_validation():
    with pytest.raises(DomainError):
        ForcingParams(a=0.05, b=0.0)
    with pytest.raises(DomainError):
        ForcingParams(a=0.05, b=0.05, epsilon=-0.1)
    with pytest.raises(DomainError):
        ForcingParams(a=float("nan"), b=0.05)
    with pytest.raises(DomainError):
        ForcingParams(a=-0.01, b=0.05).require_positive_a()


def test_forcing_params_derived_values():
    p = ForcingParams.from_alpha(0.8, 0.05, 0.04)
    assert p.a == pytest.approx(0.04)
    assert p.alpha == pytest.approx(0.8)
    assert p.s == pytest.approx(-0.04)
    q = ForcingParams.from_angle(45.0, 0.02)
    assert q.a == pytest.approx(q.b)
    assert math.hypot(q.a, q.b) == pytest.approx(0.02)


def test_node_parity():
    assert node_parity((0, 0)) == "even"
    assert node_parity((0, -1)) == "odd"
    assert node_parity((-1, 0)) == "odd"


def test_chess_path_requires_neighbours():
    with pytest.raises(DomainError):
        ChessPath(vertices=[(0, 0), (1, 1)], turns=[], h0=0.0, lines=(0.0, 0.0))


def test_event_trace_times_strictly_increasing():
    EventTrace(times=[-0.5, -1.0])
    with pytest.raises(DomainError):
        EventTrace(times=[1.0, 1.0])


def test_transversal_coord_round_trip():
    c = TransversalCoord(z=0.3, k=1)
    x, y = c.to_point()
    assert x == pytest.approx(math.pi / 2)
    back = TransversalCoord.from_point(x, y)
    assert back.k == 1
    assert back.z == pytest.approx(0.3)


def test_locate_in_arcs_uses_lift():
    arcs = [(0.1, 0.3)]
    assert locate_in_arcs(arcs, 0.2) == (0, 0)
    assert locate_in_arcs(arcs, 2.25) == (0, 2)
    assert locate_in_arcs(arcs, -0.8) == (0, -1)
    assert locate_in_arcs(arcs, 0.5) is None
    assert locate_in_arcs(arcs, 0.1, shrink=1e-12) is None


def test_flat_spot_map_validation_and_evaluation():
    with pytest.raises(DomainError):
        FlatSpotCircleMap(spots=[(0.0, 1.0)], heights=[0.0], branch=lambda x: x)
    with pytest.raises(DomainError):
        FlatSpotCircleMap(spots=[(0.0, 0.2)], heights=[], branch=lambda x: x)
    f = FlatSpotCircleMap(spots=[(0.0, 0.5)], heights=[0.25], branch=lambda x: x)
    assert f(0.3) == pytest.approx(0.25)
    assert f(1.3) == pytest.approx(1.25)
    assert f(0.7) == pytest.approx(0.7)


def test_rotation_result_invariants():
    r = RotationResult.rational(2, 4, 0)
    assert (r.p, r.q) == (1, 2)
    assert r.value == 0.5
    with pytest.raises(DomainError):
        RotationResult.interval(0.0, 0.5, 10)
    with pytest.raises(DomainError):
        RotationResult(kind="rational", p=1, q=0)
    i = RotationResult.interval(0.1, 0.2, 10)
    assert not i.is_rational
    assert i.fraction is None


def test_staircase_row_rational_slope():
    row = StaircaseRow(alpha=0.9, s=-0.045, rotation=RotationResult.rational(1, 4, 0), m=0.5)
    assert row.m_fraction == 0.5
    assert StaircaseRow(alpha=0.9, s=-0.045, rotation=None, m=float("nan"), status="DomainError").m_fraction is None
