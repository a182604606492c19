import math

import numpy as np
import pytest

from cellflow.errors import DomainError, OnLineError
from cellflow.models import LEFT, ODD, RIGHT, ForcingParams
from cellflow.services.hamflow_service import (
    DEFAULT_CHESS_START,
    chess_oracle_mismatch,
    chess_path,
    chess_turn_label,
    expected_saddle_level,
    eval_hamiltonian_system,
    find_saddles,
    hamiltonian,
    hamiltonian_field,
    hamiltonian_gradient,
    k_constant,
    level_of_start,
    levels_distinct,
    node_level,
    rigid_rotation_p0,
    saddle_near,
    saddle_seed,
    separatrix_crossings_eps0,
    strip_saddle_levels,
    turns_from_vertices,
)


def test_k_constant_value(symmetric_params):
    assert k_constant(symmetric_params) == pytest.approx(-0.0025021, abs=1e-6)


def test_k_constant_is_odd_in_a():
    plus = k_constant(ForcingParams(a=0.03, b=0.05))
    minus = k_constant(ForcingParams(a=-0.03, b=0.05))
    assert plus == pytest.approx(-minus, abs=1e-15)
    assert k_constant(ForcingParams(a=0.0, b=0.05)) == 0.0


def test_k_constant_domain():
    with pytest.raises(DomainError):
        k_constant(ForcingParams(a=0.6, b=0.5))


def test_saddle_seed_without_forcing_is_node():
    for node in ((0, 0), (0, -1), (-1, 0), (2, 3)):
        x, y = saddle_seed(node, 0.0, 0.0)
        assert x == pytest.approx(math.pi / 2 + math.pi * node[0], abs=1e-12)
        assert y == pytest.approx(math.pi / 2 + math.pi * node[1], abs=1e-12)


def test_odd_saddle_position_and_level(symmetric_params):
    saddle = saddle_near((0, -1), symmetric_params)
    assert saddle.parity == ODD
    assert saddle.position[0] == pytest.approx(1.62088, abs=1e-5)
    assert saddle.position[1] == pytest.approx(-1.62088, abs=1e-5)
    assert saddle.h_value == pytest.approx(-0.159582, abs=1e-6)


def test_saddle_levels_follow_parity_rule():
    params = ForcingParams(a=0.03, b=0.07)
    saddles = find_saddles(params, (-math.pi, math.pi, -math.pi, math.pi))
    assert len(saddles) == 4
    for saddle in saddles:
        assert saddle.h_value == pytest.approx(expected_saddle_level(saddle, params), abs=1e-10)
        assert saddle.h_value == pytest.approx(hamiltonian(*saddle.position, params.a, params.b), abs=1e-15)


def test_strip_levels_distinct(symmetric_params):
    levels = strip_saddle_levels(symmetric_params, range(-2, 3))
    assert len(levels) == 10
    assert levels_distinct(levels)
    assert not levels_distinct([0.1, 0.1 + 1e-12])


def test_find_saddles_outside_checked_region():
    with pytest.raises(DomainError):
        find_saddles(ForcingParams(a=0.2, b=0.05), (-1, 1, -1, 1))
    with pytest.raises(DomainError):
        find_saddles(ForcingParams(a=-0.01, b=0.05), (-1, 1, -1, 1))


def _crossing_slopes(a, b, h=1e-6):
    lo = separatrix_crossings_eps0(ForcingParams(a=a - h, b=b))
    hi = separatrix_crossings_eps0(ForcingParams(a=a + h, b=b))
    return [(u - v) / (2 * h) for u, v in zip(hi, lo)]


def test_separatrix_crossings_move_down_with_a():
    left, right = _crossing_slopes(0.05, 0.05)
    assert left == pytest.approx(-1.0017, abs=1e-3)
    assert right == pytest.approx(-61.83, rel=1e-3)
    assert left < -1 and right < -1


def test_chess_turn_labels(symmetric_params):
    h0 = k_constant(symmetric_params)
    assert chess_turn_label((1, 0), symmetric_params, h0) == LEFT
    assert chess_turn_label((0, 1), symmetric_params, h0) == RIGHT


def test_chess_line_through_node_rejected(symmetric_params):
    # узел (0, 0): b y_G - a x_G = 0 при a = b, прямая чётных узлов c = h0 + K
    h0 = -k_constant(symmetric_params)
    with pytest.raises(OnLineError):
        chess_turn_label((0, 0), symmetric_params, h0)


def test_chess_path_turns_match_geometry(symmetric_params):
    h0 = level_of_start(DEFAULT_CHESS_START, symmetric_params)
    path = chess_path(((-1, 0), (-1, -1)), symmetric_params, h0, 20)
    assert len(path.vertices) == 22
    assert len(path.turns) == 20
    assert turns_from_vertices(path.vertices) == path.turns
    assert path.lines == pytest.approx((h0 - k_constant(symmetric_params), h0 + k_constant(symmetric_params)))


def test_chess_path_rejects_bad_edge(symmetric_params):
    with pytest.raises(DomainError):
        chess_path(((0, 0), (1, 1)), symmetric_params, 0.3, 5)


@pytest.mark.slow
@pytest.mark.parametrize("a,b", [(0.05, 0.05), (0.03, 0.05), (0.06, 0.05)])
def test_chess_rule_matches_trajectory(a, b):
    assert chess_oracle_mismatch(ForcingParams(a=a, b=b), 30) == -1


def test_eval_at_origin(symmetric_params):
    h, field = eval_hamiltonian_system((0.0, 0.0), symmetric_params)
    assert h == pytest.approx(1.0)
    assert field == pytest.approx([0.05, 0.05], abs=1e-15)


def test_field_at_vertical_line(symmetric_params):
    _, field = eval_hamiltonian_system((math.pi / 2, 0.0), symmetric_params)
    assert field == pytest.approx([0.05, 1.05], abs=1e-15)


def test_field_is_rotated_gradient():
    # (x', y') = (dH/dy, -dH/dx), центральные разности H
    params = ForcingParams(a=0.03, b=0.07)
    h = 1e-5
    rng = np.random.default_rng(3)
    for x, y in rng.uniform(-math.pi, math.pi, size=(100, 2)):
        dh_dx = (hamiltonian(x + h, y, params.a, params.b) - hamiltonian(x - h, y, params.a, params.b)) / (2 * h)
        dh_dy = (hamiltonian(x, y + h, params.a, params.b) - hamiltonian(x, y - h, params.a, params.b)) / (2 * h)
        field = hamiltonian_field(x, y, params.a, params.b)
        assert field == pytest.approx([dh_dy, -dh_dx], abs=1e-6)
        assert float(field @ hamiltonian_gradient(x, y, params.a, params.b)) == pytest.approx(0.0, abs=1e-14)


def test_right_turns_close_into_cell_loop(symmetric_params):
    # обе прямые далеко ниже узлов: все метки R
    path = chess_path(((0, 0), (1, 0)), symmetric_params, -10.0, 4)
    assert path.turns == [RIGHT] * 4
    assert path.vertices[4] == path.vertices[0]
    assert path.vertices[5] == path.vertices[1]
    assert len(set(path.vertices[:4])) == 4


def test_chess_path_follows_forcing_direction(symmetric_params):
    h0 = level_of_start(DEFAULT_CHESS_START, symmetric_params)
    path = chess_path(((-1, 0), (-1, -1)), symmetric_params, h0, 100)
    # путь не отходит от прямой b y - a x = h0
    assert max(abs(node_level(v, symmetric_params) - h0) for v in path.vertices) < 0.5
    di = path.vertices[-1][0] - path.vertices[0][0]
    dj = path.vertices[-1][1] - path.vertices[0][1]
    assert abs(di) > 10
    assert dj / di == pytest.approx(symmetric_params.a / symmetric_params.b, abs=0.2)


def test_rigid_rotation_without_tilt(symmetric_params):
    assert rigid_rotation_p0(0.3, symmetric_params) == pytest.approx(0.3)
    assert rigid_rotation_p0(0.3, ForcingParams(a=0.03, b=0.05)) == pytest.approx(0.1)
