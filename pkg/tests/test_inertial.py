import math

import numpy as np
import pytest

from cellflow.errors import DomainError, NoEvent, NotClosed
from cellflow.models import ForcingParams, PhaseState4
from cellflow.services.hamflow_service import hamiltonian, hamiltonian_field
from cellflow.services.inertial_service import (
    BACKWARD,
    cellular_field,
    constant_field,
    divergence_area_check,
    elliptic_center,
    embed_external_force,
    h_change_per_wind,
    integrate_mr4d,
    integrate_planar,
    integrate_reduced,
    nested_levels,
    perturbation_divergence,
    perturbation_f,
    perturbed_fixed_points,
    reduced_field,
    reduced_planar_field,
    repulsion_delta,
    torus_distance,
)


def test_fixed_points_saddles_and_unstable_foci(inertial_params):
    kinds = sorted(kind for _, kind in perturbed_fixed_points(inertial_params))
    assert kinds == ["saddle", "saddle", "unstable_focus", "unstable_focus"]


def test_reduced_field_divergence(inertial_params):
    _, div = reduced_field((0.3, -0.4), inertial_params)
    expected = inertial_params.epsilon * (math.cos(0.6) + math.cos(0.8))
    assert div == pytest.approx(expected, abs=1e-15)


def test_nested_orbits_repel(symmetric_params):
    levels = nested_levels(symmetric_params, 10)
    assert len(levels) == 10
    assert repulsion_delta(symmetric_params, levels) > 0


def test_mr4d_epsilon_limits():
    state = PhaseState4(0.1, 0.2, 0.0, 0.0)
    with pytest.raises(DomainError):
        integrate_mr4d(state, ForcingParams(a=0.05, b=0.05, epsilon=0.0), 1.0)
    with pytest.raises(DomainError):
        integrate_mr4d(state, ForcingParams(a=0.05, b=0.05, epsilon=1e-6), 1.0)


def test_mr4d_relaxes_to_fluid_velocity(inertial_params):
    traj = integrate_mr4d(PhaseState4(0.3, 0.2, 0.0, 0.0), inertial_params, 5.0, n_samples=11)
    assert traj.states.shape == (11, 4)
    # за время >> eps скорость частицы подстраивается под поле
    x, y, vx, vy = traj.states[-1]
    u = reduced_field((x, y), inertial_params.with_epsilon(0.0))[0]
    assert np.hypot(vx - u[0], vy - u[1]) < 0.1


def test_external_force_is_settling_velocity():
    field, eps = embed_external_force(cellular_field(), mass=2.0, drag_coefficient=4.0, gravity=(0.0, -1.0))
    assert eps == pytest.approx(0.5)
    assert field.vector(0.0, 0.0) == pytest.approx([0.0, -0.5])
    same, _ = embed_external_force(cellular_field(), 1.0, 1.0, (0.0, 0.0))
    assert same.vector(0.4, 0.1) == pytest.approx(cellular_field().vector(0.4, 0.1))
    with pytest.raises(DomainError):
        embed_external_force(cellular_field(), 1.0, 0.0, (0.0, -1.0))


def test_constant_field_crossing_and_divergence_integral():
    trace = integrate_planar((-math.pi / 2, 0.0), constant_field((1.0, 0.0)), [math.pi / 2], t_end=10.0,
                             integrand=perturbation_divergence)
    assert trace.final_time == pytest.approx(math.pi, abs=1e-10)
    assert trace.winding == 1
    # cos 2x интегрируется в ноль, cos 0 = 1 даёт pi
    assert trace.div_integral == pytest.approx(math.pi, abs=1e-8)


def test_backward_crossing():
    trace = integrate_planar((math.pi / 2, 1.0), constant_field((1.0, 0.0)), [-math.pi / 2], t_end=10.0,
                             direction=BACKWARD)
    assert trace.final_time == pytest.approx(-math.pi, abs=1e-10)
    assert trace.winding == -1
    assert trace.final_state[1] == pytest.approx(1.0)


def test_no_event_and_bad_sections():
    with pytest.raises(NoEvent):
        integrate_planar((0.0, 0.0), constant_field((0.0, 1.0)), [math.pi / 2], t_end=5.0)
    with pytest.raises(DomainError):
        integrate_planar((0.0, 0.0), constant_field((1.0, 0.0)), [0.0], t_end=5.0)


def test_hamiltonian_conserved_per_wind(symmetric_params):
    assert h_change_per_wind(symmetric_params, 0.3) == pytest.approx(0.0, abs=1e-7)


def test_reduced_integration_shape(inertial_params):
    traj = integrate_reduced((0.1, 0.2), inertial_params, 2.0, n_samples=5)
    assert traj.states.shape == (5, 2)
    assert traj.t[-1] == pytest.approx(2.0)


def test_torus_distance_identifies_shifts():
    assert torus_distance(1.0 + math.pi, 0.5 + math.pi, (1.0, 0.5)) == pytest.approx(0.0, abs=1e-12)
    assert torus_distance(1.0, 0.5 + 2 * math.pi, (1.0, 0.5)) == pytest.approx(0.0, abs=1e-12)
    assert torus_distance(1.1, 0.5, (1.0, 0.5)) == pytest.approx(0.1)


def test_perturbation_at_simple_points():
    a, b = 0.03, 0.05
    assert perturbation_f(0.0, 0.0, a, b) == pytest.approx([a, -b], abs=1e-15)
    assert perturbation_divergence(0.0, 0.0) == pytest.approx(2.0)
    q = math.pi / 4
    assert perturbation_f(q, q, a, b) == pytest.approx([0.5 + (a - b) / 2] * 2, abs=1e-15)


def test_perturbation_is_minus_convective_derivative():
    a, b, h = 0.03, 0.05, 1e-6
    rng = np.random.default_rng(11)
    for x, y in rng.uniform(-math.pi, math.pi, size=(100, 2)):
        v = hamiltonian_field(x, y, a, b)
        dv_dx = (hamiltonian_field(x + h, y, a, b) - hamiltonian_field(x - h, y, a, b)) / (2 * h)
        dv_dy = (hamiltonian_field(x, y + h, a, b) - hamiltonian_field(x, y - h, a, b)) / (2 * h)
        convective = dv_dx * v[0] + dv_dy * v[1]
        assert perturbation_f(x, y, a, b) == pytest.approx(-convective, abs=1e-5)


def test_divergence_ratio_near_center(symmetric_params):
    cx, cy = elliptic_center(symmetric_params)
    top = hamiltonian(cx, cy, symmetric_params.a, symmetric_params.b)
    integral, area = divergence_area_check(top - 1e-4, symmetric_params)
    assert area > 0
    assert integral / area == pytest.approx(2.0, abs=0.03)


def test_divergence_check_rejects_level_above_center(symmetric_params):
    cx, cy = elliptic_center(symmetric_params)
    top = hamiltonian(cx, cy, symmetric_params.a, symmetric_params.b)
    with pytest.raises(NotClosed):
        divergence_area_check(top + 0.1, symmetric_params)


def test_mr4d_matches_closed_form_in_constant_field():
    # x(t) = x0 + w t + eps (1 - exp(-t / eps)) (v0 - w)
    params = ForcingParams(a=0.05, b=0.05, epsilon=0.1)
    traj = integrate_mr4d(PhaseState4(0.0, 0.0, 0.0, 0.0), params, 1.0, field=constant_field((1.0, 0.0)),
                          n_samples=2)
    x, y, vx, vy = traj.states[-1]
    assert x == pytest.approx(1.0 - 0.1 * (1.0 - math.exp(-10.0)), abs=1e-9)
    assert x == pytest.approx(0.9000045, abs=1e-7)
    assert vx == pytest.approx(0.9999546, abs=1e-7)
    assert (y, vy) == pytest.approx((0.0, 0.0), abs=1e-12)


@pytest.mark.parametrize("start", [(0.3, 0.2), (-math.pi / 2, 0.3)])
def test_hamiltonian_conserved_along_trajectory(symmetric_params, start):
    traj = integrate_reduced(start, symmetric_params, 100.0, n_samples=501)
    levels = np.array([hamiltonian(x, y, symmetric_params.a, symmetric_params.b) for x, y in traj.states])
    assert np.max(np.abs(levels - levels[0])) < 1e-7


def test_cellular_flow_is_reversible(symmetric_params):
    field = reduced_planar_field(symmetric_params)
    start = (-math.pi / 2, 0.3)
    forward = integrate_planar(start, field, [math.pi / 2], t_end=2000.0)
    back = integrate_planar(forward.final_state, field, [-math.pi / 2], t_end=2000.0, direction=BACKWARD)
    assert back.final_state[0] == pytest.approx(start[0], abs=1e-8)
    assert back.final_state[1] == pytest.approx(start[1], abs=1e-8)


def test_hamiltonian_drifts_slowly_with_inertia(inertial_params):
    for z in np.linspace(0.05, 0.95, 10):
        assert abs(h_change_per_wind(inertial_params, float(z))) < 10 * inertial_params.epsilon


@pytest.mark.slow
def test_particle_follows_slow_manifold():
    magnitude = 0.02
    errors = []
    for eps in (1 / 25, 1 / 50, 1 / 100):
        params = ForcingParams.from_angle(45.0, magnitude, eps)
        x0, y0 = -math.pi / 2, 0.3
        u0 = hamiltonian_field(x0, y0, params.a, params.b)
        t_end = 50.0
        full = integrate_mr4d(PhaseState4(x0, y0, u0[0], u0[1]), params, t_end, n_samples=1001)
        reduced = integrate_reduced((x0, y0), params, t_end, n_samples=1001)
        after = full.t > 5 * eps * math.log(1 / eps)
        gap = np.hypot(full.x[after] - reduced.x[after], full.y[after] - reduced.y[after])
        assert np.max(gap) < 5 * eps
        errors.append(float(np.max(gap)))
    assert errors[-1] < errors[0]
