from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import radial_lab.phase as phase
from conftest import P1, P2, P3
from radial_lab import errors
from radial_lab.model import SystemParams, equilibria
from radial_lab.phase import (
    PhaseTrajectory,
    box_bounds,
    box_check,
    comparison_check,
    divergence_sample,
    integrate_phase,
    jacobian,
    omega_limit,
    phase_image,
    random_ordered_pair,
    to_phase,
    vector_field,
)
from radial_lab.shooter import RadialState, integrate
from strategies import any_params, growth_params


@given(any_params(), st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 1e3))
def test_field_is_cooperative(P, Y, Z, W):
    J = jacobian(P, (Y, Z, W))
    off = J[~np.eye(3, dtype=bool)]
    assert np.all(off >= 0)


@given(any_params(), st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.1, 50))
def test_jacobian_matches_finite_differences(P, Y, Z, W):
    x = np.array([Y, Z, W])
    J = jacobian(P, x)
    eps = 1e-6
    for k in range(3):
        d = np.zeros(3)
        d[k] = eps
        col = (np.array(vector_field(P, x + d)) - np.array(vector_field(P, x - d))) / (2 * eps)
        assert np.allclose(col, J[:, k], rtol=1e-6, atol=1e-5)


def test_to_phase_matches_definitions():
    st0 = RadialState(r=2.0, u=3.0, w=0.5, v=4.0, z=1.5)
    pt = to_phase(P2, st0)
    assert pt.X == pytest.approx(2 * 0.5 / 3)
    assert pt.Y == pytest.approx(2 * 1.5 / 4)
    assert pt.Z == pytest.approx(2**2 * 4**0.5 / 0.5)
    assert pt.W == pytest.approx(2**3 * 4**0.1 * 0.5 / 1.5)


def test_to_phase_degenerate():
    with pytest.raises(errors.DegenerateState):
        to_phase(P1, RadialState(r=1.0, u=1.0, w=0.0, v=1.0, z=1.0))


@pytest.mark.parametrize("P", [P1, P2, P3], ids=["P1", "P2", "P3"])
def test_flow_converges_to_xi2(P):
    xi1, xi2 = box_bounds(P)
    traj = integrate_phase(P, 0.5 * (xi1 + xi2))
    assert traj.limit.kind == "ConvergedTo"
    assert traj.limit.equilibrium == "xi2"
    assert np.allclose(traj.limit.point, xi2)


def test_short_run_is_undecided():
    xi1, xi2 = box_bounds(P1)
    traj = integrate_phase(P1, xi1 + 0.01, t_span=(0.0, 4.0))
    assert traj.limit.kind == "Undecided"


def test_trivial_equilibrium_is_detected():
    xi1, _ = box_bounds(P1)
    traj = integrate_phase(P1, xi1)
    assert traj.limit.kind == "ConvergedTo" and traj.limit.equilibrium == "xi1"


def test_negative_start_rejected():
    with pytest.raises(ValueError):
        integrate_phase(P1, (-1.0, 3.0, 4.0))


def test_escape_reports_divergence(monkeypatch):
    monkeypatch.setattr(phase, "DIVERGENCE_BOUND", 9.0)
    with pytest.raises(errors.PhaseDivergence):
        integrate_phase(P1, (0.01, 3.0, 4.0))


@pytest.mark.parametrize("P", [P1, P2, P3], ids=["P1", "P2", "P3"])
def test_radial_phase_images_stay_in_box(P):
    ph = phase_image(integrate(P, 1, 1, r_max=1e8))
    assert box_check(ph, tol=1e-6) == []


@pytest.mark.parametrize("P", [P1, P2, P3], ids=["P1", "P2", "P3"])
def test_x_tracks_z(P):
    ph = phase_image(integrate(P, 1, 1, r_max=1e12))
    tail = ph.t >= ph.t[-1] - 5
    gap = ph.X[tail] - (ph.Z[tail] - (P.N - 2))
    assert abs(np.mean(gap)) < 1e-3


def test_box_check_reports_excess():
    lo, hi = box_bounds(P1)
    t = np.array([0.0, 1.0])
    traj = PhaseTrajectory(P1, t, np.array([1.0, hi[0] + 0.5]), np.array([5.0, 5.0]), np.array([6.0, 6.0]))
    v = box_check(traj)
    assert len(v) == 1 and v[0].component == "Y" and v[0].excess == pytest.approx(0.5)


def test_comparison_principle_random_pairs():
    rng = np.random.default_rng(12345)
    worst = 0.0
    for P in (P1, P2, P3):
        for _ in range(10):
            lo, hi = random_ordered_pair(P, rng)
            assert np.all(lo <= hi)
            worst = max(worst, comparison_check(P, lo, hi).max_violation)
    assert worst <= 1e-9


def test_comparison_rejects_unordered():
    with pytest.raises(ValueError):
        comparison_check(P1, (5, 5, 5), (4, 6, 6))


def test_divergence_corners_p1():
    d = divergence_sample(P1, n_points=200)
    assert d.corners["hhh"] == -29
    assert d.max < 0 and d.condition_holds
    assert d.min <= d.interior_min and d.interior_max <= d.max


@given(growth_params())
def test_divergence_corner_extrema_bound_interior(P):
    d = divergence_sample(P, n_points=50, rng=np.random.default_rng(0))
    assert d.min - 1e-9 <= d.interior_min and d.interior_max <= d.max + 1e-9


def test_divergence_condition_does_not_force_negative_corners():
    # the condition holds here but the largest corner value is positive
    P = SystemParams(4, 1.54, 2.37, 0.16, 0.3, 3.0)
    d = divergence_sample(P)
    assert d.condition_holds
    assert d.max > 0 and d.corners["lhl"] == pytest.approx(1.18)


def test_phase_csv(tmp_path):
    traj = integrate_phase(P1, (5.0, 5.0, 6.0), t_span=(0, 10), n_samples=11)
    path = tmp_path / "p.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,X,Y,Z,W"
    assert lines[1].split(",")[1] == ""
    ph = phase_image(integrate(P1, 1, 1, r_max=10))
    ph.to_csv(path)
    assert path.read_text().splitlines()[1].split(",")[1] != ""


@given(growth_params())
def test_equilibria_inside_nonnegative_orthant(P):
    xi1, xi2 = equilibria(P)
    assert np.all(np.array(xi2) > np.array(xi1))
