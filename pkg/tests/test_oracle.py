import numpy as np
import pytest
from scipy.linalg import expm

from padic_kinetics.basin import Basin, LandscapeModel
from padic_kinetics.exceptions import UsageError
from padic_kinetics.oracle import (
    ball_tree_state,
    build_dense_generator,
    mc_simulate,
    solve_dense_ode,
    spectral_match,
)
from padic_kinetics.padic import BallSpec, RadialProfile
from padic_kinetics.rates import ProteinRate, ProteinThermo, TemperatureSchedule

import oracles
from conftest import random_autonomous_model, two_basin_constant


@pytest.mark.parametrize("p,n,N", [(2, 2, 1), (2, 3, 2), (3, 2, 2), (3, 2, 3)])
def test_dense_generator_matches_brute_force(p, n, N, rng):
    model, levels, inter = random_autonomous_model(p, n, N, rng)
    Q = build_dense_generator(model, n, 0.0)
    ref = oracles.brute_generator(p, n, levels, [[0 if x is None else x for x in row] for row in inter])
    assert np.allclose(Q, ref, rtol=1e-14, atol=1e-15)
    assert np.allclose(Q.sum(axis=0), 0.0, atol=1e-13)


def test_constant_kernel_spectrum():
    p, n, c = 3, 2, 1.7
    model = LandscapeModel(p, [Basin("A", RadialProfile(p, [c]))])
    ev = np.sort(np.linalg.eigvals(build_dense_generator(model, 1, 0.0)).real)
    assert np.allclose(ev, [-c, -c, 0.0], atol=1e-13)
    rep = spectral_match(model, n)
    assert rep.matched


def test_profile_6_3_spectrum():
    p = 3
    model = LandscapeModel(p, [Basin("A", RadialProfile(p, [6.0, 3.0]))])
    ev = np.sort(np.linalg.eigvals(build_dense_generator(model, 2, 0.0)).real)
    assert np.allclose(ev, [-6.0] * 2 + [-5.0] * 6 + [0.0], atol=1e-12)
    rep = spectral_match(model, 2)
    assert rep.matched and rep.inferred_convention == "geometric"
    assert rep.max_relative_mismatch < 1e-9


@pytest.mark.parametrize("p,n,N", [(2, 3, 2), (3, 2, 2), (3, 3, 1)])
def test_shifted_convention_is_negative_control(p, n, N, rng):
    model, _, _ = random_autonomous_model(p, n, N, rng)
    assert spectral_match(model, n, convention="geometric").matched
    bad = spectral_match(model, n, convention="paper")
    assert not bad.matched
    assert bad.inferred_convention == "geometric"


def test_dense_size_cap():
    model = LandscapeModel(3, [Basin("A", RadialProfile(3, [1.0]))])
    with pytest.raises(UsageError):
        build_dense_generator(model, 8, 0.0)
    with pytest.raises(UsageError):
        spectral_match(model, 2, convention="other")


def test_symmetric_model_relaxes_to_uniform(rng):
    p, n = 2, 3
    model = two_basin_constant(p=p, levels=(2.0, 1.0, 0.5), out_rate=0.7, back_rate=0.7)
    u0 = ball_tree_state(BallSpec(0, (1, 0, 1), -3), p, n, 2)
    out = solve_dense_ode(u0, model, [0.0, 40.0], dt=0.01)
    assert np.allclose(out[-1].occupation, 1.0 / (2 * p**n), atol=1e-10)
    assert out[-1].occupation.sum() == pytest.approx(1.0, abs=1e-13)


def test_dense_rk4_fourth_order():
    sched = TemperatureSchedule.linear(309.0, 316.15, 50.0)
    th = ProteinThermo()
    fold, unfold = ProteinRate(th, sched, "fold"), ProteinRate(th, sched, "unfold")
    prof = RadialProfile(2, [0.2])
    model = LandscapeModel(2, [Basin("U", prof), Basin("F", prof)], [[None, unfold], [fold, None]], horizon=(0, 50))
    u0 = ball_tree_state(BallSpec(0, (0,), -1), 2, 1, 2)
    from padic_kinetics.basin import p1_closed_form

    ref = p1_closed_form(fold, unfold, [0.0, 50.0], tol=1e-12)[-1]
    err = [abs(solve_dense_ode(u0, model, [0.0, 50.0], dt)[-1].basin_masses()[0] - ref) for dt in (2.0, 1.0)]
    assert 12 < err[0] / err[1] < 20


def test_dense_ode_matches_expm(rng):
    model, levels, inter = random_autonomous_model(3, 2, 2, rng)
    u0 = ball_tree_state(BallSpec(1, (2,), -1), 3, 2, 2)
    out = solve_dense_ode(u0, model, [0.0, 0.5, 1.0], dt=1e-3)
    Q = build_dense_generator(model, 2, 0.0)
    assert np.allclose(out[-1].occupation, expm(Q) @ u0.occupation, atol=1e-11)


def test_mc_conserves_paths_and_is_deterministic():
    model = two_basin_constant()
    ball = BallSpec(0, (1,), -1)
    times = np.linspace(0, 3, 7)
    a = mc_simulate(model, ball, 2, times, 2000, seed=7)
    b = mc_simulate(model, ball, 2, times, 2000, seed=7)
    c = mc_simulate(model, ball, 2, times, 2000, seed=8)
    assert np.all(a.counts.sum(axis=1) == 2000)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)
    assert a.occupancy(ball)[0] == 1.0


def test_mc_basin_occupancy_matches_closed_form():
    model = two_basin_constant(out_rate=0.4, back_rate=0.2)
    times = np.linspace(0, 4, 9)
    res = mc_simulate(model, BallSpec(0, (), 0), 2, times, 20000, seed=3)
    p1 = oracles.two_state(0.2, 0.4, times)
    se = np.sqrt(np.maximum(p1 * (1 - p1), 1e-12) / res.paths)
    assert np.all(np.abs(res.basin_occupancy(0) - p1) <= 4 * se)


def test_mc_records_sample_paths():
    model = two_basin_constant()
    res = mc_simulate(model, BallSpec(0, (2,), -1), 2, [0.0, 2.0], 50, seed=1, record=3)
    assert len(res.sample_paths) == 3
    for path in res.sample_paths:
        assert path.states[0].basin == 0 and path.states[0].digits[0] == 2
        assert len(path.states) == len(path.jump_times) + 1
        assert all(np.diff(path.jump_times) > 0)
