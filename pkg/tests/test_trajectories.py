import math

import numpy as np
import pytest
from scipy import stats

from qlbe.core import PhysicalParams, derive_scales
from qlbe.diffusive import coefficients
from qlbe.errors import ConfigurationError
from qlbe.rates import m_out_flux
from qlbe.trajectories import (
    MaxwellInitial,
    Trajectory,
    block_rng,
    default_time_grid,
    ensemble_moments,
    simulate_trajectory,
)

SEED = 9001


def test_block_streams_independent_and_reproducible():
    a = block_rng(7, 0).random(1000)
    assert np.array_equal(a, block_rng(7, 0).random(1000))
    b = block_rng(7, 1).random(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15
    with pytest.raises(ConfigurationError):
        block_rng(-1, 0)


def test_trajectory_piecewise_constant_helpers():
    tr = Trajectory(np.array([0.0, 1.0, 3.0]), np.array([[1.0, 0, 0], [2.0, 0, 0], [4.0, 0, 0]]))
    assert tr.n_events == 2
    assert tr.momentum_at(0.999)[0] == 1.0 and tr.momentum_at(1.0)[0] == 2.0
    assert tr.time_average(lambda P: P[:, 0], 4.0) == pytest.approx((1 + 2 * 2 + 4) / 4.0)


def test_no_gas_no_events(rng):
    p = PhysicalParams(m=1, M=10, T=1, n_gas=0, sigma_tot=1)
    tr = simulate_trajectory([0, 0, 5.0], 100.0, p, rng)
    assert tr.n_events == 0
    st = ensemble_moments(np.array([0.0, 0.0, 5.0]), 10, [0.0, 1.0, 50.0], p, SEED)
    assert np.all(st.mean_P[:, 2] == 5.0) and st.n_events == 0


def test_waiting_times_exponential(light_params, rng):
    P0 = np.array([0.0, 0.0, 4.0])
    rate = float(m_out_flux(P0, light_params))
    tr = simulate_trajectory(P0, 5000.0 / rate, light_params, rng, freeze_momentum=True)
    waits = np.diff(tr.times)
    assert stats.kstest(waits, "expon", args=(0, 1 / rate)).pvalue > 1e-3
    # Poisson count: mean 5000, standard deviation about 71
    assert abs(tr.n_events - 5000) < 4 * math.sqrt(5000)
    assert np.all(tr.momenta == P0)


def test_ergodic_energy_average(light_params, rng):
    eta = coefficients(light_params, warn=False).eta
    t_end = 1000.0 / eta
    tr = simulate_trajectory(np.zeros(3), t_end, light_params, rng)
    E = tr.time_average(lambda P: np.sum(P * P, axis=1) / (2 * light_params.M), t_end)
    # energy correlation time ~ 1/(2 eta): standard error ~ 1.5 T sqrt(2/3 / (eta t)) ~ 0.04
    assert E == pytest.approx(1.5 * light_params.T, abs=0.15)


def test_maxwell_boltzmann_is_stationary(light_params):
    eta = coefficients(light_params, warn=False).eta
    grid = np.array([0.0, 0.5, 2.0, 5.0]) / eta
    st = ensemble_moments(MaxwellInitial(light_params), 4000, grid, light_params, SEED)
    assert np.all(np.abs(st.mean_E - 1.5) < 4 * st.se_E)
    assert np.all(np.abs(st.mean_P) < 4 * st.se_P)


def test_reproducible_and_worker_independent(light_params):
    grid = default_time_grid(coefficients(light_params, warn=False).eta, n=8)
    args = (np.array([0.0, 0.0, 6.0]), 600, grid, light_params, SEED)
    a = ensemble_moments(*args, block_size=128)
    b = ensemble_moments(*args, block_size=128)
    c = ensemble_moments(*args, block_size=128, workers=2)
    for x in (b, c):
        assert np.array_equal(a.mean_P, x.mean_P)
        assert np.array_equal(a.mean_E, x.mean_E)
        assert a.n_events == x.n_events
    d = ensemble_moments(*args[:-1], SEED + 1, block_size=128)
    assert not np.array_equal(a.mean_P, d.mean_P)


def test_relaxation_from_delta_start(light_params):
    s = derive_scales(light_params)
    eta = coefficients(light_params, warn=False).eta
    grid = np.array([0.0, 1.0, 2.0, 4.0, 20.0]) / eta
    P0 = np.array([0.0, 0.0, 2.0 * light_params.M * s.v_beta])
    st = ensemble_moments(P0, 4000, grid, light_params, SEED)
    # direction is preserved: no transverse drift
    assert np.all(np.abs(st.mean_P[1:, :2]) < 4 * st.se_P[1:, :2])
    assert np.all(np.diff(st.mean_P[:, 2]) < 0)
    assert np.all(np.diff(st.mean_E[:-1]) < 0)
    # thermalised at late times: zero mean, covariance M T per axis
    n = st.n_traj
    assert np.all(np.abs(st.mean_P[-1]) < 4 * st.se_P[-1])
    var = np.diag(st.cov_P[-1])
    assert np.all(np.abs(var / (light_params.M * light_params.T) - 1) < 4 * math.sqrt(2 / n))
    assert abs(st.mean_E[-1] - 1.5) < 4 * st.se_E[-1]


def test_thermalised_components_are_gaussian(light_params, rng):
    eta = coefficients(light_params, warn=False).eta
    finals = np.array([simulate_trajectory([0.0, 0.0, 15.0], 15.0 / eta, light_params, rng).momenta[-1]
                       for _ in range(300)])
    scale = math.sqrt(light_params.M * light_params.T)
    edges = stats.norm.ppf(np.linspace(0, 1, 11)) * scale
    for k in range(3):
        counts = np.histogram(finals[:, k], bins=edges)[0]
        assert stats.chisquare(counts).pvalue > 1e-3


def test_ensemble_input_validation(light_params):
    with pytest.raises(ConfigurationError):
        ensemble_moments(np.zeros(3), 1, [0.0, 1.0], light_params, SEED)
    with pytest.raises(ConfigurationError):
        ensemble_moments(np.zeros(3), 10, [1.0, 0.5], light_params, SEED)
    with pytest.raises(ConfigurationError):
        ensemble_moments(np.zeros((5, 3)), 10, [0.0, 1.0], light_params, SEED)
    with pytest.raises(ConfigurationError):
        simulate_trajectory(np.zeros(3), 0.0, light_params, np.random.default_rng(0))


def test_small_momentum_decays_exponentially(unit_params):
    # near equilibrium the friction is linear: <Pz>(t) = P0 exp(-eta t)
    s = derive_scales(unit_params)
    eta = coefficients(unit_params).eta
    P0 = np.array([0.0, 0.0, 0.2 * unit_params.M * s.v_beta])
    grid = np.array([0.0, 1.0, 2.0, 3.0]) / eta
    st = ensemble_moments(P0, 10_000, grid, unit_params, SEED)
    z = (st.mean_P[1:, 2] - P0[2] * np.exp(-eta * grid[1:])) / st.se_P[1:, 2]
    assert np.all(np.abs(z) < 3)
