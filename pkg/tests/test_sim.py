import numpy as np
import pytest
from hypothesis import given, strategies as st

from excite_id.epimodels import NetworkSpec, ParamSchedule, SirNetworkModel, SirNetworkParams, SisModel, SisParams, make_network
from excite_id.sim import NoiseConfig, read_trajectory_csv, signed_sqrt, simulate, stream, substreams, write_trajectory_csv

SIS = ParamSchedule.constant(SisParams(0.12, 0.04))


def euler_sis(beta, gamma, I0, h, K):
    I = [I0]
    for _ in range(K - 1):
        x = I[-1]
        I.append(x + h * (beta * (1 - x) * x - gamma * x))
    return np.array(I)


def test_zero_noise_is_plain_euler():
    traj = simulate(SisModel(), SIS, [0.01], 0.1, 500, NoiseConfig("additive-sigma", sigma=0.0, seed=3))
    np.testing.assert_allclose(traj.states[:, 0], euler_sis(0.12, 0.04, 0.01, 0.1, 500), rtol=1e-14, atol=0)


def test_equilibrium():
    traj = simulate(SisModel(), SIS, [0.01], 0.1, 2500)
    assert abs(traj.states[-1, 0] - 2 / 3) < 1e-3


def test_same_seed_identical():
    noise = NoiseConfig("state-scaled", scale=0.5, obs_rel_std=0.1, seed=9)
    net = make_network(NetworkSpec("star", n=4, seed=1))
    x0 = [0.05] * 4 + [0.0] * 4
    a = simulate(SirNetworkModel(4), ParamSchedule.constant(net), x0, 0.2, 100, noise)
    b = simulate(SirNetworkModel(4), ParamSchedule.constant(net), x0, 0.2, 100, noise)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal([d.psi for d in a.data], [d.psi for d in b.data])


def test_two_samples_one_datum():
    traj = simulate(SisModel(), SIS, [0.3], 0.1, 2)
    data = list(stream(traj))
    assert len(data) == 1
    np.testing.assert_array_equal(data[0].phi, [[0.3 * 0.7, -0.3]])


def test_noiseless_residual_identity_across_switches():
    s = ParamSchedule(((0.0, SisParams(0.5, 0.1)), (3.0, SisParams(0.2, 0.1)), (6.0, SisParams(0.4, 0.2))))
    traj = simulate(SisModel(), s, [0.05], 0.1, 101)
    assert len(traj.data) == len(traj) - 1
    assert traj.clamp_events == 0
    for d, theta in zip(traj.data, traj.thetas):
        assert abs(d.psi[0] - d.phi[0] @ theta) < 1e-13
    assert traj.switch_indices == [30, 60]


def test_noiseless_network_has_no_clamps():
    net = make_network(NetworkSpec("fully-connected", n=7, seed=3))
    traj = simulate(SirNetworkModel(7), ParamSchedule.constant(net), [0.01] * 7 + [0.0] * 7, 0.2, 301)
    assert traj.clamp_events == 0
    d = traj.data[100]
    np.testing.assert_allclose(d.psi, d.phi @ net.theta, atol=1e-14)


def test_state_scaled_noise_vanishes_at_zero_infection():
    net = SirNetworkParams(np.array([[0.0, 0.3], [0.3, 0.0]]), np.array([0.2, 0.2]))
    traj = simulate(SirNetworkModel(2), ParamSchedule.constant(net), [0.0, 0.0, 0.1, 0.2], 0.2, 20, NoiseConfig("state-scaled", seed=4))
    np.testing.assert_array_equal(traj.states, np.tile([0.0, 0.0, 0.1, 0.2], (20, 1)))


def test_state_scaled_increment_formula():
    net = SirNetworkParams(np.array([[0.1, 0.3], [0.2, 0.0]]), np.array([0.2, 0.3]))
    x0 = np.array([0.2, 0.1, 0.05, 0.0])
    h = 0.2
    traj = simulate(SirNetworkModel(2), ParamSchedule.constant(net), x0, h, 2, NoiseConfig("state-scaled", scale=0.7, seed=5))
    m = SirNetworkModel(2)
    phi = m.regressor(x0)
    b = traj.process_draws[0]
    expected = x0 + h * phi @ net.theta + 0.7 * signed_sqrt(phi * net.theta) @ b
    np.testing.assert_allclose(traj.states[1], expected, rtol=1e-14)


def test_observation_noise_is_relative():
    base = simulate(SisModel(), SIS, [0.01], 0.1, 200)
    noisy = simulate(SisModel(), SIS, [0.01], 0.1, 200, NoiseConfig(obs_rel_std=0.1, seed=1))
    np.testing.assert_array_equal(base.states, noisy.states)
    clean = np.array([d.psi[0] for d in base.data])
    obs = np.array([d.psi[0] for d in noisy.data])
    z = (obs - clean) / (0.1 * np.abs(clean))
    np.testing.assert_allclose(z, noisy.obs_draws[:, 0], rtol=1e-9)


def test_substreams_independent():
    a = simulate(SisModel(), SIS, [0.01], 0.1, 100, NoiseConfig("additive-sigma", sigma=0.01, seed=2))
    b = simulate(SisModel(), SIS, [0.01], 0.1, 100, NoiseConfig("additive-sigma", sigma=0.01, obs_rel_std=0.1, seed=2))
    # switching observation noise on leaves process draws untouched
    np.testing.assert_array_equal(a.process_draws, b.process_draws)
    r = substreams(2)
    assert set(r) == {"process", "observation", "network", "schedule"}


def test_drift_targets():
    noise = NoiseConfig("additive-sigma", sigma=0.05, seed=8)
    traj = simulate(SisModel(), SIS, [0.2], 0.1, 50, noise, psi_source="drift")
    for d, theta in zip(traj.data, traj.thetas):
        assert d.psi[0] == pytest.approx(d.phi[0] @ theta, abs=1e-15)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        simulate(SisModel(), SIS, [1.5], 0.1, 10)
    with pytest.raises(ValueError):
        simulate(SisModel(), SIS, [0.1], 0.0, 10)
    with pytest.raises(ValueError):
        simulate(SisModel(), SIS, [0.1], 0.1, 1)
    with pytest.raises(ValueError):
        simulate(SisModel(), SIS, [0.1], 0.1, 10, NoiseConfig("pink"))
    with pytest.raises(ValueError):
        simulate(SisModel(), SIS, [0.1], 0.1, 10, psi_source="oracle")


@given(seed=st.integers(0, 10_000), kind=st.sampled_from(["none", "additive-sigma", "state-scaled"]))
def test_csv_roundtrip_bit_exact(seed, kind, tmp_path_factory):
    net = make_network(NetworkSpec("erdos-renyi", n=3, seed=seed))
    traj = simulate(SirNetworkModel(3), ParamSchedule.constant(net), [0.1, 0.0, 0.05, 0, 0, 0], 0.2, 30, NoiseConfig(kind, sigma=0.01, scale=0.3, obs_rel_std=0.1, seed=seed))
    path = tmp_path_factory.mktemp("csv") / "traj.csv"
    write_trajectory_csv(traj, path)
    times, states, psis = read_trajectory_csv(path)
    np.testing.assert_array_equal(times, traj.times)
    np.testing.assert_array_equal(states, traj.states)
    np.testing.assert_array_equal(psis, [d.psi for d in traj.data])


@given(st.integers(0, 1000))
def test_states_stay_on_simplex(seed):
    net = make_network(NetworkSpec("fully-connected", n=3, seed=seed))
    traj = simulate(SirNetworkModel(3), ParamSchedule.constant(net), [0.3, 0.3, 0.3, 0.2, 0.2, 0.2], 0.2, 60, NoiseConfig("state-scaled", scale=3.0, seed=seed))
    I, R = traj.states[:, :3], traj.states[:, 3:]
    assert np.all(I >= 0) and np.all(R >= 0) and np.all(I + R <= 1 + 1e-12)
