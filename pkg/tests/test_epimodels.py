import numpy as np
import pytest
from hypothesis import given, strategies as st

from excite_id.epimodels import (
    NetworkSpec,
    ParamSchedule,
    SirNetworkModel,
    SirNetworkParams,
    SisModel,
    SisParams,
    local_r0,
    make_network,
    schedule_at,
    sir_drift,
    sir_regressor,
    sis_drift,
    sis_regressor,
    switch_indices,
)


def test_sis_regressor_examples():
    np.testing.assert_allclose(sis_regressor(0.0), [[0.0, 0.0]])
    np.testing.assert_allclose(sis_regressor(1.0), [[0.0, -1.0]])
    np.testing.assert_allclose(sis_regressor(0.5), [[0.25, -0.5]])
    with pytest.raises(ValueError):
        sis_regressor(1.2)


def test_sis_drift_examples():
    p = SisParams(0.12, 0.04)
    assert sis_drift(1 - 0.04 / 0.12, p) == pytest.approx(0.0, abs=1e-15)
    assert sis_drift(0.0, p) == 0.0
    # 0.99 * 0.12 * 0.01 - 0.04 * 0.01
    assert sis_drift(0.01, p) == pytest.approx(0.000788, rel=1e-12)


def test_sir_regressor_hand_case():
    np.testing.assert_allclose(sir_regressor([0.5], [0.25]), [[0.125, -0.5], [0.0, 0.5]])
    np.testing.assert_array_equal(sir_regressor([0.0, 0.0], [0.3, 0.1]), np.zeros((4, 6)))
    with pytest.raises(ValueError):
        sir_regressor([0.7], [0.5])


@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_sir_regressor_column_order(n, seed):
    rng = np.random.default_rng(seed)
    I = rng.uniform(0, 0.5, n)
    R = rng.uniform(0, 0.5, n)
    B = rng.uniform(0, 1, (n, n))
    g = rng.uniform(0.1, 1, n)
    phi = sir_regressor(I, R)
    assert phi.shape == (2 * n, n * n + n)
    # column-major vec(B): column j*n + i holds coefficient of B[i, j]
    S = 1 - I - R
    i, j = rng.integers(n), rng.integers(n)
    assert phi[i, j * n + i] == pytest.approx(S[i] * I[j])
    p = SirNetworkParams(B, g)
    np.testing.assert_allclose(phi @ p.theta, np.concatenate([S * (B @ I) - g * I, g * I]), rtol=1e-12, atol=1e-15)


def test_linear_in_parameters_identity():
    rng = np.random.default_rng(0)
    sis, sir = SisModel(), SirNetworkModel(3)
    for _ in range(1000):
        I = rng.uniform()
        ps = SisParams(*rng.uniform(0, 1, 2))
        assert sis.drift([I], ps)[0] == pytest.approx(sis_drift(I, ps), abs=1e-15)
        x = rng.dirichlet(np.ones(3), size=3)[:, :2].T.ravel()  # per node I, R with I + R <= 1
        x = np.concatenate([x[:3], x[3:]])
        pn = SirNetworkParams(rng.uniform(0, 1, (3, 3)), rng.uniform(0.1, 1, 3))
        np.testing.assert_allclose(sir.drift(x, pn), sir_drift(x[:3], x[3:], pn), rtol=1e-13, atol=1e-16)


def test_local_r0_examples():
    p = SirNetworkParams(np.array([[0.2, 0.1], [0.0, 0.3]]), np.array([0.1, 0.2]))
    np.testing.assert_allclose(local_r0(p), [3.0, 1.5])
    g = np.array([0.3, 0.7])
    np.testing.assert_allclose(local_r0(SirNetworkParams(np.diag(g), g)), [1.0, 1.0])
    assert local_r0(SirNetworkParams(np.array([[0.12]]), np.array([0.04])))[0] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        local_r0(SirNetworkParams(np.eye(2), np.array([0.0, 1.0])))


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_local_r0_scale_invariant(c, seed):
    rng = np.random.default_rng(seed)
    B, g = rng.uniform(0, 1, (3, 3)), rng.uniform(0.1, 1, 3)
    np.testing.assert_allclose(local_r0(SirNetworkParams(c * B, c * g)), local_r0(SirNetworkParams(B, g)), rtol=1e-12)


def test_params_validation_and_roundtrip():
    with pytest.raises(ValueError):
        SisParams(-0.1, 0.2)
    with pytest.raises(ValueError):
        SirNetworkParams(np.ones((2, 3)), np.ones(2))
    p = SirNetworkParams(np.arange(4.0).reshape(2, 2), np.array([1.0, 2.0]))
    np.testing.assert_array_equal(p.theta, [0.0, 2.0, 1.0, 3.0, 1.0, 2.0])
    q = SirNetworkParams.from_theta(p.theta, 2)
    np.testing.assert_array_equal(q.B, p.B)
    clipped = SirNetworkParams.from_theta(np.array([-1.0, 0, 0, 0, 1, 1]), 2, clip=True)
    assert clipped.B[0, 0] == 0.0


def test_topology_edge_counts():
    assert np.count_nonzero(make_network(NetworkSpec("fully-connected", n=3)).B) == 6
    star = make_network(NetworkSpec("star", n=7))
    assert np.count_nonzero(star.B) == 12
    assert np.all(np.diag(star.B) == 0)
    a = make_network(NetworkSpec("erdos-renyi", n=7, seed=11))
    b = make_network(NetworkSpec("erdos-renyi", n=7, seed=11))
    np.testing.assert_array_equal(a.B, b.B)
    np.testing.assert_array_equal(a.gamma, b.gamma)


def test_network_ranges_and_validation():
    p = make_network(NetworkSpec("fully-connected", n=7, seed=2))
    off = p.B[~np.eye(7, dtype=bool)]
    assert np.all((off >= 0.05) & (off <= 0.5))
    assert np.all((p.gamma >= 0.1) & (p.gamma <= 0.4))
    with pytest.raises(ValueError):
        make_network(NetworkSpec("ring"))
    with pytest.raises(ValueError):
        make_network(NetworkSpec(edge_prob=1.5))
    assert len(NetworkSpec("ring", n=0, weight_range=(0.5, 0.1)).violations()) == 3


def test_schedule_lookup():
    a, b, c, d = (SisParams(x, 0.1) for x in (0.1, 0.2, 0.3, 0.4))
    s = ParamSchedule(((0.0, a), (12.0, b), (30.0, c), (49.0, d)))
    assert schedule_at(s, 5.0) is a
    assert schedule_at(s, 12.0) is b  # right-continuous
    assert schedule_at(s, 40.0) is c
    assert schedule_at(s, 100.0) is d
    assert ParamSchedule.constant(a).at(1e9) is a
    with pytest.raises(ValueError):
        s.at(-1.0)
    with pytest.raises(ValueError):
        ParamSchedule(((0.0, a), (0.0, b)))
    times = 0.2 * np.arange(301)
    assert switch_indices(s, times) == [60, 150, 245]
    # a grid point one ulp below the switch still belongs to the new regime
    assert s.at(np.nextafter(12.0, 0.0)) is b


def test_clamp_rescales_overshoot():
    m = SirNetworkModel(1)
    y, clamped = m.clamp(np.array([0.8, 0.6]))
    assert clamped
    assert y.sum() == pytest.approx(1.0)
    assert y[0] / y[1] == pytest.approx(0.8 / 0.6)
    y, clamped = m.clamp(np.array([-0.1, 0.2]))
    assert clamped and y[0] == 0.0
    assert not m.clamp(np.array([0.2, 0.2]))[1]
