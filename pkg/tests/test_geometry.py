import numpy as np
import pytest

from bdris_isac.geometry import (
    ScenarioConfig,
    TargetParams,
    build_geometry,
    dbm_to_watt,
    feed_channel,
    make_scenario,
    reflection_coeff,
    steering,
    upa_shape,
)


def test_dbm_conversion():
    assert dbm_to_watt(0.0) == pytest.approx(1e-3)
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(6.0) == pytest.approx(3.981071705534972e-3)


@pytest.mark.parametrize("n, shape", [(32, (4, 8)), (16, (4, 4)), (8, (2, 4)), (7, (1, 7)), (1, (1, 1))])
def test_upa_shape(n, shape):
    assert upa_shape(n) == shape


def test_geometry_layout():
    cfg = ScenarioConfig()
    g = build_geometry(cfg)
    lam = cfg.wavelength
    assert g.ris_positions.shape == (32, 3)
    assert np.allclose(g.ris_positions.mean(axis=0), 0.0)
    assert np.allclose(np.unique(np.round(np.diff(np.unique(g.ris_y)) / lam, 12)), 0.5)
    assert np.allclose(g.feed_positions[:, 0], 10 * lam)
    assert np.allclose(g.feed_positions[:, 2], 0.0)
    assert g.sensor_y.shape == (6,)


def test_steering_unit_modulus_and_broadside():
    cfg = ScenarioConfig(n_ris=8, n_sensor=4)
    g = build_geometry(cfg)
    sb = steering(g, TargetParams(np.array([0.0, 0.3]), np.array([0.0, -0.2]), np.array([1.0, 2.0j])))
    assert np.allclose(np.abs(sb.a_mat), 1.0)
    assert np.allclose(np.abs(sb.b_mat), 1.0)
    assert np.allclose(sb.a_mat[:, 0], 1.0) and np.allclose(sb.b_mat[:, 0], 1.0)
    assert np.allclose(sb.alpha, [1.0, 2.0j])


@pytest.mark.parametrize("which", ["theta", "phi"])
def test_steering_derivatives_match_finite_differences(which):
    g = build_geometry(ScenarioConfig(n_ris=8, n_sensor=4))
    th, ph = np.array([0.2, -0.7]), np.array([-0.4, 0.5])
    h = 1e-6
    d = np.zeros(2)
    d[:] = h
    if which == "theta":
        plus, minus = TargetParams(th + d, ph, np.ones(2)), TargetParams(th - d, ph, np.ones(2))
    else:
        plus, minus = TargetParams(th, ph + d, np.ones(2)), TargetParams(th, ph - d, np.ones(2))
    sp, sm = steering(g, plus), steering(g, minus)
    s0 = steering(g, TargetParams(th, ph, np.ones(2)))
    fd_a = (sp.a_mat - sm.a_mat) / (2 * h)
    fd_b = (sp.b_mat - sm.b_mat) / (2 * h)
    da = s0.da_theta if which == "theta" else s0.da_phi
    db = s0.db_theta if which == "theta" else s0.db_phi
    assert np.allclose(da, fd_a, rtol=1e-6, atol=1e-6)
    assert np.allclose(db, fd_b, rtol=1e-6, atol=1e-6)


def test_feed_channel_near_field_amplitude():
    cfg = ScenarioConfig()
    g = build_geometry(cfg)
    h = feed_channel(cfg, g)
    assert h.shape == (cfg.n_ris, cfg.n_tx)
    d = np.linalg.norm(g.ris_positions[:, None, :] - g.feed_positions[None], axis=2)
    gain = 10 ** 0.3 * 10 ** 0.3
    assert np.allclose(np.abs(h), cfg.wavelength * np.sqrt(gain) / (4 * np.pi * d))


def test_reflection_coefficient_endpoints():
    assert reflection_coeff(0.0) == pytest.approx(1.0)
    assert abs(reflection_coeff(0.5)) == pytest.approx(1.1)
    assert np.angle(reflection_coeff(0.25)) == pytest.approx(np.pi / 2)


def test_config_validation():
    with pytest.raises(ValueError, match="weight_rho"):
        ScenarioConfig(weight_rho=1.0)
    with pytest.raises(ValueError, match="sum to"):
        ScenarioConfig(n_ris=8, topology="group", group_sizes=(4, 3))
    with pytest.raises(ValueError):
        ScenarioConfig(n_ris=8, topology="group", n_groups=3)
    with pytest.raises(ValueError, match="target angles"):
        ScenarioConfig(n_targets=4)
    with pytest.raises(ValueError):
        ScenarioConfig(n_users=0)
    assert ScenarioConfig(n_ris=8, topology="group", group_sizes=(2, 6)).topology_spec().group_sizes == (2, 6)


def test_scenario_determinism_and_stream_independence():
    cfg = ScenarioConfig(n_ris=8, n_users=2)
    a, b = make_scenario(cfg, 5), make_scenario(cfg, 5)
    assert np.array_equal(a.channels.users, b.channels.users)
    assert np.array_equal(a.targets.coeffs, b.targets.coeffs)
    assert np.array_equal(a.init_rng().standard_normal(3), b.init_rng().standard_normal(3))
    # changing the number of targets does not perturb the user channels
    c = make_scenario(ScenarioConfig(n_ris=8, n_users=2, n_targets=3), 5)
    assert np.array_equal(a.channels.users, c.channels.users)
    assert not np.array_equal(a.channels.users, make_scenario(cfg, 6).channels.users)


def test_user_channel_statistics():
    scn = make_scenario(ScenarioConfig(n_ris=32, n_users=4), 0)
    powers = [np.mean(np.abs(make_scenario(ScenarioConfig(n_ris=32, n_users=4), s).channels.users) ** 2) for s in range(50)]
    assert np.mean(powers) == pytest.approx(1.0, rel=0.05)
    assert scn.channels.users.dtype == complex
