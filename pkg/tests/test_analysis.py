import numpy as np
import pytest
from scipy import sparse

from delaydiff.analysis import (
    block_max_norm,
    build_operators,
    check_mean_stability,
    mean_error_trajectory,
    network_weighting,
    operators_for,
    spectral_radius,
    steady_state_msd,
    stepsize_bounds,
    transient_msd,
    verify_rho_relation,
)
from delaydiff.model import SignalModel, network_covariance, noise_matrix
from delaydiff.topology import (
    DelayProfile,
    NetworkTopology,
    build_delay_profile,
    build_uniform_combination,
    partition_combination,
)

from oracles import (
    kron_steady_state_msd,
    kron_transient_msd,
    lyapunov_steady_state_msd,
    power_lambda_max,
    random_instance,
    random_spd,
)


def scalar_ops(mu, sx=1.0, sv=0.2, w=1.0):
    model = SignalModel.isotropic([w], [sx], [sv])
    ext = partition_combination(np.ones((1, 1)), DelayProfile.from_matrix([[0]]))
    return model, build_operators(ext, model, mu)


def two_node(gamma=1, sx=(1.0, 1.0)):
    topo = NetworkTopology.from_edges(2, [(0, 1)])
    A = build_uniform_combination(topo)
    delays = build_delay_profile(topo, "constant", delay=gamma)
    model = SignalModel.isotropic([0.7], list(sx), [0.1, 0.1])
    return topo, A, delays, model


def test_zero_step_gives_extended_combination():
    topo, A, delays, model = two_node(gamma=2)
    ops = operators_for("atc_delayed", A, delays, model, 0.0)
    ext = partition_combination(A, delays)
    np.testing.assert_array_equal(ops.B, ext.lifted(1))
    assert not ops.G.any()
    rep = check_mean_stability(ops.B, model, 0.0)
    assert rep.spectral_radius == pytest.approx(1.0, abs=1e-12)
    assert not rep.stable


def test_scalar_mean_matrix():
    _, ops = scalar_ops(0.1)
    np.testing.assert_allclose(ops.B, [[0.9]], rtol=0, atol=1e-15)
    np.testing.assert_allclose(ops.G, [[0.01 * 0.2]], rtol=1e-14)


def test_mean_matrix_structure():
    topo, A, delays, model = two_node(gamma=1)
    mu = np.array([0.1, 0.3])
    ops = operators_for("atc_delayed", A, delays, model, mu)
    # last block rows shift the newest intermediate estimate, (I - mu R) w~, down
    np.testing.assert_allclose(ops.B[2:, :2], np.diag(1 - mu), rtol=1e-15)
    assert not ops.B[2:, 2:].any()
    # first block column carries (I - mu R)
    Ae = partition_combination(A, delays).lifted(1)
    np.testing.assert_allclose(ops.B[:, :2], Ae[:, :2] * (1 - mu), rtol=1e-15)
    np.testing.assert_array_equal(ops.B[:, 2:], Ae[:, 2:])


def test_weighting_selects_current_block():
    S = network_weighting(3, 2, 4)
    assert S.shape == (24, 24)
    assert np.trace(S) == 6
    np.testing.assert_array_equal(S[:6, :6], np.eye(6))


@pytest.mark.parametrize("seed", range(5))
def test_stepsize_bounds_against_power_iteration(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 6))
    R = np.array([random_spd(rng, m) for _ in range(4)])
    model = SignalModel(np.zeros(m), R, np.ones(4))
    expected = [2.0 / power_lambda_max(Rk) for Rk in R]
    np.testing.assert_allclose(stepsize_bounds(model), expected, rtol=1e-8)


def test_stepsize_bounds_isotropic():
    model = SignalModel.isotropic(np.zeros(3), [0.5, 2.0], [1, 1])
    np.testing.assert_allclose(stepsize_bounds(model), [4.0, 1.0])


def test_block_max_norm_examples():
    assert block_max_norm(np.diag([0.5, -0.9]), 1) == pytest.approx(0.9)
    X = np.array([[0.5, 0.2], [0.1, 0.3]])
    assert block_max_norm(X, 1) == pytest.approx(0.7)
    assert block_max_norm(X, 2) == pytest.approx(np.linalg.norm(X, 2))
    with pytest.raises(ValueError):
        block_max_norm(np.eye(3), 2)


def test_spectral_radius_sparse_and_dense_agree():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 30)) / 10
    assert spectral_radius(sparse.csr_array(X)) == pytest.approx(spectral_radius(X), rel=1e-12)


def test_stable_inside_bounds():
    topo, A, delays, model = two_node(gamma=3, sx=(1.0, 2.0))
    mu = 0.9 * stepsize_bounds(model)
    ops = operators_for("atc_delayed", A, delays, model, mu)
    rep = check_mean_stability(ops.B, model, mu)
    assert rep.block_max_norm_condition and rep.stable


def test_unstable_above_bound():
    topo, A, delays, model = two_node(gamma=1)
    mu = 1.5 * stepsize_bounds(model)
    ops = operators_for("atc_delayed", A, delays, model, mu)
    rep = check_mean_stability(ops.B, model, mu)
    assert not rep.block_max_norm_condition
    assert rep.spectral_radius >= 1.0 and not rep.stable


def test_mean_trajectory_zero_operator():
    traj = mean_error_trajectory(np.zeros((4, 4)), [1.0, 2.0], 3)
    assert traj.shape == (3, 4) and not traj.any()


def test_mean_trajectory_scalar():
    _, ops = scalar_ops(0.1, w=2.0)
    traj = mean_error_trajectory(ops.B, [2.0], 10)
    np.testing.assert_allclose(traj[:, 0], 2.0 * 0.9 ** np.arange(1, 11), rtol=1e-13)


def test_noise_operator_cases():
    topo, A, delays, model = two_node(gamma=2)
    quiet = SignalModel(model.w_star, model.covariances, [0.0, 0.0])
    assert not operators_for("atc_delayed", A, delays, quiet, 0.1).G.any()
    single = SignalModel.isotropic([1.0, 0.0], [1.5], [0.3])
    ops = operators_for("atc_ideal", np.ones((1, 1)), DelayProfile.from_matrix([[0]]), single, 0.2)
    np.testing.assert_allclose(ops.G, 0.04 * 0.3 * 1.5 * np.eye(2), rtol=1e-14)


def test_noise_operator_psd():
    rng = np.random.default_rng(9)
    for _ in range(10):
        topo, A, delays, model, mu = random_instance(rng, max_gamma=4)
        G = operators_for("atc_delayed", A, delays, model, mu).G
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G)[0] >= -1e-14 * max(1.0, np.abs(G).max())


def test_transient_noiseless_decays():
    topo, A, delays, model = two_node(gamma=2)
    quiet = SignalModel(model.w_star, model.covariances, [0.0, 0.0])
    ops = operators_for("atc_delayed", A, delays, quiet, 0.3)
    curve = transient_msd(ops.B, ops.G, quiet.w_star, 200, 2)
    # starts from ||w*||^2 = 0.49 and decays to zero without noise
    assert np.all(curve.values <= 0.49 + 1e-15)
    assert curve.values[-1] < 1e-6
    assert curve.source == "theory"
    assert curve.metadata["rho_B"] < 1


def test_transient_scalar_closed_form():
    mu, sx, sv, w = 0.1, 1.0, 0.2, 1.5
    _, ops = scalar_ops(mu, sx, sv, w)
    b, g = 1 - mu * sx, mu**2 * sv * sx
    i = np.arange(50)
    expected = b ** (2 * (i + 1)) * w**2 + g * (1 - b ** (2 * (i + 1))) / (1 - b**2)
    curve = transient_msd(ops.B, ops.G, [w], 50, 1)
    np.testing.assert_allclose(curve.values, expected, rtol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_transient_matches_kronecker_recursion(seed):
    rng = np.random.default_rng(100 + seed)
    while True:
        topo, A, delays, model, mu = random_instance(rng, max_nodes=4, max_dim=3, max_gamma=3)
        ops = operators_for("atc_delayed", A, delays, model, mu)
        if ops.B.shape[0] <= 40:
            break
    got = transient_msd(ops.B, ops.G, model.w_star, 60, model.num_nodes).values
    ref = kron_transient_msd(ops.B, ops.G, model.w_star, 60, model.num_nodes, ops.Sigma_bar)
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=0)


def test_transient_warns_when_unstable():
    _, ops = scalar_ops(2.5)
    with pytest.warns(RuntimeWarning):
        transient_msd(ops.B, ops.G, [1.0], 5, 1)


def test_steady_state_zero_noise():
    topo, A, delays, model = two_node()
    quiet = SignalModel(model.w_star, model.covariances, [0.0, 0.0])
    ops = operators_for("atc_delayed", A, delays, quiet, 0.2)
    ss = steady_state_msd(ops.B, ops.G, 2, 1)
    assert ss.value == 0.0 and ss.converged


@pytest.mark.parametrize("mu", [0.01, 0.1, 0.5, 1.2])
def test_steady_state_scalar_closed_form(mu):
    sx, sv = 1.3, 0.25
    _, ops = scalar_ops(mu, sx, sv)
    b, g = 1 - mu * sx, mu**2 * sv * sx
    ss = steady_state_msd(ops.B, ops.G, 1, 1)
    assert ss.converged
    assert ss.value == pytest.approx(g / (1 - b**2), rel=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_steady_state_matches_linear_solve(seed):
    rng = np.random.default_rng(200 + seed)
    while True:
        topo, A, delays, model, mu = random_instance(rng, max_nodes=4, max_dim=3, max_gamma=3)
        ops = operators_for("atc_delayed", A, delays, model, mu)
        if ops.B.shape[0] <= 40:
            break
    N, M = model.num_nodes, model.dim
    ss = steady_state_msd(ops.B, ops.G, N, M)
    assert ss.converged
    ref = kron_steady_state_msd(ops.B, ops.G, N, ops.Sigma_bar)
    assert ss.value == pytest.approx(ref, rel=1e-9)
    assert ss.value == pytest.approx(lyapunov_steady_state_msd(ops.B, ops.G, N, ops.Sigma_bar), rel=1e-9)


def test_steady_state_unstable_reports_nan():
    _, ops = scalar_ops(2.5)
    ss = steady_state_msd(ops.B, ops.G, 1, 1)
    assert not ss.stable and np.isnan(ss.value)


def test_steady_state_limit_of_transient():
    topo, A, delays, model = two_node(gamma=2)
    ops = operators_for("atc_delayed", A, delays, model, 0.2)
    curve = transient_msd(ops.B, ops.G, model.w_star, 3000, 2)
    ss = steady_state_msd(ops.B, ops.G, 2, 1)
    assert curve.values[-1] == pytest.approx(ss.value, rel=1e-10)


def test_rho_relation_examples():
    r = verify_rho_relation(np.array([[0.9]]))
    assert r.rho_F == pytest.approx(0.81, abs=1e-15) and r.holds
    assert verify_rho_relation(np.eye(3)).rho_F == pytest.approx(1.0)
    with pytest.raises(ValueError):
        verify_rho_relation(np.eye(61))


def test_no_delay_matches_classical_operators():
    rng = np.random.default_rng(4)
    topo, A, _, model, mu = random_instance(rng, nodes=5, dim=3, gamma=0)
    zero = build_delay_profile(topo, "constant", delay=0)
    ops = operators_for("atc_delayed", A, zero, model, mu)
    Acal = np.kron(A, np.eye(3))
    Mm = np.kron(np.diag(mu), np.eye(3))
    B = Acal.T @ (np.eye(15) - Mm @ network_covariance(model))
    G = Acal.T @ noise_matrix(model, mu) @ Acal
    np.testing.assert_array_equal(ops.B, B)
    np.testing.assert_allclose(ops.G, G, rtol=0, atol=1e-17)
    ideal = operators_for("atc_ideal", A, zero, model, mu)
    np.testing.assert_array_equal(ideal.B, ops.B)
    np.testing.assert_array_equal(ideal.G, ops.G)


def test_noncooperative_operator_is_block_diagonal():
    topo, A, delays, model = two_node(gamma=3)
    ops = operators_for("noncooperative", A, delays, model, 0.1)
    np.testing.assert_allclose(ops.B, np.diag([0.9, 0.9]), rtol=1e-15)
    with pytest.raises(ValueError):
        operators_for("atc_synchronous", A, delays, model, 0.1)


def test_sufficient_condition_implies_stability():
    rng = np.random.default_rng(11)
    for _ in range(40):
        topo, A, delays, model, mu = random_instance(rng, max_gamma=5, step_fraction=(0.0, 1.4))
        ops = operators_for("atc_delayed", A, delays, model, mu)
        rep = check_mean_stability(ops.B, model, mu)
        if rep.block_max_norm_condition:
            assert rep.spectral_radius < 1.0


@pytest.mark.parametrize("mu_scale", [0.3, 0.9, 1.3])
def test_stability_verdict_independent_of_delay(mu_scale):
    topo = NetworkTopology.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    A = build_uniform_combination(topo)
    model = SignalModel.isotropic([1.0, -0.5], [1.0, 0.9, 1.1, 1.2], [0.1] * 4)
    mu = mu_scale * stepsize_bounds(model)
    verdicts = set()
    for gamma in (0, 1, 2, 5, 10):
        delays = build_delay_profile(topo, "constant", delay=gamma)
        ops = operators_for("atc_delayed", A, delays, model, mu)
        verdicts.add(check_mean_stability(ops.B, model, mu).stable)
    assert len(verdicts) == 1
    assert verdicts == {mu_scale < 1}
