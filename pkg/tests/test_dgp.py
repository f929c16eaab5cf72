import math

import mpmath
import numpy as np
import pytest

from conftest import connected_graph, random_graph
from peerfx.dgp import (
    ErrorCoupling,
    FormationConfig,
    StructuralParams,
    default_threshold,
    draw_covariates,
    draw_errors,
    group_rng,
    reduced_form_check,
    simulate_arrays,
    simulate_dataset,
    simulate_network,
    simulate_outcomes,
)
from peerfx.errors import ConfigError, GraphError
from peerfx.graph import build_graph
from peerfx.instruments import q_transform
from peerfx.kernels import row_normalize_stack


def test_default_threshold_value():
    # Phi^{-1}(p) = sqrt(2) erfinv(2p - 1)
    oracle = -mpmath.sqrt(2) * mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf("0.25") - 1)
    assert default_threshold() == pytest.approx(float(oracle), abs=1e-12)
    assert default_threshold() == pytest.approx(0.953873, abs=5e-7)


def test_default_threshold_gives_quarter_link_probability():
    c = default_threshold()
    # eta_i + eta_j ~ N(0, 2)
    tail = 0.5 * mpmath.erfc(c / mpmath.sqrt(2) / mpmath.sqrt(2))
    assert float(tail) == pytest.approx(0.25, abs=1e-12)


def test_link_frequency_independent_pairs():
    R, pairs = 200_000, 1
    rng = group_rng(1)
    A, *_ = simulate_arrays(R, 2, StructuralParams(), FormationConfig(), ErrorCoupling(), rng)
    freq = A[:, 0, 1].mean()
    assert abs(freq - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / (R * pairs))


def test_link_frequency_full_networks():
    R, n = 4000, 25
    rng = group_rng(2)
    A, *_ = simulate_arrays(R, n, StructuralParams(), FormationConfig(), ErrorCoupling(), rng)
    per_net = A.sum(axis=(1, 2)) / (n * (n - 1))
    # links within a network share eta draws; use the between-network spread
    tol = 4 * per_net.std(ddof=1) / math.sqrt(R)
    assert abs(per_net.mean() - 0.25) <= tol


def test_threshold_extremes():
    g, _ = simulate_network(6, FormationConfig(threshold=-math.inf), rng=0)
    assert g.adjacency.sum() == 30
    g, _ = simulate_network(6, FormationConfig(threshold=math.inf), rng=0)
    assert g.adjacency.sum() == 0


def test_noncooperative_formation():
    fc = FormationConfig(kind="noncooperative", threshold=-1.0)
    g, eta = simulate_network(30, fc, rng=3)
    A = g.adjacency
    assert np.array_equal(A, A.T) and not np.diagonal(A).any()
    assert 0 < A.sum() < 30 * 29
    g, _ = simulate_network(5, FormationConfig(kind="noncooperative", threshold=-math.inf), rng=0)
    assert g.adjacency.sum() == 20


def test_cooperative_with_pair_shocks_symmetric():
    g, _ = simulate_network(20, FormationConfig(pair_shock="normal"), rng=4)
    assert np.array_equal(g.adjacency, g.adjacency.T)


def test_covariates_moments():
    x = draw_covariates(1_000_000, rng=5)
    assert abs(x.mean() - 1) < 0.005
    assert abs(x.var() - 1) < 0.01
    np.testing.assert_array_equal(draw_covariates(50, rng=9), draw_covariates(50, rng=9))


def test_error_couplings():
    rng = np.random.default_rng(6)
    eta = rng.standard_normal(400_000)
    e0 = draw_errors(eta, ErrorCoupling("zero"), rng)
    assert abs(np.corrcoef(e0, eta)[0, 1]) < 0.01
    e1 = draw_errors(eta, ErrorCoupling("linear"), rng)
    assert np.corrcoef(e1, eta)[0, 1] == pytest.approx(1 / math.sqrt(2), abs=0.005)
    shift = ErrorCoupling("sine3").shift(eta)
    # sin on (0, 3) stays in (0, 1]
    assert np.all((shift > 0) & (shift <= 1))
    shift = ErrorCoupling("exp3").shift(eta)
    assert np.all((shift > 1) & (shift < math.exp(3)))


def test_bad_phi():
    with pytest.raises(ConfigError):
        ErrorCoupling("bogus")


def test_outcomes_no_feedback():
    rng = np.random.default_rng(7)
    g = random_graph(rng, 12, 0.3)
    x, eps = rng.normal(size=(2, 12))
    p = StructuralParams(alpha=0.3, delta=0.0, beta=1.5, gamma=-0.7)
    H = row_normalize_stack(g.adjacency)
    y = simulate_outcomes(g, x, eps, p)
    np.testing.assert_allclose(y, 0.3 + 1.5 * x - 0.7 * H @ x + eps, atol=1e-12)


def test_outcomes_empty_network():
    rng = np.random.default_rng(8)
    x, eps = rng.normal(size=(2, 7))
    y = simulate_outcomes(build_graph(7, []), x, eps, StructuralParams(alpha=1.0))
    np.testing.assert_allclose(y, 1.0 + x + eps, atol=1e-12)


def test_outcomes_solve_structural_system():
    rng = np.random.default_rng(9)
    p = StructuralParams(alpha=0.2, delta=0.9, beta=1.0, gamma=0.5)
    for _ in range(20):
        g = random_graph(rng, 25, 0.25)
        x, eps = rng.normal(size=(2, 25))
        y = simulate_outcomes(g, x, eps, p)
        H = row_normalize_stack(g.adjacency)
        lhs = y - p.delta * H @ y
        rhs = p.alpha + p.beta * x + p.gamma * H @ x + eps
        assert np.max(np.abs(lhs - rhs)) <= 1e-12
        implied = y - p.alpha - p.delta * H @ y - p.beta * x - p.gamma * H @ x
        np.testing.assert_allclose(implied, eps, atol=1e-10)


def test_delta_must_be_below_one():
    with pytest.raises(ConfigError):
        StructuralParams(delta=1.0)


def test_reduced_form_series():
    rng = np.random.default_rng(10)
    p = StructuralParams()
    for _ in range(10):
        g = connected_graph(rng, 15, 0.3)
        x, eps = rng.normal(size=(2, 15))
        assert reduced_form_check(g, x, eps, p, 40) < 1e-10
        # from S = 10 the transient eigencomponents have died out
        devs = np.array([reduced_form_check(g, x, eps, p, S) for S in range(10, 31)])
        assert devs.min() > 1e-12
        ratios = devs[1:] / devs[:-1]
        assert np.all((ratios > 0.3) & (ratios < 0.7))


def test_reduced_form_exact_without_feedback():
    rng = np.random.default_rng(11)
    g = connected_graph(rng, 10, 0.4)
    x, eps = rng.normal(size=(2, 10))
    assert reduced_form_check(g, x, eps, StructuralParams(delta=0.0), 0) < 1e-13


def test_reduced_form_lambda_zero():
    rng = np.random.default_rng(12)
    g = connected_graph(rng, 10, 0.4)
    x, eps = rng.normal(size=(2, 10))
    p = StructuralParams(delta=0.5, beta=1.0, gamma=-0.5)
    assert p.lam == 0.0
    assert reduced_form_check(g, x, eps, p, 40) < 1e-10


def test_reduced_form_rejects_isolated():
    g = build_graph(3, [(0, 1)])
    with pytest.raises(GraphError):
        reduced_form_check(g, np.ones(3), np.zeros(3), StructuralParams(), 5)


def test_dataset_determinism():
    a = simulate_dataset(5, 10, ec=ErrorCoupling("linear"), seed=42)
    b = simulate_dataset(5, 10, ec=ErrorCoupling("linear"), seed=42)
    c = simulate_dataset(5, 10, ec=ErrorCoupling("linear"), seed=43)
    assert a.groups == b.groups
    assert a.groups != c.groups


@pytest.mark.parametrize("phi", ["zero", "linear"])
def test_leave_out_instrument_uncorrelated_with_error(phi):
    """Q_1 x is built without agent i's links, so it is orthogonal to eps_i."""
    rng = group_rng(13)
    G, n = 2000, 25
    A, x, eps, _ = simulate_arrays(G, n, StructuralParams(), FormationConfig(), ErrorCoupling(phi), rng)
    from peerfx.kernels import leave_out_walks

    q1 = leave_out_walks(A.astype(float), x, 1)[0][..., 0].ravel()
    e = eps.ravel()
    r = np.corrcoef(q1, e)[0, 1]
    # cluster-robust z-statistic for the covariance
    prod = ((q1 - q1.mean()) * (e - e.mean())).reshape(G, n).sum(axis=1)
    z = prod.sum() / math.sqrt((prod**2).sum())
    assert abs(z) < 4, (r, z)
    if phi == "linear":
        hx = np.matmul(row_normalize_stack(A), x[..., None])[..., 0].ravel()
        prod = ((hx - hx.mean()) * (e - e.mean())).reshape(G, n).sum(axis=1)
        assert abs(prod.sum() / math.sqrt((prod**2).sum())) > 10
