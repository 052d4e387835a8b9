import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gaussian_gram, reference_qp
from shieldscatter.errors import ConfigError, DomainError, SolverError
from shieldscatter.ocsvm import (
    OcsvmConfig,
    OcsvmModel,
    auto_sigma,
    decide,
    decision_function,
    dual_objective,
    gaussian_kernel,
    outlier_fraction,
    solve_dual,
    support_fraction,
    train,
)


def test_kernel_examples():
    a = np.array([0.3, -1.0, 2.0])
    assert gaussian_kernel(a, a, 0.7) == 1.0
    sigma = 1.3
    b = a + np.array([sigma * math.sqrt(2), 0, 0])
    assert gaussian_kernel(a, b, sigma) == pytest.approx(math.exp(-1))
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.normal(size=(2, 6))
        assert gaussian_kernel(x, y, 2.0) == gaussian_kernel(y, x, 2.0)
    with pytest.raises(DomainError):
        gaussian_kernel([1, 2], [1, 2, 3], 1.0)


def test_auto_sigma_examples():
    assert auto_sigma([[0.0, 0.0], [0.0, 4.0]]) == pytest.approx(4.0)
    assert auto_sigma(np.ones((10, 3))) == 1.0
    X = np.random.default_rng(1).normal(size=(80, 4))
    assert auto_sigma(2.5 * X) == pytest.approx(2.5 * auto_sigma(X))
    big = np.random.default_rng(2).normal(size=(300, 4))
    assert auto_sigma(big) == auto_sigma(big)


def test_config_validation():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ConfigError):
            OcsvmConfig(nu=bad)
    with pytest.raises(ConfigError):
        OcsvmConfig(sigma=-1.0)
    with pytest.raises(ConfigError):
        OcsvmConfig(sigma="median")


def test_two_identical_points_nu_one():
    m = train([[1.0, 2.0], [1.0, 2.0]], OcsvmConfig(nu=1.0))
    assert np.allclose(m.alphas, [0.5, 0.5])


def test_nu_one_forces_uniform_alphas():
    X = np.random.default_rng(3).normal(size=(25, 3))
    m = train(X, OcsvmConfig(nu=1.0))
    assert m.alphas.size == 25
    assert np.all(m.alphas == 1 / 25)


def test_matches_reference_qp_2d():
    X = np.random.default_rng(4).normal(size=(30, 2))
    m = train(X, OcsvmConfig(nu=0.2))
    _, ref = reference_qp(gaussian_gram(X, m.sigma), 0.2)
    assert abs(dual_objective(m) - ref) <= 1e-4
    assert dual_objective(m) <= ref + 1e-6


@settings(max_examples=30, deadline=None)
@given(
    st.integers(2, 60),
    st.integers(1, 6),
    st.sampled_from([0.05, 0.1, 0.3, 0.5, 0.9, 1.0]),
    st.integers(0, 10_000),
)
def test_trained_model_is_feasible(l, d, nu, seed):
    X = np.random.default_rng(seed).normal(size=(l, d))
    m = train(X, OcsvmConfig(nu=nu))
    C = 1 / (nu * l)
    assert abs(m.alphas.sum() - 1.0) <= 1e-9
    assert np.all(m.alphas > 0) and np.all(m.alphas <= C + 1e-12)
    assert m.violation <= 1e-9


def test_duplicated_points_score_zero():
    X = np.tile([0.5, -0.25, 3.0], (7, 1))
    m = train(X, OcsvmConfig(nu=0.5))
    assert m.rho == pytest.approx(1.0)
    score, verdict = decide(m, X[0])
    assert score == pytest.approx(0.0, abs=1e-12)
    assert verdict == "legitimate"


def test_far_query_is_attack():
    X = np.random.default_rng(5).normal(size=(50, 4))
    m = train(X, OcsvmConfig(nu=0.2))
    score, verdict = decide(m, np.full(4, 1e3))
    assert score == pytest.approx(-m.rho, abs=1e-12)
    assert verdict == "attack"


def test_zero_score_counts_as_legitimate():
    m = OcsvmModel(np.zeros((1, 2)), np.array([1.0]), 1.0, 1.0, 0.5, 1)
    assert decide(m, [0.0, 0.0]) == (0.0, "legitimate")


def test_decide_shape_check():
    m = train(np.random.default_rng(6).normal(size=(10, 3)))
    with pytest.raises(DomainError):
        decide(m, np.zeros(4))


def test_verdict_invariant_to_support_vector_order():
    rng = np.random.default_rng(7)
    m = train(rng.normal(size=(120, 5)), OcsvmConfig(nu=0.3))
    perm = rng.permutation(m.alphas.size)
    p = OcsvmModel(m.support_vectors[perm], m.alphas[perm], m.rho, m.sigma, m.nu, m.training_size)
    probe = rng.normal(size=(200, 5)) * 1.5
    assert np.allclose(decision_function(m, probe), decision_function(p, probe), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.1, 0.2, 0.5]))
def test_retraining_on_permuted_input(seed, nu):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(150, 4))
    probe = rng.normal(size=(100, 4)) * 1.5
    cfg = OcsvmConfig(nu=nu, sigma=1.5)
    a = decision_function(train(X, cfg), probe)
    b = decision_function(train(X[rng.permutation(150)], cfg), probe)
    assert np.max(np.abs(a - b)) <= 1e-8
    assert np.array_equal(a >= 0, b >= 0) or np.min(np.abs(a)) < 1e-8


def test_nu_property_held_out():
    rng = np.random.default_rng(8)
    for nu in (0.1, 0.2):
        for run in range(20):
            X = rng.normal(size=(300, 3))
            m = train(X, OcsvmConfig(nu=nu))
            assert outlier_fraction(m, X) <= nu + 0.05
            assert support_fraction(m) >= nu - 0.05


def test_solver_error_when_iterations_exhausted():
    X = np.random.default_rng(9).normal(size=(40, 3))
    with pytest.raises(SolverError) as exc:
        train(X, OcsvmConfig(nu=0.1, max_iterations=1))
    assert exc.value.violation > 0
    K = gaussian_gram(X, 1.0)
    alpha, rho, it, viol = solve_dual(K, 0.1)
    assert viol <= 1e-9 and it > 0


def test_model_json_round_trip(tmp_path):
    X = np.random.default_rng(10).normal(size=(40, 3))
    m = train(X, OcsvmConfig(nu=0.25))
    path = tmp_path / "m.json"
    m.save(path)
    back = OcsvmModel.load(path)
    probe = np.random.default_rng(11).normal(size=(30, 3))
    assert np.array_equal(decision_function(m, probe), decision_function(back, probe))
    bad = m.to_dict()
    bad["version"] = 99
    with pytest.raises(ConfigError):
        OcsvmModel.from_dict(bad)
