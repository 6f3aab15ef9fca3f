import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from src.dataset import Dataset, Inputs
from src.dsl import build_kernel, parse_kernel_spec
from src.gp import (
    NOISE_NAME,
    condition,
    default_noise,
    fit_gp,
    loo_residuals,
    nlml,
    nlml_and_grad,
    nlml_objective,
    predict,
    sample_prior,
    scan_switches,
)
from src.kernels import SE, Binding, default_params, eval_kernel, jittered_cholesky, kernel_diag
from src.optim import OptConfig, ValueAndGrad, fd_check
from tests.conftest import (
    BURST_GROUPS,
    BURST_INIT,
    BURST_KERNEL,
    REGIME_KERNEL,
    burst_inputs,
    line_inputs,
    regime_inputs,
)

LOG_2PI = math.log(2 * math.pi)


def se_model(X, ls=1.0, var=1.0):
    expr = SE("se1", (Binding("x"),))
    params = default_params(expr, X, {"se1.var": var, "se1.ls.x": ls}, {"se1.ls.x": (1e-2, 1e2)})
    return expr, params


class TestNlml:
    def test_single_point(self):
        X = Inputs.from_columns(x=[0.0])
        expr, params = se_model(X)
        assert nlml(expr, params, 0.0, Dataset(X, [0.0])) == pytest.approx(0.91893853, abs=1e-7)
        assert nlml(expr, params, 0.0, Dataset(X, [1.0])) == pytest.approx(1.41893853, abs=1e-7)

    def test_zero_targets(self):
        X = Inputs.from_columns(x=[0.0, 0.8])
        expr, params = se_model(X)
        K = eval_kernel(expr, params, X) + 0.1 * np.eye(2)
        L, _ = jittered_cholesky(K)
        expected = float(np.sum(np.log(np.diag(L)))) + LOG_2PI
        assert nlml(expr, params, 0.1, Dataset(X, [0.0, 0.0])) == pytest.approx(expected, rel=1e-12)

    def test_matches_gaussian_density(self, smooth_data):
        expr, params = se_model(smooth_data.inputs, ls=1.3)
        n = len(smooth_data)
        K = eval_kernel(expr, params, smooth_data.inputs) + 0.05 * np.eye(n)
        _, jitter = jittered_cholesky(K)
        expected = -multivariate_normal(np.zeros(n), K + jitter * np.eye(n)).logpdf(smooth_data.y)
        assert nlml(expr, params, 0.05, smooth_data) == pytest.approx(expected, rel=1e-9)

    def test_permutation_invariant(self, smooth_data, rng):
        expr, params = se_model(smooth_data.inputs)
        perm = rng.permutation(len(smooth_data))
        assert nlml(expr, params, 0.1, smooth_data.take(perm)) == pytest.approx(
            nlml(expr, params, 0.1, smooth_data), rel=1e-10
        )

    def test_noise_gradient_on_zero_targets(self, rng):
        X = line_inputs(rng, 6)
        expr, params = se_model(X)
        params = params.updated(**{n: {"lower": params[n], "upper": params[n]} for n in params.names})
        data = Dataset(X, np.zeros(6))
        _, grad = nlml_and_grad(expr, params, 0.2, data)
        Ky = eval_kernel(expr, params, X) + 0.2 * np.eye(6)
        # pure complexity term: 1/2 tr(K_y^-1) * sigma_n^2
        assert grad[-1] == pytest.approx(0.5 * 0.2 * np.trace(np.linalg.inv(Ky)), rel=1e-6)
        assert grad[-1] > 0


# --- Gradient checks on the three model families ---


def _problem(name: str, rng):
    n = 40
    if name == "se":
        X, groups, init, text = line_inputs(rng, n), None, None, "se(x)"
    elif name == "regime":
        X, groups, init, text = regime_inputs(rng, n), None, None, REGIME_KERNEL
    else:
        X, groups, init, text = burst_inputs(rng, n), BURST_GROUPS, BURST_INIT, BURST_KERNEL
    expr = build_kernel(parse_kernel_spec(text), X.columns, groups)
    params = default_params(expr, X, init)
    return expr, params, Dataset(X, rng.standard_normal(n))


@pytest.mark.parametrize("name,tolerance", [("se", 1e-5), ("regime", 1e-4), ("burst", 1e-4)])
def test_nlml_gradient_matches_finite_differences(name, tolerance, rng):
    expr, params, data = _problem(name, rng)
    joint, fun = nlml_objective(expr, params, data)
    vg = ValueAndGrad(fun)
    check = fd_check(vg.value, vg.grad, joint)
    assert set(check.errors) == set(joint.free_names)
    assert check.max_error <= tolerance, max(check.errors, key=check.errors.get)


def test_fixed_noise_drops_out_of_gradient(smooth_data):
    expr, params = se_model(smooth_data.inputs)
    noise = default_noise(0.01, 0.01, 0.01)
    joint, fun = nlml_objective(expr, params, smooth_data, noise)
    _, grad = fun(joint.free_vector())
    assert NOISE_NAME not in joint.free_names
    assert grad.shape == (len(joint.free_names),)


# --- Posterior ---


class TestPredict:
    @pytest.mark.parametrize("seed", range(20))
    def test_noise_free_interpolation(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 21))
        X = Inputs.from_columns(x=np.linspace(0.0, 0.7 * n, n))
        y = rng.uniform(-2.0, 2.0, n)
        expr, params = se_model(X, ls=0.5)
        state = condition(expr, params, 0.0, Dataset(X, y))
        assert np.max(np.abs(predict(state, X).mean - y)) <= 1e-6

    def test_prior_reversion_far_away(self, smooth_data):
        expr, params = se_model(smooth_data.inputs, var=2.0)
        state = condition(expr, params, 0.1, smooth_data)
        post = predict(state, Inputs.from_columns(x=[1000.0]))
        assert abs(post.mean[0]) < 1e-12
        assert post.var_latent[0] == pytest.approx(2.0)
        assert post.var_noisy[0] == pytest.approx(2.1)

    def test_single_training_point(self):
        X, Xs = Inputs.from_columns(x=[0.0]), Inputs.from_columns(x=[0.3, 2.0])
        expr, params = se_model(X, ls=1.0, var=1.5)
        state = condition(expr, params, 0.2, Dataset(X, [0.7]))
        post = predict(state, Xs)
        k = 1.5 * np.exp(-0.5 * np.array([0.3, 2.0]) ** 2)
        assert np.allclose(post.mean, k * 0.7 / 1.7, atol=1e-6)
        assert np.allclose(post.var_latent, 1.5 - k**2 / 1.7, atol=1e-6)

    def test_posterior_variance_below_prior(self, smooth_data, rng):
        expr, params = se_model(smooth_data.inputs, ls=0.8)
        state = condition(expr, params, 0.05, smooth_data)
        Xs = line_inputs(rng, 50, -2.0, 12.0)
        post = predict(state, Xs)
        assert np.all(post.var_latent <= kernel_diag(expr, params, Xs) + 1e-12)

    def test_more_data_never_increases_variance(self, rng):
        for _ in range(10):
            X = line_inputs(rng, 12)
            data = Dataset(X, rng.standard_normal(12))
            expr, params = se_model(X, ls=float(rng.uniform(0.3, 3.0)))
            Xs = line_inputs(rng, 20)
            fewer = predict(condition(expr, params, 0.1, data.take(np.arange(11))), Xs)
            more = predict(condition(expr, params, 0.1, data), Xs)
            assert np.all(more.var_latent <= fewer.var_latent + 1e-10)

    def test_per_point_noise(self, smooth_data):
        expr, params = se_model(smooth_data.inputs)
        noise = np.full(len(smooth_data), 0.1)
        a = predict(condition(expr, params, noise, smooth_data), smooth_data.inputs)
        b = predict(condition(expr, params, 0.1, smooth_data), smooth_data.inputs)
        assert np.allclose(a.mean, b.mean, atol=1e-12)
        assert np.allclose(a.var_noisy, b.var_noisy, atol=1e-12)

    def test_custom_test_noise(self, smooth_data):
        expr, params = se_model(smooth_data.inputs)
        state = condition(expr, params, 0.1, smooth_data)
        post = predict(state, smooth_data.inputs, Xstar_noise=np.full(len(smooth_data), 0.5))
        assert np.allclose(post.var_noisy - post.var_latent, 0.5)


def test_loo_residuals_match_refits(smooth_data):
    expr, params = se_model(smooth_data.inputs)
    state = condition(expr, params, 0.1, smooth_data)
    fast = loo_residuals(state)
    n = len(smooth_data)
    for i in range(0, n, 7):
        rest = np.delete(np.arange(n), i)
        held = condition(expr, params, 0.1, smooth_data.take(rest))
        mean = predict(held, smooth_data.inputs.take([i])).mean[0]
        assert fast[i] == pytest.approx(smooth_data.y[i] - mean, rel=1e-5, abs=1e-8)


class TestSamplePrior:
    def test_deterministic(self, rng):
        X = line_inputs(rng, 15)
        expr, params = se_model(X)
        a = sample_prior(expr, params, X, 4, seed=9)
        assert a.shape == (15, 4)
        assert np.array_equal(a, sample_prior(expr, params, X, 4, seed=9))
        assert not np.array_equal(a, sample_prior(expr, params, X, 4, seed=10))

    def test_empirical_covariance(self, rng):
        X = line_inputs(rng, 10)
        expr, params = se_model(X, ls=2.0)
        draws = sample_prior(expr, params, X, 10_000, seed=1)
        K = eval_kernel(expr, params, X)
        empirical = draws @ draws.T / draws.shape[1]
        assert np.linalg.norm(empirical - K) / np.linalg.norm(K) <= 0.05


# --- Fitting ---


class TestFit:
    def test_recovers_noise_level(self, smooth_data):
        expr, params = se_model(smooth_data.inputs)
        state, report = fit_gp(expr, params, smooth_data, config=OptConfig(restarts=3, seed=1))
        assert report.best_value == min(r.value for r in report.restarts)
        assert 0.002 <= state.noise_var <= 0.05
        assert nlml(expr, state.params, state.noise_var, smooth_data) == pytest.approx(report.best_value, rel=1e-9)

    def test_deterministic(self, smooth_data):
        expr, params = se_model(smooth_data.inputs)
        config = OptConfig(restarts=3, seed=4)
        _, a = fit_gp(expr, params, smooth_data, config=config)
        _, b = fit_gp(expr, params, smooth_data, config=config)
        assert np.array_equal(a.params.free_vector(), b.params.free_vector())

    def test_interior_optimum_is_stationary(self, smooth_data):
        expr, params = se_model(smooth_data.inputs)
        state, report = fit_gp(expr, params, smooth_data, config=OptConfig(restarts=2, gtol=1e-9, max_iter=500))
        if report.active_bounds:
            pytest.skip("optimum on a bound")
        _, grad = nlml_and_grad(expr, state.params, state.noise, smooth_data)
        assert np.max(np.abs(grad)) <= 1e-3 * (1 + abs(report.best_value))


class TestSwitchScan:
    TEXT = "swneg(x,A)*se(x) + sw(x,A)*se(x)"
    SHAPE = {"A.a": 3.0, "se1.ls.x": 0.3, "se2.ls.x": 3.0}

    def regime_change(self, seed=0):
        rng = np.random.default_rng(seed)
        X = Inputs.from_columns(x=np.sort(rng.uniform(0.0, 10.0, 200)))
        expr = build_kernel(parse_kernel_spec(self.TEXT), X.columns)
        truth = default_params(expr, X, {**self.SHAPE, "A.x0": 2.5})
        y = sample_prior(expr, truth, X, 1, seed)[:, 0] + 0.1 * rng.standard_normal(200)
        return expr, Dataset(X, y)

    def test_moves_the_switch_towards_the_change(self):
        expr, data = self.regime_change()
        params = default_params(expr, data.inputs, self.SHAPE)
        scanned = scan_switches(expr, params, data, default_noise(0.01))
        assert abs(scanned["A.x0"] - 2.5) <= 1.1
        for name in params.names:
            if name != "A.x0":
                assert scanned[name] == params[name]

    def test_fixed_switch_is_left_alone(self):
        expr, data = self.regime_change()
        params = default_params(expr, data.inputs, self.SHAPE, {"A.x0": (6.0, 6.0)})
        assert scan_switches(expr, params, data) == params

    def test_fit_starts_from_the_scanned_point(self):
        expr, data = self.regime_change()
        params = default_params(expr, data.inputs, self.SHAPE)
        _, report = fit_gp(expr, params, data, config=OptConfig(restarts=1, max_iter=1, switch_scan=9))
        start = dict(zip(report.params.free_names, report.restarts[0].start))
        assert abs(start["A.x0"] - 2.5) <= 1.1
