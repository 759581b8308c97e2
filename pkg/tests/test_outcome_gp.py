import numpy as np
import pytest

from pubmobo.errors import InputError
from pubmobo.kernels import KernelSpec, kernel_grad_matrix, kernel_hessian, kernel_matrix
from pubmobo.linalg import AugmentableInverse, cholesky
from pubmobo.outcome_gp import (
    Dataset,
    HyperPriors,
    OutcomeModel,
    _ObjectiveGP,
    fit,
    log_marginal_likelihood,
)

UNIT = np.array([[0.0, 1.0]])


def unit_bounds(d):
    return np.repeat(UNIT, d, axis=0)


def make_model(X, Y, bounds, spec, noise):
    """Model with fixed hyperparameters and identity output scaling."""
    ds = Dataset(X, Y, bounds)
    Xn = ds.normalize(ds.X)
    objs = []
    for i in range(ds.n_f):
        K = kernel_matrix(spec, Xn) + noise * np.eye(ds.n)
        factor = cholesky(K)
        y = ds.Y[:, i]
        objs.append(_ObjectiveGP(spec, noise, factor, factor.solve(y), AugmentableInverse.from_cholesky(factor)))
    return OutcomeModel(ds, objs, np.zeros(ds.n_f), np.ones(ds.n_f))


def fixture_model(seed=0, n=8, d=2, noise=1e-6):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, d))
    Y = np.column_stack([np.sin(3 * X[:, 0]) + X[:, 1], np.cos(2 * X[:, 1])])[:, : 2]
    spec = KernelSpec("matern52", np.full(d, 0.5), 1.0)
    return make_model(X, Y, unit_bounds(d), spec, noise)


# ---- Dataset -----------------------------------------------------------------


def test_dataset_rejects_duplicates():
    X = np.array([[0.1, 0.2], [0.1, 0.2]])
    with pytest.raises(InputError):
        Dataset(X, np.zeros((2, 1)), unit_bounds(2))


def test_dataset_rejects_nonfinite():
    with pytest.raises(InputError):
        Dataset(np.array([[np.inf, 0.0]]), np.zeros((1, 1)), unit_bounds(2))


def test_dataset_jsonl_roundtrip():
    ds = Dataset(
        np.array([[0.1, 0.2], [0.3, 0.4]]),
        np.array([[1.0, 2.0], [3.0, 4.0]]),
        unit_bounds(2),
        ["init", "EXP"],
        [0, 1],
    )
    back = Dataset.from_jsonl(ds.to_jsonl(), unit_bounds(2))
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.Y, ds.Y)
    assert back.provenance == ds.provenance
    assert back.iteration == ds.iteration


# ---- fitting -----------------------------------------------------------------


def test_lml_single_point_closed_form():
    # k(x,x) + noise = 1 and y = 0 make the marginal a standard normal at 0
    spec = KernelSpec("rbf", np.array([1.0]), 0.5)
    got = log_marginal_likelihood(spec, 0.5, np.array([[0.3]]), np.array([0.0]))
    assert got == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-9)
    assert got == pytest.approx(-0.91894, abs=1e-5)


def test_fit_improves_log_posterior():
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 1, size=(30, 2))
    spec_true = KernelSpec("matern52", np.array([0.3, 0.6]), 1.5)
    K = kernel_matrix(spec_true, X) + 1e-4 * np.eye(30)
    y = np.linalg.cholesky(K) @ rng.standard_normal(30)
    ds = Dataset(X, y[:, None], unit_bounds(2))
    priors = HyperPriors(n_restarts=4, max_iter=100)
    model = fit(ds, priors)
    obj = model.objectives[0]
    y_std = (ds.Y[:, 0] - model.y_mean[0]) / model.y_std[0]

    def log_post(spec, noise):
        lml = log_marginal_likelihood(spec, noise, ds.normalize(ds.X), y_std)
        pri = sum(priors.lengthscale.logpdf(l) for l in spec.lengthscales)
        pri += priors.outputscale.logpdf(spec.outputscale)
        return lml + pri

    init_spec = KernelSpec("matern52", np.array([0.5, 0.5]), 1.0)
    assert log_post(obj.spec, obj.noise) >= log_post(init_spec, 1e-4) - 1e-8


def test_fit_rejects_duplicate_rows_via_dataset():
    with pytest.raises(InputError):
        Dataset(np.array([[0.5], [0.5]]), np.array([[1.0], [2.0]]), unit_bounds(1))


def test_fit_constant_column_uses_floor_noise():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, size=(6, 1))
    Y = np.full((6, 1), 3.7)
    model = fit(Dataset(X, Y, unit_bounds(1)), HyperPriors(n_restarts=2, max_iter=50))
    mean, var = model.posterior(np.array([0.31]))
    assert mean[0] == pytest.approx(3.7, abs=1e-6)


# ---- posterior ---------------------------------------------------------------


def test_posterior_interpolates_training_points():
    model = fixture_model(noise=1e-10)
    for i in range(model.dataset.n):
        mean, var = model.posterior(model.dataset.X[i])
        assert np.max(np.abs(mean - model.dataset.Y[i])) < 1e-6
        assert np.all(var <= 1e-6)


def test_posterior_reverts_to_prior_far_away():
    X = np.array([[0.0, 0.0]])
    Y = np.array([[2.0, -1.0]])
    bounds = np.array([[0.0, 100.0], [0.0, 100.0]])
    spec = KernelSpec("matern52", np.array([0.01, 0.01]), 1.7)  # normalized lengthscale 0.01 -> 1 unit
    model = make_model(X, Y, bounds, spec, 1e-8)
    mean, var = model.posterior(np.array([50.0, 50.0]))  # 50 lengthscales away
    assert np.max(np.abs(mean)) < 0.01 * 1.7
    assert np.allclose(var, 1.7, rtol=0.01)


def test_posterior_matches_direct_formula_small():
    # hand-built 1-D dataset, explicit matrix-inverse evaluation
    X = np.array([[0.1], [0.5], [0.9]])
    Y = np.array([[1.0], [-0.5], [0.25]])
    spec = KernelSpec("rbf", np.array([0.3]), 1.2)
    noise = 1e-4
    model = make_model(X, Y, unit_bounds(1), spec, noise)
    x = np.array([0.37])
    K = kernel_matrix(spec, X) + noise * np.eye(3)
    Kinv = np.linalg.inv(K)
    ks = kernel_matrix(spec, x[None, :], X)[0]
    mu = ks @ Kinv @ Y[:, 0]
    var = spec.outputscale - ks @ Kinv @ ks
    mean_got, var_got = model.posterior(x)
    assert mean_got[0] == pytest.approx(mu, abs=1e-8)
    assert var_got[0] == pytest.approx(var, abs=1e-8)


def test_posterior_cached_vs_dense_consistency():
    rng = np.random.default_rng(5)
    for n in (5, 20, 40):
        X = rng.uniform(0, 1, size=(n, 2))
        Y = np.column_stack([np.sin(4 * X[:, 0]), X.sum(axis=1)])
        spec = KernelSpec("matern52", np.array([0.4, 0.7]), 1.1)
        noise = 1e-5
        model = make_model(X, Y, unit_bounds(2), spec, noise)
        K = kernel_matrix(spec, X) + noise * np.eye(n)
        Kinv = np.linalg.inv(K)
        for _ in range(5):
            x = rng.uniform(0, 1, size=2)
            ks = kernel_matrix(spec, x[None, :], X)[0]
            mean, var = model.posterior(x)
            for j in range(2):
                mu = ks @ Kinv @ Y[:, j]
                vv = spec.outputscale - ks @ Kinv @ ks
                assert abs(mean[j] - mu) < 1e-8
                assert abs(var[j] - vv) < 1e-8


# ---- gradient posterior --------------------------------------------------------


def test_gradient_mean_matches_finite_differences():
    model = fixture_model(seed=3, n=12, noise=1e-6)
    rng = np.random.default_rng(11)
    h = 1e-4
    for _ in range(50):
        x = rng.uniform(0.05, 0.95, size=2)
        gp = model.gradient_posterior(x)
        fd = np.empty((model.n_f, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            mp, _ = model.posterior_batch((x + e)[None, :])
            mm, _ = model.posterior_batch((x - e)[None, :])
            fd[:, j] = (mp[0] - mm[0]) / (2 * h)
        denom = np.maximum(np.abs(fd), 1e-3)
        assert np.max(np.abs(gp.mean - fd) / denom) < 1e-3


def test_gradient_zero_at_symmetry_point():
    X = np.array([[-0.8], [-0.4], [0.4], [0.8]])
    Y = (X**2).reshape(-1, 1)  # even function
    bounds = np.array([[-1.0, 1.0]])
    spec = KernelSpec("rbf", np.array([0.5]), 1.0)
    model = make_model(X, Y, bounds, spec, 1e-8)
    gp = model.gradient_posterior(np.array([0.0]))
    assert abs(gp.mean[0, 0]) < 1e-8


def test_gradient_covariance_lower_in_sampled_region():
    rng = np.random.default_rng(4)
    X_dense = rng.uniform(0.0, 0.3, size=(15, 2))
    Y = np.sin(X_dense.sum(axis=1))[:, None]
    spec = KernelSpec("matern52", np.array([0.3, 0.3]), 1.0)
    model = make_model(X_dense, Y, unit_bounds(2), spec, 1e-6)
    dense_pt = np.array([0.15, 0.15])
    far_pt = np.array([0.9, 0.9])
    tr_dense = np.trace(model.gradient_posterior(dense_pt).cov[0])
    tr_far = np.trace(model.gradient_posterior(far_pt).cov[0])
    assert tr_dense < tr_far


def test_gradient_posterior_matches_dense_formula():
    model = fixture_model(seed=9, n=10, noise=1e-5)
    ds = model.dataset
    Xn = ds.normalize(ds.X)
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.uniform(0, 1, size=2)
        gp = model.gradient_posterior(x, normalized=True)
        for i, obj in enumerate(model.objectives):
            K = kernel_matrix(obj.spec, Xn) + obj.noise * np.eye(ds.n)
            Kinv = np.linalg.inv(K)
            G = kernel_grad_matrix(obj.spec, x, Xn)
            y = (ds.Y[:, i] - model.y_mean[i]) / model.y_std[i]
            mu = G @ Kinv @ y
            C = kernel_hessian(obj.spec, x, x) - G @ Kinv @ G.T
            assert np.max(np.abs(gp.mean[i] - mu)) < 1e-8
            assert np.max(np.abs(gp.cov[i] - C)) < 1e-8
            assert np.max(np.abs(gp.cov[i] - gp.cov[i].T)) < 1e-8
            assert np.linalg.eigvalsh(gp.cov[i]).min() > -1e-6


# ---- conditioning --------------------------------------------------------------


def test_condition_then_interpolate():
    model = fixture_model(noise=1e-9)
    x = np.array([0.42, 0.77])
    y = np.array([0.3, -0.8])
    m2 = model.condition(x, y)
    mean, _ = m2.posterior(x)
    assert np.max(np.abs(mean - y)) < 1e-4


def test_condition_matches_full_refactorization():
    model = fixture_model(seed=5, noise=1e-6)
    x = np.array([0.33, 0.61])
    y = np.array([0.5, 0.1])
    inc = model.condition(x, y)
    # fresh model over the grown dataset with identical hyperparameters
    ds2 = model.dataset.append(x, y, "GD", 0)
    spec = model.objectives[0].spec
    fresh = make_model(ds2.X, ds2.Y, ds2.bounds, spec, model.objectives[0].noise)
    rng = np.random.default_rng(0)
    P = rng.uniform(0, 1, size=(20, 2))
    mi, _ = inc.posterior_batch(P)
    mf, _ = fresh.posterior_batch(P)
    assert np.max(np.abs(mi - mf)) < 1e-6


def test_condition_far_point_leaves_origin_unchanged():
    X = np.array([[0.0, 0.0]])
    Y = np.array([[1.0, 1.0]])
    bounds = np.array([[0.0, 100.0], [0.0, 100.0]])
    spec = KernelSpec("matern52", np.array([0.01, 0.01]), 1.0)
    model = make_model(X, Y, bounds, spec, 1e-8)
    before, _ = model.posterior(np.array([0.0, 0.0]))
    m2 = model.condition(np.array([80.0, 80.0]), np.array([0.0, 0.0]))
    after, _ = m2.posterior(np.array([0.0, 0.0]))
    assert np.max(np.abs(before - after)) < 1e-6


def test_condition_duplicate_rejected():
    model = fixture_model()
    with pytest.raises(InputError):
        model.condition(model.dataset.X[0], model.dataset.Y[0])


def test_variance_non_increasing_under_condition():
    model = fixture_model(seed=6, noise=1e-6)
    rng = np.random.default_rng(8)
    probes = rng.uniform(0, 1, size=(25, 2))
    _, var_before = model.posterior_batch(probes)
    m2 = model.condition(np.array([0.5, 0.5]), np.array([0.0, 0.0]))
    _, var_after = m2.posterior_batch(probes)
    assert np.all(var_after <= var_before + 1e-9)


# ---- sampling ------------------------------------------------------------------


def test_samples_deterministic_per_seed():
    model = fixture_model()
    xs = np.array([[0.2, 0.3], [0.6, 0.1]])
    a = model.sample_outcomes(xs, 16, seed=42)
    b = model.sample_outcomes(xs, 16, seed=42)
    assert np.array_equal(a, b)
    c = model.sample_outcomes(xs, 16, seed=43)
    assert not np.array_equal(a, c)


def test_samples_degenerate_at_training_point():
    model = fixture_model(noise=1e-12)
    xs = model.dataset.X[:1]
    s = model.sample_outcomes(xs, 64, seed=0)
    mean, _ = model.posterior(xs[0])
    assert np.max(np.abs(s - mean)) < 1e-4


def test_sample_moments_match_posterior():
    model = fixture_model(seed=2)
    xs = np.array([[0.25, 0.4], [0.7, 0.9]])
    means, covs = model.joint_posterior(xs)
    s = model.sample_outcomes(xs, 100_000, seed=1)
    for i in range(model.n_f):
        emp_mean = s[:, :, i].mean(axis=0)
        se = np.sqrt(np.diag(covs[i]) / s.shape[0])
        assert np.all(np.abs(emp_mean - means[:, i]) <= 4 * se + 1e-12)
        emp_cov = np.cov(s[:, :, i].T)
        assert np.max(np.abs(emp_cov - covs[i])) < 0.05 * max(1.0, np.max(np.abs(covs[i])))


def test_standardization_roundtrip():
    rng = np.random.default_rng(3)
    Y = rng.normal(5.0, 3.0, size=(20, 2))
    mean, std = Y.mean(axis=0), Y.std(axis=0)
    back = ((Y - mean) / std) * std + mean
    assert np.max(np.abs(back - Y)) < 1e-12
