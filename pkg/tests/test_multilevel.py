import math

import numpy as np
import pytest
from scipy import optimize

from localf2 import Dataset, InputError, ModelSpec, RankDeficiencyError, analyze, fit_ols, group_by
from localf2.multilevel import (
    _Profile,
    fit_null,
    fit_random_intercept,
    golden_section_max,
    lmm_local_f2,
    pseudo_r2,
)

SPEC = ModelSpec("y", ("x2",), ("x1",))


def grouped(seed, groups=50, size=20, s2_u=1.0, s2_e=1.0, b=(1.0, 0.5, 0.3)):
    rng = np.random.default_rng(seed)
    n = groups * size
    g = np.repeat(np.arange(groups), size)
    x1, x2 = rng.standard_normal((2, n))
    u = math.sqrt(s2_u) * rng.standard_normal(groups)
    y = b[0] + b[1] * x1 + b[2] * x2 + u[g] + math.sqrt(s2_e) * rng.standard_normal(n)
    ds = Dataset.from_columns({"y": y, "x1": x1, "x2": x2, "g": g.astype(float)})
    return group_by(ds, "g")


def dense_reml(X, y, codes, s2_u, s2_e):
    Z = (codes[:, None] == np.arange(codes.max() + 1)[None, :]).astype(float)
    V = s2_e * np.eye(len(y)) + s2_u * Z @ Z.T
    Vi = np.linalg.inv(V)
    XtViX = X.T @ Vi @ X
    beta = np.linalg.solve(XtViX, X.T @ Vi @ y)
    r = y - X @ beta
    n, p = X.shape
    return -0.5 * (
        (n - p) * math.log(2 * math.pi)
        + np.linalg.slogdet(V)[1]
        + np.linalg.slogdet(XtViX)[1]
        - np.linalg.slogdet(X.T @ X)[1]
        + r @ Vi @ r
    ), beta


def test_golden_section_on_parabola():
    x, fx, it = golden_section_max(lambda t: -(t - 1.234) ** 2, -12, 12)
    assert x == pytest.approx(1.234, abs=1e-7)
    assert it < 300


def test_against_dense_reml():
    rng = np.random.default_rng(1)
    sizes = [3, 5, 4, 6, 2, 7, 5, 4]
    codes = np.repeat(np.arange(len(sizes)), sizes)
    n = codes.size
    x = rng.standard_normal(n)
    y = 0.5 + 0.8 * x + rng.standard_normal(len(sizes))[codes] * 0.9 + rng.standard_normal(n)
    ds = Dataset.from_columns({"y": y, "x": x, "g": codes.astype(float)})
    fit = fit_random_intercept(group_by(ds, "g"), ModelSpec("y", ("x",)))
    X = np.column_stack([np.ones(n), x])

    neg = lambda v: -dense_reml(X, y, codes, math.exp(v[0]), math.exp(v[1]))[0]
    res = optimize.minimize(neg, [0.0, 0.0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000})
    s2_u, s2_e = np.exp(res.x)
    assert fit.converged
    assert fit.reml_loglik == pytest.approx(-res.fun, abs=1e-7)
    assert fit.sigma2_u == pytest.approx(s2_u, rel=1e-4)
    assert fit.sigma2_e == pytest.approx(s2_e, rel=1e-4)
    ll, beta = dense_reml(X, y, codes, fit.sigma2_u, fit.sigma2_e)
    assert fit.reml_loglik == pytest.approx(ll, abs=1e-9)
    assert np.allclose(fit.fixed_coefficients, beta, rtol=1e-8, atol=1e-10)


def test_profile_matches_dense_at_fixed_theta():
    data = grouped(2, groups=10, size=6)
    X = np.column_stack([np.ones(60), data.base.column("x1"), data.base.column("x2")])
    y = data.base.column("y")
    prof = _Profile(X, y, data.group_index, ("a", "b", "c"))
    for theta in (0.0, 0.3, 2.0, 40.0):
        ll, _, _, s2 = prof.solve(theta)
        assert ll == pytest.approx(dense_reml(X, y, data.group_index, theta * s2, s2)[0], abs=1e-8)


def test_zero_group_variance_matches_ols():
    data = grouped(3, s2_u=0.0)
    fit = fit_random_intercept(data, SPEC)
    X_AB = np.column_stack([np.ones(1000), data.base.column("x1"), data.base.column("x2")])
    ols = fit_ols(X_AB, data.base.column("y"))
    if fit.sigma2_u == 0.0:
        assert not fit.converged
        assert np.allclose(fit.fixed_coefficients, ols.coefficients, rtol=1e-10, atol=1e-12)
    assert fit.sigma2_u < 0.05
    assert np.allclose(fit.fixed_coefficients, ols.coefficients, atol=1e-2)


def test_boundary_estimate_flags_not_converged():
    # no group effect and few groups: the optimum sits at zero for this seed
    for seed in range(40):
        fit = fit_random_intercept(grouped(seed, groups=10, size=5, s2_u=0.0), SPEC)
        if fit.sigma2_u == 0.0:
            assert not fit.converged
            assert fit.log_theta == -math.inf
            return
    pytest.fail("no boundary fit found")


@pytest.mark.parametrize("seed", range(5))
def test_variance_recovery(seed):
    fit = fit_random_intercept(grouped(100 + seed), SPEC)
    assert fit.converged
    assert 0.6 <= fit.sigma2_u <= 1.5
    assert fit.sigma2_e == pytest.approx(1.0, abs=0.15)
    assert fit.fixed_coefficients == pytest.approx([1.0, 0.5, 0.3], abs=0.4)


def test_sigma2_u_tracks_truth():
    est = [fit_random_intercept(grouped(7, s2_u=s), SPEC).sigma2_u for s in (0.25, 1.0, 4.0)]
    assert est[0] < est[1] < est[2]


def test_bracket_invariance():
    data = grouped(8)
    a = fit_random_intercept(data, SPEC)
    b = fit_random_intercept(data, SPEC, bounds=(-8.0, 6.0))
    assert a.sigma2_u == pytest.approx(b.sigma2_u, rel=1e-6)
    assert a.reml_loglik == pytest.approx(b.reml_loglik, abs=1e-10)


def test_profile_unimodal_on_grid():
    data = grouped(9)
    X = np.column_stack([np.ones(1000), data.base.column("x1"), data.base.column("x2")])
    prof = _Profile(X, data.base.column("y"), data.group_index, ("a", "b", "c"))
    vals = np.array([prof.loglik(t) for t in np.linspace(-12, 12, 241)])
    k = int(np.argmax(vals))
    assert np.all(np.diff(vals[: k + 1]) >= -1e-9)
    assert np.all(np.diff(vals[k:]) <= 1e-9)


def test_reml_full_not_worse_than_reduced():
    for seed in range(10):
        data = grouped(200 + seed, b=(1.0, 0.5, 0.0))
        full = fit_random_intercept(data, SPEC, full=True)
        red = fit_random_intercept(data, SPEC, full=False)
        assert full.reml_loglik >= red.reml_loglik - 1e-6


def test_scale_invariance_of_fit():
    data = grouped(10)
    cols = dict(data.base.columns)
    cols["x1"] = cols["x1"] * 1000.0
    other = group_by(Dataset.from_columns(cols), "g")
    a, b = fit_random_intercept(data, SPEC), fit_random_intercept(other, SPEC)
    assert a.reml_loglik == pytest.approx(b.reml_loglik, abs=1e-8)
    assert a.sigma2_u == pytest.approx(b.sigma2_u, rel=1e-6)
    assert b.fixed_coefficients[1] * 1000.0 == pytest.approx(a.fixed_coefficients[1], rel=1e-8)


def test_singular_design():
    data = grouped(11)
    cols = dict(data.base.columns)
    cols["x2"] = 3.0 * cols["x1"]
    with pytest.raises(RankDeficiencyError, match="singular"):
        fit_random_intercept(group_by(Dataset.from_columns(cols), "g"), SPEC)


def test_group_column_cannot_be_a_predictor():
    with pytest.raises(InputError):
        fit_random_intercept(grouped(12), ModelSpec("y", ("g",), ("x1",)))


def test_too_few_rows():
    with pytest.raises(InputError):
        fit_random_intercept(grouped(13, groups=3, size=4), SPEC)


def test_null_pseudo_r2_is_zero():
    data = grouped(14)
    null = fit_null(data, "y")
    for d in ("total-variance", "residual-variance"):
        assert pseudo_r2(null, null, d).value == 0.0
    with pytest.raises(InputError):
        pseudo_r2(null, null, "marginal")


def test_zero_focal_effect():
    report = lmm_local_f2(grouped(15, b=(1.0, 0.5, 0.0)), SPEC)
    assert abs(report.f2_local) < 0.01
    assert report.variant == "multilevel"
    assert report.definition_tag == "total-variance"


def test_matches_ols_without_group_variance():
    data = grouped(16, s2_u=0.0)
    lmm = lmm_local_f2(data, SPEC)
    ols = analyze(data.base, SPEC)
    assert abs(lmm.f2_local - ols.f2_local) < 1e-2


def test_definitions_differ_and_are_tagged():
    data = grouped(17, s2_u=2.0)
    a = lmm_local_f2(data, SPEC, "total-variance")
    b = lmm_local_f2(data, SPEC, "residual-variance")
    assert b.definition_tag == "residual-variance"
    assert a.f2_local != b.f2_local
    assert b.f2_local > 0


def test_report_contents():
    report = lmm_local_f2(grouped(18), SPEC)
    assert 0.0 <= report.p_exact <= 1.0
    assert report.df == (1, 1000 - 2 - 1)
    assert [c.name for c in report.coefficient_intervals] == ["(Intercept)", "x1", "x2"]
    assert any("approximate" in w for w in report.warnings)
    assert set(report.extras["sigma2_u"]) == {"null", "reduced", "full"}
    assert report.extras["n_groups"] == 50


def test_no_covariates():
    report = lmm_local_f2(grouped(19), ModelSpec("y", ("x1", "x2")))
    assert report.r2_A == 0.0
    assert report.f2_local == pytest.approx(report.f2_global, rel=1e-12)


def test_sigma2_u_estimator_unbiased():
    est = np.array([fit_random_intercept(grouped(3000 + s), SPEC).sigma2_u for s in range(150)])
    # sampling sd of one estimate is about 0.21, so the mean's sd is about 0.017
    assert est.mean() == pytest.approx(1.0, abs=0.06)
    assert 0.15 < est.std() < 0.3
