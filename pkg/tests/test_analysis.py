import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from tracx2 import analysis as an


def t_pdf(x, df):
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def f_pdf(x, d1, d2):
    if x <= 0:
        return 0.0
    lb = math.lgamma(d1 / 2) + math.lgamma(d2 / 2) - math.lgamma((d1 + d2) / 2)
    return math.exp(0.5 * (d1 * math.log(d1 * x) + d2 * math.log(d2) - (d1 + d2) * math.log(d1 * x + d2))
                    - math.log(x) - lb)


@pytest.mark.parametrize("t,df", [(0.3, 3), (-2.38, 19), (2.0, 5), (6.9, 19), (1.1, 147), (-0.5, 1)])
def test_t_pvalue_matches_integrated_density(t, df):
    tail, _ = integrate.quad(t_pdf, abs(t), np.inf, args=(df,), epsabs=1e-13, epsrel=1e-12)
    assert an.t_sf_two_sided(t, df) == pytest.approx(2 * tail, abs=1e-6)


@pytest.mark.parametrize("F,d1,d2", [(1.0, 2, 147), (3.5, 2, 20), (0.2, 1, 10), (8.0, 4, 30), (2.0, 1, 19)])
def test_f_pvalue_matches_integrated_density(F, d1, d2):
    tail, _ = integrate.quad(f_pdf, F, np.inf, args=(d1, d2), epsabs=1e-13, epsrel=1e-12, limit=200)
    assert an.f_sf(F, d1, d2) == pytest.approx(tail, abs=1e-6)


@given(st.floats(0.5, 60), st.floats(0.5, 60), st.floats(0, 1))
@settings(max_examples=200)
def test_betainc_matches_scipy(a, b, x):
    assert an.betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-9)


def test_betainc_edges():
    assert an.betainc(2, 3, 0.0) == 0.0 and an.betainc(2, 3, 1.0) == 1.0
    assert an.betainc(2, 3, 1.5) == 1.0 and an.betainc(2, 3, -0.5) == 0.0
    with pytest.raises(ValueError):
        an.betainc(0, 3, 0.5)


def test_anova_two_groups_is_t_squared():
    rng = np.random.default_rng(3)
    x, y = rng.normal(0, 1, 20), rng.normal(0.5, 1, 25)
    t = an.unpaired_t(x, y)
    f = an.oneway_anova([x, y])
    assert f.statistic == pytest.approx(t.statistic ** 2, rel=1e-12)
    assert f.p == pytest.approx(t.p, abs=1e-12)
    assert f.df == (1, 43)


def test_tests_against_scipy_stats():
    from scipy import stats
    rng = np.random.default_rng(8)
    x, y, z = rng.normal(0, 1, 20), rng.normal(0.4, 1.2, 20), rng.normal(0.1, 1, 30)
    r = an.paired_t(x, y)
    ref = stats.ttest_rel(x, y)
    assert r.statistic == pytest.approx(ref.statistic) and r.p == pytest.approx(ref.pvalue, abs=1e-9)
    r = an.unpaired_t(x, z)
    ref = stats.ttest_ind(x, z)
    assert r.statistic == pytest.approx(ref.statistic) and r.p == pytest.approx(ref.pvalue, abs=1e-9)
    r = an.oneway_anova([x, y, z])
    ref = stats.f_oneway(x, y, z)
    assert r.statistic == pytest.approx(ref.statistic) and r.p == pytest.approx(ref.pvalue, abs=1e-9)
    assert 0 <= r.effect <= 1
    assert an.pearson(x, y) == pytest.approx(stats.pearsonr(x, y)[0])


def test_degenerate_tests():
    r = an.paired_t([1, 2, 3], [1, 2, 3])
    assert r.p == 1.0 and r.flag == "no-variance"
    r = an.paired_t([2, 3, 4], [1, 2, 3])
    assert r.p == 0.0 and r.flag == "no-variance"
    with pytest.raises(ValueError):
        an.paired_t([1], [2])
    with pytest.raises(ValueError):
        an.oneway_anova([[1, 2], [3]])
    assert math.isnan(an.pearson([1, 1, 1], [1, 2, 3]))


def test_bonferroni_and_posthoc():
    assert an.bonferroni(0.02, 3) == pytest.approx(0.06)
    assert an.bonferroni(0.5, 3) == 1.0
    rng = np.random.default_rng(0)
    groups = {"a": rng.normal(0, 1, 30), "b": rng.normal(1, 1, 30), "c": rng.normal(2, 1, 30)}
    res = an.pairwise_posthoc(groups)
    assert [(a, b) for a, b, _, _ in res] == [("a", "b"), ("a", "c"), ("b", "c")]
    for _, _, r, adj in res:
        assert adj == pytest.approx(min(1.0, 3 * r.p))


def test_summary():
    s = an.summary([1.0, 2.0, 3.0, 4.0])
    assert s["mean"] == 2.5 and s["sd"] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert s["sem"] == pytest.approx(s["sd"] / 2)


@given(st.integers(0, 10_000), st.integers(3, 40), st.integers(2, 12))
@settings(max_examples=40, deadline=None)
def test_pca_reconstruction(seed, n, d):
    X = np.random.default_rng(seed).normal(size=(n, d))
    p = an.pca(X)
    assert np.allclose(p.reconstruct(), X, atol=1e-8)
    assert np.allclose(p.components @ p.components.T, np.eye(len(p.components)), atol=1e-10)
    for comp in p.components:
        assert comp[np.argmax(np.abs(comp))] > 0


def test_pca_first2_degenerate():
    with pytest.raises(an.DegenerateData):
        an.pca_first2(np.ones((10, 5)))
    with pytest.raises(an.DegenerateData):
        an.pca_first2(np.outer(np.arange(10.0), np.ones(4)))


def test_r_squared():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 6))
    y = X @ rng.normal(size=6) + 3.0
    assert an.multiple_r_squared(X, y) == pytest.approx(1.0, abs=1e-12)
    assert an.multiple_r_squared(X, rng.normal(size=50)) < 0.4
    assert math.isnan(an.multiple_r_squared(X, np.ones(50)))
    # more columns than rows: minimum-norm fit is exact
    assert an.multiple_r_squared(rng.normal(size=(10, 39)), rng.normal(size=10)) == pytest.approx(1.0)


def test_class_distance_and_silhouette():
    pts = np.array([[0, 0], [0.1, 0], [5, 5], [5.1, 5]])
    labels = ["a", "a", "b", "b"]
    d = an.class_distance_summary(pts, labels)
    assert d["within"] < d["between"] and d["silhouette"] > 0.9


def test_contour_study_on_constructed_reps():
    from tracx2 import corpus as cp
    words = cp.random_3words(300, seed=5)
    # a representation that encodes only contour separates same/different contour perfectly
    reps = np.array([[np.sign(d) for d in w] for w in words], float) * 10 + \
        np.random.default_rng(0).normal(0, 0.01, (300, 3))
    res = an.contour_study(words, reps)
    assert res.frac_expected == 1.0
    # a representation of interval values alone carries no contour information beyond mdist
    flat = an.contour_study(words, np.array(words, float))
    assert flat.frac_significant < 0.2
    for t in res.scored:
        assert all(0 <= m <= 6 for m in t.mdist)
