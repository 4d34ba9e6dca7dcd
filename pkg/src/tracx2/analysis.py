"""PCA, least-squares R^2, distances and the handful of tests the studies report.

p-values come from the regularized incomplete beta function, evaluated with
a modified-Lentz continued fraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BETACF_TOL = 1e-10
BETACF_MAX_ITER = 10_000


# --- special functions -----------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < BETACF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def f_sf(F: float, df1: float, df2: float) -> float:
    if math.isinf(F):
        return 0.0
    if F <= 0:
        return 1.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * F))


# --- tests -------------------------------------------------------------------

@dataclass
class TestResult:
    test: str
    statistic: float
    df: tuple
    p: float
    effect: float
    means: tuple
    sizes: tuple
    flag: str = ""
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "test": self.test, "statistic": self.statistic,
            "df": " ".join(str(d) for d in self.df), "p": self.p, "effect": self.effect,
            "means": " ".join(f"{m:.9g}" for m in self.means),
            "sizes": " ".join(str(n) for n in self.sizes), "flag": self.flag,
        }


def paired_t(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided paired t-test on x - y; effect is Cohen's d of the differences."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("paired samples must be equal-length 1-d sequences of at least 2")
    d = x - y
    n = len(d)
    mean, sd = float(d.mean()), float(d.std(ddof=1))
    means = (float(x.mean()), float(y.mean()))
    if sd == 0.0:
        if mean == 0.0:
            return TestResult("paired_t", 0.0, (n - 1,), 1.0, 0.0, means, (n, n), "no-variance")
        t = math.copysign(math.inf, mean)
        return TestResult("paired_t", t, (n - 1,), 0.0, t, means, (n, n), "no-variance")
    t = mean / (sd / math.sqrt(n))
    return TestResult("paired_t", t, (n - 1,), t_sf_two_sided(t, n - 1), mean / sd, means, (n, n))


def unpaired_t(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Pooled-variance two-sample t-test; effect is Cohen's d with the pooled sd."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("each sample needs at least 2 values")
    df = nx + ny - 2
    sp2 = ((nx - 1) * x.var(ddof=1) + (ny - 1) * y.var(ddof=1)) / df
    diff = float(x.mean() - y.mean())
    means = (float(x.mean()), float(y.mean()))
    if sp2 == 0.0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return TestResult("unpaired_t", t, (df,), 1.0 if diff == 0 else 0.0, t, means, (nx, ny), "no-variance")
    t = diff / math.sqrt(sp2 * (1.0 / nx + 1.0 / ny))
    return TestResult("unpaired_t", t, (df,), t_sf_two_sided(t, df), diff / math.sqrt(sp2), means, (nx, ny))


def oneway_anova(groups: Sequence[Sequence[float]]) -> TestResult:
    """One-way ANOVA; effect is partial eta squared (SS_between / SS_total)."""
    groups = [np.asarray(g, float) for g in groups]
    if len(groups) < 2 or any(len(g) < 2 for g in groups):
        raise ValueError("need at least 2 groups of at least 2 values")
    allv = np.concatenate(groups)
    grand = allv.mean()
    k, N = len(groups), len(allv)
    ss_b = float(sum(len(g) * (g.mean() - grand) ** 2 for g in groups))
    ss_w = float(sum(((g - g.mean()) ** 2).sum() for g in groups))
    df1, df2 = k - 1, N - k
    means = tuple(float(g.mean()) for g in groups)
    sizes = tuple(len(g) for g in groups)
    ss_t = ss_b + ss_w
    if ss_w == 0.0:
        F = 0.0 if ss_b == 0 else math.inf
        return TestResult("anova", F, (df1, df2), 1.0 if ss_b == 0 else 0.0,
                          0.0 if ss_t == 0 else 1.0, means, sizes, "no-variance")
    F = (ss_b / df1) / (ss_w / df2)
    return TestResult("anova", F, (df1, df2), f_sf(F, df1, df2), ss_b / ss_t, means, sizes)


def bonferroni(p: float, m: int) -> float:
    return min(1.0, p * m)


def pairwise_posthoc(groups: dict[str, Sequence[float]]) -> list[tuple[str, str, TestResult, float]]:
    """All pairwise pooled t-tests with Bonferroni-adjusted p-values."""
    names = list(groups)
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    out = []
    for a, b in pairs:
        res = unpaired_t(groups[a], groups[b])
        out.append((a, b, res, bonferroni(res.p, len(pairs))))
    return out


# --- descriptive ------------------------------------------------------------

def cityblock(u, v) -> float:
    return float(np.abs(np.asarray(u, float) - np.asarray(v, float)).sum())


def pearson(x, y) -> float:
    """Product-moment correlation; nan when either input has no variance."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("pearson needs two equal-length sequences of at least 2")
    xc, yc = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return math.nan
    return float(xc @ yc) / denom


def summary(values) -> dict:
    v = np.asarray(values, float)
    n = len(v)
    sd = float(v.std(ddof=1)) if n > 1 else math.nan
    return {"n": n, "mean": float(v.mean()), "sd": sd, "sem": sd / math.sqrt(n) if n > 1 else math.nan}


# --- PCA and regression -----------------------------------------------------

@dataclass
class Pca:
    mean: np.ndarray
    components: np.ndarray  # (k, d), rows are unit-length loadings
    scores: np.ndarray  # (n, k)
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def reconstruct(self, k: int | None = None) -> np.ndarray:
        k = len(self.components) if k is None else k
        return self.scores[:, :k] @ self.components[:k] + self.mean


class DegenerateData(ValueError):
    pass


def pca(X) -> Pca:
    """PCA via SVD of the centred data.  Each component is flipped so that its
    largest-magnitude loading is positive."""
    X = np.asarray(X, float)
    mean = X.mean(axis=0)
    Xc = X - mean
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    for i in range(len(Vt)):
        if Vt[i, np.argmax(np.abs(Vt[i]))] < 0:
            Vt[i] = -Vt[i]
            U[:, i] = -U[:, i]
    var = s ** 2 / max(len(X) - 1, 1)
    total = var.sum()
    ratio = var / total if total > 0 else np.zeros_like(var)
    return Pca(mean, Vt, Xc @ Vt.T, var, ratio)


def pca_first2(reps) -> Pca:
    reps = np.asarray(reps, float)
    if len(reps) < 3:
        raise DegenerateData("PCA needs at least 3 rows")
    full = pca(reps)
    rank = int(np.sum(full.explained_variance > 1e-12 * max(full.explained_variance.max(), 1e-300)))
    if rank < 2:
        raise DegenerateData(f"representations have rank {rank} < 2")
    return Pca(full.mean, full.components[:2], full.scores[:, :2], full.explained_variance[:2],
               full.explained_variance_ratio[:2])


def multiple_r_squared(X, y) -> float:
    """R^2 of the minimum-norm least-squares fit of y on the columns of X plus an intercept."""
    X, y = np.asarray(X, float), np.asarray(y, float)
    if len(X) != len(y) or len(y) < 2:
        raise ValueError("need at least 2 aligned rows")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        return math.nan
    A = np.column_stack([X, np.ones(len(X))])
    beta = np.linalg.pinv(A) @ y
    sse = float(((y - A @ beta) ** 2).sum())
    return min(1.0, max(0.0, 1.0 - sse / sst))


def silhouette(points, labels) -> float:
    """Mean silhouette coefficient; singleton clusters score 0."""
    P = np.asarray(points, float)
    labels = np.asarray(labels)
    D = np.abs(P[:, None, :] - P[None, :, :]) ** 2
    D = np.sqrt(D.sum(axis=2))
    uniq = np.unique(labels)
    s = np.zeros(len(P))
    for i in range(len(P)):
        same = labels == labels[i]
        if same.sum() < 2:
            continue
        a = D[i, same].sum() / (same.sum() - 1)
        b = min(D[i, labels == u].mean() for u in uniq if u != labels[i])
        s[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(s.mean())


def class_distance_summary(points, labels) -> dict:
    """Mean pairwise distance within classes versus between classes."""
    P = np.asarray(points, float)
    labels = np.asarray(labels)
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2))
    iu = np.triu_indices(len(P), 1)
    same = (labels[:, None] == labels[None, :])[iu]
    d = D[iu]
    return {"within": float(d[same].mean()), "between": float(d[~same].mean()),
            "silhouette": silhouette(P, labels)}


# --- contour study ------------------------------------------------------------

@dataclass
class ContourTriplet:
    mdist: tuple
    n_same: int
    n_diff: int
    mean_same: float
    mean_diff: float
    F: float
    p: float
    p_bonferroni: float = math.nan

    @property
    def expected(self) -> bool:
        return self.mean_same < self.mean_diff

    def row(self) -> dict:
        return {"mdist": "-".join(map(str, self.mdist)), "n_same": self.n_same, "n_diff": self.n_diff,
                "mean_same": self.mean_same, "mean_diff": self.mean_diff, "F": self.F, "p": self.p,
                "p_bonferroni": self.p_bonferroni, "expected_direction": int(self.expected)}


@dataclass
class ContourStudy:
    scored: list[ContourTriplet]
    skipped: list[tuple]
    alpha: float

    def _frac(self, pred) -> float:
        return sum(map(pred, self.scored)) / len(self.scored) if self.scored else math.nan

    @property
    def frac_expected(self) -> float:
        return self._frac(lambda t: t.expected)

    @property
    def frac_significant(self) -> float:
        return self._frac(lambda t: t.p_bonferroni < self.alpha)

    @property
    def frac_significant_expected(self) -> float:
        return self._frac(lambda t: t.expected and t.p_bonferroni < self.alpha)


def _contour_codes(words: np.ndarray) -> np.ndarray:
    s = np.sign(words) + 1  # 0,1,2
    return (s * (3 ** np.arange(words.shape[1]))).sum(axis=1)


def contour_study(words, reps, ceiling: int = 6, alpha: float = 0.05, min_pairs: int = 2) -> ContourStudy:
    """Compare representation distances of same- versus different-contour word
    pairs, separately for every exact mdist triplet up to ``ceiling``."""
    W = np.asarray([tuple(w) for w in words], dtype=int)
    R = np.asarray(reps, float)
    n = len(W)
    i, j = np.triu_indices(n, 1)
    md = np.abs(W[i] - W[j])
    keep = (md <= ceiling).all(axis=1)
    i, j, md = i[keep], j[keep], md[keep]
    c = _contour_codes(W)
    same = c[i] == c[j]
    dist = np.abs(R[i] - R[j]).sum(axis=1)
    base = ceiling + 1
    key = (md * (base ** np.arange(md.shape[1])[::-1])).sum(axis=1)
    order = np.argsort(key, kind="stable")
    key, same, dist = key[order], same[order], dist[order]
    bounds = np.searchsorted(key, np.arange(base ** md.shape[1] + 1))
    scored, skipped = [], []
    for k in range(base ** md.shape[1]):
        trip = tuple(int(x) for x in np.unravel_index(k, (base,) * md.shape[1]))
        lo, hi = bounds[k], bounds[k + 1]
        s1, s2 = dist[lo:hi][same[lo:hi]], dist[lo:hi][~same[lo:hi]]
        if len(s1) < min_pairs or len(s2) < min_pairs:
            skipped.append(trip)
            continue
        res = oneway_anova([s1, s2])
        scored.append(ContourTriplet(trip, len(s1), len(s2), float(s1.mean()), float(s2.mean()), res.statistic, res.p))
    for t in scored:
        t.p_bonferroni = bonferroni(t.p, len(scored))
    return ContourStudy(scored, skipped, alpha)
