"""Independent reference computations used as test oracles.

These deliberately take different numerical routes from the library: the
normal equations instead of QR, and scipy's special functions instead of the
package's own incomplete beta.
"""
import itertools
import math

import numpy as np
from scipy import special, stats


def ols_normal_equations(X, y):
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n, p = X.shape
    xtx = X.T @ X
    beta = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ beta
    df = n - p
    rss = float(resid @ resid)
    s2 = rss / df
    se = np.sqrt(np.diag(np.linalg.inv(xtx)) * s2)
    t = beta / se
    # two-sided p via I_x(df/2, 1/2) with x = df / (df + t^2)
    pv = np.array([special.betainc(df / 2, 0.5, df / (df + ti * ti)) for ti in t])
    tcrit = stats.t.isf(0.025, df)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - rss / tss
    k = p - 1
    f = ((tss - rss) / k) / s2
    fp = special.betainc(df / 2, k / 2, df / (df + k * f))
    return {
        "coefficients": beta, "std_errors": se, "t_values": t, "p_values": pv,
        "ci_low": beta - tcrit * se, "ci_high": beta + tcrit * se,
        "r_squared": r2, "adj_r_squared": 1 - (1 - r2) * (n - 1) / df,
        "f_statistic": f, "f_pvalue": fp,
        "log_likelihood": -n / 2 * (math.log(2 * math.pi) + math.log(rss / n) + 1),
        "df_residuals": df,
    }


def random_ols_problem(rng, n=200, p=11):
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    beta = rng.normal(0, 0.5, p)
    y = X @ beta + rng.normal(0, 1.0, n)
    return X, y


def jenks2_bruteforce(values):
    """Best single split of sorted values over every admissible position."""
    x = sorted(values)
    best, brk = math.inf, None
    for i in range(1, len(x)):
        if x[i] == x[i - 1]:
            continue
        lo, hi = x[:i], x[i:]
        ssd = sum((v - sum(lo) / len(lo)) ** 2 for v in lo) + sum((v - sum(hi) / len(hi)) ** 2 for v in hi)
        if brk is None or ssd < best - 1e-12 * max(1.0, best):
            best, brk = ssd, x[i - 1]
    return brk, best


def jenks_bruteforce(values, classes):
    x = sorted(values)
    best, brks = math.inf, None
    positions = [i for i in range(1, len(x)) if x[i] != x[i - 1]]
    for cut in itertools.combinations(positions, classes - 1):
        bounds = (0,) + cut + (len(x),)
        ssd = 0.0
        for a, b in zip(bounds, bounds[1:]):
            part = x[a:b]
            m = sum(part) / len(part)
            ssd += sum((v - m) ** 2 for v in part)
        if brks is None or ssd < best - 1e-12 * max(1.0, best):
            best, brks = ssd, [x[c - 1] for c in cut]
    return brks, best


def compare_ols(res, ref, rtol=1e-8):
    """Largest relative discrepancy between a RegressionResult and the oracle dict."""
    worst = 0.0
    for key, want in ref.items():
        got = np.atleast_1d(np.asarray(getattr(res, key), float))
        want = np.atleast_1d(np.asarray(want, float))
        denom = np.maximum(np.abs(want), 1e-300)
        worst = max(worst, float(np.max(np.abs(got - want) / denom)))
    return worst
