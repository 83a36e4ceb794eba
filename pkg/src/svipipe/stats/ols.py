"""Ordinary least squares with classical (nonrobust) inference."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import f_sf, student_t_isf, t_two_sided_p
from .encoding import EncodedObservation, Season

RANK_TOL = 1e-9


class RankDeficientError(ValueError):
    def __init__(self, columns: Sequence[str]):
        super().__init__(f"design matrix is rank deficient; collinear column(s): {', '.join(columns)}")
        self.columns = list(columns)


class InsufficientRowsError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionResult:
    labels: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_pvalue: float
    log_likelihood: float
    n_observations: int
    df_residuals: int
    residuals: np.ndarray
    fitted: np.ndarray
    dep_variable: str = "y"

    def coef(self, label: str) -> float:
        return float(self.coefficients[self.labels.index(label)])

    def pvalue(self, label: str) -> float:
        return float(self.p_values[self.labels.index(label)])

    def significant(self, alpha: float = 0.05) -> set[str]:
        return {lab for lab, p in zip(self.labels, self.p_values) if p < alpha and lab != "Intercept"}


def fit_ols(X: np.ndarray, y: np.ndarray, labels: Sequence[str] | None = None,
            dep_variable: str = "y") -> RegressionResult:
    """Least squares by Householder QR. ``X`` must include the intercept column first."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    labels = tuple(labels) if labels is not None else tuple(f"x{j}" for j in range(p))
    if n <= p:
        raise InsufficientRowsError(f"{n} rows is not enough to fit {p} parameters")
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    bad = [labels[j] for j in range(p) if diag[j] <= RANK_TOL * max(diag.max(), 1e-300)]
    if bad:
        raise RankDeficientError(bad)

    beta = np.linalg.solve(R, Q.T @ y)
    fitted = X @ beta
    resid = y - fitted
    df = n - p
    rss = float(resid @ resid)
    sigma2 = rss / df
    r_inv = np.linalg.inv(R)
    se = np.sqrt(sigma2 * np.einsum("ij,ij->i", r_inv, r_inv))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / se
    pvals = np.array([t_two_sided_p(t, df) if np.isfinite(t) else 0.0 for t in tvals])
    tcrit = student_t_isf(0.025, df)

    centered = y - y.mean()
    tss = float(centered @ centered)
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    k = p - 1
    if k > 0 and rss > 0:
        fstat = ((tss - rss) / k) / sigma2
        fp = f_sf(fstat, k, df)
    else:
        fstat, fp = float("nan"), float("nan")
    if rss > 0:
        loglik = -n / 2.0 * (math.log(2 * math.pi) + math.log(rss / n) + 1.0)
    else:
        loglik = float("inf")
    return RegressionResult(
        labels, beta, se, tvals, pvals, beta - tcrit * se, beta + tcrit * se,
        r2, adj, fstat, fp, loglik, n, df, resid, fitted, dep_variable,
    )


def design_labels(white_threshold: float = 0.555) -> tuple[str, ...]:
    pct = f"{white_threshold * 100:g}%"
    return (
        "Intercept", "Spring", "Summer", "Winter", "Vaccine Available", "Weekend",
        "Income Bracket 2", "Income Bracket 3", "Income Bracket 4", "Income Bracket 5",
        f"More than {pct} White",
    )


def design_matrix(rows: Sequence[EncodedObservation]) -> tuple[np.ndarray, np.ndarray]:
    """Dummy-coded design (Fall, bracket 1 and non-majority as baselines) and response."""
    X = np.zeros((len(rows), 11))
    y = np.empty(len(rows))
    for i, r in enumerate(rows):
        if not 1 <= r.income_bracket <= 5:
            raise ValueError(f"income bracket out of range: {r.income_bracket}")
        X[i, 0] = 1.0
        if r.season != Season.FALL:
            X[i, int(r.season)] = 1.0
        X[i, 4] = r.vaccine
        X[i, 5] = r.weekend
        if r.income_bracket > 1:
            X[i, 4 + r.income_bracket] = 1.0
        X[i, 10] = r.white_majority
        y[i] = r.y
    return X, y


def ols_fit(rows: Sequence[EncodedObservation], dep_variable: str = "y",
            white_threshold: float = 0.555) -> RegressionResult:
    """Fit the mobility regression to encoded observations."""
    if len(rows) <= 11:
        raise InsufficientRowsError(f"{len(rows)} rows is not enough to fit 11 parameters")
    X, y = design_matrix(rows)
    return fit_ols(X, y, design_labels(white_threshold), dep_variable)


COEF_FIELDS = ["label", "coef", "se", "t", "p", "ci_lo", "ci_hi"]
SUMMARY_FIELDS = ["dep_variable", "r2", "adj_r2", "f", "f_p", "loglik", "n", "df_resid"]


def _g(x: float) -> str:
    return repr(float(x))


def format_coefficients(res: RegressionResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COEF_FIELDS)
    for j, lab in enumerate(res.labels):
        w.writerow([lab, _g(res.coefficients[j]), _g(res.std_errors[j]), _g(res.t_values[j]),
                    _g(res.p_values[j]), _g(res.ci_low[j]), _g(res.ci_high[j])])
    return buf.getvalue()


def format_summary(res: RegressionResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    w.writerow([res.dep_variable, _g(res.r_squared), _g(res.adj_r_squared), _g(res.f_statistic),
                _g(res.f_pvalue), _g(res.log_likelihood), res.n_observations, res.df_residuals])
    return buf.getvalue()


def summary_table(res: RegressionResult) -> str:
    """Plain-text coefficient table in the usual regression-output layout."""
    lines = [
        f"Dep. Variable: {res.dep_variable}",
        f"No. Observations: {res.n_observations}   Df Residuals: {res.df_residuals}",
        f"R-squared: {res.r_squared:.3f}   Adj. R-squared: {res.adj_r_squared:.3f}",
        f"F-statistic: {res.f_statistic:.2f}   Prob (F-statistic): {res.f_pvalue:.2e}",
        f"Log-Likelihood: {res.log_likelihood:.1f}",
        "",
        f"{'':26s}{'coef':>10s}{'std err':>10s}{'t':>10s}{'P>|t|':>8s}{'[0.025':>10s}{'0.975]':>10s}",
    ]
    for j, lab in enumerate(res.labels):
        lines.append(
            f"{lab:26s}{res.coefficients[j]:10.4f}{res.std_errors[j]:10.3f}{res.t_values[j]:10.3f}"
            f"{res.p_values[j]:8.3f}{res.ci_low[j]:10.3f}{res.ci_high[j]:10.3f}"
        )
    return "\n".join(lines) + "\n"
