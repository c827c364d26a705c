"""Random-intercept linear mixed model fitted by profiled (RE)ML.

The model is ``y = X beta + b_g + e`` with ``b_g ~ N(0, s_b^2)`` per group and
``e ~ N(0, s_e^2)``.  Writing ``lam = s_b^2 / s_e^2`` the covariance of group
``g`` is ``s_e^2 (I + lam 11')``, whose inverse and determinant have closed
forms, so every quantity reduces to per-group sums.  ``beta`` and ``s_e^2``
are profiled out and only ``log(lam)`` is searched numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import NonConvergenceWarning, NotConverged, RankDeficient, TooFewGroups, ValidationError
from .signal_model import FEATURE_LABELS, FEATURE_NAMES

LOG_LAMBDA_BOUNDS = (-12.0, 12.0)
N_GRID = 64
ALPHA = 0.1


@dataclass(frozen=True)
class LmmFit:
    """Estimates of one fit; ``beta[0]`` is the intercept."""

    beta: np.ndarray
    se: np.ndarray
    p: np.ndarray
    sigma_b2: float
    sigma_e2: float
    r2_marginal: float
    r2_conditional: float
    converged: bool
    log_likelihood: float
    method: str
    names: tuple
    n_obs: int
    n_groups: int

    @property
    def ci95(self) -> np.ndarray:
        z = stats.norm.ppf(0.975)
        return np.column_stack([self.beta - z * self.se, self.beta + z * self.se])


class _Sums:
    """Sufficient statistics per group."""

    def __init__(self, X, y, groups):
        _, inv = np.unique(groups, return_inverse=True)
        G = inv.max() + 1
        self.n_g = np.bincount(inv, minlength=G).astype(float)
        self.Sx = np.zeros((G, X.shape[1]))
        np.add.at(self.Sx, inv, X)
        self.Sy = np.bincount(inv, weights=y, minlength=G)
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        self.n, self.p = X.shape

    def solve(self, lam):
        """GLS pieces at variance ratio ``lam``: (beta, A, quad, logdetH)."""
        c = lam / (1.0 + lam * self.n_g)
        A = self.XtX - (self.Sx * c[:, None]).T @ self.Sx
        b = self.Xty - self.Sx.T @ (c * self.Sy)
        yHy = self.yty - float(np.sum(c * self.Sy ** 2))
        beta = np.linalg.solve(A, b)
        quad = max(yHy - float(beta @ b), 1e-300)
        logdet = float(np.sum(np.log1p(lam * self.n_g)))
        return beta, A, quad, logdet

    def loglik(self, lam, reml: bool):
        beta, A, quad, logdet = self.solve(lam)
        if reml:
            m = self.n - self.p
            _, logdet_a = np.linalg.slogdet(A)
            return -0.5 * (m * math.log(2 * math.pi * quad / m) + logdet + logdet_a + m)
        return -0.5 * (self.n * math.log(2 * math.pi * quad / self.n) + logdet + self.n)


def _check_rank(D, names):
    rank = np.linalg.matrix_rank(D)
    if rank == D.shape[1]:
        return
    bad = []
    kept = np.zeros((D.shape[0], 0))
    for j in range(D.shape[1]):
        trial = np.column_stack([kept, D[:, j]])
        if np.linalg.matrix_rank(trial) > kept.shape[1]:
            kept = trial
        else:
            bad.append(names[j])
    raise RankDeficient(bad)


def _default_names(d):
    return tuple(FEATURE_NAMES) if d == len(FEATURE_NAMES) else tuple(f"x{j}" for j in range(d))


def fit_lmm(X, y, groups, method: str = "REML", names=None) -> LmmFit:
    """Fit the random-intercept model with an intercept plus the columns of ``X``.

    Parameters
    ----------
    X : (n, d) array
        Fixed-effect covariates, usually z-scored features.
    y : (n,) array
        Outcome (binary labels are treated as reals).
    groups : (n,) array
        Group id per row.
    method : {"REML", "ML"}
    names : sequence of str, optional
        Column names used in error messages and reports.

    Raises
    ------
    RankDeficient
        ``[1, X]`` lacks full column rank; the error lists the dependent columns.
    TooFewGroups
        Fewer than two groups.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    groups = np.asarray(groups)
    n, d = X.shape
    if len(y) != n or len(groups) != n:
        raise ValidationError("X, y and groups must have the same length")
    method = method.upper()
    if method not in ("REML", "ML"):
        raise ValidationError(f"unknown method {method!r}")
    names = tuple(names) if names is not None else _default_names(d)
    n_groups = len(np.unique(groups))
    if n_groups < 2:
        raise TooFewGroups(f"{n_groups} group(s); at least 2 required")
    if n <= d + 1:
        raise ValidationError(f"{n} observations for {d + 1} fixed effects")
    D = np.column_stack([np.ones(n), X])
    _check_rank(D, ("intercept",) + names)

    sums = _Sums(D, y, groups)
    reml = method == "REML"
    obj = lambda t: -sums.loglik(math.exp(t), reml)

    # global bracket on a grid, then bounded refinement around the best point
    lo, hi = LOG_LAMBDA_BOUNDS
    grid = np.linspace(lo, hi, N_GRID)
    vals = np.array([obj(t) for t in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, N_GRID - 1)]
    res = optimize.minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
    converged = bool(res.success)
    t_best, f_best = (float(res.x), float(res.fun)) if res.fun <= vals[i] else (float(grid[i]), float(vals[i]))
    lam = math.exp(t_best)
    # the boundary lam = 0 is outside the log scale but admissible
    f_zero = -sums.loglik(0.0, reml)
    if f_zero <= f_best:
        lam, f_best = 0.0, f_zero
    if not converged:
        warnings.warn("variance-ratio search did not converge; returning the best point found",
                      NonConvergenceWarning, stacklevel=2)

    beta, A, quad, _ = sums.solve(lam)
    sigma_e2 = quad / (n - D.shape[1] if reml else n)
    sigma_b2 = lam * sigma_e2
    cov = sigma_e2 * np.linalg.inv(A)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p = np.clip(2.0 * stats.norm.sf(np.abs(z)), 0.0, 1.0)
    marg, cond = _r2(beta, sigma_b2, sigma_e2, X)
    return LmmFit(beta, se, p, float(sigma_b2), float(sigma_e2), marg, cond, converged,
                  -f_best, method, ("intercept",) + names, n, n_groups)


def _r2(beta, sigma_b2, sigma_e2, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    var_f = float(np.var(X @ beta[1:], ddof=1)) if len(X) > 1 else 0.0
    total = var_f + sigma_b2 + sigma_e2
    return var_f / total, (var_f + sigma_b2) / total


def r2_nakagawa(fit: LmmFit, X) -> tuple:
    """Marginal and conditional R^2 of a fit evaluated on covariates ``X``.

    The fixed-effect variance is the sample variance (ddof=1) of ``X beta``.
    """
    if not fit.converged:
        raise NotConverged("R^2 requested for a fit that did not converge")
    return _r2(fit.beta, fit.sigma_b2, fit.sigma_e2, X)


def significance_flags(p, alpha: float = ALPHA) -> np.ndarray:
    """Strict two-sided test: flagged iff ``p < alpha``."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValidationError("p-values must lie in [0, 1]")
    return p < alpha


def format_p(p: float, alpha: float = ALPHA) -> str:
    """Three decimals, or E notation below 0.001, plus ``*`` when ``p < alpha``."""
    text = f"{p:.2E}" if p < 1e-3 else f"{p:.3f}"
    return text + ("*" if p < alpha else "")


def render_lmm_report(fits, alpha: float = ALPHA, labels=None) -> str:
    """Coefficient/p-value table, one column pair per corpus.

    ``fits`` maps a corpus name to an :class:`LmmFit`; rows are the fixed
    effects without the intercept.
    """
    fits = dict(fits)
    if not fits:
        raise ValidationError("no fits to render")
    first = next(iter(fits.values()))
    if labels is None:
        labels = FEATURE_LABELS if first.names[1:] == tuple(FEATURE_NAMES) else first.names[1:]
    name_w = max(len(s) for s in labels) + 2
    cell = 26
    lines = [
        "".ljust(name_w) + "".join(f"| {c:<{cell - 2}}" for c in fits),
        "".ljust(name_w) + "".join(
            f"| {'R-squared: %.3f/%.3f' % (f.r2_conditional, f.r2_marginal):<{cell - 2}}" for f in fits.values()),
        "".ljust(name_w) + "".join(f"| {'Coef':<10}{'p-value':<{cell - 12}}" for _ in fits),
    ]
    lines.append("-" * len(lines[0]))
    for j, lab in enumerate(labels, start=1):
        row = lab.ljust(name_w)
        for f in fits.values():
            row += f"| {f.beta[j]:<10.3f}{format_p(f.p[j], alpha):<{cell - 12}}"
        lines.append(row)
    return "\n".join(s.rstrip() for s in lines) + "\n"
