"""Time-trend models for bias series.

fit_lmm fits y_it = b0 + b1*t (+ b2*t^2) + u_i + e_it with a random
intercept u_i per word. The variance ratio lambda = var(u)/var(e) is
found by golden-section search on the profiled REML deviance, fixed
effects follow by GLS at that ratio, and Wald p-values use a normal
reference. fit_ols covers aggregate series with classical t-tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .bias import BiasObservation

TIME_CODINGS = ("year_offset", "bucket_index")


@dataclass(frozen=True)
class Coefficient:
    estimate: float
    se: float
    stat: float
    p: float


@dataclass
class TrendFit:
    """Fitted trend: named coefficients plus variance components."""

    coefficients: dict[str, Coefficient]
    sigma2_word: float
    sigma2_resid: float
    n_obs: int
    n_words: int
    time_coding: str
    method: str                      # "reml" or "ols"
    quadratic: bool
    formula: str
    loglik: Optional[float] = None
    lambda_ratio: Optional[float] = None
    boundary: bool = False           # lambda search ended at 0
    time_mean: float = 0.0           # centering applied to quadratic fits
    raw_time: dict[str, Coefficient] = field(default_factory=dict)

    @property
    def beta0(self) -> float:
        return self.coefficients["intercept"].estimate

    @property
    def beta_linear(self) -> float:
        return self.coefficients["time"].estimate

    @property
    def beta_quadratic(self) -> Optional[float]:
        c = self.coefficients.get("time2")
        return c.estimate if c else None

    def to_dict(self) -> dict:
        def cdict(c):
            return {"estimate": c.estimate, "se": c.se, "stat": c.stat,
                    "p": c.p}
        return {
            "coefficients": {k: cdict(c)
                             for k, c in self.coefficients.items()},
            "raw_time": {k: cdict(c) for k, c in self.raw_time.items()},
            "sigma2_word": self.sigma2_word,
            "sigma2_resid": self.sigma2_resid,
            "n_obs": self.n_obs, "n_words": self.n_words,
            "time_coding": self.time_coding, "method": self.method,
            "quadratic": self.quadratic, "formula": self.formula,
            "loglik": self.loglik, "lambda_ratio": self.lambda_ratio,
            "boundary": self.boundary, "time_mean": self.time_mean,
        }


def write_fit_json(fit: TrendFit, path: str | Path,
                   header: dict | None = None) -> None:
    payload = dict(header or {})
    payload.update(fit.to_dict())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _code_times(bucket_starts: np.ndarray, time_coding: str) -> np.ndarray:
    if time_coding not in TIME_CODINGS:
        raise ValueError(f"unknown time_coding {time_coding!r}")
    if time_coding == "year_offset":
        return (bucket_starts - bucket_starts.min()).astype(np.float64)
    uniq = np.unique(bucket_starts)
    rank = {b: i for i, b in enumerate(uniq)}
    return np.array([rank[b] for b in bucket_starts], dtype=np.float64)


def _wald_p(z: float) -> float:
    return float(2.0 * stats.norm.sf(abs(z)))


def _coef(est: float, se: float, df: Optional[int] = None) -> Coefficient:
    if se == 0.0:
        # perfect fit: a zero estimate carries no evidence either way
        return Coefficient(est, 0.0, 0.0 if est == 0 else math.inf,
                           1.0 if est == 0 else 0.0)
    z = est / se
    p = _wald_p(z) if df is None else float(2.0 * stats.t.sf(abs(z), df))
    return Coefficient(float(est), float(se), float(z), p)


def _raw_time_coefs(beta: np.ndarray, cov: np.ndarray, t_mean: float,
                    names: Sequence[str],
                    df: Optional[int]) -> dict[str, Coefficient]:
    """Map a centered-time quadratic fit back to raw-time coefficients."""
    T = np.array([[1.0, -t_mean, t_mean ** 2],
                  [0.0, 1.0, -2.0 * t_mean],
                  [0.0, 0.0, 1.0]])
    braw = T @ beta
    craw = T @ cov @ T.T
    return {name: _coef(braw[i], math.sqrt(max(craw[i, i], 0.0)), df)
            for i, name in enumerate(names)}


class _RemlProblem:
    """Sufficient statistics for one random-intercept REML fit."""

    def __init__(self, X: np.ndarray, y: np.ndarray, groups: np.ndarray):
        self.X = X
        self.y = y
        self.n, self.p = X.shape
        uniq, idx = np.unique(groups, return_inverse=True)
        self.n_groups = len(uniq)
        self.sizes = np.bincount(idx).astype(np.float64)
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        # per-group sums of X rows and of y
        self.S = np.zeros((self.n_groups, self.p))
        np.add.at(self.S, idx, X)
        self.Ty = np.bincount(idx, weights=y)

    def gls(self, lam: float):
        """beta, A = X'V*^-1 X, q = whitened residual sum, logdet terms."""
        # per-group inverse block: (I + lam J)^-1 = I - (lam/(1+lam n_i)) J
        c = lam / (1.0 + lam * self.sizes)
        A = self.XtX - self.S.T @ (c[:, None] * self.S)
        bvec = self.Xty - self.S.T @ (c * self.Ty)
        beta = np.linalg.solve(A, bvec)
        q = self.yty - float(c @ (self.Ty ** 2)) - float(beta @ bvec)
        logdet_v = float(np.log1p(lam * self.sizes).sum())
        sign, logdet_a = np.linalg.slogdet(A)
        if sign <= 0:
            raise np.linalg.LinAlgError("X'V^-1X not positive definite")
        return beta, A, max(q, 0.0), logdet_v, logdet_a

    def deviance(self, lam: float) -> float:
        _, _, q, logdet_v, logdet_a = self.gls(lam)
        df = self.n - self.p
        return df * math.log(max(q, 1e-300)) + logdet_v + logdet_a

    def loglik(self, lam: float) -> float:
        df = self.n - self.p
        return -0.5 * (self.deviance(lam)
                       + df * (1.0 + math.log(2.0 * math.pi / df)))


def _golden_section_min(f, lo: float, hi: float, tol: float = 1e-12,
                        max_iter: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _search_lambda(problem: _RemlProblem) -> tuple[float, bool]:
    grid = np.concatenate(([0.0], np.logspace(-8, 8, 81)))
    values = [problem.deviance(g) for g in grid]
    i = int(np.argmin(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if lo == hi:
        lam = lo
    else:
        lam = _golden_section_min(problem.deviance, lo, hi)
    if problem.deviance(0.0) <= problem.deviance(lam):
        lam = 0.0
    boundary = lam < 1e-10
    return (0.0 if boundary else float(lam)), boundary


def _fit_reml(X: np.ndarray, y: np.ndarray, groups: np.ndarray,
              names: Sequence[str], time_coding: str, quadratic: bool,
              formula: str, t_mean: float,
              fix_lambda: Optional[float] = None) -> TrendFit:
    problem = _RemlProblem(X, y, groups)
    n, p = problem.n, problem.p
    if n <= p:
        raise ValueError(f"{n} observations cannot identify {p} effects")

    if fix_lambda is not None:
        lam, boundary = float(fix_lambda), fix_lambda == 0.0
    else:
        lam, boundary = _search_lambda(problem)

    beta, A, q, _, _ = problem.gls(lam)
    sigma2 = q / (n - p)
    perfect = sigma2 <= 1e-14 * max(1.0, problem.yty / n)
    cov = sigma2 * np.linalg.inv(A)
    coefficients = {
        name: _coef(beta[i], math.sqrt(max(cov[i, i], 0.0)))
        for i, name in enumerate(names)}
    raw = {}
    if quadratic and list(names[:3]) == ["intercept", "time", "time2"]:
        raw = _raw_time_coefs(beta[:3], cov[:3, :3], t_mean,
                              ["intercept", "time", "time2"], None)
    return TrendFit(
        coefficients=coefficients,
        sigma2_word=0.0 if perfect else float(lam * sigma2),
        sigma2_resid=0.0 if perfect else float(sigma2),
        n_obs=n, n_words=problem.n_groups, time_coding=time_coding,
        method="reml", quadratic=quadratic, formula=formula,
        loglik=None if perfect else problem.loglik(lam),
        lambda_ratio=lam, boundary=boundary, time_mean=t_mean, raw_time=raw)


def reml_profile(observations: Sequence[BiasObservation], lam: float,
                 quadratic: bool = False,
                 time_coding: str = "year_offset") -> float:
    """Profiled REML log-likelihood at a pinned variance ratio."""
    X, y, groups, _ = _design_from_observations(observations, quadratic,
                                                time_coding)
    return _RemlProblem(X, y, groups).loglik(lam)


def _design_from_observations(observations, quadratic, time_coding):
    if len(observations) < 3:
        raise ValueError("too few observations")
    words = [o.trait_word for o in observations]
    if len(set(words)) < 2:
        raise ValueError("need at least 2 distinct words")
    buckets = np.array([o.bucket_start for o in observations])
    if len(np.unique(buckets)) < 2:
        raise ValueError("time is constant across observations")
    y = np.array([o.bias for o in observations])
    t = _code_times(buckets, time_coding)
    _, groups = np.unique(words, return_inverse=True)
    t_mean = 0.0
    if quadratic:
        t_mean = float(t.mean())
        tc = t - t_mean
        X = np.column_stack([np.ones_like(t), tc, tc ** 2])
    else:
        X = np.column_stack([np.ones_like(t), t])
    return X, y, groups, t_mean


def fit_lmm(observations: Sequence[BiasObservation], quadratic: bool = False,
            time_coding: str = "year_offset",
            fix_lambda: Optional[float] = None) -> TrendFit:
    """REML random-intercept trend fit over word-level bias observations.

    Needs at least two distinct words and two distinct time points. The
    quadratic model centers time at its mean; raw_time on the result
    carries the equivalent uncentered coefficients. fix_lambda pins the
    variance ratio (0 reduces the fit to OLS).
    """
    X, y, groups, t_mean = _design_from_observations(observations, quadratic,
                                                     time_coding)
    if quadratic:
        names = ["intercept", "time", "time2"]
        formula = "bias ~ 1 + time_c + time_c^2 + (1 | word)"
    else:
        names = ["intercept", "time"]
        formula = "bias ~ 1 + time + (1 | word)"
    return _fit_reml(X, y, groups, names, time_coding, quadratic, formula,
                     t_mean, fix_lambda)


def group_interaction(obs_by_group: dict, time_coding: str = "year_offset",
                      fix_lambda: Optional[float] = None) -> TrendFit:
    """Fixed effects {1, time, group, group x time} with a word intercept.

    obs_by_group maps exactly two group labels (e.g. 0/1 artist gender) to
    observation lists; the smaller label codes as 0. The random intercept
    is shared by word across groups.
    """
    if len(obs_by_group) != 2:
        raise ValueError("need exactly two groups")
    labels = sorted(obs_by_group)
    rows = []
    for code, label in enumerate(labels):
        obs = obs_by_group[label]
        if len({o.bucket_start for o in obs}) < 2:
            raise ValueError(
                f"group {label!r} present at fewer than 2 time points")
        rows.extend((o, float(code)) for o in obs)
    observations = [o for o, _ in rows]
    g = np.array([c for _, c in rows])
    buckets = np.array([o.bucket_start for o in observations])
    y = np.array([o.bias for o in observations])
    t = _code_times(buckets, time_coding)
    _, groups = np.unique([o.trait_word for o in observations],
                          return_inverse=True)
    X = np.column_stack([np.ones_like(t), t, g, g * t])
    names = ["intercept", "time", "group", "group_x_time"]
    formula = "bias ~ 1 + time + group + group:time + (1 | word)"
    return _fit_reml(X, y, groups, names, time_coding, False, formula, 0.0,
                     fix_lambda)


def fit_ols(series: Sequence[tuple[float, float]], quadratic: bool = False,
            time_coding: str = "year_offset") -> TrendFit:
    """Classical least squares with t-test p-values on (t, y) pairs."""
    pts = [(float(t), float(v)) for t, v in series]
    need = 4 if quadratic else 3
    if len(pts) < need:
        raise ValueError(f"need at least {need} points")
    t = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])

    t_mean = 0.0
    if quadratic:
        t_mean = float(t.mean())
        tc = t - t_mean
        X = np.column_stack([np.ones_like(t), tc, tc ** 2])
        names = ["intercept", "time", "time2"]
        formula = "y ~ 1 + time_c + time_c^2"
    else:
        X = np.column_stack([np.ones_like(t), t])
        names = ["intercept", "time"]
        formula = "y ~ 1 + time"
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        raise ValueError("rank-deficient design (check for constant time)")

    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - p
    sigma2 = rss / df
    cov = sigma2 * np.linalg.inv(XtX)
    coefficients = {
        name: _coef(beta[i], math.sqrt(max(cov[i, i], 0.0)), df)
        for i, name in enumerate(names)}
    raw = {}
    if quadratic:
        raw = _raw_time_coefs(beta, cov, t_mean, names, df)
    loglik = float(-0.5 * n * (math.log(2 * math.pi * max(rss / n, 1e-300))
                               + 1.0))
    return TrendFit(coefficients=coefficients, sigma2_word=0.0,
                    sigma2_resid=sigma2, n_obs=n, n_words=0,
                    time_coding=time_coding, method="ols",
                    quadratic=quadratic, formula=formula, loglik=loglik,
                    lambda_ratio=None, boundary=False, time_mean=t_mean,
                    raw_time=raw)
