"""Maximum-likelihood fits of heavy-tailed candidates, ranked by Akaike weight.

Candidates: exponential, lognormal, power law, and exponentially truncated
power law (density proportional to x^-alpha * exp(-rate*x) above x_min, with
the upper incomplete gamma function as normalizer). Fits are compared by
AIC = -2*logL + 2k; weights are exp(-delta/2) normalized over the candidate
set. Also home to the Pearson correlation used for the road-grid check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Sequence

import mpmath
import numpy as np
from scipy.optimize import minimize

EXPONENTIAL = "exponential"
LOGNORMAL = "lognormal"
POWERLAW = "powerlaw"
TRUNCATED_POWERLAW = "truncated_powerlaw"

MODELS = (EXPONENTIAL, LOGNORMAL, POWERLAW, TRUNCATED_POWERLAW)

TPL_MAX_EVALS = 10_000
TPL_TOL = 1e-8
TPL_ALPHA_MAX = 20.0


class FitError(ValueError):
    """Samples violate a fit precondition or the fit is degenerate."""


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    log_likelihood: float
    k: int
    aic: float
    n: int
    converged: bool = True


@dataclass(frozen=True)
class ModelComparison:
    fits: tuple[FitResult, ...]
    deltas: tuple[float, ...]
    weights: tuple[float, ...]
    best: FitResult


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int


def _result(model: str, params: dict[str, float], ll: float, k: int, n: int,
            converged: bool = True) -> FitResult:
    ll = float(ll)
    return FitResult(model=model, params={k_: float(v) for k_, v in params.items()},
                     log_likelihood=ll, k=k, aic=-2.0 * ll + 2.0 * k, n=n,
                     converged=converged)


def _validate_positive(samples: Sequence[float] | np.ndarray) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise FitError("samples must be one-dimensional")
    if x.size < 2:
        raise FitError(f"need at least 2 samples, got {x.size}")
    bad = np.flatnonzero(~(x > 0) | ~np.isfinite(x))
    if bad.size:
        raise FitError(f"sample {bad[0]} is not a positive finite number: {x[bad[0]]}")
    return x


def fit_exponential(samples: Sequence[float] | np.ndarray) -> FitResult:
    """Rate MLE is 1/mean; support (0, inf)."""
    x = _validate_positive(samples)
    n = x.size
    rate = 1.0 / x.mean()
    ll = n * math.log(rate) - rate * float(x.sum())
    return _result(EXPONENTIAL, {"rate": rate}, ll, k=1, n=n)


def fit_lognormal(samples: Sequence[float] | np.ndarray) -> FitResult:
    """mu, sigma are the mean and population std of log samples."""
    x = _validate_positive(samples)
    n = x.size
    logs = np.log(x)
    mu = float(logs.mean())
    sigma = float(np.sqrt(np.mean((logs - mu) ** 2)))
    if sigma == 0.0:
        raise FitError("all samples equal: lognormal fit is degenerate (sigma = 0)")
    ll = (-float(logs.sum()) - n * math.log(sigma * math.sqrt(2.0 * math.pi))
          - float(((logs - mu) ** 2).sum()) / (2.0 * sigma ** 2))
    return _result(LOGNORMAL, {"mu": mu, "sigma": sigma}, ll, k=2, n=n)


def _validate_tail(samples: Sequence[float] | np.ndarray,
                   x_min: float | None) -> tuple[np.ndarray, float]:
    x = _validate_positive(samples)
    if x_min is None:
        x_min = float(x.min())
    if not (x_min > 0):
        raise FitError(f"x_min must be positive, got {x_min}")
    bad = np.flatnonzero(x < x_min)
    if bad.size:
        raise FitError(f"sample {bad[0]} is below x_min: {x[bad[0]]} < {x_min}")
    return x, x_min


def fit_powerlaw(samples: Sequence[float] | np.ndarray,
                 x_min: float | None = None) -> FitResult:
    """Continuous Pareto MLE: alpha = 1 + n / sum(log(x / x_min))."""
    x, x_min = _validate_tail(samples, x_min)
    n = x.size
    log_ratio = float(np.log(x / x_min).sum())
    if log_ratio <= 0.0:
        raise FitError("all samples equal x_min: power-law fit is degenerate")
    alpha = 1.0 + n / log_ratio
    ll = n * math.log((alpha - 1.0) / x_min) - alpha * log_ratio
    return _result(POWERLAW, {"alpha": alpha, "x_min": x_min}, ll, k=1, n=n)


def _tpl_log_norm(alpha: float, rate: float, x_min: float) -> float:
    """log of integral_{x_min}^inf x^-alpha exp(-rate x) dx via upper incomplete gamma."""
    g = mpmath.gammainc(1.0 - alpha, rate * x_min)
    if g <= 0:
        return math.inf
    return (alpha - 1.0) * math.log(rate) + float(mpmath.log(g))


def tpl_log_likelihood(x: np.ndarray, alpha: float, rate: float, x_min: float) -> float:
    log_z = _tpl_log_norm(alpha, rate, x_min)
    if not math.isfinite(log_z):
        return -math.inf
    return float(-alpha * np.log(x).sum() - rate * x.sum() - x.size * log_z)


def fit_truncated_powerlaw(samples: Sequence[float] | np.ndarray,
                           x_min: float | None = None,
                           max_evals: int = TPL_MAX_EVALS,
                           tol: float = TPL_TOL) -> FitResult:
    """Fit density ~ x^-alpha exp(-rate x) on [x_min, inf) by bounded search.

    Derivative-free (Nelder-Mead) over alpha in [0, 20] and log rate, from a
    few starts seeded by the nested pure power-law and exponential fits. A
    result that exhausts the evaluation budget without converging comes back
    with converged=False so callers can exclude it from comparisons.
    """
    x, x_min = _validate_tail(samples, x_min)
    n = x.size
    slog = float(np.log(x).sum())
    ssum = float(x.sum())
    scale = float(x.mean())
    log_rate_lo = math.log(1e-12 / scale)
    log_rate_hi = math.log(1e3 / scale)

    def neg_ll(p: np.ndarray) -> float:
        alpha, log_rate = float(p[0]), float(p[1])
        log_z = _tpl_log_norm(alpha, math.exp(log_rate), x_min)
        if not math.isfinite(log_z):
            return math.inf
        return alpha * slog + math.exp(log_rate) * ssum + n * log_z

    log_ratio = slog - n * math.log(x_min)
    alpha_pl = 1.0 + n / log_ratio if log_ratio > 0 else 1.0
    rate_exp = 1.0 / max(scale - x_min, 1e-12 * scale)
    # first two starts sit on the nested optima (pure power law, shifted
    # exponential), so the search result always dominates both nested fits
    starts = [
        (min(alpha_pl, TPL_ALPHA_MAX), log_rate_lo),
        (0.0, min(max(math.log(rate_exp), log_rate_lo), log_rate_hi)),
        (min(alpha_pl / 2.0, TPL_ALPHA_MAX), math.log(1.0 / scale)),
    ]
    budget = max_evals // len(starts)
    best = None
    converged = False
    for start in starts:
        res = minimize(neg_ll, np.asarray(start), method="Nelder-Mead",
                       bounds=[(0.0, TPL_ALPHA_MAX), (log_rate_lo, log_rate_hi)],
                       options={"maxfev": budget, "fatol": tol, "xatol": 1e-10})
        if best is None or res.fun < best.fun:
            best = res
        converged = converged or bool(res.success)
    alpha = float(best.x[0])
    rate = math.exp(float(best.x[1]))
    ll = -float(best.fun)
    return _result(TRUNCATED_POWERLAW,
                   {"alpha": alpha, "rate": rate, "x_min": x_min},
                   ll, k=2, n=n, converged=converged)


def fit_all(samples: Sequence[float] | np.ndarray,
            x_min: float | None = None) -> list[FitResult]:
    """All four candidate fits on one sample set (shared x_min for tail models)."""
    return [fit_exponential(samples),
            fit_lognormal(samples),
            fit_powerlaw(samples, x_min),
            fit_truncated_powerlaw(samples, x_min)]


def compare_models(fits: Sequence[FitResult]) -> ModelComparison:
    """Akaike deltas and weights; best = max weight, ties to fewer parameters."""
    usable = tuple(f for f in fits if f.converged)
    if len(usable) < 2:
        raise FitError(f"need at least 2 converged fits to compare, got {len(usable)}")
    aics = np.asarray([f.aic for f in usable])
    deltas = aics - aics.min()
    raw = np.exp(-deltas / 2.0)
    weights = raw / raw.sum()
    order = sorted(range(len(usable)),
                   key=lambda i: (-weights[i], usable[i].k, usable[i].model))
    return ModelComparison(fits=usable,
                           deltas=tuple(float(d) for d in deltas),
                           weights=tuple(float(w) for w in weights),
                           best=usable[order[0]])


def pearson(x: Sequence[float] | np.ndarray,
            y: Sequence[float] | np.ndarray) -> CorrelationResult:
    """Sample Pearson correlation; errors on constant input where r is undefined."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("x and y must be one-dimensional and equally long")
    if xa.size < 2:
        raise ValueError("need at least 2 pairs")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float((dx ** 2).sum())
    sy = float((dy ** 2).sum())
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined for a constant vector")
    r = float((dx * dy).sum()) / math.sqrt(sx * sy)
    return CorrelationResult(r=max(-1.0, min(1.0, r)), n=int(xa.size))


def empirical_ccdf(samples: Sequence[float] | np.ndarray,
                   n_bins: int = 50) -> list[tuple[float, float]]:
    """Complementary CDF P(X >= x) sampled at geometric bin edges (plot data)."""
    x = _validate_positive(samples)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return [(lo, 1.0)]
    edges = np.geomspace(lo, hi, n_bins)
    xs = np.sort(x)
    idx = np.searchsorted(xs, edges, side="left")
    return [(float(e), float((x.size - i) / x.size)) for e, i in zip(edges, idx)]


def _format_params(fit: FitResult) -> str:
    return ",".join(f"{k}={repr(v)}" for k, v in sorted(fit.params.items()))


def write_comparison(cmp: ModelComparison, fh: IO[str]) -> None:
    """Machine-readable table: model;params;logL;aic;delta;weight."""
    for fit, delta, weight in zip(cmp.fits, cmp.deltas, cmp.weights):
        fh.write(f"{fit.model};{_format_params(fit)};{repr(fit.log_likelihood)};"
                 f"{repr(fit.aic)};{repr(delta)};{repr(weight)}\n")


def comparison_table(cmp: ModelComparison) -> str:
    """Human-readable comparison, best model first."""
    rows = sorted(zip(cmp.fits, cmp.deltas, cmp.weights), key=lambda t: t[1])
    lines = [f"{'model':<20} {'logL':>14} {'AIC':>14} {'dAIC':>10} {'weight':>8}  params"]
    for fit, delta, weight in rows:
        params = ", ".join(f"{k}={v:.6g}" for k, v in sorted(fit.params.items()))
        lines.append(f"{fit.model:<20} {fit.log_likelihood:>14.4f} {fit.aic:>14.4f} "
                     f"{delta:>10.4f} {weight:>8.4f}  {params}")
    return "\n".join(lines)


def write_ccdf(points: Sequence[tuple[float, float]], fh: IO[str]) -> None:
    for xv, cv in points:
        fh.write(f"{repr(float(xv))};{repr(float(cv))}\n")
