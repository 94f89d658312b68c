"""Maximum-likelihood estimation for every supported family.

Closed forms are used where they exist (Pareto, inverse Gaussian), a
bracketed root of the profile score for the Weibull shape, EM for the
two-component normal mixture and Nelder-Mead for the variance gamma law.
Each fitter returns a :class:`FitReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .dists import (
    InverseGaussianParams,
    KdeModel,
    MixtureNormalParams,
    ParetoParams,
    VarianceGammaParams,
    WeibullParams,
)
from .errors import (
    DegenerateSample,
    EmNotConverged,
    InvalidValue,
    NonPositiveSample,
    OptimizerStalled,
    RootNotBracketed,
    TooFewSamples,
)

POSITIVE_FAMILIES = ("pareto", "weibull", "invgauss")
TRANSFORMS = ("positive", "abs")

# asymptotic (expected-information) standard-error factors for the Weibull MLE
_EULER = 0.5772156649015329
_WEIBULL_SE_SHAPE = math.sqrt(6.0) / math.pi
_WEIBULL_SE_SCALE = math.sqrt(1.0 + 6.0 * (1.0 - _EULER) ** 2 / math.pi**2)


@dataclass(frozen=True)
class FitReport:
    """Fitted model together with standard errors and sample provenance.

    ``std_errors`` maps parameter name to standard error and only holds
    entries for which a formula is available.
    """

    model: object
    std_errors: dict
    n: int
    log_likelihood: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise TooFewSamples(f"a fit needs at least 2 observations, got {self.n}")
        for name, se in self.std_errors.items():
            if not (math.isfinite(se) and se >= 0):
                raise ValueError(f"standard error for {name} is not a finite nonnegative number")

    @property
    def family(self) -> str:
        return self.model.family

    def to_dict(self) -> dict:
        model_doc = self.model.to_dict()
        rows = []
        for name, value in model_doc.items():
            if name in ("family", "form", "kernel", "samples"):
                continue
            rows.append({"parameter": name, "estimate": value, "std_error": self.std_errors.get(name)})
        doc = {
            "family": self.family,
            "n": self.n,
            "log_likelihood": self.log_likelihood,
            "parameters": rows,
            "model": model_doc,
        }
        doc.update(self.extra)
        return doc


def _sample(x, min_n=2) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < min_n:
        raise TooFewSamples(f"need at least {min_n} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidValue("sample", "contains non-finite values")
    return arr


def _positive(x, min_n=2) -> np.ndarray:
    arr = _sample(x, min_n)
    if np.any(arr <= 0):
        raise NonPositiveSample("positive-support family needs strictly positive observations")
    return arr


def _loglik(model, x) -> float:
    if hasattr(model, "logpdf"):
        return float(np.sum(model.logpdf(x)))
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(model.pdf(x))))


def prepare_sample(values, family: str, transform: str = "positive") -> np.ndarray:
    """Map raw returns onto the support of ``family``.

    Positive-support families see either the strictly positive returns
    (``"positive"``) or the nonzero absolute returns (``"abs"``). Real-line
    families receive the data unchanged.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if family not in POSITIVE_FAMILIES:
        return arr
    if transform == "positive":
        return arr[arr > 0]
    if transform == "abs":
        a = np.abs(arr)
        return a[a > 0]
    raise InvalidValue("transform", f"expected one of {TRANSFORMS}, got {transform!r}")


def fit_pareto(x) -> FitReport:
    """Type I Pareto MLE: scale at the sample minimum, shape ``n / sum(log(x/scale))``."""
    arr = _positive(x, min_n=1)
    n = arr.size
    lam = float(arr.min())
    total = float(np.sum(np.log(arr / lam)))
    if total <= 0:
        raise DegenerateSample("all observations equal the minimum; the tail index is undefined")
    alpha = n / total
    model = ParetoParams(lam, alpha, "type1")
    return FitReport(model, {"shape": alpha / math.sqrt(n)}, n, _loglik(model, arr))


def fit_lomax(x) -> FitReport:
    """Lomax MLE by profiling out the shape.

    For fixed scale the shape estimate is ``n / sum(log1p(x/scale))``; the
    profile likelihood is then maximised over ``log(scale)``. When the data
    are close to exponential the optimum drifts to large scale and shape
    with their ratio pinned near the sample mean.
    """
    arr = _positive(x)
    n = arr.size
    if np.ptp(arr) == 0:
        raise DegenerateSample("all observations are equal")

    def shape_at(log_lam):
        return n / float(np.sum(np.log1p(arr / math.exp(log_lam))))

    def neg_profile(log_lam):
        lam = math.exp(log_lam)
        s = float(np.sum(np.log1p(arr / lam)))
        alpha = n / s
        return -(n * math.log(alpha) - n * log_lam - (alpha + 1.0) * s)

    centre = math.log(float(np.mean(arr)))
    res = optimize.minimize_scalar(neg_profile, bounds=(centre - 20.0, centre + 20.0), method="bounded", options={"xatol": 1e-10})
    lam = math.exp(res.x)
    model = ParetoParams(lam, shape_at(res.x), "lomax")
    # the profile is flat once scale dwarfs the data: that is the exponential limit
    limit = lam > 1e4 * float(np.mean(arr))
    return FitReport(model, {}, n, _loglik(model, arr), {"exponential_limit": bool(limit)})


def _weibull_score(log_x: np.ndarray, k: float) -> float:
    top = log_x.max()
    w = np.exp(k * (log_x - top))
    return float(np.dot(w, log_x) / w.sum() - 1.0 / k - log_x.mean())


def weibull_scale_given_shape(x, shape: float) -> float:
    """Closed-form scale ``(mean(x**shape))**(1/shape)`` evaluated in log space."""
    log_x = np.log(_positive(x, min_n=1))
    top = log_x.max()
    return float(math.exp(top + math.log(np.mean(np.exp(shape * (log_x - top)))) / shape))


def fit_weibull(x, bracket=(1e-4, 100.0), tol=1e-10) -> FitReport:
    """Weibull MLE; the shape solves the profile score equation to ``tol``."""
    arr = _positive(x)
    n = arr.size
    if np.ptp(arr) == 0:
        raise DegenerateSample("all observations are equal")
    log_x = np.log(arr)
    g = lambda k: _weibull_score(log_x, k)
    lo, hi = bracket
    for _ in range(60):
        if g(lo) < 0 < g(hi):
            break
        if g(lo) >= 0:
            lo /= 10.0
        if g(hi) <= 0:
            hi *= 10.0
    else:
        raise RootNotBracketed(f"Weibull shape root not enclosed by [{lo}, {hi}]")
    k = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(g(k)) >= tol:
        raise RootNotBracketed(f"Weibull score residual {g(k):.3e} above {tol}")
    scale = weibull_scale_given_shape(arr, k)
    model = WeibullParams(scale, k)
    se = {"shape": _WEIBULL_SE_SHAPE * k / math.sqrt(n), "scale": _WEIBULL_SE_SCALE * scale / (k * math.sqrt(n))}
    return FitReport(model, se, n, _loglik(model, arr), {"score_residual": g(k)})


def fit_invgauss(x, w=None) -> FitReport:
    """Weighted inverse Gaussian MLE.

    ``mean = sum(w x) / sum(w)`` and ``1/shape = (1/n) sum(w (1/x - 1/mean))``.
    """
    arr = _positive(x)
    n = arr.size
    w = np.ones(n) if w is None else np.asarray(w, dtype=float).ravel()
    if w.shape != arr.shape or np.any(w <= 0):
        raise InvalidValue("weights", "must be positive and match the sample length")
    mu = float(np.dot(w, arr) / w.sum())
    # sum(w (1/x - 1/mu)) rewritten as sum(w (mu - x)/x) / mu, which rounds less
    spread = float(np.dot(w, (mu - arr) / arr))
    if spread <= 1e-14 * float(np.dot(w, mu / arr)):
        raise DegenerateSample("zero dispersion: the shape estimate is unbounded")
    lam = n * mu / spread
    model = InverseGaussianParams(mu, lam)
    se = {"mean": math.sqrt(mu**3 / (lam * w.sum())), "shape": lam * math.sqrt(2.0 / n)}
    return FitReport(model, se, n, _loglik(model, arr))


def fit_mixture_normal(x, tol=1e-8, max_iter=500) -> FitReport:
    """EM for two normal components with a shared spread.

    Starts from the quartiles, the sample standard deviation and equal
    weights; stops once the log-likelihood gains less than ``tol``.
    Components are relabelled so that ``mu1 <= mu2``.
    """
    arr = _sample(x)
    if arr.size < 10:
        raise TooFewSamples(f"mixture fit needs at least 10 observations, got {arr.size}")
    n = arr.size
    mu1, mu2 = (float(v) for v in np.percentile(arr, [25, 75]))
    sigma = float(np.std(arr, ddof=1))
    if not sigma > 0:
        raise DegenerateSample("all observations are equal")
    weight = 0.5
    prev = -math.inf
    for it in range(1, max_iter + 1):
        l1 = math.log(weight) - 0.5 * ((arr - mu1) / sigma) ** 2
        l2 = math.log1p(-weight) - 0.5 * ((arr - mu2) / sigma) ** 2
        top = np.maximum(l1, l2)
        log_mix = top + np.log(np.exp(l1 - top) + np.exp(l2 - top))
        ll = float(np.sum(log_mix) - n * (math.log(sigma) + 0.5 * math.log(2 * math.pi)))
        if ll - prev < tol:
            break
        prev = ll
        gamma = np.exp(l1 - log_mix)
        s1 = float(gamma.sum())
        s2 = n - s1
        if s1 <= 0 or s2 <= 0:
            raise DegenerateSample("a mixture component lost all its mass")
        weight = s1 / n
        mu1 = float(np.dot(gamma, arr) / s1)
        mu2 = float(np.dot(1.0 - gamma, arr) / s2)
        sigma = math.sqrt(float(np.dot(gamma, (arr - mu1) ** 2) + np.dot(1.0 - gamma, (arr - mu2) ** 2)) / n)
        if not (sigma > 0 and 0 < weight < 1):
            raise DegenerateSample("EM collapsed onto a degenerate solution")
    else:
        raise EmNotConverged(f"EM did not converge in {max_iter} iterations")
    if mu1 > mu2:
        mu1, mu2, weight = mu2, mu1, 1.0 - weight
    model = MixtureNormalParams(mu1, mu2, sigma, weight)
    extra = {"delta": model.delta, "bimodality_index": model.bimodality_index, "unimodal": model.unimodal, "iterations": it}
    return FitReport(model, {}, n, _loglik(model, arr), extra)


def _vg_from(theta_vec) -> VarianceGammaParams:
    c, log_s, th, log_nu = theta_vec
    return VarianceGammaParams(float(c), math.exp(log_s), float(th), math.exp(log_nu))


def vg_negloglik(model: VarianceGammaParams, x) -> float:
    val = -float(np.sum(model.logpdf(x)))
    return val if math.isfinite(val) else math.inf


def fit_variance_gamma(x, xatol=1e-9, maxfev=5000) -> FitReport:
    """Nelder-Mead MLE over ``(c, log sigma, theta, log nu)``.

    The simplex starts at the median, the sample standard deviation, zero
    asymmetry and unit shape, and stops once its diameter is below ``xatol``.
    """
    arr = _sample(x)
    if arr.size < 10:
        raise TooFewSamples(f"variance gamma fit needs at least 10 observations, got {arr.size}")
    sd = float(np.std(arr, ddof=1))
    if not sd > 0:
        raise DegenerateSample("all observations are equal")
    start = np.array([float(np.median(arr)), math.log(sd), 0.0, 0.0])

    def objective(v):
        if not np.all(np.isfinite(v)) or abs(v[1]) > 700 or abs(v[3]) > 700:
            return math.inf
        return vg_negloglik(_vg_from(v), arr)

    res = optimize.minimize(objective, start, method="Nelder-Mead", options={"xatol": xatol, "fatol": math.inf, "maxfev": maxfev, "maxiter": maxfev})
    if not res.success:
        raise OptimizerStalled(f"Nelder-Mead stopped without converging after {res.nfev} evaluations")
    model = _vg_from(res.x)
    extra = {"start_negloglik": objective(start), "evaluations": int(res.nfev)}
    return FitReport(model, {}, arr.size, -float(res.fun), extra)


def silverman_bandwidth(x) -> float:
    arr = _sample(x)
    sd = float(np.std(arr, ddof=1))
    q75, q25 = np.percentile(arr, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    if not spread > 0:
        raise DegenerateSample("all observations are equal")
    return 0.9 * spread * arr.size ** (-0.2)


def fit_kde(x, bandwidth=None) -> KdeModel:
    """Gaussian KDE over the sample; Silverman's rule when no bandwidth is given."""
    arr = _sample(x)
    if bandwidth is None:
        bandwidth = silverman_bandwidth(arr)
    elif not bandwidth > 0:
        raise InvalidValue("bandwidth", "must be positive")
    return KdeModel(tuple(arr.tolist()), float(bandwidth))


def fit_kde_report(x, bandwidth=None) -> FitReport:
    arr = _sample(x)
    model = fit_kde(arr, bandwidth)
    return FitReport(model, {}, arr.size, _loglik(model, arr))


def fit_family(family: str, x, *, pareto_form="lomax", bandwidth=None) -> FitReport:
    """Dispatch to the fitter for ``family`` on an already transformed sample."""
    if family == "pareto":
        return fit_lomax(x) if pareto_form == "lomax" else fit_pareto(x)
    fitters = {
        "weibull": fit_weibull,
        "invgauss": fit_invgauss,
        "mixnorm": fit_mixture_normal,
        "vargamma": fit_variance_gamma,
        "kde": lambda s: fit_kde_report(s, bandwidth),
    }
    if family not in fitters:
        raise InvalidValue("family", f"unknown family {family!r}")
    return fitters[family](x)
