"""Return-distribution families used by the fitter, the KS test and the policy solver.

Every model is an immutable dataclass exposing ``pdf``, ``cdf``, ``sf``,
``logsf`` and ``quantile``. The functions at module level dispatch on the
model so callers can treat the six families uniformly. All evaluators
accept a scalar or an array and return the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from functools import cached_property

import numpy as np
from scipy import integrate, optimize, special

from .errors import OutOfRange, QuadratureFailure

FAMILIES = ("pareto", "weibull", "invgauss", "mixnorm", "vargamma", "kde")

_LOG_2PI = math.log(2.0 * math.pi)


def _arr(x):
    a = np.asarray(x, dtype=float)
    return a, a.ndim == 0


def _out(a, scalar):
    return float(a) if scalar else a


def norm_cdf(x):
    """Standard normal CDF via the complementary error function."""
    a, scalar = _arr(x)
    return _out(special.ndtr(a), scalar)


def _check_p(p):
    a, scalar = _arr(p)
    if np.any(~((a > 0) & (a < 1))):
        raise OutOfRange(f"probability must lie in (0, 1), got {p!r}")
    return a, scalar


def _bracket_quantile(cdf, p, lo, hi, grow_lo, grow_hi):
    """Invert a continuous CDF by bracket expansion followed by Brent's method."""
    for _ in range(200):
        if cdf(lo) < p:
            break
        lo = grow_lo(lo)
    else:
        raise OutOfRange(f"could not bracket quantile {p} from below")
    for _ in range(200):
        if cdf(hi) > p:
            break
        hi = grow_hi(hi)
    else:
        raise OutOfRange(f"could not bracket quantile {p} from above")
    return optimize.brentq(lambda x: cdf(x) - p, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


class _Dist:
    """Shared plumbing; subclasses provide ``_logsf``/``_pdf`` and a quantile."""

    family = ""
    n_params = 0

    def pdf(self, x):
        a, scalar = _arr(x)
        return _out(self._pdf(a), scalar)

    def logsf(self, x):
        a, scalar = _arr(x)
        return _out(self._logsf(a), scalar)

    def sf(self, x):
        a, scalar = _arr(x)
        return _out(np.exp(self._logsf(a)), scalar)

    def cdf(self, x):
        a, scalar = _arr(x)
        return _out(-np.expm1(self._logsf(a)), scalar)

    def quantile(self, p):
        a, scalar = _check_p(p)
        q = np.vectorize(self._quantile, otypes=[float])(a)
        return _out(q, scalar)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for f in fields(self):
            if f.repr:
                out[f.name] = getattr(self, f.name)
        return out


@dataclass(frozen=True)
class ParetoParams(_Dist):
    """Pareto law with scale ``scale`` and tail index ``shape``.

    ``form="type1"`` is the classical law on ``x >= scale`` with survival
    ``(scale/x)**shape``; ``form="lomax"`` is the shifted law on ``x >= 0``
    with density ``shape*scale**shape / (x+scale)**(shape+1)``.
    """

    scale: float
    shape: float
    form: str = "type1"

    family = "pareto"
    n_params = 2

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise ValueError("Pareto scale and shape must be positive")
        if self.form not in ("type1", "lomax"):
            raise ValueError(f"unknown Pareto form {self.form!r}")

    @property
    def lower(self):
        return self.scale if self.form == "type1" else 0.0

    def _pdf(self, x):
        lam, alpha = self.scale, self.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.form == "type1":
                logp = math.log(alpha) + alpha * math.log(lam) - (alpha + 1) * np.log(x)
            else:
                logp = math.log(alpha / lam) - (alpha + 1) * np.log1p(x / lam)
        return np.where(x >= self.lower, np.exp(logp), 0.0)

    def _logsf(self, x):
        lam, alpha = self.scale, self.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.form == "type1":
                ls = alpha * np.log(lam / x)
            else:
                ls = -alpha * np.log1p(x / lam)
        return np.where(x > self.lower, ls, 0.0)

    def _quantile(self, p):
        growth = -math.log1p(-p) / self.shape
        if self.form == "type1":
            return self.scale * math.exp(growth)
        return self.scale * math.expm1(growth)

    def as_lomax(self) -> ParetoParams:
        return ParetoParams(self.scale, self.shape, "lomax")


@dataclass(frozen=True)
class WeibullParams(_Dist):
    scale: float
    shape: float

    family = "weibull"
    n_params = 2
    lower = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and self.shape > 0):
            raise ValueError("Weibull scale and shape must be positive")

    def _pdf(self, x):
        lam, k = self.scale, self.shape
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            z = np.where(x >= 0, x, 0.0) / lam
            dens = (k / lam) * np.power(z, k - 1) * np.exp(-np.power(z, k))
        return np.where(x >= 0, dens, 0.0)

    def _logsf(self, x):
        with np.errstate(over="ignore"):
            return np.where(x > 0, -np.power(np.where(x > 0, x, 0.0) / self.scale, self.shape), 0.0)

    def _quantile(self, p):
        return self.scale * (-math.log1p(-p)) ** (1.0 / self.shape)


@dataclass(frozen=True)
class InverseGaussianParams(_Dist):
    """Inverse Gaussian with mean ``mean`` and shape ``shape``.

    The CDF is the closed form
    ``Phi(sqrt(l/x)(x/m - 1)) + exp(2l/m) Phi(-sqrt(l/x)(x/m + 1))``;
    the second term is evaluated in log space so large ``2l/m`` cannot
    overflow.
    """

    mean: float
    shape: float

    family = "invgauss"
    n_params = 2
    lower = 0.0

    def __post_init__(self):
        if not (self.mean > 0 and self.shape > 0):
            raise ValueError("inverse Gaussian mean and shape must be positive")

    def _ab(self, x):
        xs = np.where(x > 0, x, 1.0)
        root = np.sqrt(self.shape / xs)
        return root * (xs / self.mean - 1.0), root * (xs / self.mean + 1.0)

    def _pdf(self, x):
        mu, lam = self.mean, self.shape
        xs = np.where(x > 0, x, 1.0)
        logp = 0.5 * (math.log(lam) - _LOG_2PI - 3.0 * np.log(xs)) - lam * (xs - mu) ** 2 / (2.0 * mu * mu * xs)
        return np.where(x > 0, np.exp(logp), 0.0)

    def _reflected(self, b):
        return np.exp(2.0 * self.shape / self.mean + special.log_ndtr(-b))

    def cdf(self, x):
        a_x, scalar = _arr(x)
        a, b = self._ab(a_x)
        F = special.ndtr(a) + self._reflected(b)
        return _out(np.where(a_x > 0, np.clip(F, 0.0, 1.0), 0.0), scalar)

    def _logsf(self, x):
        a, b = self._ab(x)
        upper = x >= self.mean
        with np.errstate(divide="ignore", invalid="ignore"):
            # right tail: Phi(-a) - exp(2l/m) Phi(-b), factored to keep relative accuracy
            log_head = special.log_ndtr(-a)
            ratio = np.exp(2.0 * self.shape / self.mean + special.log_ndtr(-b) - log_head)
            tail = log_head + np.log1p(-np.minimum(ratio, 1.0))
            body = np.log1p(-(special.ndtr(a) + self._reflected(b)))
        return np.where(x > 0, np.where(upper, tail, body), 0.0)

    def sf(self, x):
        a_x, scalar = _arr(x)
        return _out(np.exp(self._logsf(a_x)), scalar)

    def _quantile(self, p):
        return _bracket_quantile(
            self.cdf, p, self.mean * 1e-3, self.mean, lambda lo: lo / 10.0, lambda hi: hi * 2.0
        )


@dataclass(frozen=True)
class MixtureNormalParams(_Dist):
    """Two normal components sharing one spread; ``weight`` belongs to ``mu1``."""

    mu1: float
    mu2: float
    sigma: float
    weight: float

    family = "mixnorm"
    n_params = 4

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("mixture sigma must be positive")
        if not 0 < self.weight < 1:
            raise ValueError("mixing proportion must lie in (0, 1)")

    @property
    def delta(self) -> float:
        return abs(self.mu1 - self.mu2) / self.sigma

    @property
    def bimodality_index(self) -> float:
        return self.delta * math.sqrt(self.weight * (1.0 - self.weight))

    @property
    def unimodal(self) -> bool:
        # equal-variance two-component mixtures cannot be bimodal below delta = 2
        return self.delta <= 2.0

    def _pdf(self, x):
        s = self.sigma
        z1, z2 = (x - self.mu1) / s, (x - self.mu2) / s
        phi = lambda z: np.exp(-0.5 * z * z - 0.5 * _LOG_2PI) / s
        return self.weight * phi(z1) + (1.0 - self.weight) * phi(z2)

    def cdf(self, x):
        a, scalar = _arr(x)
        s = self.sigma
        F = self.weight * special.ndtr((a - self.mu1) / s) + (1.0 - self.weight) * special.ndtr((a - self.mu2) / s)
        return _out(F, scalar)

    def sf(self, x):
        a, scalar = _arr(x)
        s = self.sigma
        S = self.weight * special.ndtr((self.mu1 - a) / s) + (1.0 - self.weight) * special.ndtr((self.mu2 - a) / s)
        return _out(S, scalar)

    def _logsf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.sf(x))

    def _quantile(self, p):
        lo = min(self.mu1, self.mu2) - 40 * self.sigma
        hi = max(self.mu1, self.mu2) + 40 * self.sigma
        return optimize.brentq(lambda x: self.cdf(x) - p, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class VarianceGammaParams(_Dist):
    """Variance gamma law with location ``c``, spread ``sigma``, asymmetry
    ``theta`` and shape ``nu``.

    The density uses the modified Bessel function of the second kind,
    evaluated through its exponentially scaled form to stay finite far
    in the tails. The CDF is integrated numerically.
    """

    c: float
    sigma: float
    theta: float
    nu: float

    family = "vargamma"
    n_params = 4

    def __post_init__(self):
        if not (self.sigma > 0 and self.nu > 0):
            raise ValueError("variance gamma sigma and nu must be positive")

    @property
    def _order(self):
        return 1.0 / self.nu - 0.5

    @property
    def _alpha(self):
        return math.sqrt(2.0 * self.sigma**2 / self.nu + self.theta**2)

    @property
    def _log_norm(self):
        return math.log(2.0) - math.log(self.nu) / self.nu - 0.5 * _LOG_2PI - math.log(self.sigma) - special.gammaln(1.0 / self.nu)

    def logpdf(self, x):
        a, scalar = _arr(x)
        v, alpha, s2 = self._order, self._alpha, self.sigma**2
        d = a - self.c
        ad = np.abs(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(ad > 0, ad, 1.0)
            z = safe * alpha / s2
            log_k = np.log(special.kve(v, z)) - z
            out = self._log_norm + self.theta * d / s2 + v * (np.log(safe) - math.log(alpha)) + log_k
        if v > 0:
            # |d|**v K_v(|d| alpha / s2) tends to Gamma(v) 2**(v-1) (alpha/s2)**(-v)
            at_c = self._log_norm + special.gammaln(v) + (v - 1) * math.log(2.0) - v * math.log(alpha / s2) - v * math.log(alpha)
        else:
            at_c = np.inf
        out = np.where(ad > 0, out, at_c)
        return _out(out, scalar)

    def _pdf(self, x):
        return np.exp(self.logpdf(x))

    @cached_property
    def _mass_below_c(self):
        val, _ = integrate.quad(lambda t: float(self._pdf(np.float64(t))), -np.inf, self.c, epsabs=1e-13, epsrel=1e-12, limit=400)
        return val

    def _cdf_scalar(self, x):
        f = lambda t: float(self._pdf(np.float64(t)))
        if x <= self.c:
            val, _ = integrate.quad(f, -np.inf, x, epsabs=1e-13, epsrel=1e-12, limit=400)
            return min(max(val, 0.0), 1.0)
        val, _ = integrate.quad(f, self.c, x, epsabs=1e-13, epsrel=1e-12, limit=400)
        return min(max(self._mass_below_c + val, 0.0), 1.0)

    def cdf(self, x):
        a, scalar = _arr(x)
        return _out(np.vectorize(self._cdf_scalar, otypes=[float])(a), scalar)

    def sf(self, x):
        a, scalar = _arr(x)
        return _out(1.0 - self.cdf(a), scalar)

    def _logsf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(1.0 - self.cdf(x))

    def _quantile(self, p):
        spread = self._alpha + self.sigma
        return _bracket_quantile(
            self.cdf, p, self.c - spread, self.c + spread, lambda lo: lo - 2 * (abs(lo - self.c) + spread), lambda hi: hi + 2 * (abs(hi - self.c) + spread)
        )


_GL_HI = np.polynomial.legendre.leggauss(15)
_GL_LO = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class KdeModel(_Dist):
    """Gaussian kernel density estimate over stored samples.

    The CDF integrates the estimate numerically from ``min(samples) - 8h``:
    a table of panel masses is built once by adaptive Gauss-Legendre
    quadrature, and each query adds the partial panel it falls in.
    """

    samples: tuple
    bandwidth: float
    kernel: str = "gaussian"
    quad_tol: float = field(default=1e-14, repr=False, compare=False)

    family = "kde"
    n_params = 1

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if len(self.samples) < 2:
            raise ValueError("KDE needs at least two samples")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel != "gaussian":
            raise ValueError("only the gaussian kernel is supported")

    @cached_property
    def _x(self):
        return np.sort(np.asarray(self.samples))

    @property
    def lower(self):
        return float(self._x[0] - 8.0 * self.bandwidth)

    @property
    def upper(self):
        return float(self._x[-1] + 8.0 * self.bandwidth)

    def _pdf(self, x):
        h = self.bandwidth
        z = (np.asarray(x)[..., None] - self._x) / h
        return np.exp(-0.5 * z * z).sum(axis=-1) / (len(self._x) * h * math.sqrt(2.0 * math.pi))

    def _gl(self, a, b, rule):
        nodes, weights = rule
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        return half * (self._pdf(pts) @ weights)

    @cached_property
    def _table(self):
        lo, hi, h = self.lower, self.upper, self.bandwidth
        n_panels = max(1, math.ceil((hi - lo) / (0.5 * h)))
        edges = np.linspace(lo, hi, n_panels + 1)
        for _ in range(40):
            a, b = edges[:-1], edges[1:]
            fine, coarse = self._gl(a, b, _GL_HI), self._gl(a, b, _GL_LO)
            bad = np.abs(fine - coarse) > self.quad_tol
            if not bad.any():
                break
            edges = np.sort(np.concatenate([edges, 0.5 * (a[bad] + b[bad])]))
        else:
            raise QuadratureFailure("KDE panel quadrature did not reach tolerance")
        return edges, np.concatenate([[0.0], np.cumsum(fine)])

    def cdf(self, x):
        a_x, scalar = _arr(x)
        flat = np.atleast_1d(a_x).ravel()
        edges, cum = self._table
        out = np.empty_like(flat)
        below, above = flat <= edges[0], flat >= edges[-1]
        inside = ~(below | above)
        out[below] = 0.0
        out[above] = cum[-1]
        if inside.any():
            xi = flat[inside]
            k = np.searchsorted(edges, xi, side="right") - 1
            out[inside] = cum[k] + self._gl(edges[k], xi, _GL_HI)
        out = np.clip(out, 0.0, 1.0).reshape(np.shape(a_x))
        return _out(out, scalar)

    def sf(self, x):
        a, scalar = _arr(x)
        return _out(1.0 - self.cdf(a), scalar)

    def _logsf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(1.0 - self.cdf(x))

    def _quantile(self, p):
        return optimize.brentq(lambda x: self.cdf(x) - p, self.lower, self.upper, xtol=1e-300, rtol=4 * np.finfo(float).eps)

    def to_dict(self) -> dict:
        return {"family": "kde", "kernel": self.kernel, "bandwidth": self.bandwidth, "samples": list(self.samples)}


DistModel = ParetoParams | WeibullParams | InverseGaussianParams | MixtureNormalParams | VarianceGammaParams | KdeModel

_BY_FAMILY = {
    "pareto": ParetoParams,
    "weibull": WeibullParams,
    "invgauss": InverseGaussianParams,
    "mixnorm": MixtureNormalParams,
    "vargamma": VarianceGammaParams,
    "kde": KdeModel,
}


def pdf(model: DistModel, x):
    return model.pdf(x)


def cdf(model: DistModel, x):
    return model.cdf(x)


def sf(model: DistModel, x):
    return model.sf(x)


def quantile(model: DistModel, p):
    return model.quantile(p)


def mixture_diagnostics(params: MixtureNormalParams) -> tuple[float, float]:
    """Standardised mean separation and bimodality index of a mixture."""
    return params.delta, params.bimodality_index


def model_to_dict(model: DistModel) -> dict:
    return model.to_dict()


def model_from_dict(doc: dict) -> DistModel:
    doc = dict(doc)
    family = doc.pop("family", None)
    if family not in _BY_FAMILY:
        raise ValueError(f"unknown family {family!r}")
    return _BY_FAMILY[family](**doc)
