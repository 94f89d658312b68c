"""VaR coverage constraint and the backward allocation recursion.

Wealth over one period is ``L = pi*S + (M - pi)*r``, so wealth clears the
VaR level ``q`` exactly when the risky return exceeds the threshold

    K(pi) = (q + r*(pi - M)) / pi.

The coverage of a step is the conditional probability mass between two
consecutive thresholds,

    [F(K_t) - F(K_{t-1})] / D,

where ``D`` is ``1 - (F(K_t) - F(0))`` under ``survival_cur`` or
``1 - (F(K_{t-1}) - F(0))`` under ``survival_prev``. A single bracketed
bisection solver finds the allocation at which the coverage equals the
confidence level, for every family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dists import ParetoParams
from .errors import InvalidValue, NoRoot, NonMonotone, ZeroAllocation

CONVENTIONS = ("survival_cur", "survival_prev")
SLOTS = ("prev", "cur")
COST_MODES = ("none", "with")
RATES = (0.00008, 0.00014, 0.00024)

# Terminal allocations per family. Weibull, inverse Gaussian and KDE use the
# published anchors; Pareto has none and uses the inverse Gaussian value.
TERMINAL_PI = {"pareto": 0.1, "weibull": 1e-5, "invgauss": 0.1, "kde": 0.001}

_GRID_POINTS = 65
_MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class PolicyConfig:
    """Parameters of the constraint and of the backward recursion.

    ``denominator_convention`` and ``solved_slot`` default to ``None``,
    which selects the family default (see :func:`resolve_config`).
    """

    rate: float = 0.00014
    quantile_level: float = 0.05
    confidence: float = 0.95
    wealth_scale: float = 1.0
    txn_rate: float = 0.10
    terminal_pi: float = 0.1
    horizon: int = 26
    denominator_convention: str | None = None
    solved_slot: str | None = None

    def __post_init__(self):
        checks = [
            ("rate", math.isfinite(self.rate), "must be finite"),
            ("quantile_level", 0 < self.quantile_level < 1, "must lie in (0, 1)"),
            ("confidence", 0 < self.confidence < 1, "must lie in (0, 1)"),
            ("wealth_scale", self.wealth_scale > 0 and math.isfinite(self.wealth_scale), "must be positive"),
            ("txn_rate", 0 <= self.txn_rate < 1, "must lie in [0, 1)"),
            ("terminal_pi", 0 < self.terminal_pi <= self.wealth_scale, "must lie in (0, wealth_scale]"),
            ("horizon", int(self.horizon) == self.horizon and self.horizon >= 1, "must be a positive integer"),
            ("denominator_convention", self.denominator_convention in (None, *CONVENTIONS), f"must be one of {CONVENTIONS}"),
            ("solved_slot", self.solved_slot in (None, *SLOTS), f"must be one of {SLOTS}"),
        ]
        for name, ok, detail in checks:
            if not ok:
                raise InvalidValue(name, f"{detail}, got {getattr(self, name)!r}")


def policy_model(model):
    """Distribution the constraint integrates; Pareto is always taken in Lomax form."""
    if isinstance(model, ParetoParams) and model.form == "type1":
        return model.as_lomax()
    return model


def resolve_config(model, config: PolicyConfig) -> PolicyConfig:
    """Fill family defaults for the denominator convention and the solved slot.

    KDE uses ``survival_prev``, every parametric family ``survival_cur``.
    Pareto places the unknown allocation in the later threshold, every other
    family in the earlier one.
    """
    family = model.family
    conv = config.denominator_convention or ("survival_prev" if family == "kde" else "survival_cur")
    slot = config.solved_slot or ("cur" if family == "pareto" else "prev")
    return replace(config, denominator_convention=conv, solved_slot=slot)


def default_config(family: str, rate: float = 0.00014, **overrides) -> PolicyConfig:
    """Family-specific defaults: terminal allocation, and ``M = 1000`` for KDE."""
    base = {"rate": rate, "terminal_pi": TERMINAL_PI.get(family, 0.1)}
    if family == "kde":
        base["wealth_scale"] = 1000.0
    base.update({k: v for k, v in overrides.items() if v is not None})
    return PolicyConfig(**base)


def threshold_quantile(model, config: PolicyConfig) -> float:
    """VaR level on the wealth scale: ``M`` times the return quantile."""
    return config.wealth_scale * float(policy_model(model).quantile(config.quantile_level))


def var_threshold(pi: float, config: PolicyConfig, q: float, rebalance: float = 0.0) -> float:
    """Return level ``K`` that wealth must clear at allocation ``pi``.

    ``rebalance`` is the allocation change charged at ``config.txn_rate``.
    """
    if not pi > 0:
        raise ZeroAllocation(f"allocation must be positive, got {pi!r}")
    return (q + config.rate * (pi - config.wealth_scale) + config.txn_rate * rebalance) / pi


def coverage_from_thresholds(model, k_prev: float, k_cur: float, convention: str = "survival_cur") -> float:
    """Coverage ratio for a pair of thresholds, clipped to ``[0, 1]``.

    The numerator is taken as a survival difference so that it keeps full
    relative accuracy deep in the right tail. For laws on the positive axis
    the whole ratio is formed from log-survival values.
    """
    if convention not in CONVENTIONS:
        raise InvalidValue("denominator_convention", f"must be one of {CONVENTIONS}")
    model = policy_model(model)
    f0 = float(model.cdf(0.0))
    if f0 == 0.0:
        ls_prev, ls_cur = float(model.logsf(k_prev)), float(model.logsf(k_cur))
        if convention == "survival_cur":
            if ls_cur == -math.inf:
                return 1.0 if ls_prev > -math.inf else 0.0
            gap = ls_prev - ls_cur
            ratio = 1.0 if gap > 1.0 else math.expm1(gap)
        else:
            if ls_prev == -math.inf:
                return 0.0
            ratio = -math.expm1(ls_cur - ls_prev)
        return min(max(ratio, 0.0), 1.0)
    s_prev, s_cur = float(model.sf(k_prev)), float(model.sf(k_cur))
    num = s_prev - s_cur
    den = (s_cur if convention == "survival_cur" else s_prev) + f0
    if num <= 0:
        return 0.0
    if den <= 0:
        return 1.0
    return min(num / den, 1.0)


def coverage_prob(model, pi_prev: float, pi_cur: float, config: PolicyConfig, q: float | None = None) -> float:
    """Coverage with ``K_{t-1}`` from ``pi_prev`` and ``K_t`` from ``pi_cur``."""
    cfg = resolve_config(model, config)
    q = threshold_quantile(model, cfg) if q is None else q
    return coverage_from_thresholds(model, var_threshold(pi_prev, cfg, q), var_threshold(pi_cur, cfg, q), cfg.denominator_convention)


def step_coverage(model, x: float, pi_cur: float, config: PolicyConfig, q: float | None = None, pi_next: float | None = None, cost: bool = False) -> float:
    """Coverage of one backward step as a function of the unknown allocation ``x``.

    Without cost ``x`` is paired with ``pi_cur``. With cost each threshold
    is charged for the move to its successor: ``x`` moves to ``pi_cur`` and
    ``pi_cur`` moves to ``pi_next``. The solved slot decides whether the
    threshold of ``x`` enters the ratio as the earlier or the later one.
    """
    cfg = resolve_config(model, config)
    q = threshold_quantile(model, cfg) if q is None else q
    if cost:
        k_x = var_threshold(x, cfg, q, rebalance=pi_cur - x)
        k_a = var_threshold(pi_cur, cfg, q, rebalance=pi_next - pi_cur)
    else:
        k_x = var_threshold(x, cfg, q)
        k_a = var_threshold(pi_cur, cfg, q)
    if cfg.solved_slot == "prev":
        return coverage_from_thresholds(model, k_x, k_a, cfg.denominator_convention)
    return coverage_from_thresholds(model, k_a, k_x, cfg.denominator_convention)


@dataclass(frozen=True)
class StepResult:
    """Outcome of one backward step.

    ``status`` is ``binding`` when coverage equals the confidence level at
    ``pi``, ``slack`` when every allocation in the bracket satisfies the
    constraint, and ``infeasible`` when none does. ``side`` is ``ge`` when
    larger allocations raise the coverage and ``le`` otherwise.
    """

    pi: float
    status: str
    side: str

    @property
    def feasible(self) -> bool:
        return self.status == "binding"


def _solve_binding(g, target: float, upper: float) -> StepResult:
    eps = 1e-9 * upper
    xs = np.geomspace(eps, upper, _GRID_POINTS)
    vals = np.array([g(float(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise NoRoot("coverage is not finite across the allocation bracket")
    steps = np.diff(vals)
    if np.all(steps >= -_MONOTONE_TOL):
        side = "ge"
    elif np.all(steps <= _MONOTONE_TOL):
        side = "le"
    else:
        raise NonMonotone("coverage is not monotone in the solved allocation")
    resid = vals - target
    # unattainable or never binding: clamp to the endpoint that maximises
    # (infeasible) or minimises (slack) coverage along the monotone direction
    if resid.max() < 0:
        return StepResult(upper if side == "ge" else eps, "infeasible", side)
    if resid.min() >= 0:
        return StepResult(eps if side == "ge" else upper, "slack", side)
    idx = np.nonzero(np.sign(resid[:-1]) != np.sign(resid[1:]))[0][0]
    lo, hi = float(xs[idx]), float(xs[idx + 1])
    g_lo, g_hi = resid[idx], resid[idx + 1]
    if g_lo == 0:
        return StepResult(lo, "binding", side)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = g(mid) - target
        if not math.isfinite(g_mid):
            raise NoRoot("coverage is not finite inside the bracket")
        if g_mid == 0:
            return StepResult(mid, "binding", side)
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    return StepResult(lo if abs(g_lo) <= abs(g_hi) else hi, "binding", side)


def solve_step_no_cost(model, pi_cur: float, config: PolicyConfig, q: float | None = None) -> StepResult:
    """Earlier allocation at which the one-step coverage is binding."""
    cfg = resolve_config(model, config)
    _check_alloc(pi_cur, cfg)
    q = threshold_quantile(model, cfg) if q is None else q
    return _solve_binding(lambda x: step_coverage(model, x, pi_cur, cfg, q), cfg.confidence, cfg.wealth_scale)


def solve_step_with_cost(model, pi_cur: float, pi_next: float, config: PolicyConfig, q: float | None = None) -> StepResult:
    """Binding allocation two steps back when rebalancing is charged.

    With ``txn_rate = 0`` the thresholds are the no-cost ones bit for bit,
    so the result coincides with :func:`solve_step_no_cost`.
    """
    cfg = resolve_config(model, config)
    _check_alloc(pi_cur, cfg)
    _check_alloc(pi_next, cfg)
    q = threshold_quantile(model, cfg) if q is None else q
    return _solve_binding(lambda x: step_coverage(model, x, pi_cur, cfg, q, pi_next=pi_next, cost=True), cfg.confidence, cfg.wealth_scale)


def _check_alloc(pi, cfg):
    if not pi > 0:
        raise ZeroAllocation(f"allocation must be positive, got {pi!r}")
    if pi > cfg.wealth_scale:
        raise InvalidValue("pi", f"allocation {pi!r} exceeds wealth scale {cfg.wealth_scale!r}")


@dataclass(frozen=True)
class PolicyPath:
    pis: tuple
    statuses: tuple
    sides: tuple
    config: PolicyConfig
    family: str
    cost_mode: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.pis) != self.config.horizon:
            raise ValueError("path length differs from the horizon")
        if not all(0 < p <= self.config.wealth_scale for p in self.pis):
            raise ValueError("allocation left (0, M]")

    @property
    def feasible(self) -> tuple:
        return tuple(s in ("binding", "terminal") for s in self.statuses)

    def rows(self):
        for t, (pi, status, side, ok) in enumerate(zip(self.pis, self.statuses, self.sides, self.feasible)):
            yield {"t": t, "pi": pi, "feasible_flag": int(ok), "status": status, "side": side}


def backward_path(model, config: PolicyConfig, cost_mode: str = "none") -> PolicyPath:
    """Allocation path over the horizon, solved backward from the terminal value.

    Without cost each entry is solved from its successor. With cost the last
    two entries are seeded with the terminal value and each earlier entry is
    solved from the two that follow it.
    """
    if cost_mode not in COST_MODES:
        raise InvalidValue("cost_mode", f"must be one of {COST_MODES}")
    cfg = resolve_config(model, config)
    q = threshold_quantile(model, cfg)
    h = cfg.horizon
    pis = [cfg.terminal_pi] * h
    statuses = ["terminal"] * h
    sides = [""] * h
    seeded = 2 if cost_mode == "with" else 1
    for t in range(h - 1 - seeded, -1, -1):
        if cost_mode == "with":
            res = solve_step_with_cost(model, pis[t + 1], pis[t + 2], cfg, q)
        else:
            res = solve_step_no_cost(model, pis[t + 1], cfg, q)
        pis[t], statuses[t], sides[t] = res.pi, res.status, res.side
    return PolicyPath(tuple(pis), tuple(statuses), tuple(sides), cfg, model.family, cost_mode, {"q": q})


def recursion_coefficient(model, config: PolicyConfig, grid=None) -> tuple[float, np.ndarray]:
    """Fit ``1/pi_{t-1} = 1/pi_t + c`` to solved no-cost steps.

    This is the shape shared by the bounds ``pi_t/(c*pi_t + 1)`` and
    ``pi_t/(1 - c*pi_t)`` (with the sign of ``c`` flipped for the latter).
    Returns the least-squares ``c`` over binding grid points and the
    pointwise values.
    """
    cfg = resolve_config(model, config)
    q = threshold_quantile(model, cfg)
    grid = np.linspace(0.05, 1.0, 20) * cfg.wealth_scale if grid is None else np.asarray(grid, dtype=float)
    values = []
    for pi_t in grid:
        res = solve_step_no_cost(model, float(pi_t), cfg, q)
        if res.feasible:
            values.append(1.0 / res.pi - 1.0 / pi_t)
    values = np.asarray(values)
    if values.size == 0:
        raise NoRoot("no binding step on the regression grid")
    return float(values.mean()), values
