"""One test per acceptance criterion; each records a PASS/FAIL line.

The lines are printed as they are produced and again in the terminal
summary. Criterion 6 is a soft check: a miss is reported and warned
about, but does not fail the run.
"""

import subprocess
import sys
import time
import warnings

import numpy as np
import pytest
from scipy import integrate

from conftest import ACCEPTANCE_LINES
from varpol.backtest import value_path
from varpol.dists import InverseGaussianParams, MixtureNormalParams, ParetoParams, WeibullParams, mixture_diagnostics
from varpol.fit import _weibull_score, fit_invgauss, fit_kde, fit_pareto, fit_weibull
from varpol.gof import ks_critical
from varpol.policy import (
    PolicyConfig,
    backward_path,
    default_config,
    recursion_coefficient,
    solve_step_no_cost,
    solve_step_with_cost,
    step_coverage,
)

LOMAX = ParetoParams(85.34364, 10346.37374, "lomax")
WEIBULL = WeibullParams(0.0104, 1.263)
IG = InverseGaussianParams(0.0097, 0.0044)
PI_GRID = np.linspace(0.05, 1.0, 20)


def record(number, ok, detail, soft=False):
    tag = "PASS" if ok else ("SOFT-FAIL" if soft else "FAIL")
    line = f"[criterion {number:>2}] {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def kde_model():
    # 100-point synthetic sample placed at normal quantiles, mostly positive
    from scipy.special import ndtri

    u = (np.arange(100) + 0.5) / 100
    return fit_kde(0.02 + 0.01 * ndtri(u))


def _grid_models(kde_model):
    return [
        ("lomax", LOMAX, PolicyConfig(rate=0.00014), PI_GRID),
        ("weibull", WEIBULL, PolicyConfig(rate=0.00014), PI_GRID),
        ("invgauss", IG, PolicyConfig(rate=0.00014), PI_GRID),
        ("kde", kde_model, default_config("kde", 0.00014), PI_GRID * 1000),
    ]


def test_criterion_01_ks_critical():
    got = ks_critical(50, 0.05)
    ok = abs(got - 0.19206) <= 1e-4
    record(1, ok, f"ks_critical(50, 0.05) = {got:.6f}, target 0.19206 +/- 1e-4")
    assert ok


def test_criterion_02_mixture_diagnostics():
    d, bi = mixture_diagnostics(MixtureNormalParams(0.007286, 0.02137, 0.004741, 0.8646))
    ok = abs(d - 2.97) <= 0.01 and abs(bi - 1.016) <= 0.001
    record(2, ok, f"delta = {d:.5f} (2.97 +/- 0.01), BI = {bi:.5f} (1.016 +/- 0.001)")
    assert ok


def test_criterion_03_ig_cdf_quadrature():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10):
        ig = InverseGaussianParams(rng.uniform(0.2, 3.0), rng.uniform(0.2, 5.0))
        xs = np.linspace(0.02, 4 * ig.mean, 50)
        closed = ig.cdf(xs)
        for x, c in zip(xs, closed):
            q, _ = integrate.quad(lambda t: float(ig.pdf(t)), 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
            worst = max(worst, abs(c - q))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8
    record(3, ok, f"max |Phi-form - quadrature| = {worst:.2e} over 500 points (<= 1e-8), {elapsed:.2f}s")
    assert ok


def test_criterion_04_binding_constraint(kde_model):
    start = time.perf_counter()
    worst, counts = 0.0, {}
    for name, model, cfg, grid in _grid_models(kde_model):
        binding = flagged = 0
        for pi_t in grid:
            res = solve_step_no_cost(model, float(pi_t), cfg)
            if res.feasible:
                binding += 1
                worst = max(worst, abs(step_coverage(model, res.pi, float(pi_t), cfg) - cfg.confidence))
            else:
                assert res.status in ("infeasible", "slack")
                flagged += 1
        counts[name] = (binding, flagged)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    summary = ", ".join(f"{k} {b} binding/{f} flagged" for k, (b, f) in counts.items())
    record(4, ok, f"max |coverage - 0.95| = {worst:.2e} (<= 1e-9); {summary}; {elapsed:.2f}s")
    assert ok


def test_criterion_05_zero_cost_reduction(kde_model):
    start = time.perf_counter()
    worst = 0.0
    for _, model, cfg, grid in _grid_models(kde_model):
        cfg0 = PolicyConfig(**{**cfg.__dict__, "txn_rate": 0.0})
        for pi_t in grid:
            a = solve_step_no_cost(model, float(pi_t), cfg0)
            b = solve_step_with_cost(model, float(pi_t), float(grid[len(grid) // 2]), cfg0)
            worst = max(worst, abs(a.pi - b.pi))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    record(5, ok, f"max |with-cost(r1=0) - no-cost| = {worst:.2e} (<= 1e-12), {elapsed:.2f}s")
    assert ok


def test_criterion_06_closed_form_regression():
    # soft: the published parameter scaling is ambiguous
    cfg = PolicyConfig(rate=0.00014)
    c_pareto, _ = recursion_coefficient(LOMAX, cfg)
    # the Weibull form has a pole at 1/13.08, so the grid stays below it
    c_weibull = -recursion_coefficient(WEIBULL, cfg, np.linspace(0.005, 0.07, 20))[0]
    ok_p = abs(c_pareto - 19.1977) <= 0.15 * 19.1977
    ok_w = abs(c_weibull - 13.08) <= 0.15 * 13.08
    record(6, ok_p, f"Pareto (Lomax) coefficient {c_pareto:.4f} vs 19.1977 (15%)", soft=True)
    record(6, ok_w, f"Weibull coefficient {c_weibull:.4f} vs 13.08 (15%)", soft=True)
    if not (ok_p and ok_w):
        warnings.warn(f"closed-form regression outside tolerance: pareto {c_pareto:.4f}, weibull {c_weibull:.4f}")


def test_criterion_07_telescoping():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        w = rng.normal(0.0, 1.0, rng.integers(1, 60))
        worst = max(worst, float(np.max(np.abs(value_path(w) - (w - w[-1])))))
    ok = worst <= 1e-12
    record(7, ok, f"max |u_t - (L_t - L_T)| = {worst:.2e} over 1000 paths (<= 1e-12)")
    assert ok


def test_criterion_08_mle_plug_back():
    x = WeibullParams(0.0104, 1.263).quantile((np.arange(700) + 0.5) / 700)
    w = fit_weibull(x)
    resid = abs(_weibull_score(np.log(x), w.model.shape))
    p = fit_pareto([2.0, 4.0, 8.0])
    ig = fit_invgauss([1.0, 2.0])
    ok = (
        resid < 1e-10
        and p.model.scale == 2.0
        and p.model.shape == 3.0 / (np.log(2.0) + np.log(4.0))
        and ig.model.mean == 1.5
        and ig.model.shape == 12.0
    )
    record(8, ok, f"Weibull residual {resid:.1e}; Pareto (2, {p.model.shape:.6f}); IG ({ig.model.mean}, {ig.model.shape!r})")
    assert ok


def test_criterion_09_kde_normalisation(kde_model):
    lo, hi = kde_model.lower, kde_model.upper
    mass, _ = integrate.quad(lambda t: float(kde_model.pdf(t)), lo, hi, limit=500)
    via_cdf = kde_model.cdf(hi) - kde_model.cdf(lo)
    ok = abs(mass - 1.0) <= 1e-6 and abs(via_cdf - 1.0) <= 1e-6
    record(9, ok, f"integral over [min-8h, max+8h]: quad {mass:.12f}, cdf table {via_cdf:.12f}")
    assert ok


def test_criterion_10_rate_ordering():
    lo = backward_path(LOMAX, default_config("pareto", 0.00008)).pis
    hi = backward_path(LOMAX, default_config("pareto", 0.00024)).pis
    ok = all(a >= b for a, b in zip(lo[-5:], hi[-5:]))
    record(10, ok, "final 5 allocations r=0.00008 " + str([round(v, 5) for v in lo[-5:]]) + " >= r=0.00024 " + str([round(v, 5) for v in hi[-5:]]))
    assert ok


def test_criterion_11_end_to_end_determinism(tmp_path):
    start = time.perf_counter()
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run([sys.executable, "-m", "varpol", "backtest", "--out-dir", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    elapsed = time.perf_counter() - start
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0 and elapsed < 10.0
    record(11, ok, f"{len(outputs[0])} backtest files byte-identical across two runs, {elapsed:.2f}s")
    assert ok
